#include "cslie/group_kind.hpp"

#include "cslie/errors.hpp"

namespace cslie {

GroupKind::GroupKind(Tag tag, int n) : tag_(tag) {
  switch (tag) {
    case Tag::SO3:
      dof_ = 3;
      dim_ = 3;
      break;
    case Tag::SE2:
      dof_ = 3;
      dim_ = 3;
      break;
    case Tag::SE3:
      dof_ = 6;
      dim_ = 4;
      break;
    case Tag::SE23:
      dof_ = 9;
      dim_ = 5;
      break;
    case Tag::Rn:
      dof_ = n;
      dim_ = n + 1;
      break;
    case Tag::Composite:
      break;
  }
}

GroupKind GroupKind::rn(int n) {
  if (n < 1) throw DimensionError("Rn kind needs n >= 1");
  return GroupKind(Tag::Rn, n);
}

GroupKind GroupKind::composite(const std::vector<GroupKind>& children) {
  if (children.empty()) throw ValidationError("composite kind needs at least one block");
  GroupKind kind(Tag::Composite);
  for (const auto& c : children) {
    if (c.is_composite()) {
      kind.children_.insert(kind.children_.end(), c.children_.begin(),
                            c.children_.end());
    } else {
      kind.children_.push_back(c);
    }
  }
  kind.dof_offsets_.reserve(kind.children_.size());
  kind.dim_offsets_.reserve(kind.children_.size());
  for (const auto& c : kind.children_) {
    kind.dof_offsets_.push_back(kind.dof_);
    kind.dim_offsets_.push_back(kind.dim_);
    kind.dof_ += c.dof_;
    kind.dim_ += c.dim_;
  }
  return kind;
}

GroupKind GroupKind::composite(const GroupKind& child, int count) {
  if (count < 1) throw ValidationError("composite kind needs at least one block");
  return composite(std::vector<GroupKind>(static_cast<std::size_t>(count), child));
}

int GroupKind::block_count() const {
  return is_composite() ? static_cast<int>(children_.size()) : 1;
}

int GroupKind::dof_offset(int block) const {
  return is_composite() ? dof_offsets_.at(static_cast<std::size_t>(block)) : 0;
}

int GroupKind::dim_offset(int block) const {
  return is_composite() ? dim_offsets_.at(static_cast<std::size_t>(block)) : 0;
}

const GroupKind& GroupKind::block(int k) const {
  return is_composite() ? children_.at(static_cast<std::size_t>(k)) : *this;
}

std::string GroupKind::name() const {
  switch (tag_) {
    case Tag::SO3:
      return "SO3";
    case Tag::SE2:
      return "SE2";
    case Tag::SE3:
      return "SE3";
    case Tag::SE23:
      return "SE23";
    case Tag::Rn:
      return "R" + std::to_string(dof_);
    case Tag::Composite: {
      std::string s = "Composite(";
      for (std::size_t i = 0; i < children_.size(); ++i) {
        if (i) s += ",";
        s += children_[i].name();
      }
      return s + ")";
    }
  }
  return "?";
}

bool GroupKind::operator==(const GroupKind& other) const {
  return tag_ == other.tag_ && dof_ == other.dof_ && children_ == other.children_;
}

}  // namespace cslie
