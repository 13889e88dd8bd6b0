#pragma once

#include <string>
#include <vector>

namespace cslie {

/// Identifies which matrix Lie group an element or tangent vector belongs to.
///
/// Rn is the translation group T(n) embedded as [[I, x], [0, 1]]; it is used
/// for plain vector-valued unknowns. Composite holds a flat list of
/// non-composite kinds and represents their block-diagonal product group.
class GroupKind {
 public:
  enum class Tag { SO3, SE2, SE3, SE23, Rn, Composite };

  static GroupKind so3() { return GroupKind(Tag::SO3); }
  static GroupKind se2() { return GroupKind(Tag::SE2); }
  static GroupKind se3() { return GroupKind(Tag::SE3); }
  static GroupKind se23() { return GroupKind(Tag::SE23); }
  static GroupKind rn(int n);
  /// Nested composites are flattened. Throws on an empty list.
  static GroupKind composite(const std::vector<GroupKind>& children);
  /// `count` copies of `child`.
  static GroupKind composite(const GroupKind& child, int count);

  Tag tag() const { return tag_; }
  bool is_composite() const { return tag_ == Tag::Composite; }

  /// Number of degrees of freedom n (tangent dimension).
  int dof() const { return dof_; }
  /// Matrix size m of the m x m representation.
  int dim() const { return dim_; }

  const std::vector<GroupKind>& children() const { return children_; }
  /// Number of blocks: children().size() for composites, 1 otherwise.
  int block_count() const;
  /// Offset of block k within the stacked tangent vector.
  int dof_offset(int block) const;
  /// Offset of block k along the diagonal of the matrix representation.
  int dim_offset(int block) const;
  /// Kind of block k (the kind itself when not composite).
  const GroupKind& block(int k) const;

  std::string name() const;

  bool operator==(const GroupKind& other) const;

 private:
  explicit GroupKind(Tag tag, int n = 0);

  Tag tag_;
  int dof_ = 0;
  int dim_ = 0;
  std::vector<GroupKind> children_;
  std::vector<int> dof_offsets_;
  std::vector<int> dim_offsets_;
};

}  // namespace cslie
