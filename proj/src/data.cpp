#include "cslie/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cslie/random.hpp"

namespace cslie::data {

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

Element<double> PoseRecord3::se23() const {
  if (!velocity) throw ValidationError("pose record at t=" + std::to_string(t) + " has no velocity");
  MatX<double> m = MatX<double>::Identity(5, 5);
  m.topLeftCorner<3, 3>() = attitude.normalized().toRotationMatrix();
  m.block<3, 1>(0, 3) = *velocity;
  m.block<3, 1>(0, 4) = position;
  return Element<double>(GroupKind::se23(), m);
}

PoseRecord3 PoseRecord3::from_se23(double t, const Element<double>& x) {
  if (x.kind().tag() != GroupKind::Tag::SE23) throw DimensionError("from_se23 needs an SE23 element");
  const MatX<double>& m = x.mat();
  PoseRecord3 r;
  r.t = t;
  r.attitude = Eigen::Quaterniond(Mat3<double>(m.topLeftCorner<3, 3>()));
  r.velocity = Vec3<double>(m.block<3, 1>(0, 3));
  r.position = m.block<3, 1>(0, 4);
  return r;
}

Element<double> PoseRecord2::se2() const {
  MatX<double> m = MatX<double>::Identity(3, 3);
  m.topLeftCorner<2, 2>() = so2_exp(theta);
  m(0, 2) = x;
  m(1, 2) = y;
  return Element<double>(GroupKind::se2(), m);
}

PoseRecord2 PoseRecord2::from_se2(double t, const Element<double>& x) {
  if (x.kind().tag() != GroupKind::Tag::SE2) throw DimensionError("from_se2 needs an SE2 element");
  const MatX<double>& m = x.mat();
  return {t, m(0, 2), m(1, 2), std::atan2(m(1, 0), m(0, 0))};
}

// ---------------------------------------------------------------------------
// CSV reading
// ---------------------------------------------------------------------------

namespace {

struct Row {
  int line = 0;
  std::vector<std::string_view> fields;
};

class CsvFile {
 public:
  explicit CsvFile(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path);
    if (!in) throw ParseError(path_ + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    text_ = ss.str();
    split();
  }

  const std::vector<Row>& rows() const { return rows_; }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ParseError(path_ + ":" + std::to_string(line) + ": " + msg);
  }

  void require_rows() const {
    if (rows_.empty()) throw ParseError(path_ + ": empty (no data rows)");
  }

  void require_columns(const Row& r, std::size_t n, bool allow_extra = false) const {
    if (r.fields.size() < n || (!allow_extra && r.fields.size() != n)) {
      fail(r.line, "expected " + std::to_string(n) + " columns, found " + std::to_string(r.fields.size()));
    }
  }

  double real(const Row& r, std::size_t col) const {
    const auto f = r.fields[col];
    double v = 0.0;
    const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
    if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
      fail(r.line, "column " + std::to_string(col + 1) + ": cannot parse '" + std::string(f) + "' as a number");
    }
    if (!std::isfinite(v)) fail(r.line, "column " + std::to_string(col + 1) + ": non-finite value");
    return v;
  }

  std::int64_t integer(const Row& r, std::size_t col) const {
    const auto f = r.fields[col];
    std::int64_t v = 0;
    const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
    if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
      fail(r.line, "column " + std::to_string(col + 1) + ": cannot parse '" + std::string(f) + "' as an integer");
    }
    return v;
  }

  const std::string& path() const { return path_; }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

  void split() {
    std::string_view all(text_);
    int line = 0;
    bool first = true;
    while (!all.empty()) {
      const auto nl = all.find('\n');
      std::string_view l = all.substr(0, nl);
      all = nl == std::string_view::npos ? std::string_view{} : all.substr(nl + 1);
      ++line;
      l = trim(l);
      if (l.empty() || l.front() == '#') {
        first = false;
        continue;
      }
      // a leading line that starts with a letter is a header
      if (first && std::isalpha(static_cast<unsigned char>(l.front()))) {
        first = false;
        continue;
      }
      first = false;
      Row r;
      r.line = line;
      std::size_t start = 0;
      while (true) {
        const auto comma = l.find(',', start);
        r.fields.push_back(trim(l.substr(start, comma == std::string_view::npos ? l.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      rows_.push_back(std::move(r));
    }
  }

  std::string path_;
  std::string text_;
  std::vector<Row> rows_;
};

}  // namespace

ImuLog load_imu_csv(const std::filesystem::path& path) {
  const CsvFile f(path);
  f.require_rows();
  ImuLog log;
  std::int64_t prev = 0;
  for (std::size_t i = 0; i < f.rows().size(); ++i) {
    const Row& r = f.rows()[i];
    f.require_columns(r, 7);
    const std::int64_t ns = f.integer(r, 0);
    if (i == 0) {
      log.t0_ns = ns;
    } else if (ns <= prev) {
      f.fail(r.line, "timestamps must be strictly increasing");
    }
    prev = ns;
    ImuSample s;
    s.t = static_cast<double>(ns - log.t0_ns) * 1e-9;
    s.u.gyro = Vec3<double>(f.real(r, 1), f.real(r, 2), f.real(r, 3));
    s.u.acc = Vec3<double>(f.real(r, 4), f.real(r, 5), f.real(r, 6));
    log.samples.push_back(s);
  }
  return log;
}

GroundTruthLog load_groundtruth_csv(const std::filesystem::path& path) {
  const CsvFile f(path);
  f.require_rows();
  GroundTruthLog log;
  std::int64_t prev = 0;
  for (std::size_t i = 0; i < f.rows().size(); ++i) {
    const Row& r = f.rows()[i];
    f.require_columns(r, 11, true);
    const std::int64_t ns = f.integer(r, 0);
    if (i == 0) {
      log.t0_ns = ns;
    } else if (ns <= prev) {
      f.fail(r.line, "timestamps must be strictly increasing");
    }
    prev = ns;
    PoseRecord3 p;
    p.t = static_cast<double>(ns - log.t0_ns) * 1e-9;
    p.position = Vec3<double>(f.real(r, 1), f.real(r, 2), f.real(r, 3));
    Eigen::Quaterniond q(f.real(r, 4), f.real(r, 5), f.real(r, 6), f.real(r, 7));
    if (std::abs(q.norm() - 1.0) > 1e-6) {
      f.fail(r.line, "quaternion norm " + std::to_string(q.norm()) + " is not within 1e-6 of 1");
    }
    p.attitude = q.normalized();
    p.velocity = Vec3<double>(f.real(r, 8), f.real(r, 9), f.real(r, 10));
    log.records.push_back(p);
  }
  return log;
}

std::vector<OdometrySample> load_odometry_csv(const std::filesystem::path& path) {
  const CsvFile f(path);
  f.require_rows();
  std::vector<OdometrySample> out;
  for (const Row& r : f.rows()) {
    f.require_columns(r, 3);
    OdometrySample s{f.real(r, 0), {f.real(r, 1), f.real(r, 2)}};
    if (!out.empty() && !(s.t > out.back().t)) f.fail(r.line, "times must be strictly increasing");
    out.push_back(s);
  }
  return out;
}

std::vector<RangeBearingSample> load_rangebearing_csv(const std::filesystem::path& path) {
  const CsvFile f(path);
  f.require_rows();
  std::vector<RangeBearingSample> out;
  for (const Row& r : f.rows()) {
    f.require_columns(r, 4);
    RangeBearingSample s{f.real(r, 0), static_cast<int>(f.integer(r, 1)), f.real(r, 2), f.real(r, 3)};
    if (!out.empty() && s.t < out.back().t) f.fail(r.line, "times must be nondecreasing");
    if (s.range < 0.0) f.fail(r.line, "negative range");
    out.push_back(s);
  }
  return out;
}

LandmarkMap load_landmarks_csv(const std::filesystem::path& path) {
  const CsvFile f(path);
  f.require_rows();
  LandmarkMap out;
  for (const Row& r : f.rows()) {
    f.require_columns(r, 3);
    const int id = static_cast<int>(f.integer(r, 0));
    if (!out.emplace(id, Vec2<double>(f.real(r, 1), f.real(r, 2))).second) {
      f.fail(r.line, "duplicate landmark id " + std::to_string(id));
    }
  }
  return out;
}

std::vector<PoseRecord2> load_pose2_csv(const std::filesystem::path& path) {
  const CsvFile f(path);
  f.require_rows();
  std::vector<PoseRecord2> out;
  for (const Row& r : f.rows()) {
    f.require_columns(r, 4);
    PoseRecord2 p{f.real(r, 0), f.real(r, 1), f.real(r, 2), f.real(r, 3)};
    if (!out.empty() && !(p.t > out.back().t)) f.fail(r.line, "times must be strictly increasing");
    out.push_back(p);
  }
  return out;
}

void rebase(GroundTruthLog& log, std::int64_t t0_ns) {
  const double shift = static_cast<double>(log.t0_ns - t0_ns) * 1e-9;
  for (auto& r : log.records) r.t += shift;
  log.t0_ns = t0_ns;
}

// ---------------------------------------------------------------------------
// Streams
// ---------------------------------------------------------------------------

double native_rate(const std::vector<double>& times) {
  if (times.size() < 2) throw ValidationError("a rate needs at least two samples");
  std::vector<double> dt;
  dt.reserve(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i) dt.push_back(times[i] - times[i - 1]);
  std::nth_element(dt.begin(), dt.begin() + dt.size() / 2, dt.end());
  const double med = dt[dt.size() / 2];
  if (!(med > 0.0)) throw ValidationError("sample times are not increasing");
  return 1.0 / med;
}

std::vector<std::size_t> downsample_indices(const std::vector<double>& times, double target_hz) {
  if (!(target_hz > 0.0)) throw ValidationError("downsample target must be positive");
  if (times.empty()) return {};
  if (times.size() == 1) return {0};
  const double native = native_rate(times);
  if (target_hz > native * (1.0 + 1e-6)) {
    throw ValidationError("downsample target " + std::to_string(target_hz) + " Hz exceeds the native rate " +
                          std::to_string(native) + " Hz");
  }
  const double t0 = times.front();
  const double span = times.back() - t0;
  const auto count = static_cast<long>(std::floor(span * target_hz + 1e-6)) + 1;
  std::vector<std::size_t> out;
  for (long i = 0; i < count; ++i) {
    const double g = t0 + static_cast<double>(i) / target_hz;
    auto it = std::lower_bound(times.begin(), times.end(), g);
    std::size_t idx;
    if (it == times.end()) {
      idx = times.size() - 1;
    } else if (it == times.begin()) {
      idx = 0;
    } else {
      const auto hi = static_cast<std::size_t>(it - times.begin());
      idx = (g - times[hi - 1] <= times[hi] - g) ? hi - 1 : hi;
    }
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

std::vector<PositionSample> simulate_position_measurements(const std::vector<PoseRecord3>& truth,
                                                           double sigma, double rate_hz,
                                                           std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ValidationError("position noise sigma must be nonnegative");
  Rng rng(seed);
  std::vector<PositionSample> out;
  for (const auto& r : downsample(truth, rate_hz)) {
    PositionSample s{r.t, r.position};
    if (sigma > 0.0) {
      for (int a = 0; a < 3; ++a) s.y(a) += rng.gaussian(sigma);
    }
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

namespace {

struct Wave {
  double amp, freq, phase;
  double operator()(double t) const { return amp * std::sin(freq * t + phase); }
};

Wave wave(Rng& rng, double amp, double freq) {
  return {amp, freq * rng.uniform(0.8, 1.2), rng.uniform(0.0, 2.0 * std::numbers::pi)};
}

std::vector<double> sample_times(const SyntheticSpec& spec, int extra) {
  if (!(spec.duration > 0.0) || !(spec.rate_hz > 0.0)) {
    throw ValidationError("synthetic duration and rate must be positive");
  }
  const auto n = static_cast<int>(std::lround(spec.duration * spec.rate_hz));
  if (n < 2) throw ValidationError("synthetic run needs at least two states");
  std::vector<double> t;
  for (int k = 0; k < n + extra; ++k) t.push_back(spec.t_start + k / spec.rate_hz);
  return t;
}

SyntheticData generate_se23(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  const Wave px1 = wave(rng, 2.0, 0.30), px2 = wave(rng, 0.5, 0.70);
  const Wave py1 = wave(rng, 1.5, 0.25), py2 = wave(rng, 0.4, 0.90);
  const Wave pz1 = wave(rng, 0.3, 0.50);
  const Wave yaw = wave(rng, 1.2, 0.20), pitch = wave(rng, 0.1, 0.60), roll = wave(rng, 0.1, 0.70);

  // two extra samples so the last state's velocity and input are defined
  const std::vector<double> ts = sample_times(spec, 2);
  const int n = static_cast<int>(ts.size()) - 2;
  const double dt = 1.0 / spec.rate_hz;
  std::vector<Vec3<double>> r, v;
  std::vector<Mat3<double>> c;
  for (double t : ts) {
    r.emplace_back(px1(t) + px2(t), py1(t) + py2(t), 1.0 + pz1(t));
    c.push_back(so3_exp(Vec3<double>(0, 0, yaw(t))) * so3_exp(Vec3<double>(0, pitch(t), 0)) *
                so3_exp(Vec3<double>(roll(t), 0, 0)));
  }
  for (int k = 0; k <= n; ++k) v.push_back((r[k + 1] - r[k]) / dt);

  SyntheticData d;
  d.times.assign(ts.begin(), ts.begin() + n);
  for (int k = 0; k < n; ++k) {
    MatX<double> m = MatX<double>::Identity(5, 5);
    m.topLeftCorner<3, 3>() = c[k];
    m.block<3, 1>(0, 3) = v[k];
    m.block<3, 1>(0, 4) = r[k];
    d.truth.emplace_back(GroupKind::se23(), m);
    d.groundtruth.records.push_back(PoseRecord3::from_se23(ts[k], d.truth.back()));

    ImuSample s;
    s.t = ts[k];
    s.u.acc = c[k].transpose() * ((v[k + 1] - v[k]) / dt - estimation::kDefaultGravity);
    s.u.gyro = so3_log(Mat3<double>(c[k].transpose() * c[k + 1])) / dt;
    s.u.acc += spec.acc_bias;
    s.u.gyro += spec.gyro_bias;
    if (!spec.noise_free) {
      for (int a = 0; a < 3; ++a) s.u.acc(a) += rng.gaussian(spec.acc_sigma);
      for (int a = 0; a < 3; ++a) s.u.gyro(a) += rng.gaussian(spec.gyro_sigma);
    }
    d.imu.samples.push_back(s);
  }
  return d;
}

SyntheticData generate_se2(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  const Wave vel = wave(rng, 0.1, 0.15);
  const Wave ang = wave(rng, 0.1, 0.07);
  const std::vector<double> ts = sample_times(spec, 0);
  const int n = static_cast<int>(ts.size());
  const double dt = 1.0 / spec.rate_hz;

  SyntheticData d;
  d.times = ts;
  Element<double> x = Element<double>::identity(GroupKind::se2());
  const VecX<double> none;
  for (int k = 0; k < n; ++k) {
    d.truth.push_back(x);
    d.pose2.push_back(PoseRecord2::from_se2(ts[k], x));
    VecX<double> u(2);
    u << 0.4 + vel(ts[k]), 0.15 + ang(ts[k]);
    x = estimation::unicycle_propagate(x, u, none, dt);
    OdometrySample s{ts[k], {u(0), u(1)}};
    if (!spec.noise_free) {
      s.u.vel += rng.gaussian(spec.vel_sigma);
      s.u.ang += rng.gaussian(spec.ang_sigma);
    }
    d.odometry.push_back(s);
  }

  // landmarks scattered over the bounding box of the path, 3 m margin
  Vec2<double> lo = Vec2<double>::Constant(1e300), hi = Vec2<double>::Constant(-1e300);
  for (const auto& p : d.pose2) {
    lo = lo.cwiseMin(Vec2<double>(p.x, p.y));
    hi = hi.cwiseMax(Vec2<double>(p.x, p.y));
  }
  lo.array() -= 3.0;
  hi.array() += 3.0;
  for (int id = 1; id <= spec.landmark_count; ++id) {
    d.landmarks[id] = Vec2<double>(rng.uniform(lo(0), hi(0)), rng.uniform(lo(1), hi(1)));
  }

  for (int k = 0; k < n; ++k) {
    int visible = 0;
    for (const auto& [id, lm] : d.landmarks) {
      const Vec2<double> g = estimation::predict_range_bearing(d.truth[k], lm, spec.sensor_offset);
      if (g(0) > spec.max_range || g(0) < 0.1) continue;
      ++visible;
      RangeBearingSample s{ts[k], id, g(0), g(1)};
      if (!spec.noise_free) {
        s.range += rng.gaussian(spec.range_sigma);
        s.bearing += rng.gaussian(spec.bearing_sigma);
      }
      s.bearing = wrap_angle(s.bearing);
      d.rangebearing.push_back(s);
    }
    if (visible == 0) {
      throw NumericalError("synthetic state " + std::to_string(k) + " sees no landmark within " +
                           std::to_string(spec.max_range) + " m");
    }
  }
  return d;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  return spec.kind == estimation::ProcessKind::ImuSE23 ? generate_se23(spec) : generate_se2(spec);
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

namespace {

void require_aligned(std::size_t a, std::size_t b, std::size_t c = 0, bool has_c = false) {
  if (a != b || (has_c && a != c)) throw DimensionError("writer inputs have different lengths");
}

void put(std::ostream& os, std::initializer_list<double> values) {
  char buf[40];
  bool first = true;
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.17e", v);
    if (!first) os << ',';
    os << buf;
    first = false;
  }
  os << '\n';
}

}  // namespace

double attitude_error(const Mat3<double>& c_est, const Mat3<double>& c_true) {
  const Mat3<double> d = c_est.transpose() * c_true;
  const double s = 0.5 * unskew(Mat3<double>(d - d.transpose())).norm();
  const double c = 0.5 * (d.trace() - 1.0);
  return std::atan2(s, c);
}

Vec3<double> se2_sigmas(const Element<double>& x, const MatX<double>& cov) {
  if (cov.rows() != 3 || cov.cols() != 3) throw DimensionError("SE2 covariance must be 3x3");
  const Mat2<double> c = x.mat().topLeftCorner<2, 2>();
  const Mat2<double> pos = c * cov.bottomRightCorner<2, 2>() * c.transpose();
  return {std::sqrt(pos(0, 0)), std::sqrt(pos(1, 1)), std::sqrt(cov(0, 0))};
}

void write_trajectory_csv(std::ostream& os, const std::vector<double>& times,
                          const std::vector<Element<double>>& states) {
  require_aligned(times.size(), states.size());
  if (states.empty()) throw ValidationError("no states to write");
  const auto tag = states.front().kind().tag();
  if (tag == GroupKind::Tag::SE23) {
    os << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz\n";
    for (std::size_t k = 0; k < states.size(); ++k) {
      const auto r = PoseRecord3::from_se23(times[k], states[k]);
      const auto& q = r.attitude;
      put(os, {r.t, r.position(0), r.position(1), r.position(2), q.w(), q.x(), q.y(), q.z(),
               (*r.velocity)(0), (*r.velocity)(1), (*r.velocity)(2)});
    }
  } else if (tag == GroupKind::Tag::SE2) {
    os << "t,x,y,theta\n";
    for (std::size_t k = 0; k < states.size(); ++k) {
      const auto r = PoseRecord2::from_se2(times[k], states[k]);
      put(os, {r.t, r.x, r.y, r.theta});
    }
  } else {
    throw ValidationError("trajectories are written for SE23 or SE2 states");
  }
}

void write_error_csv_se23(std::ostream& os, const std::vector<double>& times,
                          const std::vector<Element<double>>& estimate,
                          const std::vector<Element<double>>& truth) {
  require_aligned(times.size(), estimate.size(), truth.size(), true);
  os << "t,pos_err,vel_err,att_err\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    const MatX<double>& a = estimate[k].mat();
    const MatX<double>& b = truth[k].mat();
    put(os, {times[k], (a.block<3, 1>(0, 4) - b.block<3, 1>(0, 4)).norm(),
             (a.block<3, 1>(0, 3) - b.block<3, 1>(0, 3)).norm(),
             attitude_error(a.topLeftCorner<3, 3>(), b.topLeftCorner<3, 3>())});
  }
}

void write_error_csv_se2(std::ostream& os, const std::vector<double>& times,
                         const std::vector<Element<double>>& estimate,
                         const std::vector<Element<double>>& truth,
                         const std::vector<MatX<double>>* covariances) {
  require_aligned(times.size(), estimate.size(), truth.size(), true);
  if (covariances) require_aligned(times.size(), covariances->size());
  os << "t,x_err,y_err,theta_err,sigma_x,sigma_y,sigma_theta\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto a = PoseRecord2::from_se2(times[k], estimate[k]);
    const auto b = PoseRecord2::from_se2(times[k], truth[k]);
    Vec3<double> s(nan, nan, nan);
    if (covariances) s = se2_sigmas(estimate[k], (*covariances)[k]);
    put(os, {times[k], a.x - b.x, a.y - b.y, wrap_angle(a.theta - b.theta), s(0), s(1), s(2)});
  }
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
      throw ParseError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read(const json& obj, const char* key, std::optional<T>& out, const std::string& where) {
  if (!obj.contains(key)) return;
  T v{};
  read(obj, key, v, where);
  out = std::move(v);
}

void require_positive(const std::optional<std::vector<double>>& v, const char* name) {
  if (!v) return;
  if (v->empty()) throw ValidationError(std::string(name) + " is empty");
  for (double d : *v) {
    if (!(d > 0.0) || !std::isfinite(d)) throw ValidationError(std::string(name) + " entries must be positive");
  }
}

}  // namespace

JacobianBackend parse_backend(const std::string& s) {
  for (auto b : {JacobianBackend::ComplexStep, JacobianBackend::Central, JacobianBackend::Analytic}) {
    if (to_string(b) == s) return b;
  }
  throw ParseError("unknown Jacobian backend '" + s + "'");
}

LinearSolver parse_linear_solver(const std::string& s) {
  for (auto l : {LinearSolver::Dense, LinearSolver::SparseBlock}) {
    if (to_string(l) == s) return l;
  }
  throw ParseError("unknown linear solver '" + s + "'");
}

void RunConfig::validate() const {
  if (!std::isfinite(t_start) || !std::isfinite(t_end) || !(t_end > t_start)) {
    throw ValidationError("t_end must be greater than t_start");
  }
  if (!(input_rate_hz > 0.0)) throw ValidationError("input_rate_hz must be positive");
  if (!(measurement_rate_hz > 0.0)) throw ValidationError("measurement_rate_hz must be positive");
  require_positive(q_diag, "q_diag");
  require_positive(r_diag, "r_diag");
  require_positive(p0_diag, "p0_diag");
  if (!(position_sigma >= 0.0)) throw ValidationError("position_sigma must be nonnegative");
  if (!(h > 0.0)) throw ValidationError("h must be positive");
  if (solver.max_iterations <= 0) throw ValidationError("solver.max_iterations must be positive");
  if (!(solver.step_tol > 0.0) || !(solver.cost_tol > 0.0) || !(solver.fd_step > 0.0)) {
    throw ValidationError("solver tolerances must be positive");
  }
  if (sensor_offset && !std::isfinite(*sensor_offset)) throw ValidationError("sensor_offset must be finite");
  for (const auto* b : {&acc_bias, &gyro_bias}) {
    if (*b && (b->value().size() != 3 || !std::all_of(b->value().begin(), b->value().end(),
                                                      [](double v) { return std::isfinite(v); }))) {
      throw ValidationError("IMU biases need 3 finite entries");
    }
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  reject_unknown(j,
                 {"t_start", "t_end", "input_rate_hz", "measurement_rate_hz", "q_diag", "r_diag", "p0_diag",
                  "position_sigma", "h", "solver", "seed", "synthetic", "acc_bias", "gyro_bias", "sensor_offset",
                  "paths"},
                 "config");
  RunConfig c;
  read(j, "t_start", c.t_start, "config");
  read(j, "t_end", c.t_end, "config");
  read(j, "input_rate_hz", c.input_rate_hz, "config");
  read(j, "measurement_rate_hz", c.measurement_rate_hz, "config");
  read(j, "q_diag", c.q_diag, "config");
  read(j, "r_diag", c.r_diag, "config");
  read(j, "p0_diag", c.p0_diag, "config");
  read(j, "position_sigma", c.position_sigma, "config");
  read(j, "h", c.h, "config");
  read(j, "seed", c.seed, "config");
  read(j, "synthetic", c.synthetic, "config");
  read(j, "acc_bias", c.acc_bias, "config");
  read(j, "gyro_bias", c.gyro_bias, "config");
  read(j, "sensor_offset", c.sensor_offset, "config");
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    reject_unknown(s, {"max_iterations", "step_tol", "cost_tol", "fd_step", "backend", "linear_solver"},
                   "config.solver");
    read(s, "max_iterations", c.solver.max_iterations, "config.solver");
    read(s, "step_tol", c.solver.step_tol, "config.solver");
    read(s, "cost_tol", c.solver.cost_tol, "config.solver");
    read(s, "fd_step", c.solver.fd_step, "config.solver");
    std::string name;
    read(s, "backend", name, "config.solver");
    if (!name.empty()) c.solver.backend = parse_backend(name);
    name.clear();
    read(s, "linear_solver", name, "config.solver");
    if (!name.empty()) c.solver.linear_solver = parse_linear_solver(name);
  }
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    reject_unknown(p, {"imu", "groundtruth", "odometry", "rangebearing", "landmarks", "pose2"}, "config.paths");
    read(p, "imu", c.paths.imu, "config.paths");
    read(p, "groundtruth", c.paths.groundtruth, "config.paths");
    read(p, "odometry", c.paths.odometry, "config.paths");
    read(p, "rangebearing", c.paths.rangebearing, "config.paths");
    read(p, "landmarks", c.paths.landmarks, "config.paths");
    read(p, "pose2", c.paths.pose2, "config.paths");
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace cslie::data
