#include "keymotion/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace keymotion {

ControlError ComputeControlError(const Matrix& keyjoints, const ExplicitControl& control) {
  control.Validate();
  Require(keyjoints.rows() == control.mask.rows() && keyjoints.cols() == kKeyjointDim,
          "control error: motion and control horizons differ");
  ControlError e;
  double pos_sum = 0.0, yaw_sum = 0.0;
  for (Eigen::Index n = 0; n < keyjoints.rows(); ++n) {
    for (int j = 0; j < kKeyjointCount; ++j) {
      const int c = KeyjointColumn(j);
      double sq = 0.0;
      bool any = false;
      for (int k = 0; k < 3; ++k) {
        if (control.mask(n, c + k) == 0.0) continue;
        any = true;
        sq += std::pow(keyjoints(n, c + k) - control.values(n, c + k), 2);
      }
      if (!any) continue;
      pos_sum += std::sqrt(sq);
      ++e.position_count;
    }
    if (control.mask(n, kYawColumn) != 0.0) {
      yaw_sum += std::abs(WrapAngle(keyjoints(n, kYawColumn) - control.values(n, kYawColumn)));
      ++e.yaw_count;
    }
  }
  if (e.position_count == 0 && e.yaw_count == 0) throw std::invalid_argument("control error: empty mask");
  if (e.position_count > 0) e.position_m = pos_sum / e.position_count;
  if (e.yaw_count > 0) e.yaw_rad = yaw_sum / e.yaw_count;
  return e;
}

ControlError ComputeControlError(const MotionSequence& motion, const ExplicitControl& control) {
  return ComputeControlError(ExtractKeyjoints(motion).frames, control);
}

double FootSkatingRatio(const MotionSequence& motion) {
  Require(motion.frame_count() >= 2, "foot skating needs at least two frames");
  const Matrix g = GlobalJointPositions(motion);
  int contacts = 0, skating = 0;
  for (Eigen::Index n = 0; n + 1 < g.rows(); ++n) {
    for (int foot : motion.skeleton.foot_indices) {
      const int c = 3 * foot;
      if (!(g(n, c + 1) < kContactHeight)) continue;
      ++contacts;
      const double step = std::hypot(g(n + 1, c) - g(n, c), g(n + 1, c + 2) - g(n, c + 2));
      if (step > kContactHorizontalStep) ++skating;
    }
  }
  return contacts == 0 ? 0.0 : static_cast<double>(skating) / contacts;
}

std::pair<double, double> GoalDistances(const MotionSequence& motion, const GoalSpec& goal) {
  goal.Validate();
  const Matrix k = ExtractKeyjoints(motion).frames;
  const Eigen::Index last = k.rows() - 1;
  double to_goal = 0.0;
  for (size_t i = 0; i < goal.goal_joints.size(); ++i) {
    const Vec3 p = k.block<1, 3>(last, KeyjointColumn(goal.goal_joints[i])).transpose();
    to_goal += (p - goal.targets[i]).norm();
  }
  double to_start = 0.0;
  for (int j = 0; j < kKeyjointCount; ++j) {
    const Vec3 p = k.block<1, 3>(0, KeyjointColumn(j)).transpose();
    to_start += (p - goal.start_pose.segment<3>(KeyjointColumn(j))).norm();
  }
  return {to_goal / static_cast<double>(goal.goal_joints.size()), to_start / kKeyjointCount};
}

double Diversity(const std::vector<Matrix>& samples) {
  Require(samples.size() >= 2, "diversity needs at least two samples");
  for (const Matrix& s : samples) {
    Require(s.rows() == samples[0].rows() && s.cols() == samples[0].cols(), "diversity: mismatched sample shapes");
  }
  double sum = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    for (size_t j = i + 1; j < samples.size(); ++j) {
      sum += (samples[i] - samples[j]).norm();
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

Vector MotionFeatures(const FullBodyRepr& repr, double fps) {
  Require(repr.frames.cols() == kFullBodyDim && repr.frames.rows() >= 2, "features need an N x 51 motion, N >= 2");
  const Matrix g = GlobalJointPositions(DecodeFullBody(repr, StandardSkeleton(), 1.0));
  const Eigen::Index steps = g.rows() - 1;
  Vector f = Vector::Zero(kMotionFeatureDim);
  for (int j = 0; j < kJointCount; ++j) {
    Vector speed(steps);
    for (Eigen::Index n = 0; n < steps; ++n) speed(n) = (g.block<1, 3>(n + 1, 3 * j) - g.block<1, 3>(n, 3 * j)).norm() * fps;
    const double mean = speed.mean();
    f(2 * j) = mean;
    f(2 * j + 1) = std::sqrt((speed.array() - mean).square().mean());
    if (j == 0) {
      for (Eigen::Index n = 0; n < steps; ++n) {
        const int bin = std::min(7, static_cast<int>(speed(n) / 0.3));
        f(32 + bin) += 1.0 / static_cast<double>(steps);
      }
    }
  }
  f.tail(45) = repr.frames.middleCols(4, 45).colwise().mean().transpose();
  return f;
}

namespace {

Matrix SymmetricSqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double FrechetDistance(const Vector& mean_a, const Matrix& cov_a, const Vector& mean_b, const Matrix& cov_b) {
  const Eigen::Index d = mean_a.size();
  Require(mean_b.size() == d && cov_a.rows() == d && cov_a.cols() == d && cov_b.rows() == d && cov_b.cols() == d,
          "frechet: dimension mismatch");
  const Matrix reg = 1e-6 * Matrix::Identity(d, d);
  const Matrix a = cov_a + reg;
  const Matrix b = cov_b + reg;
  const Matrix root_a = SymmetricSqrt(a);
  const Matrix inner = root_a * b * root_a;
  const Matrix cross = SymmetricSqrt(0.5 * (inner + inner.transpose()));
  const double value = (mean_a - mean_b).squaredNorm() + a.trace() + b.trace() - 2.0 * cross.trace();
  return std::max(0.0, value);
}

double FrechetDistanceOfSamples(const Matrix& a, const Matrix& b) {
  Require(a.rows() >= 2 && b.rows() >= 2 && a.cols() == b.cols(), "frechet: need >= 2 samples of equal width");
  auto fit = [](const Matrix& x, Vector& mean, Matrix& cov) {
    mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - mean.transpose();
    cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  };
  Vector ma, mb;
  Matrix ca, cb;
  fit(a, ma, ca);
  fit(b, mb, cb);
  return FrechetDistance(ma, ca, mb, cb);
}

double FeatureFrechet(const std::vector<FullBodyRepr>& a, const std::vector<FullBodyRepr>& b) {
  Require(a.size() >= 10 && b.size() >= 10, "feature_frechet needs at least 10 samples per set");
  auto features = [](const std::vector<FullBodyRepr>& set) {
    Matrix m(static_cast<Eigen::Index>(set.size()), kMotionFeatureDim);
    for (size_t i = 0; i < set.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = MotionFeatures(set[i]).transpose();
    return m;
  };
  return FrechetDistanceOfSamples(features(a), features(b));
}

std::vector<std::pair<std::string, std::string>> MetricsFields(const MetricsReport& r) {
  std::vector<std::pair<std::string, std::string>> out;
  auto add = [&](const char* key, const std::optional<double>& v) {
    if (!v) return;
    std::ostringstream s;
    s << std::setprecision(10) << *v;
    out.emplace_back(key, s.str());
  };
  add("control_error_m", r.control_error_m);
  add("control_yaw_error_rad", r.control_yaw_error_rad);
  add("foot_skating_ratio", r.foot_skating_ratio);
  add("dist_to_goal_m", r.dist_to_goal_m);
  add("dist_to_start_m", r.dist_to_start_m);
  add("diversity", r.diversity);
  add("feature_frechet_proxy", r.feature_frechet_proxy);
  out.emplace_back("sample_count", std::to_string(r.sample_count));
  return out;
}

void WriteMetricsReport(std::ostream& out, const MetricsReport& report) {
  for (const auto& [k, v] : MetricsFields(report)) out << k << " = " << v << '\n';
}

}  // namespace keymotion
