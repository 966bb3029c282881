#ifndef KEYMOTION_METRICS_HPP_
#define KEYMOTION_METRICS_HPP_

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "keymotion/control.hpp"

namespace keymotion {

struct ControlError {
  double position_m = 0.0;  // mean over masked (frame, keyjoint) triples
  double yaw_rad = 0.0;     // mean wrapped yaw difference over masked yaw entries
  int position_count = 0;
  int yaw_count = 0;
};

// Only the masked coordinates of a triple enter its distance.
ControlError ComputeControlError(const MotionSequence& motion, const ExplicitControl& control);
ControlError ComputeControlError(const Matrix& keyjoints_global, const ExplicitControl& control);

// Among (frame, foot) pairs in contact (height below kContactHeight), the
// fraction whose horizontal step to the next frame exceeds
// kContactHorizontalStep. 0 when no foot is ever in contact.
double FootSkatingRatio(const MotionSequence& motion);

// (mean distance of goal joints at the last frame, mean keyjoint distance at the first frame).
std::pair<double, double> GoalDistances(const MotionSequence& motion, const GoalSpec& goal);

// Mean pairwise Euclidean distance between flattened matrices.
double Diversity(const std::vector<Matrix>& samples);

// Per-sequence handcrafted features: per-joint speed mean and std (32),
// pelvis speed histogram over 8 bins of 0.3 m/s with overflow in the last (8),
// mean root-relative pose (45).
inline constexpr int kMotionFeatureDim = 85;
Vector MotionFeatures(const FullBodyRepr& repr, double fps = kFps);

// Frechet distance between Gaussians; covariances get +1e-6 on the diagonal.
double FrechetDistance(const Vector& mean_a, const Matrix& cov_a, const Vector& mean_b, const Matrix& cov_b);
// Rows are samples.
double FrechetDistanceOfSamples(const Matrix& a, const Matrix& b);
// Proxy distributional score over MotionFeatures; not an FID.
double FeatureFrechet(const std::vector<FullBodyRepr>& a, const std::vector<FullBodyRepr>& b);

struct MetricsReport {
  std::optional<double> control_error_m;
  std::optional<double> control_yaw_error_rad;
  std::optional<double> foot_skating_ratio;
  std::optional<double> dist_to_goal_m;
  std::optional<double> dist_to_start_m;
  std::optional<double> diversity;
  std::optional<double> feature_frechet_proxy;
  int sample_count = 0;
};

// Flat `key = value` lines; absent metrics are omitted.
void WriteMetricsReport(std::ostream& out, const MetricsReport& report);
std::vector<std::pair<std::string, std::string>> MetricsFields(const MetricsReport& report);

}  // namespace keymotion

#endif  // KEYMOTION_METRICS_HPP_
