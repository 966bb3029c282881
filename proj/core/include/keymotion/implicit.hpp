#ifndef KEYMOTION_IMPLICIT_HPP_
#define KEYMOTION_IMPLICIT_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "keymotion/keyjoint_stage.hpp"
#include "keymotion/spline.hpp"

namespace keymotion {

// Geometric target for one keyjoint over frames [t0, t1]; timing along the
// path is left free.
struct TargetPath {
  Matrix points;  // M x 3
  int keyjoint = 0;
  int t0 = 0;
  int t1 = 59;

  int segment_frames() const { return t1 - t0 + 1; }
  double Length() const;
  void Validate(int frames) const;
};

// Header `keyjoint, t0, t1` followed by `x, y, z` rows; '#' starts a comment.
TargetPath ReadTargetPath(const std::filesystem::path& path);
TargetPath ParseTargetPath(std::istream& in, const std::string& source);
void WriteTargetPath(std::ostream& out, const TargetPath& path);

// Fits the path's arc-length spline and resamples it at `count` uniform arc lengths.
Matrix ResamplePath(const Matrix& points, int count);

enum class ObjectiveKind { kHandToHead, kNarrowCorridor, kTimeAgnostic, kComposite };

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::kHandToHead;
  // HAND_TO_HEAD window [window_begin, window_end); negative means the middle third.
  int window_begin = -1;
  int window_end = -1;
  // NARROW_CORRIDOR: |coordinate(axis) - center| <= width / 2 for every keyjoint.
  double corridor_width = 0.4;
  int corridor_axis = 0;
  double corridor_center = 0.0;
  // TIME_AGNOSTIC
  TargetPath path;
  double length_weight = 1.0;
  // COMPOSITE
  std::vector<ObjectiveSpec> terms;
  std::vector<double> weights;

  void Validate() const;
};

struct ObjectiveValue {
  double value = 0.0;
  Matrix gradient;  // d value / d C, N x 19
  double geometric_term = 0.0;  // summed over time-agnostic terms
  double length_term = 0.0;
};

// Mean distance between the uniformly resampled generated segment and target
// plus length_weight * |s_L - length(target)|. A zero-length generated segment
// falls back to the distance from its first point to the path start plus the
// full length penalty.
struct AlignmentValue {
  double loss = 0.0;
  double geometric = 0.0;
  double length = 0.0;
  bool degenerate = false;
  Matrix gradient;
};
AlignmentValue AlignmentLoss(const Matrix& keyjoints, const TargetPath& path, double length_weight);

ObjectiveValue EvaluateObjective(const ObjectiveSpec& spec, const Matrix& keyjoints);

struct LatentOptions {
  int label = kNullLabel;
  double guidance_weight = 2.0;
  double body_scale = 1.0;
  int iterations = 200;
  double learning_rate = 0.05;
  int ddim_steps = 10;
  double regularizer_weight = 0.01;
  int frames = 60;
  std::uint64_t seed = 0;
};

struct LatentTraceEntry {
  int iteration = 0;
  double loss = 0.0;
  double objective = 0.0;
  double regularizer = 0.0;
  double geometric_term = 0.0;
  double length_term = 0.0;
};

struct LatentResult {
  KeyjointTrajectory best;  // GLOBAL
  Matrix best_latent;
  Matrix initial_latent;
  double best_loss = 0.0;
  int best_iteration = 0;
  std::vector<LatentTraceEntry> trace;
  bool stopped_early = false;
  std::string diagnostic;
};

// Adam on the initial noise of a deterministic DDIM chain (no imputation),
// differentiating the objective plus the latent-norm regularizer through every
// step. Returns the best trajectory seen.
LatentResult OptimizeLatent(const StageModel& model, const ObjectiveSpec& spec, const LatentOptions& options);

// CSV `iteration,loss,geometric_term,length_term`.
void WriteLatentTrace(std::ostream& out, const std::vector<LatentTraceEntry>& trace);

// Explicit control from a target path with uniform timestamps: the path is
// resampled to t1 - t0 + 1 points assigned to consecutive frames.
ExplicitControl ExplicitPathControl(const TargetPath& path, int frames);

}  // namespace keymotion

#endif  // KEYMOTION_IMPLICIT_HPP_
