#ifndef KEYMOTION_TOOLS_EVALUATION_HPP_
#define KEYMOTION_TOOLS_EVALUATION_HPP_

#include <cstdint>
#include <vector>

#include "keymotion/checkpoint.hpp"
#include "keymotion/control.hpp"
#include "keymotion/fullbody_stage.hpp"
#include "keymotion/metrics.hpp"

namespace keymotion::cli {

struct EvalSettings {
  MaskScheme scheme;            // scheme.seed is replaced per record
  SynthesisOptions synthesis;   // label, body scale and seed are taken per record
  double perturb = 0.0;         // uniform noise bound added to controlled positions, meters
  std::uint64_t seed = 0;
  bool feature_frechet = true;  // needs at least 10 records
};

struct EvalSample {
  int record = 0;
  double density = 0.0;
  bool scored = false;  // false when the mask selected no position entry
  double control_error_m = 0.0;
  double control_yaw_error_rad = 0.0;
  double foot_skating_ratio = 0.0;
};

struct EvalOutcome {
  std::vector<EvalSample> samples;
  MetricsReport report;
  double seconds = 0.0;  // wall time spent sampling
};

// Explicit-control evaluation: each record's own keyjoints, masked by the
// scheme (optionally perturbed), drive the full pipeline; the error is
// measured against the signal given to the sampler. `record_ids` are reported
// in the per-sample rows and seed the per-record streams.
EvalOutcome EvaluateExplicitControl(const StageModel& keyjoint_model, const StageModel& fullbody_model,
                                    const std::vector<MotionSequence>& records, const std::vector<int>& record_ids,
                                    const EvalSettings& settings);

// Adds U(-bound, bound) to every masked position entry; yaw entries are left alone.
ExplicitControl PerturbControl(const ExplicitControl& control, double bound, std::uint64_t seed);

}  // namespace keymotion::cli

#endif  // KEYMOTION_TOOLS_EVALUATION_HPP_
