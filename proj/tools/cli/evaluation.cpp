#include "cli/evaluation.hpp"

#include <chrono>
#include <random>

namespace keymotion::cli {

ExplicitControl PerturbControl(const ExplicitControl& control, double bound, std::uint64_t seed) {
  Require(bound >= 0.0, "perturbation bound must be non-negative");
  ExplicitControl out = control;
  if (bound == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index n = 0; n < out.mask.rows(); ++n) {
    for (int c = 0; c < kYawColumn; ++c) {
      if (out.mask(n, c) != 0.0) out.values(n, c) += u(rng);
    }
  }
  return out;
}

EvalOutcome EvaluateExplicitControl(const StageModel& keyjoint_model, const StageModel& fullbody_model,
                                    const std::vector<MotionSequence>& records, const std::vector<int>& record_ids,
                                    const EvalSettings& settings) {
  Require(!records.empty(), "evaluation needs at least one record");
  Require(records.size() == record_ids.size(), "one record id per record");
  EvalOutcome out;
  std::vector<Matrix> generated_positions;
  std::vector<FullBodyRepr> generated;
  std::vector<FullBodyRepr> reference;
  double error_sum = 0.0;
  double yaw_sum = 0.0;
  int yaw_samples = 0;
  int scored = 0;
  double skating_sum = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const MotionSequence& record = records[i];
    const auto id = static_cast<std::uint64_t>(record_ids[i]);
    MaskScheme scheme = settings.scheme;
    scheme.seed = MixSeed(settings.seed, 2 * id);
    const Matrix truth = ExtractKeyjoints(record).frames;
    const Matrix mask = SampleControlMask(scheme, record.frame_count());
    const ExplicitControl control =
        PerturbControl(ControlFromTrajectory(truth, mask), settings.perturb, MixSeed(settings.seed, 2 * id + 1));

    SynthesisOptions options = settings.synthesis;
    options.label = record.action_label < static_cast<int>(keyjoint_model.labels.size()) ? record.action_label
                                                                                         : kNullLabel;
    options.body_scale = record.body_scale;
    options.seed = MixSeed(settings.seed ^ 0xe7a1, id);
    const PipelineResult result = RunPipeline(keyjoint_model, fullbody_model, control, options);

    EvalSample s;
    s.record = record_ids[i];
    s.density = PositionDensity(mask);
    // Sparse probability masks can select no frame at all; such samples carry no control error.
    if (mask.leftCols(kYawColumn).any()) {
      const ControlError err = ComputeControlError(result.completion.motion, control);
      s.scored = true;
      s.control_error_m = err.position_m;
      s.control_yaw_error_rad = err.yaw_rad;
      error_sum += s.control_error_m;
      ++scored;
      if (err.yaw_count > 0) {
        yaw_sum += s.control_yaw_error_rad;
        ++yaw_samples;
      }
    }
    s.foot_skating_ratio = FootSkatingRatio(result.completion.motion);
    out.samples.push_back(s);
    skating_sum += s.foot_skating_ratio;
    generated_positions.push_back(GlobalJointPositions(result.completion.motion));
    generated.push_back(result.completion.repr);
    reference.push_back(EncodeFullBody(record));
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const double n = static_cast<double>(records.size());
  out.report.sample_count = static_cast<int>(records.size());
  if (scored > 0) out.report.control_error_m = error_sum / scored;
  if (yaw_samples > 0) out.report.control_yaw_error_rad = yaw_sum / yaw_samples;
  out.report.foot_skating_ratio = skating_sum / n;
  if (records.size() >= 2) out.report.diversity = Diversity(generated_positions);
  if (settings.feature_frechet && records.size() >= 10) {
    out.report.feature_frechet_proxy = FeatureFrechet(generated, reference);
  }
  return out;
}

}  // namespace keymotion::cli
