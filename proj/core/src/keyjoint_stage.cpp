#include "keymotion/keyjoint_stage.hpp"

#include <cmath>

namespace keymotion {

Matrix SampleTrainingMask(std::mt19937_64& rng, int frames, ScenarioKind scenario, const TrainingMaskMixture& mixture) {
  const double total = mixture.cross_weight + mixture.single_weight + mixture.goal_weight;
  Require(total > 0.0, "training mask mixture weights must not all be zero");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double pick = unit(rng) * total;
  MaskScheme scheme;
  if (pick >= mixture.cross_weight + mixture.single_weight) {
    scheme.joint_select = JointSelect::kGoal;
    scheme.goal_joints = scenario == ScenarioKind::kWalkTurn ? std::vector<int>{static_cast<int>(Keyjoint::kPelvis)}
                                                             : GoalKeyjoints(scenario);
    return SampleControlMask(scheme, frames, rng);
  }
  if (unit(rng) < 0.5) {
    scheme.frame_select = FrameSelect::kInterval;
    std::uniform_int_distribution<int> r(1, std::min(mixture.max_interval, frames));
    scheme.interval = r(rng);
  } else {
    scheme.frame_select = FrameSelect::kProbability;
    const double lo = std::log(mixture.min_probability);
    scheme.probability = std::min(1.0, std::exp(lo + unit(rng) * (0.0 - lo)));
  }
  if (pick < mixture.cross_weight) {
    scheme.joint_select = JointSelect::kCross;
    scheme.keep_ratio = mixture.keep_ratio;
    return SampleControlMask(scheme, frames, rng);
  }
  // Single keyjoint: any of the six, built like the pelvis / right-wrist schemes.
  std::uniform_int_distribution<int> joint(0, kKeyjointCount - 1);
  const int j = joint(rng);
  scheme.joint_select = JointSelect::kPelvis;
  Matrix pelvis = SampleControlMask(scheme, frames, rng);
  Matrix mask = Matrix::Zero(frames, kKeyjointDim);
  for (int n = 0; n < frames; ++n) {
    if (pelvis(n, 0) == 0.0) continue;
    mask.block(n, KeyjointColumn(j), 1, 3).setOnes();
    if (j == static_cast<int>(Keyjoint::kPelvis)) mask(n, kYawColumn) = 1.0;
  }
  return mask;
}

StageTraining TrainKeyjointModel(const DatasetFile& dataset, const KeyjointTrainConfig& config,
                                 const TrainProgress& progress) {
  const NormalizationStats& stats = dataset.header.keyjoint_stats;
  Require(stats.dim() == kKeyjointDim, "dataset keyjoint statistics must have 19 features");
  struct Item {
    Matrix x0;
    int label;
    double scale;
  };
  std::vector<Item> items;
  for (const MotionSequence& seq : dataset.records) {
    if (config.goal_only && seq.action_label == static_cast<int>(ScenarioKind::kWalkTurn)) continue;
    items.push_back({stats.Standardize(ExtractKeyjoints(seq).frames), seq.action_label, seq.body_scale});
  }
  Require(!items.empty(), "no training records for the keyjoint stage");
  const int frames = static_cast<int>(items.front().x0.rows());
  for (const Item& it : items) Require(it.x0.rows() == frames, "training records must share one frame count");

  DenoiserArchitecture arch;
  arch.input_channels = 2 * kKeyjointDim;
  arch.output_channels = kKeyjointDim;
  arch.width1 = config.width1;
  arch.width2 = config.width2;
  arch.label_count = static_cast<int>(dataset.header.labels.size());
  const NoiseSchedule schedule = BuildSchedule(config.schedule);
  arch.scale_conditioning = true;
  arch.skip_alpha_bar.assign(schedule.alpha_bar.data(), schedule.alpha_bar.data() + schedule.alpha_bar.size());
  DenoiserModel model(arch, config.init_seed);
  TrainingMaskMixture mixture = config.masks;
  if (config.goal_only) mixture = {0.0, 0.0, 1.0, mixture.max_interval, mixture.min_probability, mixture.keep_ratio};

  BatchBuilder builder = [&](std::mt19937_64& rng, int batch) {
    std::uniform_int_distribution<size_t> pick(0, items.size() - 1);
    std::uniform_int_distribution<int> step(1, schedule.T);
    std::normal_distribution<double> normal;
    TrainBatch b;
    b.frames = frames;
    b.inputs.resize(static_cast<Eigen::Index>(batch) * frames, 2 * kKeyjointDim);
    b.targets.resize(static_cast<Eigen::Index>(batch) * frames, kKeyjointDim);
    for (int i = 0; i < batch; ++i) {
      const Item& it = items[pick(rng)];
      const int t = step(rng);
      Matrix eps(frames, kKeyjointDim);
      for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = normal(rng);
      const Matrix mask = SampleTrainingMask(rng, frames, static_cast<ScenarioKind>(it.label), mixture);
      const Matrix x_t = Impute(ForwardNoise(it.x0, t, eps, schedule), it.x0, mask);
      const Eigen::Index row = static_cast<Eigen::Index>(i) * frames;
      b.inputs.block(row, 0, frames, kKeyjointDim) = x_t;
      b.inputs.block(row, kKeyjointDim, frames, kKeyjointDim) = mask;
      b.targets.middleRows(row, frames) = it.x0;
      b.cond.push_back({t, it.label, it.scale});
    }
    return b;
  };
  TrainResult result = TrainDenoiser(model, builder, config.train, progress);
  StageModel stage{StageKind::kKeyjoint, std::move(model), stats, config.schedule, dataset.header.labels,
                   config.train.steps};
  return {std::move(stage), std::move(result)};
}

KeyjointTrajectory SynthesizeKeyjoints(const StageModel& model, const ExplicitControl& control,
                                       const SynthesisOptions& options) {
  if (model.stage != StageKind::kKeyjoint) throw std::invalid_argument("synthesize_keyjoints needs a keyjoint-stage model");
  control.Validate();
  const int frames = control.frame_count();
  Matrix values = control.values;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (control.mask.data()[i] == 0.0) values.data()[i] = model.stats.mean(i % kKeyjointDim);
  }
  SampleRequest request;
  request.stage = StageKind::kKeyjoint;
  request.label = options.label;
  request.guidance_weight = options.guidance_weight;
  request.sampler = options.sampler;
  request.seed = options.seed;
  request.body_scale = options.body_scale;
  request.frames = frames;
  request.reimpute_x0 = options.reimpute_x0;
  request.ddpm_noise_scale = options.ddpm_noise_scale;
  request.imputation = Imputation{model.stats.Standardize(values), control.mask};
  const Matrix z = Sample(model.model, request, model.BuildNoiseSchedule());
  // Constrained entries are restored in physical units so they match bitwise.
  KeyjointTrajectory out;
  out.mode = CoordinateMode::kGlobal;
  out.frames = Impute(model.stats.Destandardize(z), control.values, control.mask);
  return out;
}

KeyjointTrajectory SynthesizeGoal(const StageModel& model, const GoalSpec& goal, SynthesisOptions options,
                                  int frames) {
  const ExplicitControl control = BuildGoalControl(goal, frames);
  options.label = static_cast<int>(goal.scenario);
  options.body_scale = goal.body_scale;
  if (options.label >= model.model.architecture().label_count) {
    throw std::invalid_argument("model has no label for scenario '" + std::string(ScenarioName(goal.scenario)) + "'");
  }
  return SynthesizeKeyjoints(model, control, options);
}

}  // namespace keymotion
