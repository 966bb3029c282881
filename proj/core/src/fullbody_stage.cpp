#include "keymotion/fullbody_stage.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace keymotion {

Matrix KeyjointColumnMask(int frames) {
  Matrix mask = Matrix::Zero(frames, kFullBodyDim);
  for (int c = 0; c < kKeyjointDim; ++c) mask.col(FullBodyColumnForKeyjointColumn(c)).setOnes();
  return mask;
}

StageTraining TrainFullbodyModel(const DatasetFile& dataset, const FullbodyTrainConfig& config,
                                 const TrainProgress& progress) {
  const NormalizationStats& stats = dataset.header.fullbody_stats;
  Require(stats.dim() == kFullBodyDim, "dataset full-body statistics must have 51 features");
  struct Item {
    Matrix x0;
    int label;
  };
  std::vector<Item> items;
  for (const MotionSequence& seq : dataset.records) {
    items.push_back({stats.Standardize(EncodeFullBody(seq).frames), seq.action_label});
  }
  Require(!items.empty(), "no training records for the full-body stage");
  const int frames = static_cast<int>(items.front().x0.rows());
  for (const Item& it : items) Require(it.x0.rows() == frames, "training records must share one frame count");

  DenoiserArchitecture arch;
  arch.input_channels = kFullBodyDim;
  arch.output_channels = kFullBodyDim;
  arch.width1 = config.width1;
  arch.width2 = config.width2;
  arch.label_count = static_cast<int>(dataset.header.labels.size());
  arch.scale_conditioning = false;
  DenoiserModel model(arch, config.init_seed);
  const NoiseSchedule schedule = BuildSchedule(config.schedule);
  const Matrix keyjoint_mask = KeyjointColumnMask(frames);

  BatchBuilder builder = [&](std::mt19937_64& rng, int batch) {
    std::uniform_int_distribution<size_t> pick(0, items.size() - 1);
    std::uniform_int_distribution<int> step(1, schedule.T);
    std::normal_distribution<double> normal;
    TrainBatch b;
    b.frames = frames;
    b.inputs.resize(static_cast<Eigen::Index>(batch) * frames, kFullBodyDim);
    b.targets.resize(static_cast<Eigen::Index>(batch) * frames, kFullBodyDim);
    for (int i = 0; i < batch; ++i) {
      const Item& it = items[pick(rng)];
      const int t = step(rng);
      Matrix eps(frames, kFullBodyDim);
      for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = normal(rng);
      const Eigen::Index row = static_cast<Eigen::Index>(i) * frames;
      b.inputs.middleRows(row, frames) = Impute(ForwardNoise(it.x0, t, eps, schedule), it.x0, keyjoint_mask);
      b.targets.middleRows(row, frames) = it.x0;
      b.cond.push_back({t, it.label, 1.0});
    }
    return b;
  };
  TrainResult result = TrainDenoiser(model, builder, config.train, progress);
  StageModel stage{StageKind::kFullbody, std::move(model), stats, config.schedule, dataset.header.labels,
                   config.train.steps};
  return {std::move(stage), std::move(result)};
}

namespace {

// One horizon-length window in physical units with exact keyjoint columns.
Matrix CompleteWindow(const StageModel& model, const Matrix& relative, const SynthesisOptions& options,
                      std::uint64_t seed) {
  const int frames = static_cast<int>(relative.rows());
  Matrix values = Matrix::Zero(frames, kFullBodyDim);
  values.rowwise() = model.stats.mean.transpose();
  WriteKeyjointBlock(relative, values);
  SampleRequest request;
  request.stage = StageKind::kFullbody;
  request.label = options.label;
  request.guidance_weight = options.guidance_weight;
  request.sampler = options.sampler;
  request.seed = seed;
  request.frames = frames;
  request.reimpute_x0 = options.reimpute_x0;
  request.ddpm_noise_scale = options.ddpm_noise_scale;
  request.imputation = Imputation{model.stats.Standardize(values), KeyjointColumnMask(frames)};
  Matrix out = model.stats.Destandardize(Sample(model.model, request, model.BuildNoiseSchedule()));
  WriteKeyjointBlock(relative, out);
  return out;
}

}  // namespace

Completion CompleteFullbody(const StageModel& model, const CompletionRequest& request) {
  if (model.stage != StageKind::kFullbody) throw std::invalid_argument("complete_fullbody needs a full-body model");
  if (request.keyjoints.mode != CoordinateMode::kRootRelative) {
    throw std::invalid_argument("complete_fullbody expects ROOT_RELATIVE keyjoints; convert with ToRootRelative()");
  }
  const Matrix& kj = request.keyjoints.frames;
  Require(kj.cols() == kKeyjointDim && kj.rows() >= 2, "keyjoint trajectory must be N x 19 with N >= 2");
  Require(kj.allFinite(), "keyjoint trajectory must be finite");
  const int horizon = request.horizon;
  Require(horizon >= 4 && horizon % 4 == 0, "completion horizon must be a positive multiple of 4");
  Require(request.crossfade >= 1 && request.crossfade < horizon, "crossfade must be in [1, horizon)");
  const int n = static_cast<int>(kj.rows());

  Matrix full(n, kFullBodyDim);
  if (n <= horizon) {
    Matrix padded(horizon, kKeyjointDim);
    padded.topRows(n) = kj;
    for (int i = n; i < horizon; ++i) padded.row(i) = kj.row(n - 1);
    full = CompleteWindow(model, padded, request.options, request.options.seed).topRows(n);
  } else {
    const int stride = horizon - request.crossfade;
    std::vector<int> starts;
    for (int s = 0; s + horizon < n; s += stride) starts.push_back(s);
    starts.push_back(n - horizon);
    Matrix weight_sum = Matrix::Zero(n, 1);
    full.setZero();
    for (size_t w = 0; w < starts.size(); ++w) {
      const int s = starts[w];
      const Matrix window =
          CompleteWindow(model, kj.middleRows(s, horizon), request.options, MixSeed(request.options.seed, w));
      for (int i = 0; i < horizon; ++i) {
        // Linear ramps over the first and last `crossfade` frames of interior edges.
        double weight = 1.0;
        if (w > 0 && i < request.crossfade) weight = (i + 1.0) / (request.crossfade + 1.0);
        if (w + 1 < starts.size() && i >= horizon - request.crossfade) {
          weight = std::min(weight, (horizon - i) / (request.crossfade + 1.0));
        }
        full.row(s + i) += weight * window.row(i);
        weight_sum(s + i, 0) += weight;
      }
    }
    for (int i = 0; i < n; ++i) full.row(i) /= weight_sum(i, 0);
  }
  WriteKeyjointBlock(kj, full);
  full.col(kLeftContactColumn) = full.col(kLeftContactColumn).cwiseMax(0.0).cwiseMin(1.0);
  full.col(kRightContactColumn) = full.col(kRightContactColumn).cwiseMax(0.0).cwiseMin(1.0);
  Completion c;
  c.repr.frames = std::move(full);
  c.motion = DecodeFullBody(c.repr, StandardSkeleton(), request.options.body_scale);
  c.motion.action_label = std::max(0, request.options.label);
  return c;
}

PipelineResult RunPipeline(const StageModel& keyjoint_model, const StageModel& fullbody_model,
                           const ExplicitControl& control, const SynthesisOptions& options) {
  PipelineResult r;
  r.keyjoints = SynthesizeKeyjoints(keyjoint_model, control, options);
  CompletionRequest request;
  request.keyjoints = ToRootRelative(r.keyjoints);
  request.options = options;
  request.options.seed = MixSeed(options.seed, 2);
  r.completion = CompleteFullbody(fullbody_model, request);
  return r;
}

void WriteTrajectoryCsv(std::ostream& out, const MotionSequence& motion) {
  const Matrix global = GlobalJointPositions(motion);
  out << "frame,joint_name,x,y,z\n" << std::setprecision(17);
  for (Eigen::Index n = 0; n < global.rows(); ++n) {
    for (int j = 0; j < motion.skeleton.joint_count; ++j) {
      out << n << ',' << motion.skeleton.names[j] << ',' << global(n, 3 * j) << ',' << global(n, 3 * j + 1) << ','
          << global(n, 3 * j + 2) << '\n';
    }
  }
}

}  // namespace keymotion
