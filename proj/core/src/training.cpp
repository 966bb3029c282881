#include "keymotion/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace keymotion {

double MeanSquaredError(const Matrix& outputs, const Matrix& targets, Matrix& grad) {
  Require(outputs.rows() == targets.rows() && outputs.cols() == targets.cols(), "loss: output/target shape mismatch");
  const double count = static_cast<double>(outputs.size());
  const Matrix diff = outputs - targets;
  grad = (2.0 / count) * diff;
  return diff.squaredNorm() / count;
}

double WeightedMeanSquaredError(const Matrix& outputs, const Matrix& targets, std::span<const double> weights,
                                int frames, Matrix& grad) {
  Require(outputs.rows() == targets.rows() && outputs.cols() == targets.cols(), "loss: output/target shape mismatch");
  Require(static_cast<Eigen::Index>(weights.size()) * frames == outputs.rows(), "loss: one weight per sample");
  const double count = static_cast<double>(outputs.size());
  grad = outputs - targets;
  double loss = 0.0;
  for (size_t b = 0; b < weights.size(); ++b) {
    auto rows = grad.middleRows(static_cast<Eigen::Index>(b) * frames, frames);
    loss += weights[b] * rows.squaredNorm();
    rows *= 2.0 * weights[b] / count;
  }
  return loss / count;
}

TrainResult TrainDenoiser(DenoiserModel& model, const BatchBuilder& builder, const TrainConfig& config,
                          const TrainProgress& progress) {
  Require(config.steps >= 0 && config.batch >= 1, "training needs steps >= 0 and batch >= 1");
  Require(config.label_dropout >= 0.0 && config.label_dropout <= 1.0, "label_dropout must be in [0, 1]");
  std::mt19937_64 rng(MixSeed(config.seed, 0x7a1));
  std::bernoulli_distribution drop(config.label_dropout);
  OptimizerState opt = OptimizerState::For(model.parameter_count(), config.adam);
  const std::vector<double>& skip = model.architecture().skip_alpha_bar;
  std::vector<double> weights;
  TrainResult result;
  double ema = 0.0;
  for (int step = 1; step <= config.steps; ++step) {
    TrainBatch batch = builder(rng, config.batch);
    for (Conditioning& c : batch.cond) {
      if (drop(rng)) c.label = kNullLabel;
    }
    weights.clear();
    for (const Conditioning& c : batch.cond) {
      if (!skip.empty()) weights.push_back(1.0 / (1.0 - skip[static_cast<size_t>(c.timestep - 1)]));
    }
    GradientResult g;
    try {
      g = ComputeGradients(model, batch.inputs, batch.frames, batch.cond, [&](const Matrix& out, Matrix& grad) {
        if (skip.empty()) return MeanSquaredError(out, batch.targets, grad);
        return WeightedMeanSquaredError(out, batch.targets, weights, batch.frames, grad);
      });
    } catch (const NumericError& e) {
      throw NumericError("training step " + std::to_string(step) + ": " + e.what());
    }
    if (!g.parameter_grad.allFinite()) {
      throw NumericError("training step " + std::to_string(step) + ": non-finite parameter gradient");
    }
    AdamStep(opt, model.mutable_parameters(), g.parameter_grad);
    ema = config.smoothing * ema + (1.0 - config.smoothing) * g.loss;
    const double smoothed = ema / (1.0 - std::pow(config.smoothing, step));
    if (step == 1) result.initial_loss = g.loss;
    if (step == 1 || step % std::max(1, config.log_every) == 0 || step == config.steps) {
      result.log.push_back({step, g.loss, smoothed});
    }
    result.final_smoothed_loss = smoothed;
    if (progress) progress(step, g.loss, smoothed);
  }
  return result;
}

void WriteTrainLog(const std::filesystem::path& path, const std::vector<TrainLogEntry>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log " + path.string());
  out << "step,loss,smoothed_loss\n" << std::setprecision(10);
  for (const auto& e : log) out << e.step << ',' << e.loss << ',' << e.smoothed_loss << '\n';
  if (!out) throw IoError("failed writing training log " + path.string());
}

}  // namespace keymotion
