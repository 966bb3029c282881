#ifndef KEYMOTION_TRAINING_HPP_
#define KEYMOTION_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "keymotion/denoiser.hpp"
#include "keymotion/optimizer.hpp"

namespace keymotion {

struct TrainConfig {
  int steps = 20000;
  int batch = 32;
  AdamConfig adam;
  double label_dropout = 0.1;
  std::uint64_t seed = 0;
  double smoothing = 0.99;  // EMA factor for the smoothed loss
  int log_every = 50;
};

// One minibatch: `batch` samples stacked row-wise, `frames` rows each.
struct TrainBatch {
  Matrix inputs;
  Matrix targets;
  std::vector<Conditioning> cond;
  int frames = 0;
};

using BatchBuilder = std::function<TrainBatch(std::mt19937_64& rng, int batch)>;

struct TrainLogEntry {
  int step = 0;
  double loss = 0.0;
  double smoothed_loss = 0.0;
};

struct TrainResult {
  std::vector<TrainLogEntry> log;
  double final_smoothed_loss = 0.0;
  double initial_loss = 0.0;
};

// Called after every step with (step, loss, smoothed loss).
using TrainProgress = std::function<void(int, double, double)>;

// Mean-squared regression of denoiser outputs onto batch targets with Adam;
// labels are replaced by the null label with probability label_dropout.
// With a noise-level skip, sample b's squared error is divided by
// 1 - alpha_bar_t, which makes the loss the plain squared error of the
// network branch.
TrainResult TrainDenoiser(DenoiserModel& model, const BatchBuilder& builder, const TrainConfig& config,
                          const TrainProgress& progress = {});

// CSV with header `step,loss,smoothed_loss`.
void WriteTrainLog(const std::filesystem::path& path, const std::vector<TrainLogEntry>& log);

// Mean squared error over all entries, writing its gradient into `grad`.
double MeanSquaredError(const Matrix& outputs, const Matrix& targets, Matrix& grad);

// As above with every row of sample b (rows [b*frames, (b+1)*frames)) weighted by weights[b].
double WeightedMeanSquaredError(const Matrix& outputs, const Matrix& targets, std::span<const double> weights,
                                int frames, Matrix& grad);

}  // namespace keymotion

#endif  // KEYMOTION_TRAINING_HPP_
