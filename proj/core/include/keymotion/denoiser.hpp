#ifndef KEYMOTION_DENOISER_HPP_
#define KEYMOTION_DENOISER_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "keymotion/common.hpp"

namespace keymotion {

inline constexpr int kNullLabel = -1;

// Temporal encoder-decoder over the frame axis:
//   in-conv (F -> width1) at N frames
//   strided conv (width1 -> width2) at N/2, strided conv (width2 -> width2) at N/4
//   residual mid conv at N/4 with an added global (frame-mean) context term
//   upsample + skip + conv back to N/2 and N, then a zero-initialized out-conv.
// Every level adds a projection of the conditioning vector built from the
// diffusion step, the action label (or the null label) and optionally the
// body scale. All convolutions have kernel 3 and zero padding; N must be a
// multiple of 4.
//
// With a non-empty skip_alpha_bar (entry t-1 holds alpha_bar_t) the network
// output F is combined with the noisy sample x_t, the first output_channels
// input columns: out = sqrt(alpha_bar_t) x_t + sqrt(1 - alpha_bar_t) F.
struct DenoiserArchitecture {
  int input_channels = 38;
  int output_channels = 19;
  int width1 = 64;
  int width2 = 128;
  int time_features = 32;
  int cond_width = 64;
  int label_count = 4;  // real labels; one extra table row holds the null label
  bool scale_conditioning = true;
  std::vector<double> skip_alpha_bar;

  bool operator==(const DenoiserArchitecture&) const = default;
  void Validate() const;
};

struct Conditioning {
  int timestep = 1;
  int label = kNullLabel;
  double body_scale = 1.0;
};

struct ParameterSlice {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index size() const { return rows * cols; }
};

class DenoiserModel {
 public:
  // Fan-in scaled uniform initialization; the output layer starts at zero.
  explicit DenoiserModel(const DenoiserArchitecture& arch, std::uint64_t seed = 0);
  DenoiserModel(const DenoiserArchitecture& arch, Vector parameters);

  const DenoiserArchitecture& architecture() const { return arch_; }
  const Vector& parameters() const { return params_; }
  Vector& mutable_parameters() { return params_; }
  Eigen::Index parameter_count() const { return params_.size(); }
  const std::vector<ParameterSlice>& slices() const { return slices_; }
  const ParameterSlice& slice(std::string_view name) const;

  // Single-sample convenience wrapper around DenoiserTape.
  Matrix Denoise(const Matrix& input, const Conditioning& cond) const;

 private:
  DenoiserArchitecture arch_;
  std::vector<ParameterSlice> slices_;
  Vector params_;
};

std::vector<ParameterSlice> LayoutParameters(const DenoiserArchitecture& arch);

// Forward pass over a batch of equally long samples, stacked row-wise
// (sample b occupies rows [b*frames, (b+1)*frames)). Keeps the activations
// needed for reverse-mode gradients.
class DenoiserTape {
 public:
  DenoiserTape(const DenoiserModel& model, const Matrix& inputs, int frames, std::span<const Conditioning> cond);
  ~DenoiserTape();
  DenoiserTape(DenoiserTape&&) noexcept;
  DenoiserTape& operator=(DenoiserTape&&) noexcept;

  const Matrix& output() const;
  int batch() const;
  int frames() const;

  // Adds d(loss)/d(parameters) into `param_grad` when it is non-null and
  // returns d(loss)/d(inputs) when `want_input_grad` (else an empty matrix).
  Matrix Backward(const Matrix& output_grad, Vector* param_grad, bool want_input_grad) const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

// Returns the scalar loss and writes d(loss)/d(outputs) into `output_grad`.
using LossEvaluator = std::function<double(const Matrix& outputs, Matrix& output_grad)>;

struct GradientResult {
  double loss = 0.0;
  Vector parameter_grad;
  Matrix input_grad;  // empty unless requested
};

GradientResult ComputeGradients(const DenoiserModel& model, const Matrix& inputs, int frames,
                                std::span<const Conditioning> cond, const LossEvaluator& loss,
                                bool want_input_grad = false);

}  // namespace keymotion

#endif  // KEYMOTION_DENOISER_HPP_
