#ifndef KEYMOTION_DIFFUSION_HPP_
#define KEYMOTION_DIFFUSION_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "keymotion/common.hpp"
#include "keymotion/denoiser.hpp"

namespace keymotion {

struct ScheduleConfig {
  int steps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.2;

  bool operator==(const ScheduleConfig&) const = default;
};

struct NoiseSchedule {
  int T = 0;
  Vector beta;       // beta(t - 1) is beta_t
  Vector alpha_bar;  // alpha_bar(t - 1) is the cumulative product up to t

  // alpha_bar_t for t in [0, T]; alpha_bar_0 = 1.
  double AlphaBar(int t) const;
  double Beta(int t) const;
};

// Linear beta ramp from beta_start to beta_end over T steps.
NoiseSchedule BuildSchedule(int T, double beta_start, double beta_end);
NoiseSchedule BuildSchedule(const ScheduleConfig& config);

// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
Matrix ForwardNoise(const Matrix& x0, int t, const Matrix& eps, const NoiseSchedule& schedule);

// mask * values + (1 - mask) * sample, selected entry by entry.
Matrix Impute(const Matrix& sample, const Matrix& values, const Matrix& mask);

// w * cond + (1 - w) * uncond.
Matrix CfgCombine(const Matrix& cond, const Matrix& uncond, double w);

enum class SamplerKind { kDdpm, kDdim };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::kDdpm;
  int steps = 0;  // DDIM only

  static SamplerSpec Ddpm() { return {SamplerKind::kDdpm, 0}; }
  static SamplerSpec Ddim(int k) { return {SamplerKind::kDdim, k}; }
};

// Descending diffusion steps visited by the sampler. DDPM visits T..1;
// DDIM(k) visits k values spread evenly over [1, T], always including T.
std::vector<int> PlanTimesteps(const SamplerSpec& sampler, int T);

// Values and a 0/1 mask with the sample's shape.
struct Imputation {
  Matrix values;
  Matrix mask;
};

// Predicts the clean sample from the (already imputed) x_t at step t.
using X0Predictor = std::function<Matrix(const Matrix& x_t, int t)>;

struct SamplerOptions {
  SamplerSpec sampler;
  std::uint64_t seed = 0;
  bool reimpute_x0 = true;
  // Multiplies the DDPM posterior noise; 0 gives the noise-free posterior mean chain.
  double ddpm_noise_scale = 1.0;
  // When set, receives the x0 prediction of every visited step.
  std::vector<Matrix>* x0_trace = nullptr;
};

// Unit-normal starting noise drawn from `seed`.
Matrix InitialNoise(int frames, int width, std::uint64_t seed);

// Reverse process starting from x_T. Per step: impute x_t, predict x0,
// re-impute x0 (unless disabled), then take the DDPM posterior step or the
// deterministic DDIM step. The returned sample has masked entries equal to the
// imputation values bitwise. Throws NumericError naming the step on non-finite
// intermediates.
Matrix RunSampler(const X0Predictor& predict, const Matrix& x_T, const Imputation* imputation,
                  const NoiseSchedule& schedule, const SamplerOptions& options);

enum class StageKind : int { kKeyjoint = 1, kFullbody = 2 };

// Feature width of the diffused sample for a stage (19 or 51).
int StageWidth(StageKind stage);

struct SampleRequest {
  StageKind stage = StageKind::kKeyjoint;
  int label = kNullLabel;
  double guidance_weight = 2.0;
  SamplerSpec sampler;
  std::uint64_t seed = 0;
  std::optional<Imputation> imputation;  // standardized units
  double body_scale = 1.0;
  int frames = 60;
  bool reimpute_x0 = true;
  double ddpm_noise_scale = 1.0;
};

// Guided x0 predictor for a stage model. Keyjoint models receive the mask as
// extra input channels (zeros when `mask` is null); full-body models get the
// sample only.
X0Predictor MakeGuidedPredictor(const DenoiserModel& model, StageKind stage, int label, double guidance_weight,
                                double body_scale, const Matrix* mask);

// Samples in standardized units.
Matrix Sample(const DenoiserModel& model, const SampleRequest& request, const NoiseSchedule& schedule);

// x0 prediction together with its vector-Jacobian product with respect to x_t.
struct DifferentiablePrediction {
  Matrix x0;
  std::function<Matrix(const Matrix& d_x0)> vjp;
};
using DifferentiablePredictor = std::function<DifferentiablePrediction(const Matrix& x_t, int t)>;

DifferentiablePredictor MakeDifferentiablePredictor(const DenoiserModel& model, StageKind stage, int label,
                                                    double guidance_weight, double body_scale);

// Deterministic DDIM chain from a latent x_T without imputation, keeping what
// is needed to pull output gradients back to the latent.
class DdimChain {
 public:
  DdimChain(const DifferentiablePredictor& predict, const Matrix& latent, const NoiseSchedule& schedule, int steps);

  const Matrix& output() const { return output_; }
  Matrix Backward(const Matrix& d_output) const;

 private:
  struct Step {
    int t = 0;
    int t_next = 0;
    double keep = 0.0;     // coefficient on x_t
    double predict = 0.0;  // coefficient on x0
    std::function<Matrix(const Matrix&)> vjp;
  };
  std::vector<Step> steps_;
  Matrix output_;
};

}  // namespace keymotion

#endif  // KEYMOTION_DIFFUSION_HPP_
