#include "keymotion/diffusion.hpp"

#include <cmath>
#include <random>
#include <string>

namespace keymotion {

double NoiseSchedule::AlphaBar(int t) const {
  if (t < 0 || t > T) throw std::invalid_argument("timestep " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
  return t == 0 ? 1.0 : alpha_bar(t - 1);
}

double NoiseSchedule::Beta(int t) const {
  if (t < 1 || t > T) throw std::invalid_argument("timestep " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
  return beta(t - 1);
}

NoiseSchedule BuildSchedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw std::invalid_argument("schedule needs T >= 1, got " + std::to_string(T));
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("schedule needs 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.beta.resize(T);
  s.alpha_bar.resize(T);
  double product = 1.0;
  for (int i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
    s.beta(i) = beta_start + frac * (beta_end - beta_start);
    product *= 1.0 - s.beta(i);
    s.alpha_bar(i) = product;
  }
  return s;
}

NoiseSchedule BuildSchedule(const ScheduleConfig& config) {
  return BuildSchedule(config.steps, config.beta_start, config.beta_end);
}

Matrix ForwardNoise(const Matrix& x0, int t, const Matrix& eps, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.T) {
    throw std::invalid_argument("forward_noise: timestep " + std::to_string(t) + " outside [1, " +
                                std::to_string(schedule.T) + "]");
  }
  Require(x0.rows() == eps.rows() && x0.cols() == eps.cols(), "forward_noise: x0 and eps shapes differ");
  const double a = schedule.AlphaBar(t);
  return std::sqrt(a) * x0 + std::sqrt(1.0 - a) * eps;
}

Matrix Impute(const Matrix& sample, const Matrix& values, const Matrix& mask) {
  if (sample.rows() != values.rows() || sample.cols() != values.cols() || sample.rows() != mask.rows() ||
      sample.cols() != mask.cols()) {
    throw std::invalid_argument("impute: shape mismatch (sample " + std::to_string(sample.rows()) + "x" +
                                std::to_string(sample.cols()) + ", values " + std::to_string(values.rows()) + "x" +
                                std::to_string(values.cols()) + ", mask " + std::to_string(mask.rows()) + "x" +
                                std::to_string(mask.cols()) + ")");
  }
  Matrix out = sample;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (mask.data()[i] != 0.0) out.data()[i] = values.data()[i];
  }
  return out;
}

Matrix CfgCombine(const Matrix& cond, const Matrix& uncond, double w) {
  Require(cond.rows() == uncond.rows() && cond.cols() == uncond.cols(), "cfg_combine: shape mismatch");
  return w * cond + (1.0 - w) * uncond;
}

std::vector<int> PlanTimesteps(const SamplerSpec& sampler, int T) {
  std::vector<int> steps;
  if (sampler.kind == SamplerKind::kDdpm) {
    for (int t = T; t >= 1; --t) steps.push_back(t);
    return steps;
  }
  const int k = sampler.steps;
  if (k < 1 || k > T) {
    throw std::invalid_argument("DDIM steps must be in [1, " + std::to_string(T) + "], got " + std::to_string(k));
  }
  if (k == 1) return {T};
  for (int j = k - 1; j >= 0; --j) steps.push_back(1 + static_cast<int>((static_cast<long long>(j) * (T - 1)) / (k - 1)));
  return steps;
}

Matrix InitialNoise(int frames, int width, std::uint64_t seed) {
  std::mt19937_64 rng(MixSeed(seed, 0x5eed));
  std::normal_distribution<double> normal;
  Matrix x(frames, width);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  return x;
}

namespace {

void CheckFinite(const Matrix& m, const char* what, int t) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite ") + what + " at diffusion step " + std::to_string(t));
}

}  // namespace

Matrix RunSampler(const X0Predictor& predict, const Matrix& x_T, const Imputation* imputation,
                  const NoiseSchedule& schedule, const SamplerOptions& options) {
  if (imputation != nullptr) {
    Require(imputation->values.rows() == x_T.rows() && imputation->values.cols() == x_T.cols() &&
                imputation->mask.rows() == x_T.rows() && imputation->mask.cols() == x_T.cols(),
            "imputation shape does not match the sample (" + std::to_string(x_T.rows()) + "x" +
                std::to_string(x_T.cols()) + ")");
  }
  const std::vector<int> plan = PlanTimesteps(options.sampler, schedule.T);
  std::mt19937_64 rng(MixSeed(options.seed, 0xddb));
  std::normal_distribution<double> normal;
  Matrix x = x_T;
  for (size_t j = 0; j < plan.size(); ++j) {
    const int t = plan[j];
    const int t_next = j + 1 < plan.size() ? plan[j + 1] : 0;
    if (imputation != nullptr) x = Impute(x, imputation->values, imputation->mask);
    Matrix x0 = predict(x, t);
    CheckFinite(x0, "x0 prediction", t);
    if (imputation != nullptr && options.reimpute_x0) x0 = Impute(x0, imputation->values, imputation->mask);
    if (options.x0_trace != nullptr) options.x0_trace->push_back(x0);
    const double a_t = schedule.AlphaBar(t);
    if (t_next == 0) {
      x = std::move(x0);
    } else if (options.sampler.kind == SamplerKind::kDdpm) {
      const double a_prev = schedule.AlphaBar(t_next);
      const double beta = schedule.Beta(t);
      const double c0 = std::sqrt(a_prev) * beta / (1.0 - a_t);
      const double ct = std::sqrt(1.0 - beta) * (1.0 - a_prev) / (1.0 - a_t);
      const double sigma = std::sqrt(beta * (1.0 - a_prev) / (1.0 - a_t)) * options.ddpm_noise_scale;
      Matrix next = c0 * x0 + ct * x;
      if (sigma != 0.0) {
        for (Eigen::Index i = 0; i < next.size(); ++i) next.data()[i] += sigma * normal(rng);
      }
      x = std::move(next);
    } else {
      const double a_next = schedule.AlphaBar(t_next);
      const Matrix eps = (x - std::sqrt(a_t) * x0) / std::sqrt(1.0 - a_t);
      x = std::sqrt(a_next) * x0 + std::sqrt(1.0 - a_next) * eps;
    }
    CheckFinite(x, "sample", t);
  }
  if (imputation != nullptr) x = Impute(x, imputation->values, imputation->mask);
  return x;
}

int StageWidth(StageKind stage) {
  switch (stage) {
    case StageKind::kKeyjoint: return 19;
    case StageKind::kFullbody: return 51;
  }
  throw std::invalid_argument("invalid stage kind");
}

namespace {

struct GuidedCall {
  Matrix input;
  std::vector<Conditioning> cond;
  std::vector<double> weights;
};

void CheckStageModel(const DenoiserModel& model, StageKind stage) {
  const int width = StageWidth(stage);
  const int expected_in = stage == StageKind::kKeyjoint ? 2 * width : width;
  const auto& a = model.architecture();
  if (a.input_channels != expected_in || a.output_channels != width) {
    throw std::invalid_argument("model architecture (" + std::to_string(a.input_channels) + " -> " +
                                std::to_string(a.output_channels) + ") does not match the " +
                                (stage == StageKind::kKeyjoint ? "keyjoint" : "full-body") + " stage");
  }
}

// Stacks the conditional and/or null-label calls needed for guidance weight w.
GuidedCall BuildGuidedCall(const Matrix& x_t, const Matrix* mask, StageKind stage, int t, int label, double w,
                           double body_scale) {
  Matrix one = x_t;
  if (stage == StageKind::kKeyjoint) {
    one.conservativeResize(Eigen::NoChange, 2 * x_t.cols());
    if (mask != nullptr) {
      Require(mask->rows() == x_t.rows() && mask->cols() == x_t.cols(), "mask shape does not match the sample");
      one.rightCols(x_t.cols()) = *mask;
    } else {
      one.rightCols(x_t.cols()).setZero();
    }
  }
  GuidedCall call;
  if (w != 0.0) {
    call.cond.push_back({t, label, body_scale});
    call.weights.push_back(w);
  }
  if (w != 1.0) {
    call.cond.push_back({t, kNullLabel, body_scale});
    call.weights.push_back(1.0 - w);
  }
  call.input.resize(one.rows() * static_cast<Eigen::Index>(call.cond.size()), one.cols());
  for (size_t b = 0; b < call.cond.size(); ++b) call.input.middleRows(static_cast<Eigen::Index>(b) * one.rows(), one.rows()) = one;
  return call;
}

Matrix Combine(const Matrix& stacked, const std::vector<double>& weights, Eigen::Index frames) {
  if (weights.size() == 1 && weights[0] == 1.0) return stacked;
  if (weights.size() == 2) return CfgCombine(stacked.topRows(frames), stacked.bottomRows(frames), weights[0]);
  return weights[0] * stacked;
}

}  // namespace

X0Predictor MakeGuidedPredictor(const DenoiserModel& model, StageKind stage, int label, double guidance_weight,
                                double body_scale, const Matrix* mask) {
  CheckStageModel(model, stage);
  Require(std::isfinite(guidance_weight) && guidance_weight >= 0.0, "guidance weight must be finite and >= 0");
  return [&model, stage, label, guidance_weight, body_scale, mask](const Matrix& x_t, int t) {
    const GuidedCall call = BuildGuidedCall(x_t, mask, stage, t, label, guidance_weight, body_scale);
    const DenoiserTape tape(model, call.input, static_cast<int>(x_t.rows()), call.cond);
    return Combine(tape.output(), call.weights, x_t.rows());
  };
}

Matrix Sample(const DenoiserModel& model, const SampleRequest& request, const NoiseSchedule& schedule) {
  const int width = StageWidth(request.stage);
  const Matrix* mask = nullptr;
  if (request.imputation) {
    Require(request.imputation->values.rows() == request.frames && request.imputation->values.cols() == width &&
                request.imputation->mask.rows() == request.frames && request.imputation->mask.cols() == width,
            "imputation shape must be " + std::to_string(request.frames) + "x" + std::to_string(width));
    if (request.stage == StageKind::kKeyjoint) mask = &request.imputation->mask;
  }
  const X0Predictor predict =
      MakeGuidedPredictor(model, request.stage, request.label, request.guidance_weight, request.body_scale, mask);
  SamplerOptions options;
  options.sampler = request.sampler;
  options.seed = request.seed;
  options.reimpute_x0 = request.reimpute_x0;
  options.ddpm_noise_scale = request.ddpm_noise_scale;
  const Matrix x_T = InitialNoise(request.frames, width, request.seed);
  return RunSampler(predict, x_T, request.imputation ? &*request.imputation : nullptr, schedule, options);
}

DifferentiablePredictor MakeDifferentiablePredictor(const DenoiserModel& model, StageKind stage, int label,
                                                    double guidance_weight, double body_scale) {
  CheckStageModel(model, stage);
  return [&model, stage, label, guidance_weight, body_scale](const Matrix& x_t, int t) {
    const GuidedCall call = BuildGuidedCall(x_t, nullptr, stage, t, label, guidance_weight, body_scale);
    auto tape = std::make_shared<DenoiserTape>(model, call.input, static_cast<int>(x_t.rows()), call.cond);
    DifferentiablePrediction out;
    out.x0 = Combine(tape->output(), call.weights, x_t.rows());
    const Eigen::Index frames = x_t.rows();
    const Eigen::Index width = x_t.cols();
    out.vjp = [tape, weights = call.weights, frames, width](const Matrix& d_x0) {
      Matrix d_out(frames * static_cast<Eigen::Index>(weights.size()), d_x0.cols());
      for (size_t b = 0; b < weights.size(); ++b) d_out.middleRows(static_cast<Eigen::Index>(b) * frames, frames) = weights[b] * d_x0;
      const Matrix d_in = tape->Backward(d_out, nullptr, true);
      Matrix d_x = Matrix::Zero(frames, width);
      for (size_t b = 0; b < weights.size(); ++b) d_x += d_in.block(static_cast<Eigen::Index>(b) * frames, 0, frames, width);
      return d_x;
    };
    return out;
  };
}

DdimChain::DdimChain(const DifferentiablePredictor& predict, const Matrix& latent, const NoiseSchedule& schedule,
                     int steps) {
  const std::vector<int> plan = PlanTimesteps(SamplerSpec::Ddim(steps), schedule.T);
  Matrix x = latent;
  for (size_t j = 0; j < plan.size(); ++j) {
    Step step;
    step.t = plan[j];
    step.t_next = j + 1 < plan.size() ? plan[j + 1] : 0;
    DifferentiablePrediction p = predict(x, step.t);
    CheckFinite(p.x0, "x0 prediction", step.t);
    const double a_t = schedule.AlphaBar(step.t);
    const double a_next = schedule.AlphaBar(step.t_next);
    if (step.t_next == 0) {
      step.keep = 0.0;
      step.predict = 1.0;
      x = p.x0;
    } else {
      // x' = sqrt(a') x0 + sqrt(1 - a') (x - sqrt(a) x0) / sqrt(1 - a)
      step.keep = std::sqrt(1.0 - a_next) / std::sqrt(1.0 - a_t);
      step.predict = std::sqrt(a_next) - step.keep * std::sqrt(a_t);
      const Matrix eps = (x - std::sqrt(a_t) * p.x0) / std::sqrt(1.0 - a_t);
      x = std::sqrt(a_next) * p.x0 + std::sqrt(1.0 - a_next) * eps;
    }
    CheckFinite(x, "sample", step.t);
    step.vjp = std::move(p.vjp);
    steps_.push_back(std::move(step));
  }
  output_ = std::move(x);
}

Matrix DdimChain::Backward(const Matrix& d_output) const {
  Require(d_output.rows() == output_.rows() && d_output.cols() == output_.cols(),
          "chain gradient shape does not match the output");
  Matrix d = d_output;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    Matrix d_prev = it->vjp(it->predict * d);
    if (it->keep != 0.0) d_prev += it->keep * d;
    d = std::move(d_prev);
  }
  return d;
}

}  // namespace keymotion
