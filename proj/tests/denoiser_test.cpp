#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gradient_checks.hpp"
#include "keymotion/denoiser.hpp"
#include "keymotion/training.hpp"

namespace keymotion {
namespace {

DenoiserArchitecture SmallArch(int in, int out, bool scale) {
  DenoiserArchitecture a;
  a.input_channels = in;
  a.output_channels = out;
  a.width1 = 8;
  a.width2 = 12;
  a.time_features = 8;
  a.cond_width = 8;
  a.label_count = 3;
  a.scale_conditioning = scale;
  return a;
}

// Fresh model with a non-zero output layer so every parameter influences the loss.
DenoiserModel LiveModel(const DenoiserArchitecture& arch, std::uint64_t seed) {
  DenoiserModel m(arch, seed);
  std::mt19937_64 rng(seed + 1000);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (const auto& s : m.slices()) {
    if (s.name.ends_with(".bias") || s.name.starts_with("conv_out")) {
      for (Eigen::Index i = 0; i < s.size(); ++i) m.mutable_parameters()(s.offset + i) = u(rng);
    }
  }
  return m;
}

struct Problem {
  Matrix inputs;
  Matrix target;
  Matrix weight;
  std::vector<Conditioning> cond;
  int frames = 8;
};

Problem RandomProblem(const DenoiserArchitecture& arch, int batch, int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Problem p;
  p.frames = frames;
  p.inputs = Matrix::NullaryExpr(batch * frames, arch.input_channels, [&]() { return g(rng); });
  p.target = Matrix::NullaryExpr(batch * frames, arch.output_channels, [&]() { return g(rng); });
  p.weight = Matrix::NullaryExpr(batch * frames, arch.output_channels, [&]() { return u(rng); });
  for (int b = 0; b < batch; ++b) {
    const int label = static_cast<int>(rng() % (arch.label_count + 1)) - 1;
    p.cond.push_back({1 + static_cast<int>(rng() % 50), label, 0.8 + 0.4 * u(rng)});
  }
  return p;
}

LossEvaluator WeightedSquared(const Problem& p) {
  return [&p](const Matrix& out, Matrix& grad) {
    const Matrix diff = out - p.target;
    const double n = static_cast<double>(out.size());
    grad = (2.0 / n) * p.weight.cwiseProduct(diff);
    return p.weight.cwiseProduct(diff.cwiseAbs2()).sum() / n;
  };
}



TEST(Denoiser, FreshModelOnZeroInputIsBounded) {
  const DenoiserModel m(DenoiserArchitecture{}, 3);
  const Matrix out = m.Denoise(Matrix::Zero(60, 38), {10, 2, 1.1});
  EXPECT_TRUE(out.allFinite());
  EXPECT_LT(out.cwiseAbs().maxCoeff(), 10.0);
}

TEST(Denoiser, ForwardIsDeterministic) {
  const DenoiserModel m = LiveModel(DenoiserArchitecture{}, 4);
  const Matrix x = Matrix::Random(60, 38);
  EXPECT_EQ(m.Denoise(x, {7, 1, 1.0}), m.Denoise(x, {7, 1, 1.0}));
  EXPECT_NE(m.Denoise(x, {7, 1, 1.0}), m.Denoise(x, {7, kNullLabel, 1.0}));
}

TEST(Denoiser, BatchedForwardMatchesPerSample) {
  const auto arch = SmallArch(6, 5, true);
  const DenoiserModel m = LiveModel(arch, 2);
  const Problem p = RandomProblem(arch, 3, 8, 9);
  const DenoiserTape tape(m, p.inputs, 8, p.cond);
  for (int b = 0; b < 3; ++b) {
    const Matrix single = m.Denoise(p.inputs.middleRows(8 * b, 8), p.cond[b]);
    EXPECT_LT((tape.output().middleRows(8 * b, 8) - single).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Denoiser, SkipWithFreshOutputLayerScalesNoisySample) {
  auto arch = SmallArch(6, 4, false);
  arch.skip_alpha_bar = {0.9, 0.64, 0.25};
  const DenoiserModel m(arch, 5);
  const Matrix x = Matrix::Random(8, 6);
  const Matrix out = m.Denoise(x, {2, 1, 1.0});
  EXPECT_LT((out - 0.8 * x.leftCols(4)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(m.Denoise(x, {4, 1, 1.0}), std::invalid_argument);
  arch.skip_alpha_bar = {0.0};
  EXPECT_THROW(DenoiserModel(arch, 1), std::invalid_argument);
}

TEST(Training, WeightedMeanSquaredErrorWeightsWholeSamples) {
  const Matrix out = Matrix::Constant(4, 2, 1.0);
  const Matrix target = Matrix::Zero(4, 2);
  const double weights[] = {1.0, 3.0};
  Matrix grad;
  EXPECT_DOUBLE_EQ(WeightedMeanSquaredError(out, target, weights, 2, grad), 2.0);
  EXPECT_DOUBLE_EQ(grad(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(grad(3, 1), 0.75);
  Matrix plain;
  const double ones[] = {1.0, 1.0};
  EXPECT_DOUBLE_EQ(WeightedMeanSquaredError(out, target, ones, 2, grad), MeanSquaredError(out, target, plain));
  EXPECT_EQ(grad, plain);
}

TEST(Denoiser, RejectsBadShapesAndLabels) {
  const auto arch = SmallArch(6, 5, true);
  const DenoiserModel m(arch, 1);
  EXPECT_THROW(m.Denoise(Matrix::Zero(8, 7), {}), std::invalid_argument);
  EXPECT_THROW(m.Denoise(Matrix::Zero(6, 6), {}), std::invalid_argument);
  EXPECT_THROW(m.Denoise(Matrix::Zero(8, 6), {1, 3, 1.0}), std::invalid_argument);
  EXPECT_THROW(m.Denoise(Matrix::Zero(8, 6), {0, 1, 1.0}), std::invalid_argument);
  EXPECT_THROW(DenoiserModel(arch, Vector::Zero(5)), std::invalid_argument);
}

TEST(DenoiserGradients, QuadraticProbeOnOutputLayerIsAnalytic) {
  const auto arch = SmallArch(6, 5, true);
  const DenoiserModel m = LiveModel(arch, 8);
  const Problem p = RandomProblem(arch, 2, 8, 3);
  const GradientResult r = ComputeGradients(m, p.inputs, 8, p.cond, [](const Matrix& out, Matrix& grad) {
    grad = out;
    return 0.5 * out.squaredNorm();
  });
  const DenoiserTape tape(m, p.inputs, 8, p.cond);
  const auto& bias = m.slice("conv_out.bias");
  const Eigen::RowVectorXd expected = tape.output().colwise().sum();
  for (Eigen::Index c = 0; c < bias.size(); ++c) {
    EXPECT_NEAR(r.parameter_grad(bias.offset + c), expected(c), 1e-8);
  }
  EXPECT_NEAR(r.loss, 0.5 * tape.output().squaredNorm(), 1e-12);
}

TEST(DenoiserGradients, ZeroLossWeightGivesZeroGradient) {
  const auto arch = SmallArch(6, 5, true);
  const DenoiserModel m = LiveModel(arch, 8);
  const Problem p = RandomProblem(arch, 2, 8, 3);
  const GradientResult r = ComputeGradients(
      m, p.inputs, 8, p.cond,
      [](const Matrix& out, Matrix& grad) {
        grad.setZero(out.rows(), out.cols());
        return 0.0;
      },
      true);
  EXPECT_EQ(r.parameter_grad.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.input_grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(DenoiserGradients, NonFiniteLossNamesLocation) {
  const auto arch = SmallArch(6, 5, true);
  const DenoiserModel m = LiveModel(arch, 8);
  const Problem p = RandomProblem(arch, 2, 8, 3);
  try {
    ComputeGradients(m, p.inputs, 8, p.cond, [](const Matrix&, Matrix&) { return std::nan(""); });
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite loss"), std::string::npos);
  }
}

TEST(DenoiserGradients, ParametersMatchFiniteDifferences) {
  for (int config = 0; config < 10; ++config) {
    const checks::GradientCheck c = checks::DenoiserParameters(config);
    EXPECT_LT(c.max_relative_error, 1e-4) << "config " << config << ": " << c.worst;
    EXPECT_GT(c.coordinates, 25);
  }
}

TEST(DenoiserGradients, InputsMatchFiniteDifferences) {
  for (int config = 0; config < 10; ++config) {
    const checks::GradientCheck c = checks::DenoiserInputs(config);
    EXPECT_LT(c.max_relative_error, 1e-4) << "config " << config << ": " << c.worst;
  }
}

}  // namespace
}  // namespace keymotion
