#include "gradient_checks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "keymotion/denoiser.hpp"

namespace keymotion::checks {

double RelativeError(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

namespace {

void Record(GradientCheck& c, double analytic, double numeric, const std::string& where) {
  const double e = RelativeError(analytic, numeric);
  ++c.coordinates;
  if (e >= c.max_relative_error) {
    c.max_relative_error = e;
    std::ostringstream s;
    s << where << " analytic " << analytic << " numeric " << numeric;
    c.worst = s.str();
  }
}

DenoiserArchitecture SmallArch(int config) {
  DenoiserArchitecture a;
  const bool keyjoint = config % 2 == 0;
  a.input_channels = keyjoint ? 38 : 51;
  a.output_channels = keyjoint ? 19 : 51;
  a.width1 = 8;
  a.width2 = 12;
  a.time_features = 8;
  a.cond_width = 8;
  a.label_count = 3;
  a.scale_conditioning = keyjoint || config % 4 == 1;
  if (config % 3 == 2) {
    for (int t = 1; t <= 50; ++t) a.skip_alpha_bar.push_back(1.0 - 0.019 * t);
  }
  return a;
}

// Non-zero output layer and biases so every parameter reaches the loss.
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
  Matrix inputs, target, weight;
  std::vector<Conditioning> cond;
  int frames = 8;

  double Loss(const Matrix& out, Matrix* grad) const {
    const Matrix diff = out - target;
    const double n = static_cast<double>(out.size());
    if (grad != nullptr) *grad = (2.0 / n) * weight.cwiseProduct(diff);
    return weight.cwiseProduct(diff.cwiseAbs2()).sum() / n;
  }
  double LossAt(const DenoiserModel& m, const Matrix& x) const {
    return Loss(DenoiserTape(m, x, frames, cond).output(), nullptr);
  }
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

}  // namespace

GradientCheck DenoiserParameters(int config) {
  const auto arch = SmallArch(config);
  DenoiserModel m = LiveModel(arch, 100 + config);
  const Problem p = RandomProblem(arch, 2, config < 5 ? 8 : 12, 200 + config);
  const GradientResult r = ComputeGradients(m, p.inputs, p.frames, p.cond,
                                            [&p](const Matrix& out, Matrix& grad) { return p.Loss(out, &grad); });
  std::mt19937_64 rng(300 + config);
  std::vector<std::pair<Eigen::Index, std::string>> coords;
  for (const auto& s : m.slices()) coords.emplace_back(s.offset + static_cast<Eigen::Index>(rng() % s.size()), s.name);
  for (int i = 0; i < 25; ++i) coords.emplace_back(static_cast<Eigen::Index>(rng() % m.parameter_count()), "random");
  GradientCheck check;
  for (const auto& [k, name] : coords) {
    const double saved = m.parameters()(k);
    m.mutable_parameters()(k) = saved + kStep;
    const double up = p.LossAt(m, p.inputs);
    m.mutable_parameters()(k) = saved - kStep;
    const double down = p.LossAt(m, p.inputs);
    m.mutable_parameters()(k) = saved;
    Record(check, r.parameter_grad(k), (up - down) / (2 * kStep), name + "[" + std::to_string(k) + "]");
  }
  return check;
}

GradientCheck DenoiserInputs(int config) {
  const auto arch = SmallArch(config);
  const DenoiserModel m = LiveModel(arch, 400 + config);
  const Problem p = RandomProblem(arch, 2, 8, 500 + config);
  const GradientResult r = ComputeGradients(
      m, p.inputs, p.frames, p.cond, [&p](const Matrix& out, Matrix& grad) { return p.Loss(out, &grad); }, true);
  std::mt19937_64 rng(600 + config);
  GradientCheck check;
  for (int i = 0; i < 25; ++i) {
    const Eigen::Index row = static_cast<Eigen::Index>(rng() % p.inputs.rows());
    const Eigen::Index col = static_cast<Eigen::Index>(rng() % p.inputs.cols());
    Matrix x = p.inputs;
    x(row, col) += kStep;
    const double up = p.LossAt(m, x);
    x(row, col) -= 2 * kStep;
    const double down = p.LossAt(m, x);
    Record(check, r.input_grad(row, col), (up - down) / (2 * kStep),
           "input(" + std::to_string(row) + "," + std::to_string(col) + ")");
  }
  return check;
}

Matrix RandomTrajectory(int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const double base[kKeyjointCount][3] = {{0, 0.95, 0},     {0, 1.6, 0.05},  {0.25, 1.0, 0.1},
                                          {-0.25, 1.0, 0.1}, {0.1, 0.05, 0}, {-0.1, 0.05, 0}};
  Matrix c(frames, kKeyjointDim);
  for (int j = 0; j < kKeyjointCount; ++j) {
    for (int k = 0; k < 3; ++k) {
      double v = base[j][k] + 0.2 * g(rng);
      for (int n = 0; n < frames; ++n) {
        v += 0.05 * g(rng);
        c(n, 3 * j + k) = v;
      }
    }
  }
  for (int n = 0; n < frames; ++n) c(n, kYawColumn) = 0.3 * g(rng);
  return c;
}

namespace {

TargetPath RandomPath(int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TargetPath path;
  path.keyjoint = static_cast<int>(rng() % kKeyjointCount);
  path.t0 = static_cast<int>(rng() % 3);
  path.t1 = frames - 1 - static_cast<int>(rng() % 3);
  const int m = 5 + static_cast<int>(rng() % 20);
  const double radius = 0.5 + u(rng);
  const double arc = 0.5 + 2.0 * u(rng);
  path.points.resize(m, 3);
  for (int i = 0; i < m; ++i) {
    const double a = arc * i / (m - 1);
    path.points.row(i) << radius * std::cos(a), 0.9 + 0.1 * std::sin(3 * a), radius * std::sin(a);
  }
  return path;
}

template <typename F>
GradientCheck CheckAllEntries(const Matrix& c, const Matrix& gradient, F&& value) {
  GradientCheck check;
  Matrix x = c;
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    for (Eigen::Index k = 0; k < c.cols(); ++k) {
      const double saved = x(r, k);
      x(r, k) = saved + kStep;
      const double up = value(x);
      x(r, k) = saved - kStep;
      const double down = value(x);
      x(r, k) = saved;
      Record(check, gradient(r, k), (up - down) / (2 * kStep),
             "C(" + std::to_string(r) + "," + std::to_string(k) + ")");
    }
  }
  return check;
}

ObjectiveSpec SpecFor(ObjectiveKind kind, int frames, int config) {
  ObjectiveSpec spec;
  spec.kind = kind;
  std::mt19937_64 rng(900 + config);
  switch (kind) {
    case ObjectiveKind::kHandToHead:
      if (config % 2 == 1) {
        spec.window_begin = 1;
        spec.window_end = frames - 2;
      }
      break;
    case ObjectiveKind::kNarrowCorridor:
      spec.corridor_axis = config % 3;
      spec.corridor_width = 0.2 + 0.05 * config;
      spec.corridor_center = spec.corridor_axis == 1 ? 0.9 : 0.0;
      break;
    case ObjectiveKind::kTimeAgnostic:
      spec.path = RandomPath(frames, 700 + config);
      spec.length_weight = 0.5 + 0.1 * config;
      break;
    case ObjectiveKind::kComposite:
      spec.terms = {SpecFor(ObjectiveKind::kHandToHead, frames, config),
                    SpecFor(ObjectiveKind::kNarrowCorridor, frames, config),
                    SpecFor(ObjectiveKind::kTimeAgnostic, frames, config)};
      spec.weights = {1.0, 2.0 + config, 0.5};
      break;
  }
  return spec;
}

}  // namespace

GradientCheck Alignment(int config) {
  const int frames = 10 + config;
  const Matrix c = RandomTrajectory(frames, 800 + config);
  const TargetPath path = RandomPath(frames, 850 + config);
  const double w = 0.3 * (config % 4);
  const AlignmentValue a = AlignmentLoss(c, path, w);
  return CheckAllEntries(c, a.gradient, [&](const Matrix& x) { return AlignmentLoss(x, path, w).loss; });
}

GradientCheck Objective(ObjectiveKind kind, int config) {
  const int frames = 12 + config;
  const Matrix c = RandomTrajectory(frames, 1000 + 10 * static_cast<int>(kind) + config);
  const ObjectiveSpec spec = SpecFor(kind, frames, config);
  const ObjectiveValue v = EvaluateObjective(spec, c);
  return CheckAllEntries(c, v.gradient, [&](const Matrix& x) { return EvaluateObjective(spec, x).value; });
}

}  // namespace keymotion::checks
