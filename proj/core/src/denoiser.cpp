#include "keymotion/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace keymotion {

namespace {

using RowMap = Eigen::Map<Matrix>;
using ConstRowMap = Eigen::Map<const Matrix>;

Matrix Sigmoid(const Matrix& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

Matrix Silu(const Matrix& x) { return (x.array() * Sigmoid(x).array()).matrix(); }

// d silu / dx evaluated at the pre-activation, multiplied into `grad`.
void SiluBackwardInPlace(const Matrix& pre, Matrix& grad) {
  const Matrix s = Sigmoid(pre);
  grad.array() *= s.array() * (1.0 + pre.array() * (1.0 - s.array()));
}

constexpr const char* kConvNames[] = {"conv_in", "conv_down1", "conv_down2", "conv_mid",
                                      "conv_up1", "conv_up2", "conv_out"};

struct ConvShape {
  int in = 0;
  int out = 0;
  int stride = 1;
};

std::array<ConvShape, 7> ConvShapes(const DenoiserArchitecture& a) {
  return {ConvShape{a.input_channels, a.width1, 1}, ConvShape{a.width1, a.width2, 2},
          ConvShape{a.width2, a.width2, 2},         ConvShape{a.width2, a.width2, 1},
          ConvShape{2 * a.width2, a.width2, 1},     ConvShape{a.width2 + a.width1, a.width1, 1},
          ConvShape{a.width1, a.output_channels, 1}};
}

std::array<int, 6> LevelWidths(const DenoiserArchitecture& a) {
  return {a.width1, a.width2, a.width2, a.width2, a.width2, a.width1};
}

// Kernel-3 convolution with zero padding over per-sample frame blocks.
Matrix Im2Col(const Matrix& x, int batch, int frames_in, int stride) {
  const int frames_out = frames_in / stride;
  const Eigen::Index c = x.cols();
  Matrix cols(static_cast<Eigen::Index>(batch) * frames_out, 3 * c);
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < frames_out; ++j) {
      double* dst = cols.data() + (static_cast<Eigen::Index>(b) * frames_out + j) * 3 * c;
      for (int tap = 0; tap < 3; ++tap) {
        const int src = j * stride + tap - 1;
        if (src < 0 || src >= frames_in) {
          std::fill_n(dst + tap * c, c, 0.0);
        } else {
          std::copy_n(x.data() + (static_cast<Eigen::Index>(b) * frames_in + src) * c, c, dst + tap * c);
        }
      }
    }
  }
  return cols;
}

// Input gradient of the convolution: gathers the output-gradient rows each input frame feeds,
// then contracts them with the tap-reordered weights.
Matrix ConvInputGrad(const Matrix& dout, const ConstRowMap& weight, int batch, int frames_in, int stride,
                     Eigen::Index channels) {
  const int frames_out = frames_in / stride;
  const Eigen::Index o = dout.cols();
  Matrix gathered(static_cast<Eigen::Index>(batch) * frames_in, 3 * o);
  for (int b = 0; b < batch; ++b) {
    for (int src = 0; src < frames_in; ++src) {
      double* dst = gathered.data() + (static_cast<Eigen::Index>(b) * frames_in + src) * 3 * o;
      for (int tap = 0; tap < 3; ++tap) {
        const int num = src + 1 - tap;
        const int j = num / stride;
        if (num < 0 || num % stride != 0 || j >= frames_out) {
          std::fill_n(dst + tap * o, o, 0.0);
        } else {
          std::copy_n(dout.data() + (static_cast<Eigen::Index>(b) * frames_out + j) * o, o, dst + tap * o);
        }
      }
    }
  }
  Matrix reordered(3 * o, channels);
  for (int tap = 0; tap < 3; ++tap) {
    reordered.middleRows(tap * o, o) = weight.middleRows(tap * channels, channels).transpose();
  }
  Matrix dx(gathered.rows(), channels);
  dx.noalias() = gathered * reordered;
  return dx;
}

Matrix Upsample(const Matrix& x, int batch, int frames_in) {
  Matrix out(static_cast<Eigen::Index>(batch) * frames_in * 2, x.cols());
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Eigen::Index b = r / (2 * frames_in);
    const Eigen::Index i = (r % (2 * frames_in)) / 2;
    out.row(r) = x.row(b * frames_in + i);
  }
  return out;
}

Matrix UpsampleBackward(const Matrix& dout, int batch, int frames_in) {
  Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(batch) * frames_in, dout.cols());
  for (Eigen::Index r = 0; r < dout.rows(); ++r) {
    const Eigen::Index b = r / (2 * frames_in);
    const Eigen::Index i = (r % (2 * frames_in)) / 2;
    dx.row(b * frames_in + i) += dout.row(r);
  }
  return dx;
}

Matrix Concat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

void AddPerSample(Matrix& x, const Matrix& per_sample, int frames) {
  for (Eigen::Index b = 0; b < per_sample.rows(); ++b) {
    x.middleRows(b * frames, frames).rowwise() += per_sample.row(b);
  }
}

Matrix SumPerSample(const Matrix& x, int batch, int frames) {
  Matrix out(batch, x.cols());
  for (int b = 0; b < batch; ++b) out.row(b) = x.middleRows(static_cast<Eigen::Index>(b) * frames, frames).colwise().sum();
  return out;
}

Matrix TimestepFeatures(std::span<const Conditioning> cond, int features) {
  const int half = features / 2;
  Matrix out(static_cast<Eigen::Index>(cond.size()), features);
  for (size_t b = 0; b < cond.size(); ++b) {
    for (int k = 0; k < half; ++k) {
      const double freq = std::pow(1000.0, -static_cast<double>(k) / half);
      out(static_cast<Eigen::Index>(b), 2 * k) = std::sin(cond[b].timestep * freq);
      out(static_cast<Eigen::Index>(b), 2 * k + 1) = std::cos(cond[b].timestep * freq);
    }
  }
  return out;
}

}  // namespace

void DenoiserArchitecture::Validate() const {
  Require(input_channels > 0 && output_channels > 0, "denoiser channel counts must be positive");
  Require(width1 > 0 && width2 > 0 && cond_width > 0, "denoiser widths must be positive");
  Require(time_features > 0 && time_features % 2 == 0, "time_features must be a positive even number");
  Require(label_count >= 0, "label_count must be non-negative");
  if (!skip_alpha_bar.empty()) {
    Require(input_channels >= output_channels, "the noise-level skip needs input_channels >= output_channels");
    for (double a : skip_alpha_bar) Require(a > 0.0 && a <= 1.0, "skip alpha_bar entries must be in (0, 1]");
  }
}

std::vector<ParameterSlice> LayoutParameters(const DenoiserArchitecture& arch) {
  arch.Validate();
  std::vector<ParameterSlice> slices;
  Eigen::Index offset = 0;
  auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
    slices.push_back(ParameterSlice{std::move(name), offset, rows, cols});
    offset += rows * cols;
  };
  const auto convs = ConvShapes(arch);
  for (size_t i = 0; i < convs.size(); ++i) {
    add(std::string(kConvNames[i]) + ".weight", 3 * convs[i].in, convs[i].out);
    add(std::string(kConvNames[i]) + ".bias", 1, convs[i].out);
  }
  add("global.weight", arch.width2, arch.width2);
  add("global.bias", 1, arch.width2);
  add("time1.weight", arch.time_features, arch.cond_width);
  add("time1.bias", 1, arch.cond_width);
  add("time2.weight", arch.cond_width, arch.cond_width);
  add("time2.bias", 1, arch.cond_width);
  add("label.table", arch.label_count + 1, arch.cond_width);
  if (arch.scale_conditioning) add("scale.weight", 1, arch.cond_width);
  const auto widths = LevelWidths(arch);
  for (size_t i = 0; i < widths.size(); ++i) {
    add("proj" + std::to_string(i) + ".weight", arch.cond_width, widths[i]);
    add("proj" + std::to_string(i) + ".bias", 1, widths[i]);
  }
  return slices;
}

DenoiserModel::DenoiserModel(const DenoiserArchitecture& arch, std::uint64_t seed)
    : arch_(arch), slices_(LayoutParameters(arch)) {
  params_ = Vector::Zero(slices_.back().offset + slices_.back().size());
  std::mt19937_64 rng(seed);
  for (const ParameterSlice& s : slices_) {
    const bool is_bias = s.name.ends_with(".bias");
    if (is_bias || s.name.starts_with("conv_out")) continue;
    double bound = 1.0 / std::sqrt(static_cast<double>(s.rows));
    if (s.name == "label.table" || s.name == "scale.weight") bound = 1.0;
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < s.size(); ++i) params_(s.offset + i) = dist(rng);
  }
}

DenoiserModel::DenoiserModel(const DenoiserArchitecture& arch, Vector parameters)
    : arch_(arch), slices_(LayoutParameters(arch)), params_(std::move(parameters)) {
  const Eigen::Index expected = slices_.back().offset + slices_.back().size();
  if (params_.size() != expected) {
    throw std::invalid_argument("parameter count " + std::to_string(params_.size()) +
                                " does not match architecture (" + std::to_string(expected) + ")");
  }
  if (!params_.allFinite()) throw NumericError("denoiser parameters contain non-finite values");
}

const ParameterSlice& DenoiserModel::slice(std::string_view name) const {
  for (const auto& s : slices_) {
    if (s.name == name) return s;
  }
  throw std::invalid_argument("unknown parameter slice '" + std::string(name) + "'");
}

struct DenoiserTape::State {
  const DenoiserModel* model = nullptr;
  int batch = 0;
  int frames = 0;
  std::vector<Conditioning> cond;
  // Conditioning path.
  Matrix time_in, time_pre1, time_act1, embed_pre, embed;
  // Per conv layer: im2col input and pre-activation (after level bias).
  std::array<Matrix, 7> cols;
  std::array<Matrix, 6> pre;
  Matrix h0, h1, h2, h3, h4;
  Matrix global_in;
  Matrix output;
  std::vector<double> c_skip, c_out;

  ConstRowMap Param(std::string_view name) const {
    const ParameterSlice& s = model->slice(name);
    return ConstRowMap(model->parameters().data() + s.offset, s.rows, s.cols);
  }
};

namespace {

RowMap GradView(Vector& grad, const DenoiserModel& model, std::string_view name) {
  const ParameterSlice& s = model.slice(name);
  return RowMap(grad.data() + s.offset, s.rows, s.cols);
}

}  // namespace

DenoiserTape::DenoiserTape(const DenoiserModel& model, const Matrix& inputs, int frames,
                           std::span<const Conditioning> cond)
    : state_(std::make_unique<State>()) {
  const DenoiserArchitecture& a = model.architecture();
  State& s = *state_;
  s.model = &model;
  s.frames = frames;
  s.batch = static_cast<int>(cond.size());
  s.cond.assign(cond.begin(), cond.end());
  if (frames < 4 || frames % 4 != 0) {
    throw std::invalid_argument("denoiser frame count must be a positive multiple of 4, got " + std::to_string(frames));
  }
  if (inputs.cols() != a.input_channels) {
    throw std::invalid_argument("denoiser input width " + std::to_string(inputs.cols()) + " does not match " +
                                std::to_string(a.input_channels));
  }
  if (inputs.rows() != static_cast<Eigen::Index>(s.batch) * frames || s.batch == 0) {
    throw std::invalid_argument("denoiser input rows do not match batch x frames");
  }
  for (const Conditioning& c : cond) {
    if (c.label != kNullLabel && (c.label < 0 || c.label >= a.label_count)) {
      throw std::invalid_argument("unknown label " + std::to_string(c.label));
    }
    if (c.timestep < 1) throw std::invalid_argument("diffusion timestep must be >= 1");
    if (!a.skip_alpha_bar.empty() && c.timestep > static_cast<int>(a.skip_alpha_bar.size())) {
      throw std::invalid_argument("diffusion timestep " + std::to_string(c.timestep) + " exceeds the skip table");
    }
    if (!std::isfinite(c.body_scale)) throw std::invalid_argument("non-finite body scale");
  }

  // Conditioning vector.
  s.time_in = TimestepFeatures(cond, a.time_features);
  s.time_pre1 = s.time_in * s.Param("time1.weight");
  s.time_pre1.rowwise() += s.Param("time1.bias").row(0);
  s.time_act1 = Silu(s.time_pre1);
  s.embed_pre = s.time_act1 * s.Param("time2.weight");
  s.embed_pre.rowwise() += s.Param("time2.bias").row(0);
  const auto table = s.Param("label.table");
  for (int b = 0; b < s.batch; ++b) {
    const int row = cond[b].label == kNullLabel ? a.label_count : cond[b].label;
    s.embed_pre.row(b) += table.row(row);
    if (a.scale_conditioning) s.embed_pre.row(b) += (cond[b].body_scale - 1.0) * s.Param("scale.weight").row(0);
  }
  s.embed = Silu(s.embed_pre);

  auto level_bias = [&](int level) {
    Matrix bias = s.embed * s.Param("proj" + std::to_string(level) + ".weight");
    bias.rowwise() += s.Param("proj" + std::to_string(level) + ".bias").row(0);
    return bias;
  };
  auto conv = [&](int layer, const Matrix& x, int frames_in, int stride) {
    s.cols[layer] = Im2Col(x, s.batch, frames_in, stride);
    const std::string name = kConvNames[layer];
    const auto weight = s.Param(name + ".weight");
    Matrix out(s.cols[layer].rows(), weight.cols());
    out.noalias() = s.cols[layer] * weight;
    out.rowwise() += s.Param(name + ".bias").row(0);
    return out;
  };

  const int n0 = frames, n1 = frames / 2, n2 = frames / 4;
  s.pre[0] = conv(0, inputs, n0, 1);
  AddPerSample(s.pre[0], level_bias(0), n0);
  s.h0 = Silu(s.pre[0]);

  s.pre[1] = conv(1, s.h0, n0, 2);
  AddPerSample(s.pre[1], level_bias(1), n1);
  s.h1 = Silu(s.pre[1]);

  s.pre[2] = conv(2, s.h1, n1, 2);
  AddPerSample(s.pre[2], level_bias(2), n2);
  s.h2 = Silu(s.pre[2]);

  s.pre[3] = conv(3, s.h2, n2, 1);
  AddPerSample(s.pre[3], level_bias(3), n2);
  s.global_in = SumPerSample(s.h2, s.batch, n2) / static_cast<double>(n2);
  Matrix global = s.global_in * s.Param("global.weight");
  global.rowwise() += s.Param("global.bias").row(0);
  AddPerSample(s.pre[3], global, n2);
  s.h3 = s.h2 + Silu(s.pre[3]);

  s.pre[4] = conv(4, Concat(Upsample(s.h3, s.batch, n2), s.h1), n1, 1);
  AddPerSample(s.pre[4], level_bias(4), n1);
  s.h4 = Silu(s.pre[4]);

  s.pre[5] = conv(5, Concat(Upsample(s.h4, s.batch, n1), s.h0), n0, 1);
  AddPerSample(s.pre[5], level_bias(5), n0);
  const Matrix h5 = Silu(s.pre[5]);

  s.output = conv(6, h5, n0, 1);
  if (!a.skip_alpha_bar.empty()) {
    for (int b = 0; b < s.batch; ++b) {
      const double ab = a.skip_alpha_bar[static_cast<size_t>(cond[b].timestep - 1)];
      s.c_skip.push_back(std::sqrt(ab));
      s.c_out.push_back(std::sqrt(1.0 - ab));
      const Eigen::Index row = static_cast<Eigen::Index>(b) * frames;
      auto out = s.output.middleRows(row, frames);
      out = s.c_out.back() * out + s.c_skip.back() * inputs.block(row, 0, frames, a.output_channels);
    }
  }
}

DenoiserTape::~DenoiserTape() = default;
DenoiserTape::DenoiserTape(DenoiserTape&&) noexcept = default;
DenoiserTape& DenoiserTape::operator=(DenoiserTape&&) noexcept = default;

const Matrix& DenoiserTape::output() const { return state_->output; }
int DenoiserTape::batch() const { return state_->batch; }
int DenoiserTape::frames() const { return state_->frames; }

Matrix DenoiserTape::Backward(const Matrix& output_grad, Vector* param_grad, bool want_input_grad) const {
  const State& s = *state_;
  const DenoiserModel& model = *s.model;
  const DenoiserArchitecture& a = model.architecture();
  if (output_grad.rows() != s.output.rows() || output_grad.cols() != s.output.cols()) {
    throw std::invalid_argument("output gradient shape does not match denoiser output");
  }
  if (param_grad != nullptr && param_grad->size() != model.parameter_count()) {
    throw std::invalid_argument("parameter gradient size does not match model");
  }
  const int n0 = s.frames, n1 = s.frames / 2, n2 = s.frames / 4;
  const auto shapes = ConvShapes(a);
  Matrix d_embed = Matrix::Zero(s.batch, a.cond_width);

  // Returns d(loss)/d(conv input) and accumulates weight/bias gradients.
  auto conv_backward = [&](int layer, const Matrix& dout, int frames_in, bool need_input) {
    const std::string name = kConvNames[layer];
    if (param_grad != nullptr) {
      GradView(*param_grad, model, name + ".weight").noalias() += s.cols[layer].transpose() * dout;
      GradView(*param_grad, model, name + ".bias").row(0) += dout.colwise().sum();
    }
    if (!need_input) return Matrix();
    return ConvInputGrad(dout, s.Param(name + ".weight"), s.batch, frames_in, shapes[layer].stride, shapes[layer].in);
  };
  auto level_bias_backward = [&](int level, const Matrix& dpre, int frames) {
    const Matrix dbias = SumPerSample(dpre, s.batch, frames);
    const std::string name = "proj" + std::to_string(level);
    if (param_grad != nullptr) {
      GradView(*param_grad, model, name + ".weight").noalias() += s.embed.transpose() * dbias;
      GradView(*param_grad, model, name + ".bias").row(0) += dbias.colwise().sum();
    }
    d_embed.noalias() += dbias * s.Param(name + ".weight").transpose();
  };

  const bool skip = !a.skip_alpha_bar.empty();
  Matrix dnet = output_grad;
  if (skip) {
    for (int b = 0; b < s.batch; ++b) dnet.middleRows(static_cast<Eigen::Index>(b) * n0, n0) *= s.c_out[b];
  }
  Matrix dh5 = conv_backward(6, dnet, n0, true);
  Matrix dpre = std::move(dh5);
  SiluBackwardInPlace(s.pre[5], dpre);
  level_bias_backward(5, dpre, n0);
  Matrix dcat = conv_backward(5, dpre, n0, true);
  Matrix dh0 = dcat.rightCols(a.width1);
  Matrix dh4 = UpsampleBackward(dcat.leftCols(a.width2), s.batch, n1);

  dpre = std::move(dh4);
  SiluBackwardInPlace(s.pre[4], dpre);
  level_bias_backward(4, dpre, n1);
  dcat = conv_backward(4, dpre, n1, true);
  Matrix dh1 = dcat.rightCols(a.width2);
  Matrix dh3 = UpsampleBackward(dcat.leftCols(a.width2), s.batch, n2);

  // h3 = h2 + silu(pre3)
  Matrix dh2 = dh3;
  dpre = std::move(dh3);
  SiluBackwardInPlace(s.pre[3], dpre);
  level_bias_backward(3, dpre, n2);
  const Matrix dglobal = SumPerSample(dpre, s.batch, n2);
  if (param_grad != nullptr) {
    GradView(*param_grad, model, "global.weight").noalias() += s.global_in.transpose() * dglobal;
    GradView(*param_grad, model, "global.bias").row(0) += dglobal.colwise().sum();
  }
  const Matrix dglobal_in = dglobal * s.Param("global.weight").transpose() / static_cast<double>(n2);
  AddPerSample(dh2, dglobal_in, n2);
  dh2 += conv_backward(3, dpre, n2, true);

  dpre = std::move(dh2);
  SiluBackwardInPlace(s.pre[2], dpre);
  level_bias_backward(2, dpre, n2);
  dh1 += conv_backward(2, dpre, n1, true);

  dpre = std::move(dh1);
  SiluBackwardInPlace(s.pre[1], dpre);
  level_bias_backward(1, dpre, n1);
  dh0 += conv_backward(1, dpre, n0, true);

  dpre = std::move(dh0);
  SiluBackwardInPlace(s.pre[0], dpre);
  level_bias_backward(0, dpre, n0);
  Matrix dinput = conv_backward(0, dpre, n0, want_input_grad);
  if (skip && want_input_grad) {
    for (int b = 0; b < s.batch; ++b) {
      const Eigen::Index row = static_cast<Eigen::Index>(b) * n0;
      dinput.block(row, 0, n0, a.output_channels) += s.c_skip[b] * output_grad.middleRows(row, n0);
    }
  }

  if (param_grad != nullptr) {
    Matrix dembed_pre = d_embed;
    SiluBackwardInPlace(s.embed_pre, dembed_pre);
    auto table = GradView(*param_grad, model, "label.table");
    for (int b = 0; b < s.batch; ++b) {
      const int row = s.cond[b].label == kNullLabel ? a.label_count : s.cond[b].label;
      table.row(row) += dembed_pre.row(b);
      if (a.scale_conditioning) {
        GradView(*param_grad, model, "scale.weight").row(0) += (s.cond[b].body_scale - 1.0) * dembed_pre.row(b);
      }
    }
    GradView(*param_grad, model, "time2.weight").noalias() += s.time_act1.transpose() * dembed_pre;
    GradView(*param_grad, model, "time2.bias").row(0) += dembed_pre.colwise().sum();
    Matrix dtime1 = dembed_pre * s.Param("time2.weight").transpose();
    SiluBackwardInPlace(s.time_pre1, dtime1);
    GradView(*param_grad, model, "time1.weight").noalias() += s.time_in.transpose() * dtime1;
    GradView(*param_grad, model, "time1.bias").row(0) += dtime1.colwise().sum();
  }
  return dinput;
}

Matrix DenoiserModel::Denoise(const Matrix& input, const Conditioning& cond) const {
  if (input.cols() != arch_.input_channels) {
    throw std::invalid_argument("denoise: input width " + std::to_string(input.cols()) + " does not match " +
                                std::to_string(arch_.input_channels));
  }
  const Conditioning c[1] = {cond};
  return DenoiserTape(*this, input, static_cast<int>(input.rows()), c).output();
}

GradientResult ComputeGradients(const DenoiserModel& model, const Matrix& inputs, int frames,
                                std::span<const Conditioning> cond, const LossEvaluator& loss,
                                bool want_input_grad) {
  DenoiserTape tape(model, inputs, frames, cond);
  Matrix output_grad = Matrix::Zero(tape.output().rows(), tape.output().cols());
  GradientResult result;
  result.loss = loss(tape.output(), output_grad);
  if (!std::isfinite(result.loss)) {
    std::ostringstream msg;
    msg << "non-finite loss " << result.loss;
    for (Eigen::Index r = 0; r < tape.output().rows(); ++r) {
      for (Eigen::Index c = 0; c < tape.output().cols(); ++c) {
        if (!std::isfinite(tape.output()(r, c))) {
          msg << "; first non-finite denoiser output at sample " << r / frames << ", frame " << r % frames
              << ", feature " << c;
          throw NumericError(msg.str());
        }
      }
    }
    msg << " with finite denoiser outputs (loss evaluator produced it)";
    throw NumericError(msg.str());
  }
  result.parameter_grad = Vector::Zero(model.parameter_count());
  result.input_grad = tape.Backward(output_grad, &result.parameter_grad, want_input_grad);
  return result;
}

}  // namespace keymotion
