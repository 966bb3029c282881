#include "keymotion/implicit.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "keymotion/optimizer.hpp"
#include "text_util.hpp"

namespace keymotion {

double SplineCurveLength(const SplineSegment<double>& spline, int subdivisions) {
  Require(subdivisions >= 1, "subdivisions must be positive");
  double total = 0.0;
  Point3<double> prev = spline.Evaluate(spline.knots.front());
  for (int i = 1; i <= subdivisions; ++i) {
    const Point3<double> p = spline.Evaluate(spline.knots.front() + spline.length * i / subdivisions);
    total += std::sqrt(ad::Square(p[0] - prev[0]) + ad::Square(p[1] - prev[1]) + ad::Square(p[2] - prev[2]));
    prev = p;
  }
  return total;
}

namespace {

std::vector<Point3<double>> ToPoints(const Matrix& m) {
  std::vector<Point3<double>> pts;
  for (Eigen::Index i = 0; i < m.rows(); ++i) pts.push_back({m(i, 0), m(i, 1), m(i, 2)});
  return pts;
}

}  // namespace

double TargetPath::Length() const { return CumulativeArcLength(ToPoints(points)).back(); }

void TargetPath::Validate(int frames) const {
  Require(points.cols() == 3 && points.rows() >= 2, "target path needs at least two 3-D points");
  Require(points.allFinite(), "target path points must be finite");
  Require(keyjoint >= 0 && keyjoint < kKeyjointCount, "target path keyjoint out of range");
  Require(t0 >= 0 && t0 < t1 && t1 < frames,
          "target path needs 0 <= t0 < t1 < " + std::to_string(frames) + ", got [" + std::to_string(t0) + ", " +
              std::to_string(t1) + "]");
  Require(Length() > 0.0, "target path points are all coincident");
}

TargetPath ParseTargetPath(std::istream& in, const std::string& source) {
  TargetPath path;
  std::vector<Vec3> pts;
  bool have_header = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = text::StripComment(line);
    if (body.empty()) continue;
    const auto f = text::SplitFields(body);
    const std::string where = source + ":" + std::to_string(line_no);
    if (f.size() != 3) throw ConfigError(where + ": expected three comma-separated fields");
    if (!have_header) {
      path.keyjoint = KeyjointFromName(f[0]);
      if (path.keyjoint < 0) throw ConfigError(where + ": unknown keyjoint '" + std::string(f[0]) + "'");
      path.t0 = static_cast<int>(text::ParseInt(f[1], where));
      path.t1 = static_cast<int>(text::ParseInt(f[2], where));
      have_header = true;
      continue;
    }
    pts.emplace_back(text::ParseDouble(f[0], where), text::ParseDouble(f[1], where), text::ParseDouble(f[2], where));
  }
  if (!have_header) throw ConfigError(source + ": missing `keyjoint, t0, t1` header");
  if (pts.size() < 2) throw ConfigError(source + ": target path needs at least two points");
  path.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (size_t i = 0; i < pts.size(); ++i) path.points.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return path;
}

TargetPath ReadTargetPath(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open target path file " + path.string());
  return ParseTargetPath(in, path.string());
}

void WriteTargetPath(std::ostream& out, const TargetPath& path) {
  out << KeyjointName(path.keyjoint) << ", " << path.t0 << ", " << path.t1 << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < path.points.rows(); ++i) {
    out << path.points(i, 0) << ", " << path.points(i, 1) << ", " << path.points(i, 2) << '\n';
  }
}

Matrix ResamplePath(const Matrix& points, int count) {
  const auto pts = ToPoints(points);
  const auto spline = FitSpline(pts, CumulativeArcLength(pts));
  const auto res = ResampleUniform(spline, count);
  Matrix out(count, 3);
  for (int i = 0; i < count; ++i) out.row(i) << res[static_cast<size_t>(i)][0], res[static_cast<size_t>(i)][1], res[static_cast<size_t>(i)][2];
  return out;
}

void ObjectiveSpec::Validate() const {
  switch (kind) {
    case ObjectiveKind::kHandToHead:
      Require(window_begin < 0 || window_end > window_begin, "hand-to-head window must be non-empty");
      break;
    case ObjectiveKind::kNarrowCorridor:
      Require(corridor_width > 0.0, "corridor width must be positive");
      Require(corridor_axis >= 0 && corridor_axis < 3, "corridor axis must be 0, 1 or 2");
      break;
    case ObjectiveKind::kTimeAgnostic: Require(length_weight >= 0.0, "length weight must be >= 0"); break;
    case ObjectiveKind::kComposite:
      Require(terms.size() == weights.size(), "composite objective needs one weight per term");
      for (const auto& t : terms) t.Validate();
      break;
  }
}

namespace {

using ad::Var;

struct TermResult {
  Var value;
  double geometric = 0.0;
  double length = 0.0;
};

// C as tape variables, row-major N x 19.
struct VarGrid {
  std::vector<Var> vars;
  int frames = 0;
  const Var& at(int n, int c) const { return vars[static_cast<size_t>(n) * kKeyjointDim + c]; }
};

Point3<Var> JointAt(const VarGrid& g, int n, int joint) {
  const int c = KeyjointColumn(joint);
  return {g.at(n, c), g.at(n, c + 1), g.at(n, c + 2)};
}

Var Distance(const Point3<Var>& a, const Point3<double>& b) {
  return ad::sqrt(ad::Square(a[0] - b[0]) + ad::Square(a[1] - b[1]) + ad::Square(a[2] - b[2]));
}

Var Distance(const Point3<Var>& a, const Point3<Var>& b) {
  return ad::sqrt(ad::Square(a[0] - b[0]) + ad::Square(a[1] - b[1]) + ad::Square(a[2] - b[2]));
}

TermResult AlignmentTerm(const VarGrid& g, const TargetPath& path, double length_weight, bool* degenerate) {
  path.Validate(g.frames);
  const int count = path.segment_frames();
  std::vector<Point3<Var>> seg;
  for (int n = path.t0; n <= path.t1; ++n) seg.push_back(JointAt(g, n, path.keyjoint));
  const std::vector<Var> s = CumulativeArcLength(seg);
  const double target_length = path.Length();
  const Matrix target = ResamplePath(path.points, count);
  TermResult r;
  if (!(s.back().value() > 0.0)) {
    if (degenerate != nullptr) *degenerate = true;
    const Var geo = Distance(seg.front(), Point3<double>{path.points(0, 0), path.points(0, 1), path.points(0, 2)});
    const Var len = ad::abs(s.back() - target_length);
    r.value = geo + length_weight * len;
    r.geometric = geo.value();
    r.length = len.value();
    return r;
  }
  if (degenerate != nullptr) *degenerate = false;
  const auto spline = FitSpline(seg, s);
  const auto res = ResampleUniform(spline, count);
  Var geo = 0.0;
  for (int k = 0; k < count; ++k) {
    geo += Distance(res[static_cast<size_t>(k)], Point3<double>{target(k, 0), target(k, 1), target(k, 2)});
  }
  geo = geo / static_cast<double>(count);
  const Var len = ad::abs(s.back() - target_length);
  r.value = geo + length_weight * len;
  r.geometric = geo.value();
  r.length = len.value();
  return r;
}

TermResult EvaluateTerm(const ObjectiveSpec& spec, const VarGrid& g) {
  TermResult r;
  switch (spec.kind) {
    case ObjectiveKind::kHandToHead: {
      const int begin = spec.window_begin >= 0 ? spec.window_begin : g.frames / 3;
      const int end = spec.window_end >= 0 ? spec.window_end : (2 * g.frames) / 3;
      Require(begin >= 0 && end <= g.frames && end > begin, "hand-to-head window outside the horizon");
      Var sum = 0.0;
      for (int n = begin; n < end; ++n) {
        sum += Distance(JointAt(g, n, static_cast<int>(Keyjoint::kRightHand)), JointAt(g, n, static_cast<int>(Keyjoint::kHead)));
      }
      r.value = sum / static_cast<double>(end - begin);
      return r;
    }
    case ObjectiveKind::kNarrowCorridor: {
      Var sum = 0.0;
      for (int n = 0; n < g.frames; ++n) {
        for (int j = 0; j < kKeyjointCount; ++j) {
          const Var lateral = g.at(n, KeyjointColumn(j) + spec.corridor_axis) - spec.corridor_center;
          sum += ad::Square(ad::Hinge(ad::abs(lateral) - 0.5 * spec.corridor_width));
        }
      }
      r.value = sum / static_cast<double>(g.frames * kKeyjointCount);
      return r;
    }
    case ObjectiveKind::kTimeAgnostic: return AlignmentTerm(g, spec.path, spec.length_weight, nullptr);
    case ObjectiveKind::kComposite: {
      Var sum = 0.0;
      for (size_t i = 0; i < spec.terms.size(); ++i) {
        const TermResult t = EvaluateTerm(spec.terms[i], g);
        sum += spec.weights[i] * t.value;
        r.geometric += t.geometric;
        r.length += t.length;
      }
      r.value = sum;
      return r;
    }
  }
  throw std::invalid_argument("unknown objective kind");
}

VarGrid MakeGrid(ad::Tape& tape, const Matrix& keyjoints) {
  Require(keyjoints.cols() == kKeyjointDim && keyjoints.rows() >= 2, "objective input must be N x 19 with N >= 2");
  Require(keyjoints.allFinite(), "objective input must be finite");
  VarGrid g;
  g.frames = static_cast<int>(keyjoints.rows());
  g.vars.reserve(static_cast<size_t>(keyjoints.size()));
  for (Eigen::Index i = 0; i < keyjoints.size(); ++i) g.vars.push_back(Var::Variable(tape, keyjoints.data()[i]));
  return g;
}

Matrix GradientMatrix(const Var& value, const VarGrid& g) {
  const Vector flat = ad::Gradient(value, g.vars);
  Matrix out(g.frames, kKeyjointDim);
  for (Eigen::Index i = 0; i < flat.size(); ++i) out.data()[i] = flat(i);
  return out;
}

}  // namespace

AlignmentValue AlignmentLoss(const Matrix& keyjoints, const TargetPath& path, double length_weight) {
  Require(length_weight >= 0.0, "length weight must be >= 0");
  ad::Tape tape;
  const VarGrid g = MakeGrid(tape, keyjoints);
  AlignmentValue out;
  const TermResult r = AlignmentTerm(g, path, length_weight, &out.degenerate);
  out.loss = r.value.value();
  out.geometric = r.geometric;
  out.length = r.length;
  out.gradient = GradientMatrix(r.value, g);
  return out;
}

ObjectiveValue EvaluateObjective(const ObjectiveSpec& spec, const Matrix& keyjoints) {
  spec.Validate();
  ad::Tape tape;
  const VarGrid g = MakeGrid(tape, keyjoints);
  const TermResult r = EvaluateTerm(spec, g);
  ObjectiveValue out;
  out.value = r.value.value();
  out.gradient = GradientMatrix(r.value, g);
  out.geometric_term = r.geometric;
  out.length_term = r.length;
  return out;
}

LatentResult OptimizeLatent(const StageModel& model, const ObjectiveSpec& spec, const LatentOptions& options) {
  if (model.stage != StageKind::kKeyjoint) throw std::invalid_argument("optimize_latent needs a keyjoint-stage model");
  spec.Validate();
  Require(options.iterations >= 0, "iterations must be >= 0");
  Require(options.regularizer_weight >= 0.0, "regularizer weight must be >= 0");
  const NoiseSchedule schedule = model.BuildNoiseSchedule();
  const DifferentiablePredictor predict = MakeDifferentiablePredictor(
      model.model, StageKind::kKeyjoint, options.label, options.guidance_weight, options.body_scale);
  const Vector& std_dev = model.stats.std;

  LatentResult result;
  Matrix z = InitialNoise(options.frames, kKeyjointDim, options.seed);
  result.initial_latent = z;
  OptimizerState opt = OptimizerState::For(z.size(), AdamConfig{options.learning_rate, 0.9, 0.999, 1e-8});
  const double dim = static_cast<double>(z.size());
  for (int it = 0; it <= options.iterations; ++it) {
    const DdimChain chain(predict, z, schedule, options.ddim_steps);
    const Matrix c = model.stats.Destandardize(chain.output());
    const ObjectiveValue obj = EvaluateObjective(spec, c);
    const double norm_gap = z.squaredNorm() / dim - 1.0;
    const double reg = options.regularizer_weight * norm_gap * norm_gap;
    const double loss = obj.value + reg;
    result.trace.push_back({it, loss, obj.value, reg, obj.geometric_term, obj.length_term});
    if (it == 0 || loss < result.best_loss) {
      result.best_loss = loss;
      result.best_iteration = it;
      result.best = KeyjointTrajectory{c, CoordinateMode::kGlobal};
      result.best_latent = z;
    }
    if (it == options.iterations) break;
    Matrix d_out = obj.gradient;
    for (Eigen::Index col = 0; col < d_out.cols(); ++col) d_out.col(col) *= std_dev(col);
    Matrix grad = chain.Backward(d_out);
    grad += (options.regularizer_weight * 2.0 * norm_gap * 2.0 / dim) * z;
    if (!grad.allFinite()) {
      result.stopped_early = true;
      result.diagnostic = "non-finite latent gradient at iteration " + std::to_string(it);
      break;
    }
    Vector params = Eigen::Map<const Vector>(z.data(), z.size());
    const Vector g = Eigen::Map<const Vector>(grad.data(), grad.size());
    AdamStep(opt, params, g);
    z = Eigen::Map<const Matrix>(params.data(), z.rows(), z.cols());
  }
  return result;
}

void WriteLatentTrace(std::ostream& out, const std::vector<LatentTraceEntry>& trace) {
  out << "iteration,loss,geometric_term,length_term\n" << std::setprecision(12);
  for (const auto& e : trace) out << e.iteration << ',' << e.loss << ',' << e.geometric_term << ',' << e.length_term << '\n';
}

ExplicitControl ExplicitPathControl(const TargetPath& path, int frames) {
  path.Validate(frames);
  const Matrix pts = ResamplePath(path.points, path.segment_frames());
  ExplicitControl c = ExplicitControl::Empty(frames);
  const int col = KeyjointColumn(path.keyjoint);
  for (int k = 0; k < path.segment_frames(); ++k) {
    c.values.block(path.t0 + k, col, 1, 3) = pts.row(k);
    c.mask.block(path.t0 + k, col, 1, 3).setOnes();
  }
  return c;
}

}  // namespace keymotion
