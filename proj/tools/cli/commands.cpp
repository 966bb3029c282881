#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "cli/config.hpp"
#include "cli/evaluation.hpp"
#include "cli/svg.hpp"
#include "keymotion/checkpoint.hpp"
#include "keymotion/dataset.hpp"
#include "keymotion/fullbody_stage.hpp"
#include "keymotion/implicit.hpp"
#include "keymotion/keyjoint_stage.hpp"
#include "keymotion/metrics.hpp"
#include "keymotion/synthetic.hpp"

namespace keymotion::cli {

namespace {

namespace fs = std::filesystem;

// Timestamped lines go to run.log only, so every other artifact is reproducible.
class RunLog {
 public:
  RunLog(const fs::path& path, std::ostream& echo) : file_(path, std::ios::app), echo_(echo) {
    if (!file_) throw IoError("cannot open " + path.string());
  }
  void operator()(const std::string& message) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    file_ << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << message << '\n';
    file_.flush();
    echo_ << message << '\n';
  }

 private:
  std::ofstream file_;
  std::ostream& echo_;
};

struct Context {
  const RunConfig& config;
  fs::path dir;
  RunLog& log;
  int jobs = 1;
};

std::ofstream OpenOutput(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

StageModel LoadModel(const RunConfig& c, const std::string& key, StageKind expected) {
  StageModel m = ReadCheckpoint(c.Require(key));
  if (m.stage != expected) {
    throw ConfigError(key + ": " + c.Get(key) + " holds a " +
                      (m.stage == StageKind::kKeyjoint ? "keyjoint" : "full-body") + " model");
  }
  return m;
}

int ParseLabel(const RunConfig& c, const std::vector<std::string>& labels) {
  const std::string& v = c.Get("label");
  if (v == "none" || v.empty()) return kNullLabel;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == v) return static_cast<int>(i);
  }
  const long long i = c.GetInt("label");
  if (i < 0 || i >= static_cast<long long>(labels.size())) {
    throw ConfigError("key 'label': " + v + " is outside the model's " + std::to_string(labels.size()) + " labels");
  }
  return static_cast<int>(i);
}

SamplerSpec ParseSampler(const RunConfig& c) {
  const std::string& v = c.Get("sampler");
  if (v == "ddpm") return SamplerSpec::Ddpm();
  if (v == "ddim") {
    const long long k = c.GetInt("ddim_steps");
    if (k < 2) throw ConfigError("key 'ddim_steps': needs at least 2 steps");
    return SamplerSpec::Ddim(static_cast<int>(k));
  }
  throw ConfigError("key 'sampler': expected ddpm or ddim, got '" + v + "'");
}

SynthesisOptions ParseSynthesis(const RunConfig& c) {
  SynthesisOptions o;
  o.guidance_weight = c.GetDouble("guidance_weight");
  o.sampler = ParseSampler(c);
  o.seed = c.Has("seed") ? c.GetSeed("seed") : 0;
  o.reimpute_x0 = c.GetBool("reimpute_x0");
  return o;
}

int Positive(const RunConfig& c, const std::string& key) {
  const long long v = c.GetInt(key);
  if (v <= 0 || v > 1'000'000'000) throw ConfigError("key '" + key + "': must be positive");
  return static_cast<int>(v);
}

JointSelect ParseJointSelect(const std::string& key, const std::string& v) {
  if (v == "cross") return JointSelect::kCross;
  if (v == "pelvis") return JointSelect::kPelvis;
  if (v == "right_wrist") return JointSelect::kRightWrist;
  throw ConfigError("key '" + key + "': expected cross, pelvis or right_wrist, got '" + v + "'");
}

FrameSelect ParseFrameSelect(const std::string& key, const std::string& v) {
  if (v == "interval") return FrameSelect::kInterval;
  if (v == "probability") return FrameSelect::kProbability;
  throw ConfigError("key '" + key + "': expected interval or probability, got '" + v + "'");
}

void WriteKeyjoints(const fs::path& path, const Matrix& keyjoints_global) {
  ExplicitControl all{keyjoints_global, Matrix::Ones(keyjoints_global.rows(), kKeyjointDim)};
  auto out = OpenOutput(path);
  WriteControlFile(out, all);
}

void WriteMotion(const fs::path& path, const MotionSequence& motion) {
  auto out = OpenOutput(path);
  WriteTrajectoryCsv(out, motion);
}

void WriteReport(const fs::path& path, const MetricsReport& report,
                 const std::vector<std::pair<std::string, double>>& extra = {}) {
  auto out = OpenOutput(path);
  WriteMetricsReport(out, report);
  for (const auto& [k, v] : extra) out << k << " = " << v << '\n';
}

Completion Complete(const StageModel& fullbody, const Matrix& keyjoints_global, SynthesisOptions options) {
  CompletionRequest request;
  request.keyjoints = ToRootRelative({keyjoints_global, CoordinateMode::kGlobal});
  request.options = options;
  request.options.seed = MixSeed(options.seed, 2);
  return CompleteFullbody(fullbody, request);
}

void RunGenData(Context& ctx) {
  const RunConfig& c = ctx.config;
  DatasetSpec spec;
  spec.seed = c.GetSeed("seed");
  spec.walk_count = static_cast<int>(c.GetInt("walk_count"));
  spec.reach_count = static_cast<int>(c.GetInt("reach_count"));
  spec.climb_count = static_cast<int>(c.GetInt("climb_count"));
  spec.sit_count = static_cast<int>(c.GetInt("sit_count"));
  spec.frames = Positive(c, "frames");
  const std::vector<MotionSequence> records = GenerateDataset(spec);
  WriteDataset(ctx.dir / "dataset.kmd", records, DefaultLabelVocabulary());
  if (c.GetBool("export_text")) ExportDatasetText(ctx.dir / "dataset.txt", records);
  ctx.log("wrote " + std::to_string(records.size()) + " records to " + (ctx.dir / "dataset.kmd").string());
}

TrainConfig ParseTrain(const RunConfig& c) {
  TrainConfig t;
  t.steps = Positive(c, "steps");
  t.batch = Positive(c, "batch");
  t.adam.learning_rate = c.GetDouble("learning_rate");
  t.label_dropout = c.GetDouble("label_dropout");
  t.seed = c.GetSeed("seed");
  t.log_every = Positive(c, "log_every");
  return t;
}

ScheduleConfig ParseSchedule(const RunConfig& c) {
  return {Positive(c, "diffusion_steps"), c.GetDouble("beta_start"), c.GetDouble("beta_end")};
}

void FinishTraining(Context& ctx, const StageTraining& trained) {
  WriteCheckpoint(ctx.dir / "model.kmc", trained.model);
  WriteTrainLog(ctx.dir / "loss.csv", trained.result.log);
  std::ostringstream msg;
  msg << "initial loss " << trained.result.initial_loss << ", final smoothed loss "
      << trained.result.final_smoothed_loss << "; checkpoint " << (ctx.dir / "model.kmc").string();
  ctx.log(msg.str());
}

TrainProgress Progress(Context& ctx, int steps) {
  const int every = std::max(1, steps / 20);
  return [&ctx, every](int step, double loss, double smoothed) {
    if ((step + 1) % every != 0) return;
    std::ostringstream msg;
    msg << "step " << step + 1 << " loss " << loss << " smoothed " << smoothed;
    ctx.log(msg.str());
  };
}

void RunTrainKeyjoint(Context& ctx) {
  const RunConfig& c = ctx.config;
  const DatasetFile data = ReadDataset(c.Require("dataset"));
  KeyjointTrainConfig cfg;
  cfg.train = ParseTrain(c);
  cfg.schedule = ParseSchedule(c);
  cfg.width1 = Positive(c, "width1");
  cfg.width2 = Positive(c, "width2");
  cfg.init_seed = c.GetSeed("init_seed");
  cfg.goal_only = c.GetBool("goal_only");
  cfg.masks.cross_weight = c.GetDouble("mask_cross_weight");
  cfg.masks.single_weight = c.GetDouble("mask_single_weight");
  cfg.masks.goal_weight = c.GetDouble("mask_goal_weight");
  cfg.masks.max_interval = Positive(c, "mask_max_interval");
  cfg.masks.min_probability = c.GetDouble("mask_min_probability");
  cfg.masks.keep_ratio = c.GetDouble("mask_keep_ratio");
  FinishTraining(ctx, TrainKeyjointModel(data, cfg, Progress(ctx, cfg.train.steps)));
}

void RunTrainFullbody(Context& ctx) {
  const RunConfig& c = ctx.config;
  const DatasetFile data = ReadDataset(c.Require("dataset"));
  FullbodyTrainConfig cfg;
  cfg.train = ParseTrain(c);
  cfg.schedule = ParseSchedule(c);
  cfg.width1 = Positive(c, "width1");
  cfg.width2 = Positive(c, "width2");
  cfg.init_seed = c.GetSeed("init_seed");
  FinishTraining(ctx, TrainFullbodyModel(data, cfg, Progress(ctx, cfg.train.steps)));
}

void RunSample(Context& ctx) {
  const RunConfig& c = ctx.config;
  const StageModel kj = LoadModel(c, "keyjoint_model", StageKind::kKeyjoint);
  const StageModel fb = LoadModel(c, "fullbody_model", StageKind::kFullbody);
  const int frames = Positive(c, "frames");
  ExplicitControl control;
  std::optional<TargetPath> path;
  if (!c.Get("control").empty()) {
    if (!c.Get("path").empty()) throw ConfigError("keys 'control' and 'path' are mutually exclusive");
    control = ReadControlFile(c.Get("control"), frames);
  } else if (!c.Get("path").empty()) {
    path = ReadTargetPath(c.Get("path"));
    path->Validate(frames);
    control = ExplicitPathControl(*path, frames);
  } else {
    control = ExplicitControl::Empty(frames);
  }
  SynthesisOptions options = ParseSynthesis(c);
  options.label = ParseLabel(c, kj.labels);
  options.body_scale = c.GetDouble("body_scale");
  const PipelineResult result = RunPipeline(kj, fb, control, options);

  WriteKeyjoints(ctx.dir / "keyjoints.csv", result.keyjoints.frames);
  WriteMotion(ctx.dir / "motion.csv", result.completion.motion);
  MetricsReport report;
  report.sample_count = 1;
  if (control.mask.any()) {
    const ControlError err = ComputeControlError(result.completion.motion, control);
    if (err.position_count > 0) report.control_error_m = err.position_m;
    if (err.yaw_count > 0) report.control_yaw_error_rad = err.yaw_rad;
  }
  report.foot_skating_ratio = FootSkatingRatio(result.completion.motion);
  std::vector<std::pair<std::string, double>> extra;
  if (path) {
    const AlignmentValue a = AlignmentLoss(result.keyjoints.frames, *path, 1.0);
    extra = {{"alignment_geometric_m", a.geometric}, {"alignment_length_m", a.length}};
  }
  WriteReport(ctx.dir / "metrics.txt", report, extra);
  ctx.log("sampled " + std::to_string(frames) + " frames");
}

void RunGoal(Context& ctx) {
  const RunConfig& c = ctx.config;
  const StageModel kj = LoadModel(c, "keyjoint_model", StageKind::kKeyjoint);
  const StageModel fb = LoadModel(c, "fullbody_model", StageKind::kFullbody);
  const GoalSpec goal = ReadGoalFile(c.Require("goal"));
  const int frames = Positive(c, "frames");
  const SynthesisOptions options = ParseSynthesis(c);
  const KeyjointTrajectory keyjoints = SynthesizeGoal(kj, goal, options, frames);
  SynthesisOptions stage2 = options;
  stage2.body_scale = goal.body_scale;
  const int label = static_cast<int>(goal.scenario);
  stage2.label = label < static_cast<int>(fb.labels.size()) ? label : kNullLabel;
  const Completion completion = Complete(fb, keyjoints.frames, stage2);

  WriteKeyjoints(ctx.dir / "keyjoints.csv", keyjoints.frames);
  WriteMotion(ctx.dir / "motion.csv", completion.motion);
  MetricsReport report;
  report.sample_count = 1;
  const auto [to_goal, to_start] = GoalDistances(completion.motion, goal);
  report.dist_to_goal_m = to_goal;
  report.dist_to_start_m = to_start;
  report.foot_skating_ratio = FootSkatingRatio(completion.motion);
  WriteReport(ctx.dir / "metrics.txt", report);
  ctx.log("goal distances: goal " + std::to_string(to_goal) + " m, start " + std::to_string(to_start) + " m");
}

ObjectiveSpec ParseObjectiveTerm(const RunConfig& c, const std::string& kind, int frames) {
  ObjectiveSpec s;
  s.window_begin = static_cast<int>(c.GetInt("window_begin"));
  s.window_end = static_cast<int>(c.GetInt("window_end"));
  s.corridor_width = c.GetDouble("corridor_width");
  s.corridor_axis = static_cast<int>(c.GetInt("corridor_axis"));
  s.corridor_center = c.GetDouble("corridor_center");
  s.length_weight = c.GetDouble("length_weight");
  if (kind == "hand_to_head") {
    s.kind = ObjectiveKind::kHandToHead;
  } else if (kind == "narrow_corridor") {
    s.kind = ObjectiveKind::kNarrowCorridor;
  } else if (kind == "time_agnostic") {
    s.kind = ObjectiveKind::kTimeAgnostic;
    s.path = ReadTargetPath(c.Require("path"));
    s.path.Validate(frames);
  } else {
    throw ConfigError("key 'objective': unknown objective '" + kind +
                      "' (hand_to_head, narrow_corridor, time_agnostic, or a '+'-joined combination)");
  }
  return s;
}

ObjectiveSpec ParseObjective(const RunConfig& c, int frames) {
  const std::string& v = c.Get("objective");
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, '+')) parts.push_back(part);
  if (parts.size() == 1) return ParseObjectiveTerm(c, parts[0], frames);
  ObjectiveSpec composite;
  composite.kind = ObjectiveKind::kComposite;
  for (const std::string& p : parts) {
    composite.terms.push_back(ParseObjectiveTerm(c, p, frames));
    composite.weights.push_back(1.0);
  }
  return composite;
}

void RunOptimize(Context& ctx) {
  const RunConfig& c = ctx.config;
  const StageModel kj = LoadModel(c, "keyjoint_model", StageKind::kKeyjoint);
  LatentOptions o;
  o.frames = Positive(c, "frames");
  o.label = ParseLabel(c, kj.labels);
  o.guidance_weight = c.GetDouble("guidance_weight");
  o.body_scale = c.GetDouble("body_scale");
  o.iterations = static_cast<int>(c.GetInt("iterations"));
  if (o.iterations < 0) throw ConfigError("key 'iterations': must be non-negative");
  o.learning_rate = c.GetDouble("learning_rate");
  o.ddim_steps = Positive(c, "ddim_steps");
  o.regularizer_weight = c.GetDouble("regularizer_weight");
  o.seed = c.GetSeed("seed");
  const ObjectiveSpec spec = ParseObjective(c, o.frames);
  const LatentResult result = OptimizeLatent(kj, spec, o);
  if (!result.diagnostic.empty()) ctx.log(result.diagnostic);

  WriteKeyjoints(ctx.dir / "keyjoints.csv", result.best.frames);
  {
    auto trace = OpenOutput(ctx.dir / "trace.csv");
    WriteLatentTrace(trace, result.trace);
  }
  const double initial = result.trace.empty() ? 0.0 : result.trace.front().objective;
  const ObjectiveValue best = EvaluateObjective(spec, result.best.frames);
  std::vector<std::pair<std::string, double>> extra = {{"objective_initial", initial},
                                                       {"objective_best", best.value},
                                                       {"best_iteration", result.best_iteration},
                                                       {"best_loss", result.best_loss}};
  if (spec.kind == ObjectiveKind::kTimeAgnostic || spec.kind == ObjectiveKind::kComposite) {
    extra.emplace_back("geometric_term", best.geometric_term);
    extra.emplace_back("length_term", best.length_term);
  }
  MetricsReport report;
  report.sample_count = 1;
  if (!c.Get("fullbody_model").empty()) {
    const StageModel fb = LoadModel(c, "fullbody_model", StageKind::kFullbody);
    SynthesisOptions stage2;
    stage2.label = o.label;
    stage2.guidance_weight = o.guidance_weight;
    stage2.body_scale = o.body_scale;
    stage2.seed = o.seed;
    const Completion completion = Complete(fb, result.best.frames, stage2);
    WriteMotion(ctx.dir / "motion.csv", completion.motion);
    report.foot_skating_ratio = FootSkatingRatio(completion.motion);
  }
  WriteReport(ctx.dir / "metrics.txt", report, extra);
  std::ostringstream msg;
  msg << "objective " << initial << " -> " << best.value << " (best iteration " << result.best_iteration << ")";
  ctx.log(msg.str());
}

struct HeldOut {
  std::vector<MotionSequence> records;
  std::vector<int> ids;
};

HeldOut SelectRecords(const RunConfig& c) {
  const DatasetFile data = ReadDataset(c.Require("dataset"));
  const long long first = c.GetInt("first");
  const int count = Positive(c, "count");
  if (first < 0 || first + count > static_cast<long long>(data.records.size())) {
    throw ConfigError("keys 'first'/'count': records [" + std::to_string(first) + ", " +
                      std::to_string(first + count) + ") exceed the dataset's " +
                      std::to_string(data.records.size()) + " records");
  }
  HeldOut h;
  for (int i = 0; i < count; ++i) {
    h.records.push_back(data.records[static_cast<std::size_t>(first + i)]);
    h.ids.push_back(static_cast<int>(first + i));
  }
  return h;
}

void WriteSamples(const fs::path& path, const std::vector<EvalSample>& samples) {
  auto out = OpenOutput(path);
  out << "record,density,control_error_m,control_yaw_error_rad,foot_skating_ratio\n";
  for (const EvalSample& s : samples) {
    out << s.record << ',' << s.density << ',';
    if (s.scored) out << s.control_error_m << ',' << s.control_yaw_error_rad;
    else out << ',';
    out << ',' << s.foot_skating_ratio << '\n';
  }
}

void RunEval(Context& ctx) {
  const RunConfig& c = ctx.config;
  const StageModel kj = LoadModel(c, "keyjoint_model", StageKind::kKeyjoint);
  const StageModel fb = LoadModel(c, "fullbody_model", StageKind::kFullbody);
  const HeldOut held = SelectRecords(c);
  EvalSettings s;
  s.scheme.joint_select = ParseJointSelect("joint_select", c.Get("joint_select"));
  s.scheme.frame_select = ParseFrameSelect("frame_select", c.Get("frame_select"));
  s.scheme.interval = Positive(c, "interval");
  s.scheme.probability = c.GetDouble("probability");
  s.scheme.keep_ratio = c.GetDouble("keep_ratio");
  s.synthesis = ParseSynthesis(c);
  s.perturb = c.GetDouble("perturb");
  s.seed = c.GetSeed("seed");
  const EvalOutcome outcome = EvaluateExplicitControl(kj, fb, held.records, held.ids, s);
  WriteReport(ctx.dir / "metrics.txt", outcome.report);
  WriteSamples(ctx.dir / "samples.csv", outcome.samples);
  std::ostringstream msg;
  msg << "evaluated " << outcome.samples.size() << " records in " << outcome.seconds << " s";
  ctx.log(msg.str());
}

struct SweepCell {
  std::string joint_select;
  std::string frame_select;
  std::string parameter;
  std::uint64_t seed = 0;
  EvalSettings settings;
};

void RunSweep(Context& ctx) {
  const RunConfig& c = ctx.config;
  const StageModel kj = LoadModel(c, "keyjoint_model", StageKind::kKeyjoint);
  const StageModel fb = LoadModel(c, "fullbody_model", StageKind::kFullbody);
  const HeldOut held = SelectRecords(c);

  std::vector<SweepCell> cells;
  const SynthesisOptions synthesis = ParseSynthesis(c);
  const double perturb = c.GetDouble("perturb");
  const double keep = c.GetDouble("keep_ratio");
  std::vector<std::uint64_t> seeds;
  for (const std::string& s : c.GetList("seeds")) {
    try {
      seeds.push_back(std::stoull(s));
    } catch (const std::logic_error&) {
      throw ConfigError("key 'seeds': not an unsigned integer: '" + s + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("key 'seeds': needs at least one seed");
  for (const std::string& js : c.GetList("joint_selects")) {
    for (const std::string& fsel : c.GetList("frame_selects")) {
      const FrameSelect frame_select = ParseFrameSelect("frame_selects", fsel);
      const std::vector<std::string> params =
          c.GetList(frame_select == FrameSelect::kInterval ? "intervals" : "probabilities");
      for (const std::string& p : params) {
        for (std::uint64_t seed : seeds) {
          SweepCell cell{js, fsel, p, seed, {}};
          cell.settings.scheme.joint_select = ParseJointSelect("joint_selects", js);
          cell.settings.scheme.frame_select = frame_select;
          try {
            if (frame_select == FrameSelect::kInterval) cell.settings.scheme.interval = std::stoi(p);
            else cell.settings.scheme.probability = std::stod(p);
          } catch (const std::logic_error&) {
            throw ConfigError(std::string("key '") +
                              (frame_select == FrameSelect::kInterval ? "intervals" : "probabilities") +
                              "': bad value '" + p + "'");
          }
          cell.settings.scheme.keep_ratio = keep;
          cell.settings.scheme.Validate();
          cell.settings.synthesis = synthesis;
          cell.settings.perturb = perturb;
          cell.settings.seed = seed;
          cells.push_back(std::move(cell));
        }
      }
    }
  }
  if (cells.empty()) throw ConfigError("sweep grid is empty");

  std::vector<EvalOutcome> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = EvaluateExplicitControl(kj, fb, held.records, held.ids, cells[i].settings);
        std::lock_guard lock(mu);
        ctx.log("cell " + std::to_string(i + 1) + "/" + std::to_string(cells.size()) + " done");
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = cells.size();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(ctx.jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  auto out = OpenOutput(ctx.dir / "sweep.csv");
  out << "joint_select,frame_select,parameter,seed,density,control_error_m,control_yaw_error_rad,"
         "foot_skating_ratio,diversity,feature_frechet_proxy,sample_count\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const MetricsReport& r = results[i].report;
    double density = 0.0;
    for (const EvalSample& s : results[i].samples) density += s.density;
    density /= static_cast<double>(results[i].samples.size());
    out << cells[i].joint_select << ',' << cells[i].frame_select << ',' << cells[i].parameter << ','
        << cells[i].seed << ',' << density << ',';
    opt(r.control_error_m);
    out << ',';
    opt(r.control_yaw_error_rad);
    out << ',';
    opt(r.foot_skating_ratio);
    out << ',';
    opt(r.diversity);
    out << ',';
    opt(r.feature_frechet_proxy);
    out << ',' << r.sample_count << '\n';
  }
  ctx.log("wrote " + std::to_string(cells.size()) + " rows to " + (ctx.dir / "sweep.csv").string());
}

void RunPlot(Context& ctx) {
  const RunConfig& c = ctx.config;
  const std::vector<JointTrack> tracks = ReadTracks(c.Require("input"), c.GetList("joints"));
  std::optional<TargetPath> path;
  if (!c.Get("path").empty()) path = ReadTargetPath(c.Get("path"));
  PlotOptions options;
  options.width = Positive(c, "width");
  options.height = Positive(c, "height");
  options.title = c.Get("title");
  const std::string svg = RenderTrajectorySvg(tracks, path ? &*path : nullptr, options);
  auto out = OpenOutput(ctx.dir / "plot.svg");
  out << svg;
  ctx.log("wrote " + (ctx.dir / "plot.svg").string());
}

using Handler = void (*)(Context&);

Handler HandlerFor(const std::string& command) {
  if (command == "gen-data") return RunGenData;
  if (command == "train-keyjoint") return RunTrainKeyjoint;
  if (command == "train-fullbody") return RunTrainFullbody;
  if (command == "sample") return RunSample;
  if (command == "goal") return RunGoal;
  if (command == "optimize") return RunOptimize;
  if (command == "eval") return RunEval;
  if (command == "sweep") return RunSweep;
  if (command == "plot") return RunPlot;
  throw ConfigError("unknown command '" + command + "'");
}

std::string KeyHelp(const RunConfig& defaults) {
  std::string text = "Keys (defaults):\n";
  std::istringstream in(defaults.Resolved());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) text += "  " + line + "\n";
  return text;
}

struct Invocation {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::string> positional;
  std::string run_dir;
  int jobs = 1;
  std::optional<double> perturb;
  bool print_config = false;
};

int Execute(const std::string& command, const Invocation& inv, std::ostream& out, std::ostream& err) {
  RunConfig config = RunConfig::For(command);
  if (!inv.config_file.empty()) config.LoadFile(inv.config_file);
  for (const std::string& s : inv.sets) config.ApplyOverride(s);
  for (const std::string& s : inv.positional) config.ApplyOverride(s);
  if (inv.perturb) {
    std::ostringstream v;
    v << std::setprecision(17) << *inv.perturb;
    config.Set("perturb", v.str(), "--perturb");
  }
  if (inv.jobs < 1) throw ConfigError("--jobs must be at least 1");
  if (inv.print_config) {
    out << config.Resolved();
    return kExitOk;
  }
  const fs::path dir = RunDirectory(config, inv.run_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  {
    auto resolved = OpenOutput(dir / "config.resolved");
    resolved << config.Resolved();
  }
  RunLog log(dir / "run.log", err);
  log("keymotion " + command + " -> " + dir.string());
  Context ctx{config, dir, log, inv.jobs};
  try {
    HandlerFor(command)(ctx);
  } catch (const std::exception& e) {
    log(std::string("failed: ") + e.what());
    throw;
  }
  out << dir.string() << '\n';
  return kExitOk;
}

// Keeps freed heap pages mapped. Denoiser steps allocate and release tens of megabytes each, and
// returning them to the kernel costs a page fault per page on the next step.
void RetainFreedMemory() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 256 << 20);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RetainFreedMemory();
  CLI::App app{"keymotion: two-stage keyjoint-conditioned motion diffusion"};
  app.require_subcommand(1);
  Invocation inv;
  for (const std::string& name : CommandNames()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", inv.config_file, "key = value configuration file");
    sub->add_option("--set", inv.sets, "override key=value (repeatable)");
    sub->add_option("overrides", inv.positional, "overrides as key=value");
    sub->add_option("--run-dir", inv.run_dir, "root of run directories (default $KEYMOTION_RUN_DIR or ./runs)");
    sub->add_flag("--print-config", inv.print_config, "print the resolved configuration and exit");
    if (name == "sweep") sub->add_option("--jobs", inv.jobs, "worker threads");
    if (name == "eval" || name == "sweep") {
      sub->add_option("--perturb", inv.perturb, "uniform noise bound added to control positions, meters");
    }
    sub->footer(KeyHelp(RunConfig::For(name)));
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help("", CLI::AppFormatMode::Normal);
      for (CLI::App* sub : app.get_subcommands()) out << sub->help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return Execute(command, inv, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace keymotion::cli
