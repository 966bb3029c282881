#include "keymotion/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>

namespace keymotion {

namespace {

constexpr int kPelvis = 0, kSpine = 1, kNeck = 2, kHead = 3;
constexpr int kLShoulder = 4, kLElbow = 5, kLHand = 6;
constexpr int kRShoulder = 7, kRElbow = 8, kRHand = 9;
constexpr int kLHip = 10, kLKnee = 11, kLFoot = 12;
constexpr int kRHip = 13, kRKnee = 14, kRFoot = 15;

// Walking gait timing, in frames at 20 fps.
constexpr int kGaitCycle = 20;
constexpr int kSwingFrames = 8;
constexpr int kMidStanceDelay = 6;

double Smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double operator()(const Range& r) {
    if (r.lo == r.hi) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng_);
  }
  int Int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

 private:
  std::mt19937_64 rng_;
};

// Middle joint of a two-bone chain from `a` to `c`, bending toward `pole`.
Vec3 TwoBoneMiddle(const Vec3& a, const Vec3& c, double upper, double lower, const Vec3& pole) {
  const Vec3 ac = c - a;
  const double d = ac.norm();
  if (d < 1e-12) return a + upper * pole.normalized();
  const Vec3 dir = ac / d;
  double along = 0.0;
  double height = 0.0;
  if (d >= upper + lower) {
    along = upper * d / (upper + lower);
  } else {
    along = (upper * upper - lower * lower + d * d) / (2.0 * d);
    height = std::sqrt(std::max(0.0, upper * upper - along * along));
  }
  Vec3 bend = pole - pole.dot(dir) * dir;
  if (bend.norm() < 1e-9) bend = Vec3::UnitY().cross(dir);
  if (bend.norm() < 1e-9) bend = Vec3::UnitX();
  return a + along * dir + height * bend.normalized();
}

// Pose under construction: root in world space plus every joint relative to
// the root in the root's yaw-aligned frame (already body-scaled).
struct FrameBuild {
  Vec3 root = Vec3::Zero();
  double yaw = 0.0;
  std::array<Vec3, kJointCount> rel{};
};

class PoseBuilder {
 public:
  PoseBuilder(double scale) : scale_(scale), skeleton_(StandardSkeleton()) {
    const auto acc = skeleton_.RestAccumulated();
    for (int j = 0; j < kJointCount; ++j) rest_[j] = scale * acc[j];
  }

  const Vec3& rest(int j) const { return rest_[j]; }
  double scale() const { return scale_; }
  double pelvis_height() const { return scale_ * skeleton_.RestPelvisHeight(); }

  FrameBuild Rest(const Vec3& root, double yaw) const {
    FrameBuild f;
    f.root = root;
    f.yaw = yaw;
    f.rel = rest_;
    return f;
  }

  Vec3 ToRelative(const FrameBuild& f, const Vec3& world) const {
    return YawRotation(f.yaw).transpose() * (world - f.root);
  }
  Vec3 ToWorld(const FrameBuild& f, const Vec3& rel) const { return f.root + YawRotation(f.yaw) * rel; }

  // Places elbows and knees from the current shoulder/hand and hip/foot.
  void SolveLimbs(FrameBuild& f) const {
    const double upper_arm = 0.28 * scale_, forearm = 0.26 * scale_, thigh = 0.45 * scale_, shin = 0.45 * scale_;
    f.rel[kLElbow] = TwoBoneMiddle(f.rel[kLShoulder], f.rel[kLHand], upper_arm, forearm, Vec3(0.4, -0.3, -1.0));
    f.rel[kRElbow] = TwoBoneMiddle(f.rel[kRShoulder], f.rel[kRHand], upper_arm, forearm, Vec3(-0.4, -0.3, -1.0));
    f.rel[kLKnee] = TwoBoneMiddle(f.rel[kLHip], f.rel[kLFoot], thigh, shin, Vec3(0.1, 0.0, 1.0));
    f.rel[kRKnee] = TwoBoneMiddle(f.rel[kRHip], f.rel[kRFoot], thigh, shin, Vec3(-0.1, 0.0, 1.0));
  }

  PoseFrame ToPose(const FrameBuild& f) const {
    PoseFrame p;
    p.root_position = f.root;
    p.root_yaw = WrapAngle(f.yaw);
    p.local_offsets.resize(kJointCount - 1);
    for (int j = 1; j < kJointCount; ++j) {
      const int parent = skeleton_.parent[j];
      const Vec3 parent_rel = parent == kPelvis ? Vec3::Zero() : f.rel[parent];
      p.local_offsets[j - 1] = (f.rel[j] - parent_rel) / scale_;
    }
    return p;
  }

 private:
  double scale_;
  const Skeleton& skeleton_;
  std::array<Vec3, kJointCount> rest_{};
};

Vec3 ArmHang(const Vec3& shoulder, double arm_length, double forward) {
  const double s = std::clamp(forward / arm_length, -0.95, 0.95);
  const double angle = std::asin(s);
  // Slightly shorter than the straight arm so the elbow bends.
  const double reach = 0.96 * arm_length;
  return shoulder + Vec3(0.0, -reach * std::cos(angle), reach * std::sin(angle));
}

MotionSequence NewSequence(ScenarioKind kind, double scale, int frames) {
  MotionSequence seq;
  seq.action_label = static_cast<int>(kind);
  seq.body_scale = scale;
  seq.frames.reserve(static_cast<size_t>(frames));
  return seq;
}

GeneratedMotion GenerateWalk(const ScenarioSpec& spec, Sampler& sample) {
  const double scale = sample(spec.body_scale);
  const double speed = sample(spec.speed);
  const double turn = sample(spec.turn_rate);
  const double swing = sample(spec.arm_swing);
  const double x0 = sample(spec.start_xz);
  const double z0 = sample(spec.start_xz);
  const double yaw0 = sample(spec.start_yaw);
  const double stance_width = 0.1 * scale;
  const double step_height = 0.12 * scale;
  const double arm_length = 0.54 * scale;

  PoseBuilder builder(scale);
  const double fps = kFps;
  auto heading = [&](double t) { return yaw0 + turn * t; };
  auto path = [&](double t) -> Vec3 {
    if (std::abs(turn) < 1e-9) {
      return Vec3(x0 + speed * t * std::sin(yaw0), 0.0, z0 + speed * t * std::cos(yaw0));
    }
    const double g = heading(t);
    return Vec3(x0 + speed / turn * (std::cos(yaw0) - std::cos(g)), 0.0,
                z0 + speed / turn * (std::sin(g) - std::sin(yaw0)));
  };
  // Foot k-th landing point: under the hip at mid-stance.
  auto plant = [&](int side, int phase, long cycle) -> Vec3 {
    const double t_mid = static_cast<double>(cycle * kGaitCycle + phase + kSwingFrames + kMidStanceDelay) / fps;
    const double lateral = side == 0 ? stance_width : -stance_width;
    Vec3 p = path(t_mid) + YawRotation(heading(t_mid)) * Vec3(lateral, 0.0, 0.0);
    p.y() = 0.0;
    return p;
  };
  auto foot_world = [&](int side, int n) -> Vec3 {
    const int phase = side == 0 ? 0 : kGaitCycle / 2;
    const long m = n - phase;
    const long cycle = static_cast<long>(std::floor(static_cast<double>(m) / kGaitCycle));
    const long j = m - cycle * kGaitCycle;
    if (j >= kSwingFrames) return plant(side, phase, cycle);
    const double u = static_cast<double>(j + 1) / (kSwingFrames + 1);
    // Horizontal travel happens only once the foot has cleared the contact height.
    const double progress = Smoothstep((u - 0.2) / 0.6);
    const Vec3 from = plant(side, phase, cycle - 1);
    const Vec3 to = plant(side, phase, cycle);
    Vec3 p = from + progress * (to - from);
    p.y() = step_height * std::sin(std::numbers::pi * u);
    return p;
  };

  GeneratedMotion out{NewSequence(ScenarioKind::kWalkTurn, scale, spec.frames), {}};
  const double lean = 0.03 * speed * scale;
  for (int n = 0; n < spec.frames; ++n) {
    const double t = n / fps;
    Vec3 root = path(t);
    root.y() = builder.pelvis_height() * (1.0 - 0.01 * (1.0 - std::cos(4.0 * std::numbers::pi * t)));
    FrameBuild f = builder.Rest(root, heading(t));
    for (int j : {kSpine, kNeck, kHead, kLShoulder, kRShoulder}) {
      f.rel[j].z() += lean * f.rel[j].y() / (0.65 * scale);
    }
    f.rel[kLFoot] = builder.ToRelative(f, foot_world(0, n));
    f.rel[kRFoot] = builder.ToRelative(f, foot_world(1, n));
    // Arms swing against the legs: the left arm leads when the right foot swings.
    const double arm_phase = 2.0 * std::numbers::pi * (static_cast<double>(n) / kGaitCycle);
    f.rel[kLHand] = ArmHang(f.rel[kLShoulder], arm_length, -swing * std::sin(arm_phase));
    f.rel[kRHand] = ArmHang(f.rel[kRShoulder], arm_length, swing * std::sin(arm_phase));
    builder.SolveLimbs(f);
    out.motion.frames.push_back(builder.ToPose(f));
  }
  return out;
}

GeneratedMotion GenerateReach(const ScenarioSpec& spec, Sampler& sample) {
  const double scale = sample(spec.body_scale);
  PoseBuilder builder(scale);
  const Vec3 start(sample(spec.start_xz), builder.pelvis_height(), sample(spec.start_xz));
  const double yaw = sample(spec.start_yaw);
  const double shift = sample(Range{0.0, 0.2}) * scale;
  const double dip = sample(Range{0.0, 0.06}) * scale;
  const int last = spec.frames - 1;
  const int n_start = sample.Int(0, std::max(0, last / 7));
  const int n_arrive = sample.Int(std::max(n_start + 1, last / 3), std::max(n_start + 1, (5 * last) / 6));

  Vec3 offset;
  do {
    offset = Vec3(sample(spec.reach_lateral), sample(spec.reach_height), sample(spec.reach_forward)) * scale;
  } while (offset.norm() > 0.52 * scale || offset.norm() < 0.12 * scale);

  const Eigen::Matrix3d rot = YawRotation(yaw);
  const Vec3 root_final = start + rot * Vec3(0.0, -dip, shift);
  const Vec3 goal = root_final + rot * (builder.rest(kRShoulder) + offset);

  FrameBuild initial = builder.Rest(start, yaw);
  const Vec3 left_foot = builder.ToWorld(initial, builder.rest(kLFoot));
  const Vec3 right_foot = builder.ToWorld(initial, builder.rest(kRFoot));

  GeneratedMotion out{NewSequence(ScenarioKind::kReach, scale, spec.frames),
                      {GoalTarget{static_cast<int>(Keyjoint::kRightHand), goal}}};
  for (int n = 0; n < spec.frames; ++n) {
    const double p = Smoothstep(static_cast<double>(n - n_start) / (n_arrive - n_start));
    FrameBuild f = builder.Rest(start + p * (root_final - start), yaw);
    f.rel[kLFoot] = builder.ToRelative(f, left_foot);
    f.rel[kRFoot] = builder.ToRelative(f, right_foot);
    const Vec3 target = builder.ToRelative(f, goal);
    f.rel[kRHand] = p >= 1.0 ? target : Vec3(builder.rest(kRHand) + p * (target - builder.rest(kRHand)));
    builder.SolveLimbs(f);
    out.motion.frames.push_back(builder.ToPose(f));
  }
  return out;
}

// Moves a foot from `from` to `to` (world space) with a lifted arc.
Vec3 LiftedFoot(const Vec3& from, const Vec3& to, double u, double lift) {
  u = std::clamp(u, 0.0, 1.0);
  if (u >= 1.0) return to;
  const double progress = Smoothstep((u - 0.2) / 0.6);
  Vec3 p = from + progress * (to - from);
  p.y() = from.y() + Smoothstep(u) * (to.y() - from.y()) + lift * std::sin(std::numbers::pi * u);
  return p;
}

double Window(int n, int begin, int end) {
  if (end <= begin) return n >= end ? 1.0 : 0.0;
  return std::clamp(static_cast<double>(n - begin) / (end - begin), 0.0, 1.0);
}

GeneratedMotion GenerateClimb(const ScenarioSpec& spec, Sampler& sample) {
  const double scale = sample(spec.body_scale);
  PoseBuilder builder(scale);
  const Vec3 start(sample(spec.start_xz), builder.pelvis_height(), sample(spec.start_xz));
  const double yaw = sample(spec.start_yaw);
  const Eigen::Matrix3d rot = YawRotation(yaw);
  const double wall = sample(spec.climb_wall_distance) * scale;
  const double foot_height[2] = {sample(spec.climb_foot_height) * scale, sample(spec.climb_foot_height) * scale};
  const double rise = std::max(0.0, 0.5 * (foot_height[0] + foot_height[1]) - 0.1 * scale);
  const Vec3 root_final = start + rot * Vec3(0.0, rise, wall - 0.3 * scale);

  Vec3 hand_hold[2];
  for (int side = 0; side < 2; ++side) {
    const Vec3 shoulder = builder.rest(side == 0 ? kLShoulder : kRShoulder);
    const Vec3 offset(sample(Range{-0.1, 0.1}) * scale, sample(spec.climb_hand_height) * scale, 0.25 * scale);
    hand_hold[side] = root_final + rot * (shoulder + offset);
  }
  FrameBuild initial = builder.Rest(start, yaw);
  Vec3 foot_start[2], foot_hold[2];
  for (int side = 0; side < 2; ++side) {
    foot_start[side] = builder.ToWorld(initial, builder.rest(side == 0 ? kLFoot : kRFoot));
    const double lateral = (0.1 + sample(Range{0.0, 0.1})) * scale * (side == 0 ? 1.0 : -1.0);
    Vec3 ground = start + rot * Vec3(lateral, 0.0, wall - 0.1 * scale);
    ground.y() = foot_height[side];
    foot_hold[side] = ground;
  }

  const int last = spec.frames - 1;
  // Staggered limb schedules: right hand, left hand, right foot, left foot.
  const int jitter = std::max(1, last / 15);
  const int rh_begin = sample.Int(0, jitter), rh_end = last / 2 + sample.Int(0, jitter);
  const int lh_begin = last / 6 + sample.Int(0, jitter), lh_end = (2 * last) / 3 + sample.Int(0, jitter);
  const int rf_begin = last / 3 + sample.Int(0, jitter), rf_end = (5 * last) / 6 + sample.Int(0, jitter);
  const int lf_begin = last / 2 + sample.Int(0, jitter), lf_end = last;
  const int root_begin = sample.Int(0, jitter);

  GeneratedMotion out{NewSequence(ScenarioKind::kClimb, scale, spec.frames),
                      {GoalTarget{static_cast<int>(Keyjoint::kLeftHand), hand_hold[0]},
                       GoalTarget{static_cast<int>(Keyjoint::kRightHand), hand_hold[1]},
                       GoalTarget{static_cast<int>(Keyjoint::kLeftFoot), foot_hold[0]},
                       GoalTarget{static_cast<int>(Keyjoint::kRightFoot), foot_hold[1]}}};
  for (int n = 0; n < spec.frames; ++n) {
    const double p_root = Smoothstep(Window(n, root_begin, last));
    FrameBuild f = builder.Rest(start + p_root * (root_final - start), yaw);
    const double p_lh = Smoothstep(Window(n, lh_begin, lh_end));
    const double p_rh = Smoothstep(Window(n, rh_begin, rh_end));
    const Vec3 lh_target = builder.ToRelative(f, hand_hold[0]);
    const Vec3 rh_target = builder.ToRelative(f, hand_hold[1]);
    f.rel[kLHand] = p_lh >= 1.0 ? lh_target : Vec3(builder.rest(kLHand) + p_lh * (lh_target - builder.rest(kLHand)));
    f.rel[kRHand] = p_rh >= 1.0 ? rh_target : Vec3(builder.rest(kRHand) + p_rh * (rh_target - builder.rest(kRHand)));
    f.rel[kLFoot] = builder.ToRelative(f, LiftedFoot(foot_start[0], foot_hold[0], Window(n, lf_begin, lf_end), 0.1 * scale));
    f.rel[kRFoot] = builder.ToRelative(f, LiftedFoot(foot_start[1], foot_hold[1], Window(n, rf_begin, rf_end), 0.1 * scale));
    builder.SolveLimbs(f);
    out.motion.frames.push_back(builder.ToPose(f));
  }
  return out;
}

GeneratedMotion GenerateSit(const ScenarioSpec& spec, Sampler& sample) {
  const double scale = sample(spec.body_scale);
  PoseBuilder builder(scale);
  const Vec3 start(sample(spec.start_xz), builder.pelvis_height(), sample(spec.start_xz));
  const double yaw = sample(spec.start_yaw);
  const Eigen::Matrix3d rot = YawRotation(yaw);
  const double seat = sample(spec.sit_seat_height) * scale;
  const double back = sample(spec.sit_backward) * scale;
  Vec3 root_final = start + rot * Vec3(0.0, 0.0, -back);
  root_final.y() = seat;

  Vec3 armrest[2];
  for (int side = 0; side < 2; ++side) {
    const double lateral = sample(Range{0.22, 0.32}) * scale * (side == 0 ? 1.0 : -1.0);
    Vec3 p = start + rot * Vec3(lateral, 0.0, -back + sample(Range{0.0, 0.2}) * scale);
    p.y() = sample(spec.sit_armrest_height) * scale;
    armrest[side] = p;
  }
  FrameBuild initial = builder.Rest(start, yaw);
  const Vec3 left_foot = builder.ToWorld(initial, builder.rest(kLFoot));
  const Vec3 right_foot = builder.ToWorld(initial, builder.rest(kRFoot));

  const int last = spec.frames - 1;
  const int jitter = std::max(1, last / 10);
  const int root_begin = sample.Int(0, jitter);
  const int root_end = last - sample.Int(0, jitter);
  const int hand_begin[2] = {sample.Int(0, 2 * jitter), sample.Int(0, 2 * jitter)};
  const int hand_end[2] = {last - sample.Int(0, jitter), last - sample.Int(0, jitter)};

  GeneratedMotion out{NewSequence(ScenarioKind::kSit, scale, spec.frames),
                      {GoalTarget{static_cast<int>(Keyjoint::kLeftHand), armrest[0]},
                       GoalTarget{static_cast<int>(Keyjoint::kRightHand), armrest[1]}}};
  for (int n = 0; n < spec.frames; ++n) {
    const double p_root = Smoothstep(Window(n, root_begin, root_end));
    FrameBuild f = builder.Rest(start + p_root * (root_final - start), yaw);
    // Lean the torso forward while lowering.
    const double lean = 0.12 * scale * std::sin(std::numbers::pi * p_root);
    for (int j : {kSpine, kNeck, kHead, kLShoulder, kRShoulder}) f.rel[j].z() += lean * f.rel[j].y() / (0.65 * scale);
    f.rel[kLFoot] = builder.ToRelative(f, left_foot);
    f.rel[kRFoot] = builder.ToRelative(f, right_foot);
    for (int side = 0; side < 2; ++side) {
      const int hand = side == 0 ? kLHand : kRHand;
      const double p = Smoothstep(Window(n, hand_begin[side], hand_end[side]));
      const Vec3 target = builder.ToRelative(f, armrest[side]);
      f.rel[hand] = p >= 1.0 ? target : Vec3(builder.rest(hand) + p * (target - builder.rest(hand)));
    }
    builder.SolveLimbs(f);
    out.motion.frames.push_back(builder.ToPose(f));
  }
  return out;
}

}  // namespace

std::string_view ScenarioName(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kWalkTurn: return "walk_turn";
    case ScenarioKind::kReach: return "reach";
    case ScenarioKind::kClimb: return "climb";
    case ScenarioKind::kSit: return "sit";
  }
  throw std::invalid_argument("invalid scenario kind");
}

ScenarioKind ScenarioFromName(std::string_view name) {
  for (int k = 0; k < kScenarioCount; ++k) {
    if (ScenarioName(static_cast<ScenarioKind>(k)) == name) return static_cast<ScenarioKind>(k);
  }
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (int k = 0; k < kScenarioCount; ++k) {
    if (ScenarioName(static_cast<ScenarioKind>(k)) == lower) return static_cast<ScenarioKind>(k);
  }
  throw ConfigError("unknown scenario kind '" + std::string(name) + "'");
}

std::vector<std::string> DefaultLabelVocabulary() {
  std::vector<std::string> vocab;
  for (int k = 0; k < kScenarioCount; ++k) vocab.emplace_back(ScenarioName(static_cast<ScenarioKind>(k)));
  return vocab;
}

std::vector<int> GoalKeyjoints(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kReach: return {static_cast<int>(Keyjoint::kRightHand)};
    case ScenarioKind::kClimb:
      return {static_cast<int>(Keyjoint::kLeftHand), static_cast<int>(Keyjoint::kRightHand),
              static_cast<int>(Keyjoint::kLeftFoot), static_cast<int>(Keyjoint::kRightFoot)};
    case ScenarioKind::kSit:
      return {static_cast<int>(Keyjoint::kLeftHand), static_cast<int>(Keyjoint::kRightHand)};
    case ScenarioKind::kWalkTurn: break;
  }
  throw std::invalid_argument("scenario has no goal keyjoints");
}

void ScenarioSpec::Validate() const {
  for (const Range* r : {&speed, &turn_rate, &arm_swing, &body_scale, &start_xz, &start_yaw, &reach_forward,
                         &reach_lateral, &reach_height, &climb_wall_distance, &climb_hand_height,
                         &climb_foot_height, &sit_seat_height, &sit_backward, &sit_armrest_height}) {
    Require(r->valid(), "scenario range is empty");
  }
  Require(frames >= 20, "scenario needs at least 20 frames");
  Require(body_scale.lo >= 0.5 && body_scale.hi <= 1.5, "body_scale range must lie in [0.5, 1.5]");
  const int k = static_cast<int>(kind);
  if (k < 0 || k >= kScenarioCount) throw std::invalid_argument("invalid scenario kind");
}

GeneratedMotion GenerateMotion(const ScenarioSpec& spec) {
  spec.Validate();
  Sampler sample(MixSeed(spec.seed, 0));
  switch (spec.kind) {
    case ScenarioKind::kWalkTurn: return GenerateWalk(spec, sample);
    case ScenarioKind::kReach: return GenerateReach(spec, sample);
    case ScenarioKind::kClimb: return GenerateClimb(spec, sample);
    case ScenarioKind::kSit: return GenerateSit(spec, sample);
  }
  throw std::invalid_argument("invalid scenario kind");
}

std::vector<MotionSequence> GenerateDataset(const DatasetSpec& spec) {
  Require(spec.walk_count >= 0 && spec.reach_count >= 0 && spec.climb_count >= 0 && spec.sit_count >= 0,
          "dataset counts must be non-negative");
  std::vector<MotionSequence> records;
  records.reserve(static_cast<size_t>(spec.walk_count + spec.reach_count + spec.climb_count + spec.sit_count));
  std::uint64_t index = 0;
  auto emit = [&](ScenarioKind kind, int count) {
    for (int i = 0; i < count; ++i, ++index) {
      ScenarioSpec s;
      s.kind = kind;
      s.frames = spec.frames;
      s.seed = MixSeed(spec.seed, index);
      records.push_back(GenerateMotion(s).motion);
    }
  };
  emit(ScenarioKind::kWalkTurn, spec.walk_count);
  emit(ScenarioKind::kReach, spec.reach_count);
  emit(ScenarioKind::kClimb, spec.climb_count);
  emit(ScenarioKind::kSit, spec.sit_count);
  return records;
}

}  // namespace keymotion
