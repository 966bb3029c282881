#include "keymotion/control.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "text_util.hpp"

namespace keymotion {

void ExplicitControl::Validate() const {
  Require(values.rows() == mask.rows() && values.cols() == kKeyjointDim && mask.cols() == kKeyjointDim,
          "control must be N x 19 values and mask");
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double m = mask.data()[i];
    Require(m == 0.0 || m == 1.0, "control mask must be binary");
    if (m == 1.0) Require(std::isfinite(values.data()[i]), "masked control values must be finite");
  }
}

ExplicitControl ExplicitControl::Empty(int frames) {
  return {Matrix::Zero(frames, kKeyjointDim), Matrix::Zero(frames, kKeyjointDim)};
}

void MaskScheme::Validate() const {
  Require(interval >= 1, "mask interval must be >= 1");
  Require(probability > 0.0 && probability <= 1.0, "mask probability must be in (0, 1]");
  Require(keep_ratio > 0.0 && keep_ratio <= 1.0, "keep_ratio must be in (0, 1]");
  if (joint_select == JointSelect::kGoal) {
    Require(!goal_joints.empty(), "GOAL mask needs at least one goal joint");
    for (int j : goal_joints) Require(j >= 0 && j < kKeyjointCount, "goal joint out of range");
  }
}

namespace {

void SetJoint(Matrix& mask, int frame, int joint) {
  mask.block(frame, KeyjointColumn(joint), 1, 3).setOnes();
  if (joint == static_cast<int>(Keyjoint::kPelvis)) mask(frame, kYawColumn) = 1.0;
}

}  // namespace

Matrix SampleControlMask(const MaskScheme& scheme, int frames, std::mt19937_64& rng) {
  scheme.Validate();
  Require(frames >= 1, "mask needs at least one frame");
  Matrix mask = Matrix::Zero(frames, kKeyjointDim);
  if (scheme.joint_select == JointSelect::kGoal) {
    mask.row(0).setOnes();
    for (int j : scheme.goal_joints) mask.block(frames - 1, KeyjointColumn(j), 1, 3).setOnes();
    return mask;
  }
  if (scheme.frame_select == FrameSelect::kInterval && scheme.interval > frames) {
    throw std::invalid_argument("mask interval " + std::to_string(scheme.interval) + " exceeds the horizon " +
                                std::to_string(frames));
  }
  std::bernoulli_distribution frame_pick(scheme.probability);
  std::bernoulli_distribution keep(scheme.keep_ratio);
  std::uniform_int_distribution<int> any_joint(0, kKeyjointCount - 1);
  for (int n = 0; n < frames; ++n) {
    const bool selected =
        scheme.frame_select == FrameSelect::kInterval ? n % scheme.interval == 0 : frame_pick(rng);
    if (!selected) continue;
    switch (scheme.joint_select) {
      case JointSelect::kPelvis: SetJoint(mask, n, static_cast<int>(Keyjoint::kPelvis)); break;
      case JointSelect::kRightWrist: SetJoint(mask, n, static_cast<int>(Keyjoint::kRightHand)); break;
      case JointSelect::kCross: {
        bool any = false;
        for (int j = 0; j < kKeyjointCount; ++j) {
          if (keep(rng)) {
            SetJoint(mask, n, j);
            any = true;
          }
        }
        if (!any) SetJoint(mask, n, any_joint(rng));
        break;
      }
      case JointSelect::kGoal: break;
    }
  }
  return mask;
}

Matrix SampleControlMask(const MaskScheme& scheme, int frames) {
  std::mt19937_64 rng(MixSeed(scheme.seed, 0x3a5c));
  return SampleControlMask(scheme, frames, rng);
}

double ExpectedPositionDensity(const MaskScheme& scheme, int frames) {
  scheme.Validate();
  if (scheme.joint_select == JointSelect::kGoal) {
    return (18.0 + 3.0 * static_cast<double>(scheme.goal_joints.size())) / (18.0 * frames);
  }
  const double frame_fraction =
      scheme.frame_select == FrameSelect::kInterval
          ? static_cast<double>((frames + scheme.interval - 1) / scheme.interval) / frames
          : scheme.probability;
  if (scheme.joint_select != JointSelect::kCross) return frame_fraction / kKeyjointCount;
  const double k = scheme.keep_ratio;
  const double expected_joints = kKeyjointCount * k + std::pow(1.0 - k, kKeyjointCount);
  return frame_fraction * expected_joints / kKeyjointCount;
}

double ControlSignalDensity(double frame_fraction, int controlled_joints, int total_joints, double keep_ratio) {
  Require(total_joints > 0, "total_joints must be positive");
  return frame_fraction * static_cast<double>(controlled_joints) / total_joints * keep_ratio;
}

double PositionDensity(const Matrix& mask) {
  Require(mask.cols() == kKeyjointDim && mask.rows() > 0, "mask must be N x 19");
  return mask.leftCols(18).sum() / static_cast<double>(18 * mask.rows());
}

ExplicitControl ControlFromTrajectory(const Matrix& keyjoints_global, const Matrix& mask) {
  Require(keyjoints_global.cols() == kKeyjointDim && mask.cols() == kKeyjointDim &&
              keyjoints_global.rows() == mask.rows(),
          "trajectory and mask must both be N x 19");
  ExplicitControl c{Matrix::Zero(mask.rows(), kKeyjointDim), mask};
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    if (mask.data()[i] != 0.0) c.values.data()[i] = keyjoints_global.data()[i];
  }
  return c;
}

void GoalSpec::Validate() const {
  Require(start_pose.size() == kKeyjointDim && start_pose.allFinite(), "goal start pose must have 19 finite entries");
  Require(!goal_joints.empty(), "goal needs at least one goal joint");
  Require(goal_joints.size() == targets.size(), "goal joints and targets differ in count");
  Require(body_scale > 0.0 && std::isfinite(body_scale), "goal body scale must be positive");
  if (scenario == ScenarioKind::kWalkTurn) throw std::invalid_argument("walk_turn is not a goal scenario");
  std::vector<int> expected = GoalKeyjoints(scenario);
  std::vector<int> given = goal_joints;
  std::sort(expected.begin(), expected.end());
  std::sort(given.begin(), given.end());
  if (expected != given) {
    throw std::invalid_argument("goal joints are inconsistent with scenario '" + std::string(ScenarioName(scenario)) +
                                "'");
  }
  for (const Vec3& t : targets) Require(t.allFinite(), "goal targets must be finite");
}

ExplicitControl BuildGoalControl(const GoalSpec& goal, int frames) {
  goal.Validate();
  Require(frames >= 2, "goal control needs at least two frames");
  ExplicitControl c = ExplicitControl::Empty(frames);
  c.values.row(0) = goal.start_pose.transpose();
  c.mask.row(0).setOnes();
  for (size_t i = 0; i < goal.goal_joints.size(); ++i) {
    const int col = KeyjointColumn(goal.goal_joints[i]);
    c.values.block(frames - 1, col, 1, 3) = goal.targets[i].transpose();
    c.mask.block(frames - 1, col, 1, 3).setOnes();
  }
  return c;
}

GoalSpec GoalFromGenerated(const GeneratedMotion& generated) {
  const ScenarioKind kind = static_cast<ScenarioKind>(generated.motion.action_label);
  Require(!generated.goals.empty(), "generated motion carries no goals");
  GoalSpec goal;
  goal.scenario = kind;
  goal.body_scale = generated.motion.body_scale;
  goal.start_pose = ExtractKeyjoints(generated.motion).frames.row(0).transpose();
  for (const GoalTarget& t : generated.goals) {
    goal.goal_joints.push_back(t.keyjoint);
    goal.targets.push_back(t.position);
  }
  return goal;
}

namespace {

std::string Where(const std::string& source, int line) { return source + ":" + std::to_string(line); }

int ParseJoint(std::string_view name, const std::string& where) {
  const int k = KeyjointFromName(name);
  if (k < 0) throw ConfigError(where + ": unknown keyjoint '" + std::string(name) + "'");
  return k;
}

Vec3 ParseVec3(const std::vector<std::string_view>& f, size_t first, const std::string& where) {
  return Vec3(text::ParseDouble(f[first], where), text::ParseDouble(f[first + 1], where),
              text::ParseDouble(f[first + 2], where));
}

}  // namespace

ExplicitControl ParseControl(std::istream& in, int frames, const std::string& source) {
  Require(frames >= 1, "control horizon must be positive");
  ExplicitControl c = ExplicitControl::Empty(frames);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = text::StripComment(line);
    if (body.empty()) continue;
    const auto f = text::SplitFields(body);
    const std::string where = Where(source, line_no);
    if (f.size() < 3) throw ConfigError(where + ": expected `frame, joint_name, x, y, z` or `frame, yaw, value`");
    const long long frame = text::ParseInt(f[0], where);
    if (frame < 0 || frame >= frames) {
      throw ConfigError(where + ": frame " + std::to_string(frame) + " outside [0, " + std::to_string(frames - 1) + "]");
    }
    if (f[1] == "yaw") {
      if (f.size() != 3) throw ConfigError(where + ": yaw rows take exactly one value");
      c.values(frame, kYawColumn) = text::ParseDouble(f[2], where);
      c.mask(frame, kYawColumn) = 1.0;
      continue;
    }
    if (f.size() != 5) throw ConfigError(where + ": expected `frame, joint_name, x, y, z`");
    const int joint = ParseJoint(f[1], where);
    c.values.block(frame, KeyjointColumn(joint), 1, 3) = ParseVec3(f, 2, where).transpose();
    c.mask.block(frame, KeyjointColumn(joint), 1, 3).setOnes();
  }
  return c;
}

ExplicitControl ReadControlFile(const std::filesystem::path& path, int frames) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open control file " + path.string());
  return ParseControl(in, frames, path.string());
}

void WriteControlFile(std::ostream& out, const ExplicitControl& control) {
  out << "# frame, joint_name, x, y, z  |  frame, yaw, value\n" << std::setprecision(17);
  for (int n = 0; n < control.frame_count(); ++n) {
    for (int j = 0; j < kKeyjointCount; ++j) {
      const int col = KeyjointColumn(j);
      if (control.mask.block(n, col, 1, 3).minCoeff() == 0.0) continue;
      out << n << ", " << KeyjointName(j) << ", " << control.values(n, col) << ", " << control.values(n, col + 1)
          << ", " << control.values(n, col + 2) << '\n';
    }
    if (control.mask(n, kYawColumn) != 0.0) out << n << ", yaw, " << control.values(n, kYawColumn) << '\n';
  }
}

GoalSpec ParseGoal(std::istream& in, const std::string& source) {
  GoalSpec goal;
  goal.start_pose = Vector::Constant(kKeyjointDim, std::numeric_limits<double>::quiet_NaN());
  bool have_scenario = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = text::StripComment(line);
    if (body.empty()) continue;
    const auto f = text::SplitFields(body);
    const std::string where = Where(source, line_no);
    if (f[0] == "scenario" && f.size() == 2) {
      goal.scenario = ScenarioFromName(f[1]);
      have_scenario = true;
    } else if (f[0] == "body_scale" && f.size() == 2) {
      goal.body_scale = text::ParseDouble(f[1], where);
    } else if (f[0] == "start" && f.size() == 3 && f[1] == "yaw") {
      goal.start_pose(kYawColumn) = text::ParseDouble(f[2], where);
    } else if (f[0] == "start" && f.size() == 5) {
      const int joint = ParseJoint(f[1], where);
      goal.start_pose.segment<3>(KeyjointColumn(joint)) = ParseVec3(f, 2, where);
    } else if (f[0] == "goal" && f.size() == 5) {
      goal.goal_joints.push_back(ParseJoint(f[1], where));
      goal.targets.push_back(ParseVec3(f, 2, where));
    } else {
      throw ConfigError(where + ": unrecognized goal row '" + std::string(body) + "'");
    }
  }
  if (!have_scenario) throw ConfigError(source + ": missing `scenario` row");
  if (!goal.start_pose.allFinite()) throw ConfigError(source + ": start pose needs all six keyjoints and yaw");
  try {
    goal.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return goal;
}

GoalSpec ReadGoalFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open goal file " + path.string());
  return ParseGoal(in, path.string());
}

void WriteGoalFile(std::ostream& out, const GoalSpec& goal) {
  out << std::setprecision(17) << "scenario, " << ScenarioName(goal.scenario) << "\nbody_scale, " << goal.body_scale
      << '\n';
  for (int j = 0; j < kKeyjointCount; ++j) {
    const Vec3 p = goal.start_pose.segment<3>(KeyjointColumn(j));
    out << "start, " << KeyjointName(j) << ", " << p.x() << ", " << p.y() << ", " << p.z() << '\n';
  }
  out << "start, yaw, " << goal.start_pose(kYawColumn) << '\n';
  for (size_t i = 0; i < goal.goal_joints.size(); ++i) {
    const Vec3& p = goal.targets[i];
    out << "goal, " << KeyjointName(goal.goal_joints[i]) << ", " << p.x() << ", " << p.y() << ", " << p.z() << '\n';
  }
}

}  // namespace keymotion
