#ifndef KEYMOTION_CONTROL_HPP_
#define KEYMOTION_CONTROL_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <vector>

#include "keymotion/motion.hpp"
#include "keymotion/synthetic.hpp"

namespace keymotion {

// Sparse control in GLOBAL keyjoint coordinates; values are meaningful only
// where mask == 1.
struct ExplicitControl {
  Matrix values;  // N x 19
  Matrix mask;    // N x 19, entries 0 or 1

  int frame_count() const { return static_cast<int>(mask.rows()); }
  void Validate() const;
  static ExplicitControl Empty(int frames);
};

enum class JointSelect { kCross, kPelvis, kRightWrist, kGoal };
enum class FrameSelect { kInterval, kProbability };

struct MaskScheme {
  JointSelect joint_select = JointSelect::kCross;
  FrameSelect frame_select = FrameSelect::kInterval;
  int interval = 30;
  double probability = 0.1;
  double keep_ratio = 0.5;  // CROSS only
  std::uint64_t seed = 0;
  // GOAL only: keyjoints constrained at the final frame.
  std::vector<int> goal_joints{static_cast<int>(Keyjoint::kRightHand)};

  void Validate() const;
};

// INTERVAL(r) selects frames {0, r, 2r, ...}; PROBABILITY(p) selects each frame
// independently. CROSS keeps each keyjoint of a selected frame with
// probability keep_ratio and forces one joint when none survives. The yaw
// column follows the pelvis. GOAL sets the whole first row and the goal
// joints of the last row.
Matrix SampleControlMask(const MaskScheme& scheme, int frames);
Matrix SampleControlMask(const MaskScheme& scheme, int frames, std::mt19937_64& rng);

// Expected fraction of masked position entries (yaw excluded).
double ExpectedPositionDensity(const MaskScheme& scheme, int frames);

// frame_fraction x (controlled joints / total joints) x keep_ratio.
double ControlSignalDensity(double frame_fraction, int controlled_joints, int total_joints, double keep_ratio);

// Fraction of masked entries over the 18 position columns.
double PositionDensity(const Matrix& mask);

ExplicitControl ControlFromTrajectory(const Matrix& keyjoints_global, const Matrix& mask);

struct GoalSpec {
  Vector start_pose;  // 19 entries, GLOBAL keyjoint row at the first frame
  std::vector<int> goal_joints;
  std::vector<Vec3> targets;  // final-frame positions, one per goal joint
  ScenarioKind scenario = ScenarioKind::kReach;
  double body_scale = 1.0;

  void Validate() const;
};

// First row fully constrained plus the goal joints' positions in the last row.
ExplicitControl BuildGoalControl(const GoalSpec& goal, int frames);

// Goal spec taken from a generated goal-scenario motion (start row and the
// generator's final-frame targets).
GoalSpec GoalFromGenerated(const GeneratedMotion& generated);

// Control file: rows `frame, joint_name, x, y, z` or `frame, yaw, value`;
// '#' starts a comment. Frames are 0-based.
ExplicitControl ReadControlFile(const std::filesystem::path& path, int frames);
ExplicitControl ParseControl(std::istream& in, int frames, const std::string& source);
void WriteControlFile(std::ostream& out, const ExplicitControl& control);

// Goal file rows: `scenario, name`, `body_scale, value`, `start, joint_name, x, y, z`,
// `start, yaw, value`, `goal, joint_name, x, y, z`.
GoalSpec ReadGoalFile(const std::filesystem::path& path);
GoalSpec ParseGoal(std::istream& in, const std::string& source);
void WriteGoalFile(std::ostream& out, const GoalSpec& goal);

}  // namespace keymotion

#endif  // KEYMOTION_CONTROL_HPP_
