#ifndef KEYMOTION_MOTION_HPP_
#define KEYMOTION_MOTION_HPP_

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "keymotion/common.hpp"

namespace keymotion {

inline constexpr int kJointCount = 16;
inline constexpr int kKeyjointCount = 6;
// 6 keyjoints x 3 global coordinates + root yaw.
inline constexpr int kKeyjointDim = 19;
inline constexpr int kYawColumn = 18;
// root position (3) + root yaw (1) + 15 root-relative joints (45) + 2 foot contacts.
inline constexpr int kFullBodyDim = 51;
inline constexpr int kFullBodyYawColumn = 3;
inline constexpr int kLeftContactColumn = 49;
inline constexpr int kRightContactColumn = 50;
inline constexpr double kFps = 20.0;

// Foot contact heuristic shared by the encoder and the foot-skating metric.
inline constexpr double kContactHeight = 0.05;       // meters
inline constexpr double kContactHorizontalStep = 0.01;  // meters per frame

enum class Keyjoint : int { kPelvis = 0, kHead, kLeftHand, kRightHand, kLeftFoot, kRightFoot };

std::string_view KeyjointName(int keyjoint);
// Returns -1 for an unknown name.
int KeyjointFromName(std::string_view name);

// First column of keyjoint k inside a keyjoint trajectory row.
constexpr int KeyjointColumn(int keyjoint) { return 3 * keyjoint; }

struct Skeleton {
  int joint_count = kJointCount;
  std::vector<int> parent;          // parent[root] == root
  std::vector<Vec3> offset;         // rest offset from parent, meters
  std::vector<std::string> names;
  std::array<int, kKeyjointCount> keyjoint_indices{};  // pelvis, head, l/r hand, l/r foot
  std::array<int, 2> foot_indices{};                   // left, right

  bool operator==(const Skeleton& other) const;
  void Validate() const;
  int root() const { return keyjoint_indices[0]; }
  // Rest height of the root above the ground plane for body_scale 1.
  double RestPelvisHeight() const;
  // Accumulated rest offset of every joint relative to the root.
  std::vector<Vec3> RestAccumulated() const;
};

// The 16-joint skeleton used throughout: pelvis, spine, neck, head, shoulders,
// elbows, hands, hips, knees, feet. Feet rest on y = 0 when the pelvis is at
// RestPelvisHeight().
const Skeleton& StandardSkeleton();

struct PoseFrame {
  Vec3 root_position = Vec3::Zero();
  double root_yaw = 0.0;
  // Offsets of joints 1..joint_count-1 from their parents, in the root's
  // yaw-aligned frame, before body scaling.
  std::vector<Vec3> local_offsets;
};

struct MotionSequence {
  Skeleton skeleton = StandardSkeleton();
  double fps = kFps;
  std::vector<PoseFrame> frames;
  int action_label = 0;
  double body_scale = 1.0;

  int frame_count() const { return static_cast<int>(frames.size()); }
  void Validate() const;
};

enum class CoordinateMode { kGlobal, kRootRelative };

struct KeyjointTrajectory {
  Matrix frames;  // N x 19
  CoordinateMode mode = CoordinateMode::kGlobal;

  int frame_count() const { return static_cast<int>(frames.rows()); }
};

struct FullBodyRepr {
  Matrix frames;  // N x 51
  int frame_count() const { return static_cast<int>(frames.rows()); }
};

using JointPositions = std::array<Vec3, kJointCount>;

Eigen::Matrix3d YawRotation(double yaw);

JointPositions ForwardKinematics(const Skeleton& skeleton, const PoseFrame& frame, double body_scale);

// N x 48 matrix of global joint positions, joint-major within a row.
Matrix GlobalJointPositions(const MotionSequence& seq);

FullBodyRepr EncodeFullBody(const MotionSequence& seq);
MotionSequence DecodeFullBody(const FullBodyRepr& repr, const Skeleton& skeleton, double body_scale = 1.0);

// Column in FullBodyRepr that holds keyjoint-trajectory column `c` (root-relative
// convention). Every one of the 19 keyjoint columns has a counterpart.
int FullBodyColumnForKeyjointColumn(int c, const Skeleton& skeleton = StandardSkeleton());

// Copies the keyjoint sub-block out of / into a full-body matrix.
Matrix KeyjointBlock(const Matrix& fullbody);
void WriteKeyjointBlock(const Matrix& keyjoints_relative, Matrix& fullbody);

KeyjointTrajectory ExtractKeyjoints(const MotionSequence& seq);
KeyjointTrajectory ToRootRelative(const KeyjointTrajectory& global);
KeyjointTrajectory ToGlobal(const KeyjointTrajectory& relative);

// Per-frame foot contact flags (left, right) from global foot positions.
// The last frame reuses the previous frame's horizontal step.
Matrix FootContacts(const Matrix& global_positions, const Skeleton& skeleton);

}  // namespace keymotion

#endif  // KEYMOTION_MOTION_HPP_
