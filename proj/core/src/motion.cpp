#include "keymotion/motion.hpp"

#include <cmath>
#include <numbers>

namespace keymotion {

namespace {

constexpr std::array<std::string_view, kKeyjointCount> kKeyjointNames = {
    "pelvis", "head", "left_hand", "right_hand", "left_foot", "right_foot"};

Skeleton BuildStandardSkeleton() {
  Skeleton s;
  s.joint_count = kJointCount;
  s.names = {"pelvis",     "spine",       "neck",      "head",     "left_shoulder", "left_elbow",
             "left_hand",  "right_shoulder", "right_elbow", "right_hand", "left_hip",   "left_knee",
             "left_foot",  "right_hip",   "right_knee", "right_foot"};
  s.parent = {0, 0, 1, 2, 2, 4, 5, 2, 7, 8, 0, 10, 11, 0, 13, 14};
  // +x is the character's left, +z its facing direction at yaw 0.
  s.offset = {
      Vec3(0, 0, 0),        Vec3(0, 0.25, 0),     Vec3(0, 0.25, 0),    Vec3(0, 0.15, 0),
      Vec3(0.18, -0.02, 0), Vec3(0, -0.28, 0),    Vec3(0, -0.26, 0),   Vec3(-0.18, -0.02, 0),
      Vec3(0, -0.28, 0),    Vec3(0, -0.26, 0),    Vec3(0.1, -0.05, 0), Vec3(0, -0.45, 0),
      Vec3(0, -0.45, 0),    Vec3(-0.1, -0.05, 0), Vec3(0, -0.45, 0),   Vec3(0, -0.45, 0)};
  s.keyjoint_indices = {0, 3, 6, 9, 12, 15};
  s.foot_indices = {12, 15};
  return s;
}

void RequireFinite(const Vec3& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string("non-finite ") + what);
}

}  // namespace

double WrapAngle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(radians, kTwoPi);
  if (wrapped <= -std::numbers::pi) wrapped += kTwoPi;
  if (wrapped > std::numbers::pi) wrapped -= kTwoPi;
  return wrapped;
}

bool AllFinite(const Matrix& m) { return m.allFinite(); }

std::string_view KeyjointName(int keyjoint) {
  Require(keyjoint >= 0 && keyjoint < kKeyjointCount, "keyjoint index out of range");
  return kKeyjointNames[static_cast<size_t>(keyjoint)];
}

int KeyjointFromName(std::string_view name) {
  for (int k = 0; k < kKeyjointCount; ++k) {
    if (kKeyjointNames[static_cast<size_t>(k)] == name) return k;
  }
  // The evaluation grid calls the right hand a wrist.
  if (name == "right_wrist") return static_cast<int>(Keyjoint::kRightHand);
  if (name == "left_wrist") return static_cast<int>(Keyjoint::kLeftHand);
  if (name == "root") return static_cast<int>(Keyjoint::kPelvis);
  return -1;
}

bool Skeleton::operator==(const Skeleton& other) const {
  return joint_count == other.joint_count && parent == other.parent && offset == other.offset &&
         names == other.names && keyjoint_indices == other.keyjoint_indices &&
         foot_indices == other.foot_indices;
}

void Skeleton::Validate() const {
  Require(joint_count >= 2, "skeleton needs at least two joints");
  Require(static_cast<int>(parent.size()) == joint_count, "skeleton parent array size mismatch");
  Require(static_cast<int>(offset.size()) == joint_count, "skeleton offset array size mismatch");
  int roots = 0;
  for (int j = 0; j < joint_count; ++j) {
    Require(parent[j] >= 0 && parent[j] < joint_count, "skeleton parent index out of range");
    RequireFinite(offset[j], "skeleton offset");
    if (parent[j] == j) {
      ++roots;
      continue;
    }
    // Walk to the root; a cycle would exceed joint_count hops.
    int hops = 0;
    int cursor = j;
    while (parent[cursor] != cursor) {
      cursor = parent[cursor];
      Require(++hops <= joint_count, "skeleton parent array contains a cycle");
    }
  }
  Require(roots == 1, "skeleton must have exactly one root");
  Require(parent[keyjoint_indices[0]] == keyjoint_indices[0], "first keyjoint must be the root");
  for (int a = 0; a < kKeyjointCount; ++a) {
    Require(keyjoint_indices[a] >= 0 && keyjoint_indices[a] < joint_count, "keyjoint index out of range");
    for (int b = a + 1; b < kKeyjointCount; ++b) {
      Require(keyjoint_indices[a] != keyjoint_indices[b], "keyjoint indices must be distinct");
    }
  }
  for (int f : foot_indices) Require(f >= 0 && f < joint_count, "foot index out of range");
}

std::vector<Vec3> Skeleton::RestAccumulated() const {
  std::vector<Vec3> acc(static_cast<size_t>(joint_count), Vec3::Zero());
  // Parents precede children in every skeleton we build; fall back to a walk otherwise.
  for (int j = 0; j < joint_count; ++j) {
    Vec3 sum = Vec3::Zero();
    for (int c = j; parent[c] != c; c = parent[c]) sum += offset[c];
    acc[static_cast<size_t>(j)] = sum;
  }
  return acc;
}

double Skeleton::RestPelvisHeight() const {
  const auto acc = RestAccumulated();
  return -std::min(acc[foot_indices[0]].y(), acc[foot_indices[1]].y());
}

const Skeleton& StandardSkeleton() {
  static const Skeleton skeleton = BuildStandardSkeleton();
  return skeleton;
}

void MotionSequence::Validate() const {
  skeleton.Validate();
  Require(frames.size() >= 2, "motion needs at least 2 frames");
  Require(fps > 0.0, "fps must be positive");
  Require(body_scale >= 0.5 && body_scale <= 1.5, "body_scale must lie in [0.5, 1.5]");
  for (const PoseFrame& f : frames) {
    Require(static_cast<int>(f.local_offsets.size()) == skeleton.joint_count - 1,
            "pose frame offset count does not match skeleton");
  }
}

Eigen::Matrix3d YawRotation(double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Eigen::Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

JointPositions ForwardKinematics(const Skeleton& skeleton, const PoseFrame& frame, double body_scale) {
  Require(skeleton.joint_count == kJointCount, "forward kinematics expects the 16-joint skeleton");
  Require(static_cast<int>(frame.local_offsets.size()) == kJointCount - 1, "pose frame offset count mismatch");
  RequireFinite(frame.root_position, "root position");
  if (!std::isfinite(frame.root_yaw) || !std::isfinite(body_scale)) {
    throw std::invalid_argument("non-finite root yaw or body scale");
  }
  for (const Vec3& o : frame.local_offsets) RequireFinite(o, "joint offset");

  const int root = skeleton.root();
  std::array<Vec3, kJointCount> accumulated;
  std::array<bool, kJointCount> done{};
  accumulated[root] = Vec3::Zero();
  done[root] = true;
  // Offsets are indexed by joint with the root removed.
  auto offset_of = [&](int j) -> const Vec3& { return frame.local_offsets[j < root ? j : j - 1]; };
  for (int pass = 0; pass < kJointCount; ++pass) {
    bool progress = false;
    for (int j = 0; j < kJointCount; ++j) {
      if (done[j] || !done[skeleton.parent[j]]) continue;
      accumulated[j] = accumulated[skeleton.parent[j]] + offset_of(j);
      done[j] = true;
      progress = true;
    }
    if (!progress) break;
  }

  const Eigen::Matrix3d rot = YawRotation(frame.root_yaw);
  JointPositions out;
  for (int j = 0; j < kJointCount; ++j) {
    out[j] = j == root ? frame.root_position : Vec3(frame.root_position + rot * (body_scale * accumulated[j]));
  }
  return out;
}

Matrix GlobalJointPositions(const MotionSequence& seq) {
  Matrix out(seq.frame_count(), 3 * kJointCount);
  for (int n = 0; n < seq.frame_count(); ++n) {
    const JointPositions p = ForwardKinematics(seq.skeleton, seq.frames[n], seq.body_scale);
    for (int j = 0; j < kJointCount; ++j) out.block<1, 3>(n, 3 * j) = p[j].transpose();
  }
  return out;
}

Matrix FootContacts(const Matrix& global_positions, const Skeleton& skeleton) {
  const int n_frames = static_cast<int>(global_positions.rows());
  Require(n_frames >= 2, "foot contacts need at least 2 frames");
  Matrix contacts(n_frames, 2);
  for (int side = 0; side < 2; ++side) {
    const int col = 3 * skeleton.foot_indices[side];
    for (int n = 0; n < n_frames; ++n) {
      const int a = n + 1 < n_frames ? n : n - 1;
      const double dx = global_positions(a + 1, col) - global_positions(a, col);
      const double dz = global_positions(a + 1, col + 2) - global_positions(a, col + 2);
      const bool low = global_positions(n, col + 1) < kContactHeight;
      const bool still = std::hypot(dx, dz) < kContactHorizontalStep;
      contacts(n, side) = (low && still) ? 1.0 : 0.0;
    }
  }
  return contacts;
}

FullBodyRepr EncodeFullBody(const MotionSequence& seq) {
  seq.Validate();
  Require(seq.skeleton.joint_count == kJointCount, "full-body encoding expects the 16-joint skeleton");
  const Matrix global = GlobalJointPositions(seq);
  const Matrix contacts = FootContacts(global, seq.skeleton);
  const int root = seq.skeleton.root();
  FullBodyRepr repr;
  repr.frames.resize(seq.frame_count(), kFullBodyDim);
  for (int n = 0; n < seq.frame_count(); ++n) {
    const PoseFrame& f = seq.frames[n];
    repr.frames.block<1, 3>(n, 0) = f.root_position.transpose();
    repr.frames(n, kFullBodyYawColumn) = f.root_yaw;
    const Eigen::Matrix3d inv = YawRotation(f.root_yaw).transpose();
    int col = 4;
    for (int j = 0; j < kJointCount; ++j) {
      if (j == root) continue;
      const Vec3 g = global.block<1, 3>(n, 3 * j).transpose();
      repr.frames.block<1, 3>(n, col) = (inv * (g - f.root_position)).transpose();
      col += 3;
    }
    repr.frames(n, kLeftContactColumn) = contacts(n, 0);
    repr.frames(n, kRightContactColumn) = contacts(n, 1);
  }
  return repr;
}

MotionSequence DecodeFullBody(const FullBodyRepr& repr, const Skeleton& skeleton, double body_scale) {
  skeleton.Validate();
  if (repr.frames.cols() != 3 + 1 + 3 * (skeleton.joint_count - 1) + 2 || skeleton.joint_count != kJointCount) {
    throw std::invalid_argument("skeleton mismatch: full-body representation width " +
                                std::to_string(repr.frames.cols()) + " does not fit a " +
                                std::to_string(skeleton.joint_count) + "-joint skeleton");
  }
  Require(repr.frame_count() >= 2, "full-body representation needs at least 2 frames");
  Require(repr.frames.allFinite(), "non-finite full-body representation");
  Require(body_scale > 0.0, "body_scale must be positive");

  const int root = skeleton.root();
  MotionSequence seq;
  seq.skeleton = skeleton;
  seq.body_scale = body_scale;
  seq.frames.resize(static_cast<size_t>(repr.frame_count()));
  // Column of each non-root joint's root-relative position.
  std::array<int, kJointCount> column{};
  for (int j = 0, col = 4; j < kJointCount; ++j) {
    if (j == root) continue;
    column[j] = col;
    col += 3;
  }
  for (int n = 0; n < repr.frame_count(); ++n) {
    PoseFrame& f = seq.frames[static_cast<size_t>(n)];
    f.root_position = repr.frames.block<1, 3>(n, 0).transpose();
    f.root_yaw = repr.frames(n, kFullBodyYawColumn);
    f.local_offsets.resize(kJointCount - 1);
    for (int j = 0; j < kJointCount; ++j) {
      if (j == root) continue;
      const int p = skeleton.parent[j];
      const Vec3 rel = repr.frames.block<1, 3>(n, column[j]).transpose();
      const Vec3 parent_rel = p == root ? Vec3::Zero() : Vec3(repr.frames.block<1, 3>(n, column[p]).transpose());
      f.local_offsets[j < root ? j : j - 1] = (rel - parent_rel) / body_scale;
    }
  }
  return seq;
}

int FullBodyColumnForKeyjointColumn(int c, const Skeleton& skeleton) {
  Require(c >= 0 && c < kKeyjointDim, "keyjoint column out of range");
  if (c == kYawColumn) return kFullBodyYawColumn;
  const int k = c / 3;
  const int axis = c % 3;
  if (k == 0) return axis;
  const int joint = skeleton.keyjoint_indices[k];
  const int root = skeleton.root();
  const int slot = joint < root ? joint : joint - 1;
  return 4 + 3 * slot + axis;
}

Matrix KeyjointBlock(const Matrix& fullbody) {
  Require(fullbody.cols() == kFullBodyDim, "full-body width mismatch");
  Matrix out(fullbody.rows(), kKeyjointDim);
  for (int c = 0; c < kKeyjointDim; ++c) out.col(c) = fullbody.col(FullBodyColumnForKeyjointColumn(c));
  return out;
}

void WriteKeyjointBlock(const Matrix& keyjoints_relative, Matrix& fullbody) {
  Require(fullbody.cols() == kFullBodyDim && keyjoints_relative.cols() == kKeyjointDim,
          "keyjoint block width mismatch");
  Require(fullbody.rows() == keyjoints_relative.rows(), "keyjoint block frame count mismatch");
  for (int c = 0; c < kKeyjointDim; ++c) fullbody.col(FullBodyColumnForKeyjointColumn(c)) = keyjoints_relative.col(c);
}

KeyjointTrajectory ExtractKeyjoints(const MotionSequence& seq) {
  seq.Validate();
  KeyjointTrajectory out;
  out.mode = CoordinateMode::kGlobal;
  out.frames.resize(seq.frame_count(), kKeyjointDim);
  for (int n = 0; n < seq.frame_count(); ++n) {
    const JointPositions p = ForwardKinematics(seq.skeleton, seq.frames[n], seq.body_scale);
    for (int k = 0; k < kKeyjointCount; ++k) {
      out.frames.block<1, 3>(n, KeyjointColumn(k)) = p[seq.skeleton.keyjoint_indices[k]].transpose();
    }
    out.frames(n, kYawColumn) = seq.frames[n].root_yaw;
  }
  return out;
}

KeyjointTrajectory ToRootRelative(const KeyjointTrajectory& global) {
  Require(global.mode == CoordinateMode::kGlobal, "to_root_relative expects GLOBAL keyjoints");
  Require(global.frames.cols() == kKeyjointDim, "keyjoint width must be 19");
  KeyjointTrajectory out{global.frames, CoordinateMode::kRootRelative};
  for (int n = 0; n < global.frame_count(); ++n) {
    const Vec3 pelvis = global.frames.block<1, 3>(n, 0).transpose();
    const Eigen::Matrix3d inv = YawRotation(global.frames(n, kYawColumn)).transpose();
    for (int k = 1; k < kKeyjointCount; ++k) {
      const Vec3 g = global.frames.block<1, 3>(n, KeyjointColumn(k)).transpose();
      out.frames.block<1, 3>(n, KeyjointColumn(k)) = (inv * (g - pelvis)).transpose();
    }
  }
  return out;
}

KeyjointTrajectory ToGlobal(const KeyjointTrajectory& relative) {
  Require(relative.mode == CoordinateMode::kRootRelative, "to_global expects ROOT_RELATIVE keyjoints");
  Require(relative.frames.cols() == kKeyjointDim, "keyjoint width must be 19");
  KeyjointTrajectory out{relative.frames, CoordinateMode::kGlobal};
  for (int n = 0; n < relative.frame_count(); ++n) {
    const Vec3 pelvis = relative.frames.block<1, 3>(n, 0).transpose();
    const Eigen::Matrix3d rot = YawRotation(relative.frames(n, kYawColumn));
    for (int k = 1; k < kKeyjointCount; ++k) {
      const Vec3 r = relative.frames.block<1, 3>(n, KeyjointColumn(k)).transpose();
      out.frames.block<1, 3>(n, KeyjointColumn(k)) = (pelvis + rot * r).transpose();
    }
  }
  return out;
}

}  // namespace keymotion
