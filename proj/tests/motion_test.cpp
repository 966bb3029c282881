#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "keymotion/motion.hpp"
#include "test_util.hpp"

namespace keymotion {
namespace {

using testing::RandomSequence;
using testing::RestSequence;

PoseFrame RestFrame() { return RestSequence(1, Vec3::Zero()).frames[0]; }

TEST(ForwardKinematics, IdentityPoseGivesAccumulatedRestOffsets) {
  const Skeleton& sk = StandardSkeleton();
  const JointPositions p = ForwardKinematics(sk, RestFrame(), 1.0);
  const auto acc = sk.RestAccumulated();
  for (int j = 0; j < sk.joint_count; ++j) EXPECT_LT((p[j] - acc[j]).norm(), 1e-15) << j;
}

TEST(ForwardKinematics, RootTranslationTranslatesAllJoints) {
  const Skeleton& sk = StandardSkeleton();
  PoseFrame f = RestFrame();
  const JointPositions base = ForwardKinematics(sk, f, 1.0);
  f.root_position = Vec3(1, 0, 2);
  const JointPositions moved = ForwardKinematics(sk, f, 1.0);
  for (int j = 0; j < sk.joint_count; ++j) EXPECT_LT((moved[j] - base[j] - Vec3(1, 0, 2)).norm(), 1e-12);
}

TEST(ForwardKinematics, QuarterTurnYawMapsXToNegativeZ) {
  const Skeleton& sk = StandardSkeleton();
  PoseFrame f = RestFrame();
  for (auto& o : f.local_offsets) o.setZero();
  f.local_offsets[0] = Vec3(1, 0, 0);  // spine
  f.root_yaw = std::numbers::pi / 2;
  const JointPositions p = ForwardKinematics(sk, f, 1.0);
  EXPECT_LT((p[1] - Vec3(0, 0, -1)).norm(), 1e-12);
}

TEST(ForwardKinematics, RejectsNonFiniteInput) {
  PoseFrame f = RestFrame();
  f.root_yaw = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(ForwardKinematics(StandardSkeleton(), f, 1.0), std::invalid_argument);
  f = RestFrame();
  f.local_offsets[3].x() = std::numeric_limits<double>::infinity();
  EXPECT_THROW(ForwardKinematics(StandardSkeleton(), f, 1.0), std::invalid_argument);
}

TEST(ForwardKinematics, EquivariantOverRandomPoses) {
  const Skeleton& sk = StandardSkeleton();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const MotionSequence seq = RandomSequence(seed, 1);
    PoseFrame f = seq.frames[0];
    const JointPositions base = ForwardKinematics(sk, f, seq.body_scale);
    const Vec3 shift(0.3 * seed, -0.1, 1.7);
    const double turn = 0.37 * static_cast<double>(seed);
    PoseFrame g = f;
    g.root_position += shift;
    const JointPositions translated = ForwardKinematics(sk, g, seq.body_scale);
    g = f;
    g.root_yaw += turn;
    const JointPositions rotated = ForwardKinematics(sk, g, seq.body_scale);
    const Eigen::Matrix3d r = YawRotation(turn);
    for (int j = 0; j < sk.joint_count; ++j) {
      EXPECT_LT((translated[j] - base[j] - shift).norm(), 1e-12);
      const Vec3 expected = f.root_position + r * (base[j] - f.root_position);
      EXPECT_LT((rotated[j] - expected).norm(), 1e-12);
    }
  }
}

TEST(FullBodyEncoding, StaticStandingClipHasAllContacts) {
  const MotionSequence seq = RestSequence(20, Vec3(0, StandardSkeleton().RestPelvisHeight(), 0));
  const FullBodyRepr repr = EncodeFullBody(seq);
  EXPECT_TRUE((repr.frames.col(kLeftContactColumn).array() == 1.0).all());
  EXPECT_TRUE((repr.frames.col(kRightContactColumn).array() == 1.0).all());
}

TEST(FullBodyEncoding, AirborneFeetHaveNoContacts) {
  const MotionSequence seq = RestSequence(20, Vec3(0, StandardSkeleton().RestPelvisHeight() + 0.5, 0));
  const FullBodyRepr repr = EncodeFullBody(seq);
  EXPECT_TRUE((repr.frames.col(kLeftContactColumn).array() == 0.0).all());
  EXPECT_TRUE((repr.frames.col(kRightContactColumn).array() == 0.0).all());
}

TEST(FullBodyEncoding, RoundTripRecoversPositions) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const MotionSequence seq = RandomSequence(seed, seed % 7 == 0 ? 30 : 4);
    const MotionSequence back = DecodeFullBody(EncodeFullBody(seq), seq.skeleton, seq.body_scale);
    const double err = (GlobalJointPositions(back) - GlobalJointPositions(seq)).cwiseAbs().maxCoeff();
    ASSERT_LT(err, 1e-9) << "seed " << seed;
  }
}

TEST(FullBodyEncoding, RejectsSkeletonMismatch) {
  const MotionSequence seq = RandomSequence(3, 4);
  Skeleton other = seq.skeleton;
  other.joint_count = 15;
  EXPECT_THROW(DecodeFullBody(EncodeFullBody(seq), other, 1.0), std::invalid_argument);
}

TEST(FullBodyEncoding, KeyjointBlockMatchesRootRelativeKeyjoints) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const MotionSequence seq = RandomSequence(seed, 6);
    const Matrix block = KeyjointBlock(EncodeFullBody(seq).frames);
    const Matrix rel = ToRootRelative(ExtractKeyjoints(seq)).frames;
    EXPECT_EQ(block, rel);
  }
}

TEST(Keyjoints, StandingPoseAtOriginPutsPelvisAtRestHeight) {
  const double h = StandardSkeleton().RestPelvisHeight();
  const KeyjointTrajectory kj = ExtractKeyjoints(RestSequence(3, Vec3(0, h, 0)));
  EXPECT_EQ(kj.mode, CoordinateMode::kGlobal);
  for (int n = 0; n < 3; ++n) {
    EXPECT_DOUBLE_EQ(kj.frames(n, 0), 0.0);
    EXPECT_DOUBLE_EQ(kj.frames(n, 1), h);
    EXPECT_DOUBLE_EQ(kj.frames(n, 2), 0.0);
    EXPECT_DOUBLE_EQ(kj.frames(n, kYawColumn), 0.0);
  }
}

TEST(Keyjoints, TranslationShiftsPositionsAndKeepsYaw) {
  const MotionSequence seq = RandomSequence(11, 5);
  MotionSequence moved = seq;
  const Vec3 v(0.5, -0.2, 3.0);
  for (auto& f : moved.frames) f.root_position += v;
  const Matrix a = ExtractKeyjoints(seq).frames;
  const Matrix b = ExtractKeyjoints(moved).frames;
  for (int n = 0; n < 5; ++n) {
    for (int k = 0; k < kKeyjointCount; ++k) {
      EXPECT_LT((b.block<1, 3>(n, 3 * k) - a.block<1, 3>(n, 3 * k) - v.transpose()).norm(), 1e-12);
    }
    EXPECT_EQ(a(n, kYawColumn), b(n, kYawColumn));
  }
}

TEST(Keyjoints, RootRelativeWithZeroYawSubtractsPelvis) {
  KeyjointTrajectory g{Matrix::Random(4, kKeyjointDim), CoordinateMode::kGlobal};
  g.frames.col(kYawColumn).setZero();
  const Matrix r = ToRootRelative(g).frames;
  for (int n = 0; n < 4; ++n) {
    for (int k = 1; k < kKeyjointCount; ++k) {
      EXPECT_LT((r.block<1, 3>(n, 3 * k) - (g.frames.block<1, 3>(n, 3 * k) - g.frames.block<1, 3>(n, 0))).norm(),
                1e-15);
    }
  }
}

TEST(Keyjoints, RootRelativeUndoesQuarterTurn) {
  KeyjointTrajectory g{Matrix::Zero(1, kKeyjointDim), CoordinateMode::kGlobal};
  g.frames(0, kYawColumn) = std::numbers::pi / 2;
  // Facing +z at yaw 0, so "1 m ahead" at yaw pi/2 is +x.
  g.frames.block<1, 3>(0, KeyjointColumn(static_cast<int>(Keyjoint::kRightHand))) << 1.0, 0.0, 0.0;
  const Matrix r = ToRootRelative(g).frames;
  const Vec3 rel = r.block<1, 3>(0, KeyjointColumn(static_cast<int>(Keyjoint::kRightHand))).transpose();
  EXPECT_LT((rel - Vec3(0, 0, 1)).norm(), 1e-12);
}

TEST(Keyjoints, RootRelativeRoundTrip) {
  for (int seed = 0; seed < 100; ++seed) {
    std::srand(seed);
    KeyjointTrajectory g{Matrix::Random(8, kKeyjointDim), CoordinateMode::kGlobal};
    g.frames.col(kYawColumn) *= 3.0;
    const KeyjointTrajectory back = ToGlobal(ToRootRelative(g));
    EXPECT_EQ(back.mode, CoordinateMode::kGlobal);
    EXPECT_LT((back.frames - g.frames).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Keyjoints, WrongModeRejected) {
  KeyjointTrajectory g{Matrix::Zero(2, kKeyjointDim), CoordinateMode::kGlobal};
  EXPECT_THROW(ToGlobal(g), std::invalid_argument);
  g.mode = CoordinateMode::kRootRelative;
  EXPECT_THROW(ToRootRelative(g), std::invalid_argument);
}

TEST(Keyjoints, NameLookupAcceptsAliases) {
  EXPECT_EQ(KeyjointFromName("right_hand"), static_cast<int>(Keyjoint::kRightHand));
  EXPECT_EQ(KeyjointFromName("right_wrist"), static_cast<int>(Keyjoint::kRightHand));
  EXPECT_EQ(KeyjointFromName("root"), static_cast<int>(Keyjoint::kPelvis));
  EXPECT_EQ(KeyjointFromName("tail"), -1);
}

TEST(Keyjoints, EveryKeyjointColumnHasFullBodyCounterpart) {
  const MotionSequence seq = RandomSequence(5, 3);
  const Matrix full = EncodeFullBody(seq).frames;
  const Matrix rel = ToRootRelative(ExtractKeyjoints(seq)).frames;
  for (int c = 0; c < kKeyjointDim; ++c) {
    const int fc = FullBodyColumnForKeyjointColumn(c);
    for (int n = 0; n < 3; ++n) EXPECT_EQ(full(n, fc), rel(n, c));
  }
}

TEST(MotionSequence, ValidateRejectsBadBodyScale) {
  MotionSequence seq = RandomSequence(1, 2);
  seq.body_scale = 2.0;
  EXPECT_THROW(seq.Validate(), std::invalid_argument);
}

}  // namespace
}  // namespace keymotion
