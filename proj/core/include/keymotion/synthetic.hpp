#ifndef KEYMOTION_SYNTHETIC_HPP_
#define KEYMOTION_SYNTHETIC_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "keymotion/motion.hpp"

namespace keymotion {

enum class ScenarioKind : int { kWalkTurn = 0, kReach = 1, kClimb = 2, kSit = 3 };
inline constexpr int kScenarioCount = 4;

std::string_view ScenarioName(ScenarioKind kind);
ScenarioKind ScenarioFromName(std::string_view name);
std::vector<std::string> DefaultLabelVocabulary();

// Keyjoints constrained at the final frame for a goal scenario:
// reach -> right hand, climb -> both hands and feet, sit -> both hands.
std::vector<int> GoalKeyjoints(ScenarioKind kind);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool valid() const { return lo <= hi; }
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kWalkTurn;
  Range speed{0.8, 1.6};          // m/s
  Range turn_rate{-0.6, 0.6};     // rad/s
  Range arm_swing{0.0, 0.4};      // m
  Range body_scale{0.8, 1.2};
  Range start_xz{-1.0, 1.0};      // m, both horizontal axes
  Range start_yaw{-0.6, 0.6};     // rad
  // Goal regions, in body-scaled meters.
  Range reach_forward{0.05, 0.5};   // from the right shoulder
  Range reach_lateral{-0.3, 0.2};   // +x is toward the body's left
  Range reach_height{-0.35, 0.45};
  Range climb_wall_distance{0.35, 0.55};
  Range climb_hand_height{0.2, 0.4};  // above the final shoulder
  Range climb_foot_height{0.2, 0.5};  // above the ground
  Range sit_seat_height{0.4, 0.55};
  Range sit_backward{0.15, 0.3};
  Range sit_armrest_height{0.55, 0.7};
  int frames = 60;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct GoalTarget {
  int keyjoint = 0;
  Vec3 position = Vec3::Zero();
};

struct GeneratedMotion {
  MotionSequence motion;
  // Final-frame targets the generator solved for; empty for WALK_TURN.
  std::vector<GoalTarget> goals;
};

// Deterministic in `spec.seed`.
GeneratedMotion GenerateMotion(const ScenarioSpec& spec);

struct DatasetSpec {
  int walk_count = 2000;
  int reach_count = 300;
  int climb_count = 300;
  int sit_count = 300;
  int frames = 60;
  std::uint64_t seed = 1;
};

// Records in a fixed order (walks, reaches, climbs, sits); record i is seeded
// from (spec.seed, i) only.
std::vector<MotionSequence> GenerateDataset(const DatasetSpec& spec);

}  // namespace keymotion

#endif  // KEYMOTION_SYNTHETIC_HPP_
