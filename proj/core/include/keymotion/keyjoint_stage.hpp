#ifndef KEYMOTION_KEYJOINT_STAGE_HPP_
#define KEYMOTION_KEYJOINT_STAGE_HPP_

#include <cstdint>
#include <random>

#include "keymotion/checkpoint.hpp"
#include "keymotion/control.hpp"
#include "keymotion/dataset.hpp"
#include "keymotion/training.hpp"

namespace keymotion {

// Mixture of training masks: CROSS with a random interval or probability,
// single-keyjoint masks, and goal masks (start row + final-frame goal joints).
struct TrainingMaskMixture {
  double cross_weight = 0.70;
  double single_weight = 0.15;
  double goal_weight = 0.15;
  int max_interval = 60;
  double min_probability = 0.02;
  double keep_ratio = 0.5;
};

// `scenario` picks the goal joints of goal masks; walking records use the pelvis.
Matrix SampleTrainingMask(std::mt19937_64& rng, int frames, ScenarioKind scenario, const TrainingMaskMixture& mixture);

struct KeyjointTrainConfig {
  TrainConfig train;
  TrainingMaskMixture masks;
  ScheduleConfig schedule;
  int width1 = 64;
  int width2 = 128;
  std::uint64_t init_seed = 0;
  // Separate goal model: goal masks only, trained on goal-scenario records.
  bool goal_only = false;
};

struct StageTraining {
  StageModel model;
  TrainResult result;
};

StageTraining TrainKeyjointModel(const DatasetFile& dataset, const KeyjointTrainConfig& config,
                                 const TrainProgress& progress = {});

struct SynthesisOptions {
  int label = kNullLabel;
  double guidance_weight = 2.0;
  SamplerSpec sampler;
  std::uint64_t seed = 0;
  double body_scale = 1.0;
  bool reimpute_x0 = true;
  double ddpm_noise_scale = 1.0;
};

// GLOBAL keyjoint trajectory whose masked entries equal control.values bitwise.
KeyjointTrajectory SynthesizeKeyjoints(const StageModel& model, const ExplicitControl& control,
                                       const SynthesisOptions& options);

// Uses the scenario label and the goal's body scale.
KeyjointTrajectory SynthesizeGoal(const StageModel& model, const GoalSpec& goal, SynthesisOptions options,
                                  int frames = 60);

}  // namespace keymotion

#endif  // KEYMOTION_KEYJOINT_STAGE_HPP_
