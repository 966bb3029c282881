#ifndef KEYMOTION_FULLBODY_STAGE_HPP_
#define KEYMOTION_FULLBODY_STAGE_HPP_

#include <cstdint>
#include <iosfwd>

#include "keymotion/keyjoint_stage.hpp"

namespace keymotion {

struct FullbodyTrainConfig {
  TrainConfig train;
  ScheduleConfig schedule;
  int width1 = 64;
  int width2 = 128;
  std::uint64_t init_seed = 0;
};

StageTraining TrainFullbodyModel(const DatasetFile& dataset, const FullbodyTrainConfig& config,
                                 const TrainProgress& progress = {});

// N x 51 mask selecting the 19 keyjoint columns of a full-body matrix.
Matrix KeyjointColumnMask(int frames);

struct CompletionRequest {
  KeyjointTrajectory keyjoints;  // ROOT_RELATIVE
  SynthesisOptions options;
  int horizon = 60;
  int crossfade = 10;
};

struct Completion {
  FullBodyRepr repr;
  MotionSequence motion;
};

// Shorter inputs are padded by repeating the last frame; longer inputs run in
// overlapping horizon-length windows blended linearly over `crossfade` frames.
// The keyjoint columns of the result equal the request bitwise.
Completion CompleteFullbody(const StageModel& model, const CompletionRequest& request);

// Stage 1 followed by stage 2.
struct PipelineResult {
  KeyjointTrajectory keyjoints;  // GLOBAL
  Completion completion;
};
PipelineResult RunPipeline(const StageModel& keyjoint_model, const StageModel& fullbody_model,
                           const ExplicitControl& control, const SynthesisOptions& options);

// Rows `frame,joint_name,x,y,z` for every joint of every frame.
void WriteTrajectoryCsv(std::ostream& out, const MotionSequence& motion);

}  // namespace keymotion

#endif  // KEYMOTION_FULLBODY_STAGE_HPP_
