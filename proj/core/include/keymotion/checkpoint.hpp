#ifndef KEYMOTION_CHECKPOINT_HPP_
#define KEYMOTION_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "keymotion/dataset.hpp"
#include "keymotion/denoiser.hpp"
#include "keymotion/diffusion.hpp"

namespace keymotion {

// A trained denoiser together with everything needed to sample from it.
struct StageModel {
  StageKind stage = StageKind::kKeyjoint;
  DenoiserModel model;
  NormalizationStats stats;  // stage feature statistics used during training
  ScheduleConfig schedule;
  std::vector<std::string> labels;
  std::int64_t train_steps = 0;

  NoiseSchedule BuildNoiseSchedule() const { return BuildSchedule(schedule); }
};

inline constexpr std::uint32_t kCheckpointVersion = 2;

// Layout (little-endian): magic "KMCKPT\0\0", u32 version, u32 stage,
// architecture (7 x i32 + u8 + skip table), schedule (i32 + 2 x f64), i64 train steps,
// labels (u32 count + length-prefixed strings), stats (mean, std), params.
void WriteCheckpoint(const std::filesystem::path& path, const StageModel& checkpoint);
StageModel ReadCheckpoint(const std::filesystem::path& path);

}  // namespace keymotion

#endif  // KEYMOTION_CHECKPOINT_HPP_
