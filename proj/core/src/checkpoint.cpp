#include "keymotion/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "binary_io.hpp"

namespace keymotion {

namespace {

constexpr char kMagic[8] = {'K', 'M', 'C', 'K', 'P', 'T', '\0', '\0'};

}  // namespace

void WriteCheckpoint(const std::filesystem::path& path, const StageModel& ckpt) {
  using binary::Put;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  Put<std::uint32_t>(out, kCheckpointVersion);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.stage));
  const DenoiserArchitecture& a = ckpt.model.architecture();
  for (int v : {a.input_channels, a.output_channels, a.width1, a.width2, a.time_features, a.cond_width, a.label_count}) {
    Put<std::int32_t>(out, v);
  }
  Put<std::uint8_t>(out, a.scale_conditioning ? 1 : 0);
  binary::PutVector(out, Eigen::Map<const Vector>(a.skip_alpha_bar.data(), static_cast<Eigen::Index>(a.skip_alpha_bar.size())));
  Put<std::int32_t>(out, ckpt.schedule.steps);
  Put(out, ckpt.schedule.beta_start);
  Put(out, ckpt.schedule.beta_end);
  Put<std::int64_t>(out, ckpt.train_steps);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.labels.size()));
  for (const auto& l : ckpt.labels) binary::PutString(out, l);
  binary::PutVector(out, ckpt.stats.mean);
  binary::PutVector(out, ckpt.stats.std);
  binary::PutVector(out, ckpt.model.parameters());
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

StageModel ReadCheckpoint(const std::filesystem::path& path) {
  using binary::Get;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw IoError("not a keymotion checkpoint: " + path.string());
  }
  const auto version = Get<std::uint32_t>(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint version mismatch: file has " + std::to_string(version) + ", expected " +
                  std::to_string(kCheckpointVersion));
  }
  const auto stage = Get<std::uint32_t>(in, "stage");
  if (stage != 1 && stage != 2) throw IoError("unknown stage " + std::to_string(stage) + " in checkpoint");
  DenoiserArchitecture a;
  for (int* v : {&a.input_channels, &a.output_channels, &a.width1, &a.width2, &a.time_features, &a.cond_width,
                 &a.label_count}) {
    *v = Get<std::int32_t>(in, "architecture");
  }
  a.scale_conditioning = Get<std::uint8_t>(in, "architecture") != 0;
  const Vector skip = binary::GetVector(in, "skip table", 1 << 16);
  a.skip_alpha_bar.assign(skip.data(), skip.data() + skip.size());
  try {
    a.Validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("invalid architecture in checkpoint: ") + e.what());
  }
  ScheduleConfig schedule;
  schedule.steps = Get<std::int32_t>(in, "schedule");
  schedule.beta_start = Get<double>(in, "schedule");
  schedule.beta_end = Get<double>(in, "schedule");
  const auto train_steps = Get<std::int64_t>(in, "train steps");
  const auto label_count = Get<std::uint32_t>(in, "labels");
  if (label_count > 4096) throw IoError("implausible label count in checkpoint");
  std::vector<std::string> labels;
  for (std::uint32_t i = 0; i < label_count; ++i) labels.push_back(binary::GetString(in, "labels"));
  NormalizationStats stats;
  stats.mean = binary::GetVector(in, "stats mean", 4096);
  stats.std = binary::GetVector(in, "stats std", 4096);
  Vector params = binary::GetVector(in, "parameters");
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in checkpoint " + path.string());
  if (stats.mean.size() != a.output_channels || stats.std.size() != a.output_channels) {
    throw IoError("checkpoint statistics width does not match the architecture");
  }
  try {
    return StageModel{static_cast<StageKind>(stage), DenoiserModel(a, std::move(params)), std::move(stats), schedule,
                      std::move(labels), train_steps};
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("corrupt checkpoint: ") + e.what());
  }
}

}  // namespace keymotion
