#ifndef KEYMOTION_DATASET_HPP_
#define KEYMOTION_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "keymotion/motion.hpp"

namespace keymotion {

// Per-feature standardization statistics (population std).
struct NormalizationStats {
  Vector mean;
  Vector std;

  int dim() const { return static_cast<int>(mean.size()); }
  Matrix Standardize(const Matrix& x) const;
  Matrix Destandardize(const Matrix& z) const;
  bool operator==(const NormalizationStats& other) const;
};

// Features with a spread below this floor are standardized with std = 1.
inline constexpr double kStdFloor = 1e-8;

NormalizationStats ComputeStats(const std::vector<Matrix>& samples);

struct DatasetHeader {
  std::uint32_t version = 0;
  double fps = kFps;
  Skeleton skeleton;
  NormalizationStats keyjoint_stats;   // GLOBAL keyjoint trajectories, d = 19
  NormalizationStats fullbody_stats;   // FullBodyRepr, D = 51
  std::vector<std::string> labels;
};

struct DatasetFile {
  DatasetHeader header;
  std::vector<MotionSequence> records;
};

inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<Matrix> KeyjointMatrices(const std::vector<MotionSequence>& records);
std::vector<Matrix> FullBodyMatrices(const std::vector<MotionSequence>& records);

// Recomputes statistics from `records` and writes the versioned container.
void WriteDataset(const std::filesystem::path& path, const std::vector<MotionSequence>& records,
                  const std::vector<std::string>& labels);
DatasetFile ReadDataset(const std::filesystem::path& path);

// One frame per line: 48 comma-separated global joint coordinates.
void WriteMotionText(std::ostream& out, const Matrix& global_positions);
void ExportDatasetText(const std::filesystem::path& path, const std::vector<MotionSequence>& records);
// Reads frames written by WriteMotionText; lines starting with '#' are skipped.
Matrix ReadMotionText(const std::filesystem::path& path);

}  // namespace keymotion

#endif  // KEYMOTION_DATASET_HPP_
