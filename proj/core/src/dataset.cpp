#include "keymotion/dataset.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "binary_io.hpp"

namespace keymotion {

namespace {

constexpr char kMagic[8] = {'K', 'M', 'D', 'S', 'E', 'T', '\0', '\0'};

void PutSkeleton(std::ostream& out, const Skeleton& s) {
  using binary::Put;
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(s.joint_count));
  for (int p : s.parent) Put<std::int32_t>(out, p);
  for (const Vec3& o : s.offset) {
    Put(out, o.x());
    Put(out, o.y());
    Put(out, o.z());
  }
  for (int j = 0; j < s.joint_count; ++j) {
    binary::PutString(out, j < static_cast<int>(s.names.size()) ? s.names[j] : std::string());
  }
  for (int k : s.keyjoint_indices) Put<std::int32_t>(out, k);
  for (int f : s.foot_indices) Put<std::int32_t>(out, f);
}

Skeleton GetSkeleton(std::istream& in) {
  using binary::Get;
  Skeleton s;
  const auto count = Get<std::uint32_t>(in, "skeleton");
  if (count < 2 || count > 256) throw IoError("implausible skeleton joint count " + std::to_string(count));
  s.joint_count = static_cast<int>(count);
  s.parent.resize(count);
  s.offset.resize(count);
  s.names.resize(count);
  for (auto& p : s.parent) p = Get<std::int32_t>(in, "skeleton parents");
  for (auto& o : s.offset) {
    const double x = Get<double>(in, "skeleton offsets");
    const double y = Get<double>(in, "skeleton offsets");
    const double z = Get<double>(in, "skeleton offsets");
    o = Vec3(x, y, z);
  }
  for (auto& n : s.names) n = binary::GetString(in, "skeleton names");
  for (auto& k : s.keyjoint_indices) k = Get<std::int32_t>(in, "keyjoint indices");
  for (auto& f : s.foot_indices) f = Get<std::int32_t>(in, "foot indices");
  try {
    s.Validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("invalid skeleton in dataset header: ") + e.what());
  }
  return s;
}

void PutStats(std::ostream& out, const NormalizationStats& stats) {
  binary::PutVector(out, stats.mean);
  binary::PutVector(out, stats.std);
}

NormalizationStats GetStats(std::istream& in, const std::string& what) {
  NormalizationStats stats;
  stats.mean = binary::GetVector(in, what + " mean", 4096);
  stats.std = binary::GetVector(in, what + " std", 4096);
  if (stats.mean.size() != stats.std.size()) throw IoError(what + " statistics have inconsistent sizes");
  return stats;
}

}  // namespace

Matrix NormalizationStats::Standardize(const Matrix& x) const {
  Require(x.cols() == mean.size(), "standardize: feature width " + std::to_string(x.cols()) +
                                       " does not match statistics width " + std::to_string(mean.size()));
  Matrix z(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) z(r, c) = (x(r, c) - mean(c)) / std(c);
  }
  return z;
}

Matrix NormalizationStats::Destandardize(const Matrix& z) const {
  Require(z.cols() == mean.size(), "destandardize: feature width mismatch");
  Matrix x(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) x(r, c) = z(r, c) * std(c) + mean(c);
  }
  return x;
}

bool NormalizationStats::operator==(const NormalizationStats& other) const {
  return mean.size() == other.mean.size() && std.size() == other.std.size() && mean == other.mean &&
         std == other.std;
}

NormalizationStats ComputeStats(const std::vector<Matrix>& samples) {
  Require(!samples.empty(), "statistics need at least one sample");
  const Eigen::Index dim = samples.front().cols();
  NormalizationStats stats;
  stats.mean = Vector::Zero(dim);
  stats.std = Vector::Zero(dim);
  double rows = 0.0;
  for (const Matrix& m : samples) {
    Require(m.cols() == dim, "statistics: inconsistent feature width");
    stats.mean += m.colwise().sum().transpose();
    rows += static_cast<double>(m.rows());
  }
  stats.mean /= rows;
  for (const Matrix& m : samples) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      stats.std.array() += (m.row(r).transpose() - stats.mean).array().square();
    }
  }
  stats.std = (stats.std / rows).cwiseSqrt();
  for (Eigen::Index c = 0; c < dim; ++c) {
    if (stats.std(c) < kStdFloor) stats.std(c) = 1.0;
  }
  return stats;
}

std::vector<Matrix> KeyjointMatrices(const std::vector<MotionSequence>& records) {
  std::vector<Matrix> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(ExtractKeyjoints(r).frames);
  return out;
}

std::vector<Matrix> FullBodyMatrices(const std::vector<MotionSequence>& records) {
  std::vector<Matrix> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(EncodeFullBody(r).frames);
  return out;
}

void WriteDataset(const std::filesystem::path& path, const std::vector<MotionSequence>& records,
                  const std::vector<std::string>& labels) {
  if (records.empty()) throw std::invalid_argument("empty dataset");
  const Skeleton& skeleton = records.front().skeleton;
  for (const auto& r : records) {
    r.Validate();
    Require(r.skeleton == skeleton, "all dataset records must share one skeleton");
    Require(r.action_label >= 0 && r.action_label < static_cast<int>(labels.size()),
            "record action label outside the label vocabulary");
  }
  const NormalizationStats keyjoint_stats = ComputeStats(KeyjointMatrices(records));
  const NormalizationStats fullbody_stats = ComputeStats(FullBodyMatrices(records));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open dataset for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  binary::Put<std::uint32_t>(out, kDatasetVersion);
  binary::Put<double>(out, records.front().fps);
  PutSkeleton(out, skeleton);
  PutStats(out, keyjoint_stats);
  PutStats(out, fullbody_stats);
  binary::Put<std::uint32_t>(out, static_cast<std::uint32_t>(labels.size()));
  for (const auto& l : labels) binary::PutString(out, l);
  binary::Put<std::uint64_t>(out, records.size());
  for (const auto& r : records) {
    binary::Put<std::int32_t>(out, r.action_label);
    binary::Put<double>(out, r.body_scale);
    binary::Put<std::uint32_t>(out, static_cast<std::uint32_t>(r.frame_count()));
    for (const PoseFrame& f : r.frames) {
      binary::Put(out, f.root_position.x());
      binary::Put(out, f.root_position.y());
      binary::Put(out, f.root_position.z());
      binary::Put(out, f.root_yaw);
      for (const Vec3& o : f.local_offsets) {
        binary::Put(out, o.x());
        binary::Put(out, o.y());
        binary::Put(out, o.z());
      }
    }
  }
  if (!out) throw IoError("failed while writing dataset: " + path.string());
}

DatasetFile ReadDataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path.string());
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a keymotion dataset file: " + path.string());
  }
  DatasetFile file;
  file.header.version = binary::Get<std::uint32_t>(in, "version");
  if (file.header.version != kDatasetVersion) {
    throw IoError("dataset version mismatch: file has v" + std::to_string(file.header.version) +
                  ", reader expects v" + std::to_string(kDatasetVersion));
  }
  file.header.fps = binary::Get<double>(in, "fps");
  file.header.skeleton = GetSkeleton(in);
  file.header.keyjoint_stats = GetStats(in, "keyjoint");
  file.header.fullbody_stats = GetStats(in, "full-body");
  const auto label_count = binary::Get<std::uint32_t>(in, "label count");
  if (label_count > 4096) throw IoError("implausible label count");
  for (std::uint32_t i = 0; i < label_count; ++i) file.header.labels.push_back(binary::GetString(in, "labels"));
  const auto record_count = binary::Get<std::uint64_t>(in, "record count");
  if (record_count == 0) throw IoError("empty dataset");
  if (record_count > (1ull << 24)) throw IoError("implausible record count");
  const int joints = file.header.skeleton.joint_count;
  file.records.reserve(record_count);
  for (std::uint64_t i = 0; i < record_count; ++i) {
    MotionSequence seq;
    seq.skeleton = file.header.skeleton;
    seq.fps = file.header.fps;
    seq.action_label = binary::Get<std::int32_t>(in, "record label");
    seq.body_scale = binary::Get<double>(in, "record body scale");
    const auto frames = binary::Get<std::uint32_t>(in, "record frame count");
    if (frames > 100000) throw IoError("implausible frame count in record " + std::to_string(i));
    seq.frames.resize(frames);
    for (PoseFrame& f : seq.frames) {
      const double x = binary::Get<double>(in, "record frames");
      const double y = binary::Get<double>(in, "record frames");
      const double z = binary::Get<double>(in, "record frames");
      f.root_position = Vec3(x, y, z);
      f.root_yaw = binary::Get<double>(in, "record frames");
      f.local_offsets.resize(static_cast<size_t>(joints - 1));
      for (Vec3& o : f.local_offsets) {
        const double ox = binary::Get<double>(in, "record frames");
        const double oy = binary::Get<double>(in, "record frames");
        const double oz = binary::Get<double>(in, "record frames");
        o = Vec3(ox, oy, oz);
      }
    }
    file.records.push_back(std::move(seq));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes after dataset records");

  const NormalizationStats keyjoint_stats = ComputeStats(KeyjointMatrices(file.records));
  const NormalizationStats fullbody_stats = ComputeStats(FullBodyMatrices(file.records));
  if (!(keyjoint_stats == file.header.keyjoint_stats) || !(fullbody_stats == file.header.fullbody_stats)) {
    throw IoError("statistics/record inconsistency: stored normalization statistics do not match the records");
  }
  return file;
}

void WriteMotionText(std::ostream& out, const Matrix& global_positions) {
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < global_positions.rows(); ++r) {
    for (Eigen::Index c = 0; c < global_positions.cols(); ++c) {
      if (c) out << ',';
      out << global_positions(r, c);
    }
    out << '\n';
  }
}

void ExportDatasetText(const std::filesystem::path& path, const std::vector<MotionSequence>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open text export for writing: " + path.string());
  for (size_t i = 0; i < records.size(); ++i) {
    out << "# record " << i << " label=" << records[i].action_label << " body_scale=" << std::setprecision(17)
        << records[i].body_scale << '\n';
    WriteMotionText(out, GlobalJointPositions(records[i]));
  }
}

Matrix ReadMotionText(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open motion file: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
    }
    if (row.size() != 3 * kJointCount) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(3 * kJointCount) + " values, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("motion file has no frames: " + path.string());
  Matrix m(static_cast<Eigen::Index>(rows.size()), 3 * kJointCount);
  for (size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < 3 * kJointCount; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<size_t>(c)];
  }
  return m;
}

}  // namespace keymotion
