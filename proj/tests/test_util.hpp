#ifndef KEYMOTION_TESTS_TEST_UTIL_HPP_
#define KEYMOTION_TESTS_TEST_UTIL_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "keymotion/motion.hpp"

namespace keymotion::testing {

// Random pose sequence around the standard rest offsets.
inline MotionSequence RandomSequence(std::uint64_t seed, int frames) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MotionSequence seq;
  seq.body_scale = 1.0 + 0.2 * u(rng);
  const Skeleton& sk = seq.skeleton;
  for (int n = 0; n < frames; ++n) {
    PoseFrame f;
    f.root_position = Vec3(2.0 * u(rng), 0.9 + 0.1 * u(rng), 2.0 * u(rng));
    f.root_yaw = 3.0 * u(rng);
    for (int j = 1; j < sk.joint_count; ++j) {
      f.local_offsets.push_back(sk.offset[j] + 0.05 * Vec3(u(rng), u(rng), u(rng)));
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

inline MotionSequence RestSequence(int frames, const Vec3& root, double yaw = 0.0, double scale = 1.0) {
  MotionSequence seq;
  seq.body_scale = scale;
  for (int n = 0; n < frames; ++n) {
    PoseFrame f;
    f.root_position = root;
    f.root_yaw = yaw;
    for (int j = 1; j < seq.skeleton.joint_count; ++j) f.local_offsets.push_back(seq.skeleton.offset[j]);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

inline std::filesystem::path TempPath(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "keymotion_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace keymotion::testing

#endif  // KEYMOTION_TESTS_TEST_UTIL_HPP_
