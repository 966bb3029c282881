#ifndef KEYMOTION_COMMON_HPP_
#define KEYMOTION_COMMON_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace keymotion {

// Time series are stored frame-major: one row per frame, one column per feature.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

// Bad configuration or malformed user input (keys, file contents, shapes).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem or container-format failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or a diverging numerical procedure.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void Require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

// Wraps an angle to (-pi, pi].
double WrapAngle(double radians);

bool AllFinite(const Matrix& m);

// splitmix64 finalizer over (seed, stream); used to derive independent RNG seeds.
inline std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace keymotion

#endif  // KEYMOTION_COMMON_HPP_
