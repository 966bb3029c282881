#ifndef KEYMOTION_SPLINE_HPP_
#define KEYMOTION_SPLINE_HPP_

#include <array>
#include <stdexcept>
#include <vector>

#include "keymotion/autodiff.hpp"

namespace keymotion {

template <typename T>
using Point3 = std::array<T, 3>;

// s_0 = 0, s_i = s_{i-1} + |p_i - p_{i-1}|; the last entry is the total length.
template <typename T>
std::vector<T> CumulativeArcLength(const std::vector<Point3<T>>& points) {
  using ad::sqrt;
  std::vector<T> s;
  if (points.empty()) return s;
  s.reserve(points.size());
  s.push_back(T(0.0));
  for (size_t i = 1; i < points.size(); ++i) {
    T sq = T(0.0);
    for (int k = 0; k < 3; ++k) sq += ad::Square(points[i][k] - points[i - 1][k]);
    s.push_back(s.back() + sqrt(sq));
  }
  return s;
}

// Natural cubic interpolant over arc length, one cubic per knot interval:
// S(s) = a + b u + c u^2 + d u^3 with u = s - knots[i].
template <typename T>
struct SplineSegment {
  std::vector<T> knots;
  std::vector<Point3<T>> a, b, c, d;
  T length = T(0.0);

  int interval_count() const { return static_cast<int>(a.size()); }

  Point3<T> Evaluate(const T& s) const {
    const double v = ad::Value(s);
    int i = 0;
    while (i + 1 < interval_count() && v > ad::Value(knots[static_cast<size_t>(i + 1)])) ++i;
    const T u = s - knots[static_cast<size_t>(i)];
    Point3<T> p;
    for (int k = 0; k < 3; ++k) {
      const size_t ii = static_cast<size_t>(i);
      p[k] = a[ii][k] + u * (b[ii][k] + u * (c[ii][k] + u * d[ii][k]));
    }
    return p;
  }
};

// Consecutive points with equal arc length are merged before fitting.
template <typename T>
SplineSegment<T> FitSpline(const std::vector<Point3<T>>& points, const std::vector<T>& s) {
  if (points.size() != s.size() || points.empty()) throw std::invalid_argument("fit_spline: points and s differ in size");
  std::vector<Point3<T>> p;
  std::vector<T> knots;
  for (size_t i = 0; i < points.size(); ++i) {
    if (!knots.empty() && !(ad::Value(s[i]) > ad::Value(knots.back()))) {
      if (ad::Value(s[i]) < ad::Value(knots.back())) throw std::invalid_argument("fit_spline: s must be non-decreasing");
      continue;
    }
    p.push_back(points[i]);
    knots.push_back(s[i]);
  }
  const size_t m = knots.size();
  if (m < 2) throw std::invalid_argument("zero-length segment");
  const size_t n = m - 1;  // intervals
  std::vector<T> h(n);
  for (size_t i = 0; i < n; ++i) h[i] = knots[i + 1] - knots[i];

  SplineSegment<T> spline;
  spline.knots = knots;
  spline.length = knots.back() - knots.front();
  spline.a.resize(n);
  spline.b.resize(n);
  spline.c.resize(n);
  spline.d.resize(n);
  for (int k = 0; k < 3; ++k) {
    // Second derivatives M with M_0 = M_n = 0 from the tridiagonal system.
    std::vector<T> second(m, T(0.0));
    if (m > 2) {
      const size_t inner = m - 2;
      std::vector<T> diag(inner), upper(inner), rhs(inner);
      for (size_t j = 0; j < inner; ++j) {
        const size_t i = j + 1;
        diag[j] = T(2.0) * (h[i - 1] + h[i]);
        upper[j] = h[i];
        rhs[j] = T(6.0) * ((p[i + 1][k] - p[i][k]) / h[i] - (p[i][k] - p[i - 1][k]) / h[i - 1]);
      }
      for (size_t j = 1; j < inner; ++j) {
        const T w = h[j] / diag[j - 1];  // sub-diagonal entry of row j is h[j]
        diag[j] -= w * upper[j - 1];
        rhs[j] -= w * rhs[j - 1];
      }
      second[inner] = rhs[inner - 1] / diag[inner - 1];
      for (size_t j = inner - 1; j-- > 0;) second[j + 1] = (rhs[j] - upper[j] * second[j + 2]) / diag[j];
    }
    for (size_t i = 0; i < n; ++i) {
      spline.a[i][k] = p[i][k];
      spline.b[i][k] = (p[i + 1][k] - p[i][k]) / h[i] - h[i] * (T(2.0) * second[i] + second[i + 1]) / T(6.0);
      spline.c[i][k] = second[i] / T(2.0);
      spline.d[i][k] = (second[i + 1] - second[i]) / (T(6.0) * h[i]);
    }
  }
  return spline;
}

// L points at s_k = k / (L - 1) * s_L, k = 0..L-1.
template <typename T>
std::vector<Point3<T>> ResampleUniform(const SplineSegment<T>& spline, int count) {
  if (count < 2) throw std::invalid_argument("resample_uniform needs L >= 2");
  if (!(ad::Value(spline.length) > 0.0)) throw std::invalid_argument("resample_uniform: zero-length spline");
  std::vector<Point3<T>> out;
  out.reserve(static_cast<size_t>(count));
  for (int k = 0; k < count; ++k) {
    const T s = spline.knots.front() + spline.length * T(static_cast<double>(k) / (count - 1));
    out.push_back(spline.Evaluate(s));
  }
  return out;
}

// Length of the spline curve itself, by dense polyline evaluation.
double SplineCurveLength(const SplineSegment<double>& spline, int subdivisions);

}  // namespace keymotion

#endif  // KEYMOTION_SPLINE_HPP_
