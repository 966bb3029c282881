#ifndef KEYMOTION_AUTODIFF_HPP_
#define KEYMOTION_AUTODIFF_HPP_

#include <cmath>
#include <vector>

#include "keymotion/common.hpp"

// Scalar reverse-mode differentiation for the small objectives of implicit
// control. Each operation records at most two parents with local partials.
namespace keymotion::ad {

class Tape {
 public:
  int AddNode(int a, double da, int b, double db) {
    nodes_.push_back({a, b, da, db});
    return static_cast<int>(nodes_.size()) - 1;
  }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Adjoints of every node with respect to `output`.
  std::vector<double> Adjoints(int output) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    if (output < 0) return adj;
    adj[static_cast<size_t>(output)] = 1.0;
    for (int i = output; i >= 0; --i) {
      const double g = adj[static_cast<size_t>(i)];
      if (g == 0.0) continue;
      const Node& n = nodes_[static_cast<size_t>(i)];
      if (n.a >= 0) adj[static_cast<size_t>(n.a)] += n.da * g;
      if (n.b >= 0) adj[static_cast<size_t>(n.b)] += n.db * g;
    }
    return adj;
  }

 private:
  struct Node {
    int a;
    int b;
    double da;
    double db;
  };
  std::vector<Node> nodes_;
};

// A value with an optional tape node; index < 0 means a constant.
class Var {
 public:
  Var() = default;
  Var(double value) : value_(value) {}  // NOLINT: constants convert implicitly
  Var(double value, Tape* tape, int index) : value_(value), tape_(tape), index_(index) {}

  static Var Variable(Tape& tape, double value) { return {value, &tape, tape.AddNode(-1, 0.0, -1, 0.0)}; }

  double value() const { return value_; }
  int index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool is_constant() const { return index_ < 0; }

  Var& operator+=(const Var& o) { return *this = *this + o; }
  Var& operator-=(const Var& o) { return *this = *this - o; }
  Var& operator*=(const Var& o) { return *this = *this * o; }
  Var& operator/=(const Var& o) { return *this = *this / o; }

  friend Var Unary(const Var& x, double value, double dx) {
    if (x.is_constant()) return Var(value);
    return {value, x.tape_, x.tape_->AddNode(x.index_, dx, -1, 0.0)};
  }
  friend Var Binary(const Var& x, const Var& y, double value, double dx, double dy) {
    if (x.is_constant() && y.is_constant()) return Var(value);
    Tape* t = x.is_constant() ? y.tape_ : x.tape_;
    return {value, t, t->AddNode(x.index_, dx, y.index_, dy)};
  }

  friend Var operator+(const Var& x, const Var& y) { return Binary(x, y, x.value_ + y.value_, 1.0, 1.0); }
  friend Var operator-(const Var& x, const Var& y) { return Binary(x, y, x.value_ - y.value_, 1.0, -1.0); }
  friend Var operator*(const Var& x, const Var& y) { return Binary(x, y, x.value_ * y.value_, y.value_, x.value_); }
  friend Var operator/(const Var& x, const Var& y) {
    const double q = x.value_ / y.value_;
    return Binary(x, y, q, 1.0 / y.value_, -q / y.value_);
  }
  friend Var operator-(const Var& x) { return Unary(x, -x.value_, -1.0); }

 private:
  double value_ = 0.0;
  Tape* tape_ = nullptr;
  int index_ = -1;
};

inline double Value(double x) { return x; }
inline double Value(const Var& x) { return x.value(); }

inline double sqrt(double x) { return std::sqrt(x); }
inline double abs(double x) { return std::abs(x); }

// The derivative at 0 is taken as 0 (subgradient of the norm at the origin).
inline Var sqrt(const Var& x) {
  const double r = std::sqrt(x.value());
  return Unary(x, r, r > 0.0 ? 0.5 / r : 0.0);
}
inline Var abs(const Var& x) { return Unary(x, std::abs(x.value()), x.value() > 0.0 ? 1.0 : (x.value() < 0.0 ? -1.0 : 0.0)); }

template <typename T>
T Square(const T& x) {
  return x * x;
}

// max(0, x)
template <typename T>
T Hinge(const T& x) {
  return Value(x) > 0.0 ? x : T(0.0);
}

// Gradient of `output` with respect to `inputs`, in input order.
inline Vector Gradient(const Var& output, const std::vector<Var>& inputs) {
  Vector g = Vector::Zero(static_cast<Eigen::Index>(inputs.size()));
  if (output.is_constant()) return g;
  const std::vector<double> adj = output.tape()->Adjoints(output.index());
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].is_constant()) g(static_cast<Eigen::Index>(i)) = adj[static_cast<size_t>(inputs[i].index())];
  }
  return g;
}

}  // namespace keymotion::ad

#endif  // KEYMOTION_AUTODIFF_HPP_
