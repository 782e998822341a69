#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace uot {

template <class Scalar>
using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Raised when an iteration produces non-finite values, detects an
/// infeasible problem, or overflows despite absorption.
struct solver_error : std::runtime_error {
  explicit solver_error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

template <class Scalar>
constexpr Scalar infinity() {
  return std::numeric_limits<Scalar>::infinity();
}

// Largest exponent that exp() maps to a finite value, with headroom so a few
// subsequent multiplications stay finite.
template <class Scalar>
Scalar exp_bound() {
  static const Scalar b = std::log(std::numeric_limits<Scalar>::max()) - Scalar(10);
  return b;
}

// exp with the argument clamped to the representable range.  The min/max
// structure of the TV and Range operators makes the clamped result exact
// whenever the clamped branch would not be selected.
template <class Scalar>
Scalar safe_exp(Scalar t) {
  const Scalar b = exp_bound<Scalar>();
  if (t > b) t = b;
  if (t < -b) t = -b;
  return std::exp(t);
}

template <class Scalar>
Scalar log_sum_exp(Scalar a, Scalar b) {
  if (a == -infinity<Scalar>()) return b;
  if (b == -infinity<Scalar>()) return a;
  const Scalar m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// L1 distance between log-iterates, weighted by w.  Pairs that are both
// -inf (zero scalings that stay zero) count as no change.
template <class Scalar>
Scalar weighted_log_change(const Vector<Scalar>& prev, const Vector<Scalar>& cur,
                           const Vector<Scalar>& w) {
  Scalar acc = 0;
  for (Index i = 0; i < prev.size(); ++i) {
    if (prev[i] == cur[i]) continue;
    acc += w[i] * std::abs(prev[i] - cur[i]);
  }
  return acc;
}

template <class Scalar>
Scalar max_abs(const Vector<Scalar>& v) {
  Scalar m = 0;
  for (Index i = 0; i < v.size(); ++i) {
    const Scalar a = std::abs(v[i]);
    if (a > m) m = a;
  }
  return m;
}

}  // namespace detail

}  // namespace uot
