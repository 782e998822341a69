#pragma once

#include "uot/types.hpp"

namespace uot {

enum class DivergenceKind { Equality, KL, TV, Range };

/// One marginal functional F(s) = sum_x w_x * D_phi(s_x | p_x): an entropy
/// function phi (selected by `kind`) applied to the density ratio against the
/// reference p.  KL and TV carry a weight lambda; Range carries bounds
/// [lo, hi] with 0 <= lo <= hi <= +inf.
template <class Scalar>
struct DivergenceSpec {
  DivergenceKind kind = DivergenceKind::Equality;
  Scalar lambda = 1;
  Scalar range_lo = 0;
  Scalar range_hi = 1;
  Vector<Scalar> reference;

  static DivergenceSpec equality(Vector<Scalar> p) {
    DivergenceSpec d;
    d.kind = DivergenceKind::Equality;
    d.reference = std::move(p);
    d.validate();
    return d;
  }
  static DivergenceSpec kl(Scalar lambda, Vector<Scalar> p) {
    DivergenceSpec d;
    d.kind = DivergenceKind::KL;
    d.lambda = lambda;
    d.reference = std::move(p);
    d.validate();
    return d;
  }
  static DivergenceSpec tv(Scalar lambda, Vector<Scalar> p) {
    DivergenceSpec d;
    d.kind = DivergenceKind::TV;
    d.lambda = lambda;
    d.reference = std::move(p);
    d.validate();
    return d;
  }
  static DivergenceSpec range(Scalar lo, Scalar hi, Vector<Scalar> p) {
    DivergenceSpec d;
    d.kind = DivergenceKind::Range;
    d.range_lo = lo;
    d.range_hi = hi;
    d.reference = std::move(p);
    d.validate();
    return d;
  }

  void validate() const {
    if ((kind == DivergenceKind::KL || kind == DivergenceKind::TV) && !(lambda > 0))
      throw std::invalid_argument("DivergenceSpec: lambda must be positive");
    if (kind == DivergenceKind::Range &&
        !(range_lo >= 0 && range_lo <= range_hi && range_hi > 0))
      throw std::invalid_argument("DivergenceSpec: need 0 <= lo <= hi, hi > 0");
    for (Index i = 0; i < reference.size(); ++i)
      if (!(reference[i] >= 0) || reference[i] == detail::infinity<Scalar>())
        throw std::invalid_argument("DivergenceSpec: reference must be finite and >= 0");
  }

  /// Recession slope phi'_inf of the entropy function: cost per unit of mass
  /// placed where the reference vanishes.
  Scalar recession_slope() const {
    switch (kind) {
      case DivergenceKind::TV: return lambda;
      case DivergenceKind::Range:
        return range_hi == detail::infinity<Scalar>() ? Scalar(0) : detail::infinity<Scalar>();
      default: return detail::infinity<Scalar>();
    }
  }
};

using DivergenceSpecXd = DivergenceSpec<double>;

namespace detail {

// phi(s) on [0, inf)
template <class Scalar>
Scalar entropy_function(const DivergenceSpec<Scalar>& d, Scalar s) {
  const Scalar inf = infinity<Scalar>();
  if (!(s >= 0)) return inf;
  switch (d.kind) {
    case DivergenceKind::Equality: return s == 1 ? Scalar(0) : inf;
    case DivergenceKind::KL: return s == 0 ? d.lambda : d.lambda * (s * std::log(s) - s + 1);
    case DivergenceKind::TV: return d.lambda * std::abs(s - 1);
    case DivergenceKind::Range: return (s >= d.range_lo && s <= d.range_hi) ? Scalar(0) : inf;
  }
  return inf;
}

// phi*(a) = sup_{s >= 0} s a - phi(s); the domain constraint a <= phi'_inf is
// handled by the caller.
template <class Scalar>
Scalar entropy_conjugate(const DivergenceSpec<Scalar>& d, Scalar a) {
  const Scalar inf = infinity<Scalar>();
  switch (d.kind) {
    case DivergenceKind::Equality: return a;
    case DivergenceKind::KL: return d.lambda * std::expm1(a / d.lambda);
    case DivergenceKind::TV: return a > d.lambda ? inf : std::max(a, -d.lambda);
    case DivergenceKind::Range:
      if (d.range_hi == inf) return a > 0 ? inf : d.range_lo * a;
      return std::max(d.range_lo * a, d.range_hi * a);
  }
  return inf;
}

// Pointwise divergence value D(a|b) = b phi(a/b), with a phi'_inf on {b = 0}
// and the conventions 0/0 = 0, 0 * inf = 0.
template <class Scalar>
Scalar divergence_point(const DivergenceSpec<Scalar>& d, Scalar a, Scalar b) {
  if (b > 0) return b * entropy_function(d, a / b);
  if (a == 0) return 0;
  const Scalar slope = d.recession_slope();
  return slope == 0 ? Scalar(0) : a * slope;
}

// Pointwise stabilized proxdiv: the KL prox of F/eps at s*exp(-u/eps),
// divided by s (0/0 = 0).  Evaluated without forming exp(-u/eps) where the
// closed form allows it; the TV/Range exponentials are clamped.
template <class Scalar>
Scalar proxdiv_point(const DivergenceSpec<Scalar>& d, Scalar s, Scalar p, Scalar u,
                     Scalar eps) {
  const Scalar inf = infinity<Scalar>();
  switch (d.kind) {
    case DivergenceKind::Equality:
      if (s == 0) return p == 0 ? Scalar(0) : inf;  // p > 0 is infeasible
      return p / s;
    case DivergenceKind::KL: {
      if (s == 0 || p == 0) return 0;
      const Scalar t = (d.lambda * std::log(p / s) - u) / (d.lambda + eps);
      return safe_exp(t);
    }
    case DivergenceKind::TV: {
      if (s == 0) return 0;
      const Scalar hi = safe_exp((d.lambda - u) / eps);
      const Scalar lo = safe_exp(-(d.lambda + u) / eps);
      return std::min(hi, std::max(lo, p / s));
    }
    case DivergenceKind::Range: {
      if (s == 0) return d.range_lo * p > 0 ? inf : Scalar(0);
      const Scalar mid = safe_exp(-u / eps);
      const Scalar hi = d.range_hi == inf ? inf : d.range_hi * p / s;
      return std::min(hi, std::max(d.range_lo * p / s, mid));
    }
  }
  return inf;
}

}  // namespace detail

/// F(a) = sum_x w_x D_phi(a_x | p_x).
template <class Scalar>
Scalar divergence_value(const DivergenceSpec<Scalar>& d, const Vector<Scalar>& a,
                        const Vector<Scalar>& w) {
  if (a.size() != d.reference.size() || a.size() != w.size())
    throw std::invalid_argument("divergence_value: length mismatch");
  for (Index i = 0; i < a.size(); ++i)
    if (!(a[i] >= 0)) throw std::invalid_argument("divergence_value: negative input");
  Scalar acc = 0;
  for (Index i = 0; i < a.size(); ++i) {
    if (w[i] == 0) continue;
    acc += w[i] * detail::divergence_point(d, a[i], d.reference[i]);
    if (acc == detail::infinity<Scalar>()) return acc;
  }
  return acc;
}

/// Convex conjugate F*(u) = sum_x w_x p_x phi*(u_x), +inf as soon as some
/// u_x exceeds phi'_inf on {w > 0}.
template <class Scalar>
Scalar divergence_conjugate_value(const DivergenceSpec<Scalar>& d, const Vector<Scalar>& u,
                                  const Vector<Scalar>& w) {
  if (u.size() != d.reference.size() || u.size() != w.size())
    throw std::invalid_argument("divergence_conjugate_value: length mismatch");
  const Scalar slope = d.recession_slope();
  Scalar acc = 0;
  for (Index i = 0; i < u.size(); ++i) {
    if (w[i] == 0) continue;
    if (u[i] > slope) return detail::infinity<Scalar>();
    if (d.reference[i] == 0) continue;
    acc += w[i] * d.reference[i] * detail::entropy_conjugate(d, u[i]);
  }
  return acc;
}

/// Componentwise stabilized proxdiv operator of Table-1 form.
template <class Scalar>
Vector<Scalar> proxdiv(const DivergenceSpec<Scalar>& d, const Vector<Scalar>& s,
                       const Vector<Scalar>& u, Scalar eps) {
  if (s.size() != d.reference.size() || s.size() != u.size())
    throw std::invalid_argument("proxdiv: length mismatch");
  if (!(eps > 0)) throw std::invalid_argument("proxdiv: eps must be positive");
  Vector<Scalar> out(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (!(s[i] >= 0)) throw std::invalid_argument("proxdiv: negative input");
    out[i] = detail::proxdiv_point(d, s[i], d.reference[i], u[i], eps);
  }
  return out;
}

/// Plain proxdiv (zero potentials).
template <class Scalar>
Vector<Scalar> proxdiv(const DivergenceSpec<Scalar>& d, const Vector<Scalar>& s, Scalar eps) {
  const Vector<Scalar> zero = Vector<Scalar>::Zero(s.size());
  return proxdiv(d, s, zero, eps);
}

namespace detail {

// Sup-norm distance of a to the feasible set of the constraint kinds, on
// {w > 0}; zero for the soft kinds.
template <class Scalar>
Scalar constraint_distance(const DivergenceSpec<Scalar>& d, const Vector<Scalar>& a,
                           const Vector<Scalar>& w) {
  Scalar dist = 0;
  for (Index i = 0; i < a.size(); ++i) {
    if (w[i] == 0) continue;
    const Scalar p = d.reference[i];
    Scalar v = 0;
    if (d.kind == DivergenceKind::Equality) {
      v = std::abs(a[i] - p);
    } else if (d.kind == DivergenceKind::Range) {
      const Scalar lo = d.range_lo * p;
      const Scalar hi = d.range_hi == infinity<Scalar>() ? infinity<Scalar>() : d.range_hi * p;
      v = std::max(std::max(lo - a[i], a[i] - hi), Scalar(0));
    }
    if (v > dist) dist = v;
  }
  return dist;
}

}  // namespace detail

/// divergence_value with the set constraints of the Equality/Range kinds
/// replaced by exp(dist/eps) - 1 of the sup-norm distance to the set, so that
/// primal-dual gaps of constraint-type problems remain finite along the
/// iterations.
template <class Scalar>
Scalar penalized_divergence_value(const DivergenceSpec<Scalar>& d, const Vector<Scalar>& a,
                                  const Vector<Scalar>& w, Scalar eps) {
  if (d.kind == DivergenceKind::KL || d.kind == DivergenceKind::TV)
    return divergence_value(d, a, w);
  return std::expm1(detail::constraint_distance(d, a, w) / eps);
}

/// divergence_conjugate_value with the domain constraint u <= phi'_inf
/// replaced by the same exponential penalty.
template <class Scalar>
Scalar penalized_conjugate_value(const DivergenceSpec<Scalar>& d, const Vector<Scalar>& u,
                                 const Vector<Scalar>& w, Scalar eps) {
  const Scalar slope = d.recession_slope();
  Scalar dist = 0;
  Scalar acc = 0;
  for (Index i = 0; i < u.size(); ++i) {
    if (w[i] == 0) continue;
    const Scalar excess = u[i] - slope;
    if (excess > dist) dist = excess;
    if (d.reference[i] == 0) continue;
    acc += w[i] * d.reference[i] * detail::entropy_conjugate(d, std::min(u[i], slope));
  }
  return acc + std::expm1(dist / eps);
}

}  // namespace uot
