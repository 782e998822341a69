#pragma once

#include "uot/scaling.hpp"

#include <algorithm>

namespace uot {

/// Divergence phi applied against the shared second marginal, with weight
/// lambda (Range carries bounds instead).
template <class Scalar>
struct SharedDivergence {
  DivergenceKind kind = DivergenceKind::Equality;
  Scalar lambda = 1;
  Scalar range_lo = 0, range_hi = 1;

  static SharedDivergence equality() { return {DivergenceKind::Equality, 1, 0, 1}; }
  static SharedDivergence kl(Scalar lambda) {
    if (!(lambda > 0)) throw std::invalid_argument("SharedDivergence: lambda must be positive");
    return {DivergenceKind::KL, lambda, 0, 1};
  }
  static SharedDivergence tv(Scalar lambda) {
    if (!(lambda > 0)) throw std::invalid_argument("SharedDivergence: lambda must be positive");
    return {DivergenceKind::TV, lambda, 0, 1};
  }
  static SharedDivergence range(Scalar lo, Scalar hi) {
    if (!(lo >= 0 && lo <= hi && hi > 0 && std::isfinite(hi)))
      throw std::invalid_argument("SharedDivergence: need 0 <= lo <= hi < inf, hi > 0");
    return {DivergenceKind::Range, 1, lo, hi};
  }

  /// The per-coupling divergence against a fixed reference h.
  DivergenceSpec<Scalar> against(Vector<Scalar> h) const {
    switch (kind) {
      case DivergenceKind::Equality: return DivergenceSpec<Scalar>::equality(std::move(h));
      case DivergenceKind::KL: return DivergenceSpec<Scalar>::kl(lambda, std::move(h));
      case DivergenceKind::TV: return DivergenceSpec<Scalar>::tv(lambda, std::move(h));
      case DivergenceKind::Range:
        return DivergenceSpec<Scalar>::range(range_lo, range_hi, std::move(h));
    }
    throw std::invalid_argument("SharedDivergence: unknown kind");
  }
};

using SharedDivergenceXd = SharedDivergence<double>;

namespace detail {

// Root of a nondecreasing piecewise-linear function given by a value oracle
// and its breakpoints; returns the leftmost zero.  Flat zero segments (exact
// ties) are resolved to their left end via tie_tol, which keeps the result
// independent of summation order inside g.
template <class Scalar, class G>
Scalar leftmost_piecewise_root(std::vector<Scalar> bps, const G& g, Scalar tie_tol) {
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

  auto walk_left = [&](size_t idx, Scalar root) {
    // idx: first breakpoint index at or right of the root
    while (idx > 0 && std::abs(g(bps[idx - 1])) <= tie_tol) {
      --idx;
      root = bps[idx];
    }
    return root;
  };

  Scalar prev_t = bps.front();
  Scalar prev_g = g(prev_t);
  if (prev_g >= 0) {
    // root lies on or before the first breakpoint; the function is linear
    // with the slope of the first segment below it
    const Scalar t2 = bps.size() > 1 ? bps[1] : prev_t + 1;
    const Scalar g2 = g(t2);
    const Scalar slope = (g2 - prev_g) / (t2 - prev_t);
    if (prev_g == 0 || slope <= 0) return prev_t;
    return prev_t - prev_g / slope;
  }
  for (size_t m = 1; m < bps.size(); ++m) {
    const Scalar t = bps[m];
    const Scalar gt = g(t);
    if (gt >= -tie_tol) {
      Scalar root;
      if (gt <= tie_tol) {
        root = t;  // breakpoint on the zero plateau
      } else {
        const Scalar slope = (gt - prev_g) / (t - prev_t);
        root = prev_t - prev_g / slope;
      }
      return walk_left(m, root);
    }
    prev_t = t;
    prev_g = gt;
  }
  // beyond the last breakpoint the function is linear; extend by its slope
  const Scalar t_pen = bps.size() > 1 ? bps[bps.size() - 2] : prev_t - 1;
  const Scalar slope = (prev_g - g(t_pen)) / (prev_t - t_pen);
  if (slope <= 0) throw std::invalid_argument("leftmost_piecewise_root: no sign change");
  return prev_t - prev_g / slope;
}

// Pointwise minimizer h of sum_k alpha_k (eps KL(t_k|s_k) + lambda D_phi(t_k|h))
// in the log domain: takes log s_k, returns log h (-inf encodes h = 0).
template <class Scalar>
Scalar barycenter_log_h(const SharedDivergence<Scalar>& phi, const Vector<Scalar>& log_s,
                        const Vector<Scalar>& alpha, Scalar eps) {
  const Index n = log_s.size();
  const Scalar inf = infinity<Scalar>();
  switch (phi.kind) {
    case DivergenceKind::Equality: {
      Scalar acc = 0, tot = 0;
      for (Index k = 0; k < n; ++k) {
        if (log_s[k] == -inf) return -inf;
        acc += alpha[k] * log_s[k];
        tot += alpha[k];
      }
      return acc / tot;
    }
    case DivergenceKind::KL: {
      const Scalar z = eps / (eps + phi.lambda);
      Scalar m = -inf;
      for (Index k = 0; k < n; ++k) m = std::max(m, z * log_s[k]);
      if (m == -inf) return -inf;
      Scalar num = 0, tot = 0;
      for (Index k = 0; k < n; ++k) {
        num += alpha[k] * std::exp(z * log_s[k] - m);
        tot += alpha[k];
      }
      return (m + std::log(num / tot)) / z;
    }
    case DivergenceKind::TV: {
      Scalar a_out = 0, a_in = 0;
      for (Index k = 0; k < n; ++k) (log_s[k] == -inf ? a_out : a_in) += alpha[k];
      if (a_out >= a_in) return -inf;
      const Scalar w = phi.lambda / eps;
      std::vector<Scalar> bps;
      for (Index k = 0; k < n; ++k)
        if (log_s[k] != -inf) {
          bps.push_back(log_s[k] - w);
          bps.push_back(log_s[k] + w);
        }
      auto g = [&](Scalar t) {
        Scalar acc = a_out;
        for (Index k = 0; k < n; ++k) {
          if (log_s[k] == -inf) continue;
          acc += alpha[k] * std::clamp((t - log_s[k]) / w, Scalar(-1), Scalar(1));
        }
        return acc;
      };
      const Scalar tie = Scalar(1e-13) * (a_out + a_in);
      return leftmost_piecewise_root<Scalar>(std::move(bps), g, tie);
    }
    case DivergenceKind::Range: {
      // a vanishing input pins h at zero only when the lower bound is
      // positive; with lo = 0 it imposes nothing and drops out
      const Scalar l2 = std::log(phi.range_hi);
      const Scalar l1 = phi.range_lo > 0 ? std::log(phi.range_lo) : -inf;
      std::vector<Scalar> bps;
      for (Index k = 0; k < n; ++k) {
        if (log_s[k] == -inf) {
          if (phi.range_lo > 0) return -inf;
          continue;
        }
        bps.push_back(log_s[k] - l2);
        if (phi.range_lo > 0) bps.push_back(log_s[k] - l1);
      }
      if (bps.empty()) return -inf;  // all inputs vanish
      auto g = [&](Scalar t) {
        Scalar acc = 0;
        for (Index k = 0; k < n; ++k) {
          if (log_s[k] == -inf) continue;
          acc += alpha[k] * phi.range_hi * std::min(t + l2 - log_s[k], Scalar(0));
          if (phi.range_lo > 0)
            acc += alpha[k] * phi.range_lo * std::max(t + l1 - log_s[k], Scalar(0));
        }
        return acc;
      };
      Scalar scale = 0;
      for (Index k = 0; k < n; ++k) scale += alpha[k] * (phi.range_hi + phi.range_lo);
      const Scalar tie = Scalar(1e-13) * std::max(Scalar(1), scale);
      return leftmost_piecewise_root<Scalar>(std::move(bps), g, tie);
    }
  }
  return -inf;
}

// Scaling factor of one coupling against the shared minimizer, log-domain
// reference (h = exp(log_h)).
template <class Scalar>
Scalar shared_factor(const SharedDivergence<Scalar>& phi, Scalar s, Scalar log_h, Scalar u,
                     Scalar eps) {
  const Scalar inf = infinity<Scalar>();
  const Scalar log_s = std::log(s);
  switch (phi.kind) {
    case DivergenceKind::Equality:
      if (s == 0) return log_h == -inf ? Scalar(0) : inf;
      return safe_exp(log_h - log_s);
    case DivergenceKind::KL:
      if (s == 0 || log_h == -inf) return 0;
      return safe_exp((phi.lambda * (log_h - log_s) - u) / (phi.lambda + eps));
    case DivergenceKind::TV: {
      if (s == 0) return 0;
      const Scalar hi = safe_exp((phi.lambda - u) / eps);
      const Scalar lo = safe_exp(-(phi.lambda + u) / eps);
      return std::min(hi, std::max(lo, safe_exp(log_h - log_s)));
    }
    case DivergenceKind::Range: {
      if (s == 0) return (phi.range_lo > 0 && log_h != -inf) ? inf : Scalar(0);
      const Scalar top = safe_exp(std::log(phi.range_hi) + log_h - log_s);
      const Scalar bot =
          phi.range_lo > 0 ? safe_exp(std::log(phi.range_lo) + log_h - log_s) : Scalar(0);
      return std::min(top, std::max(bot, safe_exp(-u / eps)));
    }
  }
  return inf;
}

}  // namespace detail

/// Pointwise minimizer h of sum_k alpha_k (eps KL(t|s_k) + lambda D_phi(t|h)).
/// TV and Range solve their piecewise-linear equation exactly by sorting the
/// breakpoints (leftmost root on ties).
template <class Scalar>
Scalar barycenter_h(const SharedDivergence<Scalar>& phi, const Vector<Scalar>& s,
                    const Vector<Scalar>& alpha, Scalar eps) {
  if (s.size() != alpha.size() || s.size() < 1)
    throw std::invalid_argument("barycenter_h: need matching nonzero lengths");
  if (!(eps > 0)) throw std::invalid_argument("barycenter_h: eps must be positive");
  for (Index k = 0; k < s.size(); ++k) {
    if (!(s[k] >= 0)) throw std::invalid_argument("barycenter_h: s must be >= 0");
    if (!(alpha[k] > 0)) throw std::invalid_argument("barycenter_h: alpha must be positive");
  }
  const Vector<Scalar> log_s = s.array().log();
  const Scalar lh = detail::barycenter_log_h(phi, log_s, alpha, eps);
  return lh == -detail::infinity<Scalar>() ? Scalar(0) : std::exp(lh);
}

/// Proxdiv of the shared-marginal functional: per column, h from the
/// stabilized inputs s_k exp(-u_k/eps), then per-coupling factors against h.
/// The KL kind never forms exp(-u/eps); it merges the exponent.
template <class Scalar>
std::pair<Matrix<Scalar>, Vector<Scalar>> proxdiv_shared(const SharedDivergence<Scalar>& phi,
                                                         const Matrix<Scalar>& S,
                                                         const Matrix<Scalar>& U, Scalar eps,
                                                         const Vector<Scalar>& alpha) {
  const Index n = S.rows(), J = S.cols();
  if (U.rows() != n || U.cols() != J || alpha.size() != n)
    throw std::invalid_argument("proxdiv_shared: shape mismatch");
  Matrix<Scalar> factors(n, J);
  Vector<Scalar> h(J);
  Vector<Scalar> log_z(n);
  for (Index j = 0; j < J; ++j) {
    for (Index k = 0; k < n; ++k) log_z[k] = std::log(S(k, j)) - U(k, j) / eps;
    const Scalar lh = detail::barycenter_log_h(phi, log_z, alpha, eps);
    h[j] = lh == -detail::infinity<Scalar>() ? Scalar(0) : detail::safe_exp(lh);
    for (Index k = 0; k < n; ++k)
      factors(k, j) = detail::shared_factor(phi, S(k, j), lh, U(k, j), eps);
  }
  return {std::move(factors), std::move(h)};
}

/// n couplings toward a shared second marginal: weights alpha_k scale both
/// the per-coupling kernels K_k = exp(-c_k/(alpha_k eps)) and the shared
/// divergence.
template <class Scalar>
struct BarycenterProblem {
  DiscreteSpace<Scalar> X, Y;
  std::vector<Vector<Scalar>> marginals;  // p_k on X
  Vector<Scalar> alpha;                   // positive weights
  SharedDivergence<Scalar> shared;
  std::vector<DivergenceSpec<Scalar>> f1;  // empty: Equality to each p_k
  std::vector<CostMatrix<Scalar>> costs;   // one per coupling, or a single shared cost
  Scalar epsilon = 1e-3;

  void validate() const {
    const size_t n = marginals.size();
    if (n < 1 || alpha.size() != Index(n))
      throw std::invalid_argument("BarycenterProblem: need one weight per marginal");
    for (Index k = 0; k < alpha.size(); ++k)
      if (!(alpha[k] > 0)) throw std::invalid_argument("BarycenterProblem: weights must be positive");
    if (!f1.empty() && f1.size() != n)
      throw std::invalid_argument("BarycenterProblem: f1 count mismatch");
    if (costs.size() != 1 && costs.size() != n)
      throw std::invalid_argument("BarycenterProblem: need one cost or one per coupling");
    if (!(epsilon > 0)) throw std::invalid_argument("BarycenterProblem: epsilon must be positive");
    for (const auto& p : marginals)
      if (p.size() != X.size()) throw std::invalid_argument("BarycenterProblem: marginal length");
  }
};

template <class Scalar>
struct BarycenterSolution {
  std::vector<Plan<Scalar>> couplings;
  Vector<Scalar> h;
  int iterations = 0;
  bool converged = false;
};

template <class Scalar>
BarycenterSolution<Scalar> solve_barycenter(const BarycenterProblem<Scalar>& prob,
                                            const SolveOptions<Scalar>& opts = {}) {
  prob.validate();
  const int n = static_cast<int>(prob.marginals.size());
  std::vector<detail::Coupling<Scalar>> cps(n);
  for (int k = 0; k < n; ++k) {
    cps[k].cost = prob.costs.size() == 1 ? &prob.costs[0] : &prob.costs[k];
    cps[k].eps_scale = prob.alpha[k];
    cps[k].f1 = prob.f1.empty()
                    ? MarginalOperator<Scalar>(DivergenceSpec<Scalar>::equality(prob.marginals[k]))
                    : MarginalOperator<Scalar>(prob.f1[k]);
  }
  detail::SharedStep<Scalar> shared = [&prob](const Matrix<Scalar>& S, const Matrix<Scalar>& V,
                                              Scalar eps, Vector<Scalar>* h_out) {
    auto [factors, h] = proxdiv_shared(prob.shared, S, V, eps, prob.alpha);
    if (h_out) *h_out = std::move(h);
    return factors;
  };
  auto res = detail::multi_coupling_loop(cps, shared, prob.X, prob.Y, prob.epsilon, opts);
  BarycenterSolution<Scalar> sol;
  sol.couplings = std::move(res.plans);
  sol.h = std::move(res.h);
  sol.iterations = res.iterations;
  sol.converged = res.converged;
  return sol;
}

}  // namespace uot
