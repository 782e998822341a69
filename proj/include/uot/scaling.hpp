#pragma once

#include "uot/divergences.hpp"
#include "uot/geometry.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace uot {

/// Geometric epsilon decrease: starting from eps0, one division every `every`
/// iterations until eps_target is reached after `divisions` divisions.  An
/// absorption is forced at every division.
template <class Scalar>
class EpsilonSchedule {
 public:
  EpsilonSchedule(Scalar eps0, Scalar target, int divisions, int every)
      : eps0_(eps0), target_(target), divisions_(divisions), every_(every) {
    if (!(target > 0) || !(eps0 >= target))
      throw std::invalid_argument("EpsilonSchedule: need eps0 >= target > 0");
    if (every < 1) throw std::invalid_argument("EpsilonSchedule: every must be >= 1");
    if (eps0 == target) divisions_ = 0;
    if (eps0 != target && divisions_ < 1)
      throw std::invalid_argument("EpsilonSchedule: need divisions >= 1 to reach target");
  }

  static EpsilonSchedule constant(Scalar eps) { return EpsilonSchedule(eps, eps, 0, 1); }

  Scalar factor() const {
    return divisions_ == 0 ? Scalar(1) : std::pow(target_ / eps0_, Scalar(1) / Scalar(divisions_));
  }

  /// Epsilon in effect during 1-based iteration `it`; divisions take effect
  /// after the iteration they are triggered on.
  Scalar at(int it) const {
    if (divisions_ == 0) return target_;
    const int k = std::min<int>(divisions_, std::max(0, (it - 1) / every_));
    if (k >= divisions_) return target_;
    return eps0_ * std::pow(factor(), Scalar(k));
  }

  /// True when a division (and forced absorption) happens at the end of `it`.
  bool division_at(int it) const {
    return divisions_ > 0 && it > 0 && it % every_ == 0 && it / every_ <= divisions_;
  }

  Scalar target() const { return target_; }

 private:
  Scalar eps0_, target_;
  int divisions_, every_;
};

template <class Scalar>
EpsilonSchedule<Scalar> epsilon_schedule(Scalar eps0, Scalar target, int divisions = 10,
                                         int every = 100) {
  return EpsilonSchedule<Scalar>(eps0, target, divisions, every);
}

template <class Scalar>
struct SolveOptions {
  int max_iter = 10000;
  Scalar tol = 1e-8;        // L1 change of the implied log-scalings per sweep; <= 0 disables
  Scalar gap_tol = 0;       // > 0 stops once the primal-dual gap falls below it
  Scalar absorb_threshold = 50;  // absorb when max(|log a~|, |log b~|) exceeds this
  int absorb_every = 10;         // absorption check stride
  int gap_stride = 0;            // > 0 records the gap every so many sweeps

  bool use_schedule = false;  // geometric epsilon decrease down to the target
  Scalar schedule_epsilon0 = 1;
  int schedule_divisions = 10;
  int schedule_every = 100;

  // Observer of the implied log-scalings after each sweep (diagnostics).
  std::function<void(int, const Vector<Scalar>&, const Vector<Scalar>&)> on_sweep;
};

using SolveOptionsXd = SolveOptions<double>;

/// Coupling density R on X x Y together with the reference weights.
template <class Scalar>
struct Plan {
  Matrix<Scalar> density;
  Vector<Scalar> wx, wy;

  Vector<Scalar> marginal_x() const { return density * wy; }
  Vector<Scalar> marginal_y() const { return density.transpose() * wx; }
  Scalar mass() const { return wx.dot(density * wy); }

  /// <C, R> with the convention 0 * inf = 0.
  Scalar transport_cost(const CostMatrix<Scalar>& C) const {
    Scalar acc = 0;
    for (Index i = 0; i < density.rows(); ++i)
      for (Index j = 0; j < density.cols(); ++j) {
        if (density(i, j) == 0) continue;
        acc += wx[i] * wy[j] * C.dense(i, j) * density(i, j);
      }
    return acc;
  }

  /// KL(R | K) against the kernel, weighted by the reference measures.
  Scalar entropy_kl(const Kernel<Scalar>& K) const {
    const Matrix<Scalar> dense = kernel_to_dense(K);
    Scalar acc = 0;
    for (Index i = 0; i < density.rows(); ++i)
      for (Index j = 0; j < density.cols(); ++j) {
        const Scalar r = density(i, j), k = dense(i, j);
        if (r == 0) {
          acc += wx[i] * wy[j] * k;
        } else if (k == 0) {
          return detail::infinity<Scalar>();
        } else {
          acc += wx[i] * wy[j] * (r * std::log(r / k) - r + k);
        }
      }
    return acc;
  }
};

using PlanXd = Plan<double>;

/// Log-domain iterates of the stabilized solver: redundant factors a~, b~
/// together with the absorbed potentials u, v; the implied scalings are
/// a = a~ exp(u/eps), b = b~ exp(v/eps) and stay invariant across absorptions.
template <class Scalar>
struct ScalingState {
  Vector<Scalar> a_tilde, b_tilde;
  Vector<Scalar> u, v;
  Scalar epsilon = 1;
  int iteration = 0;
  Kernel<Scalar> kernel;
};

template <class Scalar>
struct SolveReport {
  Plan<Scalar> plan;
  // Primal/dual values under the exponential-penalty convention for the
  // constraint kinds (finite along iterates); equal to the exact values for
  // the soft kinds.
  Scalar primal = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar dual = std::numeric_limits<Scalar>::quiet_NaN();
  std::vector<Scalar> gap_history;
  std::vector<int> gap_iterations;
  int iterations = 0;
  bool converged = false;
  Vector<Scalar> u, v;  // implied dual potentials eps log a, eps log b
  Scalar epsilon = std::numeric_limits<Scalar>::quiet_NaN();
};

using SolveReportXd = SolveReport<double>;

/// Marginal update used by the scaling loops: the stabilized proxdiv map.
/// Divergence-backed operators keep their spec so primal/dual values can be
/// evaluated; custom operators (gradient-flow energies) provide `apply` only.
template <class Scalar>
struct MarginalOperator {
  std::function<Vector<Scalar>(const Vector<Scalar>&, const Vector<Scalar>&, Scalar)> apply;
  std::optional<DivergenceSpec<Scalar>> spec;

  MarginalOperator() = default;
  MarginalOperator(DivergenceSpec<Scalar> d) : spec(std::move(d)) {
    apply = [s = *spec](const Vector<Scalar>& z, const Vector<Scalar>& u, Scalar eps) {
      return proxdiv(s, z, u, eps);
    };
  }
};

/// Thompson part metric max_i |log(r_i/s_i)| on positive vectors.
template <class Scalar>
Scalar thompson_distance(const Vector<Scalar>& r, const Vector<Scalar>& s) {
  if (r.size() != s.size()) throw std::invalid_argument("thompson_distance: length mismatch");
  Scalar d = 0;
  for (Index i = 0; i < r.size(); ++i) {
    if (!(r[i] > 0) || !(s[i] > 0))
      throw std::invalid_argument("thompson_distance: entries must be positive");
    d = std::max(d, std::abs(std::log(r[i] / s[i])));
  }
  return d;
}

/// F1(R dy) + F2(R^T dx) + eps KL(R|K); +inf when the plan is infeasible for
/// a constraint kind.
template <class Scalar>
Scalar primal_value(const Plan<Scalar>& plan, const DivergenceSpec<Scalar>& F1,
                    const DivergenceSpec<Scalar>& F2, const Kernel<Scalar>& K, Scalar eps) {
  return divergence_value(F1, plan.marginal_x(), plan.wx) +
         divergence_value(F2, plan.marginal_y(), plan.wy) + eps * plan.entropy_kl(K);
}

/// Variant with the set constraints replaced by exp(dist/eps) - 1.
template <class Scalar>
Scalar penalized_primal_value(const Plan<Scalar>& plan, const DivergenceSpec<Scalar>& F1,
                              const DivergenceSpec<Scalar>& F2, const Kernel<Scalar>& K,
                              Scalar eps) {
  return penalized_divergence_value(F1, plan.marginal_x(), plan.wx, eps) +
         penalized_divergence_value(F2, plan.marginal_y(), plan.wy, eps) +
         eps * plan.entropy_kl(K);
}

/// Dual value -F1*(-u) - F2*(-v) - eps <exp((u+v)/eps) - 1, K>; dual points
/// outside a conjugate's domain are penalized exponentially in their sup-norm
/// distance to it.
template <class Scalar>
Scalar dual_value(const Vector<Scalar>& u, const Vector<Scalar>& v,
                  const DivergenceSpec<Scalar>& F1, const DivergenceSpec<Scalar>& F2,
                  const Kernel<Scalar>& K, const Vector<Scalar>& wx, const Vector<Scalar>& wy,
                  Scalar eps) {
  if (u.size() != wx.size() || v.size() != wy.size())
    throw std::invalid_argument("dual_value: length mismatch");
  const Matrix<Scalar> dense = kernel_to_dense(K);
  Scalar inner = 0;
  for (Index i = 0; i < dense.rows(); ++i)
    for (Index j = 0; j < dense.cols(); ++j) {
      if (dense(i, j) == 0) continue;
      inner += wx[i] * wy[j] * dense(i, j) * std::expm1(std::min((u[i] + v[j]) / eps, Scalar(700)));
    }
  return -penalized_conjugate_value(F1, (-u).eval(), wx, eps) -
         penalized_conjugate_value(F2, (-v).eval(), wy, eps) - eps * inner;
}

/// Primal-dual gap at the current iterates (penalized convention, so it is
/// finite for constraint kinds as well).
template <class Scalar>
Scalar pd_gap(const Plan<Scalar>& plan, const Vector<Scalar>& u, const Vector<Scalar>& v,
              const DivergenceSpec<Scalar>& F1, const DivergenceSpec<Scalar>& F2,
              const Kernel<Scalar>& K, Scalar eps) {
  return penalized_primal_value(plan, F1, F2, K, eps) -
         dual_value(u, v, F1, F2, K, plan.wx, plan.wy, eps);
}

namespace detail {

// Gap from one sweep's byproducts: m1 = a .* K(b.*wy), m2 = b .* K^T(a.*wx),
// duals (du, dv) = eps (log a, log b).  Uses
//   KL(R|K) = <wx du, m1>/eps + <wy dv, m2>/eps - mass(R) + mass(K)
// so no dense pass over R is needed.  Accumulation in long double keeps the
// tail of the gap sequence quiet.
template <class Scalar>
Scalar sweep_gap(const DivergenceSpec<Scalar>& F1, const DivergenceSpec<Scalar>& F2,
                 const Vector<Scalar>& m1, const Vector<Scalar>& m2, const Vector<Scalar>& du,
                 const Vector<Scalar>& dv, const Vector<Scalar>& wx, const Vector<Scalar>& wy,
                 Scalar eps, Scalar kernel_mass) {
  long double pot = 0, mass = 0;
  for (Index i = 0; i < m1.size(); ++i) {
    if (m1[i] != 0) pot += (long double)(wx[i]) * du[i] * m1[i];
    mass += (long double)(wx[i]) * m1[i];
  }
  for (Index j = 0; j < m2.size(); ++j)
    if (m2[j] != 0) pot += (long double)(wy[j]) * dv[j] * m2[j];
  const long double kl = pot / eps - mass + (long double)kernel_mass;
  const long double primal = (long double)penalized_divergence_value(F1, m1, wx, eps) +
                             (long double)penalized_divergence_value(F2, m2, wy, eps) +
                             (long double)eps * kl;
  const long double dual = -(long double)penalized_conjugate_value(F1, (-du).eval(), wx, eps) -
                           (long double)penalized_conjugate_value(F2, (-dv).eval(), wy, eps) -
                           (long double)eps * (mass - (long double)kernel_mass);
  return Scalar(primal - dual);
}

template <class Scalar>
Scalar kernel_mass(const Kernel<Scalar>& K, const Vector<Scalar>& wx, const Vector<Scalar>& wy) {
  const Vector<Scalar> ones = Vector<Scalar>::Ones(wy.size());
  return wx.dot(kernel_apply(K, ones, wy));
}

// KL(R|K) through log(R/K) = (u_i + v_j + shift)/eps, which stays finite at
// tiny eps where the plain kernel itself underflows.
template <class Scalar>
Scalar plan_entropy_identity(const Plan<Scalar>& plan, const Vector<Scalar>& u,
                             const Vector<Scalar>& v, Scalar shift, Scalar eps,
                             Scalar kernel_mass_value) {
  const Vector<Scalar> m1 = plan.marginal_x(), m2 = plan.marginal_y();
  long double pot = 0, mass = 0;
  for (Index i = 0; i < m1.size(); ++i) {
    if (m1[i] == 0) continue;
    pot += (long double)(plan.wx[i]) * u[i] * m1[i];
    mass += (long double)(plan.wx[i]) * m1[i];
  }
  for (Index j = 0; j < m2.size(); ++j)
    if (m2[j] != 0) pot += (long double)(plan.wy[j]) * v[j] * m2[j];
  pot += (long double)shift * mass;
  return Scalar(pot / eps - mass + (long double)kernel_mass_value);
}

template <class Scalar>
void check_finite(const Vector<Scalar>& v, int it, const char* what) {
  if (!v.allFinite())
    throw solver_error(std::string("non-finite ") + what + " at iteration " + std::to_string(it) +
                       "; the problem may be infeasible or eps too small for the plain solver");
}

// log of the implied scaling a~ exp(u/eps), elementwise; a~ = 0 maps to -inf.
template <class Scalar>
Vector<Scalar> implied_log(const Vector<Scalar>& tilde, const Vector<Scalar>& upot, Scalar eps) {
  Vector<Scalar> out(tilde.size());
  for (Index i = 0; i < tilde.size(); ++i) out[i] = std::log(tilde[i]) + upot[i] / eps;
  return out;
}

}  // namespace detail

/// Scaling factors and iteration counters of the plain loop, without the
/// plan; this is what large separable-kernel problems consume.
template <class Scalar>
struct ScalingFactors {
  Vector<Scalar> a, b;
  std::vector<Scalar> gap_history;
  std::vector<int> gap_iterations;
  int iterations = 0;
  bool converged = false;
};

/// Alternating proxdiv iterations on the plain (unstabilized) kernel.
/// Refuses eps below 1e-5, where absorbed potentials are required.
template <class Scalar>
ScalingFactors<Scalar> plain_scaling_factors(const DivergenceSpec<Scalar>& F1,
                                             const DivergenceSpec<Scalar>& F2,
                                             const Kernel<Scalar>& K,
                                             const DiscreteSpace<Scalar>& X,
                                             const DiscreteSpace<Scalar>& Y, Scalar eps,
                                             const SolveOptions<Scalar>& opts = {}) {
  if (eps < Scalar(1e-5))
    throw std::invalid_argument(
        "solve_plain: eps below 1e-5 overflows the plain scalings; use solve_stabilized");
  const Index I = X.size(), J = Y.size();
  if (K.rows() != I || K.cols() != J || F1.reference.size() != I || F2.reference.size() != J)
    throw std::invalid_argument("solve_plain: inconsistent dimensions");
  const Vector<Scalar>&wx = X.weights, &wy = Y.weights;
  const Vector<Scalar> zero_u = Vector<Scalar>::Zero(I), zero_v = Vector<Scalar>::Zero(J);

  const bool record_gap = opts.gap_stride > 0 || opts.gap_tol > 0;
  const Scalar k_mass = record_gap ? detail::kernel_mass(K, wx, wy) : Scalar(0);

  ScalingFactors<Scalar> res;
  Vector<Scalar>&a = res.a, &b = res.b;
  a = Vector<Scalar>::Ones(I);
  b = Vector<Scalar>::Ones(J);
  Vector<Scalar> prev_log_a, prev_log_b;
  for (int it = 1; it <= opts.max_iter; ++it) {
    res.iterations = it;
    a = proxdiv(F1, kernel_apply(K, b, wy), zero_u, eps);
    detail::check_finite(a, it, "scaling a");
    const Vector<Scalar> s2 = kernel_apply_transpose(K, a, wx);
    b = proxdiv(F2, s2, zero_v, eps);
    detail::check_finite(b, it, "scaling b");

    const Vector<Scalar> log_a = a.array().log(), log_b = b.array().log();
    if (opts.on_sweep) opts.on_sweep(it, log_a, log_b);

    if (record_gap && (opts.gap_stride <= 0 || it % opts.gap_stride == 0)) {
      const Vector<Scalar> m1 = a.cwiseProduct(kernel_apply(K, b, wy));
      const Vector<Scalar> m2 = b.cwiseProduct(s2);
      const Scalar gap = detail::sweep_gap(F1, F2, m1, m2, (eps * log_a).eval(),
                                           (eps * log_b).eval(), wx, wy, eps, k_mass);
      res.gap_history.push_back(gap);
      res.gap_iterations.push_back(it);
      if (opts.gap_tol > 0 && gap <= opts.gap_tol) {
        res.converged = true;
        break;
      }
    }
    if (prev_log_a.size() && opts.tol > 0) {
      const Scalar delta = detail::weighted_log_change(prev_log_a, log_a, wx) +
                           detail::weighted_log_change(prev_log_b, log_b, wy);
      if (delta < opts.tol) {
        res.converged = true;
        break;
      }
    }
    prev_log_a = log_a;
    prev_log_b = log_b;
  }
  return res;
}

template <class Scalar>
SolveReport<Scalar> solve_plain(const DivergenceSpec<Scalar>& F1, const DivergenceSpec<Scalar>& F2,
                                const Kernel<Scalar>& K, const DiscreteSpace<Scalar>& X,
                                const DiscreteSpace<Scalar>& Y, Scalar eps,
                                const SolveOptions<Scalar>& opts = {}) {
  ScalingFactors<Scalar> f = plain_scaling_factors(F1, F2, K, X, Y, eps, opts);
  SolveReport<Scalar> report;
  report.iterations = f.iterations;
  report.converged = f.converged;
  report.gap_history = std::move(f.gap_history);
  report.gap_iterations = std::move(f.gap_iterations);
  const Matrix<Scalar> dense = kernel_to_dense(K);
  report.plan.density = f.a.asDiagonal() * dense * f.b.asDiagonal();
  report.plan.wx = X.weights;
  report.plan.wy = Y.weights;
  report.u = eps * f.a.array().log();
  report.v = eps * f.b.array().log();
  report.epsilon = eps;
  report.primal = penalized_primal_value(report.plan, F1, F2, K, eps);
  report.dual = dual_value(report.u, report.v, F1, F2, K, X.weights, Y.weights, eps);
  return report;
}

/// Log-domain stabilized scaling iterations: extreme factors are absorbed
/// into additive potentials and the kernel is rebuilt, which admits very
/// small eps.  Honors the geometric eps schedule when enabled.
template <class Scalar>
SolveReport<Scalar> solve_stabilized(const MarginalOperator<Scalar>& F1,
                                     const MarginalOperator<Scalar>& F2,
                                     const CostMatrix<Scalar>& C, const DiscreteSpace<Scalar>& X,
                                     const DiscreteSpace<Scalar>& Y, Scalar eps_target,
                                     const SolveOptions<Scalar>& opts = {}) {
  if (!C.has_dense()) throw std::invalid_argument("solve_stabilized: requires a dense cost");
  const Index I = X.size(), J = Y.size();
  if (C.dense.rows() != I || C.dense.cols() != J)
    throw std::invalid_argument("solve_stabilized: inconsistent dimensions");
  const bool record_gap = opts.gap_stride > 0 || opts.gap_tol > 0;
  if (record_gap && (!F1.spec || !F2.spec))
    throw std::invalid_argument("solve_stabilized: gap recording needs divergence-backed operators");

  const Vector<Scalar>&wx = X.weights, &wy = Y.weights;
  const EpsilonSchedule<Scalar> schedule =
      opts.use_schedule ? EpsilonSchedule<Scalar>(opts.schedule_epsilon0, eps_target,
                                                  opts.schedule_divisions, opts.schedule_every)
                        : EpsilonSchedule<Scalar>::constant(eps_target);

  ScalingState<Scalar> st;
  st.epsilon = schedule.at(1);
  st.u = Vector<Scalar>::Zero(I);
  st.v = Vector<Scalar>::Zero(J);
  st.a_tilde = Vector<Scalar>::Ones(I);
  st.b_tilde = Vector<Scalar>::Ones(J);
  st.kernel = stabilized_kernel(C, st.u, st.v, st.epsilon);
  Scalar k_mass = record_gap ? detail::kernel_mass(gibbs_kernel(C, st.epsilon), wx, wy) : Scalar(0);

  SolveReport<Scalar> report;
  Vector<Scalar> prev_log_a, prev_log_b;
  Scalar prev_eps = st.epsilon;
  for (int it = 1; it <= opts.max_iter; ++it) {
    st.iteration = it;
    report.iterations = it;
    st.a_tilde = F1.apply(kernel_apply(st.kernel, st.b_tilde, wy), st.u, st.epsilon);
    detail::check_finite(st.a_tilde, it, "stabilized scaling a (overflow despite absorption)");
    const Vector<Scalar> s2 = kernel_apply_transpose(st.kernel, st.a_tilde, wx);
    st.b_tilde = F2.apply(s2, st.v, st.epsilon);
    detail::check_finite(st.b_tilde, it, "stabilized scaling b (overflow despite absorption)");

    const Vector<Scalar> log_a = detail::implied_log(st.a_tilde, st.u, st.epsilon);
    const Vector<Scalar> log_b = detail::implied_log(st.b_tilde, st.v, st.epsilon);
    if (opts.on_sweep) opts.on_sweep(it, log_a, log_b);

    if (record_gap && (opts.gap_stride <= 0 || it % opts.gap_stride == 0)) {
      const Vector<Scalar> m1 =
          st.a_tilde.cwiseProduct(kernel_apply(st.kernel, st.b_tilde, wy));
      const Vector<Scalar> m2 = st.b_tilde.cwiseProduct(s2);
      const Scalar gap =
          detail::sweep_gap(*F1.spec, *F2.spec, m1, m2, (st.epsilon * log_a).eval(),
                            (st.epsilon * log_b).eval(), wx, wy, st.epsilon, k_mass);
      report.gap_history.push_back(gap);
      report.gap_iterations.push_back(it);
      if (opts.gap_tol > 0 && gap <= opts.gap_tol) {
        report.converged = true;
        break;
      }
    }

    const bool division = schedule.division_at(it);
    bool absorb = division;
    if (!absorb && opts.absorb_every > 0 && it % opts.absorb_every == 0)
      absorb = detail::max_abs(st.a_tilde.array().log().matrix().eval()) > opts.absorb_threshold ||
               detail::max_abs(st.b_tilde.array().log().matrix().eval()) > opts.absorb_threshold;
    if (absorb) {
      st.u += st.epsilon * st.a_tilde.array().log().matrix();
      st.v += st.epsilon * st.b_tilde.array().log().matrix();
      if (division) {
        st.epsilon = schedule.at(it + 1);
        if (record_gap) k_mass = detail::kernel_mass(gibbs_kernel(C, st.epsilon), wx, wy);
      }
      st.kernel = stabilized_kernel(C, st.u, st.v, st.epsilon);
      st.a_tilde.setOnes();
      st.b_tilde.setOnes();
    }

    if (opts.tol > 0 && prev_log_a.size() && prev_eps == st.epsilon &&
        st.epsilon == schedule.target() && !division) {
      const Scalar delta = detail::weighted_log_change(prev_log_a, log_a, wx) +
                           detail::weighted_log_change(prev_log_b, log_b, wy);
      if (delta < opts.tol) {
        report.converged = true;
        break;
      }
    }
    if (division) {
      // implied scalings change meaning when eps does; restart the comparison
      prev_log_a.resize(0);
      prev_log_b.resize(0);
    } else {
      prev_log_a = log_a;
      prev_log_b = log_b;
    }
    prev_eps = st.epsilon;
  }

  report.plan.density = st.a_tilde.asDiagonal() * st.kernel.dense * st.b_tilde.asDiagonal();
  report.plan.wx = wx;
  report.plan.wy = wy;
  report.u = st.u + (st.epsilon * st.a_tilde.array().log()).matrix();
  report.v = st.v + (st.epsilon * st.b_tilde.array().log()).matrix();
  report.epsilon = st.epsilon;
  if (F1.spec && F2.spec) {
    const Kernel<Scalar> plainK = gibbs_kernel(C, st.epsilon);
    const Scalar kl = detail::plan_entropy_identity(report.plan, report.u, report.v, Scalar(0),
                                                    st.epsilon, detail::kernel_mass(plainK, wx, wy));
    report.primal =
        penalized_divergence_value(*F1.spec, report.plan.marginal_x(), wx, st.epsilon) +
        penalized_divergence_value(*F2.spec, report.plan.marginal_y(), wy, st.epsilon) +
        st.epsilon * kl;
    report.dual = dual_value(report.u, report.v, *F1.spec, *F2.spec, plainK, wx, wy, st.epsilon);
  }
  return report;
}

template <class Scalar>
SolveReport<Scalar> solve_stabilized(const DivergenceSpec<Scalar>& F1,
                                     const DivergenceSpec<Scalar>& F2,
                                     const CostMatrix<Scalar>& C, const DiscreteSpace<Scalar>& X,
                                     const DiscreteSpace<Scalar>& Y, Scalar eps_target,
                                     const SolveOptions<Scalar>& opts = {}) {
  return solve_stabilized(MarginalOperator<Scalar>(F1), MarginalOperator<Scalar>(F2), C, X, Y,
                          eps_target, opts);
}

namespace detail {

// One coupling of the synchronized multi-coupling loop.
template <class Scalar>
struct Coupling {
  const CostMatrix<Scalar>* cost = nullptr;
  Scalar eps_scale = 1;  // per-coupling multiplier on the base eps
  MarginalOperator<Scalar> f1;
};

// Shared second-marginal update: from the stabilized marginals S (n x J) and
// normalized potentials V (exp(-V/eps) recovers the true inputs) produce the
// scaling factors, optionally reporting the pointwise minimizer h.
template <class Scalar>
using SharedStep = std::function<Matrix<Scalar>(const Matrix<Scalar>&, const Matrix<Scalar>&,
                                                Scalar, Vector<Scalar>*)>;

template <class Scalar>
struct MultiResult {
  std::vector<Plan<Scalar>> plans;
  Vector<Scalar> h;
  std::vector<Vector<Scalar>> u, v;
  int iterations = 0;
  bool converged = false;
};

// Scaling iterations over n couplings whose b-side update is coupled through
// a shared pointwise problem.  Absorption and the eps schedule are
// synchronized across couplings.
template <class Scalar>
MultiResult<Scalar> multi_coupling_loop(const std::vector<Coupling<Scalar>>& cps,
                                        const SharedStep<Scalar>& shared,
                                        const DiscreteSpace<Scalar>& X,
                                        const DiscreteSpace<Scalar>& Y, Scalar eps_target,
                                        const SolveOptions<Scalar>& opts) {
  const int n = static_cast<int>(cps.size());
  const Index I = X.size(), J = Y.size();
  const Vector<Scalar>&wx = X.weights, &wy = Y.weights;
  const EpsilonSchedule<Scalar> schedule =
      opts.use_schedule ? EpsilonSchedule<Scalar>(opts.schedule_epsilon0, eps_target,
                                                  opts.schedule_divisions, opts.schedule_every)
                        : EpsilonSchedule<Scalar>::constant(eps_target);
  Scalar eps = schedule.at(1);

  std::vector<Vector<Scalar>> u(n, Vector<Scalar>::Zero(I)), v(n, Vector<Scalar>::Zero(J));
  std::vector<Vector<Scalar>> at(n, Vector<Scalar>::Ones(I)), bt(n, Vector<Scalar>::Ones(J));
  std::vector<Kernel<Scalar>> kt(n);
  for (int k = 0; k < n; ++k) {
    if (!cps[k].cost->has_dense())
      throw std::invalid_argument("multi_coupling_loop: requires dense costs");
    kt[k] = stabilized_kernel(*cps[k].cost, u[k], v[k], cps[k].eps_scale * eps);
  }

  MultiResult<Scalar> res;
  Matrix<Scalar> S(n, J), V(n, J), B;
  std::vector<Vector<Scalar>> prev_la(n), prev_lb(n);
  bool prev_valid = false;
  Scalar prev_eps = eps;
  for (int it = 1; it <= opts.max_iter; ++it) {
    res.iterations = it;
    const Scalar eps_used = eps;
    for (int k = 0; k < n; ++k) {
      const Scalar ek = cps[k].eps_scale * eps_used;
      at[k] = cps[k].f1.apply(kernel_apply(kt[k], bt[k], wy), u[k], ek);
      check_finite(at[k], it, "multi-coupling scaling a");
      S.row(k) = kernel_apply_transpose(kt[k], at[k], wx).transpose();
      V.row(k) = (v[k] / cps[k].eps_scale).transpose();
    }
    B = shared(S, V, eps_used, &res.h);
    for (int k = 0; k < n; ++k) {
      bt[k] = B.row(k).transpose();
      check_finite(bt[k], it, "multi-coupling scaling b");
    }

    const bool division = schedule.division_at(it);
    bool absorb = division;
    if (!absorb && opts.absorb_every > 0 && it % opts.absorb_every == 0) {
      for (int k = 0; k < n && !absorb; ++k)
        absorb = max_abs(at[k].array().log().matrix().eval()) > opts.absorb_threshold ||
                 max_abs(bt[k].array().log().matrix().eval()) > opts.absorb_threshold;
    }

    std::vector<Vector<Scalar>> la(n), lb(n);
    for (int k = 0; k < n; ++k) {
      const Scalar ek = cps[k].eps_scale * eps_used;
      la[k] = implied_log(at[k], u[k], ek);
      lb[k] = implied_log(bt[k], v[k], ek);
    }

    if (absorb) {
      if (division) eps = schedule.at(it + 1);
      for (int k = 0; k < n; ++k) {
        const Scalar ek_used = cps[k].eps_scale * eps_used;
        u[k] += ek_used * at[k].array().log().matrix();
        v[k] += ek_used * bt[k].array().log().matrix();
        kt[k] = stabilized_kernel(*cps[k].cost, u[k], v[k], cps[k].eps_scale * eps);
        at[k].setOnes();
        bt[k].setOnes();
      }
    }

    if (opts.tol > 0 && prev_valid && prev_eps == eps_used && eps_used == schedule.target() &&
        !division) {
      Scalar delta = 0;
      for (int k = 0; k < n; ++k)
        delta += weighted_log_change(prev_la[k], la[k], wx) +
                 weighted_log_change(prev_lb[k], lb[k], wy);
      if (delta < opts.tol) {
        res.converged = true;
        break;
      }
    }
    prev_la = std::move(la);
    prev_lb = std::move(lb);
    prev_valid = !division;
    prev_eps = eps;
  }

  res.plans.resize(n);
  res.u.resize(n);
  res.v.resize(n);
  for (int k = 0; k < n; ++k) {
    res.plans[k].density = at[k].asDiagonal() * kt[k].dense * bt[k].asDiagonal();
    res.plans[k].wx = wx;
    res.plans[k].wy = wy;
    const Scalar ek = cps[k].eps_scale * eps;
    res.u[k] = u[k] + (ek * at[k].array().log()).matrix();
    res.v[k] = v[k] + (ek * bt[k].array().log()).matrix();
  }
  return res;
}

}  // namespace detail

}  // namespace uot
