#pragma once

#include "uot/barycenter.hpp"
#include "uot/scaling.hpp"

namespace uot {

/// Energy G of a time-discrete gradient flow step, together with the step
/// size tau.  The proxdiv of F2(s) = inf_p KL(s|p) + 2 tau G(p) (or of
/// 2 tau G directly for the plain kinds) has the closed forms below.
template <class Scalar>
struct FlowEnergy {
  enum class Kind { EntropyFit, Congestion, TumorGrowth, TwoSpecies };

  Kind kind = Kind::Congestion;
  Scalar tau = 1e-2;
  Scalar alpha = 0;           // growth incentive of the growth kinds
  Scalar weight = 1;          // EntropyFit multiplier on the relative entropy
  Vector<Scalar> reference;   // EntropyFit target density

  static FlowEnergy entropy_fit(Scalar tau, Vector<Scalar> p, Scalar weight = 1) {
    FlowEnergy e;
    e.kind = Kind::EntropyFit;
    e.tau = tau;
    e.weight = weight;
    e.reference = std::move(p);
    e.validate();
    return e;
  }
  static FlowEnergy congestion(Scalar tau) {
    FlowEnergy e;
    e.kind = Kind::Congestion;
    e.tau = tau;
    e.validate();
    return e;
  }
  static FlowEnergy tumor_growth(Scalar tau, Scalar alpha) {
    FlowEnergy e;
    e.kind = Kind::TumorGrowth;
    e.tau = tau;
    e.alpha = alpha;
    e.validate();
    return e;
  }
  static FlowEnergy two_species(Scalar tau, Scalar alpha) {
    FlowEnergy e;
    e.kind = Kind::TwoSpecies;
    e.tau = tau;
    e.alpha = alpha;
    e.validate();
    return e;
  }

  void validate() const {
    if (!(tau > 0)) throw std::invalid_argument("FlowEnergy: tau must be positive");
    if (kind == Kind::EntropyFit && !(weight > 0))
      throw std::invalid_argument("FlowEnergy: weight must be positive");
    if (kind == Kind::TumorGrowth || kind == Kind::TwoSpecies) {
      if (!(alpha > 0)) throw std::invalid_argument("FlowEnergy: alpha must be positive");
      if (!(2 * tau * alpha < 1))
        throw std::invalid_argument("FlowEnergy: need 2*tau*alpha < 1");
    }
  }
};

using FlowEnergyXd = FlowEnergy<double>;

namespace detail {

template <class Scalar>
Scalar tumor_factor_point(Scalar s, Scalar u, Scalar eps, Scalar log_ceiling) {
  // branch test in the scaled form eps log s <= u + (1+eps) log(1 - 2 tau alpha)
  const Scalar ls = std::log(s);
  if (eps * ls <= u + (1 + eps) * log_ceiling)
    return safe_exp(-(u + log_ceiling) / eps);
  return safe_exp(-(ls + u) / (1 + eps));
}

}  // namespace detail

/// Scaling factors of the flow energy's marginal functional (all kinds except
/// TwoSpecies, whose two species are coupled).
template <class Scalar>
Vector<Scalar> flow_proxdiv(const FlowEnergy<Scalar>& e, const Vector<Scalar>& s,
                            const Vector<Scalar>& u, Scalar eps) {
  if (s.size() != u.size()) throw std::invalid_argument("flow_proxdiv: length mismatch");
  e.validate();
  Vector<Scalar> out(s.size());
  switch (e.kind) {
    case FlowEnergy<Scalar>::Kind::EntropyFit: {
      if (e.reference.size() != s.size())
        throw std::invalid_argument("flow_proxdiv: reference length mismatch");
      const auto d = DivergenceSpec<Scalar>::kl(2 * e.tau * e.weight, e.reference);
      return proxdiv(d, s, u, eps);
    }
    case FlowEnergy<Scalar>::Kind::Congestion:
      for (Index i = 0; i < s.size(); ++i)
        out[i] = s[i] == 0 ? Scalar(0)
                           : std::min(1 / s[i], detail::safe_exp(-u[i] / eps));
      return out;
    case FlowEnergy<Scalar>::Kind::TumorGrowth: {
      const Scalar lc = std::log1p(-2 * e.tau * e.alpha);
      for (Index i = 0; i < s.size(); ++i)
        out[i] = s[i] == 0 ? Scalar(0) : detail::tumor_factor_point(s[i], u[i], eps, lc);
      return out;
    }
    case FlowEnergy<Scalar>::Kind::TwoSpecies:
      throw std::invalid_argument("flow_proxdiv: TwoSpecies couples both species; use the pair form");
  }
  return out;
}

/// Joint factors of the two-species energy: (e^{-ua/eps}, e^{-ub/eps})/beta
/// with beta = max{(xa+xb)^{1/(1+eps)}, (1-2 tau alpha)^{1/eps}} evaluated on
/// the stabilized inputs x = s e^{-u/eps} (log domain throughout).
template <class Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> flow_proxdiv_two_species(
    const FlowEnergy<Scalar>& e, const Vector<Scalar>& sa, const Vector<Scalar>& sb,
    const Vector<Scalar>& ua, const Vector<Scalar>& ub, Scalar eps) {
  if (e.kind != FlowEnergy<Scalar>::Kind::TwoSpecies)
    throw std::invalid_argument("flow_proxdiv_two_species: wrong energy kind");
  e.validate();
  const Index n = sa.size();
  if (sb.size() != n || ua.size() != n || ub.size() != n)
    throw std::invalid_argument("flow_proxdiv_two_species: length mismatch");
  const Scalar lc = std::log1p(-2 * e.tau * e.alpha);
  Vector<Scalar> fa(n), fb(n);
  for (Index i = 0; i < n; ++i) {
    const Scalar la = std::log(sa[i]) - ua[i] / eps;
    const Scalar lb = std::log(sb[i]) - ub[i] / eps;
    const Scalar lbeta = std::max(detail::log_sum_exp(la, lb) / (1 + eps), lc / eps);
    fa[i] = detail::safe_exp(-ua[i] / eps - lbeta);
    fb[i] = detail::safe_exp(-ub[i] / eps - lbeta);
  }
  return {std::move(fa), std::move(fb)};
}

/// Recovers the next flow density from the converged second marginal.
template <class Scalar>
Vector<Scalar> flow_recover_next(const FlowEnergy<Scalar>& e, const Vector<Scalar>& marginal) {
  switch (e.kind) {
    case FlowEnergy<Scalar>::Kind::EntropyFit: return marginal;
    case FlowEnergy<Scalar>::Kind::Congestion: return marginal.cwiseMin(Scalar(1));
    case FlowEnergy<Scalar>::Kind::TumorGrowth:
      return (marginal / (1 - 2 * e.tau * e.alpha)).cwiseMin(Scalar(1));
    case FlowEnergy<Scalar>::Kind::TwoSpecies:
      throw std::invalid_argument("flow_recover_next: TwoSpecies needs both marginals");
  }
  return marginal;
}

template <class Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> flow_recover_next_two_species(
    const FlowEnergy<Scalar>& e, const Vector<Scalar>& ma, const Vector<Scalar>& mb, Scalar eps) {
  if (e.kind != FlowEnergy<Scalar>::Kind::TwoSpecies)
    throw std::invalid_argument("flow_recover_next_two_species: wrong energy kind");
  const Scalar lc = std::log1p(-2 * e.tau * e.alpha);
  Vector<Scalar> pa(ma.size()), pb(mb.size());
  for (Index i = 0; i < ma.size(); ++i) {
    const Scalar lsum = detail::log_sum_exp(std::log(ma[i]), std::log(mb[i]));
    const Scalar lbeta = std::max(lsum / (1 + eps), lc / eps);
    const Scalar beta = detail::safe_exp(lbeta);
    pa[i] = ma[i] == 0 ? Scalar(0) : ma[i] / beta;
    pb[i] = mb[i] == 0 ? Scalar(0) : mb[i] / beta;
  }
  return {std::move(pa), std::move(pb)};
}

enum class FlowCost { Quadratic, WF };

template <class Scalar>
struct FlowTrajectory {
  std::vector<Vector<Scalar>> densities;    // one entry per time step, starting at the initial one
  std::vector<Vector<Scalar>> densities_b;  // second species, TwoSpecies only
  std::vector<int> step_iterations;
  std::vector<bool> step_converged;
};

using FlowTrajectoryXd = FlowTrajectory<double>;

namespace detail {

template <class Scalar>
DivergenceSpec<Scalar> flow_f1(FlowCost cost, const Vector<Scalar>& mu) {
  // quadratic cost pins the previous iterate; the transport-with-growth cost
  // relaxes it by a unit-weight KL
  return cost == FlowCost::Quadratic ? DivergenceSpec<Scalar>::equality(mu)
                                     : DivergenceSpec<Scalar>::kl(Scalar(1), mu);
}

}  // namespace detail

/// JKO stepping: one stabilized transport solve per step, the energy's
/// marginal functional on the second marginal, recovery feeding the next F1
/// reference.  For the WF cost the default cutoff pi/2 reproduces the
/// un-rescaled cost.
template <class Scalar>
FlowTrajectory<Scalar> run_flow(const DiscreteSpace<Scalar>& X, const Vector<Scalar>& initial,
                                const FlowEnergy<Scalar>& e, FlowCost cost_kind, int steps,
                                Scalar eps, const SolveOptions<Scalar>& opts = {},
                                Scalar wf_cutoff = Scalar(M_PI) / 2) {
  if (e.kind == FlowEnergy<Scalar>::Kind::TwoSpecies)
    throw std::invalid_argument("run_flow: TwoSpecies needs the two-density overload");
  e.validate();
  if (initial.size() != X.size()) throw std::invalid_argument("run_flow: density length mismatch");
  const CostMatrix<Scalar> C = cost_kind == FlowCost::Quadratic
                                   ? build_cost_quadratic(X, X)
                                   : build_cost_wf(X, X, wf_cutoff);
  FlowTrajectory<Scalar> traj;
  traj.densities.push_back(initial);
  Vector<Scalar> mu = initial;
  for (int step = 0; step < steps; ++step) {
    MarginalOperator<Scalar> F1(detail::flow_f1(cost_kind, mu));
    MarginalOperator<Scalar> F2;
    F2.apply = [&e](const Vector<Scalar>& s, const Vector<Scalar>& u, Scalar ee) {
      return flow_proxdiv(e, s, u, ee);
    };
    SolveReport<Scalar> rep;
    try {
      rep = solve_stabilized(F1, F2, C, X, X, eps, opts);
    } catch (const solver_error& err) {
      throw solver_error("flow step " + std::to_string(step) + ": " + err.what());
    }
    mu = flow_recover_next(e, rep.plan.marginal_y());
    traj.densities.push_back(mu);
    traj.step_iterations.push_back(rep.iterations);
    traj.step_converged.push_back(rep.converged);
  }
  return traj;
}

/// Two-species flow: two couplings whose second-marginal update is coupled
/// through the shared ceiling on the total density.
template <class Scalar>
FlowTrajectory<Scalar> run_flow(const DiscreteSpace<Scalar>& X, const Vector<Scalar>& initial_a,
                                const Vector<Scalar>& initial_b, const FlowEnergy<Scalar>& e,
                                FlowCost cost_kind, int steps, Scalar eps,
                                const SolveOptions<Scalar>& opts = {},
                                Scalar wf_cutoff = Scalar(M_PI) / 2) {
  if (e.kind != FlowEnergy<Scalar>::Kind::TwoSpecies)
    throw std::invalid_argument("run_flow: two-density overload is for the TwoSpecies energy");
  e.validate();
  if (initial_a.size() != X.size() || initial_b.size() != X.size())
    throw std::invalid_argument("run_flow: density length mismatch");
  const CostMatrix<Scalar> C = cost_kind == FlowCost::Quadratic
                                   ? build_cost_quadratic(X, X)
                                   : build_cost_wf(X, X, wf_cutoff);
  FlowTrajectory<Scalar> traj;
  traj.densities.push_back(initial_a);
  traj.densities_b.push_back(initial_b);
  Vector<Scalar> pa = initial_a, pb = initial_b;
  for (int step = 0; step < steps; ++step) {
    std::vector<detail::Coupling<Scalar>> cps(2);
    cps[0].cost = &C;
    cps[1].cost = &C;
    cps[0].f1 = MarginalOperator<Scalar>(detail::flow_f1(cost_kind, pa));
    cps[1].f1 = MarginalOperator<Scalar>(detail::flow_f1(cost_kind, pb));
    detail::SharedStep<Scalar> shared = [&e](const Matrix<Scalar>& S, const Matrix<Scalar>& V,
                                             Scalar ee, Vector<Scalar>*) {
      auto [fa, fb] = flow_proxdiv_two_species(e, S.row(0).transpose().eval(),
                                               S.row(1).transpose().eval(),
                                               V.row(0).transpose().eval(),
                                               V.row(1).transpose().eval(), ee);
      Matrix<Scalar> B(2, S.cols());
      B.row(0) = fa.transpose();
      B.row(1) = fb.transpose();
      return B;
    };
    detail::MultiResult<Scalar> res;
    try {
      res = detail::multi_coupling_loop(cps, shared, X, X, eps, opts);
    } catch (const solver_error& err) {
      throw solver_error("flow step " + std::to_string(step) + ": " + err.what());
    }
    std::tie(pa, pb) = flow_recover_next_two_species(e, res.plans[0].marginal_y(),
                                                     res.plans[1].marginal_y(), eps);
    traj.densities.push_back(pa);
    traj.densities_b.push_back(pb);
    traj.step_iterations.push_back(res.iterations);
    traj.step_converged.push_back(res.converged);
  }
  return traj;
}

}  // namespace uot
