#pragma once

#include "uot/scaling.hpp"

namespace uot {

/// Scaling over arbitrary surjective maps t_k : Z -> X_k in place of the two
/// product-space projections.  The coupling lives on Z as a vector.
template <class Scalar>
struct PushforwardProblem {
  Vector<Scalar> kernel;  // K on Z
  Vector<Scalar> dz;      // reference weights on Z
  std::vector<Eigen::VectorXi> maps;           // t_k, 0-based indices into X_k
  std::vector<Vector<Scalar>> weights;         // dx_k per factor space
  std::vector<DivergenceSpec<Scalar>> divergences;  // F_k
  Scalar epsilon = 1e-3;

  Index factors() const { return static_cast<Index>(maps.size()); }

  void validate() const {
    const Index L = dz.size();
    if (kernel.size() != L) throw std::invalid_argument("PushforwardProblem: kernel length");
    if (maps.empty() || maps.size() != weights.size() || maps.size() != divergences.size())
      throw std::invalid_argument("PushforwardProblem: need a map, weights and divergence per factor");
    for (size_t k = 0; k < maps.size(); ++k) {
      if (maps[k].size() != L) throw std::invalid_argument("PushforwardProblem: map length");
      const Index nk = weights[k].size();
      if (divergences[k].reference.size() != nk)
        throw std::invalid_argument("PushforwardProblem: divergence reference length");
      std::vector<bool> hit(static_cast<size_t>(nk), false);
      for (Index l = 0; l < L; ++l) {
        const int i = maps[k][l];
        if (i < 0 || i >= nk) throw std::invalid_argument("PushforwardProblem: map index out of range");
        hit[static_cast<size_t>(i)] = true;
      }
      for (bool h : hit)
        if (!h) throw std::invalid_argument("PushforwardProblem: map must be surjective");
      for (Index i = 0; i < nk; ++i)
        if (!(weights[k][i] > 0))
          throw std::invalid_argument("PushforwardProblem: factor weights must be positive");
    }
    if (!(epsilon > 0)) throw std::invalid_argument("PushforwardProblem: epsilon must be positive");
  }
};

using PushforwardProblemXd = PushforwardProblem<double>;

/// t_# R: grouped weighted sums (sum over the preimage of each index, scaled
/// by dz and divided by the factor weights).
template <class Scalar>
Vector<Scalar> pushforward(const Eigen::VectorXi& map, const Vector<Scalar>& R,
                           const Vector<Scalar>& dz, const Vector<Scalar>& dxk) {
  if (map.size() != R.size() || map.size() != dz.size())
    throw std::invalid_argument("pushforward: length mismatch");
  Vector<Scalar> out = Vector<Scalar>::Zero(dxk.size());
  for (Index l = 0; l < map.size(); ++l) {
    const int i = map[l];
    if (i < 0 || i >= dxk.size()) throw std::invalid_argument("pushforward: index out of range");
    out[i] += R[l] * dz[l];
  }
  return out.cwiseQuotient(dxk);
}

/// The k-th marginalized operator: pushforward of the kernel times the
/// product of the other factors' scalings.
template <class Scalar>
Vector<Scalar> gamma_k(const PushforwardProblem<Scalar>& prob, Index k,
                       const std::vector<Vector<Scalar>>& scalings) {
  const Index L = prob.dz.size();
  Vector<Scalar> out = Vector<Scalar>::Zero(prob.weights[k].size());
  for (Index l = 0; l < L; ++l) {
    Scalar prod = prob.kernel[l] * prob.dz[l];
    for (Index n = 0; n < prob.factors(); ++n) {
      if (n == k) continue;
      prod *= scalings[n][prob.maps[n][l]];
    }
    out[prob.maps[k][l]] += prod;
  }
  return out.cwiseQuotient(prob.weights[k]);
}

template <class Scalar>
struct GeneralizedResult {
  Vector<Scalar> coupling;  // R on Z
  std::vector<Vector<Scalar>> scalings;
  int iterations = 0;
  bool converged = false;
};

/// Cyclic proxdiv updates over the factor scalings (plain form: the paper
/// gives no stabilized variant of this generalization).
template <class Scalar>
GeneralizedResult<Scalar> solve_generalized(const PushforwardProblem<Scalar>& prob,
                                            const SolveOptions<Scalar>& opts = {}) {
  prob.validate();
  const Index N = prob.factors();
  std::vector<Vector<Scalar>> a(static_cast<size_t>(N));
  for (Index k = 0; k < N; ++k) a[k] = Vector<Scalar>::Ones(prob.weights[k].size());
  GeneralizedResult<Scalar> res;
  std::vector<Vector<Scalar>> prev_log(static_cast<size_t>(N));
  bool prev_valid = false;
  for (int it = 1; it <= opts.max_iter; ++it) {
    res.iterations = it;
    for (Index k = 0; k < N; ++k) {
      a[k] = proxdiv(prob.divergences[k], gamma_k(prob, k, a), prob.epsilon);
      detail::check_finite(a[k], it, "generalized scaling");
    }
    Scalar delta = 0;
    std::vector<Vector<Scalar>> logs(static_cast<size_t>(N));
    for (Index k = 0; k < N; ++k) {
      logs[k] = a[k].array().log();
      if (prev_valid)
        delta += detail::weighted_log_change(prev_log[k], logs[k], prob.weights[k]);
    }
    if (prev_valid && opts.tol > 0 && delta < opts.tol) {
      res.converged = true;
      break;
    }
    prev_log = std::move(logs);
    prev_valid = true;
  }
  res.coupling = prob.kernel;
  for (Index l = 0; l < prob.dz.size(); ++l)
    for (Index k = 0; k < N; ++k) res.coupling[l] *= a[k][prob.maps[k][l]];
  res.scalings = std::move(a);
  return res;
}

/// Product-space problem with an additional divergence F3 on the total mass:
/// a three-block cycle over (a, b, z).  The mass factor is stabilized exactly
/// like the marginal scalings, with its own absorbed potential w inside the
/// kernel, so the constraint works at very small eps.
template <class Scalar>
SolveReport<Scalar> solve_with_mass(const DivergenceSpec<Scalar>& F1,
                                    const DivergenceSpec<Scalar>& F2,
                                    const DivergenceSpec<Scalar>& F3,
                                    const CostMatrix<Scalar>& C, const DiscreteSpace<Scalar>& X,
                                    const DiscreteSpace<Scalar>& Y, Scalar eps_target,
                                    const SolveOptions<Scalar>& opts = {}) {
  if (!C.has_dense()) throw std::invalid_argument("solve_with_mass: requires a dense cost");
  if (F3.reference.size() != 1)
    throw std::invalid_argument("solve_with_mass: F3 must act on the scalar total mass");
  const Index I = X.size(), J = Y.size();
  const Vector<Scalar>&wx = X.weights, &wy = Y.weights;
  const Vector<Scalar> one_w = Vector<Scalar>::Ones(1);
  const EpsilonSchedule<Scalar> schedule =
      opts.use_schedule ? EpsilonSchedule<Scalar>(opts.schedule_epsilon0, eps_target,
                                                  opts.schedule_divisions, opts.schedule_every)
                        : EpsilonSchedule<Scalar>::constant(eps_target);

  Scalar eps = schedule.at(1);
  Vector<Scalar> u = Vector<Scalar>::Zero(I), v = Vector<Scalar>::Zero(J);
  Scalar w = 0;  // absorbed potential of the mass factor
  Vector<Scalar> at = Vector<Scalar>::Ones(I), bt = Vector<Scalar>::Ones(J);
  Scalar zt = 1;
  // kernel exponent carries all three potentials: (u_i + v_j + w - C_ij)/eps
  auto rebuild = [&] {
    return stabilized_kernel(C, (u.array() + w).matrix().eval(), v, eps);
  };
  Kernel<Scalar> kt = rebuild();

  SolveReport<Scalar> report;
  Vector<Scalar> prev_la, prev_lb;
  Scalar prev_lz = 0, prev_eps = eps;
  bool prev_valid = false;
  for (int it = 1; it <= opts.max_iter; ++it) {
    report.iterations = it;
    const Scalar z_shift = eps * std::log(zt);
    at = proxdiv(F1, kernel_apply(kt, bt, wy), (u.array() - z_shift).matrix().eval(), eps) / zt;
    detail::check_finite(at, it, "mass-constrained scaling a (overflow despite absorption)");
    const Vector<Scalar> s2 = kernel_apply_transpose(kt, at, wx);
    bt = proxdiv(F2, s2, (v.array() - z_shift).matrix().eval(), eps) / zt;
    detail::check_finite(bt, it, "mass-constrained scaling b (overflow despite absorption)");
    const Scalar sigma = wx.cwiseProduct(at).dot(kt.dense * wy.cwiseProduct(bt));
    const Vector<Scalar> svec = Vector<Scalar>::Constant(1, sigma);
    const Vector<Scalar> wvec = Vector<Scalar>::Constant(1, w);
    zt = proxdiv(F3, svec, wvec, eps)[0];
    if (!std::isfinite(zt))
      throw solver_error("solve_with_mass: non-finite mass scaling at iteration " +
                         std::to_string(it));

    const bool division = schedule.division_at(it);
    bool absorb = division;
    if (!absorb && opts.absorb_every > 0 && it % opts.absorb_every == 0)
      absorb = detail::max_abs(at.array().log().matrix().eval()) > opts.absorb_threshold ||
               detail::max_abs(bt.array().log().matrix().eval()) > opts.absorb_threshold ||
               std::abs(std::log(zt)) > opts.absorb_threshold;

    const Vector<Scalar> la = detail::implied_log(at, u, eps);
    const Vector<Scalar> lb = detail::implied_log(bt, v, eps);
    const Scalar lz = std::log(zt) + w / eps;
    if (opts.on_sweep) opts.on_sweep(it, la, lb);

    if (absorb) {
      u += eps * at.array().log().matrix();
      v += eps * bt.array().log().matrix();
      w += eps * std::log(zt);
      if (division) eps = schedule.at(it + 1);
      kt = rebuild();
      at.setOnes();
      bt.setOnes();
      zt = 1;
    }

    if (opts.tol > 0 && prev_valid && prev_eps == eps && eps == schedule.target() && !division) {
      const Scalar delta = detail::weighted_log_change(prev_la, la, wx) +
                           detail::weighted_log_change(prev_lb, lb, wy) +
                           std::abs(prev_lz - lz);
      if (delta < opts.tol) {
        report.converged = true;
        break;
      }
    }
    prev_valid = !division;
    prev_la = la;
    prev_lb = lb;
    prev_lz = lz;
    prev_eps = eps;
  }

  report.plan.density = zt * (at.asDiagonal() * kt.dense * bt.asDiagonal());
  report.plan.wx = wx;
  report.plan.wy = wy;
  report.u = u + (eps * at.array().log()).matrix();
  report.v = v + (eps * bt.array().log()).matrix();
  report.epsilon = eps;
  // primal includes the mass term; the entropy uses the log-domain identity
  // with the mass potential as a uniform shift
  const Kernel<Scalar> plainK = gibbs_kernel(C, eps);
  const Vector<Scalar> mass_vec = Vector<Scalar>::Constant(1, report.plan.mass());
  const Scalar kl = detail::plan_entropy_identity(report.plan, report.u, report.v,
                                                  w + eps * std::log(zt), eps,
                                                  detail::kernel_mass(plainK, wx, wy));
  report.primal = penalized_divergence_value(F1, report.plan.marginal_x(), wx, eps) +
                  penalized_divergence_value(F2, report.plan.marginal_y(), wy, eps) + eps * kl +
                  penalized_divergence_value(F3, mass_vec, one_w, eps);
  return report;
}

}  // namespace uot
