#pragma once

#include "uot/barycenter.hpp"
#include "uot/extensions.hpp"
#include "uot/flows.hpp"
#include "uot/io.hpp"

#include <json.hpp>

#include <filesystem>
#include <random>
#include <set>

namespace uot {

// Config-driven experiment runner behind the CLI.  Configs are JSON with a
// fixed schema per problem kind; unknown keys are rejected.

namespace detail {

using json = nlohmann::json;

inline void require_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!obj.is_object()) throw config_error(where + ": expected an object");
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      throw config_error(where + ": unknown key '" + item.key() + "'");
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback) {
  return obj.contains(key) ? obj.at(key).get<T>() : fallback;
}

inline DiscreteSpace<double> parse_space(const json& j) {
  require_keys(j, {"points", "grid", "min", "max", "weights"}, "space");
  const std::string w = get_or<std::string>(j, "weights", "probability");
  const GridWeight gw = w == "unit" ? GridWeight::UnitMass : GridWeight::Probability;
  if (w != "unit" && w != "probability")
    throw config_error("space.weights must be 'probability' or 'unit'");
  if (j.contains("grid")) {
    const auto dims_in = j.at("grid").get<std::vector<Index>>();
    std::vector<double> lo(dims_in.size(), 0.0), hi(dims_in.size(), 1.0);
    if (j.contains("min")) lo = j.at("min").get<std::vector<double>>();
    if (j.contains("max")) hi = j.at("max").get<std::vector<double>>();
    return uniform_grid_space<double>(dims_in, lo, hi, gw);
  }
  if (!j.contains("points")) throw config_error("space: need 'points' or 'grid'");
  const Index n = j.at("points").get<Index>();
  return segment_space<double>(n, get_or<double>(j, "min", 0.0), get_or<double>(j, "max", 1.0), gw);
}

inline Eigen::VectorXd gaussian_mixture(const DiscreteSpace<double>& X,
                                        const std::vector<std::vector<double>>& centers,
                                        const std::vector<double>& sigmas,
                                        const std::vector<double>& masses) {
  if (centers.size() != sigmas.size() || centers.size() != masses.size())
    throw config_error("gaussians: centers, sigmas and masses must have equal length");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.size());
  for (size_t k = 0; k < centers.size(); ++k) {
    if (Index(centers[k].size()) != X.dim())
      throw config_error("gaussians: center dimension mismatch");
    Eigen::VectorXd bump(X.size());
    for (Index i = 0; i < X.size(); ++i) {
      double d2 = 0;
      for (Index c = 0; c < X.dim(); ++c) {
        const double d = X.points(i, c) - centers[k][static_cast<size_t>(c)];
        d2 += d * d;
      }
      bump[i] = std::exp(-d2 / (2 * sigmas[k] * sigmas[k]));
    }
    const double total = bump.dot(X.weights);
    if (total > 0) out += (masses[k] / total) * bump;
  }
  return out;
}

inline Eigen::VectorXd parse_density(const json& j, const DiscreteSpace<double>& X,
                                     unsigned seed) {
  require_keys(j, {"kind", "centers", "sigmas", "masses", "value", "path", "bumps", "mass"},
               "density");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussians") {
    return gaussian_mixture(X, j.at("centers").get<std::vector<std::vector<double>>>(),
                            j.at("sigmas").get<std::vector<double>>(),
                            j.at("masses").get<std::vector<double>>());
  }
  if (kind == "constant") {
    return Eigen::VectorXd::Constant(X.size(), j.at("value").get<double>());
  }
  if (kind == "csv") {
    const CsvTable t = read_csv(j.at("path").get<std::string>());
    if (t.columns.empty()) throw config_error("density csv has no columns");
    const auto& col = t.columns.back();
    if (Index(col.size()) != X.size())
      throw config_error("density csv length does not match the space");
    Eigen::VectorXd out(X.size());
    for (Index i = 0; i < X.size(); ++i) out[i] = col[static_cast<size_t>(i)];
    return out;
  }
  if (kind == "random_gaussians") {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unif(0.15, 0.85);
    std::uniform_real_distribution<double> width(0.02, 0.1);
    std::uniform_real_distribution<double> weight(0.2, 1.0);
    const int bumps = get_or<int>(j, "bumps", 3);
    std::vector<std::vector<double>> centers;
    std::vector<double> sigmas, masses;
    for (int k = 0; k < bumps; ++k) {
      std::vector<double> c(static_cast<size_t>(X.dim()));
      for (auto& x : c) x = unif(rng);
      centers.push_back(c);
      sigmas.push_back(width(rng));
      masses.push_back(weight(rng));
    }
    Eigen::VectorXd out = gaussian_mixture(X, centers, sigmas, masses);
    const double target = get_or<double>(j, "mass", 1.0);
    const double total = out.dot(X.weights);
    if (total > 0) out *= target / total;
    return out;
  }
  throw config_error("density.kind must be gaussians|constant|csv|random_gaussians");
}

inline DivergenceSpec<double> parse_divergence(const json& j, Eigen::VectorXd reference) {
  require_keys(j, {"kind", "lambda", "lower", "upper"}, "divergence");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "equality") return DivergenceSpec<double>::equality(std::move(reference));
  if (kind == "kl")
    return DivergenceSpec<double>::kl(get_or<double>(j, "lambda", 1.0), std::move(reference));
  if (kind == "tv")
    return DivergenceSpec<double>::tv(get_or<double>(j, "lambda", 1.0), std::move(reference));
  if (kind == "range")
    return DivergenceSpec<double>::range(get_or<double>(j, "lower", 0.0),
                                         get_or<double>(j, "upper", 1.0), std::move(reference));
  throw config_error("divergence.kind must be equality|kl|tv|range");
}

inline SharedDivergence<double> parse_shared(const json& j) {
  require_keys(j, {"kind", "lambda", "lower", "upper"}, "shared");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "equality") return SharedDivergence<double>::equality();
  if (kind == "kl") return SharedDivergence<double>::kl(get_or<double>(j, "lambda", 1.0));
  if (kind == "tv") return SharedDivergence<double>::tv(get_or<double>(j, "lambda", 1.0));
  if (kind == "range")
    return SharedDivergence<double>::range(get_or<double>(j, "lower", 0.0),
                                           get_or<double>(j, "upper", 1.0));
  throw config_error("shared.kind must be equality|kl|tv|range");
}

inline CostMatrix<double> parse_cost(const json& j, const DiscreteSpace<double>& X,
                                     const DiscreteSpace<double>& Y) {
  require_keys(j, {"kind", "cutoff"}, "cost");
  const std::string kind = get_or<std::string>(j, "kind", "quadratic");
  if (kind == "quadratic") return build_cost_quadratic(X, Y);
  if (kind == "wf") return build_cost_wf(X, Y, get_or<double>(j, "cutoff", M_PI / 2));
  throw config_error("cost.kind must be quadratic|wf");
}

inline SolveOptions<double> parse_options(const json& root) {
  SolveOptions<double> opts;
  if (root.contains("solver")) {
    const json& s = root.at("solver");
    require_keys(s,
                 {"max_iter", "tol", "gap_tol", "gap_stride", "absorb_threshold", "absorb_every",
                  "stabilized"},
                 "solver");
    opts.max_iter = get_or<int>(s, "max_iter", opts.max_iter);
    opts.tol = get_or<double>(s, "tol", opts.tol);
    opts.gap_tol = get_or<double>(s, "gap_tol", opts.gap_tol);
    opts.gap_stride = get_or<int>(s, "gap_stride", opts.gap_stride);
    opts.absorb_threshold = get_or<double>(s, "absorb_threshold", opts.absorb_threshold);
    opts.absorb_every = get_or<int>(s, "absorb_every", opts.absorb_every);
  }
  if (root.contains("schedule")) {
    const json& s = root.at("schedule");
    require_keys(s, {"epsilon0", "divisions", "every"}, "schedule");
    opts.use_schedule = true;
    opts.schedule_epsilon0 = get_or<double>(s, "epsilon0", 1.0);
    opts.schedule_divisions = get_or<int>(s, "divisions", 10);
    opts.schedule_every = get_or<int>(s, "every", 100);
  }
  return opts;
}

inline bool parse_stabilized(const json& root, bool fallback) {
  if (root.contains("solver") && root.at("solver").contains("stabilized"))
    return root.at("solver").at("stabilized").get<bool>();
  return fallback;
}

inline void write_summary(const std::filesystem::path& dir, const json& summary) {
  std::ofstream out(dir / "summary.json");
  out << summary.dump(2) << "\n";
}

inline void write_plan_support(const std::filesystem::path& path, const Plan<double>& plan,
                               double threshold) {
  CsvTable t;
  t.header = {"i", "j", "value"};
  t.columns.resize(3);
  for (Index i = 0; i < plan.density.rows(); ++i)
    for (Index j = 0; j < plan.density.cols(); ++j)
      if (plan.density(i, j) > threshold) {
        t.columns[0].push_back(double(i));
        t.columns[1].push_back(double(j));
        t.columns[2].push_back(plan.density(i, j));
      }
  write_csv(path.string(), t);
}

inline void write_gap_history(const std::filesystem::path& path,
                              const std::vector<double>& gaps, const std::vector<int>& iters) {
  if (gaps.empty()) return;
  CsvTable t;
  t.header = {"iteration", "gap"};
  t.columns.resize(2);
  for (size_t k = 0; k < gaps.size(); ++k) {
    t.columns[0].push_back(double(iters[k]));
    t.columns[1].push_back(gaps[k]);
  }
  write_csv(path.string(), t);
}

inline void write_masses(const std::filesystem::path& path,
                         const std::vector<Eigen::VectorXd>& densities,
                         const Eigen::VectorXd& w, double tau) {
  CsvTable t;
  t.header = {"t", "mass"};
  t.columns.resize(2);
  for (size_t k = 0; k < densities.size(); ++k) {
    t.columns[0].push_back(tau * double(k));
    t.columns[1].push_back(densities[k].dot(w));
  }
  write_csv(path.string(), t);
}

// --------------------------------------------------------------------------
// per-problem runners

inline void run_transport(const json& cfg, const std::filesystem::path& out, unsigned seed) {
  require_keys(cfg,
               {"problem", "space", "p", "q", "cost", "f1", "f2", "epsilon", "schedule", "solver",
                "support_threshold"},
               "config");
  const DiscreteSpace<double> X = parse_space(cfg.at("space"));
  const Eigen::VectorXd p = parse_density(cfg.at("p"), X, seed);
  const Eigen::VectorXd q = parse_density(cfg.at("q"), X, seed + 1);
  const CostMatrix<double> C = parse_cost(cfg.at("cost"), X, X);
  const auto F1 = parse_divergence(cfg.at("f1"), p);
  const auto F2 = parse_divergence(cfg.at("f2"), q);
  const double eps = cfg.at("epsilon").get<double>();
  const SolveOptions<double> opts = parse_options(cfg);
  const double threshold = get_or<double>(cfg, "support_threshold", 1e-10);

  SolveReport<double> rep;
  if (parse_stabilized(cfg, true)) {
    rep = solve_stabilized(F1, F2, C, X, X, eps, opts);
  } else {
    rep = solve_plain(F1, F2, gibbs_kernel(C, eps), X, X, eps, opts);
  }
  if (X.dim() == 1) {
    write_series_csv((out / "marginal_p.csv").string(), X, p);
    write_series_csv((out / "marginal_q.csv").string(), X, q);
    write_series_csv((out / "plan_marginal_x.csv").string(), X, rep.plan.marginal_x());
    write_series_csv((out / "plan_marginal_y.csv").string(), X, rep.plan.marginal_y());
  }
  write_plan_support(out / "plan_support.csv", rep.plan, threshold);
  write_gap_history(out / "gap_history.csv", rep.gap_history, rep.gap_iterations);
  write_summary(out, json{{"primal", rep.primal},
                          {"dual", rep.dual},
                          {"mass", rep.plan.mass()},
                          {"transport_cost", rep.plan.transport_cost(C)},
                          {"iterations", rep.iterations},
                          {"converged", rep.converged},
                          {"epsilon", rep.epsilon}});
}

inline void run_barycenter(const json& cfg, const std::filesystem::path& out, unsigned seed) {
  require_keys(cfg,
               {"problem", "space", "marginals", "weights", "shared", "f1", "cost", "epsilon",
                "schedule", "solver"},
               "config");
  BarycenterProblem<double> prob;
  prob.X = parse_space(cfg.at("space"));
  prob.Y = prob.X;
  const json& ms = cfg.at("marginals");
  if (!ms.is_array() || ms.empty()) throw config_error("barycenter: marginals must be a list");
  unsigned s = seed;
  for (const auto& m : ms) prob.marginals.push_back(parse_density(m, prob.X, s++));
  const auto w = cfg.at("weights").get<std::vector<double>>();
  prob.alpha = Eigen::Map<const Eigen::VectorXd>(w.data(), Index(w.size()));
  prob.shared = parse_shared(cfg.at("shared"));
  if (cfg.contains("f1"))
    for (size_t k = 0; k < prob.marginals.size(); ++k)
      prob.f1.push_back(parse_divergence(cfg.at("f1"), prob.marginals[k]));
  prob.costs.push_back(parse_cost(cfg.at("cost"), prob.X, prob.Y));
  prob.epsilon = cfg.at("epsilon").get<double>();

  const auto sol = solve_barycenter(prob, parse_options(cfg));
  if (prob.Y.dim() == 1) {
    write_series_csv((out / "barycenter.csv").string(), prob.Y, sol.h);
    for (size_t k = 0; k < sol.couplings.size(); ++k)
      write_series_csv((out / ("coupling_marginal_" + std::to_string(k) + ".csv")).string(),
                       prob.Y, sol.couplings[k].marginal_y());
  }
  write_summary(out, json{{"iterations", sol.iterations},
                          {"converged", sol.converged},
                          {"barycenter_mass", sol.h.dot(prob.Y.weights)}});
}

inline void run_flow_experiment(const json& cfg, const std::filesystem::path& out, unsigned seed) {
  require_keys(cfg,
               {"problem", "space", "initial", "initial_b", "energy", "tau", "steps", "cost",
                "epsilon", "schedule", "solver"},
               "config");
  const DiscreteSpace<double> X = parse_space(cfg.at("space"));
  const double tau = cfg.at("tau").get<double>();
  const int steps = cfg.at("steps").get<int>();
  const double eps = cfg.at("epsilon").get<double>();
  const json& ej = cfg.at("energy");
  require_keys(ej, {"kind", "alpha", "weight", "reference"}, "energy");
  const std::string kind = ej.at("kind").get<std::string>();

  const json& cj = cfg.at("cost");
  require_keys(cj, {"kind", "cutoff"}, "cost");
  const std::string ck = get_or<std::string>(cj, "kind", "wf");
  if (ck != "wf" && ck != "quadratic") throw config_error("cost.kind must be quadratic|wf");
  const FlowCost cost_kind = ck == "wf" ? FlowCost::WF : FlowCost::Quadratic;
  const double cutoff = get_or<double>(cj, "cutoff", M_PI / 2);
  const SolveOptions<double> opts = parse_options(cfg);

  FlowTrajectory<double> traj;
  if (kind == "two_species") {
    const auto e = FlowEnergy<double>::two_species(tau, ej.at("alpha").get<double>());
    const Eigen::VectorXd pa = parse_density(cfg.at("initial"), X, seed);
    const Eigen::VectorXd pb = parse_density(cfg.at("initial_b"), X, seed + 1);
    traj = run_flow(X, pa, pb, e, cost_kind, steps, eps, opts, cutoff);
    write_trajectory_csv((out / "trajectory_b.csv").string(), X, traj.densities_b, tau);
  } else {
    FlowEnergy<double> e;
    if (kind == "entropy_fit") {
      e = FlowEnergy<double>::entropy_fit(tau, parse_density(ej.at("reference"), X, seed + 7),
                                          get_or<double>(ej, "weight", 1.0));
    } else if (kind == "congestion") {
      e = FlowEnergy<double>::congestion(tau);
    } else if (kind == "tumor") {
      e = FlowEnergy<double>::tumor_growth(tau, ej.at("alpha").get<double>());
    } else {
      throw config_error("energy.kind must be entropy_fit|congestion|tumor|two_species");
    }
    traj = run_flow(X, parse_density(cfg.at("initial"), X, seed), e, cost_kind, steps, eps, opts,
                    cutoff);
  }
  write_trajectory_csv((out / "trajectory.csv").string(), X, traj.densities, tau);
  write_masses(out / "masses.csv", traj.densities, X.weights, tau);
  write_summary(out, json{{"steps", steps},
                          {"final_mass", traj.densities.back().dot(X.weights)},
                          {"max_density", traj.densities.back().maxCoeff()}});
}

inline void run_mass(const json& cfg, const std::filesystem::path& out, unsigned seed) {
  require_keys(cfg,
               {"problem", "space", "p", "q", "cost", "f1", "f2", "f3", "epsilon", "schedule",
                "solver", "support_threshold"},
               "config");
  const DiscreteSpace<double> X = parse_space(cfg.at("space"));
  const Eigen::VectorXd p = parse_density(cfg.at("p"), X, seed);
  const Eigen::VectorXd q = parse_density(cfg.at("q"), X, seed + 1);
  const CostMatrix<double> C = parse_cost(cfg.at("cost"), X, X);
  const auto F1 = parse_divergence(cfg.at("f1"), p);
  const auto F2 = parse_divergence(cfg.at("f2"), q);
  const json& f3j = cfg.at("f3");
  require_keys(f3j, {"kind", "mass", "lower", "upper"}, "f3");
  const double m = f3j.at("mass").get<double>();
  Eigen::VectorXd mref = Eigen::VectorXd::Constant(1, m);
  DivergenceSpec<double> F3 =
      f3j.at("kind").get<std::string>() == "equality"
          ? DivergenceSpec<double>::equality(mref)
          : DivergenceSpec<double>::range(get_or<double>(f3j, "lower", 0.0),
                                          get_or<double>(f3j, "upper", 1.0), mref);
  const auto rep = solve_with_mass(F1, F2, F3, C, X, X, cfg.at("epsilon").get<double>(),
                                   parse_options(cfg));
  write_plan_support(out / "plan_support.csv", rep.plan,
                     get_or<double>(cfg, "support_threshold", 1e-10));
  write_summary(out, json{{"total_mass", rep.plan.mass()},
                          {"transport_cost", rep.plan.transport_cost(C)},
                          {"primal", rep.primal},
                          {"iterations", rep.iterations},
                          {"converged", rep.converged}});
}

inline void run_generalized(const json& cfg, const std::filesystem::path& out, unsigned seed) {
  require_keys(cfg,
               {"problem", "space", "p", "q", "cost", "f1", "f2", "f3", "mass_map", "epsilon",
                "solver", "support_threshold"},
               "config");
  const DiscreteSpace<double> X = parse_space(cfg.at("space"));
  const Eigen::VectorXd p = parse_density(cfg.at("p"), X, seed);
  const Eigen::VectorXd q = parse_density(cfg.at("q"), X, seed + 1);
  const CostMatrix<double> C = parse_cost(cfg.at("cost"), X, X);
  const double eps = cfg.at("epsilon").get<double>();

  const Index I = X.size(), J = X.size();
  PushforwardProblem<double> prob;
  prob.epsilon = eps;
  prob.dz.resize(I * J);
  prob.kernel.resize(I * J);
  Eigen::VectorXi trow(I * J), tcol(I * J);
  const auto K = gibbs_kernel(C, eps);
  for (Index i = 0; i < I; ++i)
    for (Index j = 0; j < J; ++j) {
      const Index l = i * J + j;
      prob.dz[l] = X.weights[i] * X.weights[j];
      prob.kernel[l] = K.dense(i, j);
      trow[l] = int(i);
      tcol[l] = int(j);
    }
  prob.maps = {trow, tcol};
  prob.weights = {X.weights, X.weights};
  prob.divergences = {parse_divergence(cfg.at("f1"), p), parse_divergence(cfg.at("f2"), q)};
  if (get_or<bool>(cfg, "mass_map", false)) {
    prob.maps.push_back(Eigen::VectorXi::Zero(I * J));
    prob.weights.push_back(Eigen::VectorXd::Ones(1));
    const json& f3j = cfg.at("f3");
    require_keys(f3j, {"kind", "mass", "lower", "upper"}, "f3");
    Eigen::VectorXd mref = Eigen::VectorXd::Constant(1, f3j.at("mass").get<double>());
    prob.divergences.push_back(f3j.at("kind").get<std::string>() == "equality"
                                   ? DivergenceSpec<double>::equality(mref)
                                   : DivergenceSpec<double>::range(get_or<double>(f3j, "lower", 0.0),
                                                                   get_or<double>(f3j, "upper", 1.0),
                                                                   mref));
  }
  const auto res = solve_generalized(prob, parse_options(cfg));
  // coupling back to plan form for the support dump
  Plan<double> plan;
  plan.wx = X.weights;
  plan.wy = X.weights;
  plan.density.resize(I, J);
  for (Index i = 0; i < I; ++i)
    for (Index j = 0; j < J; ++j) plan.density(i, j) = res.coupling[i * J + j];
  write_plan_support(out / "plan_support.csv", plan, get_or<double>(cfg, "support_threshold", 1e-10));
  write_summary(out, json{{"total_mass", plan.mass()},
                          {"transport_cost", plan.transport_cost(C)},
                          {"iterations", res.iterations},
                          {"converged", res.converged}});
}

inline void run_colortransfer(const json& cfg, const std::filesystem::path& out, unsigned) {
  require_keys(cfg,
               {"problem", "source", "target", "resolution", "f2", "epsilon", "solver", "output"},
               "config");
  const Image src = read_ppm(cfg.at("source").get<std::string>());
  const Image tgt = read_ppm(cfg.at("target").get<std::string>());
  std::array<Index, 3> res{64, 32, 32};
  if (cfg.contains("resolution")) {
    const auto r = cfg.at("resolution").get<std::vector<Index>>();
    if (r.size() != 3) throw config_error("resolution must have three entries");
    res = {r[0], r[1], r[2]};
  }
  const LabHistogram hp = image_to_histogram(src, res);
  const LabHistogram hq = image_to_histogram(tgt, res);
  const double eps = cfg.at("epsilon").get<double>();

  // separable quadratic kernel over the Lab grid; plain iterations only
  const CostMatrix<double> C = build_cost_quadratic_separable(hp.grid, hq.grid);
  const Kernel<double> K = gibbs_kernel(C, eps);
  const auto F1 = DivergenceSpec<double>::equality(hp.mass);
  const auto F2 = parse_divergence(cfg.at("f2"), hq.mass);
  SolveOptions<double> opts = parse_options(cfg);
  if (!cfg.contains("solver")) opts.max_iter = 2000;
  const auto f = plain_scaling_factors(F1, F2, K, hp.grid, hq.grid, eps, opts);

  const Eigen::MatrixXd T =
      barycentric_map_scalings(K, f.a, f.b, hq.grid.points, hp.grid.points);
  const Image mapped = apply_color_map(src, hp, T);
  write_ppm((out / cfg.at("output").get<std::string>()).string(), mapped);
  write_summary(out, json{{"iterations", f.iterations},
                          {"converged", f.converged},
                          {"source_pixels", src.size()},
                          {"bins", hp.bins()}});
}

}  // namespace detail

/// Dispatches a parsed config; outputs land in `out_dir`.  Throws
/// config_error for invalid configs and solver_error for failed runs.
inline void run_experiment(const nlohmann::json& cfg, const std::string& out_dir,
                           unsigned seed = 0) {
  if (!cfg.is_object() || !cfg.contains("problem"))
    throw config_error("config: missing 'problem'");
  const std::filesystem::path out(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw config_error("cannot create output directory: " + out_dir);
  const std::string kind = cfg.at("problem").get<std::string>();
  if (kind == "transport")
    detail::run_transport(cfg, out, seed);
  else if (kind == "barycenter")
    detail::run_barycenter(cfg, out, seed);
  else if (kind == "flow")
    detail::run_flow_experiment(cfg, out, seed);
  else if (kind == "mass")
    detail::run_mass(cfg, out, seed);
  else if (kind == "generalized")
    detail::run_generalized(cfg, out, seed);
  else if (kind == "colortransfer")
    detail::run_colortransfer(cfg, out, seed);
  else
    throw config_error("unknown problem kind: " + kind);
}

}  // namespace uot
