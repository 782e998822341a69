#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "uot/divergences.hpp"

#include "oracles.hpp"

#include <random>

using namespace uot;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("divergence values") {
  const VectorXd w = vec({1, 1, 1});
  const VectorXd p = vec({0.5, 1.0, 2.0});
  CHECK(divergence_value(DivergenceSpec<double>::kl(1.3, p), p, w) == 0.0);

  const auto tv = DivergenceSpec<double>::tv(2.0, vec({1.0}));
  CHECK(divergence_value(tv, vec({3.0}), vec({1.0})) == 4.0);

  const auto rg = DivergenceSpec<double>::range(0.5, 2.0, vec({1.0}));
  CHECK(divergence_value(rg, vec({3.0}), vec({1.0})) == kInf);
  CHECK(divergence_value(rg, vec({0.8}), vec({1.0})) == 0.0);

  CHECK_THROWS_AS(divergence_value(tv, vec({-1.0}), vec({1.0})), std::invalid_argument);
}

TEST_CASE("divergence_value vanishes exactly on the kind's feasible set") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> unif(0.1, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    const VectorXd p = VectorXd::NullaryExpr(4, [&] { return unif(rng); });
    const VectorXd w = VectorXd::NullaryExpr(4, [&] { return unif(rng); });
    const VectorXd a = VectorXd::NullaryExpr(4, [&] { return unif(rng); });
    const auto eq = DivergenceSpec<double>::equality(p);
    const auto kl = DivergenceSpec<double>::kl(0.7, p);
    const auto tv = DivergenceSpec<double>::tv(0.7, p);
    const auto rg = DivergenceSpec<double>::range(0.5, 1.5, p);
    CHECK(divergence_value(eq, p, w) == 0.0);
    CHECK((divergence_value(eq, a, w) == 0.0) == (a == p));
    CHECK((divergence_value(kl, a, w) == 0.0) == (a == p));
    CHECK((divergence_value(tv, a, w) == 0.0) == (a == p));
    bool in_range = true;
    for (Index i = 0; i < 4; ++i)
      in_range = in_range && a[i] >= 0.5 * p[i] && a[i] <= 1.5 * p[i];
    CHECK((divergence_value(rg, a, w) == 0.0) == in_range);
  }
}

TEST_CASE("conjugate values and domain") {
  const VectorXd w1 = vec({1.0});
  CHECK(divergence_conjugate_value(DivergenceSpec<double>::kl(1.0, vec({2.0})), vec({0.0}), w1) ==
        0.0);
  CHECK(divergence_conjugate_value(DivergenceSpec<double>::equality(vec({3.0})), vec({2.0}), w1) ==
        doctest::Approx(6.0));
  CHECK(divergence_conjugate_value(DivergenceSpec<double>::tv(1.0, vec({1.0})), vec({2.0}), w1) ==
        kInf);
}

TEST_CASE("conjugates match the numeric sup oracle") {
  // the TV and Range conjugates are not printed anywhere; validate them
  // against a direct scan of sup_s (s u - phi(s)) before trusting them
  std::vector<std::pair<oracles::Phi, DivergenceSpec<double>>> kinds;
  const VectorXd p1 = vec({1.0});
  kinds.push_back({oracles::Phi::equality(), DivergenceSpec<double>::equality(p1)});
  kinds.push_back({oracles::Phi::kl(0.8), DivergenceSpec<double>::kl(0.8, p1)});
  kinds.push_back({oracles::Phi::tv(1.4), DivergenceSpec<double>::tv(1.4, p1)});
  kinds.push_back({oracles::Phi::range(0.3, 2.5), DivergenceSpec<double>::range(0.3, 2.5, p1)});
  kinds.push_back({oracles::Phi::range(0.3, oracles::kInf),
                   DivergenceSpec<double>::range(0.3, kInf, p1)});
  const VectorXd w = vec({1.0});
  for (const auto& [phi, spec] : kinds) {
    for (double u = -3.0; u <= 3.0; u += 0.21) {
      const double scanned = oracles::conjugate_sup_scan(phi, u);
      const double closed = divergence_conjugate_value(spec, vec({u}), w);
      if (scanned == oracles::kInf) {
        CHECK(closed == kInf);
      } else {
        CHECK(closed == doctest::Approx(scanned).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("proxdiv closed forms: catalogued examples") {
  const double eps = 0.25;
  // balanced fixed point
  const VectorXd p = vec({0.3, 0.7});
  const auto eq = DivergenceSpec<double>::equality(p);
  CHECK(proxdiv(eq, p, eps).isApprox(VectorXd::Ones(2)));

  // lambda = eps halves the log-ratio
  const auto kl = DivergenceSpec<double>::kl(eps, vec({4.0}));
  CHECK(proxdiv(kl, vec({1.0}), eps)[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(oracles::proxdiv_oracle(oracles::Phi::kl(eps), 1.0, 4.0, 0.0, eps) ==
        doctest::Approx(2.0).epsilon(1e-9));

  // TV clips the ratio at exp(lambda/eps)
  const double lam = eps * std::log(1.5);
  const auto tv = DivergenceSpec<double>::tv(lam, vec({2.0}));
  CHECK(proxdiv(tv, vec({1.0}), eps)[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(oracles::proxdiv_oracle(oracles::Phi::tv(lam), 1.0, 2.0, 0.0, eps) ==
        doctest::Approx(1.5).epsilon(1e-9));

  // Range clamps exp(-u/eps) into [lo p/s, hi p/s]
  const auto rg = DivergenceSpec<double>::range(0.7, 1.2, vec({1.0}));
  CHECK(proxdiv(rg, vec({2.0}), eps)[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(oracles::proxdiv_oracle(oracles::Phi::range(0.7, 1.2), 2.0, 1.0, 0.0, eps) ==
        doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("proxdiv agrees with the subgradient-bisection oracle") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> logs(-3.0, 3.0);
  std::uniform_real_distribution<double> us(-5.0, 5.0);
  std::uniform_real_distribution<double> epss(std::log(1e-3), 0.0);
  std::uniform_real_distribution<double> lams(std::log(1e-2), std::log(10.0));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int kindi = 0; kindi < 4; ++kindi) {
    for (int rep = 0; rep < 300; ++rep) {
      const double s = std::exp(logs(rng));
      const double pval = unif(rng) < 0.12 ? 0.0 : std::exp(logs(rng));
      const double u = us(rng);
      const double eps = std::exp(epss(rng));
      const double lam = std::exp(lams(rng));
      double lo = 0.35 * std::exp(0.3 * logs(rng));
      double hi = lo + std::exp(0.3 * logs(rng));
      DivergenceSpec<double> spec;
      oracles::Phi phi = oracles::Phi::equality();
      const VectorXd pv = vec({pval});
      switch (kindi) {
        case 0: spec = DivergenceSpec<double>::equality(pv); break;
        case 1:
          spec = DivergenceSpec<double>::kl(lam, pv);
          phi = oracles::Phi::kl(lam);
          break;
        case 2:
          spec = DivergenceSpec<double>::tv(lam, pv);
          phi = oracles::Phi::tv(lam);
          break;
        default:
          spec = DivergenceSpec<double>::range(lo, hi, pv);
          phi = oracles::Phi::range(lo, hi);
          break;
      }
      const double got = proxdiv(spec, vec({s}), vec({u}), eps)[0];
      const double want = oracles::proxdiv_oracle(phi, s, pval, u, eps);
      CAPTURE(kindi);
      CAPTURE(s);
      CAPTURE(pval);
      CAPTURE(u);
      CAPTURE(eps);
      CAPTURE(lam);
      CHECK(oracles::factors_close(got, want));
    }
  }
}

TEST_CASE("zero inputs propagate to zero mass") {
  const double eps = 0.2;
  const VectorXd s0 = vec({0.0});
  CHECK(proxdiv(DivergenceSpec<double>::equality(vec({0.0})), s0, eps)[0] * s0[0] == 0.0);
  CHECK(proxdiv(DivergenceSpec<double>::kl(1.0, vec({2.0})), s0, eps)[0] == 0.0);
  CHECK(proxdiv(DivergenceSpec<double>::tv(1.0, vec({2.0})), s0, eps)[0] == 0.0);
  CHECK(proxdiv(DivergenceSpec<double>::range(0.0, 2.0, vec({2.0})), s0, eps)[0] == 0.0);
  // marginal forced positive on an unreachable point: infeasible
  CHECK(proxdiv(DivergenceSpec<double>::equality(vec({1.0})), s0, eps)[0] == kInf);
}

TEST_CASE("reference zero with positive input follows the catalogue") {
  const double eps = 0.2, lam = 0.7, u = 0.3;
  const VectorXd s = vec({1.6}), uu = vec({u}), p0 = vec({0.0});
  CHECK(proxdiv(DivergenceSpec<double>::equality(p0), s, uu, eps)[0] == 0.0);
  CHECK(proxdiv(DivergenceSpec<double>::kl(lam, p0), s, uu, eps)[0] == 0.0);
  CHECK(proxdiv(DivergenceSpec<double>::tv(lam, p0), s, uu, eps)[0] ==
        doctest::Approx(std::exp(-(lam + u) / eps)).epsilon(1e-12));
  CHECK(proxdiv(DivergenceSpec<double>::range(0.5, 2.0, p0), s, uu, eps)[0] == 0.0);
}

TEST_CASE("Young-Fenchel inequality with equality at oracle optimizers") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> logs(-2.0, 2.0);
  std::uniform_real_distribution<double> us(-2.0, 2.0);
  for (int rep = 0; rep < 100; ++rep) {
    const double pval = std::exp(logs(rng));
    const double lam = std::exp(0.5 * logs(rng));
    const double eps = 0.2;
    const VectorXd p = vec({pval});
    const VectorXd w = vec({1.0});
    for (int kindi = 0; kindi < 4; ++kindi) {
      DivergenceSpec<double> spec;
      oracles::Phi phi = oracles::Phi::equality();
      switch (kindi) {
        case 0: spec = DivergenceSpec<double>::equality(p); break;
        case 1:
          spec = DivergenceSpec<double>::kl(lam, p);
          phi = oracles::Phi::kl(lam);
          break;
        case 2:
          spec = DivergenceSpec<double>::tv(lam, p);
          phi = oracles::Phi::tv(lam);
          break;
        default:
          spec = DivergenceSpec<double>::range(0.5, 1.5, p);
          phi = oracles::Phi::range(0.5, 1.5);
          break;
      }
      // inequality on random feasible pairs
      const double a = kindi == 0 ? pval : std::exp(logs(rng));
      double uval = us(rng);
      uval = std::min(uval, spec.recession_slope());
      const VectorXd av = vec({a}), uv = vec({uval});
      const double lhs = divergence_value(spec, av, w) + divergence_conjugate_value(spec, uv, w);
      if (std::isfinite(lhs)) CHECK(lhs >= a * uval - 1e-10 * (1 + std::abs(lhs)));

      // equality at the prox optimizer and its subgradient -eps log(x*/z)
      const double s = std::exp(logs(rng));
      const double x = oracles::prox_bisection(phi, s, pval, uval, eps);
      if (x > 0) {
        const double sub = -eps * (std::log(x) - (std::log(s) - uval / eps));
        const VectorXd xv = vec({x}), sv = vec({std::min(sub, spec.recession_slope())});
        const double dv = divergence_value(spec, xv, w);
        const double cv = divergence_conjugate_value(spec, sv, w);
        if (std::isfinite(dv) && std::isfinite(cv))
          CHECK(dv + cv == doctest::Approx(x * sub).epsilon(1e-6).scale(1 + std::abs(dv) + x));
      }
    }
  }
}

TEST_CASE("stability at eps = 1e-9") {
  const double eps = 1e-9;
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> us(-10.0, 10.0);
  std::uniform_real_distribution<double> logs(-2.0, 2.0);
  for (int rep = 0; rep < 200; ++rep) {
    const double u = us(rng), s = std::exp(logs(rng)), pv = std::exp(logs(rng));
    const VectorXd sv = vec({s}), uv = vec({u});
    const double kl = proxdiv(DivergenceSpec<double>::kl(1.0, vec({pv})), sv, uv, eps)[0];
    CHECK(std::isfinite(kl));
    const double tv = proxdiv(DivergenceSpec<double>::tv(1.0, vec({pv})), sv, uv, eps)[0];
    CHECK(std::isfinite(tv));
    CHECK(!std::isnan(tv));
    const double rg =
        proxdiv(DivergenceSpec<double>::range(0.5, 1.5, vec({pv})), sv, uv, eps)[0];
    CHECK(std::isfinite(rg));
    // saturation: the clamped branch never escapes the data-driven bounds
    CHECK(rg <= 1.5 * pv / s + 1e-12);
    CHECK(rg >= 0.5 * pv / s - 1e-12);
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(DivergenceSpec<double>::kl(0.0, vec({1.0})), std::invalid_argument);
  CHECK_THROWS_AS(DivergenceSpec<double>::tv(-1.0, vec({1.0})), std::invalid_argument);
  CHECK_THROWS_AS(DivergenceSpec<double>::range(2.0, 1.0, vec({1.0})), std::invalid_argument);
  CHECK_THROWS_AS(DivergenceSpec<double>::kl(1.0, vec({-1.0})), std::invalid_argument);
}
