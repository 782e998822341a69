#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "uot/experiment.hpp"
#include "uot/io.hpp"

#include <cstdio>
#include <filesystem>
#include <random>

using namespace uot;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// independently coded Lab reference (long double, piecewise formulas written
// out again) for the conversion oracle
std::array<double, 3> lab_reference(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  auto lin = [](long double c) -> long double {
    c /= 255.0L;
    return c <= 0.04045L ? c / 12.92L : std::pow((c + 0.055L) / 1.055L, 2.4L);
  };
  const long double r = lin(r8), g = lin(g8), b = lin(b8);
  const long double X = 0.4124564L * r + 0.3575761L * g + 0.1804375L * b;
  const long double Y = 0.2126729L * r + 0.7151522L * g + 0.0721750L * b;
  const long double Z = 0.0193339L * r + 0.1191920L * g + 0.9503041L * b;
  auto f = [](long double t) -> long double {
    return t > 216.0L / 24389.0L ? std::cbrt((double)t) : (24389.0L / 27.0L * t + 16.0L) / 116.0L;
  };
  const long double fx = f(X / 0.95047L), fy = f(Y / 1.0L), fz = f(Z / 1.08883L);
  return {double(116.0L * fy - 16.0L), double(500.0L * (fx - fy)), double(200.0L * (fy - fz))};
}

Image solid_image(int w, int h, std::array<std::uint8_t, 3> color) {
  Image img;
  img.width = w;
  img.height = h;
  img.pixels.assign(static_cast<size_t>(w * h), color);
  return img;
}

}  // namespace

TEST_CASE("csv round-trips doubles exactly") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  CsvTable t;
  t.header = {"x", "value"};
  t.columns.resize(2);
  for (int i = 0; i < 200; ++i) {
    t.columns[0].push_back(unif(rng) * std::pow(10.0, (i % 40) - 20));
    t.columns[1].push_back(unif(rng));
  }
  t.columns[0][0] = 0.1;  // not representable exactly
  t.columns[1][0] = 1e-308;
  const std::string path = temp_path("uot_roundtrip.csv");
  write_csv(path, t);
  const CsvTable back = read_csv(path);
  REQUIRE(back.header == t.header);
  for (size_t c = 0; c < 2; ++c)
    for (size_t r = 0; r < t.columns[c].size(); ++r)
      CHECK(back.columns[c][r] == t.columns[c][r]);
  std::remove(path.c_str());
}

TEST_CASE("ppm read/write, both magics") {
  Image img;
  img.width = 2;
  img.height = 2;
  img.pixels = {{{255, 0, 0}}, {{0, 255, 0}}, {{0, 0, 255}}, {{7, 130, 200}}};
  const std::string p6 = temp_path("uot_test.ppm");
  write_ppm(p6, img);
  const Image back = read_ppm(p6);
  CHECK(back.width == 2);
  CHECK(back.pixels == img.pixels);
  std::remove(p6.c_str());

  const std::string p3 = temp_path("uot_test_p3.ppm");
  {
    std::ofstream out(p3);
    out << "P3\n# comment line\n2 1\n255\n255 0 0   1 2 3\n";
  }
  const Image ascii = read_ppm(p3);
  CHECK(ascii.size() == 2);
  CHECK(ascii.pixels[1] == std::array<std::uint8_t, 3>{1, 2, 3});
  std::remove(p3.c_str());

  const std::string bad = temp_path("uot_bad.ppm");
  {
    std::ofstream out(bad);
    out << "P5\n2 2\n255\n";
  }
  CHECK_THROWS_AS(read_ppm(bad), config_error);
  std::remove(bad.c_str());
}

TEST_CASE("histogram masses count pixels") {
  const std::array<Index, 3> res{8, 4, 4};
  const Image solid = solid_image(7, 5, {120, 40, 200});
  const LabHistogram h = image_to_histogram(solid, res);
  CHECK(h.mass.sum() == doctest::Approx(35.0));
  CHECK((h.mass.array() > 0).count() == 1);
  CHECK(h.mass.maxCoeff() == doctest::Approx(35.0));

  // two-color checkerboard: two equal bins
  Image checker = solid_image(8, 8, {250, 250, 250});
  for (int i = 0; i < 64; ++i)
    if ((i / 8 + i % 8) % 2 == 0) checker.pixels[static_cast<size_t>(i)] = {10, 10, 10};
  const LabHistogram hc = image_to_histogram(checker, res);
  CHECK((hc.mass.array() > 0).count() == 2);
  CHECK(hc.mass.maxCoeff() == doctest::Approx(32.0));
  CHECK(hc.mass.sum() == doctest::Approx(64.0));
}

TEST_CASE("srgb to Lab matches the reference on hand-picked pixels") {
  const std::array<std::array<std::uint8_t, 3>, 4> pixels = {
      {{255, 255, 255}, {0, 0, 0}, {255, 0, 0}, {58, 143, 210}}};
  for (const auto& px : pixels) {
    const auto got = srgb_to_lab(px);
    const auto want = lab_reference(px[0], px[1], px[2]);
    for (int c = 0; c < 3; ++c)
      CHECK(got[static_cast<size_t>(c)] ==
            doctest::Approx(want[static_cast<size_t>(c)]).epsilon(1e-6).scale(1 + std::abs(want[static_cast<size_t>(c)])));
  }
  // white point sanity
  const auto white = srgb_to_lab({255, 255, 255});
  CHECK(white[0] == doctest::Approx(100.0).epsilon(1e-4));
  CHECK(std::abs(white[1]) <= 1e-3);
  CHECK(std::abs(white[2]) <= 1e-3);
}

TEST_CASE("srgb -> Lab -> srgb round trip stays within one level") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> level(0, 255);
  auto check_px = [](std::array<std::uint8_t, 3> px) {
    const auto back = lab_to_srgb(srgb_to_lab(px));
    for (int c = 0; c < 3; ++c)
      CHECK(std::abs(int(back[static_cast<size_t>(c)]) - int(px[static_cast<size_t>(c)])) <= 1);
  };
  for (int g = 0; g < 256; g += 5) check_px({std::uint8_t(g), std::uint8_t(g), std::uint8_t(g)});
  for (int rep = 0; rep < 300; ++rep)
    check_px({std::uint8_t(level(rng)), std::uint8_t(level(rng)), std::uint8_t(level(rng))});
}

TEST_CASE("barycentric projection") {
  // identity plan: the map returns the target coordinates unchanged
  Plan<double> plan;
  plan.density = MatrixXd::Identity(3, 3);
  plan.wx = VectorXd::Ones(3);
  plan.wy = VectorXd::Ones(3);
  MatrixXd coords(3, 3);
  coords << 0, 0, 0, 0.5, 0.2, 0.1, 1, 1, 1;
  CHECK(barycentric_map(plan, coords, coords) == coords);

  // all mass of row 0 onto column 2
  plan.density.setZero();
  plan.density(0, 2) = 0.7;
  MatrixXd src = MatrixXd::Constant(3, 3, 0.5);
  const MatrixXd T = barycentric_map(plan, coords, src);
  CHECK(T.row(0) == coords.row(2));
  CHECK(T.row(1) == src.row(1));  // empty rows keep their source coordinates

  // random plan against direct sums
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  plan.density = MatrixXd::NullaryExpr(3, 3, [&] { return unif(rng); });
  const MatrixXd R = plan.density;
  const MatrixXd T2 = barycentric_map(plan, coords, src);
  for (Index i = 0; i < 3; ++i) {
    double denom = 0;
    Eigen::RowVector3d num = Eigen::RowVector3d::Zero();
    for (Index j = 0; j < 3; ++j) {
      denom += R(i, j);
      num += R(i, j) * coords.row(j);
    }
    CHECK((T2.row(i) - num / denom).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("barycentric projection from scaling factors matches the dense one") {
  const auto X = uniform_grid_space<double>({3, 3, 2}, {0, 0, 0}, {1, 1, 1}, GridWeight::UnitMass);
  const auto C = build_cost_quadratic(X, X);
  const auto K = gibbs_kernel(C, 0.2);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  const VectorXd a = VectorXd::NullaryExpr(X.size(), [&] { return unif(rng); });
  const VectorXd b = VectorXd::NullaryExpr(X.size(), [&] { return unif(rng); });
  Plan<double> plan;
  plan.density = a.asDiagonal() * K.dense * b.asDiagonal();
  plan.wx = X.weights;
  plan.wy = X.weights;
  const MatrixXd dense_T = barycentric_map(plan, X.points, X.points);
  const MatrixXd fact_T = barycentric_map_scalings(K, a, b, X.points, X.points);
  CHECK((dense_T - fact_T).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("apply_color_map: identity on bin-center colors, constant map") {
  const std::array<Index, 3> res{4, 4, 4};
  // build an image from bin centers whose nearest sRGB color stays in-bin
  // (centers outside the sRGB gamut clamp into some other bin)
  const auto grid = cell_centered_grid_space<double>({4, 4, 4}, {0, 0, 0}, {1, 1, 1});
  LabHistogram probe;
  probe.resolution = res;
  probe.grid = grid;
  Image img;
  img.pixels.clear();
  for (Index b = 0; b < grid.size() && img.pixels.size() < 8; ++b) {
    const auto lab = unit_cube_to_lab({grid.points(b, 0), grid.points(b, 1), grid.points(b, 2)});
    const auto px = lab_to_srgb(lab);
    if (probe.bin_of(lab_to_unit_cube(srgb_to_lab(px))) == b) img.pixels.push_back(px);
  }
  REQUIRE(img.pixels.size() == 8);
  img.width = 4;
  img.height = 2;
  const LabHistogram h = image_to_histogram(img, res);
  CHECK(h.mass.sum() == doctest::Approx(8.0));

  // identity map: every bin keeps its own center
  const Image same = apply_color_map(img, h, grid.points);
  CHECK(same.pixels == img.pixels);

  // constant map: a constant image
  MatrixXd constant = MatrixXd::Zero(grid.size(), 3);
  for (Index b = 0; b < grid.size(); ++b) constant.row(b) << 0.5, 0.5, 0.5;
  const Image flat = apply_color_map(img, h, constant);
  for (const auto& px : flat.pixels) CHECK(px == flat.pixels[0]);
}

TEST_CASE("color transfer between identical histograms stays near the identity") {
  // equality marginals on both sides of the same histogram: report the mean
  // displacement left by the entropic blur
  Image img;
  img.width = 6;
  img.height = 6;
  std::mt19937 rng(13);
  std::uniform_int_distribution<int> level(0, 255);
  for (int i = 0; i < 36; ++i)
    img.pixels.push_back({std::uint8_t(level(rng)), std::uint8_t(level(rng)), std::uint8_t(level(rng))});
  const std::array<Index, 3> res{6, 4, 4};
  const LabHistogram h = image_to_histogram(img, res);

  const auto C = build_cost_quadratic_separable(h.grid, h.grid);
  const auto K = gibbs_kernel(C, 2e-3);
  const auto F = DivergenceSpec<double>::equality(h.mass);
  SolveOptions<double> opts;
  opts.max_iter = 500;
  opts.tol = 1e-10;
  const auto f = plain_scaling_factors(F, F, K, h.grid, h.grid, 2e-3, opts);
  const MatrixXd T = barycentric_map_scalings(K, f.a, f.b, h.grid.points, h.grid.points);
  double blur = 0;
  int used = 0;
  for (Index b = 0; b < h.bins(); ++b) {
    if (h.mass[b] == 0) continue;
    blur += (T.row(b) - h.grid.points.row(b)).norm();
    ++used;
  }
  MESSAGE("mean per-bin displacement (entropic blur): " << blur / used);
  CHECK(std::isfinite(blur));
}

TEST_CASE("experiment configs: unknown keys rejected, transport outputs written") {
  namespace fs = std::filesystem;
  const fs::path out = fs::temp_directory_path() / "uot_exp_out";
  fs::remove_all(out);

  nlohmann::json cfg = {
      {"problem", "transport"},
      {"space", {{"points", 24}}},
      {"p", {{"kind", "gaussians"}, {"centers", {{0.3}}}, {"sigmas", {0.08}}, {"masses", {1.0}}}},
      {"q", {{"kind", "gaussians"}, {"centers", {{0.7}}}, {"sigmas", {0.08}}, {"masses", {1.0}}}},
      {"cost", {{"kind", "quadratic"}}},
      {"f1", {{"kind", "equality"}}},
      {"f2", {{"kind", "kl"}, {"lambda", 0.5}}},
      {"epsilon", 1e-3},
      {"solver", {{"max_iter", 600}, {"tol", 1e-9}}},
  };
  run_experiment(cfg, out.string(), 0);
  CHECK(fs::exists(out / "plan_marginal_x.csv"));
  CHECK(fs::exists(out / "plan_support.csv"));
  CHECK(fs::exists(out / "summary.json"));

  nlohmann::json bad = cfg;
  bad["typo_key"] = 1;
  CHECK_THROWS_AS(run_experiment(bad, out.string(), 0), config_error);
  nlohmann::json bad2 = cfg;
  bad2["f2"]["beta"] = 1;
  CHECK_THROWS_AS(run_experiment(bad2, out.string(), 0), config_error);
  fs::remove_all(out);
}

TEST_CASE("flow experiment writes trajectories and masses") {
  namespace fs = std::filesystem;
  const fs::path out = fs::temp_directory_path() / "uot_flow_out";
  fs::remove_all(out);
  nlohmann::json cfg = {
      {"problem", "flow"},
      {"space", {{"points", 20}}},
      {"initial", {{"kind", "constant"}, {"value", 0.9}}},
      {"energy", {{"kind", "tumor"}, {"alpha", 1.0}}},
      {"tau", 0.01},
      {"steps", 2},
      {"cost", {{"kind", "wf"}}},
      {"epsilon", 1e-4},
      {"solver", {{"max_iter", 300}, {"tol", 1e-8}}},
  };
  run_experiment(cfg, out.string(), 0);
  CHECK(fs::exists(out / "trajectory.csv"));
  const CsvTable t = read_csv((out / "trajectory.csv").string());
  REQUIRE(t.header == std::vector<std::string>{"t", "x", "value"});
  CHECK(t.columns[0].size() == 3 * 20);  // initial plus two steps
  const CsvTable m = read_csv((out / "masses.csv").string());
  CHECK(m.columns[1][2] >= m.columns[1][0]);
  fs::remove_all(out);
}
