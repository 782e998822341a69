#pragma once

#include "uot/geometry.hpp"
#include "uot/scaling.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace uot {

struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// CSV: header row plus decimal values with 17 significant digits, which
// round-trips doubles exactly.

namespace detail {

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// strtod-based parse: unlike std::stod it accepts gradual underflow, so
// subnormals survive the round trip
inline double parse_value(const std::string& cell, const std::string& path) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin) throw config_error("non-numeric csv cell in " + path);
  return v;
}

}  // namespace detail

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
};

inline void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open for writing: " + path);
  for (size_t c = 0; c < table.header.size(); ++c)
    out << (c ? "," : "") << table.header[c];
  out << "\n";
  const size_t rows = table.columns.empty() ? 0 : table.columns[0].size();
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < table.columns.size(); ++c)
      out << (c ? "," : "") << detail::format_value(table.columns[c][r]);
    out << "\n";
  }
  if (!out) throw config_error("write failed: " + path);
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw config_error("empty csv: " + path);
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  table.columns.resize(table.header.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    size_t c = 0;
    while (std::getline(ls, cell, ',')) {
      if (c >= table.columns.size()) throw config_error("ragged csv row in " + path);
      table.columns[c++].push_back(detail::parse_value(cell, path));
    }
    if (c != table.columns.size()) throw config_error("ragged csv row in " + path);
  }
  return table;
}

/// (x, value) series over the points of a 1-D space.
inline void write_series_csv(const std::string& path, const DiscreteSpace<double>& X,
                             const Eigen::VectorXd& value) {
  CsvTable t;
  t.header = {"x", "value"};
  t.columns.resize(2);
  for (Index i = 0; i < X.size(); ++i) {
    t.columns[0].push_back(X.points(i, 0));
    t.columns[1].push_back(value[i]);
  }
  write_csv(path, t);
}

/// (t, x, value) long-format trajectory.
inline void write_trajectory_csv(const std::string& path, const DiscreteSpace<double>& X,
                                 const std::vector<Eigen::VectorXd>& densities, double tau) {
  CsvTable t;
  t.header = {"t", "x", "value"};
  t.columns.resize(3);
  for (size_t k = 0; k < densities.size(); ++k)
    for (Index i = 0; i < X.size(); ++i) {
      t.columns[0].push_back(tau * double(k));
      t.columns[1].push_back(X.points(i, 0));
      t.columns[2].push_back(densities[k][i]);
    }
  write_csv(path, t);
}

// ---------------------------------------------------------------------------
// PPM images (8-bit RGB, magic P3 or P6)

struct Image {
  int width = 0, height = 0;
  std::vector<std::array<std::uint8_t, 3>> pixels;  // row-major

  int size() const { return width * height; }
};

namespace detail {

inline int ppm_next_int(std::istream& in) {
  // skips whitespace and '#' comments
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string dummy;
      std::getline(in, dummy);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = 0;
  if (!(in >> v)) throw config_error("malformed ppm header");
  return v;
}

}  // namespace detail

inline Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P3" && magic != "P6") throw config_error("unsupported image magic: " + magic);
  Image img;
  img.width = detail::ppm_next_int(in);
  img.height = detail::ppm_next_int(in);
  const int maxval = detail::ppm_next_int(in);
  if (img.width <= 0 || img.height <= 0 || maxval != 255)
    throw config_error("only 8-bit RGB ppm supported: " + path);
  img.pixels.resize(static_cast<size_t>(img.size()));
  if (magic == "P6") {
    in.get();  // single whitespace after maxval
    std::vector<char> raw(static_cast<size_t>(img.size()) * 3);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
      throw config_error("truncated ppm: " + path);
    for (int i = 0; i < img.size(); ++i)
      for (int c = 0; c < 3; ++c)
        img.pixels[static_cast<size_t>(i)][static_cast<size_t>(c)] =
            static_cast<std::uint8_t>(raw[static_cast<size_t>(i) * 3 + static_cast<size_t>(c)]);
  } else {
    for (int i = 0; i < img.size(); ++i)
      for (int c = 0; c < 3; ++c) {
        const int v = detail::ppm_next_int(in);
        if (v < 0 || v > 255) throw config_error("pixel out of range: " + path);
        img.pixels[static_cast<size_t>(i)][static_cast<size_t>(c)] = static_cast<std::uint8_t>(v);
      }
  }
  return img;
}

inline void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open for writing: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  for (const auto& px : img.pixels)
    out.write(reinterpret_cast<const char*>(px.data()), 3);
  if (!out) throw config_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// sRGB <-> CIE-Lab (D65 white point) and the rescale of Lab into the unit
// cuboid: L in [0,100] and a,b in [-128,127] are mapped linearly to [0,1].

namespace detail {

inline double srgb_decode(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double srgb_encode(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

inline double lab_f(double t) {
  const double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
}

inline double lab_f_inv(double t) {
  const double d = 6.0 / 29.0;
  return t > d ? t * t * t : 3 * d * d * (t - 4.0 / 29.0);
}

constexpr double kWhiteX = 0.95047, kWhiteY = 1.0, kWhiteZ = 1.08883;

}  // namespace detail

inline std::array<double, 3> srgb_to_lab(const std::array<std::uint8_t, 3>& rgb) {
  const double r = detail::srgb_decode(rgb[0] / 255.0);
  const double g = detail::srgb_decode(rgb[1] / 255.0);
  const double b = detail::srgb_decode(rgb[2] / 255.0);
  const double X = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double Y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double Z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = detail::lab_f(X / detail::kWhiteX);
  const double fy = detail::lab_f(Y / detail::kWhiteY);
  const double fz = detail::lab_f(Z / detail::kWhiteZ);
  return {116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)};
}

inline std::array<std::uint8_t, 3> lab_to_srgb(const std::array<double, 3>& lab) {
  const double fy = (lab[0] + 16) / 116;
  const double fx = fy + lab[1] / 500;
  const double fz = fy - lab[2] / 200;
  const double X = detail::kWhiteX * detail::lab_f_inv(fx);
  const double Y = detail::kWhiteY * detail::lab_f_inv(fy);
  const double Z = detail::kWhiteZ * detail::lab_f_inv(fz);
  const double r = 3.2404542 * X - 1.5371385 * Y - 0.4985314 * Z;
  const double g = -0.9692660 * X + 1.8760108 * Y + 0.0415560 * Z;
  const double b = 0.0556434 * X - 0.2040259 * Y + 1.0572252 * Z;
  auto quantize = [](double c) {
    const double e = detail::srgb_encode(std::min(std::max(c, 0.0), 1.0));
    const int v = static_cast<int>(std::lround(e * 255.0));
    return static_cast<std::uint8_t>(std::min(std::max(v, 0), 255));
  };
  return {quantize(r), quantize(g), quantize(b)};
}

inline std::array<double, 3> lab_to_unit_cube(const std::array<double, 3>& lab) {
  return {lab[0] / 100.0, (lab[1] + 128.0) / 255.0, (lab[2] + 128.0) / 255.0};
}

inline std::array<double, 3> unit_cube_to_lab(const std::array<double, 3>& c) {
  return {c[0] * 100.0, c[1] * 255.0 - 128.0, c[2] * 255.0 - 128.0};
}

// ---------------------------------------------------------------------------
// Color histograms on a grid over the Lab unit cuboid

/// Histogram of an image's Lab colors on a cell-centered grid over the unit
/// cuboid; bin mass counts pixels, bin coordinates are the cell centers.
struct LabHistogram {
  std::array<Index, 3> resolution{};
  DiscreteSpace<double> grid;  // cell centers, unit mass per bin
  Eigen::VectorXd mass;        // pixel count per bin

  Index bins() const { return grid.size(); }

  Index bin_of(const std::array<double, 3>& unit) const {
    Index idx = 0;
    for (int c = 0; c < 3; ++c) {
      const Index n = resolution[static_cast<size_t>(c)];
      Index b = static_cast<Index>(std::floor(unit[static_cast<size_t>(c)] * double(n)));
      b = std::min(std::max(b, Index(0)), n - 1);
      idx = idx * n + b;
    }
    return idx;
  }
};

inline LabHistogram image_to_histogram(const Image& img, std::array<Index, 3> resolution) {
  for (Index n : resolution)
    if (n < 1) throw config_error("image_to_histogram: resolution must be positive");
  LabHistogram h;
  h.resolution = resolution;
  h.grid = cell_centered_grid_space<double>({resolution[0], resolution[1], resolution[2]},
                                            {0, 0, 0}, {1, 1, 1}, GridWeight::UnitMass);
  h.mass = Eigen::VectorXd::Zero(h.grid.size());
  for (const auto& px : img.pixels) h.mass[h.bin_of(lab_to_unit_cube(srgb_to_lab(px)))] += 1.0;
  return h;
}

// ---------------------------------------------------------------------------
// Barycentric projection and color mapping

/// Row-normalized target coordinates T_i = (R y^1, R y^2, R y^3)_i / (R 1)_i;
/// rows with no mass keep their source coordinates.
inline Eigen::MatrixXd barycentric_map(const Plan<double>& plan,
                                       const Eigen::MatrixXd& target_coords,
                                       const Eigen::MatrixXd& source_coords) {
  if (target_coords.rows() != plan.density.cols() || source_coords.rows() != plan.density.rows())
    throw std::invalid_argument("barycentric_map: coordinate shape mismatch");
  const Eigen::VectorXd row_mass = plan.density.rowwise().sum();
  Eigen::MatrixXd T = plan.density * target_coords;
  for (Index i = 0; i < T.rows(); ++i) {
    if (row_mass[i] > 0)
      T.row(i) /= row_mass[i];
    else
      T.row(i) = source_coords.row(i);
  }
  return T;
}

/// Same map computed from scaling factors of a (possibly separable) kernel,
/// without materializing the plan.
inline Eigen::MatrixXd barycentric_map_scalings(const Kernel<double>& K,
                                                const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                                const Eigen::MatrixXd& target_coords,
                                                const Eigen::MatrixXd& source_coords) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(b.size());
  Eigen::MatrixXd T(a.size(), target_coords.cols());
  const Eigen::VectorXd row_mass = a.cwiseProduct(kernel_apply(K, b, ones));
  for (Index c = 0; c < target_coords.cols(); ++c)
    T.col(c) = a.cwiseProduct(kernel_apply(K, b.cwiseProduct(target_coords.col(c)).eval(), ones));
  for (Index i = 0; i < T.rows(); ++i) {
    if (row_mass[i] > 0)
      T.row(i) /= row_mass[i];
    else
      T.row(i) = source_coords.row(i);
  }
  return T;
}

/// Recolors an image: each pixel goes through its histogram bin's mapped
/// coordinates, back from the unit cuboid to Lab and to sRGB with clamping.
inline Image apply_color_map(const Image& img, const LabHistogram& hist,
                             const Eigen::MatrixXd& T) {
  if (T.rows() != hist.bins() || T.cols() != 3)
    throw std::invalid_argument("apply_color_map: map shape mismatch");
  Image out = img;
  for (auto& px : out.pixels) {
    const Index b = hist.bin_of(lab_to_unit_cube(srgb_to_lab(px)));
    px = lab_to_srgb(unit_cube_to_lab({T(b, 0), T(b, 1), T(b, 2)}));
  }
  return out;
}

}  // namespace uot
