#pragma once

#include "uot/types.hpp"

#include <optional>
#include <vector>

namespace uot {

/// Finite set of points carrying a nonnegative reference measure.
/// `points` has one coordinate row per point; `weights` holds the reference
/// mass per point.  Spaces produced by the grid factories keep per-axis
/// metadata so quadratic costs on them can use separable kernels.
template <class Scalar>
struct DiscreteSpace {
  Matrix<Scalar> points;   // size() x dim()
  Vector<Scalar> weights;  // reference measure, >= 0

  std::vector<Index> grid_dims;            // empty unless axis-aligned uniform grid
  std::vector<Vector<Scalar>> grid_axes;   // per-axis coordinates (row-major layout)

  Index size() const { return weights.size(); }
  Index dim() const { return points.cols(); }
  bool uniform_grid() const { return !grid_dims.empty(); }
};

using DiscreteSpaceXd = DiscreteSpace<double>;

enum class GridWeight {
  Probability,  // weights sum to one (discretized reference probability)
  UnitMass,     // unit mass per point
};

template <class Scalar>
DiscreteSpace<Scalar> make_space(Matrix<Scalar> points, Vector<Scalar> weights) {
  if (points.rows() != weights.size() || weights.size() < 1)
    throw std::invalid_argument("make_space: points and weights must have equal, nonzero length");
  for (Index i = 0; i < weights.size(); ++i)
    if (!(weights[i] >= 0) || !std::isfinite(weights[i]))
      throw std::invalid_argument("make_space: weights must be finite and >= 0");
  DiscreteSpace<Scalar> s;
  s.points = std::move(points);
  s.weights = std::move(weights);
  return s;
}

template <class Scalar>
DiscreteSpace<Scalar> make_space_1d(Vector<Scalar> coords, Vector<Scalar> weights) {
  Matrix<Scalar> pts(coords.size(), 1);
  pts.col(0) = coords;
  return make_space<Scalar>(std::move(pts), std::move(weights));
}

namespace detail {

template <class Scalar>
Vector<Scalar> linspace(Index n, Scalar lo, Scalar hi, bool cell_centers) {
  Vector<Scalar> x(n);
  if (cell_centers) {
    const Scalar h = (hi - lo) / Scalar(n);
    for (Index i = 0; i < n; ++i) x[i] = lo + h * (Scalar(i) + Scalar(0.5));
  } else if (n == 1) {
    x[0] = lo;
  } else {
    const Scalar h = (hi - lo) / Scalar(n - 1);
    for (Index i = 0; i < n; ++i) x[i] = lo + h * Scalar(i);
  }
  return x;
}

template <class Scalar>
DiscreteSpace<Scalar> grid_space(const std::vector<Index>& dims,
                                 const std::vector<Scalar>& lo,
                                 const std::vector<Scalar>& hi,
                                 GridWeight weight, bool cell_centers) {
  const Index d = static_cast<Index>(dims.size());
  if (d < 1 || lo.size() != dims.size() || hi.size() != dims.size())
    throw std::invalid_argument("grid_space: inconsistent dims/extents");
  Index n = 1;
  std::vector<Vector<Scalar>> axes(dims.size());
  for (size_t a = 0; a < dims.size(); ++a) {
    if (dims[a] < 1) throw std::invalid_argument("grid_space: resolution must be positive");
    axes[a] = linspace<Scalar>(dims[a], lo[a], hi[a], cell_centers);
    n *= dims[a];
  }
  DiscreteSpace<Scalar> s;
  s.points.resize(n, d);
  // row-major point order: last axis fastest
  for (Index i = 0; i < n; ++i) {
    Index rest = i;
    for (Index a = d - 1; a >= 0; --a) {
      const Index na = dims[static_cast<size_t>(a)];
      s.points(i, a) = axes[static_cast<size_t>(a)][rest % na];
      rest /= na;
    }
  }
  const Scalar w = weight == GridWeight::Probability ? Scalar(1) / Scalar(n) : Scalar(1);
  s.weights = Vector<Scalar>::Constant(n, w);
  s.grid_dims = dims;
  s.grid_axes = std::move(axes);
  return s;
}

}  // namespace detail

/// Uniform grid with endpoint sampling (the usual discretization of a box).
template <class Scalar>
DiscreteSpace<Scalar> uniform_grid_space(const std::vector<Index>& dims,
                                         const std::vector<Scalar>& lo,
                                         const std::vector<Scalar>& hi,
                                         GridWeight weight = GridWeight::Probability) {
  return detail::grid_space<Scalar>(dims, lo, hi, weight, false);
}

/// 1-D segment [lo, hi] with n uniform samples.
template <class Scalar>
DiscreteSpace<Scalar> segment_space(Index n, Scalar lo = 0, Scalar hi = 1,
                                    GridWeight weight = GridWeight::Probability) {
  return detail::grid_space<Scalar>({n}, {lo}, {hi}, weight, false);
}

/// Cell-centered grid (used for histogram bins).
template <class Scalar>
DiscreteSpace<Scalar> cell_centered_grid_space(const std::vector<Index>& dims,
                                               const std::vector<Scalar>& lo,
                                               const std::vector<Scalar>& hi,
                                               GridWeight weight = GridWeight::UnitMass) {
  return detail::grid_space<Scalar>(dims, lo, hi, weight, true);
}

/// Ground cost c(x_i, y_j) in [0, +inf].  When both spaces are axis-aligned
/// uniform grids and the cost decomposes as a sum over axes, `axis_factors`
/// holds the per-axis 1-D costs (entry sum over axes equals `dense`).
template <class Scalar>
struct CostMatrix {
  Matrix<Scalar> dense;                      // may be left empty for grid-only storage
  std::vector<Matrix<Scalar>> axis_factors;  // per-axis (I_a x J_a) summands
  std::vector<Index> row_dims, col_dims;

  bool has_dense() const { return dense.size() > 0; }
  bool separable() const { return !axis_factors.empty(); }
  Index rows() const {
    if (has_dense()) return dense.rows();
    Index n = 1;
    for (Index d : row_dims) n *= d;
    return n;
  }
  Index cols() const {
    if (has_dense()) return dense.cols();
    Index n = 1;
    for (Index d : col_dims) n *= d;
    return n;
  }
};

using CostMatrixXd = CostMatrix<double>;

namespace detail {

template <class Scalar>
bool grids_compatible(const DiscreteSpace<Scalar>& X, const DiscreteSpace<Scalar>& Y) {
  return X.uniform_grid() && Y.uniform_grid() && X.grid_dims.size() == Y.grid_dims.size();
}

template <class Scalar>
void fill_quadratic_axes(CostMatrix<Scalar>& c, const DiscreteSpace<Scalar>& X,
                         const DiscreteSpace<Scalar>& Y) {
  c.row_dims = X.grid_dims;
  c.col_dims = Y.grid_dims;
  c.axis_factors.resize(X.grid_dims.size());
  for (size_t a = 0; a < X.grid_dims.size(); ++a) {
    const auto& xa = X.grid_axes[a];
    const auto& ya = Y.grid_axes[a];
    Matrix<Scalar>& f = c.axis_factors[a];
    f.resize(xa.size(), ya.size());
    for (Index i = 0; i < xa.size(); ++i)
      for (Index j = 0; j < ya.size(); ++j) {
        const Scalar d = xa[i] - ya[j];
        f(i, j) = d * d;
      }
  }
}

}  // namespace detail

/// Squared Euclidean cost |x - y|^2, tagged separable on uniform grids.
template <class Scalar>
CostMatrix<Scalar> build_cost_quadratic(const DiscreteSpace<Scalar>& X,
                                        const DiscreteSpace<Scalar>& Y) {
  if (X.dim() != Y.dim())
    throw std::invalid_argument("build_cost_quadratic: coordinate dimensions differ");
  CostMatrix<Scalar> c;
  c.dense.resize(X.size(), Y.size());
  for (Index i = 0; i < X.size(); ++i)
    for (Index j = 0; j < Y.size(); ++j)
      c.dense(i, j) = (X.points.row(i) - Y.points.row(j)).squaredNorm();
  if (detail::grids_compatible(X, Y)) detail::fill_quadratic_axes(c, X, Y);
  return c;
}

/// Separable-only variant for grids too large to materialize densely.
template <class Scalar>
CostMatrix<Scalar> build_cost_quadratic_separable(const DiscreteSpace<Scalar>& X,
                                                  const DiscreteSpace<Scalar>& Y) {
  if (!detail::grids_compatible(X, Y))
    throw std::invalid_argument("build_cost_quadratic_separable: both spaces must be uniform grids");
  CostMatrix<Scalar> c;
  detail::fill_quadratic_axes(c, X, Y);
  return c;
}

/// Cost -log(cos^2_+((pi/2) d/cutoff)) of the metric that mixes transport and
/// growth; entries are +inf exactly on {d >= cutoff}.
template <class Scalar>
CostMatrix<Scalar> build_cost_wf(const DiscreteSpace<Scalar>& X, const DiscreteSpace<Scalar>& Y,
                                 Scalar cutoff) {
  if (X.dim() != Y.dim())
    throw std::invalid_argument("build_cost_wf: coordinate dimensions differ");
  if (!(cutoff > 0)) throw std::invalid_argument("build_cost_wf: cutoff must be positive");
  const Scalar half_pi = Scalar(M_PI) / 2;
  CostMatrix<Scalar> c;
  c.dense.resize(X.size(), Y.size());
  for (Index i = 0; i < X.size(); ++i)
    for (Index j = 0; j < Y.size(); ++j) {
      const Scalar d = (X.points.row(i) - Y.points.row(j)).norm();
      c.dense(i, j) = d >= cutoff ? detail::infinity<Scalar>()
                                  : -2 * std::log(std::cos(half_pi * d / cutoff));
    }
  return c;
}

/// Entrywise exponential exp(-C/eps) of a cost, with exp(-inf) = 0.
/// Separable costs exponentiate per axis so the factored form is preserved;
/// stabilized kernels additionally absorb the potentials u, v.
template <class Scalar>
struct Kernel {
  Scalar epsilon = 1;
  Matrix<Scalar> dense;
  std::vector<Matrix<Scalar>> axis_factors;  // entry product over axes
  std::vector<Index> row_dims, col_dims;

  bool has_dense() const { return dense.size() > 0; }
  bool separable() const { return !axis_factors.empty(); }
  Index rows() const {
    if (has_dense()) return dense.rows();
    Index n = 1;
    for (Index d : row_dims) n *= d;
    return n;
  }
  Index cols() const {
    if (has_dense()) return dense.cols();
    Index n = 1;
    for (Index d : col_dims) n *= d;
    return n;
  }
};

using KernelXd = Kernel<double>;

template <class Scalar>
Kernel<Scalar> gibbs_kernel(const CostMatrix<Scalar>& C, Scalar eps) {
  if (!(eps > 0)) throw std::invalid_argument("gibbs_kernel: eps must be positive");
  Kernel<Scalar> k;
  k.epsilon = eps;
  // scalar exp keeps this bit-identical to the stabilized kernel at zero
  // potentials (vectorized exp may differ in the last ulp)
  auto exp_neg = [eps](const Matrix<Scalar>& c) {
    Matrix<Scalar> out(c.rows(), c.cols());
    for (Index i = 0; i < c.rows(); ++i)
      for (Index j = 0; j < c.cols(); ++j) out(i, j) = std::exp(-c(i, j) / eps);
    return out;
  };
  if (C.has_dense()) k.dense = exp_neg(C.dense);
  k.axis_factors.reserve(C.axis_factors.size());
  for (const auto& f : C.axis_factors) k.axis_factors.push_back(exp_neg(f));
  k.row_dims = C.row_dims;
  k.col_dims = C.col_dims;
  return k;
}

/// Kernel with absorbed log-domain potentials, exp((u_i + v_j - C_ij)/eps).
/// Always dense: absorption destroys the factored grid structure.
template <class Scalar>
Kernel<Scalar> stabilized_kernel(const CostMatrix<Scalar>& C, const Vector<Scalar>& u,
                                 const Vector<Scalar>& v, Scalar eps) {
  if (!(eps > 0)) throw std::invalid_argument("stabilized_kernel: eps must be positive");
  if (!C.has_dense()) throw std::invalid_argument("stabilized_kernel: requires a dense cost");
  if (u.size() != C.dense.rows() || v.size() != C.dense.cols())
    throw std::invalid_argument("stabilized_kernel: potential lengths do not match cost");
  Kernel<Scalar> k;
  k.epsilon = eps;
  k.dense.resize(C.dense.rows(), C.dense.cols());
  for (Index i = 0; i < C.dense.rows(); ++i)
    for (Index j = 0; j < C.dense.cols(); ++j)
      k.dense(i, j) = std::exp((u[i] + v[j] - C.dense(i, j)) / eps);
  return k;
}

namespace detail {

// Applies the tensor-product operator given by per-axis matrices to a flat
// row-major tensor: one 1-D contraction per axis.
template <class Scalar>
Vector<Scalar> separable_apply(const std::vector<Matrix<Scalar>>& factors,
                               std::vector<Index> dims, const Vector<Scalar>& x,
                               bool transpose) {
  using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Vector<Scalar> cur = x;
  for (size_t a = 0; a < factors.size(); ++a) {
    const Index in_a = dims[a];
    const Index out_a = transpose ? factors[a].cols() : factors[a].rows();
    Index left = 1, right = 1;
    for (size_t b = 0; b < a; ++b) left *= dims[b];
    for (size_t b = a + 1; b < dims.size(); ++b) right *= dims[b];
    Vector<Scalar> next(left * out_a * right);
    for (Index l = 0; l < left; ++l) {
      Eigen::Map<const RowMajor> in(cur.data() + l * in_a * right, in_a, right);
      Eigen::Map<RowMajor> out(next.data() + l * out_a * right, out_a, right);
      if (transpose)
        out.noalias() = factors[a].transpose() * in;
      else
        out.noalias() = factors[a] * in;
    }
    dims[a] = out_a;
    cur = std::move(next);
  }
  return cur;
}

}  // namespace detail

/// K (b .* w), the half-step operator of the scaling iterations.
template <class Scalar>
Vector<Scalar> kernel_apply(const Kernel<Scalar>& K, const Vector<Scalar>& b,
                            const Vector<Scalar>& w) {
  if (b.size() != K.cols() || w.size() != K.cols())
    throw std::invalid_argument("kernel_apply: length mismatch");
  Vector<Scalar> bw = b.cwiseProduct(w);
  if (K.separable()) {
    std::vector<Index> dims = K.col_dims;
    return detail::separable_apply<Scalar>(K.axis_factors, dims, bw, false);
  }
  return K.dense * bw;
}

/// K^T (a .* w), the mirrored half-step.
template <class Scalar>
Vector<Scalar> kernel_apply_transpose(const Kernel<Scalar>& K, const Vector<Scalar>& a,
                                      const Vector<Scalar>& w) {
  if (a.size() != K.rows() || w.size() != K.rows())
    throw std::invalid_argument("kernel_apply_transpose: length mismatch");
  Vector<Scalar> aw = a.cwiseProduct(w);
  if (K.separable()) {
    std::vector<Index> dims = K.row_dims;
    return detail::separable_apply<Scalar>(K.axis_factors, dims, aw, true);
  }
  return K.dense.transpose() * aw;
}

/// Expands a factored kernel to dense storage (small problems only).
template <class Scalar>
Matrix<Scalar> kernel_to_dense(const Kernel<Scalar>& K) {
  if (K.has_dense()) return K.dense;
  const Index n = K.rows(), m = K.cols();
  if (n * m > Index(1) << 26)
    throw std::invalid_argument("kernel_to_dense: kernel too large to materialize");
  Matrix<Scalar> out = Matrix<Scalar>::Ones(n, m);
  // entry (i,j) = prod_a factor_a(i_a, j_a), row-major multi-index on both sides
  for (Index i = 0; i < n; ++i) {
    Index ri = i;
    std::vector<Index> mi(K.row_dims.size());
    for (Index a = Index(K.row_dims.size()) - 1; a >= 0; --a) {
      mi[a] = ri % K.row_dims[a];
      ri /= K.row_dims[a];
    }
    for (Index j = 0; j < m; ++j) {
      Index rj = j;
      Scalar v = 1;
      for (Index a = Index(K.col_dims.size()) - 1; a >= 0; --a) {
        const Index ja = rj % K.col_dims[a];
        rj /= K.col_dims[a];
        v *= K.axis_factors[a](mi[a], ja);
      }
      out(i, j) = v;
    }
  }
  return out;
}

}  // namespace uot
