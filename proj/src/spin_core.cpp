#include "spindepth/spin_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spindepth/errors.hpp"

namespace spindepth {

SpinLength::SpinLength(int two_j) : two_j_(two_j) {
  if (two_j < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "spin length requires 2J >= 1, got " + std::to_string(two_j));
  }
}

SpinLength SpinLength::from_value(double j) {
  const double twice = 2.0 * j;
  const double rounded = std::round(twice);
  if (std::abs(twice - rounded) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument,
                "spin must be a multiple of 1/2, got " + std::to_string(j));
  }
  return SpinLength(static_cast<int>(rounded));
}

double ladder_element(SpinLength J, double m) {
  const double arg = J.casimir() - m * (m + 1.0);
  return 0.5 * std::sqrt(std::max(arg, 0.0));
}

SpinMatrices build_spin_matrices(SpinLength J, Basis basis) {
  const int d = J.dim();
  const double j = J.value();
  using Mat = Eigen::MatrixXcd;
  const std::complex<double> I(0.0, 1.0);

  SpinMatrices S{J, basis, Mat::Zero(d, d), Mat::Zero(d, d), Mat::Zero(d, d)};
  if (basis == Basis::Z) {
    // index i <-> m = J - i
    Mat raise = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
      const double m = j - i;
      S.lz(i, i) = m;
      if (i > 0) raise(i - 1, i) = 2.0 * ladder_element(J, m);
    }
    const Mat lower = raise.adjoint();
    S.lx = 0.5 * (raise + lower);
    S.ly = (raise - lower) / (2.0 * I);
  } else {
    // index i <-> m_x = -J + i
    for (int i = 0; i < d; ++i) {
      const double m = -j + i;
      S.lx(i, i) = m;
      if (i + 1 < d) {
        const double c = ladder_element(J, m);
        S.lz(i, i + 1) = c;
        S.lz(i + 1, i) = c;
      }
    }
    S.ly = -I * (S.lz * S.lx - S.lx * S.lz);
  }
  return S;
}

double TridiagonalSym::norm_bound() const {
  double bound = 0.0;
  const std::size_t n = diag.size();
  for (std::size_t i = 0; i < n; ++i) {
    double r = std::abs(diag[i]);
    if (i > 0) r += std::abs(offdiag[i - 1]);
    if (i + 1 < n) r += std::abs(offdiag[i]);
    bound = std::max(bound, r);
  }
  return bound;
}

std::vector<double> TridiagonalSym::apply(std::span<const double> v) const {
  const std::size_t n = diag.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = diag[i] * v[i];
    if (i > 0) s += offdiag[i - 1] * v[i - 1];
    if (i + 1 < n) s += offdiag[i] * v[i + 1];
    out[i] = s;
  }
  return out;
}

int TridiagonalSym::count_below(double x) const {
  double emax2 = 1.0;
  for (double e : offdiag) emax2 = std::max(emax2, e * e);
  const double pivmin = std::numeric_limits<double>::min() * emax2;

  int count = 0;
  double q = diag[0] - x;
  if (std::abs(q) < pivmin) q = -pivmin;
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < diag.size(); ++i) {
    const double e = offdiag[i - 1];
    q = (diag[i] - x) - e * e / q;
    if (std::abs(q) < pivmin) q = -pivmin;
    if (q < 0.0) ++count;
  }
  return count;
}

TridiagonalSym squeezing_hamiltonian(SpinLength J, double lambda,
                                     double lambda2) {
  const int d = J.dim();
  TridiagonalSym H;
  H.diag.resize(d);
  H.offdiag.resize(d - 1);
  for (int i = 0; i < d; ++i) {
    const double m = -J.value() + i;
    H.diag[i] = m * m - lambda2 * m;
    if (i + 1 < d) H.offdiag[i] = -lambda * ladder_element(J, m);
  }
  return H;
}

namespace {

// LU factorization of a shifted tridiagonal matrix with partial pivoting,
// following the layout of LAPACK's gttrf/gtts2.
class ShiftedTridiagonalLU {
 public:
  ShiftedTridiagonalLU(const TridiagonalSym& H, double shift, double scale)
      : n_(H.size()),
        dl_(H.offdiag),
        d_(H.diag),
        du_(H.offdiag),
        du2_(n_ > 2 ? n_ - 2 : 0, 0.0),
        swapped_(n_ > 0 ? n_ - 1 : 0, false) {
    for (double& x : d_) x -= shift;
    for (std::size_t i = 0; i + 1 < n_; ++i) {
      if (std::abs(d_[i]) >= std::abs(dl_[i])) {
        if (d_[i] != 0.0) {
          const double fact = dl_[i] / d_[i];
          dl_[i] = fact;
          d_[i + 1] -= fact * du_[i];
        }
      } else {
        const double fact = d_[i] / dl_[i];
        d_[i] = dl_[i];
        dl_[i] = fact;
        const double temp = du_[i];
        du_[i] = d_[i + 1];
        d_[i + 1] = temp - fact * d_[i + 1];
        if (i + 2 < n_) {
          du2_[i] = du_[i + 1];
          du_[i + 1] = -fact * du_[i + 1];
        }
        swapped_[i] = true;
      }
    }
    // An exactly singular pivot means the shift hit an eigenvalue; a tiny
    // replacement still yields the eigenvector direction.
    const double tiny = std::numeric_limits<double>::epsilon() *
                        std::max(scale, std::numeric_limits<double>::min());
    for (double& x : d_) {
      if (std::abs(x) < tiny) x = std::copysign(tiny, x == 0.0 ? 1.0 : x);
    }
  }

  void solve(std::vector<double>& b) const {
    for (std::size_t i = 0; i + 1 < n_; ++i) {
      if (!swapped_[i]) {
        b[i + 1] -= dl_[i] * b[i];
      } else {
        const double temp = b[i];
        b[i] = b[i + 1];
        b[i + 1] = temp - dl_[i] * b[i];
      }
    }
    b[n_ - 1] /= d_[n_ - 1];
    if (n_ > 1) b[n_ - 2] = (b[n_ - 2] - du_[n_ - 2] * b[n_ - 1]) / d_[n_ - 2];
    for (std::size_t k = n_ - 2; k-- > 0;) {
      b[k] = (b[k] - du_[k] * b[k + 1] - du2_[k] * b[k + 2]) / d_[k];
    }
  }

 private:
  std::size_t n_;
  std::vector<double> dl_, d_, du_, du2_;
  std::vector<bool> swapped_;
};

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  for (double& x : v) x /= n;
}

double residual_norm(const TridiagonalSym& H, std::span<const double> v,
                     double energy) {
  const auto Hv = H.apply(v);
  double r2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = Hv[i] - energy * v[i];
    r2 += r * r;
  }
  return std::sqrt(r2);
}

double smallest_eigenvalue(const TridiagonalSym& H) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const std::size_t n = H.size();
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(H.offdiag[i - 1]);
    if (i + 1 < n) r += std::abs(H.offdiag[i]);
    lo = std::min(lo, H.diag[i] - r);
    hi = std::max(hi, H.diag[i] + r);
  }
  // Widen so that count_below(lo) == 0 and count_below(hi) >= 1 strictly.
  const double pad = 1e-12 * std::max(1.0, hi - lo);
  lo -= pad;
  hi += pad;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (H.count_below(mid) >= 1) {
      hi = mid;
    } else {
      lo = mid;
    }
    if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() *
                       std::max(std::abs(lo), std::abs(hi))) {
      break;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> start_vector(std::size_t n, double phase) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = 1.0 + 0.37 * std::cos(2.1 * static_cast<double>(i) + phase);
  }
  normalize(v);
  return v;
}

void fix_sign(std::vector<double>& v) {
  std::size_t imax = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[imax]) * (1.0 + 1e-12)) imax = i;
  }
  if (v[imax] < 0.0) {
    for (double& x : v) x = -x;
  }
}

}  // namespace

GroundState ground_state(const TridiagonalSym& H) {
  const std::size_t n = H.size();
  if (n < 2 || H.offdiag.size() + 1 != n) {
    throw Error(ErrorCode::DimensionMismatch,
                "ground_state requires a tridiagonal matrix of size >= 2");
  }
  const double scale = std::max(H.norm_bound(), 1e-300);
  const double tol = 1e-10 * scale;
  const double e0 = smallest_eigenvalue(H);
  const bool degenerate = H.count_below(e0 + tol) >= 2;

  const ShiftedTridiagonalLU lu(H, e0, scale);
  GroundState gs;
  gs.degenerate = degenerate;

  if (!degenerate) {
    auto v = start_vector(n, 0.3);
    for (int it = 0; it < 12; ++it) {
      lu.solve(v);
      normalize(v);
      const auto Hv = H.apply(v);
      const double e = dot(v, Hv);
      if (residual_norm(H, v, e) <= 0.01 * tol && it >= 1) break;
    }
    gs.vector = std::move(v);
  } else {
    // Two-vector subspace iteration captures the (near-)degenerate pair; the
    // representative is the Lx-maximal direction inside it.
    auto u = start_vector(n, 0.3);
    auto w = start_vector(n, 1.9);
    for (std::size_t i = 0; i < n; ++i) w[i] *= (i % 2 == 0 ? 1.0 : -1.0);
    for (int it = 0; it < 8; ++it) {
      lu.solve(u);
      lu.solve(w);
      normalize(u);
      const double p = dot(u, w);
      for (std::size_t i = 0; i < n; ++i) w[i] -= p * u[i];
      normalize(w);
    }
    const double J = 0.5 * static_cast<double>(n - 1);
    double a = 0.0, b = 0.0, c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = -J + static_cast<double>(i);
      a += m * u[i] * u[i];
      b += m * u[i] * w[i];
      c += m * w[i] * w[i];
    }
    // Largest eigenvector of [[a, b], [b, c]].
    const double theta = 0.5 * std::atan2(2.0 * b, a - c);
    const double cu = std::cos(theta), sw = std::sin(theta);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = cu * u[i] + sw * w[i];
    normalize(v);
    gs.vector = std::move(v);
  }

  fix_sign(gs.vector);
  gs.energy = dot(gs.vector, H.apply(gs.vector));
  gs.residual = residual_norm(H, gs.vector, gs.energy);
  if (!(gs.residual <= tol)) {
    throw Error(ErrorCode::ConvergenceFailure,
                "inverse iteration residual " + std::to_string(gs.residual) +
                    " exceeds " + std::to_string(tol));
  }
  return gs;
}

GroundState squeezing_ground_state(SpinLength J, double lambda,
                                   double lambda2) {
  GroundState gs = ground_state(squeezing_hamiltonian(J, lambda, lambda2));
  gs.lambda = lambda;
  gs.lambda2 = lambda2;
  return gs;
}

SpinMoments moments(const GroundState& state, const SpinMatrices& S) {
  const auto d = static_cast<Eigen::Index>(state.vector.size());
  if (d != S.lx.rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                "state dimension " + std::to_string(d) +
                    " does not match spin matrices of dimension " +
                    std::to_string(S.lx.rows()));
  }
  if (S.basis != Basis::X) {
    throw Error(ErrorCode::InvalidArgument,
                "ground-state vectors are x-basis amplitudes; pass x-basis "
                "spin matrices");
  }
  Eigen::VectorXcd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = state.vector[i];
  auto expect = [&](const Eigen::MatrixXcd& op) {
    return v.dot(op * v).real();
  };
  SpinMoments m;
  m.mean_lx = expect(S.lx);
  m.mean_ly = expect(S.ly);
  m.mean_lz = expect(S.lz);
  const Eigen::VectorXcd lxv = S.lx * v;
  m.mean_lx2 = lxv.squaredNorm();
  m.var_lx = m.mean_lx2 - m.mean_lx * m.mean_lx;
  return m;
}

XBasisMoments x_basis_moments(SpinLength J, std::span<const double> v) {
  const std::size_t n = v.size();
  if (n != static_cast<std::size_t>(J.dim())) {
    throw Error(ErrorCode::DimensionMismatch,
                "vector length does not match 2J+1");
  }
  XBasisMoments out;
  std::vector<double> lzv(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = -J.value() + static_cast<double>(i);
    const double p = v[i] * v[i];
    out.mean_lx += m * p;
    out.mean_lx2 += m * m * p;
    if (i + 1 < n) {
      const double c = ladder_element(J, m);
      lzv[i] += c * v[i + 1];
      lzv[i + 1] += c * v[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double m = -J.value() + static_cast<double>(i);
    out.mean_lz += v[i] * lzv[i];
    out.mean_lz2 += lzv[i] * lzv[i];
    out.sym_lxlz += m * v[i] * lzv[i];
  }
  out.mean_ly2 = J.casimir() - out.mean_lx2 - out.mean_lz2;
  return out;
}

}  // namespace spindepth
