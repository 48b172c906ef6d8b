#pragma once

#include <compare>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace spindepth {

/// Spin quantum number stored as 2J so integer and half-integer values are
/// both exact.
class SpinLength {
 public:
  explicit SpinLength(int two_j);

  static SpinLength from_value(double j);

  int two_j() const noexcept { return two_j_; }
  double value() const noexcept { return 0.5 * two_j_; }
  int dim() const noexcept { return two_j_ + 1; }
  bool is_integer() const noexcept { return two_j_ % 2 == 0; }

  /// J(J+1)
  double casimir() const noexcept { return value() * (value() + 1.0); }

  friend auto operator<=>(const SpinLength&, const SpinLength&) = default;

 private:
  int two_j_;
};

enum class Basis { X, Z };

/// Dense collective spin operators of a single spin-J system.
///
/// In the z basis the usual convention is used (Lz diagonal, Lx real, Ly
/// imaginary). In the x basis Lx = diag(-J..J), Lz is real with positive
/// first off-diagonals, and Ly = -i[Lz, Lx] keeps [Lx, Ly] = iLz.
struct SpinMatrices {
  SpinLength J;
  Basis basis;
  Eigen::MatrixXcd lx;
  Eigen::MatrixXcd ly;
  Eigen::MatrixXcd lz;
};

SpinMatrices build_spin_matrices(SpinLength J, Basis basis);

/// 1/2 sqrt(J(J+1) - m(m+1)), the ladder element between m and m+1.
double ladder_element(SpinLength J, double m);

/// Real symmetric tridiagonal matrix.
struct TridiagonalSym {
  std::vector<double> diag;
  std::vector<double> offdiag;

  std::size_t size() const noexcept { return diag.size(); }

  /// Gershgorin bound on the spectral radius; used as the scale of
  /// residual tolerances.
  double norm_bound() const;

  std::vector<double> apply(std::span<const double> v) const;

  /// Number of eigenvalues strictly below x (Sturm sequence count).
  int count_below(double x) const;
};

/// H = Lx^2 - lambda Lz - lambda2 Lx in the x eigenbasis.
TridiagonalSym squeezing_hamiltonian(SpinLength J, double lambda,
                                     double lambda2 = 0.0);

struct GroundState {
  double energy = 0.0;
  std::vector<double> vector;  // x-basis amplitudes, index i <-> m = -J + i
  double lambda = 0.0;
  double lambda2 = 0.0;
  bool degenerate = false;
  double residual = 0.0;
};

/// Smallest eigenpair of H by Sturm bisection followed by inverse iteration.
///
/// H is taken to be expressed in the x eigenbasis of a spin (H.size()-1)/2.
/// When the two lowest levels are closer than 1e-10 ||H||, the ground space is
/// treated as degenerate and the unit vector inside it with the largest <Lx>
/// is returned. Throws ConvergenceFailure if the residual bound
/// ||Hv - Ev|| <= 1e-10 ||H|| cannot be met.
GroundState ground_state(const TridiagonalSym& H);

/// Ground state of squeezing_hamiltonian(J, lambda, lambda2) with the
/// multipliers recorded.
GroundState squeezing_ground_state(SpinLength J, double lambda,
                                   double lambda2 = 0.0);

struct SpinMoments {
  double mean_lx = 0.0;
  double mean_ly = 0.0;
  double mean_lz = 0.0;
  double mean_lx2 = 0.0;
  double var_lx = 0.0;
};

/// Quadratic forms of an x-basis state vector against dense operators.
/// S must be in the x basis and of matching dimension.
SpinMoments moments(const GroundState& state, const SpinMatrices& S);

/// First and second moments of a real x-basis vector evaluated directly from
/// the tridiagonal structure; <Ly> and the Ly cross terms vanish for real
/// vectors.
struct XBasisMoments {
  double mean_lx = 0.0;
  double mean_lz = 0.0;
  double mean_lx2 = 0.0;
  double mean_ly2 = 0.0;
  double mean_lz2 = 0.0;
  double sym_lxlz = 0.0;  // <(Lx Lz + Lz Lx) / 2>

  double var_lx() const noexcept { return mean_lx2 - mean_lx * mean_lx; }
};

XBasisMoments x_basis_moments(SpinLength J, std::span<const double> v);

}  // namespace spindepth
