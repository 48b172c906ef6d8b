#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spindepth/criteria.hpp"

namespace spindepth {

/// Collective first moments and symmetrized second moments <(J_a J_b + J_b J_a)/2>,
/// index order x, y, z.
struct SymmetricStateMoments {
  int N = 1;
  SpinLength j{1};
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
  /// Sum over particles of <(j_x^(n))^2>, when known.
  std::optional<double> single_x2;
  std::string derivation;

  Eigen::Matrix3d covariance() const { return second - mean * mean.transpose(); }
  MeasurementRecord record() const;
};

SymmetricStateMoments dicke_state_moments(int N, SpinLength j);
/// |J = Nj, m_x = 0>. Needs Nj integer.
MeasurementRecord dicke_moments(int N, SpinLength j);

/// (1 - p) Dicke + p white noise.
MeasurementRecord noisy_dicke_moments(int N, SpinLength j, double p);

/// (1 - p) rho + p times the completely mixed state of all N particles.
SymmetricStateMoments white_noise(const SymmetricStateMoments& s, double p);

/// Product state with every spin along `axis` (0, 1, 2 for x, y, z).
SymmetricStateMoments coherent_moments(int N, SpinLength j, int axis = 2);

/// Ground state of Jx^2 - mu Jz for N qubits in the symmetric subspace.
SymmetricStateMoments squeezed_state_moments(int N, double mu);

/// Replaces m of the N qubits by the completely mixed state. The input must
/// be permutation symmetric; correlations outside [-1/4, 1/4] throw
/// NotSymmetric.
SymmetricStateMoments decohere_particles(const SymmetricStateMoments& s, int m);

/// Exact moments of the product of the given group state vectors, each in
/// the (2j+1)^k product basis of its k particles (z basis per particle,
/// particle 0 the fastest index).
SymmetricStateMoments product_moments(SpinLength j, std::span<const int> sizes,
                                      std::span<const Eigen::VectorXcd> states);

enum class GroupState { haar, squeezed, mixed };

/// Moments of a random pure product of group states with the given group
/// sizes. Haar groups are limited to Hilbert dimension 4096
/// (SizeLimitExceeded). Squeezed groups are ground states of Lx^2 - lambda Lz
/// on the symmetric subspace for a random lambda, rotated about x by a random
/// angle. `mixed` picks one of the two per group.
MeasurementRecord random_producible_moments(SpinLength j, std::span<const int> partition,
                                            std::uint64_t seed,
                                            GroupState kind = GroupState::haar);

struct TightnessReport {
  double script_X = 0.0;  // sum over groups of <(j_x^(l))^2>
  double bound = 0.0;     // Nj/2, the value for the fully polarized state
  bool bound_satisfied = false;  // script_X <= bound
  bool strict = false;           // script_X < bound
  double second_moment_perp = 0.0;
  double perp_lower = 0.0;  // Nj(Nj + 1/2)
  double perp_upper = 0.0;  // Nj(Nj + 1)
  bool perp_in_range = false;
};

/// For a permutation-symmetric state and equal-or-unequal group sizes
/// (singletons when empty). Needs single_x2 (MissingFields otherwise).
TightnessReport tightness_diagnostics(const SymmetricStateMoments& s,
                                      std::span<const int> partition = {});

}  // namespace spindepth
