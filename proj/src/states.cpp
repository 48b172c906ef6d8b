#include "spindepth/states.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "spindepth/errors.hpp"
#include "spindepth/spin_core.hpp"

namespace spindepth {

namespace {

void check_N(int N) {
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "N must be positive");
}

Eigen::Matrix3d diag3(double a, double b, double c) { return Eigen::Vector3d(a, b, c).asDiagonal(); }

// Moments of an x-basis spin-J state vector, as symmetrized 3x3 blocks.
void x_basis_blocks(SpinLength J, std::span<const double> v, Eigen::Vector3d& mean,
                    Eigen::Matrix3d& second) {
  const auto m = x_basis_moments(J, v);
  mean = Eigen::Vector3d(m.mean_lx, 0.0, m.mean_lz);
  second << m.mean_lx2, 0.0, m.sym_lxlz,  //
      0.0, m.mean_ly2, 0.0,               //
      m.sym_lxlz, 0.0, m.mean_lz2;
}

// (sum_n op^(n)) v for k sites of dimension d, site 0 the fastest digit.
Eigen::VectorXcd apply_collective(const Eigen::MatrixXcd& op, int k, const Eigen::VectorXcd& v) {
  const int d = static_cast<int>(op.rows());
  const Eigen::Index dim = v.size();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim);
  Eigen::Index stride = 1;
  for (int site = 0; site < k; ++site, stride *= d) {
    for (Eigen::Index idx = 0; idx < dim; ++idx) {
      const int digit = static_cast<int>((idx / stride) % d);
      const Eigen::Index base = idx - digit * stride;
      for (int a = 0; a < d; ++a) out[base + a * stride] += op(a, digit) * v[idx];
    }
  }
  return out;
}

void group_moments(const SpinMatrices& single, int k, const Eigen::VectorXcd& v,
                   Eigen::Vector3d& mean, Eigen::Matrix3d& second) {
  const Eigen::VectorXcd w[3] = {apply_collective(single.lx, k, v),
                                 apply_collective(single.ly, k, v),
                                 apply_collective(single.lz, k, v)};
  for (int a = 0; a < 3; ++a) {
    mean(a) = v.dot(w[a]).real();
    for (int b = 0; b < 3; ++b) second(a, b) = w[a].dot(w[b]).real();
  }
}

}  // namespace

MeasurementRecord SymmetricStateMoments::record() const {
  MeasurementRecord r;
  r.N = N;
  r.j = j;
  r.var_Jx = std::max(0.0, second(0, 0) - mean(0) * mean(0));
  r.mean_Jx = mean(0);
  r.mean_Jy = mean(1);
  r.mean_Jz = mean(2);
  r.second_moment_perp = second(1, 1) + second(2, 2);
  r.var_Jy = std::max(0.0, second(1, 1) - mean(1) * mean(1));
  r.var_Jz = std::max(0.0, second(2, 2) - mean(2) * mean(2));
  return r;
}

SymmetricStateMoments dicke_state_moments(int N, SpinLength j) {
  check_N(N);
  const SpinLength J(N * j.two_j());
  if (!J.is_integer()) {
    throw Error(ErrorCode::NonIntegerSpin, "the m_x = 0 Dicke state needs Nj integer");
  }
  const double c = J.casimir();
  SymmetricStateMoments s;
  s.N = N;
  s.j = j;
  s.second = diag3(0.0, c / 2.0, c / 2.0);
  if (j.two_j() == 1) s.single_x2 = N / 4.0;
  s.derivation = "dicke";
  return s;
}

MeasurementRecord dicke_moments(int N, SpinLength j) { return dicke_state_moments(N, j).record(); }

SymmetricStateMoments white_noise(const SymmetricStateMoments& s, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::OutOfRange, "p must lie in [0, 1]");
  const double white = s.N * s.j.casimir() / 3.0;
  SymmetricStateMoments out = s;
  out.mean = (1.0 - p) * s.mean;
  out.second = (1.0 - p) * s.second + p * diag3(white, white, white);
  if (s.single_x2) out.single_x2 = (1.0 - p) * *s.single_x2 + p * white;
  out.derivation = s.derivation + "+white";
  return out;
}

MeasurementRecord noisy_dicke_moments(int N, SpinLength j, double p) {
  auto s = white_noise(dicke_state_moments(N, j), p);
  s.derivation = "noisy_dicke";
  return s.record();
}

SymmetricStateMoments coherent_moments(int N, SpinLength j, int axis) {
  check_N(N);
  if (axis < 0 || axis > 2) throw Error(ErrorCode::InvalidArgument, "axis must be 0, 1 or 2");
  const double nj = N * j.value();
  SymmetricStateMoments s;
  s.N = N;
  s.j = j;
  s.mean(axis) = nj;
  s.second = diag3(nj / 2.0, nj / 2.0, nj / 2.0);
  s.second(axis, axis) = nj * nj;
  s.single_x2 = axis == 0 ? N * j.value() * j.value() : nj / 2.0;
  s.derivation = "coherent";
  return s;
}

SymmetricStateMoments squeezed_state_moments(int N, double mu) {
  if (N < 2 || N % 2 != 0) throw Error(ErrorCode::InvalidArgument, "N must be even and positive");
  if (!(mu >= 0.0)) throw Error(ErrorCode::InvalidArgument, "mu must be non-negative");
  const SpinLength J(N);
  const auto gs = squeezing_ground_state(J, mu);
  SymmetricStateMoments s;
  s.N = N;
  s.j = SpinLength(1);
  x_basis_blocks(J, gs.vector, s.mean, s.second);
  s.single_x2 = N / 4.0;
  s.derivation = "squeezed";
  return s;
}

SymmetricStateMoments decohere_particles(const SymmetricStateMoments& s, int m) {
  if (s.j.two_j() != 1) throw Error(ErrorCode::NotQubit, "decoherence model is for qubits");
  if (m < 0 || m > s.N) throw Error(ErrorCode::OutOfRange, "need 0 <= m <= N");
  const int N = s.N;
  const int n = N - m;
  SymmetricStateMoments out = s;
  out.derivation = s.derivation + "+decohered";
  out.mean = s.mean * (static_cast<double>(n) / N);
  Eigen::Matrix3d corr = Eigen::Matrix3d::Zero();
  if (N >= 2) {
    // single-qubit <{j_a, j_b}>/2 is delta_ab / 4
    corr = (s.second - Eigen::Matrix3d::Identity() * (N / 4.0)) / (static_cast<double>(N) * (N - 1));
    if ((corr.array().abs() > 0.25 + 1e-12).any()) {
      throw Error(ErrorCode::NotSymmetric,
                  "two-particle correlations outside [-1/4, 1/4]; input is not permutation symmetric");
    }
  }
  out.second = Eigen::Matrix3d::Identity() * (N / 4.0) + corr * (static_cast<double>(n) * (n - 1));
  out.single_x2 = N / 4.0;
  return out;
}

SymmetricStateMoments product_moments(SpinLength j, std::span<const int> sizes,
                                      std::span<const Eigen::VectorXcd> states) {
  if (sizes.size() != states.size() || sizes.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "one state vector per group required");
  }
  const auto single = build_spin_matrices(j, Basis::Z);
  SymmetricStateMoments s;
  s.N = 0;
  s.j = j;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    const int k = sizes[g];
    if (k < 1 || states[g].size() != static_cast<Eigen::Index>(std::pow(j.dim(), k))) {
      throw Error(ErrorCode::DimensionMismatch, "group state has the wrong dimension");
    }
    Eigen::Vector3d gm;
    Eigen::Matrix3d gs;
    group_moments(single, k, states[g].normalized(), gm, gs);
    s.N += k;
    s.mean += gm;
    cov += gs - gm * gm.transpose();
  }
  s.second = cov + s.mean * s.mean.transpose();
  s.derivation = "product";
  return s;
}

MeasurementRecord random_producible_moments(SpinLength j, std::span<const int> partition,
                                            std::uint64_t seed, GroupState kind) {
  if (partition.empty()) throw Error(ErrorCode::InvalidArgument, "empty partition");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit;
  const int d = j.dim();
  const auto single = build_spin_matrices(j, Basis::Z);

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  int N = 0;
  for (int k : partition) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "group sizes must be positive");
    N += k;
    const bool squeezed = kind == GroupState::squeezed || (kind == GroupState::mixed && unit(rng) < 0.5);
    Eigen::Vector3d gm;
    Eigen::Matrix3d gs;
    if (squeezed) {
      const SpinLength J(k * j.two_j());
      const double lambda = std::pow(10.0, -3.0 + unit(rng) * (5.0 + std::log10(J.value())));
      const auto g = squeezing_ground_state(J, lambda);
      x_basis_blocks(J, g.vector, gm, gs);
      const double th = 2.0 * std::numbers::pi * unit(rng);
      Eigen::Matrix3d R;
      R << 1, 0, 0, 0, std::cos(th), -std::sin(th), 0, std::sin(th), std::cos(th);
      gm = R * gm;
      gs = R * gs * R.transpose();
    } else {
      double dim = std::pow(static_cast<double>(d), k);
      if (dim > 4096) {
        throw Error(ErrorCode::SizeLimitExceeded,
                    "group Hilbert dimension " + std::to_string(static_cast<long long>(dim)) +
                        " exceeds 4096");
      }
      Eigen::VectorXcd v(static_cast<Eigen::Index>(dim));
      for (auto& c : v) c = {gauss(rng), gauss(rng)};
      v.normalize();
      group_moments(single, k, v, gm, gs);
    }
    mean += gm;
    cov += gs - gm * gm.transpose();
  }
  SymmetricStateMoments s;
  s.N = N;
  s.j = j;
  s.mean = mean;
  s.second = cov + mean * mean.transpose();
  s.derivation = "random_producible";
  return s.record();
}

TightnessReport tightness_diagnostics(const SymmetricStateMoments& s,
                                      std::span<const int> partition) {
  if (!s.single_x2) {
    throw Error(ErrorCode::MissingFields, "tightness diagnostics need single-particle <j_x^2>");
  }
  std::vector<int> groups(partition.begin(), partition.end());
  if (groups.empty()) groups.assign(s.N, 1);
  int total = 0;
  for (int g : groups) total += g;
  if (total != s.N) throw Error(ErrorCode::InvalidArgument, "partition does not sum to N");

  const int N = s.N;
  const double sx = *s.single_x2;
  const double corr = N > 1 ? (s.second(0, 0) - sx) / (static_cast<double>(N) * (N - 1)) : 0.0;
  TightnessReport r;
  for (int g : groups) r.script_X += g * sx / N + static_cast<double>(g) * (g - 1) * corr;
  const double nj = N * s.j.value();
  r.bound = nj / 2.0;
  const double tol = 1e-12 * std::max(1.0, nj * nj);
  r.bound_satisfied = r.script_X <= r.bound + tol;
  r.strict = r.script_X < r.bound - tol;
  r.second_moment_perp = s.second(1, 1) + s.second(2, 2);
  r.perp_lower = nj * (nj + 0.5);
  r.perp_upper = nj * (nj + 1.0);
  r.perp_in_range = r.second_moment_perp >= r.perp_lower - tol &&
                    r.second_moment_perp <= r.perp_upper + tol;
  return r;
}

}  // namespace spindepth
