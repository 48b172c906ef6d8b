#pragma once

#include <optional>
#include <span>
#include <vector>

#include "spindepth/criteria.hpp"

namespace spindepth {

/// Moments of the fixed-N component rho_N with weight Q.
struct ShotBin {
  int N = 1;
  double Q = 0.0;
  double var_Jx = 0.0;
  std::optional<double> mean_Jx;
  double mean_Jy = 0.0;
  double mean_Jz = 0.0;
  double second_moment_perp = 0.0;
};

struct ShotEnsemble {
  SpinLength j{1};
  std::vector<ShotBin> bins;

  /// Rescales Q to sum to one. Throws InvalidArgument for negative weights,
  /// an empty ensemble or N < 1.
  void normalize();
  double mean_N() const;
};

/// One joint measurement of N and the three collective components.
struct Shot {
  int N = 1;
  double Jx = 0.0;
  double Jy = 0.0;
  double Jz = 0.0;
};

/// Groups shots by N. Q_N is the relative frequency; per-bin moments are the
/// sample moments (normalized by the bin count).
ShotEnsemble aggregate_shots(SpinLength j, std::span<const Shot> shots);

struct WStatistic {
  int k = 0;
  double mean_W = 0.0;
  std::vector<double> contributions;  // Q_N w_N per bin
};

/// <W> for groups of k. Throws BinUnderflow when a populated bin has N <= k.
WStatistic w_expectation(const ShotEnsemble& ens, int k);

struct PooledMoments {
  double mean_N = 0.0;
  double var_Jx = 0.0;
  /// true: mixture variance including the spread of per-bin means;
  /// false: sum of Q_N-weighted per-bin variances (per-bin means missing).
  bool total_variance = false;
  double mean_Jy = 0.0;
  double mean_Jz = 0.0;
};

PooledMoments pooled_moments(const ShotEnsemble& ens);

CriterionResult fluctuating_nonlinear(const ShotEnsemble& ens, int k, const BoundaryCurve& G);
CriterionResult fluctuating_nonlinear(const ShotEnsemble& ens, int k, const CurveBound& G);
CriterionResult fluctuating_sm(const ShotEnsemble& ens, int k, const BoundaryCurve& F);
CriterionResult fluctuating_sm(const ShotEnsemble& ens, int k, const CurveBound& F);

struct LinearParameters {
  CriterionResult xi2;
  CriterionResult xi2_sm;
};

LinearParameters fluctuating_linear_parameters(const ShotEnsemble& ens, int k);

/// Same dispatch as evaluate_criterion. duan and qubit_tangent have no
/// fluctuating form and throw InvalidArgument.
CriterionResult evaluate_fluctuating(const ShotEnsemble& ens, CriterionId id, int k,
                                     CurveCache& cache, const DepthOptions& options = {});

}  // namespace spindepth
