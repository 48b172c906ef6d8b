#pragma once

#include <span>
#include <string>
#include <vector>

#include "spindepth/spin_core.hpp"

namespace spindepth {

enum class CurveKind { F, G };
enum class Provenance { IntegerSweep, HalfIntegerConstrained, Analytic };

std::string_view to_string(CurveKind kind);
std::string_view to_string(Provenance provenance);
CurveKind curve_kind_from_string(std::string_view s);
Provenance provenance_from_string(std::string_view s);

struct CurveSample {
  double lambda = 0.0;
  double x = 0.0;
  double value = 0.0;
  double derivative = 0.0;  // +inf at the coherent-state endpoint X = 1
};

/// Sampled F_J or G_J, sorted strictly increasing in X.
///
/// Evaluation goes through a lower envelope built from the lower convex hull
/// of the samples. For integer-J sweeps each hull vertex carries its exact
/// slope (lambda for F), so tangent lines at the two bracketing vertices bound
/// the convex curve from below. For curves without exact slopes the adjacent
/// chord slopes are used instead, which is weaker but still a lower bound.
struct BoundaryCurve {
  SpinLength J{2};
  CurveKind kind = CurveKind::F;
  Provenance provenance = Provenance::IntegerSweep;
  std::vector<CurveSample> samples;
  std::string grid_hash;

  struct EnvelopeVertex {
    double x;
    double value;
    double slope_forward;   // used for X > x
    double slope_backward;  // used for X < x
  };
  std::vector<EnvelopeVertex> envelope;

  double max_x() const { return samples.empty() ? 0.0 : samples.back().x; }

  /// Rebuilds the evaluation envelope from the samples.
  void build_envelope();
};

/// Lambda-sweep configuration. lambda_max <= 0 means 100 J.
struct LambdaGrid {
  double lambda_min = 1e-3;
  double lambda_max = 0.0;
  int points_per_decade = 16;
  double resolution = 0.005;
  double x_max_target = 1.0 - 1e-6;
  int max_samples = 20000;

  double lambda_max_for(SpinLength J) const;
  /// Stable FNV-1a hash of the configuration, hex encoded.
  std::string hash() const;
};

/// F_J for integer J from the ground states of Lx^2 - lambda Lz.
BoundaryCurve compute_F_curve(SpinLength J, const LambdaGrid& grid = {});

struct TwoParameterSearch {
  double box_factor = 100.0;  // lambda, lambda2 in [0, box_factor * J]
  int lambda2_grid = 24;
  int golden_iterations = 60;
  double constraint_tolerance = 1e-10;
};

struct ConstrainedMinimum {
  double variance = 0.0;  // (Delta Lx)^2
  double lambda = 0.0;
  double lambda2 = 0.0;
  double x = 0.0;         // achieved <Lz>/J
  double mean_lx = 0.0;
};

/// min over ground states of Lx^2 - lambda Lz - lambda2 Lx of (Delta Lx)^2
/// subject to <Lz>/J = X. Works for any J; throws ConstraintInfeasible when no
/// point of the search box reaches X.
ConstrainedMinimum constrained_min_variance(SpinLength J, double X,
                                            const TwoParameterSearch& search = {});

/// F_J(X) for half-integer J (normalized by 1/J).
double compute_F_halfinteger(SpinLength J, double X,
                             const TwoParameterSearch& search = {});

/// Sampled F_J for half-integer J on a uniform X grid of the given
/// resolution, refined towards X = 1.
BoundaryCurve compute_F_halfinteger_curve(SpinLength J, const LambdaGrid& grid = {},
                                          const TwoParameterSearch& search = {});

BoundaryCurve g_from_f(const BoundaryCurve& f_curve);

/// Certified lower bound on the curve at X. Throws OutOfRange outside
/// [0, max sampled X].
double evaluate(const BoundaryCurve& curve, double X);

/// Uncertainty-relation lower bound on G_J.
double tilde_G(SpinLength J, double X);

/// X / (2 (J + 1)), the tangent to G_J at the origin.
double tangent_bound(SpinLength J, double X);

struct AlphaProbe {
  double alpha = 0.0;
  bool convex = false;
  double max_relative_slope_decrease = 0.0;
};

struct ConvexityReport {
  SpinLength J{2};
  CurveKind kind = CurveKind::F;
  double max_derivative_decrease = 0.0;
  bool verdict = false;
  std::vector<AlphaProbe> alpha_probes;
};

/// Checks monotonicity of the stored derivatives and, for each alpha, the
/// convexity of Y -> F_J(Y^(1/alpha)) from discrete secant slopes.
ConvexityReport convexity_check(const BoundaryCurve& curve,
                                std::span<const double> alphas,
                                double derivative_tolerance = 1e-9,
                                double alpha_tolerance = 1e-6);

struct ProducibilityPoint {
  double second_moment_perp = 0.0;
  double var_jx = 0.0;
};

struct ProducibilityBoundary {
  int N = 0;
  SpinLength j{1};
  int k = 0;
  std::vector<ProducibilityPoint> points;
};

/// Boundary of k-producible states of N spin-j particles in the
/// (<Jy^2 + Jz^2>, (Delta Jx)^2) plane. The curve must belong to J = k j.
ProducibilityBoundary producibility_boundary(int N, SpinLength j, int k,
                                             const BoundaryCurve& curve);

}  // namespace spindepth
