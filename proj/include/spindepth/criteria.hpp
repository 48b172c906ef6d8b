#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spindepth/boundary.hpp"
#include "spindepth/curve_cache.hpp"

namespace spindepth {

/// Collective first and second moments of N spin-j particles. The perpendicular
/// plane is y-z, so the squeezed component is Jx.
struct MeasurementRecord {
  int N = 1;
  SpinLength j{1};
  double var_Jx = 0.0;
  std::optional<double> mean_Jx;
  double mean_Jy = 0.0;
  double mean_Jz = 0.0;
  double second_moment_perp = 0.0;  // <Jy^2 + Jz^2>
  std::optional<double> var_Jy;
  std::optional<double> var_Jz;

  double Nj() const { return N * j.value(); }
  double polarization() const;  // sqrt(<Jy>^2 + <Jz>^2)

  /// Throws InvalidArgument or OutOfRange for records no quantum state can
  /// produce (within a relative tolerance of 1e-9).
  void validate() const;
};

enum class CriterionId { nonlinear, sorensen_molmer, xi2, xi2_sm, duan, qubit_tangent };

std::string_view to_string(CriterionId id);
CriterionId criterion_from_string(std::string_view s);
const std::vector<CriterionId>& all_criteria();
bool uses_curve(CriterionId id);

/// margin is rhs - lhs for the variance forms and 1 - xi^2 for the parameter
/// forms. A violation needs margin above a small tolerance, so a tiny positive
/// margin can still be reported as not violated.
struct CriterionResult {
  CriterionId id = CriterionId::nonlinear;
  int k = 0;
  bool applicable = false;
  double lhs = 0.0;
  double rhs = 0.0;
  bool violated = false;
  double margin = 0.0;
  std::string note;
};

/// Tolerance on variance-form margins, relative to Nj.
inline constexpr double kVarianceTolerance = 1e-9;
/// Tolerance on 1 - xi^2.
inline constexpr double kParameterTolerance = 1e-9;

/// Lower bound on G or F at X, supplied by the caller.
using CurveBound = std::function<double(double)>;

CriterionResult nonlinear_criterion(const MeasurementRecord& rec, int k, const BoundaryCurve& G);
CriterionResult sm_criterion(const MeasurementRecord& rec, int k, const BoundaryCurve& F);

/// Same as above with the curve given as a bound function for J = k j.
CriterionResult nonlinear_criterion(const MeasurementRecord& rec, int k, const CurveBound& G);
CriterionResult sm_criterion(const MeasurementRecord& rec, int k, const CurveBound& F);

CriterionResult xi2(const MeasurementRecord& rec, int k);
CriterionResult xi2_sm(const MeasurementRecord& rec, int k);
CriterionResult duan_criterion(const MeasurementRecord& rec, int k);
CriterionResult qubit_tangent_criterion(const MeasurementRecord& rec, int k);

/// Argument of G in the nonlinear criterion, or nullopt when the record is
/// below Nj(kj+1). Values within 1e-9 above 1 are clamped, larger ones throw.
std::optional<double> nonlinear_argument(const MeasurementRecord& rec, int k);

/// The perpendicular-variance condition that makes the nonlinear criterion
/// stronger than the polarization-based one. Needs var_Jy and var_Jz.
bool observation3_predicate(const MeasurementRecord& rec, int k);

// Arithmetic shared by the fixed-N and fluctuating-N forms, so that a
// single-bin ensemble reproduces the fixed-N numbers bit for bit.
namespace detail {
/// [<Jy^2 + Jz^2> - Nj(kj+1)] / ((N-k) j), the per-record value of W.
double w_value(double second_moment_perp, int N, SpinLength j, int k);
CriterionResult nonlinear_from_w(int k, double var_Jx, double mean_w, double nj,
                                 const CurveBound& G);
CriterionResult sm_from_polarization(int k, double var_Jx, double polarization, double nj,
                                     const CurveBound& F);
CriterionResult xi2_from_w(int k, SpinLength j, double var_Jx, double mean_w);
CriterionResult xi2_sm_from_polarization(int k, SpinLength j, double var_Jx, double pol2,
                                         double nj);
}  // namespace detail

struct DepthOptions {
  /// Allow odd k for half-integer j through half-integer J curves.
  bool half_integer_curves = false;
  enum class Scan { automatic, linear, bisection } scan = Scan::automatic;
  /// Restrict the k range; 0 means the default [1, N-1].
  int k_min = 0;
  int k_max = 0;
};

struct DepthVerdict {
  CriterionId id = CriterionId::nonlinear;
  std::optional<int> max_k_violated;
  int certified_depth = 1;
  bool monotone = true;  // false if violated(k) and not violated(k') for some k' < k
  std::vector<CriterionResult> per_k;
};

/// Admissible k for a criterion: kj integer (or any k with
/// half_integer_curves for the curve criteria), qubits for duan and
/// qubit_tangent.
std::vector<int> admissible_k(const MeasurementRecord& rec, CriterionId id,
                              const DepthOptions& options = {});

/// Evaluates one criterion at one k, fetching curves from the cache. The
/// analytic endpoints G(0) = 0 and G(1) = 1/2 are used without a curve.
CriterionResult evaluate_criterion(const MeasurementRecord& rec, CriterionId id, int k,
                                   CurveCache& cache, const DepthOptions& options = {});

/// Largest violated k over the admissible range. Curve criteria with more
/// than 64 admissible k use bisection in automatic mode and then check the
/// neighbours of the transition.
DepthVerdict detect_depth(const MeasurementRecord& rec, CriterionId id, CurveCache& cache,
                          const DepthOptions& options = {});

}  // namespace spindepth
