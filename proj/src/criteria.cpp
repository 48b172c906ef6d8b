#include "spindepth/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "spindepth/errors.hpp"
#include "spindepth/format.hpp"

namespace spindepth {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_k(const MeasurementRecord& rec, int k) {
  if (k < 1 || k > rec.N - 1) {
    throw Error(ErrorCode::OutOfRange,
                "k = " + std::to_string(k) + " outside [1, N-1] for N = " + std::to_string(rec.N));
  }
}

// Spin of a k-particle group; kj may be half-integer.
SpinLength group_spin(const MeasurementRecord& rec, int k) {
  return SpinLength(k * rec.j.two_j());
}

void require_integer_group(const MeasurementRecord& rec, int k) {
  if (!group_spin(rec, k).is_integer()) {
    throw Error(ErrorCode::NonIntegerSpin,
                "k j = " + real17(k * rec.j.value()) + " is not an integer");
  }
}

void require_qubits(const MeasurementRecord& rec) {
  if (rec.j.two_j() != 1) throw Error(ErrorCode::NotQubit, "criterion defined for j = 1/2 only");
}

CriterionResult variance_form(CriterionId id, int k, double lhs, double rhs, double scale) {
  CriterionResult r;
  r.id = id;
  r.k = k;
  r.applicable = true;
  r.lhs = lhs;
  r.rhs = rhs;
  r.margin = rhs - lhs;
  r.violated = r.margin > kVarianceTolerance * scale;
  return r;
}

CriterionResult parameter_form(CriterionId id, int k, double xi) {
  CriterionResult r;
  r.id = id;
  r.k = k;
  r.applicable = true;
  r.lhs = xi;
  r.rhs = 1.0;
  r.margin = 1.0 - xi;
  r.violated = r.margin > kParameterTolerance;
  return r;
}

CriterionResult not_applicable(CriterionId id, int k, double lhs, std::string note) {
  CriterionResult r;
  r.id = id;
  r.k = k;
  r.lhs = lhs;
  r.rhs = kNaN;
  r.note = std::move(note);
  return r;
}

void check_curve(const MeasurementRecord& rec, int k, const BoundaryCurve& c, CurveKind kind) {
  if (c.kind != kind) {
    throw Error(ErrorCode::InvalidArgument,
                std::string("expected a ") + std::string(to_string(kind)) + " curve");
  }
  if (c.J != group_spin(rec, k)) {
    throw Error(ErrorCode::SpinMismatch,
                "curve is for J = " + real17(c.J.value()) + ", criterion needs k j = " +
                    real17(k * rec.j.value()));
  }
}

double clamp_unit(double X, const char* what) {
  if (X > 1.0 + 1e-9) {
    throw Error(ErrorCode::OutOfRange, std::string(what) + " = " + real17(X) + " exceeds 1");
  }
  return std::min(X, 1.0);
}

}  // namespace

double MeasurementRecord::polarization() const { return std::hypot(mean_Jy, mean_Jz); }

void MeasurementRecord::validate() const {
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "N must be positive");
  for (double v : {var_Jx, mean_Jy, mean_Jz, second_moment_perp, mean_Jx.value_or(0.0),
                   var_Jy.value_or(0.0), var_Jz.value_or(0.0)}) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite moment");
  }
  const double nj = Nj();
  const double casimir = nj * (nj + 1.0);
  const double tol = 1e-9 * std::max(1.0, casimir);
  auto fail = [](const std::string& what) { throw Error(ErrorCode::OutOfRange, what); };
  if (var_Jx < -tol) fail("negative var_Jx");
  if (var_Jy.value_or(0.0) < -tol || var_Jz.value_or(0.0) < -tol) fail("negative variance");
  if (second_moment_perp < -tol) fail("negative second_moment_perp");
  for (double m : {mean_Jx.value_or(0.0), mean_Jy, mean_Jz}) {
    if (std::abs(m) > nj + tol) fail("|<J_l>| exceeds Nj");
  }
  if (second_moment_perp > casimir + tol) fail("second_moment_perp exceeds Nj(Nj+1)");
  if (second_moment_perp < mean_Jy * mean_Jy + mean_Jz * mean_Jz - tol) {
    fail("second_moment_perp below <Jy>^2 + <Jz>^2");
  }
  const double mx = mean_Jx.value_or(0.0);
  if (var_Jx + mx * mx + second_moment_perp > casimir + tol) {
    fail("<Jx^2 + Jy^2 + Jz^2> exceeds Nj(Nj+1)");
  }
  if (var_Jy && var_Jz) {
    const double perp = *var_Jy + *var_Jz + mean_Jy * mean_Jy + mean_Jz * mean_Jz;
    if (std::abs(perp - second_moment_perp) > tol) {
      throw Error(ErrorCode::InvalidArgument,
                  "var_Jy + var_Jz + <Jy>^2 + <Jz>^2 differs from second_moment_perp");
    }
  }
}

std::string_view to_string(CriterionId id) {
  switch (id) {
    case CriterionId::nonlinear: return "nonlinear";
    case CriterionId::sorensen_molmer: return "sorensen_molmer";
    case CriterionId::xi2: return "xi2";
    case CriterionId::xi2_sm: return "xi2_sm";
    case CriterionId::duan: return "duan";
    case CriterionId::qubit_tangent: return "qubit_tangent";
  }
  return "?";
}

CriterionId criterion_from_string(std::string_view s) {
  for (auto id : all_criteria()) {
    if (to_string(id) == s) return id;
  }
  if (s == "sm") return CriterionId::sorensen_molmer;
  throw Error(ErrorCode::Parse, "unknown criterion '" + std::string(s) + "'");
}

const std::vector<CriterionId>& all_criteria() {
  static const std::vector<CriterionId> ids{CriterionId::nonlinear, CriterionId::sorensen_molmer,
                                            CriterionId::xi2,       CriterionId::xi2_sm,
                                            CriterionId::duan,      CriterionId::qubit_tangent};
  return ids;
}

bool uses_curve(CriterionId id) {
  return id == CriterionId::nonlinear || id == CriterionId::sorensen_molmer;
}

namespace detail {

double w_value(double second_moment_perp, int N, SpinLength j, int k) {
  const double jv = j.value();
  return (second_moment_perp - N * jv * (k * jv + 1.0)) / ((N - k) * jv);
}

CriterionResult nonlinear_from_w(int k, double var_Jx, double mean_w, double nj,
                                 const CurveBound& G) {
  if (mean_w < 0.0) {
    return not_applicable(CriterionId::nonlinear, k, var_Jx,
                          "second_moment_perp below Nj(kj+1)");
  }
  const double X = clamp_unit(mean_w / nj, "nonlinear argument");
  auto r = variance_form(CriterionId::nonlinear, k, var_Jx, nj * G(X), nj);
  r.note = "X=" + real17(X);
  return r;
}

CriterionResult sm_from_polarization(int k, double var_Jx, double polarization, double nj,
                                     const CurveBound& F) {
  const double X = clamp_unit(polarization / nj, "polarization");
  auto r = variance_form(CriterionId::sorensen_molmer, k, var_Jx, nj * F(X), nj);
  r.note = "X=" + real17(X);
  return r;
}

CriterionResult xi2_from_w(int k, SpinLength j, double var_Jx, double mean_w) {
  if (!(mean_w > 0.0)) {
    return not_applicable(CriterionId::xi2, k, kNaN, "second_moment_perp <= Nj(kj+1)");
  }
  return parameter_form(CriterionId::xi2, k, (k * j.value() + 1.0) * 2.0 * var_Jx / mean_w);
}

CriterionResult xi2_sm_from_polarization(int k, SpinLength j, double var_Jx, double pol2,
                                         double nj) {
  if (!(pol2 > 0.0)) return not_applicable(CriterionId::xi2_sm, k, kNaN, "zero polarization");
  return parameter_form(CriterionId::xi2_sm, k,
                        (k * j.value() + 1.0) * 2.0 * nj * var_Jx / pol2);
}

}  // namespace detail

std::optional<double> nonlinear_argument(const MeasurementRecord& rec, int k) {
  check_k(rec, k);
  const double w = detail::w_value(rec.second_moment_perp, rec.N, rec.j, k);
  if (w < 0.0) return std::nullopt;
  return clamp_unit(w / rec.Nj(), "nonlinear argument");
}

CriterionResult nonlinear_criterion(const MeasurementRecord& rec, int k, const CurveBound& G) {
  check_k(rec, k);
  return detail::nonlinear_from_w(k, rec.var_Jx,
                                  detail::w_value(rec.second_moment_perp, rec.N, rec.j, k),
                                  rec.Nj(), G);
}

CriterionResult nonlinear_criterion(const MeasurementRecord& rec, int k, const BoundaryCurve& G) {
  check_k(rec, k);
  check_curve(rec, k, G, CurveKind::G);
  return nonlinear_criterion(rec, k, CurveBound([&](double X) { return evaluate(G, X); }));
}

CriterionResult sm_criterion(const MeasurementRecord& rec, int k, const CurveBound& F) {
  check_k(rec, k);
  return detail::sm_from_polarization(k, rec.var_Jx, rec.polarization(), rec.Nj(), F);
}

CriterionResult sm_criterion(const MeasurementRecord& rec, int k, const BoundaryCurve& F) {
  check_k(rec, k);
  check_curve(rec, k, F, CurveKind::F);
  return sm_criterion(rec, k, CurveBound([&](double X) { return evaluate(F, X); }));
}

CriterionResult xi2(const MeasurementRecord& rec, int k) {
  check_k(rec, k);
  require_integer_group(rec, k);
  return detail::xi2_from_w(k, rec.j, rec.var_Jx,
                            detail::w_value(rec.second_moment_perp, rec.N, rec.j, k));
}

CriterionResult xi2_sm(const MeasurementRecord& rec, int k) {
  check_k(rec, k);
  require_integer_group(rec, k);
  const double pol2 = rec.mean_Jy * rec.mean_Jy + rec.mean_Jz * rec.mean_Jz;
  return detail::xi2_sm_from_polarization(k, rec.j, rec.var_Jx, pol2, rec.Nj());
}

CriterionResult duan_criterion(const MeasurementRecord& rec, int k) {
  require_qubits(rec);
  check_k(rec, k);
  const double N = rec.N;
  return variance_form(CriterionId::duan, k, N * (k + 2) * rec.var_Jx,
                       rec.second_moment_perp - N / 4.0 * (k + 2), rec.Nj());
}

CriterionResult qubit_tangent_criterion(const MeasurementRecord& rec, int k) {
  require_qubits(rec);
  check_k(rec, k);
  const double N = rec.N;
  return variance_form(CriterionId::qubit_tangent, k, 0.5 * (N - k) * (k + 2) * rec.var_Jx,
                       rec.second_moment_perp - N / 4.0 * (k + 2), rec.Nj());
}

bool observation3_predicate(const MeasurementRecord& rec, int k) {
  if (!rec.var_Jy || !rec.var_Jz) {
    throw Error(ErrorCode::MissingFields, "observation 3 needs var_Jy and var_Jz");
  }
  check_k(rec, k);
  const double nj = rec.Nj();
  const double pol2 = rec.mean_Jy * rec.mean_Jy + rec.mean_Jz * rec.mean_Jz;
  const double lhs = (*rec.var_Jy + *rec.var_Jz) / nj;
  const double rhs = k * rec.j.value() * (1.0 - pol2 / (nj * nj)) + 1.0;
  return lhs > rhs;
}

std::vector<int> admissible_k(const MeasurementRecord& rec, CriterionId id,
                              const DepthOptions& options) {
  if (id == CriterionId::duan || id == CriterionId::qubit_tangent) require_qubits(rec);
  const int lo = std::max(1, options.k_min);
  const int hi = options.k_max > 0 ? std::min(rec.N - 1, options.k_max) : rec.N - 1;
  const bool any_parity = id == CriterionId::duan ||
                          (uses_curve(id) && options.half_integer_curves);
  std::vector<int> ks;
  for (int k = lo; k <= hi; ++k) {
    if (any_parity || group_spin(rec, k).is_integer()) ks.push_back(k);
  }
  return ks;
}

CriterionResult evaluate_criterion(const MeasurementRecord& rec, CriterionId id, int k,
                                   CurveCache& cache, const DepthOptions& options) {
  if (!uses_curve(id)) {
    switch (id) {
      case CriterionId::xi2: return xi2(rec, k);
      case CriterionId::xi2_sm: return xi2_sm(rec, k);
      case CriterionId::duan: return duan_criterion(rec, k);
      default: return qubit_tangent_criterion(rec, k);
    }
  }
  const SpinLength J = group_spin(rec, k);
  const CurveKind kind = id == CriterionId::nonlinear ? CurveKind::G : CurveKind::F;
  const CurveBound bound = [&](double X) {
    // exact at both ends for every J, no curve needed
    if (X <= 0.0) return 0.0;
    if (X >= 1.0) return 0.5;
    return evaluate(*cache.get(J, kind, options.half_integer_curves), X);
  };
  return id == CriterionId::nonlinear ? nonlinear_criterion(rec, k, bound)
                                      : sm_criterion(rec, k, bound);
}

DepthVerdict detect_depth(const MeasurementRecord& rec, CriterionId id, CurveCache& cache,
                          const DepthOptions& options) {
  rec.validate();
  DepthVerdict v;
  v.id = id;
  const auto ks = admissible_k(rec, id, options);
  const int n = static_cast<int>(ks.size());
  std::map<int, CriterionResult> results;  // by index into ks
  auto violated = [&](int i) {
    auto it = results.find(i);
    if (it == results.end()) {
      it = results.emplace(i, evaluate_criterion(rec, id, ks[i], cache, options)).first;
    }
    return it->second.violated;
  };

  bool linear = options.scan == DepthOptions::Scan::linear ||
                (options.scan == DepthOptions::Scan::automatic && (!uses_curve(id) || n <= 64));
  if (!linear && n > 0) {
    // violated set assumed to be a prefix of ks
    int lo = -1, hi = n;
    if (violated(0)) {
      lo = 0;
      if (violated(n - 1)) {
        lo = n - 1;
      } else {
        hi = n - 1;
        while (hi - lo > 1) {
          const int mid = (lo + hi) / 2;
          (violated(mid) ? lo : hi) = mid;
        }
      }
    }
    // spot checks around the transition; any inconsistency falls back to a
    // full scan
    bool consistent = true;
    for (int i : {lo - 1, lo + 2, lo + 3}) {
      if (i < 0 || i >= n) continue;
      if (violated(i) != (i <= lo)) consistent = false;
    }
    if (!consistent) linear = true;
  }
  if (linear) {
    for (int i = 0; i < n; ++i) violated(i);
  }

  bool seen_gap = false;
  for (auto& [i, r] : results) {
    if (r.violated) {
      v.max_k_violated = r.k;
      if (seen_gap) v.monotone = false;
    } else {
      seen_gap = true;
    }
    v.per_k.push_back(std::move(r));
  }
  v.certified_depth = v.max_k_violated ? *v.max_k_violated + 1 : 1;
  return v;
}

}  // namespace spindepth
