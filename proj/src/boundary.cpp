#include "spindepth/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>

#include "spindepth/errors.hpp"
#include "spindepth/format.hpp"

namespace spindepth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

CurveSample endpoint_sample() { return {kInf, 1.0, 0.5, kInf}; }

}  // namespace

std::string_view to_string(CurveKind kind) {
  return kind == CurveKind::F ? "F" : "G";
}

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::IntegerSweep: return "integer-J sweep";
    case Provenance::HalfIntegerConstrained: return "half-integer constrained";
    case Provenance::Analytic: return "analytic";
  }
  return "unknown";
}

CurveKind curve_kind_from_string(std::string_view s) {
  if (s == "F") return CurveKind::F;
  if (s == "G") return CurveKind::G;
  throw Error(ErrorCode::Parse, "unknown curve kind '" + std::string(s) + "'");
}

Provenance provenance_from_string(std::string_view s) {
  for (auto p : {Provenance::IntegerSweep, Provenance::HalfIntegerConstrained,
                 Provenance::Analytic}) {
    if (to_string(p) == s) return p;
  }
  throw Error(ErrorCode::Parse, "unknown provenance '" + std::string(s) + "'");
}

void BoundaryCurve::build_envelope() {
  envelope.clear();
  if (samples.empty()) return;

  // Lower convex hull (monotone chain); samples are sorted in X.
  std::vector<std::size_t> hull;
  auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
    const auto& O = samples[o];
    const auto& A = samples[a];
    const auto& B = samples[b];
    return (A.x - O.x) * (B.value - O.value) - (A.value - O.value) * (B.x - O.x);
  };
  for (std::size_t i = 0; i < samples.size(); ++i) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), i) <= 0.0) {
      hull.pop_back();
    }
    hull.push_back(i);
  }

  const bool exact_slopes = provenance == Provenance::IntegerSweep ||
                            provenance == Provenance::Analytic;
  const std::size_t n = hull.size();
  envelope.reserve(n);
  for (std::size_t h = 0; h < n; ++h) {
    const auto& s = samples[hull[h]];
    double chord_left = 0.0;
    double chord_right = kInf;
    if (h > 0) {
      const auto& p = samples[hull[h - 1]];
      chord_left = (s.value - p.value) / (s.x - p.x);
    }
    if (h + 1 < n) {
      const auto& q = samples[hull[h + 1]];
      chord_right = (q.value - s.value) / (q.x - s.x);
    }
    EnvelopeVertex v{s.x, s.value, chord_left, chord_right};
    if (exact_slopes) {
      v.slope_forward = std::min(s.derivative, chord_right);
      v.slope_backward = std::max(s.derivative, chord_left);
    }
    v.slope_forward = std::max(v.slope_forward, 0.0);
    envelope.push_back(v);
  }
}

double LambdaGrid::lambda_max_for(SpinLength J) const {
  return lambda_max > 0.0 ? lambda_max : 100.0 * J.value();
}

std::string LambdaGrid::hash() const {
  const std::string canonical =
      "lambda_min=" + real17(lambda_min) + ";lambda_max=" +
      real17(lambda_max) + ";ppd=" + std::to_string(points_per_decade) +
      ";resolution=" + real17(resolution) + ";x_max=" +
      real17(x_max_target) + ";max_samples=" + std::to_string(max_samples);
  return fnv1a_hex(canonical);
}

namespace {

struct SweepPoint {
  double x;
  double value;
};

SweepPoint sweep_point(SpinLength J, double lambda) {
  // |m_x = 0> is the exact ground state at lambda = 0
  if (lambda == 0.0) return {0.0, 0.0};
  const auto gs = squeezing_ground_state(J, lambda);
  const auto m = x_basis_moments(J, gs.vector);
  const double X = m.mean_lz / J.value();
  if (std::abs(m.mean_lx) > 1e-8 * J.value()) {
    // The single-multiplier ground state is not centred in Lx; fall back to
    // the constrained two-parameter minimum at the same polarization.
    const auto cm = constrained_min_variance(J, X);
    return {X, cm.variance / J.value()};
  }
  return {X, m.var_lx() / J.value()};
}

}  // namespace

BoundaryCurve compute_F_curve(SpinLength J, const LambdaGrid& grid) {
  if (!J.is_integer()) {
    throw Error(ErrorCode::NonIntegerSpin,
                "the lambda sweep requires integer J; use the half-integer "
                "constrained computation");
  }
  if (!(grid.lambda_min > 0.0) || grid.points_per_decade < 1 ||
      !(grid.resolution > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid lambda grid");
  }
  const double lambda_max = grid.lambda_max_for(J);
  std::map<double, SweepPoint> points;
  auto add = [&](double lambda) {
    if (!points.contains(lambda)) points.emplace(lambda, sweep_point(J, lambda));
  };

  add(0.0);
  if (lambda_max > grid.lambda_min) {
    const double decades = std::log10(lambda_max / grid.lambda_min);
    const int n = std::max(1, static_cast<int>(std::ceil(decades * grid.points_per_decade)));
    for (int i = 0; i <= n; ++i) {
      add(grid.lambda_min * std::pow(lambda_max / grid.lambda_min,
                                     static_cast<double>(i) / n));
    }
  } else {
    add(grid.lambda_min);
  }

  auto refine = [&] {
    for (int pass = 0; pass < 64; ++pass) {
      std::vector<double> inserts;
      auto prev = points.begin();
      for (auto it = std::next(points.begin()); it != points.end(); ++it, ++prev) {
        const double dx = it->second.x - prev->second.x;
        const double dv = it->second.value - prev->second.value;
        if (dx > grid.resolution || dv > grid.resolution) {
          const double mid = prev->first > 0.0 ? std::sqrt(prev->first * it->first)
                                               : 0.5 * it->first;
          if (mid > prev->first && mid < it->first) inserts.push_back(mid);
        }
      }
      if (inserts.empty()) return;
      if (points.size() + inserts.size() > static_cast<std::size_t>(grid.max_samples)) {
        return;
      }
      for (double l : inserts) add(l);
    }
  };

  refine();
  double lambda = points.rbegin()->first;
  while (points.rbegin()->second.x < grid.x_max_target && lambda < 1e15 &&
         points.size() < static_cast<std::size_t>(grid.max_samples)) {
    lambda *= 2.0;
    add(lambda);
  }
  refine();

  BoundaryCurve curve;
  curve.J = J;
  curve.kind = CurveKind::F;
  curve.provenance = Provenance::IntegerSweep;
  curve.grid_hash = grid.hash();
  for (const auto& [l, p] : points) {
    if (!curve.samples.empty() && p.x <= curve.samples.back().x) continue;
    if (p.x >= 1.0) break;
    curve.samples.push_back({l, p.x, p.value, l});
  }
  curve.samples.push_back(endpoint_sample());
  curve.build_envelope();
  return curve;
}

namespace {

struct ConstrainedPoint {
  double variance;
  double lambda;
  double x;
  double mean_lx;
};

// Finds lambda with <Lz>/J = X at fixed lambda2. <Lz> = -dE/dlambda is
// nondecreasing in lambda because the ground energy is concave.
std::optional<ConstrainedPoint> solve_constraint(SpinLength J, double X,
                                                 double lambda2,
                                                 const TwoParameterSearch& search) {
  auto eval = [&](double lambda) {
    const auto gs = squeezing_ground_state(J, lambda, lambda2);
    const auto m = x_basis_moments(J, gs.vector);
    return ConstrainedPoint{m.var_lx(), lambda, m.mean_lz / J.value(), m.mean_lx};
  };
  const double tol = search.constraint_tolerance;
  auto lo = eval(0.0);
  if (X <= lo.x + tol) {
    return std::abs(lo.x - X) <= 1e-8 ? std::optional(lo) : std::nullopt;
  }
  auto hi = eval(search.box_factor * J.value());
  if (hi.x < X - 1e-8) return std::nullopt;
  if (hi.x <= X + tol) return hi;

  // Illinois regula falsi with a bisection safeguard.
  int side = 0;
  double flo = lo.x - X, fhi = hi.x - X;
  ConstrainedPoint best = std::abs(flo) < std::abs(fhi) ? lo : hi;
  for (int it = 0; it < 200; ++it) {
    double l = (lo.lambda * fhi - hi.lambda * flo) / (fhi - flo);
    if (!(l > lo.lambda && l < hi.lambda) || it % 8 == 7) {
      l = 0.5 * (lo.lambda + hi.lambda);
    }
    const auto p = eval(l);
    const double f = p.x - X;
    if (std::abs(f) < std::abs(best.x - X)) best = p;
    if (std::abs(f) <= tol) return p;
    if (f < 0.0) {
      lo = p;
      flo = f;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = p;
      fhi = f;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
    if (hi.lambda - lo.lambda <= 1e-15 * hi.lambda) break;
  }
  return std::abs(best.x - X) <= 1e-8 ? std::optional(best) : std::nullopt;
}

}  // namespace

ConstrainedMinimum constrained_min_variance(SpinLength J, double X,
                                            const TwoParameterSearch& search) {
  if (!(X >= 0.0 && X < 1.0)) {
    throw Error(ErrorCode::OutOfRange, "constrained minimum needs X in [0, 1)");
  }
  const double l2_max = search.box_factor * J.value();
  std::optional<ConstrainedMinimum> best;
  auto objective = [&](double lambda2) {
    const auto p = solve_constraint(J, X, lambda2, search);
    if (!p) return kInf;
    if (!best || p->variance < best->variance) {
      best = ConstrainedMinimum{p->variance, p->lambda, lambda2, p->x, p->mean_lx};
    }
    return p->variance;
  };

  std::vector<double> grid{0.0};
  const int n = std::max(2, search.lambda2_grid);
  for (int i = 0; i < n; ++i) {
    grid.push_back(1e-3 * std::pow(l2_max / 1e-3, static_cast<double>(i) / (n - 1)));
  }
  std::vector<double> values;
  for (double g : grid) values.push_back(objective(g));
  if (!best) {
    throw Error(ErrorCode::ConstraintInfeasible,
                "no (lambda, lambda2) in the search box reaches X = " + real17(X));
  }
  const auto imin = static_cast<std::size_t>(
      std::min_element(values.begin(), values.end()) - values.begin());
  double a = grid[imin > 0 ? imin - 1 : 0];
  double b = grid[std::min(imin + 1, grid.size() - 1)];

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c), fd = objective(d);
  for (int it = 0; it < search.golden_iterations && b - a > 1e-14 * (1.0 + b); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  return *best;
}

double compute_F_halfinteger(SpinLength J, double X, const TwoParameterSearch& search) {
  if (J.is_integer()) {
    throw Error(ErrorCode::InvalidArgument,
                "compute_F_halfinteger requires half-integer J");
  }
  return constrained_min_variance(J, X, search).variance / J.value();
}

BoundaryCurve compute_F_halfinteger_curve(SpinLength J, const LambdaGrid& grid,
                                          const TwoParameterSearch& search) {
  if (J.is_integer()) {
    throw Error(ErrorCode::InvalidArgument,
                "compute_F_halfinteger_curve requires half-integer J");
  }
  std::vector<double> xs;
  const int steps = static_cast<int>(std::floor(1.0 / grid.resolution));
  for (int i = 0; i < steps; ++i) xs.push_back(i * grid.resolution);
  for (double tail : {1e-3, 1e-4, 1e-5, 1e-6}) {
    const double x = 1.0 - tail;
    if (x > xs.back() && x <= std::max(grid.x_max_target, 1.0 - 1e-3)) xs.push_back(x);
  }

  BoundaryCurve curve;
  curve.J = J;
  curve.kind = CurveKind::F;
  curve.provenance = Provenance::HalfIntegerConstrained;
  curve.grid_hash = grid.hash();
  for (double x : xs) {
    ConstrainedMinimum cm;
    try {
      cm = constrained_min_variance(J, x, search);
    } catch (const Error& e) {
      // Points next to X = 1 can need lambda beyond the search box; the
      // analytic endpoint closes the curve.
      if (e.code() == ErrorCode::ConstraintInfeasible && x > 1.0 - 1e-2) break;
      throw;
    }
    if (!curve.samples.empty() && cm.x <= curve.samples.back().x) continue;
    curve.samples.push_back({cm.lambda, cm.x, cm.variance / J.value(), 0.0});
  }
  curve.samples.push_back(endpoint_sample());

  // Slopes are informational only for constrained curves; evaluation uses
  // chords.
  auto& s = curve.samples;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (i == 0) {
      s[i].derivative = 0.0;
    } else {
      s[i].derivative = (s[i + 1].value - s[i - 1].value) / (s[i + 1].x - s[i - 1].x);
    }
  }
  curve.build_envelope();
  return curve;
}

BoundaryCurve g_from_f(const BoundaryCurve& f_curve) {
  if (f_curve.kind != CurveKind::F) {
    throw Error(ErrorCode::InvalidArgument, "g_from_f expects an F curve");
  }
  BoundaryCurve g = f_curve;
  g.kind = CurveKind::G;
  g.envelope.clear();
  for (auto& s : g.samples) {
    const double xf = s.x;
    s.x = xf * xf;
    if (!std::isfinite(s.derivative)) continue;
    if (xf > 0.0) {
      s.derivative = s.derivative / (2.0 * xf);
    } else {
      s.derivative = f_curve.J.is_integer() ? 1.0 / (2.0 * (f_curve.J.value() + 1.0)) : 0.0;
    }
  }
  g.build_envelope();
  return g;
}

double evaluate(const BoundaryCurve& curve, double X) {
  const double slack = 1e-12;
  if (curve.samples.empty() || X < -slack || X > curve.max_x() + slack) {
    throw Error(ErrorCode::OutOfRange,
                "X = " + real17(X) + " outside sampled range [0, " +
                    real17(curve.max_x()) + "]");
  }
  if (curve.envelope.empty()) {
    BoundaryCurve copy = curve;
    copy.build_envelope();
    return evaluate(copy, X);
  }
  const auto& env = curve.envelope;
  X = std::clamp(X, env.front().x, env.back().x);
  auto it = std::upper_bound(env.begin(), env.end(), X,
                             [](double x, const auto& v) { return x < v.x; });
  const auto& a = *std::prev(it);
  if (X == a.x || it == env.end()) return a.value;
  const auto& b = *it;
  double lower = a.value + a.slope_forward * (X - a.x);
  if (std::isfinite(b.slope_backward)) {
    lower = std::max(lower, b.value + b.slope_backward * (X - b.x));
  }
  return std::max(lower, 0.0);
}

double tilde_G(SpinLength J, double X) {
  const double j = J.value();
  const double a = j + 1.0 - j * X;
  // a - sqrt(a^2 - X) written without cancellation.
  return 0.5 * X / (a + std::sqrt(std::max(a * a - X, 0.0)));
}

double tangent_bound(SpinLength J, double X) {
  return X / (2.0 * (J.value() + 1.0));
}

ConvexityReport convexity_check(const BoundaryCurve& curve,
                                std::span<const double> alphas,
                                double derivative_tolerance,
                                double alpha_tolerance) {
  if (curve.samples.size() < 3) {
    throw Error(ErrorCode::InvalidArgument, "convexity check needs >= 3 samples");
  }
  ConvexityReport report;
  report.J = curve.J;
  report.kind = curve.kind;
  const auto& s = curve.samples;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (!std::isfinite(s[i].derivative) || !std::isfinite(s[i + 1].derivative)) continue;
    report.max_derivative_decrease =
        std::max(report.max_derivative_decrease, s[i].derivative - s[i + 1].derivative);
  }
  report.verdict = report.max_derivative_decrease <= derivative_tolerance;

  for (double alpha : alphas) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : s) {
      const double xf = curve.kind == CurveKind::F ? p.x : std::sqrt(p.x);
      pts.emplace_back(std::pow(xf, alpha), p.value);
    }
    std::vector<double> slopes;
    std::size_t last = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double dy = pts[i].first - pts[last].first;
      if (dy <= 1e-15) continue;
      slopes.push_back((pts[i].second - pts[last].second) / dy);
      last = i;
    }
    AlphaProbe probe{alpha, true, 0.0};
    for (std::size_t i = 0; i + 1 < slopes.size(); ++i) {
      const double scale = std::max({std::abs(slopes[i]), std::abs(slopes[i + 1]), 1e-300});
      probe.max_relative_slope_decrease =
          std::max(probe.max_relative_slope_decrease, (slopes[i] - slopes[i + 1]) / scale);
    }
    probe.convex = probe.max_relative_slope_decrease <= alpha_tolerance;
    report.alpha_probes.push_back(probe);
  }
  return report;
}

ProducibilityBoundary producibility_boundary(int N, SpinLength j, int k,
                                             const BoundaryCurve& curve) {
  if (k < 1 || k > N - 1) {
    throw Error(ErrorCode::OutOfRange, "producibility boundary needs 1 <= k <= N-1");
  }
  if (curve.J.two_j() != k * j.two_j()) {
    throw Error(ErrorCode::SpinMismatch,
                "curve has 2J = " + std::to_string(curve.J.two_j()) +
                    " but k * 2j = " + std::to_string(k * j.two_j()));
  }
  const double jj = j.value();
  const double Nd = N;
  ProducibilityBoundary out{N, j, k, {}};
  for (const auto& s : curve.samples) {
    const double xg = curve.kind == CurveKind::G ? s.x : s.x * s.x;
    out.points.push_back({Nd * (Nd - k) * jj * jj * xg + Nd * jj * (k * jj + 1.0),
                          Nd * jj * s.value});
  }
  return out;
}

}  // namespace spindepth
