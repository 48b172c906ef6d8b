#include "spindepth/fluctuating.hpp"

#include <cmath>
#include <map>

#include "spindepth/errors.hpp"

namespace spindepth {

namespace {

void check_group(const ShotEnsemble& ens, int k) {
  if (k < 1) throw Error(ErrorCode::OutOfRange, "k must be positive");
  (void)ens;
}

void check_curve(const ShotEnsemble& ens, int k, const BoundaryCurve& c, CurveKind kind) {
  if (c.kind != kind) throw Error(ErrorCode::InvalidArgument, "wrong curve kind");
  if (c.J != SpinLength(k * ens.j.two_j())) {
    throw Error(ErrorCode::SpinMismatch, "curve J does not match k j");
  }
}

}  // namespace

void ShotEnsemble::normalize() {
  if (bins.empty()) throw Error(ErrorCode::InvalidArgument, "empty ensemble");
  double total = 0.0;
  for (const auto& b : bins) {
    if (b.N < 1) throw Error(ErrorCode::InvalidArgument, "bin with N < 1");
    if (!(b.Q >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative bin weight");
    total += b.Q;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "all bin weights are zero");
  if (std::abs(total - 1.0) <= 1e-12) return;
  for (auto& b : bins) b.Q /= total;
}

double ShotEnsemble::mean_N() const {
  double m = 0.0;
  for (const auto& b : bins) m += b.Q * b.N;
  return m;
}

ShotEnsemble aggregate_shots(SpinLength j, std::span<const Shot> shots) {
  if (shots.empty()) throw Error(ErrorCode::InvalidArgument, "no shots");
  struct Acc {
    double n = 0, x = 0, y = 0, z = 0, x2 = 0, perp = 0;
  };
  std::map<int, Acc> acc;
  for (const auto& s : shots) {
    if (s.N < 1) throw Error(ErrorCode::InvalidArgument, "shot with N < 1");
    auto& a = acc[s.N];
    a.n += 1;
    a.x += s.Jx;
    a.y += s.Jy;
    a.z += s.Jz;
    a.x2 += s.Jx * s.Jx;
    a.perp += s.Jy * s.Jy + s.Jz * s.Jz;
  }
  ShotEnsemble ens;
  ens.j = j;
  const double total = static_cast<double>(shots.size());
  for (const auto& [N, a] : acc) {
    ShotBin b;
    b.N = N;
    b.Q = a.n / total;
    const double mx = a.x / a.n;
    b.mean_Jx = mx;
    b.mean_Jy = a.y / a.n;
    b.mean_Jz = a.z / a.n;
    b.var_Jx = std::max(0.0, a.x2 / a.n - mx * mx);
    b.second_moment_perp = a.perp / a.n;
    ens.bins.push_back(b);
  }
  return ens;
}

WStatistic w_expectation(const ShotEnsemble& ens, int k) {
  check_group(ens, k);
  WStatistic w;
  w.k = k;
  for (const auto& b : ens.bins) {
    if (b.Q == 0.0) {
      w.contributions.push_back(0.0);
      continue;
    }
    if (b.N <= k) {
      throw Error(ErrorCode::BinUnderflow, "populated bin N = " + std::to_string(b.N) +
                                               " is not larger than k = " + std::to_string(k));
    }
    const double c = b.Q * detail::w_value(b.second_moment_perp, b.N, ens.j, k);
    w.contributions.push_back(c);
    w.mean_W += c;
  }
  return w;
}

PooledMoments pooled_moments(const ShotEnsemble& ens) {
  PooledMoments p;
  bool have_means = true;
  double mx = 0.0;
  for (const auto& b : ens.bins) {
    p.mean_N += b.Q * b.N;
    p.var_Jx += b.Q * b.var_Jx;
    p.mean_Jy += b.Q * b.mean_Jy;
    p.mean_Jz += b.Q * b.mean_Jz;
    if (b.mean_Jx) {
      mx += b.Q * *b.mean_Jx;
    } else {
      have_means = false;
    }
  }
  if (have_means) {
    // variance of the mixture: within-bin part plus spread of the bin means
    for (const auto& b : ens.bins) {
      const double d = *b.mean_Jx - mx;
      p.var_Jx += b.Q * d * d;
    }
  }
  p.total_variance = have_means;
  return p;
}

CriterionResult fluctuating_nonlinear(const ShotEnsemble& ens, int k, const CurveBound& G) {
  const auto w = w_expectation(ens, k);
  const auto p = pooled_moments(ens);
  return detail::nonlinear_from_w(k, p.var_Jx, w.mean_W, p.mean_N * ens.j.value(), G);
}

CriterionResult fluctuating_nonlinear(const ShotEnsemble& ens, int k, const BoundaryCurve& G) {
  check_curve(ens, k, G, CurveKind::G);
  return fluctuating_nonlinear(ens, k, CurveBound([&](double X) { return evaluate(G, X); }));
}

CriterionResult fluctuating_sm(const ShotEnsemble& ens, int k, const CurveBound& F) {
  check_group(ens, k);
  const auto p = pooled_moments(ens);
  return detail::sm_from_polarization(k, p.var_Jx, std::hypot(p.mean_Jy, p.mean_Jz),
                                      p.mean_N * ens.j.value(), F);
}

CriterionResult fluctuating_sm(const ShotEnsemble& ens, int k, const BoundaryCurve& F) {
  check_curve(ens, k, F, CurveKind::F);
  return fluctuating_sm(ens, k, CurveBound([&](double X) { return evaluate(F, X); }));
}

LinearParameters fluctuating_linear_parameters(const ShotEnsemble& ens, int k) {
  if (!SpinLength(k * ens.j.two_j()).is_integer()) {
    throw Error(ErrorCode::NonIntegerSpin, "k j must be an integer");
  }
  const auto w = w_expectation(ens, k);
  const auto p = pooled_moments(ens);
  const double pol2 = p.mean_Jy * p.mean_Jy + p.mean_Jz * p.mean_Jz;
  return {detail::xi2_from_w(k, ens.j, p.var_Jx, w.mean_W),
          detail::xi2_sm_from_polarization(k, ens.j, p.var_Jx, pol2, p.mean_N * ens.j.value())};
}

CriterionResult evaluate_fluctuating(const ShotEnsemble& ens, CriterionId id, int k,
                                     CurveCache& cache, const DepthOptions& options) {
  switch (id) {
    case CriterionId::xi2: return fluctuating_linear_parameters(ens, k).xi2;
    case CriterionId::xi2_sm: return fluctuating_linear_parameters(ens, k).xi2_sm;
    case CriterionId::nonlinear:
    case CriterionId::sorensen_molmer: {
      const SpinLength J(k * ens.j.two_j());
      const CurveKind kind = id == CriterionId::nonlinear ? CurveKind::G : CurveKind::F;
      const CurveBound bound = [&](double X) {
        if (X <= 0.0) return 0.0;
        if (X >= 1.0) return 0.5;
        return evaluate(*cache.get(J, kind, options.half_integer_curves), X);
      };
      return id == CriterionId::nonlinear ? fluctuating_nonlinear(ens, k, bound)
                                          : fluctuating_sm(ens, k, bound);
    }
    default:
      throw Error(ErrorCode::InvalidArgument,
                  std::string(to_string(id)) + " has no fluctuating-N form");
  }
}

}  // namespace spindepth
