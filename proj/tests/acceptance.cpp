// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spindepth/boundary.hpp"
#include "spindepth/criteria.hpp"
#include "spindepth/curve_cache.hpp"
#include "spindepth/errors.hpp"
#include "spindepth/fluctuating.hpp"
#include "spindepth/format.hpp"
#include "spindepth/states.hpp"

using namespace spindepth;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail.clear();
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

bool same_bits(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return std::memcmp(&a, &b, sizeof a) == 0;
}

// G_1(X) against the closed form over [0, 0.9999].
Outcome ac1() {
  Outcome o;
  const auto t0 = Clock::now();
  CurveCache cache;
  const auto g = cache.get(SpinLength(2), CurveKind::G);
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  for (const auto& s : g->samples) {
    if (s.x > 0.9999) continue;
    worst = std::max(worst, std::abs(s.value - 0.5 * (1.0 - std::sqrt(1.0 - s.x))));
  }
  if (worst > 1e-8) o.fail(fmt("max error %.3g", worst));
  if (g->max_x() < 0.9999) o.fail(fmt("samples stop at X = %.6f", g->max_x()));
  if (elapsed >= 1.0) o.fail(fmt("took %.2f s", elapsed));
  if (o.pass) o.detail = fmt("max |G - closed form| = %.2e, %.3f s", worst, elapsed);
  return o;
}

// G'(0) from the two smallest-X samples, and the small-lambda expansion.
Outcome ac2(CurveCache& cache) {
  Outcome o;
  double worst_slope = 0.0, worst_pert = 0.0;
  for (int J = 1; J <= 19; ++J) {
    const auto g = cache.get(SpinLength(2 * J), CurveKind::G);
    const auto& s0 = g->samples[0];
    const auto& s1 = g->samples[1];
    const double slope = (s1.value - s0.value) / (s1.x - s0.x);
    const double rel = std::abs(slope * 2.0 * (J + 1) - 1.0);
    worst_slope = std::max(worst_slope, rel);
    if (rel > 0.01) o.fail("J=" + std::to_string(J) + fmt(" slope off by %.3g", rel));

    const double lambda = 1e-3;
    const auto at = std::find_if(g->samples.begin(), g->samples.end(),
                                 [&](const CurveSample& s) { return s.lambda == lambda; });
    if (at == g->samples.end()) {
      o.fail("J=" + std::to_string(J) + " has no sample at lambda = 1e-3");
      continue;
    }
    const double rx = std::abs(at->x / (lambda * lambda * (J + 1.0) * (J + 1.0)) - 1.0);
    const double rg = std::abs(at->value / (0.5 * lambda * lambda * (J + 1.0)) - 1.0);
    worst_pert = std::max({worst_pert, rx, rg});
    if (rx > 0.02 || rg > 0.02) o.fail("J=" + std::to_string(J) + fmt(" expansion off by %.3g", std::max(rx, rg)));
  }
  if (o.pass) o.detail = fmt("slope rel. error <= %.2e, expansion rel. error <= %.2e", worst_slope, worst_pert);
  return o;
}

// tilde_G <= G and X / (2(J+1)) <= G; tilde_G(1) = 1/2; slope ratio 2 at the origin.
Outcome ac3(CurveCache& cache) {
  Outcome o;
  double worst_ratio = 0.0;
  for (int J : {1, 5, 10, 19}) {
    const SpinLength sJ(2 * J);
    const auto g = cache.get(sJ, CurveKind::G);
    int bad = 0;
    for (const auto& s : g->samples) {
      const double tol = 1e-12 * std::max(1.0, s.value);
      if (tilde_G(sJ, s.x) > s.value + tol || tangent_bound(sJ, s.x) > s.value + tol) ++bad;
    }
    if (bad) o.fail("J=" + std::to_string(J) + ": " + std::to_string(bad) + " samples below a lower bound");
    if (std::abs(tilde_G(sJ, 1.0) - 0.5) > 1e-6) o.fail("tilde_G(1) != 1/2 for J=" + std::to_string(J));
    const auto& s1 = g->samples[1];
    const double slope_g = (s1.value - g->samples[0].value) / (s1.x - g->samples[0].x);
    const double ratio = slope_g / (tilde_G(sJ, s1.x) / s1.x);
    worst_ratio = std::max(worst_ratio, std::abs(ratio / 2.0 - 1.0));
    if (std::abs(ratio / 2.0 - 1.0) > 0.02) o.fail("J=" + std::to_string(J) + fmt(" slope ratio %.4f", ratio));
  }
  if (o.pass) o.detail = fmt("bounds hold at every sample, slope ratio within %.2e of 2", worst_ratio);
  return o;
}

// Dicke states certified N-entangled.
Outcome ac4(CurveCache& cache) {
  Outcome o;
  DepthOptions options;
  options.half_integer_curves = true;  // odd k for j = 1/2
  const auto t0 = Clock::now();
  for (int N : {10, 100}) {
    for (int two_j : {1, 2}) {
      const auto rec = dicke_moments(N, SpinLength(two_j));
      const auto v = detect_depth(rec, CriterionId::nonlinear, cache, options);
      if (v.certified_depth != N) {
        o.fail("N=" + std::to_string(N) + " 2j=" + std::to_string(two_j) + " depth " +
               std::to_string(v.certified_depth));
      }
    }
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= 10.0) o.fail(fmt("took %.2f s", elapsed));
  if (o.pass) o.detail = fmt("depth N for all four cases, %.3f s", elapsed);
  return o;
}

double p_star(int N, double j, int k) {
  return 3.0 * (N - k) * j /
         (2.0 * j * (j + 1) * (k * j + 1) * (N - k) - 2.0 * (j + 1) + 3.0 * (N * j + 1));
}

// Location of the xi2 verdict flip on noisy Dicke states, by bisection.
double xi2_flip(int N, SpinLength j, int k) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (xi2(noisy_dicke_moments(N, j, mid), k).violated ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Noisy Dicke xi2 threshold.
Outcome ac5() {
  Outcome o;
  const SpinLength half(1);
  const double target = 1.0 / 28.0;
  if (std::abs(p_star(100, 0.5, 50) - target) > 1e-15) o.fail("formula does not give 1/28");
  const double flip = xi2_flip(100, half, 50);
  if (std::abs(flip - target) > 1e-9) o.fail(fmt("flip at %.12f", flip));
  if (!xi2(noisy_dicke_moments(100, half, target - 1e-9), 50).violated) o.fail("not violated below 1/28");
  if (xi2(noisy_dicke_moments(100, half, target + 1e-9), 50).violated) o.fail("violated above 1/28");

  std::mt19937_64 rng(28);
  double worst = std::abs(flip - target);
  for (int t = 0; t < 20; ++t) {
    const int two_j = std::uniform_int_distribution<int>(1, 4)(rng);
    int N = std::uniform_int_distribution<int>(4, 300)(rng);
    if ((N * two_j) % 2) ++N;
    int k = std::uniform_int_distribution<int>(1, N - 1)(rng);
    if ((k * two_j) % 2) k = k == N - 1 ? k - 1 : k + 1;
    const double p = p_star(N, two_j / 2.0, k);
    const double f = xi2_flip(N, SpinLength(two_j), k);
    worst = std::max(worst, std::abs(f - p));
    if (std::abs(f - p) > 1e-9) {
      o.fail("N=" + std::to_string(N) + " 2j=" + std::to_string(two_j) + " k=" + std::to_string(k) +
             fmt(" flip %.12g vs %.12g", f, p));
    }
  }
  if (o.pass) o.detail = fmt("flip at 1/28 %+.1e, 20 random triples within %.1e", flip - target, worst);
  return o;
}

// Squeezed states of 1000 qubits with 10 decohered: depth tables for both criteria.
Outcome ac6() {
  Outcome o;
  const auto t0 = Clock::now();
  CurveCache cache;
  const int N = 1000, m = 10;
  std::vector<double> mus{0.0};
  for (int i = 0; i < 32; ++i) mus.push_back(std::pow(10.0, -2.0 + 6.0 * i / 31.0));
  std::vector<int> nl, sm;
  for (double mu : mus) {
    const auto rec = decohere_particles(squeezed_state_moments(N, mu), m).record();
    nl.push_back(detect_depth(rec, CriterionId::nonlinear, cache).certified_depth);
    sm.push_back(detect_depth(rec, CriterionId::sorensen_molmer, cache).certified_depth);
  }
  const double elapsed = seconds_since(t0);
  // nonlinear: non-increasing in mu, i.e. non-decreasing toward small mu
  for (std::size_t i = 1; i < mus.size(); ++i) {
    if (nl[i] > nl[i - 1]) o.fail(fmt("nonlinear depth rises between mu=%.4g and %.4g", mus[i - 1], mus[i]));
  }
  // SM: interior maximum, lower at both ends
  const auto peak = std::max_element(sm.begin(), sm.end()) - sm.begin();
  if (peak == 0 || peak == static_cast<long>(sm.size()) - 1 || sm.front() >= sm[peak] || sm.back() >= sm[peak]) {
    o.fail("SM depth has no interior maximum");
  }
  if (std::abs(nl.back() - sm.back()) > 1) o.fail("criteria disagree at the largest mu");
  if (elapsed >= 300.0) o.fail(fmt("took %.1f s", elapsed));
  if (o.pass) {
    o.detail = std::to_string(mus.size()) + " mu points; nonlinear " + std::to_string(nl.front()) + " -> " +
               std::to_string(nl.back()) + ", SM peak " + std::to_string(sm[peak]) +
               fmt(" at mu=%.3g, %.1f s", mus[peak], elapsed);
  }
  return o;
}

// Derivative monotonicity and the alpha probes.
Outcome ac7(CurveCache& cache) {
  Outcome o;
  const std::vector<double> alphas{1.5, 2.0, 2.5, 3.0, 4.0};
  double worst = 0.0;
  for (int J : {1, 10, 19}) {
    const auto rep = convexity_check(*cache.get(SpinLength(2 * J), CurveKind::G), alphas);
    worst = std::max(worst, rep.max_derivative_decrease);
    if (rep.max_derivative_decrease > 1e-9) {
      o.fail("J=" + std::to_string(J) + fmt(" derivative decreases by %.3g", rep.max_derivative_decrease));
    }
    for (const auto& p : rep.alpha_probes) {
      const bool expect_convex = p.alpha <= 2.0;
      if (p.convex != expect_convex) {
        o.fail("J=" + std::to_string(J) + fmt(" alpha=%.1f reported %s", p.alpha) +
               (p.convex ? "convex" : "non-convex"));
      }
    }
  }
  if (o.pass) o.detail = fmt("max derivative decrease %.2e; alpha 1.5, 2 convex; 2.5, 3, 4 not", worst);
  return o;
}

// Random pure producible records: no violations at their level, and the
// polarization inequality for pure producible states.
Outcome ac8(CurveCache& cache) {
  Outcome o;
  std::mt19937_64 rng(8);
  DepthOptions options;
  options.half_integer_curves = true;
  int evaluations = 0, inequality_checks = 0;
  for (int i = 0; i < 1000; ++i) {
    const SpinLength j(i % 2 == 0 ? 1 : 2);
    const int N = std::uniform_int_distribution<int>(2, 12)(rng);
    const int kmax = std::uniform_int_distribution<int>(1, std::min(N - 1, j.two_j() == 1 ? 12 : 7))(rng);
    std::vector<int> part{kmax};
    for (int left = N - kmax; left > 0;) {
      const int g = std::min(left, std::uniform_int_distribution<int>(1, kmax)(rng));
      part.push_back(g);
      left -= g;
    }
    const auto rec = random_producible_moments(j, part, rng(), GroupState::mixed);
    for (auto id : all_criteria()) {
      if ((id == CriterionId::duan || id == CriterionId::qubit_tangent) && j.two_j() != 1) continue;
      const auto ks = admissible_k(rec, id, options);
      const auto level = std::find_if(ks.begin(), ks.end(), [&](int k) { return k >= kmax; });
      if (level == ks.end()) continue;
      ++evaluations;
      const auto r = evaluate_criterion(rec, id, *level, cache, options);
      if (r.violated) {
        o.fail("record " + std::to_string(i) + " violates " + std::string(to_string(id)) + " at k=" +
               std::to_string(*level));
      }
    }
    const double nj = rec.Nj(), jj = j.value();
    const double radicand = (rec.second_moment_perp - nj * (kmax * jj + 1.0)) / (N * (N - kmax) * jj * jj);
    if (radicand >= 0.0) {
      ++inequality_checks;
      if (rec.polarization() / nj < std::sqrt(radicand) - 1e-9) {
        o.fail("record " + std::to_string(i) + " breaks the polarization inequality");
      }
    }
  }

  // Duan implies the qubit tangent criterion on physical qubit records.
  int duan_hits = 0;
  std::uniform_real_distribution<double> u;
  for (int i = 0; i < 1000; ++i) {
    MeasurementRecord rec;
    switch (i % 4) {
      case 0: {
        const int N = 2 * std::uniform_int_distribution<int>(1, 100)(rng);
        const int m = std::uniform_int_distribution<int>(0, N / 4)(rng);
        rec = decohere_particles(squeezed_state_moments(N, std::pow(10.0, -2 + 5 * u(rng))), m).record();
        break;
      }
      case 1: {
        const int N = 2 * std::uniform_int_distribution<int>(1, 100)(rng);
        rec = noisy_dicke_moments(N, SpinLength(1), u(rng));
        break;
      }
      default: {
        const int N = std::uniform_int_distribution<int>(2, 12)(rng);
        std::vector<int> part;
        for (int left = N; left > 0;) {
          const int g = std::min(left, std::uniform_int_distribution<int>(1, N)(rng));
          part.push_back(g);
          left -= g;
        }
        rec = random_producible_moments(SpinLength(1), part, rng(), GroupState::mixed);
      }
    }
    for (int k = 1; k < rec.N; ++k) {
      if (!duan_criterion(rec, k).violated) continue;
      ++duan_hits;
      if (!qubit_tangent_criterion(rec, k).violated) {
        o.fail("Duan without tangent at record " + std::to_string(i) + " k=" + std::to_string(k));
      }
    }
  }
  if (duan_hits == 0) o.fail("Duan never violated; implication untested");
  if (o.pass) {
    o.detail = std::to_string(evaluations) + " level-k evaluations, " + std::to_string(inequality_checks) +
               " inequality checks, " + std::to_string(duan_hits) + " Duan violations all implying tangent";
  }
  return o;
}

double max_diff(const MeasurementRecord& r, const oracle::DenseMoments& d) {
  double worst = std::abs(r.mean_Jy - d.mean(1));
  worst = std::max(worst, std::abs(r.mean_Jz - d.mean(2)));
  worst = std::max(worst, std::abs(*r.mean_Jx - d.mean(0)));
  worst = std::max(worst, std::abs(r.var_Jx - (d.second(0, 0) - d.mean(0) * d.mean(0))));
  worst = std::max(worst, std::abs(r.second_moment_perp - d.second(1, 1) - d.second(2, 2)));
  return worst;
}

double max_diff(const SymmetricStateMoments& s, const oracle::DenseMoments& d) {
  return std::max((s.mean - d.mean).cwiseAbs().maxCoeff(), (s.second - d.second).cwiseAbs().maxCoeff());
}

// Dense density-matrix oracles.
Outcome ac9() {
  Outcome o;
  double worst = 0.0;
  struct Case {
    int N;
    int two_j;
  };
  for (auto c : {Case{2, 1}, Case{4, 1}, Case{6, 1}, Case{1, 2}, Case{2, 2}, Case{3, 2}, Case{4, 2},
                 Case{2, 3}, Case{4, 3}}) {
    const auto ps = oracle::product_space(c.N, c.two_j / 2.0);
    const auto dense = oracle::dense_moments(oracle::dicke_rho(ps), ps);
    worst = std::max(worst, max_diff(dicke_moments(c.N, SpinLength(c.two_j)), dense));
  }
  for (int N = 2; N <= 6; ++N) {
    const auto ps = oracle::product_space(N, 0.5);
    for (double mu : {0.0, 0.4, 1.0, 5.0}) {
      Eigen::MatrixXcd rho = oracle::symmetric_ground_rho(ps, mu);
      SymmetricStateMoments s;
      if (N % 2 == 0) {
        s = squeezed_state_moments(N, mu);
      } else {
        const auto d0 = oracle::dense_moments(rho, ps);
        s.N = N;
        s.j = SpinLength(1);
        s.mean = d0.mean;
        s.second = d0.second;
      }
      for (int m = 0; m <= N; ++m) {
        worst = std::max(worst, max_diff(decohere_particles(s, m), oracle::dense_moments(rho, ps)));
        if (m < N) rho = oracle::depolarize_qubit(rho, N, m);
      }
    }
  }
  if (worst > 1e-10) o.fail(fmt("moment mismatch %.3g", worst));
  const double brute = oracle::brute_force_F(1.5, 0.5, 5.0, 1e-3, 2e-6);
  const double f = compute_F_halfinteger(SpinLength(3), 0.5);
  if (std::abs(f - brute) > 1e-6) o.fail(fmt("F_3/2(0.5) = %.10f vs brute force %.10f", f, brute));
  if (o.pass) o.detail = fmt("moments within %.1e, F_3/2(0.5) off by %.1e", worst, std::abs(f - brute));
  return o;
}

ShotBin bin_from(const MeasurementRecord& r, double Q, bool with_mean_x) {
  ShotBin b;
  b.N = r.N;
  b.Q = Q;
  b.var_Jx = r.var_Jx;
  if (with_mean_x) b.mean_Jx = r.mean_Jx;
  b.mean_Jy = r.mean_Jy;
  b.mean_Jz = r.mean_Jz;
  b.second_moment_perp = r.second_moment_perp;
  return b;
}

// Fluctuating particle number.
Outcome ac10(CurveCache& cache) {
  Outcome o;
  std::vector<MeasurementRecord> recs;
  for (double mu : {0.0, 0.05, 1.0, 30.0, 1000.0}) {
    recs.push_back(decohere_particles(squeezed_state_moments(80, mu), 3).record());
  }
  recs.push_back(noisy_dicke_moments(50, SpinLength(1), 0.03));
  recs.push_back(noisy_dicke_moments(24, SpinLength(2), 0.1));
  const std::vector<int> part{3, 2, 4, 1};
  recs.push_back(random_producible_moments(SpinLength(2), part, 77, GroupState::mixed));
  int compared = 0;
  const std::vector<CriterionId> ids{CriterionId::nonlinear, CriterionId::sorensen_molmer, CriterionId::xi2,
                                     CriterionId::xi2_sm};
  for (const auto& r : recs) {
    for (bool with_mean : {true, false}) {
      ShotEnsemble ens;
      ens.j = r.j;
      ens.bins = {bin_from(r, 1.0, with_mean)};
      for (auto id : ids) {
        for (int k : admissible_k(r, id)) {
          const auto a = evaluate_fluctuating(ens, id, k, cache);
          const auto b = evaluate_criterion(r, id, k, cache);
          ++compared;
          if (a.applicable != b.applicable || a.violated != b.violated || !same_bits(a.lhs, b.lhs) ||
              !same_bits(a.rhs, b.rhs) || !same_bits(a.margin, b.margin)) {
            o.fail(std::string(to_string(id)) + " k=" + std::to_string(k) + " differs from fixed N");
          }
        }
      }
    }
  }
  const SpinLength half(1);
  ShotEnsemble two;
  two.j = half;
  two.bins = {bin_from(dicke_moments(100, half), 0.5, true), bin_from(dicke_moments(120, half), 0.5, true)};
  double worst = 0.0;
  for (int k = 2; k < 100; k += 2) {
    const double arg = w_expectation(two, k).mean_W / (two.mean_N() * half.value());
    worst = std::max(worst, std::abs(arg - 1.0));
  }
  if (worst > 1e-12) o.fail(fmt("two-bin Dicke argument off by %.3g", worst));
  if (o.pass) {
    o.detail = std::to_string(compared) + fmt(" single-bin comparisons bit-identical, two-bin argument 1 %+.1e", worst);
  }
  return o;
}

}  // namespace

int main() {
  CurveCache cache;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> suite = {
      {"AC1", [] { return ac1(); }},
      {"AC2", [&] { return ac2(cache); }},
      {"AC3", [&] { return ac3(cache); }},
      {"AC4", [&] { return ac4(cache); }},
      {"AC5", [] { return ac5(); }},
      {"AC6", [] { return ac6(); }},
      {"AC7", [&] { return ac7(cache); }},
      {"AC8", [&] { return ac8(cache); }},
      {"AC9", [] { return ac9(); }},
      {"AC10", [&] { return ac10(cache); }},
  };
  int failures = 0;
  for (const auto& [name, run] : suite) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s %s  %s\n", name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
