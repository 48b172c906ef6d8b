#include "doctest.h"

#include <cmath>
#include <limits>
#include <map>

#include "oracles.hpp"
#include "spindepth/boundary.hpp"
#include "spindepth/errors.hpp"

using namespace spindepth;

namespace {

double g1(double X) { return 0.5 * (1.0 - std::sqrt(1.0 - X)); }
double f1(double X) { return g1(X * X); }

// Second-order derivative estimate on a non-uniform grid.
double lagrange_derivative(const CurveSample& a, const CurveSample& b, const CurveSample& c) {
  const double hm = b.x - a.x, hp = c.x - b.x;
  return -hp / (hm * (hm + hp)) * a.value + (hp - hm) / (hm * hp) * b.value +
         hm / (hp * (hm + hp)) * c.value;
}

const BoundaryCurve& f_curve(int two_j) {
  static std::map<int, BoundaryCurve> cache;
  auto it = cache.find(two_j);
  if (it == cache.end()) it = cache.emplace(two_j, compute_F_curve(SpinLength(two_j))).first;
  return it->second;
}

}  // namespace

TEST_CASE("J=1 F curve reproduces the closed form") {
  const auto& f = f_curve(2);
  REQUIRE(f.samples.size() > 100);
  CHECK(f.samples.front().x == 0.0);
  CHECK(f.samples.front().value == 0.0);
  for (const auto& s : f.samples) CHECK(std::abs(s.value - f1(s.x)) < 1e-8);
}

TEST_CASE("F curve rejects half-integer J") {
  CHECK_THROWS_AS(compute_F_curve(SpinLength(3)), Error);
}

TEST_CASE("F_2 approaches the coherent-state value 1/2 at X -> 1") {
  const auto& f = f_curve(4);
  const auto& last_sampled = f.samples[f.samples.size() - 2];
  CHECK(last_sampled.x >= 1.0 - 1e-6);
  CHECK(last_sampled.value == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(f.samples.back().x == 1.0);
  CHECK(f.samples.back().value == 0.5);
}

TEST_CASE("curve invariants for a range of J") {
  for (int J : {1, 2, 5, 10, 19}) {
    const auto& f = f_curve(2 * J);
    const auto g = g_from_f(f);
    for (const auto* c : {&f, &g}) {
      const auto& s = c->samples;
      CHECK(s.front().value == 0.0);
      for (std::size_t i = 1; i < s.size(); ++i) {
        CHECK(s[i].x > s[i - 1].x);
        CHECK(s[i].value >= s[i - 1].value - 1e-15);
        CHECK(s[i].x <= 1.0);
      }
      for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        const double left = (s[i].value - s[i - 1].value) / (s[i].x - s[i - 1].x);
        const double right = (s[i + 1].value - s[i].value) / (s[i + 1].x - s[i].x);
        CHECK(right - left >= -1e-9);
      }
      // stored slope versus a numerical derivative, away from the endpoints
      for (std::size_t i = 3; i + 3 < s.size() && s[i + 1].x < 0.999; ++i) {
        const double num = lagrange_derivative(s[i - 1], s[i], s[i + 1]);
        CHECK(num == doctest::Approx(s[i].derivative).epsilon(0.01));
      }
    }
  }
}

TEST_CASE("g_from_f maps the J=1 curve onto G_1") {
  const auto g = g_from_f(f_curve(2));
  CHECK(g.kind == CurveKind::G);
  for (const auto& s : g.samples) CHECK(std::abs(s.value - g1(s.x)) < 1e-8);
  CHECK(g.samples.front().derivative == doctest::Approx(0.25));
  CHECK(g.samples.back().x == 1.0);
  CHECK(g.samples.back().value == 0.5);
  CHECK_THROWS_AS(g_from_f(g), Error);
}

TEST_CASE("G derivative at the origin is 1/(2(J+1))") {
  for (int J : {1, 3, 7}) {
    const auto g = g_from_f(f_curve(2 * J));
    CHECK(g.samples.front().derivative == doctest::Approx(1.0 / (2.0 * (J + 1))));
    CHECK(g.samples[1].derivative == doctest::Approx(1.0 / (2.0 * (J + 1))).epsilon(1e-4));
  }
}

TEST_CASE("evaluate is a certified lower bound") {
  const auto f = f_curve(2);
  const auto g = g_from_f(f);
  CHECK(evaluate(g, 0.0) == 0.0);
  CHECK(evaluate(g, 0.75) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(evaluate(g, 1.0) == 0.5);
  double prev = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double X = i / 20000.0;
    const double eg = evaluate(g, X);
    CHECK(eg <= g1(X) + 1e-13);
    CHECK(eg >= prev);
    prev = eg;
    CHECK(evaluate(f, X) <= f1(X) + 1e-13);
    if (X <= 0.9999) CHECK(eg >= g1(X) - 1e-4);
  }
  CHECK_THROWS_AS(evaluate(g, 1.0 + 1e-6), Error);
  CHECK_THROWS_AS(evaluate(g, -1e-6), Error);
}

TEST_CASE("G evaluated at X^2 agrees with F evaluated at X") {
  for (int J : {1, 4, 12}) {
    const auto& f = f_curve(2 * J);
    const auto g = g_from_f(f);
    for (int i = 0; i <= 400; ++i) {
      const double X = i / 400.0;
      CHECK(evaluate(g, X * X) == doctest::Approx(evaluate(f, X)).epsilon(1e-3).scale(1e-3));
    }
  }
}

TEST_CASE("sandwich: tangent and tilde bounds lie below G") {
  for (int J : {1, 5, 10, 19}) {
    const SpinLength spin(2 * J);
    const auto g = g_from_f(f_curve(2 * J));
    for (const auto& s : g.samples) {
      const double e = evaluate(g, s.x);
      CHECK(tilde_G(spin, s.x) <= e + 1e-9);
      CHECK(tangent_bound(spin, s.x) <= e + 1e-9);
    }
  }
}

TEST_CASE("tilde_G special values") {
  for (int two_j : {2, 6, 20}) {
    const SpinLength J(two_j);
    CHECK(tilde_G(J, 0.0) == 0.0);
    CHECK(tilde_G(J, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    const double h = 1e-8;
    CHECK(tilde_G(J, h) / h == doctest::Approx(1.0 / (4.0 * (J.value() + 1))).epsilon(1e-6));
    // direct form of the formula
    const double X = 0.37, j = J.value();
    const double direct = 0.5 * ((j + 1) - j * X - std::sqrt(std::pow(j + 1 - j * X, 2) - X));
    CHECK(tilde_G(J, X) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("tangent bound") {
  CHECK(tangent_bound(SpinLength(2), 0.0) == 0.0);
  CHECK(tangent_bound(SpinLength(2), 0.1) == doctest::Approx(0.025));
}

TEST_CASE("half-integer F: spin 1/2 is X^2/2 on the Bloch sphere") {
  for (double X : {0.05, 0.3, 0.5, 0.8, 0.95}) {
    CHECK(compute_F_halfinteger(SpinLength(1), X) == doctest::Approx(X * X / 2).epsilon(1e-9));
  }
}

TEST_CASE("half-integer F: J=3/2") {
  CHECK(compute_F_halfinteger(SpinLength(3), 0.0) == doctest::Approx(0.0).epsilon(1e-14));
  const double oracle = oracle::brute_force_F(1.5, 0.5, 5.0, 1e-3, 2e-6);
  CHECK(oracle == doctest::Approx(0.0581616521).epsilon(1e-8));  // frozen from the oracle
  CHECK(std::abs(compute_F_halfinteger(SpinLength(3), 0.5) - oracle) < 1e-6);
  CHECK_THROWS_AS(compute_F_halfinteger(SpinLength(2), 0.5), Error);
  CHECK_THROWS_AS(compute_F_halfinteger(SpinLength(3), 1.0), Error);
}

TEST_CASE("constrained minimum agrees with the sweep for integer J") {
  const auto& f = f_curve(4);
  for (std::size_t i = 20; i < f.samples.size() - 1; i += 60) {
    const auto& s = f.samples[i];
    const auto cm = constrained_min_variance(SpinLength(4), s.x);
    CHECK(cm.variance / 2.0 == doctest::Approx(s.value).epsilon(1e-7).scale(1e-9));
  }
}

TEST_CASE("half-integer curve is a convex lower envelope") {
  LambdaGrid grid;
  grid.resolution = 0.02;
  const auto f = compute_F_halfinteger_curve(SpinLength(1), grid);
  CHECK(f.provenance == Provenance::HalfIntegerConstrained);
  for (int i = 0; i <= 1000; ++i) {
    const double X = i / 1000.0;
    CHECK(evaluate(f, X) <= X * X / 2 + 1e-9);
    CHECK(evaluate(f, X) >= X * X / 2 - 2e-3);
  }
  const auto g = g_from_f(f);
  for (int i = 0; i <= 100; ++i) CHECK(evaluate(g, i / 100.0) <= i / 200.0 + 1e-9);
}

TEST_CASE("convexity report") {
  const auto g10 = g_from_f(f_curve(20));
  const std::vector<double> alphas{1.5, 2.0, 2.5, 3.0, 4.0};
  const auto rep = convexity_check(g10, alphas);
  CHECK(rep.verdict);
  CHECK(rep.max_derivative_decrease <= 1e-9);
  REQUIRE(rep.alpha_probes.size() == 5);
  CHECK(rep.alpha_probes[0].convex);
  CHECK(rep.alpha_probes[1].convex);
  CHECK_FALSE(rep.alpha_probes[2].convex);
  CHECK_FALSE(rep.alpha_probes[3].convex);
  CHECK_FALSE(rep.alpha_probes[4].convex);

  BoundaryCurve line;
  line.samples = {{0, 0.0, 0.0, 1.0}, {1, 0.5, 0.5, 1.0}, {2, 1.0, 1.0, 1.0}};
  const auto flat = convexity_check(line, {});
  CHECK(flat.max_derivative_decrease == 0.0);
  CHECK(flat.verdict);

  BoundaryCurve two;
  two.samples = {{0, 0.0, 0.0, 0.0}, {1, 1.0, 0.5, 1.0}};
  CHECK_THROWS_AS(convexity_check(two, {}), Error);
}

TEST_CASE("producibility boundary") {
  const SpinLength half(1);
  const auto g = g_from_f(f_curve(20));  // J = k j = 10 for k = 20
  const auto pb = producibility_boundary(200, half, 20, g);
  CHECK(pb.points.front().second_moment_perp == doctest::Approx(200 * 0.5 * (10 + 1)));
  CHECK(pb.points.front().var_jx == 0.0);
  CHECK(pb.points.back().second_moment_perp == doctest::Approx(10100.0));
  CHECK(pb.points.back().var_jx == doctest::Approx(50.0));
  for (std::size_t i = 1; i < pb.points.size(); ++i) {
    CHECK(pb.points[i].second_moment_perp > pb.points[i - 1].second_moment_perp);
    CHECK(pb.points[i].var_jx >= 0.0);
    CHECK(pb.points[i].second_moment_perp >= 200 * 0.5 * 11 - 1e-9);
  }
  // same boundary from the F curve
  const auto pf = producibility_boundary(200, half, 20, f_curve(20));
  CHECK(pf.points[100].second_moment_perp == doctest::Approx(pb.points[100].second_moment_perp));

  CHECK_THROWS_AS(producibility_boundary(200, half, 19, g), Error);
  CHECK_THROWS_AS(producibility_boundary(20, half, 20, g), Error);

  // Dicke point lies outside the (N-1)-producible boundary: at its second
  // moment the boundary requires a strictly positive variance.
  for (int N : {2, 4, 10}) {
    const int k = N - 1;
    const SpinLength one(2);
    const auto pbk = producibility_boundary(N, one, k, g_from_f(f_curve(2 * k)));
    const double dicke = N * (N + 1.0);
    CHECK(pbk.points.back().second_moment_perp == doctest::Approx(dicke));
    CHECK(pbk.points.back().var_jx > 0.0);
  }
}
