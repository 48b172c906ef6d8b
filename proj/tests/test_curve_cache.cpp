#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <thread>

#include <unistd.h>

#include "spindepth/curve_cache.hpp"
#include "spindepth/errors.hpp"

using namespace spindepth;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("spindepth_test_" + name + "_" +
                                                std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("curve JSON round trip is lossless") {
  const auto f = compute_F_curve(SpinLength(6));
  const auto text = curve_to_json(f);
  CHECK(text.find("\"version\":1") != std::string::npos);
  CHECK(text.find("\"two_J\":6") != std::string::npos);
  CHECK(text.find("null") != std::string::npos);  // endpoint derivative
  const auto back = curve_from_json(text);
  CHECK(back.J == f.J);
  CHECK(back.kind == f.kind);
  CHECK(back.provenance == f.provenance);
  CHECK(back.grid_hash == f.grid_hash);
  REQUIRE(back.samples.size() == f.samples.size());
  for (std::size_t i = 0; i < f.samples.size(); ++i) {
    CHECK(back.samples[i].x == f.samples[i].x);
    CHECK(back.samples[i].value == f.samples[i].value);
    CHECK(back.samples[i].lambda == f.samples[i].lambda);
    CHECK(back.samples[i].derivative == f.samples[i].derivative);
  }
  for (double X : {0.0, 0.123, 0.5, 0.999}) CHECK(evaluate(back, X) == evaluate(f, X));
  CHECK(curve_to_json(back) == text);
}

TEST_CASE("reals use 17 significant digits") {
  BoundaryCurve c;
  c.samples = {{0.0, 0.0, 0.0, 0.0}, {0.1, 0.1, 1.0 / 3.0, 0.25}};
  const auto text = curve_to_json(c);
  CHECK(text.find("0.33333333333333331") != std::string::npos);
  CHECK(text.find("0.10000000000000001") != std::string::npos);
}

TEST_CASE("malformed curve files are rejected") {
  CHECK_THROWS_AS(curve_from_json("{"), Error);
  CHECK_THROWS_AS(curve_from_json("{\"version\":2}"), Error);
  CHECK_THROWS_AS(curve_from_json("{\"version\":1,\"two_J\":2}"), Error);
}

TEST_CASE("memory cache shares curve objects") {
  CurveCache cache;
  const auto a = cache.get(SpinLength(4), CurveKind::G);
  const auto b = cache.get(SpinLength(4), CurveKind::G);
  CHECK(a.get() == b.get());
  const auto f = cache.get(SpinLength(4), CurveKind::F);
  CHECK(f->kind == CurveKind::F);
  CHECK(cache.computed() == 1);
  CHECK(cache.loaded() == 0);
  CHECK_THROWS_AS(cache.get(SpinLength(3), CurveKind::G), Error);
}

TEST_CASE("disk cache: warm rerun performs no eigensolves and gives identical bytes") {
  const auto dir = fresh_dir("warm");
  std::string first_bytes;
  {
    CurveCache cache(dir);
    cache.get(SpinLength(8), CurveKind::G);
    CHECK(cache.computed() == 1);
    const auto file = cache.file_for(SpinLength(8), CurveKind::G);
    CHECK(file.filename().string() ==
          "curve_8_G_" + LambdaGrid{}.hash() + ".json");
    REQUIRE(fs::exists(file));
    REQUIRE(fs::exists(cache.file_for(SpinLength(8), CurveKind::F)));
    first_bytes = slurp(file);
  }
  {
    CurveCache cache(dir);
    const auto g = cache.get(SpinLength(8), CurveKind::G);
    CHECK(cache.computed() == 0);
    CHECK(cache.loaded() == 1);
    CHECK(curve_to_json(*g) == first_bytes);
  }
  // no temporary files left behind
  for (const auto& e : fs::directory_iterator(dir)) {
    CHECK(e.path().string().find(".tmp.") == std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("grid changes produce a different key") {
  const auto dir = fresh_dir("grid");
  LambdaGrid coarse;
  coarse.resolution = 0.02;
  CurveCache a(dir), b(dir, coarse);
  CHECK(a.key_hash(SpinLength(2)) != b.key_hash(SpinLength(2)));
  a.get(SpinLength(2), CurveKind::F);
  b.get(SpinLength(2), CurveKind::F);
  CHECK(b.computed() == 1);
  CHECK(b.get(SpinLength(2), CurveKind::F)->samples.size() <
        a.get(SpinLength(2), CurveKind::F)->samples.size());
  fs::remove_all(dir);
}

TEST_CASE("corrupt cache files are recomputed") {
  const auto dir = fresh_dir("corrupt");
  CurveCache cache(dir);
  {
    std::ofstream(cache.file_for(SpinLength(2), CurveKind::F)) << "{not json";
  }
  const auto f = cache.get(SpinLength(2), CurveKind::F);
  CHECK(cache.computed() == 1);
  CHECK(f->samples.size() > 10);
  CurveCache again(dir);
  again.get(SpinLength(2), CurveKind::F);
  CHECK(again.loaded() == 1);
  fs::remove_all(dir);
}

TEST_CASE("half-integer curves on request") {
  LambdaGrid grid;
  grid.resolution = 0.05;
  CurveCache cache(std::nullopt, grid);
  const auto g = cache.get(SpinLength(1), CurveKind::G, true);
  CHECK(g->provenance == Provenance::HalfIntegerConstrained);
  CHECK(evaluate(*g, 0.5) <= 0.25 + 1e-9);
  CHECK(cache.key_hash(SpinLength(1)) != cache.key_hash(SpinLength(2)));
}

TEST_CASE("concurrent requests share one computation per curve") {
  CurveCache cache;
  std::vector<std::thread> threads;
  std::vector<std::shared_ptr<const BoundaryCurve>> got(12);
  for (int t = 0; t < 12; ++t) {
    threads.emplace_back([&, t] { got[t] = cache.get(SpinLength(2 * (1 + t % 3)), CurveKind::G); });
  }
  for (auto& th : threads) th.join();
  CHECK(cache.computed() == 3);
  for (int t = 3; t < 12; ++t) CHECK(got[t].get() == got[t % 3].get());
}
