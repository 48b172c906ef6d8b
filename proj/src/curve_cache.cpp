#include "spindepth/curve_cache.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "spindepth/errors.hpp"
#include "spindepth/format.hpp"

namespace spindepth {

namespace {

double real_or_inf(const nlohmann::json& v) {
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  return v.get<double>();
}

}  // namespace

std::string curve_to_json(const BoundaryCurve& curve) {
  std::string samples = "[";
  for (std::size_t i = 0; i < curve.samples.size(); ++i) {
    const auto& s = curve.samples[i];
    if (i) samples += ',';
    samples += JsonObject()
                   .add("lambda", s.lambda)
                   .add("X", s.x)
                   .add("value", s.value)
                   .add("derivative", s.derivative)
                   .str();
  }
  samples += ']';
  return JsonObject()
             .add("version", kCurveFileVersion)
             .add("two_J", curve.J.two_j())
             .add("kind", to_string(curve.kind))
             .add("provenance", to_string(curve.provenance))
             .add("grid_hash", curve.grid_hash)
             .add_raw("samples", samples)
             .str() +
         "\n";
}

BoundaryCurve curve_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.at("version").get<int>() != kCurveFileVersion) {
      throw Error(ErrorCode::Parse, "unsupported curve file version");
    }
    BoundaryCurve c;
    c.J = SpinLength(doc.at("two_J").get<int>());
    c.kind = curve_kind_from_string(doc.at("kind").get<std::string>());
    c.provenance = provenance_from_string(doc.at("provenance").get<std::string>());
    c.grid_hash = doc.at("grid_hash").get<std::string>();
    for (const auto& s : doc.at("samples")) {
      c.samples.push_back({real_or_inf(s.at("lambda")), s.at("X").get<double>(),
                           s.at("value").get<double>(), real_or_inf(s.at("derivative"))});
    }
    if (c.samples.size() < 2) throw Error(ErrorCode::Parse, "curve file has < 2 samples");
    c.build_envelope();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed curve file: ") + e.what());
  }
}

CurveCache::CurveCache(std::optional<std::filesystem::path> dir, LambdaGrid grid,
                       TwoParameterSearch search)
    : dir_(std::move(dir)), grid_(grid), search_(search) {
  if (dir_) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create cache directory " + dir_->string());
  }
}

std::string CurveCache::key_hash(SpinLength J) const {
  if (J.is_integer()) return grid_.hash();
  const std::string s = grid_.hash() + ";box=" + real17(search_.box_factor) +
                        ";l2grid=" + std::to_string(search_.lambda2_grid) +
                        ";golden=" + std::to_string(search_.golden_iterations) +
                        ";tol=" + real17(search_.constraint_tolerance);
  return fnv1a_hex(s);
}

std::filesystem::path CurveCache::file_for(SpinLength J, CurveKind kind) const {
  const std::string name = "curve_" + std::to_string(J.two_j()) + "_" +
                           std::string(to_string(kind)) + "_" + key_hash(J) + ".json";
  return dir_ ? *dir_ / name : std::filesystem::path(name);
}

int CurveCache::computed() const { return computed_; }

int CurveCache::loaded() const { return loaded_; }

std::shared_ptr<const BoundaryCurve> CurveCache::try_load(SpinLength J, CurveKind kind) const {
  if (!dir_) return nullptr;
  const auto path = file_for(J, kind);
  std::ifstream in(path, std::ios::binary);
  if (!in) return nullptr;
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    auto c = curve_from_json(buf.str());
    if (c.J != J || c.kind != kind || c.grid_hash != key_hash(J)) return nullptr;
    ++loaded_;
    return std::make_shared<const BoundaryCurve>(std::move(c));
  } catch (const Error&) {
    return nullptr;
  }
}

void CurveCache::store(const BoundaryCurve& curve) const {
  if (!dir_) return;
  static std::atomic<int> counter{0};
  const auto path = file_for(curve.J, curve.kind);
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << curve_to_json(curve);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot rename into " + path.string());
  }
}

std::shared_ptr<const BoundaryCurve> CurveCache::load_or_compute_f(SpinLength J) {
  const Key key{J.two_j(), CurveKind::F};
  std::unique_lock lock(mutex_);
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  if (auto it = pending_.find(key); it != pending_.end()) {
    auto fut = it->second;
    lock.unlock();
    return fut.get();
  }
  std::promise<std::shared_ptr<const BoundaryCurve>> promise;
  pending_[key] = promise.get_future().share();
  lock.unlock();

  // the eigensolves run without the lock so other J proceed in parallel
  std::shared_ptr<const BoundaryCurve> f;
  try {
    f = try_load(J, CurveKind::F);
    if (!f) {
      BoundaryCurve c = J.is_integer() ? compute_F_curve(J, grid_)
                                       : compute_F_halfinteger_curve(J, grid_, search_);
      c.grid_hash = key_hash(J);
      ++computed_;
      store(c);
      f = std::make_shared<const BoundaryCurve>(std::move(c));
    }
  } catch (...) {
    lock.lock();
    pending_.erase(key);
    promise.set_exception(std::current_exception());
    throw;
  }
  lock.lock();
  memory_[key] = f;
  pending_.erase(key);
  promise.set_value(f);
  return f;
}

std::shared_ptr<const BoundaryCurve> CurveCache::get(SpinLength J, CurveKind kind,
                                                     bool allow_half_integer) {
  if (!J.is_integer() && !allow_half_integer) {
    throw Error(ErrorCode::NonIntegerSpin,
                "half-integer J = " + real17(J.value()) +
                    " needs the constrained two-parameter curves (not enabled)");
  }
  if (kind == CurveKind::F) return load_or_compute_f(J);
  const Key key{J.two_j(), CurveKind::G};
  {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    if (auto g = try_load(J, CurveKind::G)) return memory_[key] = g;
  }
  auto f = load_or_compute_f(J);
  std::lock_guard lock(mutex_);
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  auto g = std::make_shared<const BoundaryCurve>(g_from_f(*f));
  store(*g);
  return memory_[key] = g;
}

}  // namespace spindepth
