#pragma once

#include <atomic>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>

#include "spindepth/boundary.hpp"

namespace spindepth {

inline constexpr int kCurveFileVersion = 1;

std::string curve_to_json(const BoundaryCurve& curve);
/// Parses a curve file body and rebuilds the envelope. Throws Parse.
BoundaryCurve curve_from_json(std::string_view text);

/// Shared store of F and G curves keyed by (2J, kind, grid hash), with an
/// optional directory of curve_<2J>_<kind>_<hash>.json files.
///
/// Disk writes go to a temporary file that is renamed into place, so readers
/// never see a partial file. Unreadable or mismatching files are ignored and
/// recomputed. Thread safe: curves for different J are computed concurrently,
/// and concurrent requests for the same curve share one computation.
class CurveCache {
 public:
  explicit CurveCache(std::optional<std::filesystem::path> dir = std::nullopt,
                      LambdaGrid grid = {}, TwoParameterSearch search = {});

  /// Integer J uses the lambda sweep. Half-integer J needs
  /// allow_half_integer, otherwise NonIntegerSpin.
  std::shared_ptr<const BoundaryCurve> get(SpinLength J, CurveKind kind,
                                           bool allow_half_integer = false);

  const LambdaGrid& grid() const { return grid_; }
  const std::optional<std::filesystem::path>& directory() const { return dir_; }
  std::string key_hash(SpinLength J) const;
  std::filesystem::path file_for(SpinLength J, CurveKind kind) const;

  int computed() const;  // F curves produced by eigensolves
  int loaded() const;    // curves read from disk

 private:
  std::shared_ptr<const BoundaryCurve> load_or_compute_f(SpinLength J);
  std::shared_ptr<const BoundaryCurve> try_load(SpinLength J, CurveKind kind) const;
  void store(const BoundaryCurve& curve) const;

  std::optional<std::filesystem::path> dir_;
  LambdaGrid grid_;
  TwoParameterSearch search_;
  using Key = std::tuple<int, CurveKind>;
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const BoundaryCurve>> memory_;
  std::map<Key, std::shared_future<std::shared_ptr<const BoundaryCurve>>> pending_;
  std::atomic<int> computed_{0};
  mutable std::atomic<int> loaded_{0};
};

}  // namespace spindepth
