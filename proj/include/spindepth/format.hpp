#pragma once

#include <string>
#include <string_view>

namespace spindepth {

/// 17 significant digits, lossless for doubles. Non-finite values become
/// "null" so the output stays valid JSON.
std::string real17(double x);

/// Minimal ordered JSON object writer. Reals go through real17, strings are
/// escaped by nlohmann::json.
class JsonObject {
 public:
  JsonObject& add(std::string_view key, double v);
  JsonObject& add(std::string_view key, int v);
  JsonObject& add(std::string_view key, long long v);
  JsonObject& add(std::string_view key, bool v);
  JsonObject& add(std::string_view key, std::string_view v);
  JsonObject& add(std::string_view key, const char* v) { return add(key, std::string_view(v)); }
  JsonObject& add_null(std::string_view key);
  /// `raw` must already be valid JSON.
  JsonObject& add_raw(std::string_view key, std::string_view raw);
  std::string str() const { return "{" + body_ + "}"; }

 private:
  void key(std::string_view k);
  std::string body_;
};

std::string json_string(std::string_view s);

/// 64-bit FNV-1a, 16 hex digits.
std::string fnv1a_hex(std::string_view s);

}  // namespace spindepth
