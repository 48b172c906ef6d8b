#include "spindepth/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spindepth/criteria.hpp"
#include "spindepth/curve_cache.hpp"
#include "spindepth/errors.hpp"
#include "spindepth/fluctuating.hpp"
#include "spindepth/format.hpp"
#include "spindepth/states.hpp"

namespace spindepth {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Invalid configuration; exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Format { json, csv };

struct Options {
  std::string subcommand;
  std::string input;
  std::string output;
  std::string format = "json";
  std::vector<int> two_j;
  int N = 0;
  std::string k_list;
  std::string k_range;
  std::vector<std::string> criteria;
  std::string cache_dir;
  double lambda_max = 0.0;
  double resolution = 0.0;
  std::uint64_t seed = 1;
  std::string noise = "none";
  bool half_integer = false;
  std::string kind = "G";
  std::vector<std::string> series;
  std::string scan = "auto";
  std::string state = "squeezed";
  double mu_min = 1e-2;
  double mu_max = 1e4;
  int points = 32;
  bool skip_mu_zero = false;
  int samples = 100;
};

bool is_numerical(const Error& e) {
  return e.code() == ErrorCode::ConvergenceFailure || e.code() == ErrorCode::ConstraintInfeasible;
}

// ---- tabular output, JSON lines or CSV with a header

struct Cell {
  enum class Kind { null, number, boolean, text } kind = Kind::null;
  double number = 0.0;
  bool flag = false;
  std::string text;
};

Cell num(double v) { return {Cell::Kind::number, v, false, {}}; }
Cell num(std::optional<int> v) { return v ? num(static_cast<double>(*v)) : Cell{}; }
Cell flag(bool b) { return {Cell::Kind::boolean, 0.0, b, {}}; }
Cell text(std::string s) { return {Cell::Kind::text, 0.0, false, std::move(s)}; }

std::string csv_field(const Cell& c) {
  switch (c.kind) {
    case Cell::Kind::null: return "";
    case Cell::Kind::boolean: return c.flag ? "true" : "false";
    case Cell::Kind::number:
      if (std::isnan(c.number)) return "nan";
      if (std::isinf(c.number)) return c.number > 0 ? "inf" : "-inf";
      return real17(c.number);
    case Cell::Kind::text: break;
  }
  if (c.text.find_first_of(",\"\r\n") == std::string::npos) return c.text;
  std::string q = "\"";
  for (char ch : c.text) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

class Table {
 public:
  Table(std::ostream& os, Format format, std::vector<std::string> columns)
      : os_(os), format_(format), columns_(std::move(columns)) {
    if (format_ == Format::csv) {
      for (std::size_t i = 0; i < columns_.size(); ++i) os_ << (i ? "," : "") << columns_[i];
      os_ << '\n';
    }
  }

  void row(const std::vector<Cell>& cells) {
    if (format_ == Format::csv) {
      for (std::size_t i = 0; i < columns_.size(); ++i) os_ << (i ? "," : "") << csv_field(cells[i]);
      os_ << '\n';
      return;
    }
    JsonObject o;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const auto& c = cells[i];
      switch (c.kind) {
        case Cell::Kind::null: o.add_null(columns_[i]); break;
        case Cell::Kind::number: o.add(columns_[i], c.number); break;
        case Cell::Kind::boolean: o.add(columns_[i], c.flag); break;
        case Cell::Kind::text: o.add(columns_[i], std::string_view(c.text)); break;
      }
    }
    os_ << o.str() << '\n';
  }

 private:
  std::ostream& os_;
  Format format_;
  std::vector<std::string> columns_;
};

// ---- parallel map with results kept in input order

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// ---- parsing helpers

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

double parse_real(const std::string& s, std::string_view what) {
  const char* b = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(b, &end);
  if (s.empty() || end == b || *end != '\0') {
    throw Error(ErrorCode::Parse, std::string(what) + ": not a number: '" + s + "'");
  }
  return v;
}

int to_int(double v, std::string_view what) {
  if (!(std::abs(v) < 2e9) || v != std::floor(v)) {
    throw Error(ErrorCode::Parse, std::string(what) + " must be an integer, got " + real17(v));
  }
  return static_cast<int>(v);
}

int parse_int(const std::string& s, std::string_view what) {
  try {
    return to_int(parse_real(s, what), what);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

struct CsvRow {
  int line = 0;
  std::map<std::string, std::string> fields;
  std::string error;
};

// Blank lines and lines starting with '#' are skipped.
std::vector<CsvRow> parse_csv(const std::string& body) {
  std::istringstream in(body);
  std::string line;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cells = split_csv_line(t);
    if (header.empty()) {
      header = std::move(cells);
      continue;
    }
    CsvRow r;
    r.line = n;
    if (cells.size() != header.size()) {
      r.error = "line " + std::to_string(n) + ": expected " + std::to_string(header.size()) +
                " fields, got " + std::to_string(cells.size());
    } else {
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (!cells[i].empty()) r.fields[header[i]] = cells[i];
      }
    }
    rows.push_back(std::move(r));
  }
  if (header.empty()) throw UsageError("input has no CSV header");
  return rows;
}

std::string read_text(const std::string& path) {
  std::stringstream buf;
  if (path == "-") {
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read input file '" + path + "'");
  buf << in.rdbuf();
  return buf.str();
}

void require_input(const std::string& path) {
  if (path.empty()) throw UsageError("an input file is required");
  if (path != "-" && !fs::is_regular_file(path)) {
    throw UsageError("input file '" + path + "' does not exist");
  }
}

bool looks_like_csv(const std::string& path, const std::string& body) {
  const auto ext = fs::path(path).extension().string();
  if (ext == ".csv") return true;
  if (ext == ".json" || ext == ".jsonl") return false;
  const auto p = body.find_first_not_of(" \t\r\n");
  return p == std::string::npos || (body[p] != '{' && body[p] != '[');
}

// ---- measurement records

using FieldLookup = std::function<std::optional<double>(std::string_view)>;

MeasurementRecord build_record(const FieldLookup& get, std::optional<int> default_two_j) {
  auto need = [&](std::string_view name) {
    const auto v = get(name);
    if (!v) throw Error(ErrorCode::MissingFields, "missing field " + std::string(name));
    return *v;
  };
  MeasurementRecord r;
  r.N = to_int(need("N"), "N");
  if (const auto tj = get("two_j")) {
    r.j = SpinLength(to_int(*tj, "two_j"));
  } else if (const auto j = get("j")) {
    r.j = SpinLength::from_value(*j);
  } else if (default_two_j) {
    r.j = SpinLength(*default_two_j);
  } else {
    throw Error(ErrorCode::MissingFields, "missing field two_j (or pass --two-j)");
  }
  r.var_Jx = need("var_Jx");
  r.mean_Jx = get("mean_Jx");
  r.mean_Jy = need("mean_Jy");
  r.mean_Jz = need("mean_Jz");
  r.second_moment_perp = need("second_moment_perp");
  r.var_Jy = get("var_Jy");
  r.var_Jz = get("var_Jz");
  r.validate();
  return r;
}

FieldLookup json_lookup(const json& o) {
  return [&o](std::string_view name) -> std::optional<double> {
    const auto it = o.find(std::string(name));
    if (it == o.end() || it->is_null()) return std::nullopt;
    if (it->is_number()) return it->get<double>();
    if (it->is_string()) return parse_real(it->get<std::string>(), name);
    throw Error(ErrorCode::Parse, "field " + std::string(name) + " must be a number");
  };
}

FieldLookup csv_lookup(const CsvRow& row) {
  return [&row](std::string_view name) -> std::optional<double> {
    const auto it = row.fields.find(std::string(name));
    if (it == row.fields.end()) return std::nullopt;
    return parse_real(it->second, name);
  };
}

struct InputRecord {
  std::optional<MeasurementRecord> record;
  std::string error;
};

InputRecord record_or_error(const std::function<MeasurementRecord()>& make) {
  try {
    return {make(), {}};
  } catch (const Error& e) {
    return {std::nullopt, e.what()};
  } catch (const json::exception& e) {
    return {std::nullopt, std::string("Parse: ") + e.what()};
  }
}

std::vector<InputRecord> read_records(const std::string& path, std::optional<int> default_two_j) {
  const auto body = read_text(path);
  std::vector<InputRecord> out;
  if (looks_like_csv(path, body)) {
    for (const auto& row : parse_csv(body)) {
      if (!row.error.empty()) {
        out.push_back({std::nullopt, "Parse: " + row.error});
        continue;
      }
      out.push_back(record_or_error([&] { return build_record(csv_lookup(row), default_two_j); }));
    }
    return out;
  }
  auto from_json = [&](const json& o) {
    return record_or_error([&] {
      if (!o.is_object()) throw Error(ErrorCode::Parse, "record must be a JSON object");
      return build_record(json_lookup(o), default_two_j);
    });
  };
  json doc = json::parse(body, nullptr, false);
  if (!doc.is_discarded()) {
    if (doc.is_object() && doc.contains("records")) doc = doc["records"];
    if (doc.is_array()) {
      for (const auto& o : doc) out.push_back(from_json(o));
    } else {
      out.push_back(from_json(doc));
    }
    return out;
  }
  // JSON lines
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const json o = json::parse(line, nullptr, false);
    if (o.is_discarded()) {
      out.push_back({std::nullopt, "Parse: malformed JSON line"});
    } else {
      out.push_back(from_json(o));
    }
  }
  return out;
}

// ---- shared configuration

Format parse_format(const Options& o) { return o.format == "csv" ? Format::csv : Format::json; }

std::unique_ptr<CurveCache> make_cache(const Options& o) {
  std::optional<fs::path> dir;
  if (const char* env = std::getenv("SPINDEPTH_CACHE"); env && *env) {
    dir = fs::path(env);
  } else if (!o.cache_dir.empty()) {
    dir = fs::path(o.cache_dir);
  }
  if (dir) {
    std::error_code ec;
    fs::create_directories(*dir, ec);
    if (!fs::is_directory(*dir)) throw UsageError("cache directory '" + dir->string() + "' is not usable");
  }
  LambdaGrid grid;
  if (o.lambda_max != 0.0) {
    if (!(o.lambda_max > grid.lambda_min) || !std::isfinite(o.lambda_max)) {
      throw UsageError("--lambda-max must be finite and exceed " + real17(grid.lambda_min));
    }
    grid.lambda_max = o.lambda_max;
  }
  if (o.resolution != 0.0) {
    if (!(o.resolution > 0.0 && o.resolution <= 0.5)) throw UsageError("--resolution must lie in (0, 0.5]");
    grid.resolution = o.resolution;
  }
  return std::make_unique<CurveCache>(dir, grid);
}

struct KSelection {
  std::optional<std::vector<int>> list;
  std::optional<std::pair<int, int>> range;
};

KSelection parse_k(const Options& o) {
  if (!o.k_list.empty() && !o.k_range.empty()) throw UsageError("--k and --k-range are exclusive");
  KSelection s;
  if (!o.k_list.empty()) {
    s.list.emplace();
    for (const auto& t : split(o.k_list, ',')) {
      const int k = parse_int(t, "--k");
      if (k < 1) throw UsageError("--k values must be at least 1");
      s.list->push_back(k);
    }
  }
  if (!o.k_range.empty()) {
    const auto parts = split(o.k_range, ':');
    if (parts.size() != 2) throw UsageError("--k-range takes lo:hi");
    const int lo = parse_int(parts[0], "--k-range"), hi = parse_int(parts[1], "--k-range");
    if (lo < 1 || hi < lo) throw UsageError("--k-range needs 1 <= lo <= hi");
    s.range = {lo, hi};
  }
  return s;
}

// Requested k values for a fixed N, validated against [1, N-1].
std::vector<int> fixed_k(const KSelection& ks, int N, const char* required_msg) {
  std::vector<int> out;
  if (ks.list) out = *ks.list;
  if (ks.range) {
    for (int k = ks.range->first; k <= ks.range->second; ++k) out.push_back(k);
  }
  if (out.empty()) throw UsageError(required_msg);
  for (int k : out) {
    if (k > N - 1) throw UsageError("k = " + std::to_string(k) + " outside [1, N-1]");
  }
  return out;
}

std::vector<CriterionId> parse_criteria(const std::vector<std::string>& names,
                                        std::vector<CriterionId> fallback, bool& given) {
  given = !names.empty();
  if (!given) return fallback;
  std::vector<CriterionId> out;
  for (const auto& n : names) {
    if (n == "all") return all_criteria();
    try {
      out.push_back(criterion_from_string(n));
    } catch (const Error&) {
      throw UsageError("unknown criterion '" + n + "'");
    }
  }
  return out;
}

std::optional<int> single_two_j(const Options& o) {
  if (o.two_j.empty()) return std::nullopt;
  if (o.two_j.size() > 1) throw UsageError("--two-j takes a single value here");
  if (o.two_j[0] < 1) throw UsageError("--two-j must be at least 1");
  return o.two_j[0];
}

struct NoiseSpec {
  enum class Kind { none, white, decohere } kind = Kind::none;
  double p = 0.0;
  int m = 0;
};

NoiseSpec parse_noise(const std::string& s, int N) {
  NoiseSpec n;
  if (s.empty() || s == "none") return n;
  if (s.rfind("decohere:", 0) == 0) {
    n.kind = NoiseSpec::Kind::decohere;
    n.m = parse_int(s.substr(9), "--noise decohere:m");
    if (n.m < 0 || n.m > N) throw UsageError("--noise decohere:m needs 0 <= m <= N");
    return n;
  }
  n.kind = NoiseSpec::Kind::white;
  try {
    n.p = parse_real(s, "--noise");
  } catch (const Error&) {
    throw UsageError("--noise takes p, decohere:m or none");
  }
  if (!(n.p >= 0.0 && n.p <= 1.0)) throw UsageError("--noise p must lie in [0, 1]");
  return n;
}

SymmetricStateMoments apply_noise(const SymmetricStateMoments& s, const NoiseSpec& n) {
  switch (n.kind) {
    case NoiseSpec::Kind::white: return white_noise(s, n.p);
    case NoiseSpec::Kind::decohere: return decohere_particles(s, n.m);
    case NoiseSpec::Kind::none: break;
  }
  return s;
}

// ---- result rows shared by evaluate and fluctuating

const std::vector<std::string> kResultColumns = {"record", "criterion", "k",    "applicable", "violated",
                                                 "lhs",    "rhs",       "margin", "note",     "error"};

std::vector<Cell> result_row(std::optional<int> record, const CriterionResult& r) {
  return {num(record), text(std::string(to_string(r.id))), num(static_cast<double>(r.k)),
          flag(r.applicable), flag(r.violated), num(r.lhs), num(r.rhs), num(r.margin), text(r.note), {}};
}

std::vector<Cell> error_row(std::optional<int> record, std::optional<CriterionId> id,
                            std::optional<int> k, const std::string& message) {
  return {num(record), id ? text(std::string(to_string(*id))) : Cell{}, num(k), flag(false), flag(false),
          {}, {}, {}, {}, text(message)};
}

int finish(bool numerical_failure, bool any_applicable) {
  if (numerical_failure) return kExitNumerical;
  return any_applicable ? kExitOk : kExitInapplicable;
}

// ---- subcommands

int cmd_curve(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.two_j.empty()) throw UsageError("curve needs --two-j with one or more 2J values");
  std::vector<SpinLength> Js;
  for (int t : o.two_j) {
    if (t < 1) throw UsageError("--two-j values must be at least 1");
    if (t % 2 != 0 && !o.half_integer) {
      throw UsageError("2J = " + std::to_string(t) + " is half-integer; pass --half-integer");
    }
    Js.emplace_back(t);
  }
  std::vector<CurveKind> kinds;
  if (o.kind == "F" || o.kind == "both") kinds.push_back(CurveKind::F);
  if (o.kind == "G" || o.kind == "both") kinds.push_back(CurveKind::G);
  auto cache = make_cache(o);

  std::vector<std::vector<std::shared_ptr<const BoundaryCurve>>> curves(Js.size());
  std::vector<std::optional<Error>> failures(Js.size());
  parallel_for(Js.size(), [&](std::size_t i) {
    try {
      for (auto kind : kinds) curves[i].push_back(cache->get(Js[i], kind, o.half_integer));
    } catch (const Error& e) {
      failures[i] = e;
    }
  });
  for (const auto& f : failures) {
    if (f) {
      err << "error: " << f->what() << '\n';
      return is_numerical(*f) ? kExitNumerical : kExitUsage;
    }
  }
  Table t(out, parse_format(o), {"two_J", "kind", "provenance", "lambda", "X", "value", "derivative"});
  for (std::size_t i = 0; i < Js.size(); ++i) {
    for (const auto& c : curves[i]) {
      for (const auto& s : c->samples) {
        t.row({num(static_cast<double>(c->J.two_j())), text(std::string(to_string(c->kind))),
               text(std::string(to_string(c->provenance))), num(s.lambda), num(s.x), num(s.value),
               num(s.derivative)});
      }
    }
  }
  err << "curves computed: " << cache->computed() << ", loaded from cache: " << cache->loaded() << '\n';
  return kExitOk;
}

int cmd_boundary(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.N < 2) throw UsageError("boundary needs --N >= 2");
  const SpinLength j(single_two_j(o).value_or(1));
  const auto ks = fixed_k(parse_k(o), o.N, "boundary needs --k or --k-range");
  std::vector<std::string> series = o.series;
  if (series.empty()) {
    series = {"nonlinear", "tangent"};
    if (j.two_j() == 1) series.push_back("duan");
  }
  for (const auto& s : series) {
    if (s != "nonlinear" && s != "tangent" && s != "duan") throw UsageError("unknown series '" + s + "'");
    if (s == "duan" && j.two_j() != 1) throw UsageError("the duan series is for qubits (--two-j 1)");
  }
  for (int k : ks) {
    if (!SpinLength(k * j.two_j()).is_integer() && !o.half_integer) {
      throw UsageError("k = " + std::to_string(k) + " gives half-integer kj; pass --half-integer");
    }
  }
  auto cache = make_cache(o);
  std::vector<std::shared_ptr<const BoundaryCurve>> curves(ks.size());
  std::vector<std::optional<Error>> failures(ks.size());
  parallel_for(ks.size(), [&](std::size_t i) {
    try {
      curves[i] = cache->get(SpinLength(ks[i] * j.two_j()), CurveKind::G, o.half_integer);
    } catch (const Error& e) {
      failures[i] = e;
    }
  });
  for (const auto& f : failures) {
    if (f) {
      err << "error: " << f->what() << '\n';
      return is_numerical(*f) ? kExitNumerical : kExitUsage;
    }
  }

  Table t(out, parse_format(o), {"series", "k", "X", "second_moment_perp", "var_Jx"});
  const double N = o.N, jj = j.value(), nj = N * jj;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const int k = ks[i];
    const double kj = k * jj;
    const auto b = producibility_boundary(o.N, j, k, *curves[i]);
    for (const auto& s : series) {
      for (std::size_t p = 0; p < b.points.size(); ++p) {
        const double X = curves[i]->samples[p].x;
        const double smp = b.points[p].second_moment_perp;
        double var = b.points[p].var_jx;
        if (s == "tangent") var = nj * X / (2.0 * (kj + 1.0));
        if (s == "duan") var = (smp - N * (k + 2) / 4.0) / (N * (k + 2));
        t.row({text(s), num(static_cast<double>(k)), num(X), num(smp), num(var)});
      }
    }
  }
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream&) {
  require_input(o.input);
  const auto ks = parse_k(o);
  bool explicit_criteria = false;
  const auto ids = parse_criteria(o.criteria, all_criteria(), explicit_criteria);
  auto cache = make_cache(o);
  const auto items = read_records(o.input, single_two_j(o));
  DepthOptions dopt;
  dopt.half_integer_curves = o.half_integer;
  if (ks.range) {
    dopt.k_min = ks.range->first;
    dopt.k_max = ks.range->second;
  }

  std::vector<std::vector<std::vector<Cell>>> rows(items.size());
  std::atomic<bool> any_applicable{false}, numerical{false};
  parallel_for(items.size(), [&](std::size_t i) {
    const int idx = static_cast<int>(i);
    auto& mine = rows[i];
    if (!items[i].record) {
      mine.push_back(error_row(idx, {}, {}, items[i].error));
      return;
    }
    const auto& rec = *items[i].record;
    for (auto id : ids) {
      std::vector<int> k_values;
      try {
        k_values = ks.list ? *ks.list : admissible_k(rec, id, dopt);
      } catch (const Error& e) {
        if (explicit_criteria) mine.push_back(error_row(idx, id, {}, e.what()));
        continue;
      }
      for (int k : k_values) {
        try {
          const auto r = evaluate_criterion(rec, id, k, *cache, dopt);
          if (r.applicable) any_applicable = true;
          mine.push_back(result_row(idx, r));
        } catch (const Error& e) {
          if (is_numerical(e)) numerical = true;
          mine.push_back(error_row(idx, id, k, e.what()));
        }
      }
    }
  });
  Table t(out, parse_format(o), kResultColumns);
  for (const auto& rs : rows) {
    for (const auto& r : rs) t.row(r);
  }
  return finish(numerical, any_applicable);
}

int cmd_depth(const Options& o, std::ostream& out, std::ostream&) {
  require_input(o.input);
  const auto ks = parse_k(o);
  if (ks.list) throw UsageError("depth scans a range; use --k-range");
  bool explicit_criteria = false;
  const auto ids = parse_criteria(o.criteria, all_criteria(), explicit_criteria);
  DepthOptions dopt;
  dopt.half_integer_curves = o.half_integer;
  if (ks.range) {
    dopt.k_min = ks.range->first;
    dopt.k_max = ks.range->second;
  }
  if (o.scan == "linear") dopt.scan = DepthOptions::Scan::linear;
  if (o.scan == "bisection") dopt.scan = DepthOptions::Scan::bisection;
  auto cache = make_cache(o);
  const auto items = read_records(o.input, single_two_j(o));

  std::vector<std::vector<std::vector<Cell>>> rows(items.size());
  std::atomic<bool> any_applicable{false}, numerical{false};
  parallel_for(items.size(), [&](std::size_t i) {
    const Cell idx = num(static_cast<double>(i));
    auto& mine = rows[i];
    if (!items[i].record) {
      mine.push_back({idx, {}, {}, {}, {}, {}, text(items[i].error)});
      return;
    }
    for (auto id : ids) {
      const Cell name = text(std::string(to_string(id)));
      try {
        const auto v = detect_depth(*items[i].record, id, *cache, dopt);
        const bool applicable = std::any_of(v.per_k.begin(), v.per_k.end(),
                                            [](const CriterionResult& r) { return r.applicable; });
        if (applicable) any_applicable = true;
        mine.push_back({idx, name, num(v.max_k_violated), num(static_cast<double>(v.certified_depth)),
                        flag(v.monotone), num(static_cast<double>(v.per_k.size())), {}});
      } catch (const Error& e) {
        if (is_numerical(e)) numerical = true;
        const bool skip = !explicit_criteria && e.code() == ErrorCode::NotQubit;
        if (!skip) mine.push_back({idx, name, {}, {}, {}, {}, text(e.what())});
      }
    }
  });
  Table t(out, parse_format(o),
          {"record", "criterion", "max_k_violated", "certified_depth", "monotone", "evaluated_k", "error"});
  for (const auto& rs : rows) {
    for (const auto& r : rs) t.row(r);
  }
  return finish(numerical, any_applicable);
}

int simulate_squeezed(const Options& o, const std::vector<CriterionId>& ids, std::ostream& out) {
  if (o.N < 2 || o.N % 2 != 0) throw UsageError("simulate needs an even --N >= 2");
  if (single_two_j(o).value_or(1) != 1) throw UsageError("squeezed states are simulated for qubits only");
  if (o.points < 1) throw UsageError("--points must be at least 1");
  if (!(o.mu_min > 0.0) || !(o.mu_max >= o.mu_min)) throw UsageError("need 0 < --mu-min <= --mu-max");
  const auto noise = parse_noise(o.noise, o.N);
  std::vector<double> mus;
  if (!o.skip_mu_zero) mus.push_back(0.0);
  for (int i = 0; i < o.points; ++i) {
    const double f = o.points == 1 ? 0.0 : static_cast<double>(i) / (o.points - 1);
    mus.push_back(o.mu_min * std::pow(o.mu_max / o.mu_min, f));
  }
  DepthOptions dopt;
  dopt.half_integer_curves = o.half_integer;
  auto cache = make_cache(o);

  std::vector<std::vector<Cell>> rows(mus.size());
  std::atomic<bool> numerical{false};
  parallel_for(mus.size(), [&](std::size_t i) {
    auto& row = rows[i];
    row.push_back(num(mus[i]));
    try {
      const auto rec = apply_noise(squeezed_state_moments(o.N, mus[i]), noise).record();
      // undefined (nan) or infinite when the polarization is at rounding level
      const double pol = rec.polarization(), tiny = 1e-12 * rec.Nj();
      const double xi = pol > tiny ? rec.N * rec.var_Jx / (pol * pol)
                        : rec.var_Jx > tiny ? std::numeric_limits<double>::infinity()
                                            : std::numeric_limits<double>::quiet_NaN();
      row.insert(row.end(), {num(rec.mean_Jz), num(rec.var_Jx), num(rec.second_moment_perp), num(xi)});
      for (auto id : ids) {
        const auto v = detect_depth(rec, id, *cache, dopt);
        row.push_back(num(static_cast<double>(v.certified_depth)));
        row.push_back(flag(v.monotone));
      }
      row.push_back({});
    } catch (const Error& e) {
      if (is_numerical(e)) numerical = true;
      row.resize(1);
      row.resize(5 + 2 * ids.size());
      row.push_back(text(e.what()));
    }
  });
  std::vector<std::string> cols = {"mu", "mean_Jz", "var_Jx", "second_moment_perp", "squeezing_parameter"};
  for (auto id : ids) {
    cols.push_back("depth_" + std::string(to_string(id)));
    cols.push_back("monotone_" + std::string(to_string(id)));
  }
  cols.push_back("error");
  Table t(out, parse_format(o), cols);
  for (const auto& r : rows) t.row(r);
  return numerical ? kExitNumerical : kExitOk;
}

// Random pure k-producible records; a sound criterion never flags them at level k.
int simulate_producible(const Options& o, const std::vector<CriterionId>& ids, std::ostream& out) {
  if (o.N < 2) throw UsageError("simulate needs --N >= 2");
  const SpinLength j(single_two_j(o).value_or(1));
  const auto ks = fixed_k(parse_k(o), o.N, "producible simulation needs --k (largest group)");
  if (ks.size() != 1) throw UsageError("producible simulation takes a single --k");
  if (o.samples < 1) throw UsageError("--samples must be at least 1");
  const int kmax = ks[0];
  std::mt19937_64 rng(o.seed);
  std::vector<std::vector<int>> partitions(o.samples);
  std::vector<std::uint64_t> seeds(o.samples);
  for (int s = 0; s < o.samples; ++s) {
    for (int left = o.N; left > 0;) {
      const int g = std::min(left, std::uniform_int_distribution<int>(1, kmax)(rng));
      partitions[s].push_back(g);
      left -= g;
    }
    seeds[s] = rng();
  }
  DepthOptions dopt;
  dopt.half_integer_curves = o.half_integer;
  auto cache = make_cache(o);

  std::vector<std::vector<Cell>> rows(o.samples);
  std::atomic<bool> numerical{false};
  parallel_for(rows.size(), [&](std::size_t s) {
    auto& row = rows[s];
    std::string part;
    for (int g : partitions[s]) part += (part.empty() ? "" : "+") + std::to_string(g);
    const int largest = *std::max_element(partitions[s].begin(), partitions[s].end());
    row = {num(static_cast<double>(s)), text(part), num(static_cast<double>(largest))};
    std::string error;
    try {
      const auto rec = random_producible_moments(j, partitions[s], seeds[s], GroupState::mixed);
      for (auto id : ids) {
        std::optional<int> level;
        try {
          for (int k : admissible_k(rec, id, dopt)) {
            if (k >= largest) {
              level = k;
              break;
            }
          }
        } catch (const Error& e) {
          error = e.what();
        }
        if (!level) {
          row.insert(row.end(), {Cell{}, Cell{}});
          continue;
        }
        row.push_back(num(level));
        row.push_back(flag(evaluate_criterion(rec, id, *level, *cache, dopt).violated));
      }
    } catch (const Error& e) {
      if (is_numerical(e)) numerical = true;
      row.resize(3 + 2 * ids.size());
      error = e.what();
    }
    row.push_back(error.empty() ? Cell{} : text(error));
  });
  std::vector<std::string> cols = {"sample", "partition", "largest_group"};
  for (auto id : ids) {
    cols.push_back("level_" + std::string(to_string(id)));
    cols.push_back("violated_" + std::string(to_string(id)));
  }
  cols.push_back("error");
  Table t(out, parse_format(o), cols);
  for (const auto& r : rows) t.row(r);
  return numerical ? kExitNumerical : kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream&) {
  bool given = false;
  if (o.state == "producible") {
    std::vector<CriterionId> fallback;
    for (auto id : all_criteria()) {
      const bool qubit_only = id == CriterionId::duan || id == CriterionId::qubit_tangent;
      if (!qubit_only || single_two_j(o).value_or(1) == 1) fallback.push_back(id);
    }
    return simulate_producible(o, parse_criteria(o.criteria, fallback, given), out);
  }
  return simulate_squeezed(
      o, parse_criteria(o.criteria, {CriterionId::nonlinear, CriterionId::sorensen_molmer}, given), out);
}

ShotEnsemble read_ensemble(const Options& o) {
  const auto body = read_text(o.input);
  const auto default_j = single_two_j(o).value_or(1);
  ShotEnsemble ens;
  if (looks_like_csv(o.input, body)) {
    ens.j = SpinLength(default_j);
    std::vector<Shot> shots;
    for (const auto& row : parse_csv(body)) {
      if (!row.error.empty()) throw UsageError(row.error);
      try {
        const auto get = csv_lookup(row);
        Shot s;
        for (const char* f : {"N", "Jx", "Jy", "Jz"}) {
          if (!get(f)) throw Error(ErrorCode::MissingFields, std::string("missing field ") + f);
        }
        s.N = to_int(*get("N"), "N");
        s.Jx = *get("Jx");
        s.Jy = *get("Jy");
        s.Jz = *get("Jz");
        shots.push_back(s);
      } catch (const Error& e) {
        throw UsageError("line " + std::to_string(row.line) + ": " + e.what());
      }
    }
    return aggregate_shots(ens.j, shots);
  }
  const json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("bins") || !doc["bins"].is_array()) {
    throw UsageError("binned input must be a JSON object with a \"bins\" array");
  }
  try {
    const auto top = json_lookup(doc);
    if (const auto tj = top("two_j")) {
      ens.j = SpinLength(to_int(*tj, "two_j"));
    } else if (const auto jv = top("j")) {
      ens.j = SpinLength::from_value(*jv);
    } else {
      ens.j = SpinLength(default_j);
    }
    for (const auto& b : doc["bins"]) {
      if (!b.is_object()) throw Error(ErrorCode::Parse, "each bin must be a JSON object");
      const auto get = json_lookup(b);
      auto need = [&](const char* f) {
        const auto v = get(f);
        if (!v) throw Error(ErrorCode::MissingFields, std::string("bin is missing ") + f);
        return *v;
      };
      ShotBin bin;
      bin.N = to_int(need("N"), "N");
      bin.Q = need("Q");
      bin.var_Jx = need("var_Jx");
      bin.mean_Jx = get("mean_Jx");
      bin.mean_Jy = need("mean_Jy");
      bin.mean_Jz = need("mean_Jz");
      bin.second_moment_perp = need("second_moment_perp");
      ens.bins.push_back(bin);
    }
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return ens;
}

int cmd_fluctuating(const Options& o, std::ostream& out, std::ostream& err) {
  require_input(o.input);
  const auto ks = parse_k(o);
  bool explicit_criteria = false;
  const auto ids = parse_criteria(
      o.criteria,
      {CriterionId::nonlinear, CriterionId::sorensen_molmer, CriterionId::xi2, CriterionId::xi2_sm},
      explicit_criteria);
  for (auto id : ids) {
    if (id == CriterionId::duan || id == CriterionId::qubit_tangent) {
      throw UsageError(std::string(to_string(id)) + " has no fluctuating-N form");
    }
  }
  auto ens = read_ensemble(o);
  try {
    ens.normalize();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  int min_n = 0;
  for (const auto& b : ens.bins) {
    if (b.Q > 0.0 && (min_n == 0 || b.N < min_n)) min_n = b.N;
  }
  DepthOptions dopt;
  dopt.half_integer_curves = o.half_integer;
  auto cache = make_cache(o);

  std::vector<std::pair<CriterionId, int>> jobs;
  for (auto id : ids) {
    std::vector<int> kv;
    if (ks.list) {
      kv = *ks.list;
    } else {
      const int lo = ks.range ? ks.range->first : 1;
      const int hi = ks.range ? std::min(ks.range->second, min_n - 1) : min_n - 1;
      for (int k = lo; k <= hi; ++k) {
        const bool integer = SpinLength(k * ens.j.two_j()).is_integer();
        if (integer || (uses_curve(id) && o.half_integer)) kv.push_back(k);
      }
    }
    for (int k : kv) jobs.emplace_back(id, k);
  }

  std::vector<std::vector<Cell>> rows(jobs.size());
  std::atomic<bool> any_applicable{false}, numerical{false};
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto [id, k] = jobs[i];
    Cell mean_w;
    try {
      mean_w = num(w_expectation(ens, k).mean_W);
    } catch (const Error&) {
    }
    try {
      const auto r = evaluate_fluctuating(ens, id, k, *cache, dopt);
      if (r.applicable) any_applicable = true;
      rows[i] = {text(std::string(to_string(id))), num(static_cast<double>(k)), flag(r.applicable),
                 flag(r.violated), num(r.lhs), num(r.rhs), num(r.margin), mean_w, text(r.note), {}};
    } catch (const Error& e) {
      if (is_numerical(e)) numerical = true;
      rows[i] = {text(std::string(to_string(id))), num(static_cast<double>(k)), flag(false), flag(false),
                 {}, {}, {}, mean_w, {}, text(e.what())};
    }
  });
  const auto pooled = pooled_moments(ens);
  err << "bins: " << ens.bins.size() << ", mean N: " << real17(pooled.mean_N)
      << ", pooled var_Jx: " << real17(pooled.var_Jx)
      << (pooled.total_variance ? " (total variance)" : " (within-bin variance only)") << '\n';
  Table t(out, parse_format(o),
          {"criterion", "k", "applicable", "violated", "lhs", "rhs", "margin", "mean_W", "note", "error"});
  for (const auto& r : rows) t.row(r);
  return finish(numerical, any_applicable);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Entanglement depth from collective spin moments", "spindepth"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* s) {
    s->add_option("--curve-cache", o.cache_dir, "Directory of cached curves (SPINDEPTH_CACHE overrides)");
    s->add_option("--lambda-max", o.lambda_max, "Largest lambda of the curve sweep (default 100 J)");
    s->add_option("--resolution", o.resolution, "Target X spacing of curve samples");
    s->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    s->add_option("-o,--output", o.output, "Output file (default stdout)");
    s->add_flag("--half-integer", o.half_integer,
                "Allow half-integer group spins through the two-parameter curves");
  };
  auto with_k = [&](CLI::App* s) {
    s->add_option("--k", o.k_list, "Comma-separated group sizes");
    s->add_option("--k-range", o.k_range, "Group sizes lo:hi");
  };
  auto with_criteria = [&](CLI::App* s) {
    s->add_option("--criterion", o.criteria, "Criteria (comma separated, or all)")->delimiter(',');
  };

  auto* curve = app.add_subcommand("curve", "Compute and cache F_J / G_J curves, emit samples");
  common(curve);
  curve->add_option("--two-j", o.two_j, "2J values (comma separated)")->delimiter(',')->required();
  curve->add_option("--kind", o.kind, "F, G or both")->check(CLI::IsMember({"F", "G", "both"}));

  auto* boundary = app.add_subcommand("boundary", "k-producibility boundaries in the (<Jy^2+Jz^2>, var Jx) plane");
  common(boundary);
  with_k(boundary);
  boundary->add_option("--N", o.N, "Number of particles")->required();
  boundary->add_option("--two-j", o.two_j, "2j of one particle (default 1)");
  boundary->add_option("--series", o.series, "nonlinear, tangent, duan")->delimiter(',');

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate criteria on measurement records");
  common(evaluate);
  with_k(evaluate);
  with_criteria(evaluate);
  evaluate->add_option("input", o.input, "Records file (JSON or CSV, - for stdin)")->required();
  evaluate->add_option("--two-j", o.two_j, "2j for records without a two_j field");

  auto* depth = app.add_subcommand("depth", "Largest certified entanglement depth per record");
  common(depth);
  with_k(depth);
  with_criteria(depth);
  depth->add_option("input", o.input, "Records file (JSON or CSV, - for stdin)")->required();
  depth->add_option("--two-j", o.two_j, "2j for records without a two_j field");
  depth->add_option("--scan", o.scan, "auto, linear or bisection")
      ->check(CLI::IsMember({"auto", "linear", "bisection"}));

  auto* simulate = app.add_subcommand("simulate", "Depth tables for simulated states");
  common(simulate);
  with_k(simulate);
  with_criteria(simulate);
  simulate->add_option("--N", o.N, "Number of particles")->required();
  simulate->add_option("--two-j", o.two_j, "2j of one particle (default 1)");
  simulate->add_option("--state", o.state, "squeezed (mu sweep) or producible (random k-producible)")
      ->check(CLI::IsMember({"squeezed", "producible"}));
  simulate->add_option("--noise", o.noise, "none, p (white noise) or decohere:m");
  simulate->add_option("--mu-min", o.mu_min, "Smallest positive mu");
  simulate->add_option("--mu-max", o.mu_max, "Largest mu");
  simulate->add_option("--points", o.points, "Log-spaced mu values");
  simulate->add_flag("--skip-mu-zero", o.skip_mu_zero, "Leave out mu = 0");
  simulate->add_option("--samples", o.samples, "Random producible records");
  simulate->add_option("--seed", o.seed, "Random seed");

  auto* fluct = app.add_subcommand("fluctuating", "Criteria for ensembles with fluctuating particle number");
  common(fluct);
  with_k(fluct);
  with_criteria(fluct);
  fluct->add_option("input", o.input, "Shot CSV (shot_id,N,Jx,Jy,Jz) or binned JSON")->required();
  fluct->add_option("--two-j", o.two_j, "2j of one particle (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::ofstream file;
  if (!o.output.empty()) {
    file.open(o.output, std::ios::binary | std::ios::trunc);
    if (!file) {
      err << "error: cannot write '" << o.output << "'\n";
      return kExitUsage;
    }
  }
  std::ostream& sink = o.output.empty() ? out : file;
  try {
    if (curve->parsed()) return cmd_curve(o, sink, err);
    if (boundary->parsed()) return cmd_boundary(o, sink, err);
    if (evaluate->parsed()) return cmd_evaluate(o, sink, err);
    if (depth->parsed()) return cmd_depth(o, sink, err);
    if (simulate->parsed()) return cmd_simulate(o, sink, err);
    return cmd_fluctuating(o, sink, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_numerical(e) ? kExitNumerical : kExitUsage;
  }
}

}  // namespace spindepth
