#pragma once

// Experimental design: space-filling sampling of channel parameters, campaign
// files, the campaign runner (paired contenders, median of repeats, resumable CSV)
// and the ECDF / ratio summaries.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "quicfec/harness.hpp"
#include "quicfec/rng.hpp"

namespace quicfec::xdesign {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parameter spaces and WSP sampling

struct Dimension {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
};

struct ParamSpace {
  std::vector<Dimension> dims;

  std::size_t size() const { return dims.size(); }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (dims[i].name == name) return i;
    }
    throw UsageError("parameter space has no dimension '" + name + "'");
  }

  bool has(const std::string& name) const {
    return std::any_of(dims.begin(), dims.end(), [&](const Dimension& d) { return d.name == name; });
  }

  void validate() const {
    if (dims.empty()) throw UsageError("parameter space has no dimensions");
    std::set<std::string> seen;
    for (const auto& d : dims) {
      if (!seen.insert(d.name).second) throw UsageError("duplicate dimension '" + d.name + "'");
      if (!(d.lo <= d.hi)) throw UsageError("dimension '" + d.name + "' has min > max");
    }
  }
};

enum class SpaceKind { ge, uniform, simplified, heterogeneous };

inline SpaceKind space_from_string(const std::string& s) {
  if (s == "ge") return SpaceKind::ge;
  if (s == "uniform") return SpaceKind::uniform;
  if (s == "simplified") return SpaceKind::simplified;
  if (s == "heterogeneous") return SpaceKind::heterogeneous;
  throw UsageError("unknown space '" + s + "' (expected ge, uniform, simplified or heterogeneous)");
}

inline ParamSpace preset_space(SpaceKind kind) {
  const Dimension p{"p", 0.0, 0.01}, r{"r", 0.025, 0.5}, k{"k_good", 0.97, 1.0}, h{"h_bad", 0.0, 0.4},
      owd{"owd_ms", 0.0, 100.0};
  switch (kind) {
    case SpaceKind::ge: return {{p, r, k, h, owd}};
    case SpaceKind::uniform: return {{{"uniform_rate", 0.0, 0.03}, owd}};
    case SpaceKind::simplified: return {{p, r, owd}};
    case SpaceKind::heterogeneous:
      return {{{"p1", 0.0, 0.01}, {"r1", 0.025, 0.5}, {"p2", 0.0, 0.01}, {"r2", 0.025, 0.5}, owd}};
  }
  return {};
}

namespace detail {

inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, x = 0.0;
  while (i > 0) {
    x += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return x;
}

inline constexpr std::uint64_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

inline double dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace detail

inline constexpr std::size_t kWspPoolSize = std::size_t{1} << 13;

// Halton points in [0,1)^dim with a random Cranley-Patterson shift.
inline std::vector<std::vector<double>> candidate_pool(std::size_t dim, std::size_t count, std::uint64_t seed) {
  if (dim == 0 || dim > std::size(detail::kPrimes)) throw UsageError("WSP supports 1 to 16 dimensions");
  Rng rng(derive_seed({seed, 0x57535000}));
  std::vector<double> shift(dim);
  for (auto& s : shift) s = rng.uniform();
  std::vector<std::vector<double>> pool(count, std::vector<double>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double x = detail::radical_inverse(i + 1, detail::kPrimes[j]) + shift[j];
      pool[i][j] = x - std::floor(x);
    }
  }
  return pool;
}

// One WSP pass: start at `start`, drop every candidate within d of the current point,
// move to the nearest survivor, repeat. Returns pool indices in selection order.
inline std::vector<std::size_t> wsp_pass(const std::vector<std::vector<double>>& pool, double d, std::size_t start) {
  const double d2 = d * d;
  std::vector<char> alive(pool.size(), 1);
  std::vector<std::size_t> chosen;
  std::size_t current = start;
  for (;;) {
    chosen.push_back(current);
    alive[current] = 0;
    std::size_t next = pool.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!alive[i]) continue;
      const double dd = detail::dist2(pool[i], pool[current]);
      if (dd < d2) {
        alive[i] = 0;
      } else if (dd < best) {
        best = dd;
        next = i;
      }
    }
    if (next == pool.size()) break;
    current = next;
  }
  return chosen;
}

struct WspResult {
  std::vector<std::vector<double>> unit_points;  // in [0,1)^dim
  std::vector<std::vector<double>> points;       // scaled to the ranges
  double d = 0.0;
};

// Bisects the elimination radius for the largest d that keeps at least n points,
// then keeps the first n in selection order (so pairwise distances stay >= d).
inline WspResult wsp_sample(const ParamSpace& space, std::size_t n, std::uint64_t seed) {
  space.validate();
  if (n == 0) throw UsageError("wsp_sample: need at least one point");
  if (n > kWspPoolSize) throw UsageError("wsp_sample: more points than the candidate pool");
  const auto pool = candidate_pool(space.size(), kWspPoolSize, seed);
  const std::size_t start = Rng(derive_seed({seed, 0x57535001})).below(pool.size());

  double lo = 0.0, hi = std::sqrt(static_cast<double>(space.size()));
  std::vector<std::size_t> best = wsp_pass(pool, lo, start);
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto chosen = wsp_pass(pool, mid, start);
    if (chosen.size() >= n) {
      lo = mid;
      best = std::move(chosen);
      if (best.size() == n) break;
    } else {
      hi = mid;
    }
  }
  best.resize(n);

  WspResult out;
  out.d = lo;
  for (auto idx : best) {
    out.unit_points.push_back(pool[idx]);
    std::vector<double> scaled(space.size());
    for (std::size_t j = 0; j < space.size(); ++j) {
      scaled[j] = space.dims[j].lo + pool[idx][j] * (space.dims[j].hi - space.dims[j].lo);
    }
    out.points.push_back(std::move(scaled));
  }
  return out;
}

inline ParamSpace parse_space(const YAML::Node& root) {
  ParamSpace space;
  if (root["preset"]) space = preset_space(space_from_string(root["preset"].as<std::string>()));
  if (const auto dims = root["dimensions"]) {
    if (!dims.IsSequence()) throw UsageError("'dimensions' must be a list of {name, min, max}");
    for (const auto& d : dims) {
      Dimension dim{d["name"].as<std::string>(), d["min"].as<double>(), d["max"].as<double>()};
      bool replaced = false;
      for (auto& existing : space.dims) {
        if (existing.name == dim.name) {
          existing = dim;
          replaced = true;
        }
      }
      if (!replaced) space.dims.push_back(dim);
    }
  }
  space.validate();
  return space;
}

inline void check_schema(const YAML::Node& root, const std::string& what) {
  if (!root.IsMap()) throw UsageError(what + ": expected a key-value document");
  if (!root["schema"] || root["schema"].as<int>() != 1) throw UsageError(what + ": missing or unsupported 'schema' (expected 1)");
}

inline ParamSpace load_space_file(const std::string& path) {
  const YAML::Node root = YAML::LoadFile(path);
  check_schema(root, path);
  return parse_space(root);
}

// ---------------------------------------------------------------------------
// Campaigns

struct ChannelPoint {
  netem::GEParams path1;
  std::optional<netem::GEParams> path2;  // heterogeneous multipath only
  double owd_ms = 0.0;
};

struct Contender {
  std::string name;
  transport::DeliveryMode mode = transport::DeliveryMode::unreliable_fec;
  codec::SchemeConfig scheme = codec::SchemeConfig::reed_solomon(30, 20);
  sched::SchedulerKind scheduler = sched::SchedulerKind::single_path;
  std::size_t paths = 1;
};

struct CampaignSpec {
  std::string name = "campaign";
  std::uint64_t seed = 1;
  std::size_t points = 120;
  unsigned repeats = 3;
  SpaceKind space_kind = SpaceKind::ge;
  ParamSpace space = preset_space(SpaceKind::ge);
  std::vector<ChannelPoint> explicit_points;  // from a sweep; replaces sampling when non-empty
  double buffer_ms = 100.0;
  double duration_s = 25.0;
  std::uint64_t initial_window = transport::kDefaultInitialWindow;
  std::vector<Contender> contenders;

  bool heterogeneous() const { return space_kind == SpaceKind::heterogeneous; }
};

namespace detail {

inline double get_or(const std::map<std::string, double>& values, const std::string& key, double fallback) {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

inline ChannelPoint point_from_values(SpaceKind kind, const std::map<std::string, double>& v) {
  ChannelPoint cp;
  cp.owd_ms = get_or(v, "owd_ms", 0.0);
  switch (kind) {
    case SpaceKind::uniform:
      // i.i.d. loss expressed as a chain that never leaves Good.
      cp.path1 = {0.0, 1.0, 1.0 - get_or(v, "uniform_rate", 0.0), 0.0};
      break;
    case SpaceKind::simplified: cp.path1 = netem::GEParams::simplified(get_or(v, "p", 0.0), get_or(v, "r", 1.0)); break;
    case SpaceKind::ge:
      cp.path1 = {get_or(v, "p", 0.0), get_or(v, "r", 1.0), get_or(v, "k_good", 1.0), get_or(v, "h_bad", 0.0)};
      break;
    case SpaceKind::heterogeneous:
      cp.path1 = netem::GEParams::simplified(get_or(v, "p1", 0.0), get_or(v, "r1", 1.0));
      cp.path2 = netem::GEParams::simplified(get_or(v, "p2", 0.0), get_or(v, "r2", 1.0));
      break;
  }
  cp.path1.validate();
  if (cp.path2) cp.path2->validate();
  return cp;
}

inline codec::SchemeConfig parse_scheme(const YAML::Node& c) {
  const std::string s = c["scheme"] ? c["scheme"].as<std::string>() : "rs";
  if (s == "rs" || s == "reed_solomon") {
    return codec::SchemeConfig::reed_solomon(c["n"] ? c["n"].as<unsigned>() : 30, c["k"] ? c["k"].as<unsigned>() : 20);
  }
  if (s == "rlc") {
    return codec::SchemeConfig::rlc(c["n"] ? c["n"].as<unsigned>() : 3, c["k"] ? c["k"].as<unsigned>() : 2,
                                    c["window"] ? c["window"].as<unsigned>() : 20,
                                    c["density"] ? c["density"].as<double>() : 1.0);
  }
  if (s == "xor") {
    return codec::SchemeConfig::xor_interleaved(c["n"] ? c["n"].as<unsigned>() : 3, c["k"] ? c["k"].as<unsigned>() : 2,
                                                c["depth"] ? c["depth"].as<unsigned>() : 10);
  }
  throw UsageError("unknown scheme '" + s + "' (expected rs, rlc or xor)");
}

}  // namespace detail

inline CampaignSpec parse_campaign(const YAML::Node& root) {
  check_schema(root, "campaign");
  CampaignSpec spec;
  if (root["name"]) spec.name = root["name"].as<std::string>();
  if (root["seed"]) spec.seed = root["seed"].as<std::uint64_t>();
  if (root["points"]) spec.points = root["points"].as<std::size_t>();
  if (root["repeats"]) spec.repeats = root["repeats"].as<unsigned>();
  if (root["buffer_ms"]) spec.buffer_ms = root["buffer_ms"].as<double>();
  if (root["duration_s"]) spec.duration_s = root["duration_s"].as<double>();
  if (root["initial_window"]) spec.initial_window = root["initial_window"].as<std::uint64_t>();
  if (root["space"]) spec.space_kind = space_from_string(root["space"].as<std::string>());
  spec.space = preset_space(spec.space_kind);
  if (const auto ranges = root["ranges"]) {
    for (const auto& kv : ranges) {
      const auto name = kv.first.as<std::string>();
      auto& dim = spec.space.dims.at(spec.space.index_of(name));
      if (!kv.second.IsSequence() || kv.second.size() != 2) throw UsageError("range '" + name + "' must be [min, max]");
      dim.lo = kv.second[0].as<double>();
      dim.hi = kv.second[1].as<double>();
    }
  }
  spec.space.validate();
  if (const auto sweep = root["sweep"]) {
    std::map<std::string, double> fixed;
    if (sweep["fixed"]) {
      for (const auto& kv : sweep["fixed"]) fixed[kv.first.as<std::string>()] = kv.second.as<double>();
    }
    if (!sweep["owd_ms"] || !sweep["owd_ms"].IsSequence()) throw UsageError("sweep needs an 'owd_ms' list");
    for (const auto& owd : sweep["owd_ms"]) {
      auto values = fixed;
      values["owd_ms"] = owd.as<double>();
      spec.explicit_points.push_back(detail::point_from_values(spec.space_kind, values));
    }
    spec.points = spec.explicit_points.size();
  }
  if (!root["contenders"] || !root["contenders"].IsSequence() || root["contenders"].size() == 0) {
    throw UsageError("campaign needs a non-empty 'contenders' list");
  }
  std::set<std::string> names;
  for (const auto& c : root["contenders"]) {
    Contender ct;
    ct.name = c["name"].as<std::string>();
    if (!names.insert(ct.name).second) throw UsageError("duplicate contender '" + ct.name + "'");
    if (ct.name.find_first_of(",\"\n") != std::string::npos) throw UsageError("contender names cannot contain , \" or newlines");
    ct.mode = transport::mode_from_string(c["mode"] ? c["mode"].as<std::string>() : "fec");
    if (ct.mode == transport::DeliveryMode::unreliable_fec) ct.scheme = detail::parse_scheme(c);
    if (c["scheduler"]) ct.scheduler = sched::scheduler_from_string(c["scheduler"].as<std::string>());
    if (c["paths"]) ct.paths = c["paths"].as<std::size_t>();
    if (ct.paths < 1 || ct.paths > 2) throw UsageError("contender '" + ct.name + "': paths must be 1 or 2");
    if (ct.mode == transport::DeliveryMode::unreliable_fec) codec::validate(ct.scheme);
    spec.contenders.push_back(ct);
  }
  if (spec.points == 0) throw UsageError("campaign needs at least one point");
  if (spec.repeats == 0) throw UsageError("campaign needs at least one repeat");
  return spec;
}

inline CampaignSpec load_campaign_file(const std::string& path) { return parse_campaign(YAML::LoadFile(path)); }

inline std::vector<ChannelPoint> campaign_points(const CampaignSpec& spec) {
  if (!spec.explicit_points.empty()) return spec.explicit_points;
  const auto sample = wsp_sample(spec.space, spec.points, spec.seed);
  std::vector<ChannelPoint> out;
  for (const auto& pt : sample.points) {
    std::map<std::string, double> values;
    for (std::size_t j = 0; j < spec.space.size(); ++j) values[spec.space.dims[j].name] = pt[j];
    out.push_back(detail::point_from_values(spec.space_kind, values));
  }
  return out;
}

// Channel seeds depend on (campaign seed, point, repeat) only, never on the contender.
inline std::uint64_t run_seed(std::uint64_t campaign_seed, std::size_t point, unsigned repeat) {
  return derive_seed({campaign_seed, point, repeat});
}

inline harness::ExperimentConfig experiment_config(const CampaignSpec& spec, const ChannelPoint& pt, const Contender& c,
                                                   std::uint64_t seed) {
  harness::ExperimentConfig cfg;
  cfg.mode = c.mode;
  cfg.scheme = c.scheme;
  cfg.scheduler = c.paths > 1 ? c.scheduler : sched::SchedulerKind::single_path;
  const netem::SimTime owd = netem::from_ms(pt.owd_ms);
  if (c.paths > 1) {
    cfg.paths = netem::two_path(owd, pt.path1, pt.path2.value_or(pt.path1));
  } else {
    cfg.paths = netem::single_path(owd, pt.path1);
  }
  cfg.buffer_ms = spec.buffer_ms;
  cfg.profile.duration_s = spec.duration_s;
  cfg.initial_window = spec.initial_window;
  cfg.seed = seed;
  return cfg;
}

template <typename T>
T median(std::vector<T> v) {
  if (v.empty()) throw UsageError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : (v[mid - 1] + v[mid]) / 2;
}

struct ResultRow {
  std::size_t point_id = 0;
  std::string contender;
  ChannelPoint point;
  double buffer_ms = 0.0;
  double fraction_received = std::numeric_limits<double>::quiet_NaN();
  double rebuffer_ms = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

inline std::string csv_header(bool heterogeneous) {
  std::string h = "point_id,contender,p1,r1,k1,h1,owd_ms";
  if (heterogeneous) h += ",p2,r2,k2,h2";
  return h + ",buffer_ms,fraction_received,rebuffer_ms,status";
}

inline std::string csv_line(const ResultRow& r, bool heterogeneous) {
  const auto& g = r.point.path1;
  std::string s = fmt::format("{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}", r.point_id, r.contender, g.p, g.r, g.k_good,
                              g.h_bad, r.point.owd_ms);
  if (heterogeneous) {
    const auto g2 = r.point.path2.value_or(g);
    s += fmt::format(",{:.9g},{:.9g},{:.9g},{:.9g}", g2.p, g2.r, g2.k_good, g2.h_bad);
  }
  s += fmt::format(",{:.9g},{:.8f},{:.3f},{}", r.buffer_ms, r.fraction_received, r.rebuffer_ms, r.status);
  return s;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::vector<ResultRow> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open results file " + path);
  std::string line;
  if (!std::getline(in, line)) throw UsageError(path + ": empty results file");
  const auto header = detail::split(line, ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"point_id", "contender", "p1", "r1", "k1", "h1", "owd_ms", "buffer_ms",
                               "fraction_received", "rebuffer_ms", "status"}) {
    if (!col.count(required)) throw UsageError(path + ": missing column " + required);
  }
  const bool het = col.count("p2") > 0;
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != header.size()) {
      // A partially written last line after a crash; the runner will redo it.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw UsageError(fmt::format("{}:{}: expected {} fields, got {}", path, lineno, header.size(), f.size()));
    }
    ResultRow r;
    r.point_id = std::stoul(f[col["point_id"]]);
    r.contender = f[col["contender"]];
    r.point.path1 = {std::stod(f[col["p1"]]), std::stod(f[col["r1"]]), std::stod(f[col["k1"]]), std::stod(f[col["h1"]])};
    if (het) {
      r.point.path2 = netem::GEParams{std::stod(f[col["p2"]]), std::stod(f[col["r2"]]), std::stod(f[col["k2"]]),
                                      std::stod(f[col["h2"]])};
    }
    r.point.owd_ms = std::stod(f[col["owd_ms"]]);
    r.buffer_ms = std::stod(f[col["buffer_ms"]]);
    r.fraction_received = std::stod(f[col["fraction_received"]]);
    r.rebuffer_ms = std::stod(f[col["rebuffer_ms"]]);
    r.status = f[col["status"]];
    rows.push_back(std::move(r));
  }
  return rows;
}

struct CampaignProgress {
  std::size_t rows_total = 0;
  std::size_t rows_skipped = 0;  // already present when resuming
  std::size_t runs = 0;
  std::size_t failed = 0;
};

// Runs every (point, contender) pair `repeats` times and writes one median row per
// pair, in (point, contender) order. With resume, rows already present in `out_path`
// are kept and not recomputed.
inline CampaignProgress run_campaign(const CampaignSpec& spec, const std::string& out_path, unsigned jobs = 1,
                                     bool resume = true,
                                     const std::function<void(const ResultRow&)>& on_row = nullptr) {
  const auto points = campaign_points(spec);
  const bool het = spec.heterogeneous();
  const std::string header = csv_header(het);

  std::set<std::pair<std::size_t, std::string>> done;
  std::size_t valid_bytes = 0;
  if (resume && std::filesystem::exists(out_path)) {
    std::ifstream in(out_path, std::ios::binary);
    std::string line;
    if (std::getline(in, line) && line == header) {
      valid_bytes = line.size() + 1;
      const std::size_t fields = detail::split(header, ',').size();
      while (std::getline(in, line)) {
        if (in.eof() || detail::split(line, ',').size() != fields) break;  // torn final line
        const auto f = detail::split(line, ',');
        done.insert({std::stoul(f[0]), f[1]});
        valid_bytes += line.size() + 1;
      }
    }
  }

  if (valid_bytes > 0) {
    std::filesystem::resize_file(out_path, valid_bytes);
  } else {
    std::ofstream(out_path, std::ios::trunc) << header << '\n';
  }
  std::ofstream out(out_path, std::ios::app);
  if (!out) throw UsageError("cannot write " + out_path);

  struct Task {
    std::size_t point;
    std::size_t contender;
  };
  std::vector<Task> tasks;
  CampaignProgress progress;
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (std::size_t c = 0; c < spec.contenders.size(); ++c) {
      ++progress.rows_total;
      if (done.count({p, spec.contenders[c].name})) {
        ++progress.rows_skipped;
        continue;
      }
      tasks.push_back({p, c});
    }
  }

  std::vector<std::optional<ResultRow>> results(tasks.size());
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> runs{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const auto& t = tasks[i];
      const auto& contender = spec.contenders[t.contender];
      ResultRow row;
      row.point_id = t.point;
      row.contender = contender.name;
      row.point = points[t.point];
      row.buffer_ms = spec.buffer_ms;
      std::vector<double> fractions, rebuffers;
      for (unsigned rep = 0; rep < spec.repeats; ++rep) {
        try {
          const auto m = harness::run_experiment(
              experiment_config(spec, points[t.point], contender, run_seed(spec.seed, t.point, rep)));
          fractions.push_back(m.fraction_received);
          rebuffers.push_back(m.rebuffer_ms);
        } catch (const std::exception&) {
          row.status = "failed";
        }
        ++runs;
      }
      if (row.status == "ok") {
        row.fraction_received = median(fractions);
        row.rebuffer_ms = median(rebuffers);
      }
      {
        std::lock_guard lock(mu);
        results[i] = std::move(row);
      }
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  const unsigned n_workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(tasks.size(), 1))));
  for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    ResultRow row;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return results[i].has_value(); });
      row = std::move(*results[i]);
      results[i].reset();
    }
    out << csv_line(row, het) << '\n';
    out.flush();
    if (row.status != "ok") ++progress.failed;
    if (on_row) on_row(row);
  }
  for (auto& t : pool) t.join();
  progress.runs = runs;
  return progress;
}

// ---------------------------------------------------------------------------
// Summaries

// Sorted (value, F(value)) steps.
inline std::vector<std::pair<double, double>> ecdf(std::vector<double> values) {
  if (values.empty()) throw UsageError("ecdf of an empty set");
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.emplace_back(values[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

inline double metric_value(const ResultRow& r, const std::string& metric) {
  if (metric == "fraction_received") return r.fraction_received;
  if (metric == "rebuffer_ms") return r.rebuffer_ms;
  throw UsageError("unknown metric '" + metric + "' (expected fraction_received or rebuffer_ms)");
}

inline std::vector<double> metric_values(const std::vector<ResultRow>& rows, const std::string& contender,
                                         const std::string& metric) {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.contender == contender && r.status == "ok") out.push_back(metric_value(r, metric));
  }
  return out;
}

inline double ratio(double a, double b) {
  if (b == 0.0) return a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return a / b;
}

struct PointRatio {
  std::size_t point_id = 0;
  double value = 1.0;
};

inline std::vector<PointRatio> ratio_table(const std::vector<ResultRow>& rows, const std::string& a,
                                           const std::string& b, const std::string& metric) {
  std::map<std::size_t, double> va, vb;
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    if (r.contender == a) va[r.point_id] = metric_value(r, metric);
    if (r.contender == b) vb[r.point_id] = metric_value(r, metric);
  }
  if (va.size() != vb.size()) throw UsageError("ratio_table: contenders '" + a + "' and '" + b + "' are not paired");
  std::vector<PointRatio> out;
  for (const auto& [pid, x] : va) {
    auto it = vb.find(pid);
    if (it == vb.end()) throw UsageError(fmt::format("ratio_table: point {} has no '{}' row", pid, b));
    out.push_back({pid, ratio(x, it->second)});
  }
  return out;
}

}  // namespace quicfec::xdesign
