#pragma once

// Benchmark harness: replays a b-model trace against one structure and
// expiration strategy under a simulated clock, aggregating wall time over
// fixed-size groups of operations.

#include <sys/resource.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "expire_treap/atomic_snapshot.hpp"
#include "expire_treap/competitors/avl_tree.hpp"
#include "expire_treap/competitors/expiring_index.hpp"
#include "expire_treap/competitors/hash_index.hpp"
#include "expire_treap/competitors/red_black_tree.hpp"
#include "expire_treap/errors.hpp"
#include "expire_treap/expiration.hpp"
#include "expire_treap/random.hpp"
#include "expire_treap/treap.hpp"
#include "expire_treap/workload.hpp"

namespace expire_treap::bench {

enum class Structure { Treap, TreapHashed, Avl, AvlHeap, RedBlack, RedBlackHeap, Hash, HashHeap };
enum class Measurement { Maintenance, Lookup, Traversal };

inline constexpr Structure kAllStructures[] = {Structure::Treap,   Structure::TreapHashed,  Structure::Avl,
                                               Structure::AvlHeap, Structure::RedBlack,     Structure::RedBlackHeap,
                                               Structure::Hash,    Structure::HashHeap};

inline std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::Treap:
      return "treap";
    case Structure::TreapHashed:
      return "treap_hashed";
    case Structure::Avl:
      return "avl";
    case Structure::AvlHeap:
      return "avl_heap";
    case Structure::RedBlack:
      return "rb";
    case Structure::RedBlackHeap:
      return "rb_heap";
    case Structure::Hash:
      return "hash";
    case Structure::HashHeap:
      return "hash_heap";
  }
  return "?";
}

inline Structure parse_structure(std::string_view s) {
  for (Structure candidate : kAllStructures) {
    if (to_string(candidate) == s) {
      return candidate;
    }
  }
  throw ConfigError("unknown structure '" + std::string(s) +
                    "' (treap, treap_hashed, avl, avl_heap, rb, rb_heap, hash, hash_heap)");
}

inline std::string_view to_string(Measurement m) {
  switch (m) {
    case Measurement::Maintenance:
      return "maintenance";
    case Measurement::Lookup:
      return "lookup";
    case Measurement::Traversal:
      return "traversal";
  }
  return "?";
}

inline Measurement parse_measurement(std::string_view s) {
  for (Measurement m : {Measurement::Maintenance, Measurement::Lookup, Measurement::Traversal}) {
    if (to_string(m) == s) {
      return m;
    }
  }
  throw ConfigError("unknown measurement '" + std::string(s) + "' (maintenance, lookup, traversal)");
}

[[nodiscard]] inline bool is_treap(Structure s) noexcept {
  return s == Structure::Treap || s == Structure::TreapHashed;
}
[[nodiscard]] inline bool has_heap(Structure s) noexcept {
  return s == Structure::AvlHeap || s == Structure::RedBlackHeap || s == Structure::HashHeap;
}

struct ScenarioConfig {
  std::string name = "scenario";
  Structure structure = Structure::Treap;
  BModelParams workload{0.5, 10, 100'000, 1};
  LifetimeDistribution lifetime = LifetimeDistribution::fixed(1000);
  std::uint64_t bucket_ms = 1;
  std::uint64_t target_db_size = 0;
  std::uint64_t ops_per_aggregation = 80'000;
  Measurement measurement = Measurement::Maintenance;
  std::uint64_t cleanse_interval_ms = 1000;
  std::uint64_t n_lookups = 100'000;
  std::uint64_t remove_every = 0;
  unsigned reader_threads = 0;
  std::uint64_t seed = 1;

  void validate() const {
    workload.validate();
    if (ops_per_aggregation == 0) {
      throw ConfigError("ops_per_aggregation must be positive");
    }
    if (bucket_ms == 0 || cleanse_interval_ms == 0) {
      throw ConfigError("bucket_ms and cleanse_interval_ms must be positive");
    }
    if (reader_threads > 0 && !is_treap(structure)) {
      throw ConfigError("reader threads need a treap structure");
    }
    if (workload.volume > std::numeric_limits<std::uint32_t>::max() - target_db_size) {
      throw ConfigError("workload too large for 32-bit payloads");
    }
  }
};

/// Uniform traffic with fixed lifetimes tuned so that a database of
/// `db_size` records loses `roe` of its contents per `window_ms` (which is
/// also the cleansing interval). `arrivals` trace records are spread over
/// 2^levels buckets.
inline ScenarioConfig roe_scenario(Structure structure, std::uint64_t db_size, double roe, std::uint64_t arrivals,
                                   std::uint64_t seed, std::uint64_t window_ms = 1000, unsigned levels = 10) {
  if (!(roe > 0.0 && roe <= 1.0) || db_size == 0) {
    throw ConfigError("roe scenario needs 0 < roe <= 1 and a positive database size");
  }
  ScenarioConfig cfg;
  const auto lifetime = static_cast<std::uint64_t>(std::llround(static_cast<double>(window_ms) / roe));
  const double duration = static_cast<double>(arrivals) * static_cast<double>(lifetime) / static_cast<double>(db_size);
  cfg.name = std::string(to_string(structure)) + "_roe" + std::to_string(std::llround(roe * 100));
  cfg.structure = structure;
  cfg.workload = BModelParams{0.5, levels, arrivals, seed};
  cfg.lifetime = LifetimeDistribution::fixed(lifetime);
  cfg.bucket_ms = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(duration / std::ldexp(1.0, static_cast<int>(levels)))));
  cfg.target_db_size = db_size;
  cfg.cleanse_interval_ms = window_ms;
  cfg.seed = seed;
  return cfg;
}

/// Parses `key = value` lines (`#` starts a comment). Keys: name, structure,
/// b, l, n, workload_seed, lifetime, bucket_ms, target_db_size,
/// ops_per_aggregation, measurement, cleanse_interval_ms, n_lookups,
/// remove_every, reader_threads, seed.
inline ScenarioConfig parse_config(std::istream& in, const std::string& origin = "<config>") {
  ScenarioConfig cfg;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = origin + ":" + std::to_string(lineno) + ": ";
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + "expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto as_u64 = [&]() {
      std::uint64_t v = 0;
      const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
      if (r.ec != std::errc{} || r.ptr != value.data() + value.size() || value.empty()) {
        throw ConfigError(where + "'" + key + "' needs a non-negative integer");
      }
      return v;
    };
    try {
      if (key == "name") {
        cfg.name = value;
      } else if (key == "structure") {
        cfg.structure = parse_structure(value);
      } else if (key == "b") {
        double b = 0;
        const auto r = std::from_chars(value.data(), value.data() + value.size(), b);
        if (r.ec != std::errc{} || r.ptr != value.data() + value.size()) {
          throw ConfigError("'b' needs a number");
        }
        cfg.workload.bias = b;
      } else if (key == "l") {
        cfg.workload.levels = static_cast<unsigned>(as_u64());
      } else if (key == "n") {
        cfg.workload.volume = as_u64();
      } else if (key == "workload_seed") {
        cfg.workload.seed = as_u64();
      } else if (key == "lifetime") {
        cfg.lifetime = LifetimeDistribution::parse(value);
      } else if (key == "bucket_ms") {
        cfg.bucket_ms = as_u64();
      } else if (key == "target_db_size") {
        cfg.target_db_size = as_u64();
      } else if (key == "ops_per_aggregation") {
        cfg.ops_per_aggregation = as_u64();
      } else if (key == "measurement") {
        cfg.measurement = parse_measurement(value);
      } else if (key == "cleanse_interval_ms") {
        cfg.cleanse_interval_ms = as_u64();
      } else if (key == "n_lookups") {
        cfg.n_lookups = as_u64();
      } else if (key == "remove_every") {
        cfg.remove_every = as_u64();
      } else if (key == "reader_threads") {
        cfg.reader_threads = static_cast<unsigned>(as_u64());
      } else if (key == "seed") {
        cfg.seed = as_u64();
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      throw ConfigError(msg.rfind(origin, 0) == 0 ? msg : where + msg);
    }
  }
  cfg.validate();
  return cfg;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path.string() + ": cannot open: " + std::strerror(errno));
  }
  return parse_config(in, path.string());
}

struct IntervalRow {
  std::uint64_t interval_index = 0;
  double wall_ms = 0.0;
  std::uint64_t inserts = 0;
  std::uint64_t expirations = 0;
  std::uint64_t removes = 0;
  std::uint64_t live_size = 0;
  std::uint64_t heap_entries = 0;
  std::uint64_t tombstones = 0;

  [[nodiscard]] std::uint64_t ops() const noexcept { return inserts + expirations + removes; }
};

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::uint64_t count = 0;
  double density = 0.0;
};

struct BenchReport {
  std::string name;
  Structure structure = Structure::Treap;
  Measurement measurement = Measurement::Maintenance;
  std::vector<IntervalRow> rows;
  std::vector<double> roe;
  std::vector<HistogramBin> pdf;
  std::vector<std::pair<std::string, double>> summary;

  [[nodiscard]] std::optional<double> metric(std::string_view key) const {
    for (const auto& [k, v] : summary) {
      if (k == key) {
        return v;
      }
    }
    return std::nullopt;
  }
};

/// #expirations / (#live + #expirations); throws UndefinedRoE when both are 0.
inline double rate_of_expiration(std::uint64_t expirations, std::uint64_t live) {
  if (expirations == 0 && live == 0) {
    throw UndefinedRoE();
  }
  return static_cast<double>(expirations) / static_cast<double>(live + expirations);
}

/// Fixed-width histogram over [min, max] of `values`; density integrates to 1.
inline std::vector<HistogramBin> histogram(const std::vector<double>& values, std::size_t bins = 50) {
  std::vector<HistogramBin> out;
  if (values.empty() || bins == 0) {
    return out;
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  double width = (*hi_it - lo) / static_cast<double>(bins);
  if (!(width > 0.0)) {
    width = 1.0;
  }
  out.resize(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    out[i].lo = lo + width * static_cast<double>(i);
    out[i].hi = lo + width * static_cast<double>(i + 1);
  }
  for (const double v : values) {
    auto i = static_cast<std::size_t>((v - lo) / width);
    ++out[std::min(i, bins - 1)].count;
  }
  for (auto& b : out) {
    b.density = static_cast<double>(b.count) / (static_cast<double>(values.size()) * width);
  }
  return out;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) {
    return 0.0;
  }
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v[i];
}

inline double peak_rss_kb() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) != 0) {
    return 0.0;
  }
  return static_cast<double>(usage.ru_maxrss);
}

}  // namespace detail

using BenchTreap = Treap<std::uint64_t, std::uint32_t>;
using BenchSnapshot = BenchTreap::snapshot_type;

/// Persistent treap under test; `publish_to`, when set, receives every new
/// version for concurrent readers. Updates give up the previous version, so
/// they run in place unless a reader slot still shares it.
class TreapSubject {
 public:
  TreapSubject(KeyHasher hasher, std::uint64_t seed) : treap_(seed), hasher_(hasher) {}

  void publish_to(AtomicSnapshot<BenchSnapshot>* slot) { slot_ = slot; }
  [[nodiscard]] const KeyHasher& hasher() const noexcept { return hasher_; }
  [[nodiscard]] const BenchSnapshot& snapshot() const noexcept { return snap_; }

  bool insert(std::uint64_t key, ExpirationTime exp, std::uint32_t payload) {
    const std::size_t before = snap_.size();
    snap_ = treap_.insert(std::move(snap_), hasher_(key), exp, payload);
    const bool inserted = snap_.size() != before;
    publish();
    return inserted;
  }
  [[nodiscard]] bool contains(std::uint64_t key) const { return snap_.locate(hasher_(key)) != nullptr; }
  void remove(std::uint64_t key) {
    snap_ = treap_.remove(std::move(snap_), hasher_(key));
    publish();
  }
  std::size_t step(std::uint64_t now) {
    const auto min_exp = snap_.min_expiration();
    if (!min_exp || min_exp->is_infinite() || min_exp->millis() > now) {
      return 0;
    }
    std::size_t expelled = 0;
    snap_ = treap_.expire(std::move(snap_), ExpirationTime::at(now), [&](const auto&) { ++expelled; });
    publish();
    return expelled;
  }
  [[nodiscard]] bool lookup(std::uint64_t key) const { return snap_.locate(hasher_(key)) != nullptr; }
  [[nodiscard]] std::size_t traverse() const {
    std::size_t visited = 0;
    snap_.for_each([&](const auto&) { ++visited; });
    return visited;
  }
  [[nodiscard]] std::size_t size() const noexcept { return snap_.size(); }
  [[nodiscard]] std::size_t heap_entries() const noexcept { return 0; }
  [[nodiscard]] std::size_t tombstones() const noexcept { return 0; }
  [[nodiscard]] std::optional<std::string> find_violation() const { return snap_.find_violation(); }

 private:
  void publish() {
    if (slot_ != nullptr) {
      slot_->store(snap_);
    }
  }

  BenchTreap treap_;
  KeyHasher hasher_;
  BenchSnapshot snap_;
  AtomicSnapshot<BenchSnapshot>* slot_ = nullptr;
};

/// A conventional index plus expiration strategy under test.
template <class Index>
class CompetitorSubject {
 public:
  explicit CompetitorSubject(competitors::ExpirationStrategy strategy) : idx_(strategy) {}

  bool insert(std::uint64_t key, ExpirationTime exp, std::uint32_t payload) { return idx_.insert(key, exp, payload); }
  [[nodiscard]] bool contains(std::uint64_t key) const { return idx_.index().locate(key) != nullptr; }
  void remove(std::uint64_t key) { idx_.remove(key); }
  std::size_t step(std::uint64_t now) { return idx_.step(now); }
  [[nodiscard]] bool lookup(std::uint64_t key) const { return idx_.index().locate(key) != nullptr; }
  [[nodiscard]] std::size_t traverse() const {
    std::size_t visited = 0;
    idx_.index().for_each([&](const auto&, ExpirationTime, const auto&) { ++visited; });
    return visited;
  }
  [[nodiscard]] std::size_t size() const noexcept { return idx_.size(); }
  [[nodiscard]] std::size_t heap_entries() const noexcept { return idx_.heap_entries(); }
  [[nodiscard]] std::size_t tombstones() const noexcept { return idx_.tombstones(); }
  [[nodiscard]] std::optional<std::string> find_violation() const { return idx_.find_violation(); }
  [[nodiscard]] const competitors::ExpiringIndex<Index>& expiring_index() const noexcept { return idx_; }

 private:
  competitors::ExpiringIndex<Index> idx_;
};

using AvlIndex = competitors::AvlTree<std::uint64_t, std::uint32_t>;
using RedBlackIndex = competitors::RedBlackTree<std::uint64_t, std::uint32_t>;
using HashTableIndex = competitors::HashIndex<std::uint64_t, std::uint32_t>;

/// Builds the subject for `structure` and hands it to `fn`.
template <class Fn>
decltype(auto) with_subject(Structure structure, std::uint64_t seed, std::uint64_t cleanse_interval_ms, Fn&& fn) {
  const competitors::ExpirationStrategy periodic = competitors::PeriodicCleansing{cleanse_interval_ms};
  const competitors::ExpirationStrategy eager = competitors::EagerHeap{};
  switch (structure) {
    case Structure::Treap: {
      TreapSubject s(KeyHasher::identity(), seed);
      return fn(s);
    }
    case Structure::TreapHashed: {
      TreapSubject s(KeyHasher::hashed(seed), seed);
      return fn(s);
    }
    case Structure::Avl: {
      CompetitorSubject<AvlIndex> s(periodic);
      return fn(s);
    }
    case Structure::AvlHeap: {
      CompetitorSubject<AvlIndex> s(eager);
      return fn(s);
    }
    case Structure::RedBlack: {
      CompetitorSubject<RedBlackIndex> s(periodic);
      return fn(s);
    }
    case Structure::RedBlackHeap: {
      CompetitorSubject<RedBlackIndex> s(eager);
      return fn(s);
    }
    case Structure::Hash: {
      CompetitorSubject<HashTableIndex> s(periodic);
      return fn(s);
    }
    case Structure::HashHeap:
      break;
  }
  CompetitorSubject<HashTableIndex> s(eager);
  return fn(s);
}

/// Fills `subject` with `db_size` records keyed by a random permutation of
/// [key_base, key_base + db_size). Expiration times are drawn by `draw_exp`.
template <class Subject, class DrawExp>
void populate(Subject& subject, std::uint64_t db_size, std::uint64_t key_base, Rng& rng, DrawExp&& draw_exp) {
  const std::vector<std::uint64_t> keys = random_permutation(db_size, rng);
  for (std::uint64_t i = 0; i < db_size; ++i) {
    subject.insert(key_base + keys[i], draw_exp(rng), static_cast<std::uint32_t>(i));
  }
}

/// Uniformly random present keys for lookup_bench, reproducible from seed.
inline std::vector<std::uint64_t> lookup_keys(std::uint64_t db_size, std::uint64_t n, std::uint64_t seed) {
  std::vector<std::uint64_t> keys;
  if (db_size == 0) {
    return keys;
  }
  Rng rng(derive_seed(seed, 21));
  keys.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    keys.push_back(uniform_below(rng, db_size));
  }
  return keys;
}

namespace detail {
inline ExpirationTime far_future(Rng& rng) {
  return ExpirationTime::at(1'000'000'000ULL + uniform_below(rng, 1'000'000'000ULL));
}
}  // namespace detail

struct LookupResult {
  std::uint64_t db_size = 0;
  std::uint64_t lookups = 0;
  std::uint64_t hits = 0;
  double seconds = 0.0;
  [[nodiscard]] double ops_per_second() const noexcept { return seconds > 0.0 ? static_cast<double>(lookups) / seconds : 0.0; }
  [[nodiscard]] double ns_per_lookup() const noexcept {
    return lookups > 0 ? seconds * 1e9 / static_cast<double>(lookups) : 0.0;
  }
};

/// Times `n_lookups` uniformly random lookups of present keys in a structure
/// holding `db_size` records with random, key-independent expiration times.
inline LookupResult lookup_bench(Structure structure, std::uint64_t db_size, std::uint64_t n_lookups,
                                 std::uint64_t seed) {
  return with_subject(structure, seed, 1000, [&](auto& subject) {
    Rng rng(derive_seed(seed, 20));
    populate(subject, db_size, 0, rng, detail::far_future);
    const std::vector<std::uint64_t> keys = lookup_keys(db_size, n_lookups, seed);
    LookupResult result{db_size, n_lookups, 0, 0.0};
    const auto start = detail::Clock::now();
    for (const std::uint64_t k : keys) {
      result.hits += subject.lookup(k) ? 1 : 0;
    }
    result.seconds = detail::ms_since(start) / 1000.0;
    return result;
  });
}

struct TraversalResult {
  std::uint64_t db_size = 0;
  std::uint64_t visited = 0;
  double seconds = 0.0;
};

/// Times one full in-order traversal (bucket order for hash tables).
inline TraversalResult traversal_bench(Structure structure, std::uint64_t db_size, std::uint64_t seed,
                                       unsigned repetitions = 1) {
  return with_subject(structure, seed, 1000, [&](auto& subject) {
    Rng rng(derive_seed(seed, 30));
    populate(subject, db_size, 0, rng, detail::far_future);
    TraversalResult result{db_size, 0, 0.0};
    double best = std::numeric_limits<double>::infinity();
    for (unsigned r = 0; r < std::max(1U, repetitions); ++r) {
      const auto start = detail::Clock::now();
      result.visited = subject.traverse();
      best = std::min(best, detail::ms_since(start) / 1000.0);
    }
    result.seconds = best;
    return result;
  });
}

namespace detail {

inline void finish_report(BenchReport& report, double maintenance_ms, std::uint64_t peak_live,
                          std::uint64_t peak_memory, std::uint64_t reader_lookups) {
  std::uint64_t inserts = 0;
  std::uint64_t expirations = 0;
  std::uint64_t removes = 0;
  std::vector<double> durations;
  std::vector<double> throughput;
  for (const IntervalRow& row : report.rows) {
    inserts += row.inserts;
    expirations += row.expirations;
    removes += row.removes;
    durations.push_back(row.wall_ms);
    if (row.wall_ms > 0.0) {
      throughput.push_back(static_cast<double>(row.ops()) / (row.wall_ms / 1000.0));
    }
    report.roe.push_back(row.expirations + row.live_size == 0 ? 0.0
                                                               : rate_of_expiration(row.expirations, row.live_size));
  }
  report.pdf = histogram(durations);
  const double total_ops = static_cast<double>(inserts + expirations + removes);
  double roe_mean = 0.0;
  for (double r : report.roe) {
    roe_mean += r;
  }
  roe_mean = report.roe.empty() ? 0.0 : roe_mean / static_cast<double>(report.roe.size());
  report.summary = {
      {"rows", static_cast<double>(report.rows.size())},
      {"inserts", static_cast<double>(inserts)},
      {"expirations", static_cast<double>(expirations)},
      {"removes", static_cast<double>(removes)},
      {"maintenance_ms", maintenance_ms},
      {"throughput_ops_per_s", maintenance_ms > 0.0 ? total_ops / (maintenance_ms / 1000.0) : 0.0},
      {"throughput_p05", percentile(throughput, 0.05)},
      {"throughput_p50", percentile(throughput, 0.50)},
      {"throughput_p95", percentile(throughput, 0.95)},
      {"final_live", report.rows.empty() ? 0.0 : static_cast<double>(report.rows.back().live_size)},
      {"peak_live", static_cast<double>(peak_live)},
      {"peak_memory_proxy", static_cast<double>(peak_memory)},
      {"roe_mean", roe_mean},
      {"reader_lookups", static_cast<double>(reader_lookups)},
      {"peak_rss_kb", peak_rss_kb()},
  };
}

template <class Subject>
BenchReport replay(Subject& subject, const ScenarioConfig& cfg, const WorkloadTrace& trace) {
  BenchReport report;
  report.name = cfg.name;
  report.structure = cfg.structure;
  report.measurement = Measurement::Maintenance;
  if (trace.records.empty()) {
    finish_report(report, 0.0, 0, 0, 0);
    return report;
  }

  // Bootstrap: residual lifetimes of a steady state, keys above the trace's.
  Rng boot_rng(derive_seed(cfg.seed, 10));
  const std::uint64_t key_base = trace.params.volume;
  populate(subject, cfg.target_db_size, key_base, boot_rng, [&](Rng& rng) {
    const std::uint64_t life = cfg.lifetime.sample(rng);
    if (life == kNeverExpires) {
      return ExpirationTime::infinity();
    }
    return ExpirationTime::at(1 + static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(life)));
  });

  AtomicSnapshot<BenchSnapshot> slot;
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> reader_lookups{0};
  std::vector<std::thread> readers;
  // Readers stop and the subject forgets the slot on every exit path.
  struct ReaderGuard {
    Subject& subject;
    std::atomic<bool>& stop;
    std::vector<std::thread>& readers;
    ~ReaderGuard() {
      stop.store(true);
      for (auto& t : readers) {
        t.join();
      }
      if constexpr (std::is_same_v<Subject, TreapSubject>) {
        subject.publish_to(nullptr);
      }
    }
  } guard{subject, stop, readers};
  if constexpr (std::is_same_v<Subject, TreapSubject>) {
    if (cfg.reader_threads > 0) {
      slot.store(subject.snapshot());
      subject.publish_to(&slot);
      const std::uint64_t key_space = trace.params.volume + cfg.target_db_size;
      for (unsigned t = 0; t < cfg.reader_threads; ++t) {
        readers.emplace_back([&, t, key_space] {
          Rng rng(derive_seed(cfg.seed, 100 + t));
          std::uint64_t local = 0;
          while (!stop.load(std::memory_order_relaxed)) {
            const BenchSnapshot s = slot.load();
            for (int i = 0; i < 64; ++i) {
              const std::uint64_t key = subject.hasher()(uniform_below(rng, key_space));
              const auto* n = s.locate(key);
              if (n != nullptr && n->key() != key) {
                std::terminate();
              }
              ++local;
            }
          }
          reader_lookups.fetch_add(local);
        });
      }
    }
  }

  std::uint64_t peak_live = subject.size();
  std::uint64_t peak_memory = subject.size() + subject.heap_entries();
  auto track_peaks = [&] {
    peak_live = std::max<std::uint64_t>(peak_live, subject.size());
    peak_memory = std::max<std::uint64_t>(peak_memory, subject.size() + subject.heap_entries());
  };

  IntervalRow row;
  double maintenance_ms = 0.0;
  auto row_start = Clock::now();
  auto close_row = [&] {
    row.wall_ms = ms_since(row_start);
    maintenance_ms += row.wall_ms;
    row.live_size = subject.size();
    row.heap_entries = subject.heap_entries();
    row.tombstones = subject.tombstones();
    row.interval_index = report.rows.size();
    report.rows.push_back(row);
    row = IntervalRow{};
    row_start = Clock::now();
  };

  std::uint64_t arrival = 0;
  trace.for_each_arrival([&](std::uint64_t now, const TraceRecord& rec) {
    row.expirations += subject.step(now);
    if (cfg.remove_every > 0 && arrival >= cfg.remove_every && arrival % cfg.remove_every == 0) {
      const std::uint64_t victim = trace.records[arrival - cfg.remove_every].key;
      if (subject.contains(victim)) {
        subject.remove(victim);
        ++row.removes;
      }
    }
    const ExpirationTime exp =
        rec.lifetime_ms == kNeverExpires ? ExpirationTime::infinity() : ExpirationTime::at(now + rec.lifetime_ms);
    if (subject.insert(rec.key, exp, static_cast<std::uint32_t>(arrival))) {
      ++row.inserts;
    }
    track_peaks();
    ++arrival;
    if (row.ops() >= cfg.ops_per_aggregation) {
      close_row();
    }
  });
  if (row.ops() > 0) {
    close_row();
  }

  stop.store(true);
  for (auto& t : readers) {
    t.join();
  }
  readers.clear();
  finish_report(report, maintenance_ms, peak_live, peak_memory, reader_lookups.load());
  return report;
}

}  // namespace detail

/// Runs one configured scenario.
inline BenchReport run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.measurement == Measurement::Lookup) {
    const LookupResult r = lookup_bench(cfg.structure, cfg.target_db_size, cfg.n_lookups, cfg.seed);
    BenchReport report{cfg.name, cfg.structure, cfg.measurement, {}, {}, {}, {}};
    report.summary = {{"db_size", static_cast<double>(r.db_size)},
                      {"lookups", static_cast<double>(r.lookups)},
                      {"hits", static_cast<double>(r.hits)},
                      {"seconds", r.seconds},
                      {"ops_per_second", r.ops_per_second()}};
    return report;
  }
  if (cfg.measurement == Measurement::Traversal) {
    const TraversalResult r = traversal_bench(cfg.structure, cfg.target_db_size, cfg.seed);
    BenchReport report{cfg.name, cfg.structure, cfg.measurement, {}, {}, {}, {}};
    report.summary = {{"db_size", static_cast<double>(r.db_size)},
                      {"visited", static_cast<double>(r.visited)},
                      {"seconds", r.seconds}};
    return report;
  }
  const WorkloadTrace trace = generate(cfg.workload, cfg.lifetime, cfg.bucket_ms);
  return with_subject(cfg.structure, cfg.seed, cfg.cleanse_interval_ms,
                      [&](auto& subject) { return detail::replay(subject, cfg, trace); });
}

namespace detail {

inline std::string format_number(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
  return std::string(buf, res.ptr);
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(path.string() + ": cannot open for writing: " + std::strerror(errno));
  }
  out << content;
  out.flush();
  if (!out) {
    throw Error(path.string() + ": write failed: " + std::strerror(errno));
  }
}

}  // namespace detail

inline constexpr std::string_view kRowsHeader =
    "interval_index,wall_ms,inserts,expirations,removes,live_size,heap_entries,tombstones";

inline std::string rows_csv(const BenchReport& report) {
  std::ostringstream os;
  os << kRowsHeader << '\n';
  for (const IntervalRow& r : report.rows) {
    os << r.interval_index << ',' << detail::format_number(r.wall_ms) << ',' << r.inserts << ',' << r.expirations
       << ',' << r.removes << ',' << r.live_size << ',' << r.heap_entries << ',' << r.tombstones << '\n';
  }
  return os.str();
}

inline std::string summary_csv(const BenchReport& report) {
  std::ostringstream os;
  os << "metric,value\n";
  for (const auto& [k, v] : report.summary) {
    os << k << ',' << detail::format_number(v) << '\n';
  }
  return os.str();
}

inline std::string pdf_csv(const BenchReport& report) {
  std::ostringstream os;
  os << "bin_lo_ms,bin_hi_ms,count,density\n";
  for (const HistogramBin& b : report.pdf) {
    os << detail::format_number(b.lo) << ',' << detail::format_number(b.hi) << ',' << b.count << ','
       << detail::format_number(b.density) << '\n';
  }
  return os.str();
}

/// Writes the per-interval rows to `path`.
inline void emit_csv(const BenchReport& report, const std::filesystem::path& path) {
  detail::write_file(path, rows_csv(report));
}

inline void emit_summary_csv(const BenchReport& report, const std::filesystem::path& path) {
  detail::write_file(path, summary_csv(report));
}

inline void emit_pdf_csv(const BenchReport& report, const std::filesystem::path& path) {
  detail::write_file(path, pdf_csv(report));
}

}  // namespace expire_treap::bench
