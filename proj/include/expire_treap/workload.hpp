#pragma once

// Bursty traffic generator in the style of the b-model: a total volume N is
// split recursively over 2^l intervals, each split handing a fraction b to
// one half (chosen by a fair coin) and 1-b to the other. A lifetime
// distribution, the fourth parameter, gives every arriving record the time
// it stays valid.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <vector>

#include "expire_treap/errors.hpp"
#include "expire_treap/random.hpp"

namespace expire_treap {

/// Lifetime value meaning "never expires".
inline constexpr std::uint64_t kNeverExpires = std::numeric_limits<std::uint64_t>::max();

struct BModelParams {
  double bias = 0.5;
  unsigned levels = 0;
  std::uint64_t volume = 0;
  std::uint64_t seed = 0;

  static constexpr unsigned kMaxLevels = 24;

  void validate() const {
    if (!(bias >= 0.5 && bias < 1.0)) {
      throw ConfigError("b-model bias must lie in [0.5, 1.0)");
    }
    if (levels > kMaxLevels) {
      throw ConfigError("b-model aggregation level must be at most " + std::to_string(kMaxLevels));
    }
  }

  [[nodiscard]] std::uint64_t bucket_count() const noexcept { return std::uint64_t{1} << levels; }
};

/// Distribution of record lifetimes in milliseconds.
class LifetimeDistribution {
 public:
  enum class Kind { Fixed, UniformRange, Exponential, AlwaysInfinite };

  static LifetimeDistribution fixed(std::uint64_t ms) {
    require_positive(ms);
    return LifetimeDistribution(Kind::Fixed, ms, ms, 0.0);
  }
  static LifetimeDistribution uniform(std::uint64_t lo, std::uint64_t hi) {
    require_positive(lo);
    if (hi < lo) {
      throw ConfigError("uniform lifetime needs lo <= hi");
    }
    return LifetimeDistribution(Kind::UniformRange, lo, hi, 0.0);
  }
  static LifetimeDistribution exponential(double mean_ms) {
    if (!(mean_ms > 0.0)) {
      throw ConfigError("exponential lifetime needs a positive mean");
    }
    return LifetimeDistribution(Kind::Exponential, 0, 0, mean_ms);
  }
  static LifetimeDistribution infinite() { return LifetimeDistribution(Kind::AlwaysInfinite, 0, 0, 0.0); }

  /// Parses `fixed:<ms>`, `uniform:<lo>:<hi>`, `exp:<mean>` or `inf`.
  static LifetimeDistribution parse(std::string_view text) {
    const auto parts = split(text, ':');
    if (parts.size() == 1 && parts[0] == "inf") {
      return infinite();
    }
    if (parts.size() == 2 && parts[0] == "fixed") {
      return fixed(parse_u64(parts[1]));
    }
    if (parts.size() == 3 && parts[0] == "uniform") {
      return uniform(parse_u64(parts[1]), parse_u64(parts[2]));
    }
    if (parts.size() == 2 && parts[0] == "exp") {
      double mean = 0.0;
      const auto [ptr, ec] = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), mean);
      if (ec != std::errc{} || ptr != parts[1].data() + parts[1].size()) {
        throw ConfigError("bad exponential mean: " + std::string(parts[1]));
      }
      return exponential(mean);
    }
    throw ConfigError("bad lifetime distribution '" + std::string(text) +
                      "' (expected fixed:<ms>, uniform:<lo>:<hi>, exp:<mean> or inf)");
  }

  [[nodiscard]] Kind kind() const noexcept { return kind_; }

  /// Mean lifetime in ms (infinity for AlwaysInfinite).
  [[nodiscard]] double mean() const noexcept {
    switch (kind_) {
      case Kind::Fixed:
        return static_cast<double>(lo_);
      case Kind::UniformRange:
        return (static_cast<double>(lo_) + static_cast<double>(hi_)) / 2.0;
      case Kind::Exponential:
        return mean_;
      case Kind::AlwaysInfinite:
        break;
    }
    return std::numeric_limits<double>::infinity();
  }

  /// A positive lifetime in ms, or kNeverExpires.
  std::uint64_t sample(Rng& rng) const {
    switch (kind_) {
      case Kind::Fixed:
        return lo_;
      case Kind::UniformRange:
        return lo_ + uniform_below(rng, hi_ - lo_ + 1);
      case Kind::Exponential: {
        const double x = -mean_ * std::log1p(-uniform01(rng));
        return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(x)));
      }
      case Kind::AlwaysInfinite:
        break;
    }
    return kNeverExpires;
  }

  [[nodiscard]] std::string to_string() const {
    switch (kind_) {
      case Kind::Fixed:
        return "fixed:" + std::to_string(lo_);
      case Kind::UniformRange:
        return "uniform:" + std::to_string(lo_) + ":" + std::to_string(hi_);
      case Kind::Exponential: {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof buf, mean_);
        return "exp:" + std::string(buf, res.ptr);
      }
      case Kind::AlwaysInfinite:
        break;
    }
    return "inf";
  }

 private:
  LifetimeDistribution(Kind k, std::uint64_t lo, std::uint64_t hi, double mean)
      : kind_(k), lo_(lo), hi_(hi), mean_(mean) {}

  static void require_positive(std::uint64_t ms) {
    if (ms == 0) {
      throw ConfigError("lifetimes must be positive");
    }
  }

  static std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
      const std::size_t pos = s.find(sep, start);
      out.push_back(s.substr(start, pos - start));
      if (pos == std::string_view::npos) {
        return out;
      }
      start = pos + 1;
    }
  }

  static std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
      throw ConfigError("bad integer: '" + std::string(s) + "'");
    }
    return v;
  }

  Kind kind_;
  std::uint64_t lo_;
  std::uint64_t hi_;
  double mean_;
};

struct TraceRecord {
  std::uint32_t bucket = 0;
  std::uint64_t key = 0;
  std::uint64_t lifetime_ms = kNeverExpires;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// Time-bucketed arrivals. Records are stored in arrival order, grouped by
/// bucket; within a bucket arrivals are spread evenly over its duration.
struct WorkloadTrace {
  BModelParams params;
  std::uint64_t bucket_ms = 1;
  std::vector<std::uint64_t> bucket_counts;
  std::vector<TraceRecord> records;

  [[nodiscard]] std::uint64_t total() const noexcept { return records.size(); }

  /// Calls visit(arrival_ms, record) for every record in arrival order.
  template <class Visit>
  void for_each_arrival(Visit&& visit) const {
    std::size_t i = 0;
    for (std::size_t b = 0; b < bucket_counts.size(); ++b) {
      const std::uint64_t count = bucket_counts[b];
      for (std::uint64_t j = 0; j < count; ++j, ++i) {
        visit(b * bucket_ms + (j * bucket_ms) / count, records[i]);
      }
    }
  }

  friend bool operator==(const WorkloadTrace& a, const WorkloadTrace& b) {
    return a.params.bias == b.params.bias && a.params.levels == b.params.levels &&
           a.params.volume == b.params.volume && a.params.seed == b.params.seed && a.bucket_ms == b.bucket_ms &&
           a.bucket_counts == b.bucket_counts && a.records == b.records;
  }
};

namespace detail {
// floor(x) plus one with probability frac(x); exact integers stay exact.
inline std::uint64_t randomized_round(double x, Rng& rng) {
  const double fl = std::floor(x);
  const double frac = x - fl;
  auto base = static_cast<std::uint64_t>(fl);
  constexpr double kSnap = 1e-9;
  if (frac < kSnap) {
    return base;
  }
  if (frac > 1.0 - kSnap) {
    return base + 1;
  }
  return base + (uniform01(rng) < frac ? 1 : 0);
}
}  // namespace detail

/// Per-bucket volumes of BModel(b, l, N): 2^l counts summing to N exactly.
inline std::vector<std::uint64_t> bisect_volumes(const BModelParams& params) {
  params.validate();
  Rng rng(derive_seed(params.seed, 1));
  std::vector<std::uint64_t> volumes{params.volume};
  for (unsigned level = 0; level < params.levels; ++level) {
    std::vector<std::uint64_t> next;
    next.reserve(volumes.size() * 2);
    for (const std::uint64_t v : volumes) {
      const std::uint64_t heavy = std::min(v, detail::randomized_round(params.bias * static_cast<double>(v), rng));
      const std::uint64_t light = v - heavy;
      if ((rng() >> 63U) != 0) {
        next.push_back(heavy);
        next.push_back(light);
      } else {
        next.push_back(light);
        next.push_back(heavy);
      }
    }
    volumes = std::move(next);
  }
  return volumes;
}

namespace detail {
inline void assign_records(WorkloadTrace& trace, const LifetimeDistribution& lifetimes, std::uint64_t seed) {
  Rng key_rng(derive_seed(seed, 2));
  Rng life_rng(derive_seed(seed, 3));
  const std::vector<std::uint64_t> keys = random_permutation(trace.params.volume, key_rng);
  trace.records.clear();
  trace.records.reserve(keys.size());
  std::size_t i = 0;
  for (std::size_t b = 0; b < trace.bucket_counts.size(); ++b) {
    for (std::uint64_t j = 0; j < trace.bucket_counts[b]; ++j, ++i) {
      trace.records.push_back({static_cast<std::uint32_t>(b), keys[i], lifetimes.sample(life_rng)});
    }
  }
}
}  // namespace detail

/// BModel(b, l, N) arrivals with a key and a lifetime per record. Keys are a
/// seeded random permutation of [0, N), independent of arrival time.
inline WorkloadTrace generate(const BModelParams& params, const LifetimeDistribution& lifetimes,
                              std::uint64_t bucket_ms = 1) {
  if (bucket_ms == 0) {
    throw ConfigError("bucket duration must be positive");
  }
  WorkloadTrace trace;
  trace.params = params;
  trace.bucket_ms = bucket_ms;
  trace.bucket_counts = bisect_volumes(params);
  detail::assign_records(trace, lifetimes, params.seed);
  return trace;
}

/// Constant traffic: `rate` arrivals in each of `buckets` buckets.
inline WorkloadTrace uniform_trace(std::uint64_t rate, std::uint64_t buckets, const LifetimeDistribution& lifetimes,
                                   std::uint64_t bucket_ms = 1, std::uint64_t seed = 0) {
  if (rate == 0 || buckets == 0 || bucket_ms == 0) {
    throw ConfigError("uniform trace needs positive rate, duration and bucket size");
  }
  WorkloadTrace trace;
  unsigned levels = 0;
  while ((std::uint64_t{1} << levels) < buckets) {
    ++levels;
  }
  trace.params = BModelParams{0.5, levels, rate * buckets, seed};
  trace.bucket_ms = bucket_ms;
  trace.bucket_counts.assign(buckets, rate);
  detail::assign_records(trace, lifetimes, seed);
  return trace;
}

/// Text form: a header line
///   bmodel b=<f> l=<i> N=<i> seed=<i> bucket_ms=<i>
/// then one `<bucket_index> <key> <lifetime_ms|inf>` line per record.
inline void write_trace(std::ostream& os, const WorkloadTrace& trace) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, trace.params.bias);
  os << "bmodel b=" << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << " l=" << trace.params.levels
     << " N=" << trace.params.volume << " seed=" << trace.params.seed << " bucket_ms=" << trace.bucket_ms << '\n';
  for (const TraceRecord& r : trace.records) {
    os << r.bucket << ' ' << r.key << ' ';
    if (r.lifetime_ms == kNeverExpires) {
      os << "inf";
    } else {
      os << r.lifetime_ms;
    }
    os << '\n';
  }
}

/// Inverse of write_trace. The bucket array has 2^l entries (or more if a
/// record names a later bucket).
inline WorkloadTrace read_trace(std::istream& is) {
  auto fail = [](const std::string& why) { throw ConfigError("trace: " + why); };
  std::string line;
  if (!std::getline(is, line)) {
    fail("missing header");
  }
  std::istringstream header(line);
  std::string tag;
  header >> tag;
  if (tag != "bmodel") {
    fail("header must start with 'bmodel'");
  }
  WorkloadTrace trace;
  std::string field;
  int seen = 0;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) {
      fail("bad header field '" + field + "'");
    }
    const std::string name = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    const char* first = value.data();
    const char* last = value.data() + value.size();
    std::from_chars_result r{};
    if (name == "b") {
      r = std::from_chars(first, last, trace.params.bias);
    } else if (name == "l") {
      r = std::from_chars(first, last, trace.params.levels);
    } else if (name == "N") {
      r = std::from_chars(first, last, trace.params.volume);
    } else if (name == "seed") {
      r = std::from_chars(first, last, trace.params.seed);
    } else if (name == "bucket_ms") {
      r = std::from_chars(first, last, trace.bucket_ms);
    } else {
      fail("unknown header field '" + name + "'");
    }
    if (r.ec != std::errc{} || r.ptr != last) {
      fail("bad value for '" + name + "'");
    }
    ++seen;
  }
  if (seen != 5) {
    fail("header needs b, l, N, seed and bucket_ms");
  }
  trace.params.validate();
  trace.bucket_counts.assign(trace.params.bucket_count(), 0);
  std::unordered_set<std::uint64_t> keys;
  std::uint64_t last_bucket = 0;
  while (std::getline(is, line)) {
    if (line.empty()) {
      continue;
    }
    std::istringstream row(line);
    TraceRecord rec;
    std::string lifetime;
    if (!(row >> rec.bucket >> rec.key >> lifetime)) {
      fail("bad record line '" + line + "'");
    }
    if (lifetime == "inf") {
      rec.lifetime_ms = kNeverExpires;
    } else {
      const auto r = std::from_chars(lifetime.data(), lifetime.data() + lifetime.size(), rec.lifetime_ms);
      if (r.ec != std::errc{} || r.ptr != lifetime.data() + lifetime.size() || rec.lifetime_ms == 0) {
        fail("bad lifetime '" + lifetime + "'");
      }
    }
    if (rec.bucket < last_bucket) {
      fail("records must be ordered by bucket");
    }
    last_bucket = rec.bucket;
    if (!keys.insert(rec.key).second) {
      fail("duplicate key " + std::to_string(rec.key));
    }
    if (rec.bucket >= trace.bucket_counts.size()) {
      trace.bucket_counts.resize(rec.bucket + 1, 0);
    }
    ++trace.bucket_counts[rec.bucket];
    trace.records.push_back(rec);
  }
  if (trace.records.size() != trace.params.volume) {
    fail("header announces " + std::to_string(trace.params.volume) + " records, found " +
         std::to_string(trace.records.size()));
  }
  return trace;
}

}  // namespace expire_treap
