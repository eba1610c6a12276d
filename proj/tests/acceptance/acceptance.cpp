// Acceptance suite: one PASS/FAIL line per criterion. Run everything, or a
// subset with `--only 1,2,5`. Exit status is non-zero if any selected
// criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "expire_treap/atomic_snapshot.hpp"
#include "expire_treap/bench.hpp"
#include "expire_treap/treap.hpp"
#include "expire_treap/verify.hpp"
#include "expire_treap/workload.hpp"

namespace et = expire_treap;
namespace bench = expire_treap::bench;

namespace {

// Tolerances and sizes, pinned.
constexpr std::uint64_t kOracleSequences = 1000;
constexpr std::uint64_t kOracleOps = 10'000;
constexpr double kOracleBudgetSeconds = 120.0;

constexpr std::uint64_t kBalanceSeeds = 100;
constexpr std::uint64_t kBalanceN = 100'000;
constexpr std::uint64_t kBalanceRequired = 95;
constexpr double kBalanceFactor = 3.0;
constexpr double kBalanceBudgetSeconds = 60.0;

constexpr std::uint64_t kFig8DbSize = 400'000;
constexpr std::uint64_t kFig8Arrivals = 400'000;
constexpr int kFig8Runs = 5;
constexpr double kFig8BareOverhead = 1.35;

constexpr double kMemoryRatio = 1.9;

constexpr std::uint64_t kLookupMinSize = 10'000;
constexpr std::uint64_t kLookupMaxSize = 1'000'000;
constexpr std::uint64_t kLookups = 100'000;
constexpr int kLookupRepeats = 5;
constexpr double kLookupResidual = 0.15;

constexpr std::uint64_t kTraversalMinSize = 100'000;
constexpr std::uint64_t kTraversalMaxSize = 1'000'000;
constexpr unsigned kTraversalRepeats = 7;
constexpr double kTraversalTolerance = 0.25;

constexpr int kBModelDraws = 10'000;
constexpr std::uint64_t kBModelSeeds = 100;

constexpr unsigned kReaders = 8;
constexpr std::uint64_t kTotalLookups = 1'000'000;
constexpr std::uint64_t kWriterUpdates = 100'000;
constexpr std::uint64_t kWindow = 1'000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Criteria 1-4 share one oracle run.
struct OracleRun {
  et::verify::SuiteReport report;
  double seconds = 0.0;
};

const OracleRun& oracle_run() {
  static const OracleRun run = [] {
    OracleRun r;
    const auto t0 = Clock::now();
    et::verify::SequenceOptions opt;
    opt.ops = kOracleOps;
    opt.snapshot_at = kOracleOps / 2;
    opt.invariant_every = 100;
    r.report = et::verify::run_suite(kOracleSequences, 20'240'601, opt);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome oracle_equivalence() {
  const auto& r = oracle_run();
  const auto& t = r.report.totals;
  const bool pass = t.oracle_mismatches == 0 && r.seconds < kOracleBudgetSeconds &&
                    t.ops == kOracleSequences * kOracleOps;
  return {pass, std::to_string(kOracleSequences) + " sequences x " + std::to_string(kOracleOps) +
                    " ops, mismatches=" + std::to_string(t.oracle_mismatches) + ", " + fmt(r.seconds, 1) +
                    " s (budget " + fmt(kOracleBudgetSeconds, 0) + " s)" +
                    (r.report.first_failure.empty() ? "" : "; first: " + r.report.first_failure)};
}

Outcome persistence() {
  const auto& t = oracle_run().report.totals;
  return {t.persistence_failures == 0,
          "snapshot at op " + std::to_string(kOracleOps / 2) + " re-traversed after op " + std::to_string(kOracleOps) +
              " in every run, failures=" + std::to_string(t.persistence_failures)};
}

Outcome invariants() {
  const auto& t = oracle_run().report.totals;
  const bool pass = t.invariant_violations == 0 && t.invariant_checks == kOracleSequences * kOracleOps / 100;
  return {pass, std::to_string(t.invariant_checks) + " full-tree walks, violations=" +
                    std::to_string(t.invariant_violations)};
}

Outcome eagerness() {
  const auto& t = oracle_run().report.totals;
  const bool pass = t.eagerness_violations == 0 && t.infinite_expelled == 0 && t.expel_order_violations == 0;
  return {pass, "survivors with exp<=now=" + std::to_string(t.eagerness_violations) +
                    ", infinite records expelled=" + std::to_string(t.infinite_expelled) +
                    ", out-of-order expels=" + std::to_string(t.expel_order_violations)};
}

Outcome balance() {
  const auto t0 = Clock::now();
  const double bound = kBalanceFactor * std::log2(static_cast<double>(kBalanceN));
  std::uint64_t ok = 0;
  double worst = 0.0;
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < kBalanceSeeds; ++seed) {
    et::Treap<std::uint64_t, std::uint32_t> treap(et::derive_seed(seed, 50));
    const auto hash = et::KeyHasher::hashed(et::derive_seed(seed, 51));
    auto s = treap.empty();
    // Keys and expiration times rise together, the worst case without hashing.
    for (std::uint64_t i = 0; i < kBalanceN; ++i) {
      s = treap.insert(s, hash(i), et::ExpirationTime::at(i), static_cast<std::uint32_t>(i));
    }
    const double mean = s.depth_stats().mean_depth();
    ok += mean <= bound ? 1 : 0;
    worst = std::max(worst, mean);
    sum += mean;
  }
  const double secs = seconds_since(t0);
  const bool pass = ok >= kBalanceRequired && secs < kBalanceBudgetSeconds;
  return {pass, std::to_string(ok) + "/" + std::to_string(kBalanceSeeds) + " seeds with mean depth <= " +
                    fmt(bound, 2) + " (mean " + fmt(sum / kBalanceSeeds, 2) + ", worst " + fmt(worst, 2) + "), " +
                    fmt(secs, 1) + " s"};
}

// Median maintenance time (ms) over kFig8Runs and the last report.
struct Fig8Result {
  double median_ms = 0.0;
  bench::BenchReport last;
};

std::map<std::pair<int, int>, Fig8Result>& fig8_cache() {
  static std::map<std::pair<int, int>, Fig8Result> cache;
  return cache;
}

const Fig8Result& fig8(bench::Structure s, double roe) {
  const auto key = std::pair{static_cast<int>(s), static_cast<int>(std::lround(roe * 100))};
  auto& cache = fig8_cache();
  if (const auto it = cache.find(key); it != cache.end()) {
    return it->second;
  }
  std::vector<double> times;
  Fig8Result result;
  for (int run = 0; run < kFig8Runs; ++run) {
    const auto cfg = bench::roe_scenario(s, kFig8DbSize, roe, kFig8Arrivals, 1000 + static_cast<std::uint64_t>(run));
    result.last = bench::run_scenario(cfg);
    times.push_back(*result.last.metric("maintenance_ms"));
  }
  result.median_ms = median(times);
  return cache.emplace(key, std::move(result)).first->second;
}

Outcome fig8_timing() {
  bool pass = true;
  std::ostringstream os;
  for (const double roe : {0.05, 0.01}) {
    const double treap = fig8(bench::Structure::Treap, roe).median_ms;
    const double avl = fig8(bench::Structure::AvlHeap, roe).median_ms;
    const double rb = fig8(bench::Structure::RedBlackHeap, roe).median_ms;
    pass = pass && treap <= avl && treap <= rb;
    os << "RoE " << fmt(roe * 100, 0) << "%: treap " << fmt(treap, 1) << " ms, avl+heap " << fmt(avl, 1)
       << " ms, rb+heap " << fmt(rb, 1) << " ms; ";
  }
  const double treap = fig8(bench::Structure::Treap, 1.0).median_ms;
  const double avl = fig8(bench::Structure::Avl, 1.0).median_ms;
  const double rb = fig8(bench::Structure::RedBlack, 1.0).median_ms;
  const double cheapest = std::min(avl, rb);
  pass = pass && treap <= kFig8BareOverhead * cheapest;
  os << "RoE 100%: treap " << fmt(treap, 1) << " ms vs cheapest bare " << fmt(cheapest, 1) << " ms (ratio "
     << fmt(treap / cheapest, 2) << ", limit " << fmt(kFig8BareOverhead, 2) << ")";
  return {pass, os.str()};
}

Outcome memory_proxy() {
  bool pass = true;
  std::ostringstream os;
  for (const double roe : {0.05, 0.01}) {
    const double treap = *fig8(bench::Structure::Treap, roe).last.metric("peak_memory_proxy");
    for (const auto s : {bench::Structure::AvlHeap, bench::Structure::RedBlackHeap}) {
      const double other = *fig8(s, roe).last.metric("peak_memory_proxy");
      const double ratio = other / treap;
      pass = pass && ratio >= kMemoryRatio;
      os << bench::to_string(s) << "@" << fmt(roe * 100, 0) << "% " << fmt(ratio, 3) << "x; ";
    }
  }
  os << "(index+heap entries over treap nodes, need >= " << fmt(kMemoryRatio, 2) << ")";
  return {pass, os.str()};
}

Outcome lookup_scaling() {
  std::vector<double> x;
  std::vector<double> y;
  std::ostringstream os;
  for (std::uint64_t n = kLookupMinSize; n <= kLookupMaxSize; n *= 2) {
    std::vector<double> ns;
    for (int r = 0; r < kLookupRepeats; ++r) {
      ns.push_back(bench::lookup_bench(bench::Structure::Treap, n, kLookups, 77 + static_cast<std::uint64_t>(r))
                       .ns_per_lookup());
    }
    x.push_back(std::log2(static_cast<double>(n)));
    y.push_back(median(ns));
    os << n << ":" << fmt(y.back(), 1) << "ns ";
  }
  // Least squares y = a + c * log2(n).
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double c = sxy / sxx;
  const double a = my - c * mx;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, std::fabs(y[i] - (a + c * x[i])) / y[i]);
  }
  os << "| fit " << fmt(a, 1) << " + " << fmt(c, 2) << "*log2(n) ns, worst residual " << fmt(worst * 100, 1)
     << "% (limit " << fmt(kLookupResidual * 100, 0) << "%)";
  return {worst <= kLookupResidual && c >= 0.0, os.str()};
}

Outcome traversal_linearity() {
  std::ostringstream os;
  bool pass = true;
  double previous = 0.0;
  for (std::uint64_t n = kTraversalMinSize; n <= kTraversalMaxSize; n *= 2) {
    const auto r = bench::traversal_bench(bench::Structure::Treap, n, 5, kTraversalRepeats);
    pass = pass && r.visited == n;
    os << n << ":" << fmt(r.seconds * 1000, 2) << "ms";
    if (previous > 0.0) {
      const double ratio = r.seconds / previous;
      pass = pass && std::fabs(ratio - 2.0) <= 2.0 * kTraversalTolerance;
      os << "(x" << fmt(ratio, 2) << ")";
    }
    os << ' ';
    previous = r.seconds;
  }
  os << "| each doubling must scale by 2 +/- " << fmt(kTraversalTolerance * 100, 0) << "%";
  return {pass, os.str()};
}

Outcome bmodel() {
  et::Rng rng(4242);
  int conserved = 0;
  for (int i = 0; i < kBModelDraws; ++i) {
    const et::BModelParams p{0.5 + 0.4999 * et::uniform01(rng), static_cast<unsigned>(et::uniform_below(rng, 13)),
                             et::uniform_below(rng, 10'000'001), rng()};
    const auto v = et::bisect_volumes(p);
    conserved += (v.size() == p.bucket_count() &&
                  std::accumulate(v.begin(), v.end(), std::uint64_t{0}) == p.volume)
                     ? 1
                     : 0;
  }
  int equal = 0;
  int equal_cases = 0;
  for (unsigned l = 0; l <= 12; ++l) {
    for (std::uint64_t per_bucket : {1ULL, 3ULL, 250ULL, 1000ULL}) {
      ++equal_cases;
      const auto v = et::bisect_volumes(et::BModelParams{0.5, l, per_bucket << l, l * 31 + per_bucket});
      equal += std::all_of(v.begin(), v.end(), [&](std::uint64_t x) { return x == per_bucket; }) ? 1 : 0;
    }
  }
  std::vector<double> mean_max;
  for (const double b : {0.5, 0.6, 0.7, 0.8}) {
    double total = 0.0;
    for (std::uint64_t s = 0; s < kBModelSeeds; ++s) {
      const auto v = et::bisect_volumes(et::BModelParams{b, 10, 1'000'000, s});
      total += static_cast<double>(*std::max_element(v.begin(), v.end()));
    }
    mean_max.push_back(total / kBModelSeeds);
  }
  const bool monotone = std::is_sorted(mean_max.begin(), mean_max.end());
  std::ostringstream os;
  os << "conserved " << conserved << "/" << kBModelDraws << ", b=0.5 equal " << equal << "/" << equal_cases
     << ", mean max bucket for b=0.5..0.8: ";
  for (double m : mean_max) {
    os << fmt(m, 0) << ' ';
  }
  return {conserved == kBModelDraws && equal == equal_cases && monotone, os.str()};
}

Outcome concurrency() {
  // Version v holds exactly the keys (v - W, v], key k carrying payload
  // mix(k): each update expires key v - W and inserts key v.
  using T = et::Treap<std::uint64_t, std::uint64_t>;
  T treap(3);
  et::AtomicSnapshot<T::snapshot_type> slot;
  std::atomic<bool> start{false};
  std::atomic<std::uint64_t> torn{0};
  std::atomic<std::uint64_t> lookups{0};
  std::atomic<std::uint64_t> versions_seen{0};

  std::vector<std::thread> readers;
  for (unsigned t = 0; t < kReaders; ++t) {
    readers.emplace_back([&, t] {
      et::Rng rng(et::derive_seed(99, t));
      while (!start.load(std::memory_order_acquire)) {
        std::this_thread::yield();
      }
      std::set<std::uint64_t> seen;
      const std::uint64_t mine = kTotalLookups / kReaders;
      for (std::uint64_t i = 0; i < mine; ++i) {
        const T::snapshot_type s = slot.load();
        std::uint64_t v = 0;
        for (const auto* n = s.root(); n != nullptr; n = n->right()) {
          v = n->key();
        }
        const std::uint64_t expected_size = std::min(v, kWindow);
        const std::uint64_t k = 1 + et::uniform_below(rng, kWriterUpdates);
        const auto* n = s.locate(k);
        const bool should_exist = k <= v && k + kWindow > v;
        const bool consistent = s.size() == expected_size && (n != nullptr) == should_exist &&
                                (n == nullptr || n->payload() == et::KeyHasher::mix(k));
        torn.fetch_add(consistent ? 0 : 1, std::memory_order_relaxed);
        seen.insert(v);
      }
      lookups.fetch_add(mine);
      versions_seen.fetch_add(seen.size());
    });
  }

  auto s = treap.empty();
  start.store(true, std::memory_order_release);
  for (std::uint64_t v = 1; v <= kWriterUpdates; ++v) {
    s = treap.expire(s, et::ExpirationTime::at(v), [](const auto&) {});
    s = treap.insert(s, v, et::ExpirationTime::at(v + kWindow), et::KeyHasher::mix(v));
    slot.store(s);
  }
  for (auto& th : readers) {
    th.join();
  }
  const bool final_ok = s.size() == kWindow && !s.find_violation();
  std::ostringstream os;
  os << kReaders << " readers, " << lookups.load() << " lookups against " << kWriterUpdates
     << " writer updates, torn reads=" << torn.load() << ", distinct versions observed=" << versions_seen.load();
#if defined(__SANITIZE_THREAD__)
  os << ", under ThreadSanitizer";
#endif
  return {torn.load() == 0 && lookups.load() == kTotalLookups && final_ok, os.str()};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "oracle equivalence", oracle_equivalence},
      {2, "persistence", persistence},
      {3, "heap/BST invariants", invariants},
      {4, "eager expiration", eagerness},
      {5, "probabilistic balance", balance},
      {6, "maintenance time vs AVL/red-black", fig8_timing},
      {7, "memory proxy", memory_proxy},
      {8, "lookup scaling", lookup_scaling},
      {9, "traversal linearity", traversal_linearity},
      {10, "b-model generator", bmodel},
      {11, "concurrent readers", concurrency},
  };

  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      std::string item;
      while (std::getline(list, item, ',')) {
        only.insert(std::stoi(item));
      }
    } else {
      std::cerr << "usage: " << argv[0] << " [--only N[,N...]]\n";
      return 2;
    }
  }

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && only.count(c.id) == 0) {
      continue;
    }
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %2d %-36s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
