#pragma once

// Randomized equivalence check of the treap against a sorted-map oracle.
// Shared by the command-line `verify` subcommand and the test suites.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "expire_treap/errors.hpp"
#include "expire_treap/expiration.hpp"
#include "expire_treap/random.hpp"
#include "expire_treap/treap.hpp"

namespace expire_treap::verify {

struct SequenceOptions {
  std::uint64_t ops = 10'000;
  std::uint64_t key_universe = 4096;
  std::uint64_t invariant_every = 100;
  std::uint64_t snapshot_at = 5'000;
  std::uint64_t max_range_width = 64;
  std::uint64_t max_lifetime_ms = 2'000;
  /// Probability (in 1/1000) that an inserted record never expires.
  std::uint64_t infinite_permille = 50;
};

/// Failure counters; every field must stay zero.
struct SequenceReport {
  std::uint64_t seed = 0;
  std::uint64_t ops = 0;
  std::uint64_t oracle_mismatches = 0;
  std::uint64_t persistence_failures = 0;
  std::uint64_t invariant_checks = 0;
  std::uint64_t invariant_violations = 0;
  std::uint64_t eagerness_violations = 0;
  std::uint64_t infinite_expelled = 0;
  std::uint64_t expel_order_violations = 0;
  std::string first_failure;

  [[nodiscard]] bool ok() const noexcept {
    return oracle_mismatches == 0 && persistence_failures == 0 && invariant_violations == 0 &&
           eagerness_violations == 0 && infinite_expelled == 0 && expel_order_violations == 0;
  }
};

/// Runs one random sequence of insert / remove / expire / find / range
/// operations and checks every observable result against the oracle.
inline SequenceReport run_sequence(std::uint64_t seed, const SequenceOptions& opt = {}) {
  using Oracle = std::map<std::uint64_t, std::pair<ExpirationTime, std::uint32_t>>;
  using T = Treap<std::uint64_t, std::uint32_t>;
  using Rec = T::record_type;

  SequenceReport report;
  report.seed = seed;
  report.ops = opt.ops;
  auto fail = [&](std::uint64_t& counter, std::uint64_t op, const std::string& what) {
    ++counter;
    if (report.first_failure.empty()) {
      report.first_failure = "seed " + std::to_string(seed) + " op " + std::to_string(op) + ": " + what;
    }
  };

  Rng rng(derive_seed(seed, 7));
  T treap(derive_seed(seed, 8));
  T::snapshot_type s = treap.empty();
  Oracle oracle;
  std::uint64_t clock = 0;
  std::uint32_t next_payload = 0;

  std::optional<T::snapshot_type> saved;
  std::vector<Rec> saved_contents;

  auto oracle_contents = [&] {
    std::vector<Rec> out;
    out.reserve(oracle.size());
    for (const auto& [k, v] : oracle) {
      out.push_back(Rec{k, v.first, v.second});
    }
    return out;
  };

  for (std::uint64_t op = 1; op <= opt.ops; ++op) {
    clock += uniform_below(rng, 21);
    const std::uint64_t key = uniform_below(rng, opt.key_universe);
    const std::uint64_t dice = uniform_below(rng, 100);
    // Half the updates give up the current version and may run in place.
    const bool in_place = uniform_below(rng, 2) == 0;

    if (dice < 40) {
      ExpirationTime exp = ExpirationTime::infinity();
      if (uniform_below(rng, 1000) >= opt.infinite_permille) {
        exp = ExpirationTime::at(clock + uniform_below(rng, opt.max_lifetime_ms + 1));
      }
      const auto payload = next_payload++;
      const std::size_t size_before = s.size();
      if (in_place) {
        s = treap.insert(std::move(s), key, exp, payload);
      } else {
        const T::snapshot_type before = s;
        s = treap.insert(s, key, exp, payload);
        if (s.size() == size_before && !s.same_version(before)) {
          fail(report.oracle_mismatches, op, "duplicate insert produced a new version");
        }
      }
      const bool fresh = oracle.emplace(key, std::pair{exp, payload}).second;
      if (s.size() != size_before + (fresh ? 1 : 0)) {
        fail(report.oracle_mismatches, op, "insert size disagrees for key " + std::to_string(key));
      }
    } else if (dice < 60) {
      bool treap_found = true;
      try {
        s = in_place ? treap.remove(std::move(s), key) : treap.remove(s, key);
      } catch (const NotFound&) {
        treap_found = false;
      }
      if (treap_found != (oracle.erase(key) == 1)) {
        fail(report.oracle_mismatches, op, "remove disagrees on presence of key " + std::to_string(key));
      }
    } else if (dice < 70) {
      const ExpirationTime now = ExpirationTime::at(clock);
      std::vector<Rec> expelled;
      const auto on_expel = [&](const auto& n) { expelled.push_back(n.record()); };
      s = in_place ? treap.expire(std::move(s), now, on_expel) : treap.expire(s, now, on_expel);
      std::vector<Rec> expected;
      for (auto it = oracle.begin(); it != oracle.end();) {
        if (it->second.first.is_finite() && it->second.first <= now) {
          expected.push_back(Rec{it->first, it->second.first, it->second.second});
          it = oracle.erase(it);
        } else {
          ++it;
        }
      }
      for (std::size_t i = 0; i < expelled.size(); ++i) {
        if (expelled[i].expiration.is_infinite()) {
          fail(report.infinite_expelled, op, "record without expiration was expelled");
        }
        if (i > 0 && expelled[i].expiration < expelled[i - 1].expiration) {
          fail(report.expel_order_violations, op, "expelled records out of expiration order");
        }
      }
      std::vector<Rec> got = expelled;
      std::sort(got.begin(), got.end(), [](const Rec& a, const Rec& b) { return a.key < b.key; });
      if (got != expected) {
        fail(report.oracle_mismatches, op, "expire expelled a different record set");
      }
      if (const auto m = s.min_expiration(); m && !(now < *m)) {
        fail(report.eagerness_violations, op, "a record with expiration <= now survived expire");
      }
    } else if (dice < 85) {
      const auto it = oracle.find(key);
      try {
        const std::uint32_t got = s.find(key);
        if (it == oracle.end() || it->second.second != got) {
          fail(report.oracle_mismatches, op, "find returned a wrong payload");
        }
      } catch (const NotFound&) {
        if (it != oracle.end()) {
          fail(report.oracle_mismatches, op, "find missed key " + std::to_string(key));
        }
      }
    } else {
      const std::uint64_t hi = key + uniform_below(rng, opt.max_range_width + 1);
      std::vector<Rec> expected;
      for (auto it = oracle.lower_bound(key); it != oracle.end() && it->first <= hi; ++it) {
        expected.push_back(Rec{it->first, it->second.first, it->second.second});
      }
      if (s.range(key, hi) != expected) {
        fail(report.oracle_mismatches, op, "range result differs");
      }
    }

    if (s.size() != oracle.size()) {
      fail(report.oracle_mismatches, op, "size differs");
    }
    if (opt.invariant_every > 0 && op % opt.invariant_every == 0) {
      ++report.invariant_checks;
      if (const auto bad = s.find_violation()) {
        fail(report.invariant_violations, op, *bad);
      }
      if (s.traverse() != oracle_contents()) {
        fail(report.oracle_mismatches, op, "contents differ");
      }
    }
    if (op == opt.snapshot_at) {
      saved = s;
      saved_contents = s.traverse();
    }
  }

  if (s.traverse() != oracle_contents()) {
    fail(report.oracle_mismatches, opt.ops, "final contents differ");
  }
  if (saved && saved->traverse() != saved_contents) {
    fail(report.persistence_failures, opt.ops, "snapshot changed after later updates");
  }
  return report;
}

struct SuiteReport {
  std::uint64_t sequences = 0;
  std::uint64_t failed_sequences = 0;
  SequenceReport totals;
  std::string first_failure;

  [[nodiscard]] bool ok() const noexcept { return failed_sequences == 0; }
};

/// `sequences` independent runs seeded from `seed`.
inline SuiteReport run_suite(std::uint64_t sequences, std::uint64_t seed, const SequenceOptions& opt = {}) {
  SuiteReport suite;
  suite.sequences = sequences;
  for (std::uint64_t i = 0; i < sequences; ++i) {
    const SequenceReport r = run_sequence(derive_seed(seed, i), opt);
    suite.totals.ops += r.ops;
    suite.totals.oracle_mismatches += r.oracle_mismatches;
    suite.totals.persistence_failures += r.persistence_failures;
    suite.totals.invariant_checks += r.invariant_checks;
    suite.totals.invariant_violations += r.invariant_violations;
    suite.totals.eagerness_violations += r.eagerness_violations;
    suite.totals.infinite_expelled += r.infinite_expelled;
    suite.totals.expel_order_violations += r.expel_order_violations;
    if (!r.ok()) {
      ++suite.failed_sequences;
      if (suite.first_failure.empty()) {
        suite.first_failure = r.first_failure;
      }
    }
  }
  return suite;
}

inline std::string describe(const SuiteReport& s) {
  std::ostringstream os;
  os << "sequences=" << s.sequences << " ops=" << s.totals.ops << " failed=" << s.failed_sequences
     << " oracle_mismatches=" << s.totals.oracle_mismatches << " persistence_failures=" << s.totals.persistence_failures
     << " invariant_checks=" << s.totals.invariant_checks << " invariant_violations=" << s.totals.invariant_violations
     << " eagerness_violations=" << s.totals.eagerness_violations
     << " infinite_expelled=" << s.totals.infinite_expelled
     << " expel_order_violations=" << s.totals.expel_order_violations;
  return os.str();
}

}  // namespace expire_treap::verify
