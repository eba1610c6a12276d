#pragma once

// Expirable table over a persistent treap. A query issued at time now sees
// exactly the records whose expiration time is strictly later than now,
// whether or not the sweep has physically removed the others yet.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "expire_treap/atomic_snapshot.hpp"
#include "expire_treap/errors.hpp"
#include "expire_treap/expiration.hpp"
#include "expire_treap/treap.hpp"

namespace expire_treap {

/// Millisecond clock: wall time, or simulated time that only moves forward
/// when told to.
class Clock {
 public:
  enum class Mode { RealTime, Simulated };

  static Clock real_time() { return Clock(Mode::RealTime, 0); }
  static Clock simulated(std::uint64_t start_ms = 0) { return Clock(Mode::Simulated, start_ms); }

  Clock(const Clock& other) : mode_(other.mode_), sim_ms_(other.sim_ms_.load(std::memory_order_relaxed)) {}
  Clock& operator=(const Clock& other) {
    mode_ = other.mode_;
    sim_ms_.store(other.sim_ms_.load(std::memory_order_relaxed), std::memory_order_relaxed);
    return *this;
  }

  [[nodiscard]] Mode mode() const noexcept { return mode_; }

  [[nodiscard]] std::uint64_t now_ms() const {
    if (mode_ == Mode::Simulated) {
      return sim_ms_.load(std::memory_order_acquire);
    }
    const auto since_epoch = std::chrono::system_clock::now().time_since_epoch();
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(since_epoch).count());
  }

  /// Moves simulated time to `ms`; going backwards is an error.
  void set(std::uint64_t ms) {
    require_simulated();
    if (ms < sim_ms_.load(std::memory_order_relaxed)) {
      throw std::logic_error("simulated clock cannot move backwards");
    }
    sim_ms_.store(ms, std::memory_order_release);
  }

  void advance(std::uint64_t delta_ms) { set(sim_ms_.load(std::memory_order_relaxed) + delta_ms); }

 private:
  Clock(Mode mode, std::uint64_t start) : mode_(mode), sim_ms_(start) {}

  void require_simulated() const {
    if (mode_ != Mode::Simulated) {
      throw std::logic_error("only a simulated clock can be moved");
    }
  }

  Mode mode_;
  std::atomic<std::uint64_t> sim_ms_;
};

/// When the store sweeps expired records out physically.
enum class SweepPolicy {
  Cadence,             ///< every `expire_cadence_ms` of simulated time
  EagerMinExpiration,  ///< whenever time reaches the earliest expiration
};

struct StoreOptions {
  std::uint64_t expire_cadence_ms = 100;
  SweepPolicy policy = SweepPolicy::Cadence;
  std::uint64_t seed = 0x53746f7265ULL;
};

struct PutAck {
  bool inserted = false;  ///< false when the key was already present (no-op)
};

/// Single-writer / multi-reader expirable table. put, erase, tick and
/// run_expiration belong to the writer thread; get, scan, snapshot and now
/// may be called from any thread at any time.
template <class Key, class Payload, class Compare = std::less<Key>>
class ExpirableStore {
 public:
  using treap_type = Treap<Key, Payload, Compare>;
  using snapshot_type = typename treap_type::snapshot_type;
  using record_type = Record<Key, Payload>;
  using ExpirationHook = std::function<void(const record_type&)>;

  explicit ExpirableStore(Clock clock = Clock::simulated(), StoreOptions options = {})
      : clock_(std::move(clock)), options_(options), treap_(options.seed) {
    if (options_.expire_cadence_ms == 0) {
      throw ConfigError("expire cadence must be positive");
    }
    next_sweep_ms_ = clock_.now_ms() + options_.expire_cadence_ms;
  }

  void set_expiration_hook(ExpirationHook hook) { hook_ = std::move(hook); }

  [[nodiscard]] std::uint64_t now_ms() const { return clock_.now_ms(); }
  [[nodiscard]] const StoreOptions& options() const noexcept { return options_; }

  /// Current version; safe to keep and query after later writes.
  [[nodiscard]] snapshot_type snapshot() const { return current_.load(); }

  /// Records physically present, including expired ones not yet swept.
  [[nodiscard]] std::size_t physical_size() const { return snapshot().size(); }

  /// Stores a record; throws AlreadyExpired unless exp is later than now.
  PutAck put(const Key& key, ExpirationTime exp, const Payload& payload) {
    if (exp.is_finite() && exp.millis() <= clock_.now_ms()) {
      throw AlreadyExpired();
    }
    snapshot_type next = treap_.insert(writer_view_, key, exp, payload);
    if (next.same_version(writer_view_)) {
      // The key is present. A record that is expired but not yet swept no
      // longer exists logically: sweep it (through the hook), then insert.
      if (visible(*writer_view_.locate(key), clock_.now_ms())) {
        return PutAck{false};
      }
      run_expiration();
      next = treap_.insert(writer_view_, key, exp, payload);
    }
    publish(std::move(next));
    return PutAck{true};
  }

  /// Explicit delete of a visible record. Returns false when absent.
  bool erase(const Key& key) {
    const auto* node = writer_view_.locate(key);
    if (node == nullptr || !visible(*node, clock_.now_ms())) {
      return false;
    }
    publish(treap_.remove(writer_view_, key));
    return true;
  }

  [[nodiscard]] std::optional<Payload> get(const Key& key) const {
    const std::uint64_t now = clock_.now_ms();
    const snapshot_type s = current_.load();
    const auto* node = s.locate(key);
    if (node == nullptr || !visible(*node, now)) {
      return std::nullopt;
    }
    return node->payload();
  }

  /// Ordered, time-filtered range query; throws InvalidRange when lo > hi.
  [[nodiscard]] std::vector<std::pair<Key, Payload>> scan(const Key& lo, const Key& hi) const {
    const std::uint64_t now = clock_.now_ms();
    const snapshot_type s = current_.load();
    std::vector<std::pair<Key, Payload>> out;
    s.for_each_in_range(lo, hi, [&](const auto& node) {
      if (visible(node, now)) {
        out.emplace_back(node.key(), node.payload());
      }
    });
    return out;
  }

  /// Sweeps every record with expiration <= now, calling the hook once per
  /// expelled record in removal order. Returns the number expelled.
  std::size_t run_expiration() {
    const auto now = ExpirationTime::at(clock_.now_ms());
    std::size_t expelled = 0;
    snapshot_type next = treap_.expire(writer_view_, now, [&](const auto& node) {
      ++expelled;
      if (hook_) {
        hook_(node.record());
      }
    });
    if (expelled > 0) {
      publish(std::move(next));
    }
    return expelled;
  }

  /// Advances a simulated clock by `delta_ms`, sweeping on the way according
  /// to the policy: at each cadence boundary crossed, or at each earliest
  /// expiration time reached. Returns the number of records expelled.
  std::size_t tick(std::uint64_t delta_ms) {
    const std::uint64_t target = clock_.now_ms() + delta_ms;
    std::size_t expelled = 0;
    if (options_.policy == SweepPolicy::Cadence) {
      while (next_sweep_ms_ <= target) {
        clock_.set(next_sweep_ms_);
        expelled += run_expiration();
        next_sweep_ms_ += options_.expire_cadence_ms;
      }
    } else {
      for (;;) {
        const auto min_exp = writer_view_.min_expiration();
        if (!min_exp || min_exp->is_infinite() || min_exp->millis() > target) {
          break;
        }
        clock_.set(std::max(min_exp->millis(), clock_.now_ms()));
        expelled += run_expiration();
      }
    }
    clock_.set(target);
    return expelled;
  }

 private:
  template <class Node>
  static bool visible(const Node& node, std::uint64_t now) {
    const ExpirationTime exp = node.expiration();
    return exp.is_infinite() || exp.millis() > now;
  }

  void publish(snapshot_type next) {
    writer_view_ = next;
    current_.store(std::move(next));
  }

  Clock clock_;
  StoreOptions options_;
  treap_type treap_;
  snapshot_type writer_view_;
  AtomicSnapshot<snapshot_type> current_;
  ExpirationHook hook_;
  std::uint64_t next_sweep_ms_ = 0;
};

}  // namespace expire_treap
