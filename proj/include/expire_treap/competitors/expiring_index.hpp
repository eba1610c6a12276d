#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "expire_treap/competitors/expiry_heap.hpp"
#include "expire_treap/errors.hpp"
#include "expire_treap/expiration.hpp"

namespace expire_treap::competitors {

/// Full traversal at the end of every `interval_ms`, removing what expired.
struct PeriodicCleansing {
  std::uint64_t interval_ms = 1000;
};

/// Supporting min-heap; expired records are popped as soon as they are due.
struct EagerHeap {};

using ExpirationStrategy = std::variant<PeriodicCleansing, EagerHeap>;

/// A conventional index (AvlTree, RedBlackTree, HashIndex) adapted to
/// expiration times by one of the two strategies. The heap exists iff the
/// strategy is EagerHeap and holds exactly the finite-expiration records.
template <class Index>
class ExpiringIndex {
 public:
  using key_type = std::remove_cvref_t<decltype(std::declval<typename Index::Node&>().key)>;
  using heap_type = ExpiryHeap<key_type>;

  explicit ExpiringIndex(ExpirationStrategy strategy) : strategy_(strategy) {
    if (const auto* p = std::get_if<PeriodicCleansing>(&strategy_)) {
      if (p->interval_ms == 0) {
        throw ConfigError("cleansing interval must be positive");
      }
      next_cleanse_ms_ = p->interval_ms;
    } else {
      heap_.emplace();
    }
  }

  [[nodiscard]] const Index& index() const noexcept { return index_; }
  [[nodiscard]] const ExpirationStrategy& strategy() const noexcept { return strategy_; }
  [[nodiscard]] bool eager() const noexcept { return heap_.has_value(); }
  [[nodiscard]] std::size_t size() const noexcept { return index_.size(); }
  [[nodiscard]] std::size_t heap_entries() const noexcept { return heap_ ? heap_->size() : 0; }
  [[nodiscard]] std::size_t tombstones() const noexcept { return heap_ ? heap_->tombstones() : 0; }
  [[nodiscard]] const heap_type* heap() const noexcept { return heap_ ? &*heap_ : nullptr; }

  template <class Key, class Payload>
  bool insert(const Key& key, ExpirationTime exp, const Payload& payload) {
    if (!index_.insert(key, exp, payload)) {
      return false;
    }
    if (heap_ && exp.is_finite()) {
      heap_->push(exp, key);
    }
    return true;
  }

  /// Explicit delete; throws NotFound.
  template <class Key>
  void remove(const Key& key) {
    const ExpirationTime exp = index_.remove(key);
    if (heap_ && exp.is_finite()) {
      heap_->erase(exp, key);
    }
  }

  /// One strategy step at time `now`. Eager: pops every due heap entry and
  /// deletes its key from the index. Periodic: if an interval boundary has
  /// been reached, cleanses by full traversal; otherwise does nothing.
  /// Calls on_expel(key, exp) per removed record; returns the count.
  template <class OnExpel>
  std::size_t step(std::uint64_t now, OnExpel&& on_expel) {
    if (heap_) {
      return heap_->pop_due(now, [&](const auto& key, ExpirationTime exp) {
        index_.remove(key);
        on_expel(key, exp);
      });
    }
    if (now < next_cleanse_ms_) {
      return 0;
    }
    const std::uint64_t interval = std::get<PeriodicCleansing>(strategy_).interval_ms;
    next_cleanse_ms_ = (now / interval + 1) * interval;
    return cleanse(now, on_expel);
  }

  std::size_t step(std::uint64_t now) {
    return step(now, [](const auto&, ExpirationTime) {});
  }

  /// Full-traversal removal of every record with expiration <= now.
  template <class OnExpel>
  std::size_t cleanse(std::uint64_t now, OnExpel&& on_expel) {
    std::vector<std::pair<key_type, ExpirationTime>> due;
    index_.for_each([&](const auto& key, ExpirationTime exp, const auto&) {
      if (exp.is_finite() && exp.millis() <= now) {
        due.emplace_back(key, exp);
      }
    });
    for (const auto& [key, exp] : due) {
      index_.remove(key);
      if (heap_) {
        heap_->erase(exp, key);
      }
      on_expel(key, exp);
    }
    return due.size();
  }

  /// Heap and index agree: every live heap entry names an indexed key with
  /// that expiration, and the heap has one live entry per finite record.
  [[nodiscard]] std::optional<std::string> find_violation() const {
    if (auto bad = index_.find_violation()) {
      return bad;
    }
    if (!heap_) {
      return std::nullopt;
    }
    if (!heap_->heap_ordered()) {
      return "heap order violated";
    }
    std::size_t finite = 0;
    index_.for_each([&](const auto&, ExpirationTime exp, const auto&) { finite += exp.is_finite() ? 1 : 0; });
    if (heap_->live_size() != finite) {
      return "heap holds " + std::to_string(heap_->live_size()) + " live entries for " + std::to_string(finite) +
             " finite records";
    }
    for (const auto& e : heap_->entries()) {
      if (heap_->is_tombstoned(e)) {
        continue;
      }
      const auto* n = index_.locate(e.key);
      if (n == nullptr || n->expiration != ExpirationTime::at(e.expiration)) {
        return "heap entry without matching index record";
      }
    }
    return std::nullopt;
  }

 private:
  ExpirationStrategy strategy_;
  Index index_;
  std::optional<heap_type> heap_;
  std::uint64_t next_cleanse_ms_ = 0;
};

}  // namespace expire_treap::competitors
