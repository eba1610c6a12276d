#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "expire_treap/expiration.hpp"

namespace expire_treap::competitors {

/// Array-embedded binary min-heap of (finite expiration, key) pairs that
/// supports an index structure with eager expiration.
///
/// Deleting an arbitrary entry is done lazily: erase() records a tombstone
/// and the entry is skipped when it reaches the top. Once tombstones make up
/// more than half of the array the heap is rebuilt without them.
template <class Key, class Hash = std::hash<Key>>
class ExpiryHeap {
 public:
  struct Entry {
    std::uint64_t expiration;
    Key key;
  };

  /// Entries in the array, tombstoned ones included.
  [[nodiscard]] std::size_t size() const noexcept { return heap_.size(); }
  [[nodiscard]] std::size_t tombstones() const noexcept { return tombstone_count_; }
  [[nodiscard]] std::size_t live_size() const noexcept { return heap_.size() - tombstone_count_; }
  [[nodiscard]] bool empty() const noexcept { return live_size() == 0; }

  void push(ExpirationTime exp, const Key& key) {
    if (exp.is_infinite()) {
      throw std::invalid_argument("expiry heap holds finite expiration times only");
    }
    heap_.push_back({exp.millis(), key});
    sift_up(heap_.size() - 1);
  }

  /// Marks the entry (key, exp) as deleted.
  void erase(ExpirationTime exp, const Key& key) {
    ++tombstoned_[Tombstone{exp.millis(), key}];
    ++tombstone_count_;
    if (tombstone_count_ * 2 > heap_.size()) {
      rebuild();
    }
  }

  /// Earliest live entry; precondition !empty().
  [[nodiscard]] const Entry& top() {
    drop_dead_top();
    return heap_.front();
  }

  /// Pops every live entry with expiration <= now, calling on_due(key, exp)
  /// in expiration order. Returns how many were popped.
  template <class OnDue>
  std::size_t pop_due(std::uint64_t now, OnDue&& on_due) {
    std::size_t popped = 0;
    for (;;) {
      drop_dead_top();
      if (heap_.empty() || heap_.front().expiration > now) {
        return popped;
      }
      const Entry e = heap_.front();
      pop_front();
      on_due(e.key, ExpirationTime::at(e.expiration));
      ++popped;
    }
  }

  /// Raw array, for invariant checks.
  [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return heap_; }

  [[nodiscard]] bool is_tombstoned(const Entry& e) const {
    const auto it = tombstoned_.find(Tombstone{e.expiration, e.key});
    return it != tombstoned_.end() && it->second > 0;
  }

  [[nodiscard]] bool heap_ordered() const {
    for (std::size_t i = 1; i < heap_.size(); ++i) {
      if (heap_[i].expiration < heap_[(i - 1) / 2].expiration) {
        return false;
      }
    }
    return true;
  }

  void clear() {
    heap_.clear();
    tombstoned_.clear();
    tombstone_count_ = 0;
  }

 private:
  struct Tombstone {
    std::uint64_t expiration;
    Key key;
    friend bool operator==(const Tombstone&, const Tombstone&) = default;
  };
  struct TombstoneHash {
    std::size_t operator()(const Tombstone& t) const {
      return Hash{}(t.key) ^ static_cast<std::size_t>(KeyHasher::mix(t.expiration));
    }
  };

  void drop_dead_top() {
    while (!heap_.empty() && tombstone_count_ > 0) {
      const auto it = tombstoned_.find(Tombstone{heap_.front().expiration, heap_.front().key});
      if (it == tombstoned_.end()) {
        return;
      }
      if (--it->second == 0) {
        tombstoned_.erase(it);
      }
      --tombstone_count_;
      pop_front();
    }
  }

  void pop_front() {
    heap_.front() = heap_.back();
    heap_.pop_back();
    if (!heap_.empty()) {
      sift_down(0);
    }
  }

  void rebuild() {
    std::vector<Entry> kept;
    kept.reserve(heap_.size() - tombstone_count_);
    for (const Entry& e : heap_) {
      const auto it = tombstoned_.find(Tombstone{e.expiration, e.key});
      if (it != tombstoned_.end() && it->second > 0) {
        --it->second;
        continue;
      }
      kept.push_back(e);
    }
    heap_ = std::move(kept);
    tombstoned_.clear();
    tombstone_count_ = 0;
    for (std::size_t i = heap_.size() / 2; i-- > 0;) {
      sift_down(i);
    }
  }

  void sift_up(std::size_t i) {
    const Entry moving = heap_[i];
    while (i > 0) {
      const std::size_t parent = (i - 1) / 2;
      if (heap_[parent].expiration <= moving.expiration) {
        break;
      }
      heap_[i] = heap_[parent];
      i = parent;
    }
    heap_[i] = moving;
  }

  void sift_down(std::size_t i) {
    const std::size_t n = heap_.size();
    const Entry moving = heap_[i];
    for (;;) {
      std::size_t child = 2 * i + 1;
      if (child >= n) {
        break;
      }
      if (child + 1 < n && heap_[child + 1].expiration < heap_[child].expiration) {
        ++child;
      }
      if (moving.expiration <= heap_[child].expiration) {
        break;
      }
      heap_[i] = heap_[child];
      i = child;
    }
    heap_[i] = moving;
  }

  std::vector<Entry> heap_;
  std::unordered_map<Tombstone, std::size_t, TombstoneHash> tombstoned_;
  std::size_t tombstone_count_ = 0;
};

}  // namespace expire_treap::competitors
