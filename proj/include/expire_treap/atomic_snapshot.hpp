#pragma once

#include <atomic>
#include <cstdint>
#include <utility>

namespace expire_treap {

/// Lock-free publication slot for snapshots: any number of readers may
/// load() while a writer store()s.
///
/// The published version lives in a reference-counted holder. Its address
/// shares one 64-bit word with a 16-bit count of readers that are between
/// reading the word and taking a reference on the holder (split reference
/// counting). A writer swapping the word transfers that count onto the old
/// holder before dropping its own reference, so a holder is never freed
/// under a reader.
template <class SnapshotT>
class AtomicSnapshot {
 public:
  AtomicSnapshot() : word_(pack(new Holder{})) {}
  explicit AtomicSnapshot(SnapshotT initial) : word_(pack(new Holder{std::move(initial)})) {}

  AtomicSnapshot(const AtomicSnapshot&) = delete;
  AtomicSnapshot& operator=(const AtomicSnapshot&) = delete;

  ~AtomicSnapshot() { unref(holder_of(word_.load(std::memory_order_acquire))); }

  [[nodiscard]] SnapshotT load() const {
    std::uint64_t seen = word_.fetch_add(kOneReader, std::memory_order_acq_rel);
    Holder* h = holder_of(seen);
    h->refs.fetch_add(1, std::memory_order_relaxed);
    std::uint64_t cur = seen + kOneReader;
    for (;;) {
      if (holder_of(cur) != h) {
        // A writer swapped h out and already converted our pending count
        // into a real reference; give that one back.
        h->refs.fetch_sub(1, std::memory_order_acq_rel);
        break;
      }
      if (word_.compare_exchange_weak(cur, cur - kOneReader, std::memory_order_acq_rel,
                                      std::memory_order_acquire)) {
        break;
      }
    }
    SnapshotT copy = h->snapshot;
    unref(h);
    return copy;
  }

  void store(SnapshotT next) {
    auto* fresh = new Holder{std::move(next)};
    const std::uint64_t old = word_.exchange(pack(fresh), std::memory_order_acq_rel);
    Holder* h = holder_of(old);
    h->refs.fetch_add(static_cast<std::int64_t>(old >> kPointerBits), std::memory_order_acq_rel);
    unref(h);
  }

 private:
  struct Holder {
    SnapshotT snapshot{};
    std::atomic<std::int64_t> refs{1};
  };

  static constexpr unsigned kPointerBits = 48;
  static constexpr std::uint64_t kPointerMask = (std::uint64_t{1} << kPointerBits) - 1;
  static constexpr std::uint64_t kOneReader = std::uint64_t{1} << kPointerBits;

  static_assert(sizeof(void*) == 8, "AtomicSnapshot packs a 48-bit address with a reader count");

  static std::uint64_t pack(Holder* h) {
    const auto bits = reinterpret_cast<std::uintptr_t>(h);
    return static_cast<std::uint64_t>(bits);
  }
  static Holder* holder_of(std::uint64_t word) {
    return reinterpret_cast<Holder*>(static_cast<std::uintptr_t>(word & kPointerMask));
  }
  static void unref(Holder* h) {
    if (h->refs.fetch_sub(1, std::memory_order_acq_rel) == 1) {
      delete h;
    }
  }

  mutable std::atomic<std::uint64_t> word_;
};

}  // namespace expire_treap
