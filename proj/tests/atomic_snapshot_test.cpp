#include "expire_treap/atomic_snapshot.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cstdint>
#include <memory>
#include <thread>
#include <vector>

#include "expire_treap/treap.hpp"

namespace {

std::atomic<int> g_alive{0};

struct Tracked {
  explicit Tracked(std::uint64_t v) : value(v), check(~v) { g_alive.fetch_add(1); }
  ~Tracked() { g_alive.fetch_sub(1); }
  Tracked(const Tracked&) = delete;
  Tracked& operator=(const Tracked&) = delete;
  std::uint64_t value;
  std::uint64_t check;
};

using Slot = expire_treap::AtomicSnapshot<std::shared_ptr<const Tracked>>;

}  // namespace

TEST(AtomicSnapshot, DefaultHoldsDefaultValue) {
  Slot slot;
  EXPECT_EQ(slot.load(), nullptr);
}

TEST(AtomicSnapshot, StoreThenLoad) {
  {
    Slot slot(std::make_shared<const Tracked>(1));
    EXPECT_EQ(slot.load()->value, 1U);
    slot.store(std::make_shared<const Tracked>(2));
    const auto held = slot.load();
    EXPECT_EQ(held->value, 2U);
    slot.store(nullptr);
    EXPECT_EQ(held->value, 2U);
    EXPECT_EQ(g_alive.load(), 1);
  }
  EXPECT_EQ(g_alive.load(), 0);
}

TEST(AtomicSnapshot, ConcurrentReadersSeeWholeVersions) {
  constexpr std::uint64_t kVersions = 100'000;
  {
    Slot slot(std::make_shared<const Tracked>(0));
    std::atomic<bool> done{false};
    std::atomic<std::uint64_t> torn{0};
    std::atomic<std::uint64_t> regressions{0};
    std::vector<std::thread> readers;
    for (int t = 0; t < 4; ++t) {
      readers.emplace_back([&] {
        std::uint64_t last = 0;
        while (!done.load(std::memory_order_acquire)) {
          const auto v = slot.load();
          if (v->check != ~v->value) {
            torn.fetch_add(1);
          }
          if (v->value < last) {
            regressions.fetch_add(1);
          }
          last = v->value;
        }
      });
    }
    for (std::uint64_t v = 1; v <= kVersions; ++v) {
      slot.store(std::make_shared<const Tracked>(v));
    }
    done.store(true, std::memory_order_release);
    for (auto& t : readers) {
      t.join();
    }
    EXPECT_EQ(torn.load(), 0U);
    EXPECT_EQ(regressions.load(), 0U);
    EXPECT_EQ(slot.load()->value, kVersions);
    EXPECT_EQ(g_alive.load(), 1);
  }
  EXPECT_EQ(g_alive.load(), 0);
}

TEST(AtomicSnapshot, PublishesTreapVersions) {
  using T = expire_treap::Treap<std::uint64_t, std::uint64_t>;
  T treap;
  expire_treap::AtomicSnapshot<T::snapshot_type> slot;
  std::atomic<bool> done{false};
  std::atomic<std::uint64_t> bad{0};
  std::thread reader([&] {
    while (!done.load()) {
      const auto s = slot.load();
      // Version v holds keys 1..v with payload 2k.
      std::uint64_t expected = 1;
      s.for_each([&](const auto& n) {
        if (n.key() != expected || n.payload() != 2 * n.key()) {
          bad.fetch_add(1);
        }
        ++expected;
      });
      if (expected - 1 != s.size()) {
        bad.fetch_add(1);
      }
    }
  });
  auto s = treap.empty();
  for (std::uint64_t k = 1; k <= 2000; ++k) {
    s = treap.insert(s, k, expire_treap::ExpirationTime::at(k % 97), 2 * k);
    slot.store(s);
  }
  done.store(true);
  reader.join();
  EXPECT_EQ(bad.load(), 0U);
  EXPECT_EQ(slot.load().size(), 2000U);
}
