#include "expire_treap/store.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cstdint>
#include <map>
#include <random>
#include <thread>
#include <vector>

using expire_treap::AlreadyExpired;
using expire_treap::Clock;
using expire_treap::ExpirationTime;
using expire_treap::InvalidRange;
using expire_treap::StoreOptions;
using expire_treap::SweepPolicy;

using Store = expire_treap::ExpirableStore<std::uint64_t, std::uint32_t>;

namespace {
ExpirationTime at(std::uint64_t ms) { return ExpirationTime::at(ms); }
}  // namespace

TEST(Clock, SimulatedOnlyMovesForward) {
  Clock c = Clock::simulated(10);
  EXPECT_EQ(c.now_ms(), 10U);
  c.advance(5);
  EXPECT_EQ(c.now_ms(), 15U);
  EXPECT_THROW(c.set(3), std::logic_error);
  Clock real = Clock::real_time();
  EXPECT_GT(real.now_ms(), 1'600'000'000'000ULL);
  EXPECT_THROW(real.advance(1), std::logic_error);
}

TEST(Store, RecordVisibleStrictlyBeforeItsExpiration) {
  Store store(Clock::simulated(0));
  EXPECT_TRUE(store.put(1, at(50), 7).inserted);
  EXPECT_EQ(store.get(1), 7U);
  store.tick(49);
  EXPECT_EQ(store.get(1), 7U);
  store.tick(1);  // now == 50: expired, even if not yet swept
  EXPECT_FALSE(store.get(1).has_value());
  EXPECT_TRUE(store.scan(0, 10).empty());
}

TEST(Store, PutRejectsPastExpirations) {
  Store store(Clock::simulated(100));
  EXPECT_THROW(store.put(1, at(100), 0), AlreadyExpired);
  EXPECT_THROW(store.put(1, at(3), 0), AlreadyExpired);
  EXPECT_TRUE(store.put(1, ExpirationTime::infinity(), 0).inserted);
}

TEST(Store, DuplicatePutIsANoOp) {
  Store store(Clock::simulated(0));
  EXPECT_TRUE(store.put(1, at(100), 1).inserted);
  EXPECT_FALSE(store.put(1, at(500), 2).inserted);
  EXPECT_EQ(store.get(1), 1U);
}

TEST(Store, PutOverExpiredUnsweptRecordFiresHookFirst) {
  StoreOptions opt;
  opt.expire_cadence_ms = 1000;
  Store store(Clock::simulated(0), opt);
  std::vector<std::uint64_t> expired;
  store.set_expiration_hook([&](const auto& r) { expired.push_back(r.key); });
  store.put(1, at(10), 1);
  store.tick(20);  // before the first sweep
  EXPECT_EQ(store.physical_size(), 1U);
  EXPECT_TRUE(store.put(1, at(100), 2).inserted);
  EXPECT_EQ(expired, (std::vector<std::uint64_t>{1}));
  EXPECT_EQ(store.get(1), 2U);
}

TEST(Store, EraseOnlyVisibleRecords) {
  Store store(Clock::simulated(0));
  store.put(1, at(10), 1);
  store.put(2, at(100), 2);
  store.tick(10);
  EXPECT_FALSE(store.erase(1));
  EXPECT_TRUE(store.erase(2));
  EXPECT_FALSE(store.erase(2));
  EXPECT_FALSE(store.erase(3));
}

TEST(Store, ScanIsOrderedAndFiltered) {
  Store store(Clock::simulated(0));
  for (std::uint64_t k = 0; k < 10; ++k) {
    store.put(k, k % 2 == 0 ? at(5) : at(500), static_cast<std::uint32_t>(k));
  }
  store.tick(6);
  const auto got = store.scan(2, 7);
  ASSERT_EQ(got.size(), 3U);
  EXPECT_EQ(got[0].first, 3U);
  EXPECT_EQ(got[1].first, 5U);
  EXPECT_EQ(got[2].first, 7U);
  EXPECT_THROW((void)store.scan(7, 2), InvalidRange);
}

TEST(Store, CadenceSweepsAtBoundaries) {
  StoreOptions opt;
  opt.expire_cadence_ms = 100;
  Store store(Clock::simulated(0), opt);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> fired;  // (key, time)
  store.set_expiration_hook([&](const auto& r) { fired.emplace_back(r.key, store.now_ms()); });
  store.put(1, at(30), 0);
  store.put(2, at(130), 0);
  store.put(3, ExpirationTime::infinity(), 0);
  EXPECT_EQ(store.tick(99), 0U);
  EXPECT_EQ(store.physical_size(), 3U);
  EXPECT_EQ(store.tick(151), 2U);
  EXPECT_EQ(fired, (std::vector<std::pair<std::uint64_t, std::uint64_t>>{{1, 100}, {2, 200}}));
  EXPECT_EQ(store.physical_size(), 1U);
  EXPECT_EQ(store.now_ms(), 250U);
}

TEST(Store, EagerPolicySweepsAtEachExpiration) {
  StoreOptions opt;
  opt.policy = SweepPolicy::EagerMinExpiration;
  Store store(Clock::simulated(0), opt);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> fired;
  store.set_expiration_hook([&](const auto& r) { fired.emplace_back(r.key, store.now_ms()); });
  store.put(1, at(30), 0);
  store.put(2, at(70), 0);
  store.put(3, at(70), 0);
  store.put(4, at(500), 0);
  EXPECT_EQ(store.tick(100), 3U);
  ASSERT_EQ(fired.size(), 3U);
  EXPECT_EQ(fired[0], (std::pair<std::uint64_t, std::uint64_t>{1, 30}));
  EXPECT_EQ(fired[1].second, 70U);
  EXPECT_EQ(fired[2].second, 70U);
  EXPECT_EQ(store.physical_size(), 1U);
}

TEST(Store, HookFiresOncePerRecord) {
  Store store(Clock::simulated(0));
  std::map<std::uint64_t, int> fired;
  store.set_expiration_hook([&](const auto& r) { ++fired[r.key]; });
  std::mt19937_64 rng(1);
  for (std::uint64_t k = 0; k < 2000; ++k) {
    store.put(k, at(store.now_ms() + 1 + rng() % 5000), 0);
    store.tick(rng() % 3);
  }
  store.tick(10'000);
  EXPECT_EQ(fired.size(), 2000U);
  for (const auto& [k, n] : fired) {
    ASSERT_EQ(n, 1) << k;
  }
  EXPECT_EQ(store.physical_size(), 0U);
}

TEST(Store, SnapshotIsStableAcrossWrites) {
  Store store(Clock::simulated(0));
  store.put(1, at(100), 1);
  const auto snap = store.snapshot();
  store.put(2, at(100), 2);
  store.tick(200);
  EXPECT_EQ(snap.size(), 1U);
  EXPECT_TRUE(snap.contains(1));
  EXPECT_EQ(store.physical_size(), 0U);
}

TEST(Store, ReadersRunAlongsideTheWriter) {
  Store store(Clock::simulated(0));
  std::atomic<bool> done{false};
  std::atomic<std::uint64_t> bad{0};
  std::thread reader([&] {
    while (!done.load()) {
      // Every visible key k carries payload 3k.
      for (const auto& [k, v] : store.scan(0, 1000)) {
        if (v != 3 * k) {
          bad.fetch_add(1);
        }
      }
    }
  });
  for (std::uint64_t k = 0; k < 1000; ++k) {
    store.put(k, at(store.now_ms() + 50), static_cast<std::uint32_t>(3 * k));
    store.tick(1);
  }
  done.store(true);
  reader.join();
  EXPECT_EQ(bad.load(), 0U);
}

TEST(Store, RejectsZeroCadence) {
  StoreOptions opt;
  opt.expire_cadence_ms = 0;
  EXPECT_THROW(Store(Clock::simulated(0), opt), expire_treap::ConfigError);
}

TEST(Store, InfiniteRecordsSurviveAnyAdvance) {
  Store store(Clock::simulated(0));
  store.put(1, ExpirationTime::infinity(), 5);
  store.tick(1'000'000'000);
  EXPECT_EQ(store.get(1), 5U);
  EXPECT_EQ(store.run_expiration(), 0U);
}

TEST(Store, IntroExampleExpiresOneRecordAtTimeOne) {
  // Key 4 expires at 1 rather than 0: the store refuses a record that is
  // already expired when it is put.
  StoreOptions opt;
  opt.expire_cadence_ms = 1'000'000;
  Store store(Clock::simulated(0), opt);
  const std::pair<std::uint64_t, std::uint64_t> recs[] = {{1, 7}, {2, 6}, {3, 6}, {4, 1}, {5, 7}, {6, 6}, {7, 8}};
  for (const auto& [k, e] : recs) {
    store.put(k, at(e), static_cast<std::uint32_t>(k));
  }
  std::vector<std::uint64_t> fired;
  store.set_expiration_hook([&](const auto& r) { fired.push_back(r.key); });
  const auto before = store.snapshot();
  EXPECT_EQ(store.run_expiration(), 0U);
  EXPECT_TRUE(store.snapshot().same_version(before));
  store.tick(1);
  EXPECT_EQ(store.run_expiration(), 1U);
  EXPECT_EQ(fired, (std::vector<std::uint64_t>{4}));
  EXPECT_EQ(store.physical_size(), 6U);
}

TEST(Store, RandomPutsMatchTimeFilteredOracle) {
  Store store(Clock::simulated(0));
  std::map<std::uint64_t, std::pair<ExpirationTime, std::uint32_t>> oracle;
  std::mt19937_64 rng(77);
  for (std::uint32_t i = 0; i < 1000; ++i) {
    const std::uint64_t now = store.now_ms();
    const std::uint64_t key = rng() % 5000;
    const ExpirationTime exp = rng() % 10 == 0 ? ExpirationTime::infinity() : at(now + 1 + rng() % 400);
    const auto it = oracle.find(key);
    const bool visible = it != oracle.end() && (it->second.first.is_infinite() || it->second.first.millis() > now);
    const bool inserted = store.put(key, exp, i).inserted;
    EXPECT_EQ(inserted, !visible);
    if (inserted) {
      oracle[key] = {exp, i};
    }
    store.tick(rng() % 4);
    if (i % 50 == 0) {
      const std::uint64_t t = store.now_ms();
      for (std::uint64_t k = 0; k < 5000; k += 7) {
        const auto o = oracle.find(k);
        const bool live = o != oracle.end() && (o->second.first.is_infinite() || o->second.first.millis() > t);
        ASSERT_EQ(store.get(k).has_value(), live);
        if (live) {
          ASSERT_EQ(*store.get(k), o->second.second);
        }
      }
      std::vector<std::uint64_t> expected;
      for (const auto& [k, v] : oracle) {
        if (k >= 100 && k <= 2000 && (v.first.is_infinite() || v.first.millis() > t)) {
          expected.push_back(k);
        }
      }
      std::vector<std::uint64_t> got;
      for (const auto& [k, v] : store.scan(100, 2000)) {
        got.push_back(k);
      }
      ASSERT_EQ(got, expected);
    }
  }
  std::size_t expelled = 0;
  store.set_expiration_hook([&](const auto&) { ++expelled; });
  const std::size_t before = store.physical_size();
  store.tick(1000);
  std::size_t infinite = 0;
  for (const auto& [k, v] : oracle) {
    infinite += v.first.is_infinite() ? 1 : 0;
  }
  EXPECT_EQ(before - expelled, infinite);
  EXPECT_EQ(store.physical_size(), infinite);
}

TEST(Store, EmptyStore) {
  Store store(Clock::simulated(0));
  EXPECT_FALSE(store.get(1).has_value());
  EXPECT_TRUE(store.scan(0, 100).empty());
  EXPECT_EQ(store.run_expiration(), 0U);
}
