// A session table whose entries vanish on their own: readers query the
// published snapshot while a writer inserts sessions and advances time.

#include <atomic>
#include <cstdint>
#include <iostream>
#include <string>
#include <thread>

#include "expire_treap/store.hpp"

int main() {
  using namespace expire_treap;
  StoreOptions options;
  options.policy = SweepPolicy::EagerMinExpiration;
  ExpirableStore<std::uint64_t, std::string> sessions(Clock::simulated(0), options);

  std::atomic<std::uint64_t> evicted{0};
  sessions.set_expiration_hook([&](const auto&) { evicted.fetch_add(1, std::memory_order_relaxed); });

  std::atomic<bool> started{false};
  std::atomic<bool> done{false};
  std::uint64_t reads = 0;
  std::thread reader([&] {
    started.store(true);
    while (!done.load()) {
      const auto snap = sessions.snapshot();
      for (std::uint64_t user = 0; user < 64; ++user) {
        reads += snap.contains(user) ? 1 : 0;
      }
    }
  });

  while (!started.load()) {
    std::this_thread::yield();
  }
  for (std::uint64_t second = 0; second < 600; ++second) {
    const std::uint64_t user = (second * 37) % 64;
    sessions.put(user, ExpirationTime::at(sessions.now_ms() + 30'000), "user-" + std::to_string(user));
    sessions.tick(1000);
    std::this_thread::yield();
  }
  done.store(true);
  reader.join();

  std::cout << "live sessions: " << sessions.scan(0, 63).size() << ", evicted: " << evicted.load()
            << ", reader hits: " << reads << '\n';
}
