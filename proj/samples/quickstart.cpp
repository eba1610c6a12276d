// Builds the small treap from the introduction, expires it at time 1 and
// shows that the older version is still intact.

#include <cstdint>
#include <iostream>

#include "expire_treap/treap.hpp"

int main() {
  using expire_treap::ExpirationTime;
  expire_treap::Treap<std::uint64_t, char> treap;

  auto v0 = treap.empty();
  const std::pair<std::uint64_t, std::uint64_t> records[] = {{1, 7}, {2, 6}, {3, 6}, {4, 0},
                                                              {5, 7}, {6, 6}, {7, 8}};
  for (const auto& [key, exp] : records) {
    v0 = treap.insert(v0, key, ExpirationTime::at(exp), static_cast<char>('a' + key - 1));
  }
  std::cout << "after inserts:\n";
  v0.dump(std::cout);

  const auto [v1, expelled] = treap.expire(v0, ExpirationTime::at(1));
  std::cout << "expired at 1:";
  for (const auto& r : expelled) {
    std::cout << " key=" << r.key << " exp=" << r.expiration;
  }
  std::cout << "\nafter expiration:\n";
  v1.dump(std::cout);

  std::cout << "old version still has key 4: " << std::boolalpha << v0.contains(4) << '\n';
  std::cout << "keys 2..5 now:";
  for (const auto& r : v1.range(2, 5)) {
    std::cout << ' ' << r.key << '=' << r.payload;
  }
  std::cout << '\n';
}
