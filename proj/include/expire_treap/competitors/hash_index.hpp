#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "expire_treap/errors.hpp"
#include "expire_treap/expiration.hpp"

namespace expire_treap::competitors {

/// Default hash: the bijective 64-bit mixer, so bucket choice does not
/// depend on low key bits alone.
struct MixHash {
  std::size_t operator()(std::uint64_t k) const noexcept { return static_cast<std::size_t>(KeyHasher::mix(k)); }
};

/// Separately chained hash table. The bucket array doubles when the load
/// factor exceeds 3/4 and halves when it drops below 1/8 (never below the
/// initial capacity).
template <class Key, class Payload, class Hash = MixHash>
class HashIndex {
 public:
  static constexpr std::size_t kMinBuckets = 16;
  static constexpr double kGrowLoad = 0.75;
  static constexpr double kShrinkLoad = 0.125;

  struct Node {
    Key key;
    ExpirationTime expiration;
    Payload payload;
    std::unique_ptr<Node> next;
  };

  HashIndex() : buckets_(kMinBuckets) {}
  HashIndex(HashIndex&&) noexcept = default;
  HashIndex& operator=(HashIndex&&) noexcept = default;

  ~HashIndex() {
    // Unlink chains iteratively; a long chain must not recurse.
    for (auto& head : buckets_) {
      while (head) {
        head = std::move(head->next);
      }
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return size_; }
  [[nodiscard]] std::size_t bucket_count() const noexcept { return buckets_.size(); }
  [[nodiscard]] double load_factor() const noexcept {
    return static_cast<double>(size_) / static_cast<double>(buckets_.size());
  }

  bool insert(const Key& key, ExpirationTime exp, const Payload& payload) {
    auto& head = buckets_[slot(key)];
    for (const Node* n = head.get(); n != nullptr; n = n->next.get()) {
      if (n->key == key) {
        return false;
      }
    }
    head = std::make_unique<Node>(Node{key, exp, payload, std::move(head)});
    ++size_;
    if (load_factor() > kGrowLoad) {
      resize(buckets_.size() * 2);
    }
    return true;
  }

  ExpirationTime remove(const Key& key) {
    std::unique_ptr<Node>* link = &buckets_[slot(key)];
    while (*link && (*link)->key != key) {
      link = &(*link)->next;
    }
    if (!*link) {
      throw NotFound();
    }
    const ExpirationTime exp = (*link)->expiration;
    *link = std::move((*link)->next);
    --size_;
    if (buckets_.size() > kMinBuckets && load_factor() < kShrinkLoad) {
      resize(buckets_.size() / 2);
    }
    return exp;
  }

  [[nodiscard]] const Node* locate(const Key& key) const {
    for (const Node* n = buckets_[slot(key)].get(); n != nullptr; n = n->next.get()) {
      if (n->key == key) {
        return n;
      }
    }
    return nullptr;
  }

  [[nodiscard]] const Payload& find(const Key& key) const {
    const Node* n = locate(key);
    if (n == nullptr) {
      throw NotFound();
    }
    return n->payload;
  }

  /// Visits every record in bucket order (not key order).
  template <class Visit>
  void for_each(Visit&& visit) const {
    for (const auto& head : buckets_) {
      for (const Node* n = head.get(); n != nullptr; n = n->next.get()) {
        visit(n->key, n->expiration, n->payload);
      }
    }
  }

  [[nodiscard]] std::optional<std::string> find_violation() const {
    std::size_t count = 0;
    for (std::size_t b = 0; b < buckets_.size(); ++b) {
      for (const Node* n = buckets_[b].get(); n != nullptr; n = n->next.get()) {
        ++count;
        if (slot(n->key) != b) {
          return "hash: record in wrong bucket";
        }
      }
    }
    if (count != size_) {
      return "hash: size mismatch";
    }
    if (load_factor() > kGrowLoad) {
      return "hash: load factor above bound";
    }
    return std::nullopt;
  }

 private:
  [[nodiscard]] std::size_t slot(const Key& key) const { return Hash{}(key) & (buckets_.size() - 1); }

  void resize(std::size_t count) {
    std::vector<std::unique_ptr<Node>> old = std::move(buckets_);
    buckets_ = std::vector<std::unique_ptr<Node>>(count);
    for (auto& head : old) {
      while (head) {
        std::unique_ptr<Node> n = std::move(head);
        head = std::move(n->next);
        auto& dst = buckets_[slot(n->key)];
        n->next = std::move(dst);
        dst = std::move(n);
      }
    }
  }

  std::vector<std::unique_ptr<Node>> buckets_;
  std::size_t size_ = 0;
};

}  // namespace expire_treap::competitors
