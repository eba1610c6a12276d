#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "expire_treap/errors.hpp"
#include "expire_treap/expiration.hpp"

namespace expire_treap::competitors {

// Mutable height-balanced search tree (Adelson-Velsky and Landis).
template <class Key, class Payload, class Compare = std::less<Key>>
class AvlTree {
 public:
  struct Node {
    Key key;
    ExpirationTime expiration;
    Payload payload;
    std::unique_ptr<Node> left;
    std::unique_ptr<Node> right;
    std::int8_t height = 1;
  };

  AvlTree() = default;
  AvlTree(AvlTree&&) noexcept = default;
  AvlTree& operator=(AvlTree&&) noexcept = default;

  [[nodiscard]] std::size_t size() const noexcept { return size_; }

  /// Returns false (and changes nothing) when the key is already present.
  bool insert(const Key& key, ExpirationTime exp, const Payload& payload) {
    bool inserted = false;
    root_ = insert_at(std::move(root_), key, exp, payload, inserted);
    size_ += inserted ? 1 : 0;
    return inserted;
  }

  /// Removes `key` and returns its expiration time; throws NotFound.
  ExpirationTime remove(const Key& key) {
    std::optional<ExpirationTime> removed;
    root_ = remove_at(std::move(root_), key, removed);
    if (!removed) {
      throw NotFound();
    }
    --size_;
    return *removed;
  }

  [[nodiscard]] const Node* locate(const Key& key) const {
    const Compare less{};
    const Node* n = root_.get();
    while (n != nullptr) {
      if (less(key, n->key)) {
        n = n->left.get();
      } else if (less(n->key, key)) {
        n = n->right.get();
      } else {
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

  template <class Visit>
  void for_each(Visit&& visit) const {
    std::vector<const Node*> stack;
    const Node* n = root_.get();
    while (n != nullptr || !stack.empty()) {
      while (n != nullptr) {
        stack.push_back(n);
        n = n->left.get();
      }
      n = stack.back();
      stack.pop_back();
      visit(n->key, n->expiration, n->payload);
      n = n->right.get();
    }
  }

  [[nodiscard]] int height() const noexcept { return height_of(root_.get()); }

  /// Checks key order, stored heights and the balance factor bound.
  [[nodiscard]] std::optional<std::string> find_violation() const {
    const Compare less{};
    std::size_t count = 0;
    std::optional<std::string> bad;
    std::function<int(const Node*, const Key*, const Key*)> walk = [&](const Node* n, const Key* lo,
                                                                       const Key* hi) -> int {
      if (n == nullptr || bad) {
        return 0;
      }
      ++count;
      if ((lo != nullptr && !less(*lo, n->key)) || (hi != nullptr && !less(n->key, *hi))) {
        bad = "avl: key order violated";
      }
      const int lh = walk(n->left.get(), lo, &n->key);
      const int rh = walk(n->right.get(), &n->key, hi);
      if (lh - rh > 1 || rh - lh > 1) {
        bad = "avl: balance factor out of range";
      }
      if (n->height != 1 + std::max(lh, rh)) {
        bad = "avl: stale height";
      }
      return 1 + std::max(lh, rh);
    };
    walk(root_.get(), nullptr, nullptr);
    if (!bad && count != size_) {
      bad = "avl: size mismatch";
    }
    return bad;
  }

 private:
  using Ptr = std::unique_ptr<Node>;

  static int height_of(const Node* n) noexcept { return n == nullptr ? 0 : n->height; }

  static void update(Node& n) noexcept {
    n.height = static_cast<std::int8_t>(1 + std::max(height_of(n.left.get()), height_of(n.right.get())));
  }

  static Ptr rotate_right(Ptr n) {
    Ptr l = std::move(n->left);
    n->left = std::move(l->right);
    update(*n);
    l->right = std::move(n);
    update(*l);
    return l;
  }

  static Ptr rotate_left(Ptr n) {
    Ptr r = std::move(n->right);
    n->right = std::move(r->left);
    update(*n);
    r->left = std::move(n);
    update(*r);
    return r;
  }

  static Ptr rebalance(Ptr n) {
    update(*n);
    const int balance = height_of(n->left.get()) - height_of(n->right.get());
    if (balance > 1) {
      if (height_of(n->left->left.get()) < height_of(n->left->right.get())) {
        n->left = rotate_left(std::move(n->left));
      }
      return rotate_right(std::move(n));
    }
    if (balance < -1) {
      if (height_of(n->right->right.get()) < height_of(n->right->left.get())) {
        n->right = rotate_right(std::move(n->right));
      }
      return rotate_left(std::move(n));
    }
    return n;
  }

  static Ptr insert_at(Ptr n, const Key& key, ExpirationTime exp, const Payload& payload, bool& inserted) {
    if (!n) {
      inserted = true;
      return std::make_unique<Node>(Node{key, exp, payload, nullptr, nullptr, 1});
    }
    const Compare less{};
    if (less(key, n->key)) {
      n->left = insert_at(std::move(n->left), key, exp, payload, inserted);
    } else if (less(n->key, key)) {
      n->right = insert_at(std::move(n->right), key, exp, payload, inserted);
    } else {
      return n;
    }
    return inserted ? rebalance(std::move(n)) : std::move(n);
  }

  static Ptr detach_min(Ptr n, Ptr& min_out) {
    if (!n->left) {
      Ptr rest = std::move(n->right);
      min_out = std::move(n);
      return rest;
    }
    n->left = detach_min(std::move(n->left), min_out);
    return rebalance(std::move(n));
  }

  static Ptr remove_at(Ptr n, const Key& key, std::optional<ExpirationTime>& removed) {
    if (!n) {
      return n;
    }
    const Compare less{};
    if (less(key, n->key)) {
      n->left = remove_at(std::move(n->left), key, removed);
    } else if (less(n->key, key)) {
      n->right = remove_at(std::move(n->right), key, removed);
    } else {
      removed = n->expiration;
      if (!n->left) {
        return std::move(n->right);
      }
      if (!n->right) {
        return std::move(n->left);
      }
      Ptr successor;
      Ptr right = detach_min(std::move(n->right), successor);
      successor->left = std::move(n->left);
      successor->right = std::move(right);
      return rebalance(std::move(successor));
    }
    return removed ? rebalance(std::move(n)) : std::move(n);
  }

  Ptr root_;
  std::size_t size_ = 0;
};

}  // namespace expire_treap::competitors
