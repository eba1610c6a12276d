#pragma once

// Fully persistent treap keyed on a primary key and min-heap ordered on
// expiration time. Every update returns a new Snapshot that shares all
// untouched subtrees with its predecessor; snapshots are immutable and may be
// read from any number of threads while a single writer derives new ones.
//
// Nodes are reference counted (intrusively, atomically) and reclaimed as soon
// as no live snapshot reaches them. All descents use explicit stacks, so a
// degenerate tree costs time, never native stack.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "expire_treap/errors.hpp"
#include "expire_treap/expiration.hpp"

namespace expire_treap {

template <class Key, class Payload>
struct Record {
  Key key;
  ExpirationTime expiration;
  Payload payload;

  friend bool operator==(const Record&, const Record&) = default;
};

/// Depth statistics over inner nodes; the root has depth 0.
struct DepthStats {
  std::size_t max_depth = 0;
  std::uint64_t depth_sum = 0;
  std::uint64_t nodes = 0;

  /// Mean depth as the exact fraction depth_sum / nodes.
  [[nodiscard]] double mean_depth() const noexcept {
    return nodes == 0 ? 0.0 : static_cast<double>(depth_sum) / static_cast<double>(nodes);
  }
};

#ifdef EXPIRE_TREAP_COUNT_NODES
namespace detail {
inline std::atomic<std::int64_t>& live_node_counter() noexcept {
  static std::atomic<std::int64_t> counter{0};
  return counter;
}
}  // namespace detail

/// Number of treap nodes currently allocated (all key/payload types).
inline std::int64_t live_treap_nodes() noexcept {
  return detail::live_node_counter().load(std::memory_order_relaxed);
}
#endif

template <class Key, class Payload, class Compare>
class Treap;
template <class Key, class Payload, class Compare>
class Snapshot;

/// Immutable inner node. A null child pointer is the leaf sentinel.
template <class Key, class Payload>
class TreapNode {
 public:
  TreapNode(const TreapNode&) = delete;
  TreapNode& operator=(const TreapNode&) = delete;

  [[nodiscard]] const Key& key() const noexcept { return key_; }
  [[nodiscard]] ExpirationTime expiration() const noexcept { return expiration_; }
  [[nodiscard]] const Payload& payload() const noexcept { return payload_; }
  [[nodiscard]] const TreapNode* left() const noexcept { return left_; }
  [[nodiscard]] const TreapNode* right() const noexcept { return right_; }
  [[nodiscard]] std::uint32_t use_count() const noexcept { return refs_.load(std::memory_order_relaxed); }

  [[nodiscard]] Record<Key, Payload> record() const { return {key_, expiration_, payload_}; }

 private:
  template <class K, class P, class C>
  friend class Treap;
  template <class K, class P, class C>
  friend class Snapshot;

  TreapNode(TreapNode* left, const Key& key, ExpirationTime exp, const Payload& payload, TreapNode* right)
      : key_(key), expiration_(exp), left_(left), right_(right), payload_(payload) {
#ifdef EXPIRE_TREAP_COUNT_NODES
    detail::live_node_counter().fetch_add(1, std::memory_order_relaxed);
#endif
  }

  ~TreapNode() {
#ifdef EXPIRE_TREAP_COUNT_NODES
    detail::live_node_counter().fetch_sub(1, std::memory_order_relaxed);
#endif
  }

  static TreapNode* retain(TreapNode* n) noexcept {
    if (n != nullptr) {
      n->refs_.fetch_add(1, std::memory_order_relaxed);
    }
    return n;
  }

  // Drops one reference. Dead subtrees are torn down with a per-thread work
  // list; re-entrant releases (a payload destructor dropping another
  // snapshot) only enqueue.
  static void release(TreapNode* n) noexcept {
    if (n == nullptr || n->refs_.fetch_sub(1, std::memory_order_acq_rel) != 1) {
      return;
    }
    thread_local std::vector<TreapNode*> pending;
    thread_local bool draining = false;
    pending.push_back(n);
    if (draining) {
      return;
    }
    draining = true;
    while (!pending.empty()) {
      TreapNode* dead = pending.back();
      pending.pop_back();
      for (TreapNode* child : {dead->left_, dead->right_}) {
        if (child != nullptr && child->refs_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
          pending.push_back(child);
        }
      }
      delete dead;
    }
    draining = false;
  }

  // The count sits next to the payload so that small payloads fill its
  // padding.
  Key key_;
  ExpirationTime expiration_;
  TreapNode* left_;
  TreapNode* right_;
  std::atomic<std::uint32_t> refs_{1};
  Payload payload_;
};

/// One immutable version of a treap.
template <class Key, class Payload, class Compare = std::less<Key>>
class Snapshot {
 public:
  using node_type = TreapNode<Key, Payload>;
  using record_type = Record<Key, Payload>;

  Snapshot() noexcept = default;
  Snapshot(const Snapshot& other) noexcept : root_(node_type::retain(other.root_)), size_(other.size_) {}
  Snapshot(Snapshot&& other) noexcept
      : root_(std::exchange(other.root_, nullptr)), size_(std::exchange(other.size_, 0)) {}
  Snapshot& operator=(Snapshot other) noexcept {
    swap(other);
    return *this;
  }
  ~Snapshot() { node_type::release(root_); }

  void swap(Snapshot& other) noexcept {
    std::swap(root_, other.root_);
    std::swap(size_, other.size_);
  }

  [[nodiscard]] std::size_t size() const noexcept { return size_; }
  [[nodiscard]] bool empty() const noexcept { return root_ == nullptr; }
  [[nodiscard]] const node_type* root() const noexcept { return root_; }

  /// True when both snapshots are the same version (same root node).
  [[nodiscard]] bool same_version(const Snapshot& other) const noexcept { return root_ == other.root_; }

  /// Node holding `key`, or nullptr.
  [[nodiscard]] const node_type* locate(const Key& key) const {
    const Compare less{};
    const node_type* n = root_;
    while (n != nullptr) {
      if (less(key, n->key_)) {
        n = n->left_;
      } else if (less(n->key_, key)) {
        n = n->right_;
      } else {
        return n;
      }
    }
    return nullptr;
  }

  [[nodiscard]] bool contains(const Key& key) const { return locate(key) != nullptr; }

  /// Payload stored under `key`; throws NotFound. Expired records that have
  /// not been expelled yet are still returned.
  [[nodiscard]] const Payload& find(const Key& key) const {
    const node_type* n = locate(key);
    if (n == nullptr) {
      throw NotFound();
    }
    return n->payload_;
  }

  /// Minimum expiration time (the root's), or nullopt when empty.
  [[nodiscard]] std::optional<ExpirationTime> min_expiration() const noexcept {
    if (root_ == nullptr) {
      return std::nullopt;
    }
    return root_->expiration_;
  }

  /// In-order visit of every node; `visit` receives `const node_type&`.
  template <class Visit>
  void for_each(Visit&& visit) const {
    std::vector<const node_type*> stack;
    const node_type* n = root_;
    while (n != nullptr || !stack.empty()) {
      while (n != nullptr) {
        stack.push_back(n);
        n = n->left_;
      }
      n = stack.back();
      stack.pop_back();
      visit(*n);
      n = n->right_;
    }
  }

  /// In-order visit of nodes with lo <= key <= hi. Touches only the two
  /// boundary paths plus the answer.
  template <class Visit>
  void for_each_in_range(const Key& lo, const Key& hi, Visit&& visit) const {
    const Compare less{};
    if (less(hi, lo)) {
      throw InvalidRange();
    }
    std::vector<const node_type*> stack;
    const node_type* n = root_;
    while (n != nullptr || !stack.empty()) {
      while (n != nullptr) {
        if (less(n->key_, lo)) {
          n = n->right_;
        } else {
          stack.push_back(n);
          n = n->left_;
        }
      }
      if (stack.empty()) {
        return;
      }
      n = stack.back();
      stack.pop_back();
      if (less(hi, n->key_)) {
        return;
      }
      visit(*n);
      n = n->right_;
    }
  }

  [[nodiscard]] std::vector<record_type> traverse() const {
    std::vector<record_type> out;
    out.reserve(size_);
    for_each([&](const node_type& n) { out.push_back(n.record()); });
    return out;
  }

  [[nodiscard]] std::vector<record_type> range(const Key& lo, const Key& hi) const {
    std::vector<record_type> out;
    for_each_in_range(lo, hi, [&](const node_type& n) { out.push_back(n.record()); });
    return out;
  }

  [[nodiscard]] DepthStats depth_stats() const {
    DepthStats stats;
    std::vector<std::pair<const node_type*, std::size_t>> stack;
    if (root_ != nullptr) {
      stack.emplace_back(root_, 0);
    }
    while (!stack.empty()) {
      auto [n, depth] = stack.back();
      stack.pop_back();
      ++stats.nodes;
      stats.depth_sum += depth;
      stats.max_depth = std::max(stats.max_depth, depth);
      if (n->left_ != nullptr) {
        stack.emplace_back(n->left_, depth + 1);
      }
      if (n->right_ != nullptr) {
        stack.emplace_back(n->right_, depth + 1);
      }
    }
    return stats;
  }

  /// Full structural check: strict key order, heap order on expiration
  /// times (no child strictly earlier than its parent; two infinities are
  /// unordered) and size bookkeeping. Returns a description of the first
  /// violation found.
  [[nodiscard]] std::optional<std::string> find_violation() const {
    const Compare less{};
    struct Frame {
      const node_type* node;
      const Key* lower;
      const Key* upper;
    };
    std::vector<Frame> stack;
    std::size_t count = 0;
    if (root_ != nullptr) {
      stack.push_back({root_, nullptr, nullptr});
    }
    while (!stack.empty()) {
      const Frame f = stack.back();
      stack.pop_back();
      const node_type* n = f.node;
      ++count;
      if ((f.lower != nullptr && !less(*f.lower, n->key_)) || (f.upper != nullptr && !less(n->key_, *f.upper))) {
        return std::string("key order violated at key ") + describe(n->key_);
      }
      for (const node_type* child : {n->left_, n->right_}) {
        if (child != nullptr && child->expiration_ < n->expiration_) {
          return std::string("heap order violated below key ") + describe(n->key_);
        }
      }
      if (n->left_ != nullptr) {
        stack.push_back({n->left_, f.lower, &n->key_});
      }
      if (n->right_ != nullptr) {
        stack.push_back({n->right_, &n->key_, f.upper});
      }
    }
    if (count != size_) {
      return "size mismatch: counted " + std::to_string(count) + ", recorded " + std::to_string(size_);
    }
    return std::nullopt;
  }

  /// Pre-order dump, one node per line, indented two spaces per level:
  /// `key=<k> exp=<t|inf> depth=<d>`.
  void dump(std::ostream& os) const {
    std::vector<std::pair<const node_type*, std::size_t>> stack;
    if (root_ != nullptr) {
      stack.emplace_back(root_, 0);
    }
    while (!stack.empty()) {
      auto [n, depth] = stack.back();
      stack.pop_back();
      os << std::string(2 * depth, ' ') << "key=" << n->key_ << " exp=" << n->expiration_ << " depth=" << depth
         << '\n';
      if (n->right_ != nullptr) {
        stack.emplace_back(n->right_, depth + 1);
      }
      if (n->left_ != nullptr) {
        stack.emplace_back(n->left_, depth + 1);
      }
    }
  }

 private:
  friend class Treap<Key, Payload, Compare>;

  // Adopts an owned reference.
  Snapshot(node_type* root, std::size_t size) noexcept : root_(root), size_(size) {}

  template <class T>
  static std::string describe(const T& key) {
    if constexpr (requires { std::to_string(key); }) {
      return std::to_string(key);
    } else {
      return "<key>";
    }
  }

  node_type* root_ = nullptr;
  std::size_t size_ = 0;
};

/// Writer side of a treap family. Owns the extended comparator's random
/// source (used only to order two infinite expiration times) and the depth
/// guard. Derives new snapshots from existing ones; never modifies a
/// snapshot it is given. One thread at a time may use a Treap.
template <class Key, class Payload, class Compare = std::less<Key>>
class Treap {
 public:
  using snapshot_type = Snapshot<Key, Payload, Compare>;
  using node_type = TreapNode<Key, Payload>;
  using record_type = Record<Key, Payload>;

  static constexpr std::size_t kDefaultDepthLimit = std::size_t{1} << 22U;
  static constexpr std::uint64_t kDefaultSeed = 0x7265617054ULL;

  explicit Treap(std::uint64_t seed = kDefaultSeed, std::size_t depth_limit = kDefaultDepthLimit)
      : cmp_(seed), depth_limit_(depth_limit) {}

  [[nodiscard]] snapshot_type empty() const noexcept { return {}; }

  [[nodiscard]] std::size_t depth_limit() const noexcept { return depth_limit_; }

  /// New snapshot with (key, exp, payload) added. Inserting a key that is
  /// already present returns the same version unchanged. The record is
  /// placed as a leaf and rotated upward while its parent expires strictly
  /// later; every level of the search path is copied exactly once.
  [[nodiscard]] snapshot_type insert(const snapshot_type& s, const Key& key, ExpirationTime exp,
                                     const Payload& payload) {
    snapshot_type source = s;
    return insert_impl(source, false, key, exp, payload);
  }

  /// As above, but gives up `s`: path nodes that no other version holds are
  /// updated in place instead of copied. Versions still held elsewhere are
  /// never touched. `s` is left empty or still holding its old version.
  [[nodiscard]] snapshot_type insert(snapshot_type&& s, const Key& key, ExpirationTime exp, const Payload& payload) {
    return insert_impl(s, true, key, exp, payload);
  }

  /// New snapshot without `key`; throws NotFound. The matched node is sifted
  /// down by rotations, the child with the smaller expiration rising (the
  /// left one on ties), until it is a leaf and can be dropped.
  [[nodiscard]] snapshot_type remove(const snapshot_type& s, const Key& key) {
    snapshot_type source = s;
    return remove_impl(source, false, key);
  }

  /// In-place variant of remove; `s` is untouched when NotFound is thrown.
  [[nodiscard]] snapshot_type remove(snapshot_type&& s, const Key& key) { return remove_impl(s, true, key); }

  /// Remove-then-insert, for callers that want update semantics.
  [[nodiscard]] snapshot_type upsert(const snapshot_type& s, const Key& key, ExpirationTime exp,
                                     const Payload& payload) {
    if (s.contains(key)) {
      return insert(remove(s, key), key, exp, payload);
    }
    return insert(s, key, exp, payload);
  }

  [[nodiscard]] snapshot_type upsert(snapshot_type&& s, const Key& key, ExpirationTime exp, const Payload& payload) {
    if (s.contains(key)) {
      return insert(remove(std::move(s), key), key, exp, payload);
    }
    return insert(std::move(s), key, exp, payload);
  }

  /// Removes the root while its expiration time is <= now, handing each
  /// expelled node to `on_expel` in removal order. Records that never expire
  /// are never expelled. `now` must be finite.
  template <class OnExpel>
  [[nodiscard]] snapshot_type expire(const snapshot_type& s, ExpirationTime now, OnExpel&& on_expel) {
    snapshot_type source = s;
    return expire_impl(source, false, now, on_expel);
  }

  /// In-place variant of expire.
  template <class OnExpel>
  [[nodiscard]] snapshot_type expire(snapshot_type&& s, ExpirationTime now, OnExpel&& on_expel) {
    return expire_impl(s, true, now, on_expel);
  }

  [[nodiscard]] std::pair<snapshot_type, std::vector<record_type>> expire(const snapshot_type& s,
                                                                         ExpirationTime now) {
    std::vector<record_type> expelled;
    snapshot_type next = expire(s, now, [&](const node_type& n) { expelled.push_back(n.record()); });
    return {std::move(next), std::move(expelled)};
  }

  [[nodiscard]] std::pair<snapshot_type, std::vector<record_type>> expire(snapshot_type&& s, ExpirationTime now) {
    std::vector<record_type> expelled;
    snapshot_type next = expire(std::move(s), now, [&](const node_type& n) { expelled.push_back(n.record()); });
    return {std::move(next), std::move(expelled)};
  }

 private:
  // `owned`: the node is reachable only through the version being given up,
  // so it may be modified in place.
  struct Step {
    node_type* node;
    bool went_left;
    bool owned;
  };

  static bool is_due(const node_type* n, ExpirationTime now) noexcept {
    return n != nullptr && n->expiration_.is_finite() && n->expiration_.millis() <= now.millis();
  }

  // Sole reference. No other thread can gain one without going through a
  // holder, so the answer stays true while the writer keeps its reference;
  // acquire pairs with the release of whoever dropped the previous one.
  static bool exclusive(const node_type* n) noexcept {
    return n != nullptr && n->refs_.load(std::memory_order_acquire) == 1;
  }

  // Frees a node whose child references have been taken over.
  static void destroy(node_type* n) noexcept { delete n; }

  void push_path(node_type* n, bool went_left, bool owned) {
    if (path_.size() >= depth_limit_) {
      throw DepthLimitExceeded(depth_limit_);
    }
    path_.push_back({n, went_left, owned});
  }

  // Rebuilds the recorded path above `cur`. `consumed` says whether the
  // reference the deepest step held to its old child has been taken over.
  // Owned steps are a prefix of the path, so every allocation happens before
  // the first in-place change.
  node_type* rebuild(node_type* cur, bool consumed, bool rotate) {
    for (auto it = path_.rbegin(); it != path_.rend(); ++it) {
      node_type* a = it->node;
      const bool rise = rotate && cmp_.less(cur->expiration_, a->expiration_);
      if (it->owned) {
        node_type*& slot = it->went_left ? a->left_ : a->right_;
        if (!consumed) {
          node_type::release(slot);
        }
        if (!rise) {
          slot = cur;
          cur = a;
        } else if (it->went_left) {
          a->left_ = cur->right_;
          cur->right_ = a;
        } else {
          a->right_ = cur->left_;
          cur->left_ = a;
        }
        consumed = true;
        continue;
      }
      if (it->went_left) {
        if (rise) {
          // Right rotation: cur rises, a takes cur's right subtree on its left.
          cur->right_ = new node_type(cur->right_, a->key_, a->expiration_, a->payload_, node_type::retain(a->right_));
        } else {
          cur = new node_type(cur, a->key_, a->expiration_, a->payload_, node_type::retain(a->right_));
        }
      } else {
        if (rise) {
          cur->left_ = new node_type(node_type::retain(a->left_), a->key_, a->expiration_, a->payload_, cur->left_);
        } else {
          cur = new node_type(node_type::retain(a->left_), a->key_, a->expiration_, a->payload_, cur);
        }
      }
      consumed = false;
    }
    return cur;
  }

  // Empties `s` when its root reference was taken over.
  static void give_up(snapshot_type& s, bool root_owned) noexcept {
    if (root_owned) {
      s.root_ = nullptr;
      s.size_ = 0;
    }
  }

  snapshot_type insert_impl(snapshot_type& s, bool consume, const Key& key, ExpirationTime exp,
                            const Payload& payload) {
    const Compare less{};
    path_.clear();
    node_type* n = s.root_;
    bool owned = consume && exclusive(n);
    while (n != nullptr) {
      const bool go_left = less(key, n->key_);
      if (!go_left && !less(n->key_, key)) {
        return std::move(s);
      }
      push_path(n, go_left, owned);
      n = go_left ? n->left_ : n->right_;
      owned = owned && exclusive(n);
    }
    const std::size_t size = s.size_ + 1;
    node_type* root = rebuild(new node_type(nullptr, key, exp, payload, nullptr), true, true);
    give_up(s, !path_.empty() && path_.front().owned);
    return snapshot_type(root, size);
  }

  snapshot_type remove_impl(snapshot_type& s, bool consume, const Key& key) {
    const Compare less{};
    path_.clear();
    node_type* n = s.root_;
    bool owned = consume && exclusive(n);
    while (n != nullptr) {
      const bool go_left = less(key, n->key_);
      if (!go_left && !less(n->key_, key)) {
        break;
      }
      push_path(n, go_left, owned);
      n = go_left ? n->left_ : n->right_;
      owned = owned && exclusive(n);
    }
    if (n == nullptr) {
      throw NotFound();
    }
    node_type* cur = percolate(n, owned);
    if (owned) {
      destroy(n);
    }
    const std::size_t size = s.size_ - 1;
    node_type* root = rebuild(cur, owned, false);
    give_up(s, path_.empty() ? owned : path_.front().owned);
    return snapshot_type(root, size);
  }

  template <class OnExpel>
  snapshot_type expire_impl(snapshot_type& s, bool consume, ExpirationTime now, OnExpel& on_expel) {
    if (now.is_infinite()) {
      throw std::invalid_argument("expire: current time must be finite");
    }
    if (!is_due(s.root_, now)) {
      return std::move(s);
    }
    // `acc` holds one reference to the current root throughout.
    snapshot_type acc = std::move(s);
    while (is_due(acc.root_, now)) {
      node_type* cur = acc.root_;
      on_expel(static_cast<const node_type&>(*cur));
      if (consume && exclusive(cur)) {
        acc.root_ = percolate(cur, true);
        destroy(cur);
      } else {
        acc.root_ = percolate(cur, false);
        node_type::release(cur);
      }
      --acc.size_;
    }
    return acc;
  }

  // Subtree that remains once `n` has been rotated down to leaf level and
  // dropped: the merge of its two subtrees along their facing spines.
  // Returns an owned reference. With `held`, n's references to its children
  // are taken over (n is about to be destroyed) and exclusively held spine
  // nodes are relinked in place; otherwise `n` is only read.
  node_type* percolate(node_type* n, bool held) {
    node_type* result = nullptr;
    node_type** hole = &result;
    node_type* l = n->left_;
    node_type* r = n->right_;
    // Whether this call owns the reference to l (resp. r).
    bool l_held = held;
    bool r_held = held;
    std::size_t depth = 0;
    while (l != nullptr && r != nullptr) {
      // In-place merges cannot roll back, and use no stack either way.
      if (!held && ++depth > depth_limit_) {
        node_type::release(result);
        throw DepthLimitExceeded(depth_limit_);
      }
      if (cmp_.less_equal(l->expiration_, r->expiration_)) {
        node_type* next = l->right_;
        if (l_held && exclusive(l)) {
          l->right_ = nullptr;
          *hole = l;
          hole = &l->right_;
        } else {
          auto* risen = new node_type(node_type::retain(l->left_), l->key_, l->expiration_, l->payload_, nullptr);
          *hole = risen;
          hole = &risen->right_;
          if (l_held) {
            node_type::retain(next);
            node_type::release(l);
          }
        }
        l = next;
      } else {
        node_type* next = r->left_;
        if (r_held && exclusive(r)) {
          r->left_ = nullptr;
          *hole = r;
          hole = &r->left_;
        } else {
          auto* risen = new node_type(nullptr, r->key_, r->expiration_, r->payload_, node_type::retain(r->right_));
          *hole = risen;
          hole = &risen->left_;
          if (r_held) {
            node_type::retain(next);
            node_type::release(r);
          }
        }
        r = next;
      }
    }
    node_type* rest = l != nullptr ? l : r;
    const bool rest_held = l != nullptr ? l_held : r_held;
    *hole = rest_held ? rest : node_type::retain(rest);
    return result;
  }

  ExtendedComparator cmp_;
  std::size_t depth_limit_;
  std::vector<Step> path_;
};

}  // namespace expire_treap
