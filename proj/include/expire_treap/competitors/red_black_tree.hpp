#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "expire_treap/errors.hpp"
#include "expire_treap/expiration.hpp"

namespace expire_treap::competitors {

// Mutable red-black tree with parent links and a shared black sentinel,
// following the classical insert/delete fix-up procedures.
template <class Key, class Payload, class Compare = std::less<Key>>
class RedBlackTree {
 public:
  enum class Color : unsigned char { Red, Black };

  struct Node {
    Key key{};
    ExpirationTime expiration{};
    Payload payload{};
    Node* left = nullptr;
    Node* right = nullptr;
    Node* parent = nullptr;
    Color color = Color::Black;
  };

  RedBlackTree() { root_ = &nil_; }
  RedBlackTree(const RedBlackTree&) = delete;
  RedBlackTree& operator=(const RedBlackTree&) = delete;
  ~RedBlackTree() { clear(); }

  [[nodiscard]] std::size_t size() const noexcept { return size_; }

  void clear() {
    std::vector<Node*> stack;
    if (root_ != &nil_) {
      stack.push_back(root_);
    }
    while (!stack.empty()) {
      Node* n = stack.back();
      stack.pop_back();
      if (n->left != &nil_) {
        stack.push_back(n->left);
      }
      if (n->right != &nil_) {
        stack.push_back(n->right);
      }
      delete n;
    }
    root_ = &nil_;
    size_ = 0;
  }

  bool insert(const Key& key, ExpirationTime exp, const Payload& payload) {
    const Compare less{};
    Node* parent = &nil_;
    Node* n = root_;
    while (n != &nil_) {
      parent = n;
      if (less(key, n->key)) {
        n = n->left;
      } else if (less(n->key, key)) {
        n = n->right;
      } else {
        return false;
      }
    }
    Node* z = new Node{key, exp, payload, &nil_, &nil_, parent, Color::Red};
    if (parent == &nil_) {
      root_ = z;
    } else if (less(key, parent->key)) {
      parent->left = z;
    } else {
      parent->right = z;
    }
    insert_fixup(z);
    ++size_;
    return true;
  }

  ExpirationTime remove(const Key& key) {
    Node* z = locate_mut(key);
    if (z == nullptr) {
      throw NotFound();
    }
    const ExpirationTime exp = z->expiration;
    erase_node(z);
    --size_;
    return exp;
  }

  [[nodiscard]] const Node* locate(const Key& key) const { return const_cast<RedBlackTree*>(this)->locate_mut(key); }

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
    const Node* n = root_;
    while (n != &nil_ || !stack.empty()) {
      while (n != &nil_) {
        stack.push_back(n);
        n = n->left;
      }
      n = stack.back();
      stack.pop_back();
      visit(n->key, n->expiration, n->payload);
      n = n->right;
    }
  }

  /// Checks key order, root colour, red nodes having black children and
  /// equal black height on every root-to-leaf path.
  [[nodiscard]] std::optional<std::string> find_violation() const {
    if (root_->color != Color::Black) {
      return "rb: red root";
    }
    const Compare less{};
    std::size_t count = 0;
    std::optional<std::string> bad;
    std::function<int(const Node*, const Key*, const Key*)> walk = [&](const Node* n, const Key* lo,
                                                                       const Key* hi) -> int {
      if (n == &nil_ || bad) {
        return 1;
      }
      ++count;
      if ((lo != nullptr && !less(*lo, n->key)) || (hi != nullptr && !less(n->key, *hi))) {
        bad = "rb: key order violated";
      }
      if (n->color == Color::Red && (n->left->color == Color::Red || n->right->color == Color::Red)) {
        bad = "rb: red node with red child";
      }
      const int lb = walk(n->left, lo, &n->key);
      const int rb = walk(n->right, &n->key, hi);
      if (lb != rb) {
        bad = "rb: unequal black height";
      }
      return lb + (n->color == Color::Black ? 1 : 0);
    };
    walk(root_, nullptr, nullptr);
    if (!bad && count != size_) {
      bad = "rb: size mismatch";
    }
    return bad;
  }

 private:
  Node* locate_mut(const Key& key) {
    const Compare less{};
    Node* n = root_;
    while (n != &nil_) {
      if (less(key, n->key)) {
        n = n->left;
      } else if (less(n->key, key)) {
        n = n->right;
      } else {
        return n;
      }
    }
    return nullptr;
  }

  void rotate_left(Node* x) {
    Node* y = x->right;
    x->right = y->left;
    if (y->left != &nil_) {
      y->left->parent = x;
    }
    y->parent = x->parent;
    if (x->parent == &nil_) {
      root_ = y;
    } else if (x == x->parent->left) {
      x->parent->left = y;
    } else {
      x->parent->right = y;
    }
    y->left = x;
    x->parent = y;
  }

  void rotate_right(Node* x) {
    Node* y = x->left;
    x->left = y->right;
    if (y->right != &nil_) {
      y->right->parent = x;
    }
    y->parent = x->parent;
    if (x->parent == &nil_) {
      root_ = y;
    } else if (x == x->parent->right) {
      x->parent->right = y;
    } else {
      x->parent->left = y;
    }
    y->right = x;
    x->parent = y;
  }

  void insert_fixup(Node* z) {
    while (z->parent->color == Color::Red) {
      Node* gp = z->parent->parent;
      if (z->parent == gp->left) {
        Node* uncle = gp->right;
        if (uncle->color == Color::Red) {
          z->parent->color = Color::Black;
          uncle->color = Color::Black;
          gp->color = Color::Red;
          z = gp;
        } else {
          if (z == z->parent->right) {
            z = z->parent;
            rotate_left(z);
          }
          z->parent->color = Color::Black;
          gp->color = Color::Red;
          rotate_right(gp);
        }
      } else {
        Node* uncle = gp->left;
        if (uncle->color == Color::Red) {
          z->parent->color = Color::Black;
          uncle->color = Color::Black;
          gp->color = Color::Red;
          z = gp;
        } else {
          if (z == z->parent->left) {
            z = z->parent;
            rotate_right(z);
          }
          z->parent->color = Color::Black;
          gp->color = Color::Red;
          rotate_left(gp);
        }
      }
    }
    root_->color = Color::Black;
  }

  void transplant(Node* u, Node* v) {
    if (u->parent == &nil_) {
      root_ = v;
    } else if (u == u->parent->left) {
      u->parent->left = v;
    } else {
      u->parent->right = v;
    }
    v->parent = u->parent;
  }

  void erase_node(Node* z) {
    Node* y = z;
    Color y_color = y->color;
    Node* x = nullptr;
    if (z->left == &nil_) {
      x = z->right;
      transplant(z, z->right);
    } else if (z->right == &nil_) {
      x = z->left;
      transplant(z, z->left);
    } else {
      y = z->right;
      while (y->left != &nil_) {
        y = y->left;
      }
      y_color = y->color;
      x = y->right;
      if (y->parent == z) {
        x->parent = y;
      } else {
        transplant(y, y->right);
        y->right = z->right;
        y->right->parent = y;
      }
      transplant(z, y);
      y->left = z->left;
      y->left->parent = y;
      y->color = z->color;
    }
    delete z;
    if (y_color == Color::Black) {
      erase_fixup(x);
    }
    nil_.parent = nullptr;
  }

  void erase_fixup(Node* x) {
    while (x != root_ && x->color == Color::Black) {
      if (x == x->parent->left) {
        Node* w = x->parent->right;
        if (w->color == Color::Red) {
          w->color = Color::Black;
          x->parent->color = Color::Red;
          rotate_left(x->parent);
          w = x->parent->right;
        }
        if (w->left->color == Color::Black && w->right->color == Color::Black) {
          w->color = Color::Red;
          x = x->parent;
        } else {
          if (w->right->color == Color::Black) {
            w->left->color = Color::Black;
            w->color = Color::Red;
            rotate_right(w);
            w = x->parent->right;
          }
          w->color = x->parent->color;
          x->parent->color = Color::Black;
          w->right->color = Color::Black;
          rotate_left(x->parent);
          x = root_;
        }
      } else {
        Node* w = x->parent->left;
        if (w->color == Color::Red) {
          w->color = Color::Black;
          x->parent->color = Color::Red;
          rotate_right(x->parent);
          w = x->parent->left;
        }
        if (w->right->color == Color::Black && w->left->color == Color::Black) {
          w->color = Color::Red;
          x = x->parent;
        } else {
          if (w->left->color == Color::Black) {
            w->right->color = Color::Black;
            w->color = Color::Red;
            rotate_left(w);
            w = x->parent->left;
          }
          w->color = x->parent->color;
          x->parent->color = Color::Black;
          w->left->color = Color::Black;
          rotate_right(x->parent);
          x = root_;
        }
      }
    }
    x->color = Color::Black;
  }

  Node nil_{};
  Node* root_;
  std::size_t size_ = 0;
};

}  // namespace expire_treap::competitors
