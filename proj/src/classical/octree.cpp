#include <algorithm>
#include <memory>
#include <set>
#include <vector>

#include "colorcnn/classical/classical.hpp"
#include "colorcnn/core/check.hpp"

namespace colorcnn::classical {

namespace {

constexpr int kMaxDepth = 8;

struct Node {
  int depth = 0;
  int64_t insertion_order = -1;
  int64_t pixel_count = 0;
  double color_sum[3] = {0, 0, 0};
  int palette_index = -1;
  Node* parent = nullptr;
  std::unique_ptr<Node> children[8];
  bool is_leaf() const {
    for (const auto& c : children)
      if (c) return false;
    return true;
  }
};

int child_slot(uint8_t r, uint8_t g, uint8_t b, int depth) {
  int shift = 7 - depth;
  return ((r >> shift) & 1) << 2 | ((g >> shift) & 1) << 1 | ((b >> shift) & 1);
}

struct Tree {
  Node root;
  int64_t next_order = 0;

  void insert(const float* px) {
    uint8_t r = img::to_u8(px[0]), g = img::to_u8(px[1]), b = img::to_u8(px[2]);
    Node* node = &root;
    for (int d = 0; d < kMaxDepth; ++d) {
      int slot = child_slot(r, g, b, d);
      if (!node->children[slot]) {
        auto child = std::make_unique<Node>();
        child->depth = d + 1;
        child->insertion_order = next_order++;
        child->parent = node;
        node->children[slot] = std::move(child);
      }
      node = node->children[slot].get();
    }
    node->pixel_count++;
    node->color_sum[0] += px[0];
    node->color_sum[1] += px[1];
    node->color_sum[2] += px[2];
  }

  Node* lookup(const float* px) {
    uint8_t r = img::to_u8(px[0]), g = img::to_u8(px[1]), b = img::to_u8(px[2]);
    Node* node = &root;
    while (!node->is_leaf()) {
      int slot = child_slot(r, g, b, node->depth);
      COLORCNN_CHECK(node->children[slot] != nullptr, "octree lookup fell off the tree");
      node = node->children[slot].get();
    }
    return node;
  }
};

void collect(Node* node, std::vector<Node*>& leaves, std::vector<Node*>& reducible) {
  if (node->is_leaf()) {
    if (node->pixel_count > 0) leaves.push_back(node);
    return;
  }
  bool all_children_leaves = true;
  for (auto& c : node->children) {
    if (!c) continue;
    collect(c.get(), leaves, reducible);
    if (!c->is_leaf()) all_children_leaves = false;
  }
  if (all_children_leaves) reducible.push_back(node);
}

// merge priority: deepest level first, then fewest covered pixels, then
// insertion order. A waiting candidate's key is stable: its children are
// leaves, and leaf counts only change when the leaf itself is merged away.
struct MergeKey {
  int depth;
  int64_t count;
  int64_t order;
  Node* node;
  bool operator<(const MergeKey& o) const {
    if (depth != o.depth) return depth > o.depth;
    if (count != o.count) return count < o.count;
    return order < o.order;
  }
};

int64_t children_total(const Node* node) {
  int64_t n = node->pixel_count;
  for (const auto& c : node->children)
    if (c) n += c->pixel_count;
  return n;
}

}  // namespace

img::QuantResult octree_quantize(const img::RgbImage& image, int num_colors) {
  COLORCNN_CHECK(num_colors >= 1, "num_colors must be >= 1");
  COLORCNN_CHECK(image.h >= 1 && image.w >= 1, "image must be non-empty");

  Tree tree;
  for (size_t i = 0; i < image.pixel_count(); ++i)
    tree.insert(image.px.data() + i * 3);

  std::vector<Node*> leaves, reducible;
  collect(&tree.root, leaves, reducible);
  std::set<MergeKey> queue;
  for (Node* n : reducible)
    queue.insert({n->depth, children_total(n), n->insertion_order, n});
  int64_t leaf_count = int64_t(leaves.size());

  while (leaf_count > num_colors && !queue.empty()) {
    Node* pick = queue.begin()->node;
    queue.erase(queue.begin());
    for (auto& c : pick->children) {
      if (!c) continue;
      pick->pixel_count += c->pixel_count;
      for (int k = 0; k < 3; ++k) pick->color_sum[k] += c->color_sum[k];
      c.reset();
      --leaf_count;
    }
    ++leaf_count;
    Node* up = pick->parent;
    if (up) {
      bool all_leaves = true;
      for (const auto& c : up->children)
        if (c && !c->is_leaf()) all_leaves = false;
      if (all_leaves)
        queue.insert({up->depth, children_total(up), up->insertion_order, up});
    }
  }

  leaves.clear();
  reducible.clear();
  collect(&tree.root, leaves, reducible);
  img::Palette palette;
  palette.colors.reserve(leaves.size());
  for (int i = 0; i < int(leaves.size()); ++i) {
    Node* leaf = leaves[i];
    leaf->palette_index = i;
    double n = double(leaf->pixel_count);
    palette.colors.push_back({float(leaf->color_sum[0] / n),
                              float(leaf->color_sum[1] / n),
                              float(leaf->color_sum[2] / n)});
  }

  img::IndexMap index_map(image.h, image.w);
  for (size_t i = 0; i < image.pixel_count(); ++i) {
    Node* leaf = tree.lookup(image.px.data() + i * 3);
    COLORCNN_CHECK(leaf->palette_index >= 0, "pixel mapped to an empty octree leaf");
    index_map.idx[i] = leaf->palette_index;
  }
  return img::finalize_quant_result(index_map, palette);
}

}  // namespace colorcnn::classical
