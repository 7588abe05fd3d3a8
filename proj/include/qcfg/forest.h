#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qcfg/derivation.h"

namespace qcfg {

struct Span {
  uint16_t begin = 0;
  uint16_t end = 0;
  int size() const { return end - begin; }
  friend bool operator==(Span, Span) = default;
};

// Packed forest. Nodes are stored children-before-parents; the root is the
// last node. Edge rule ids index the rule list of the parser that built it.
class DerivationForest {
 public:
  struct Node {
    Span input;
    Span output;
    uint32_t edge_begin = 0;
    uint32_t edge_end = 0;
  };
  struct Edge {
    uint32_t rule = 0;
    uint32_t child_begin = 0;
    uint32_t child_end = 0;
  };

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  uint32_t root() const { return static_cast<uint32_t>(nodes_.size() - 1); }
  bool has_output_spans() const { return has_output_; }

  std::span<const Edge> NodeEdges(uint32_t node) const {
    const Node& n = nodes_[node];
    return {edges_.data() + n.edge_begin, n.edge_end - n.edge_begin};
  }
  // children[i] expands NT_{i+1} of the edge's rule.
  std::span<const uint32_t> EdgeChildren(const Edge& e) const {
    return {children_.data() + e.child_begin, e.child_end - e.child_begin};
  }

  double CountDerivations() const;
  // Unpacks up to limit derivations (all of them when the forest is smaller).
  std::vector<Derivation> Enumerate(std::span<const Rule> rules, size_t limit) const;

 private:
  friend class ForestBuilder;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<uint32_t> children_;
  bool has_output_ = false;
};

}  // namespace qcfg
