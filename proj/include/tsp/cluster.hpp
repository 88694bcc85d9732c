#pragma once

#include "tsp/common.hpp"
#include "tsp/grid.hpp"

#include <span>
#include <vector>

namespace tsp {

struct ClusterNode {
    Index left = -1;   // children, -1 for leaves
    Index right = -1;
    Index parent = -1; // -1 at the root
    Index size = 1;
    int depth = 0;
    double delta = 0.0; // Ward cost paid when the node was created

    bool is_leaf() const { return left < 0; }
};

/// One agglomeration step: clusters `first` and `second` (node ids) merge
/// into a new node whose id is p + step.
struct Merge {
    Index first;
    Index second;
    double delta;
};

/// Binary merge tree over p voxels with q = 2p - 1 nodes. Leaves are nodes
/// 0..p-1 (node k is voxel k); internal nodes follow in merge order, so the
/// root is q - 1 and every parent has a larger id than its children.
class ClusterTree {
public:
    /// Builds the tree from p and the p - 1 merges, validating the sequence.
    ClusterTree(Index num_leaves, const std::vector<Merge>& merges);

    Index num_leaves() const { return num_leaves_; }
    Index num_nodes() const { return Index(nodes_.size()); }
    Index root() const { return num_nodes() - 1; }
    int max_depth() const { return max_depth_; }

    const ClusterNode& node(Index j) const;
    int depth(Index j) const { return node(j).depth; }
    const std::vector<ClusterNode>& nodes() const { return nodes_; }

    /// Voxels of the parcel rooted at j (leaves of its subtree).
    std::span<const Index> members(Index j) const;
    /// Node ids of the subtree rooted at j, j first (preorder).
    std::span<const Index> descendants(Index j) const;
    /// Ancestors of j including j itself, from j up to the root.
    std::vector<Index> ancestors(Index j) const;

    std::vector<Merge> merges() const;

private:
    void check(Index j) const;

    Index num_leaves_;
    std::vector<ClusterNode> nodes_;
    std::vector<Index> leaf_order_;     // leaves in preorder
    std::vector<Index> node_order_;     // all nodes in preorder
    std::vector<Index> leaf_begin_;     // range into leaf_order_
    std::vector<Index> preorder_begin_; // range start into node_order_
    int max_depth_ = 0;
};

/// Increase in within-cluster inertia caused by merging two clusters given
/// their means and sizes: |c1||c2|/(|c1|+|c2|) * ||m1 - m2||^2.
double ward_delta(std::span<const double> mean1, double size1, std::span<const double> mean2, double size2);

/// Spatially constrained Ward agglomeration. X is n x p (samples x voxels),
/// only clusters joined by an adjacency edge may merge. Equal costs are
/// resolved towards the lexicographically smallest (id, id) pair.
ClusterTree ward_cluster(const MatrixXd& X, const Adjacency& adj);

} // namespace tsp
