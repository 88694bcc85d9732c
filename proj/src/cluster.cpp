#include "tsp/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <string>
#include <tuple>

namespace tsp {

ClusterTree::ClusterTree(Index num_leaves, const std::vector<Merge>& merges) : num_leaves_(num_leaves)
{
    if (num_leaves < 1)
        throw DimensionError("cluster tree needs at least one leaf");
    if (Index(merges.size()) != num_leaves - 1)
        throw StructureError("expected " + std::to_string(num_leaves - 1) + " merges, got " +
                             std::to_string(merges.size()));
    const Index q = 2 * num_leaves - 1;
    nodes_.resize(std::size_t(q));
    for (Index step = 0; step < Index(merges.size()); ++step) {
        const Index id = num_leaves + step;
        const auto& m = merges[std::size_t(step)];
        for (Index c : {m.first, m.second}) {
            if (c < 0 || c >= id)
                throw StructureError("merge " + std::to_string(step) + " references node " + std::to_string(c) +
                                     " not yet created");
            if (nodes_[std::size_t(c)].parent >= 0)
                throw StructureError("node " + std::to_string(c) + " merged twice");
        }
        if (m.first == m.second)
            throw StructureError("merge " + std::to_string(step) + " joins a node with itself");
        auto& n = nodes_[std::size_t(id)];
        n.left = m.first;
        n.right = m.second;
        n.delta = m.delta;
        n.size = nodes_[std::size_t(m.first)].size + nodes_[std::size_t(m.second)].size;
        nodes_[std::size_t(m.first)].parent = id;
        nodes_[std::size_t(m.second)].parent = id;
    }

    // Preorder traversal from the root gives contiguous member and subtree ranges.
    leaf_begin_.assign(std::size_t(q), 0);
    preorder_begin_.assign(std::size_t(q), 0);
    leaf_order_.reserve(std::size_t(num_leaves));
    node_order_.reserve(std::size_t(q));
    std::vector<Index> stack{root()};
    while (!stack.empty()) {
        const Index j = stack.back();
        stack.pop_back();
        auto& n = nodes_[std::size_t(j)];
        n.depth = n.parent < 0 ? 0 : nodes_[std::size_t(n.parent)].depth + 1;
        max_depth_ = std::max(max_depth_, n.depth);
        preorder_begin_[std::size_t(j)] = Index(node_order_.size());
        leaf_begin_[std::size_t(j)] = Index(leaf_order_.size());
        node_order_.push_back(j);
        if (n.is_leaf()) {
            leaf_order_.push_back(j);
        } else {
            stack.push_back(n.right);
            stack.push_back(n.left);
        }
    }
}

void ClusterTree::check(Index j) const
{
    if (j < 0 || j >= num_nodes())
        throw IndexError("node id " + std::to_string(j) + " out of range [0, " + std::to_string(num_nodes()) + ")");
}

const ClusterNode& ClusterTree::node(Index j) const
{
    check(j);
    return nodes_[std::size_t(j)];
}

std::span<const Index> ClusterTree::members(Index j) const
{
    const auto& n = node(j);
    return {leaf_order_.data() + leaf_begin_[std::size_t(j)], std::size_t(n.size)};
}

std::span<const Index> ClusterTree::descendants(Index j) const
{
    const auto& n = node(j);
    return {node_order_.data() + preorder_begin_[std::size_t(j)], std::size_t(2 * n.size - 1)};
}

std::vector<Index> ClusterTree::ancestors(Index j) const
{
    check(j);
    std::vector<Index> out;
    for (Index a = j; a >= 0; a = nodes_[std::size_t(a)].parent)
        out.push_back(a);
    return out;
}

std::vector<Merge> ClusterTree::merges() const
{
    std::vector<Merge> out;
    for (Index id = num_leaves_; id < num_nodes(); ++id) {
        const auto& n = nodes_[std::size_t(id)];
        out.push_back({n.left, n.right, n.delta});
    }
    return out;
}

double ward_delta(std::span<const double> mean1, double size1, std::span<const double> mean2, double size2)
{
    if (mean1.size() != mean2.size())
        throw DimensionError("ward_delta: mean lengths " + std::to_string(mean1.size()) + " and " +
                             std::to_string(mean2.size()) + " differ");
    if (size1 < 1 || size2 < 1)
        throw DimensionError("ward_delta: cluster sizes must be >= 1");
    double sq = 0.0;
    for (std::size_t i = 0; i < mean1.size(); ++i) {
        const double d = mean1[i] - mean2[i];
        sq += d * d;
    }
    return size1 * size2 / (size1 + size2) * sq;
}

namespace {

struct Candidate {
    double delta;
    Index a;
    Index b;

    // std::priority_queue is a max-heap; invert to pop the cheapest pair,
    // smallest ids first on equal cost.
    bool operator<(const Candidate& o) const { return std::tie(delta, a, b) > std::tie(o.delta, o.a, o.b); }
};

} // namespace

ClusterTree ward_cluster(const MatrixXd& X, const Adjacency& adj)
{
    const Index n = X.rows();
    const Index p = X.cols();
    if (p < 1)
        throw DimensionError("ward_cluster: X has no columns");
    if (adj.num_vertices() != p)
        throw DimensionError("ward_cluster: adjacency has " + std::to_string(adj.num_vertices()) +
                             " vertices, X has " + std::to_string(p) + " columns");
    if (!X.allFinite())
        throw DimensionError("ward_cluster: X contains non-finite values");
    if (const auto comps = count_components(adj); comps != 1)
        throw DisconnectedError("ward_cluster: adjacency graph has " + std::to_string(comps) +
                                    " connected components, expected 1",
                                comps);

    const Index q = 2 * p - 1;
    // Column-major storage: one mean vector per cluster.
    MatrixXd means(n, q);
    means.leftCols(p) = X;
    std::vector<double> sizes(std::size_t(q), 1.0);
    std::vector<bool> active(std::size_t(q), false);
    std::vector<std::set<Index>> nbrs(static_cast<std::size_t>(q));
    for (Index v = 0; v < p; ++v) {
        active[std::size_t(v)] = true;
        for (Index u : adj.neighbors[std::size_t(v)])
            if (u != v)
                nbrs[std::size_t(v)].insert(u);
    }

    auto mean_of = [&](Index c) { return std::span<const double>(means.col(c).data(), std::size_t(n)); };
    std::priority_queue<Candidate> heap;
    for (Index v = 0; v < p; ++v)
        for (Index u : nbrs[std::size_t(v)])
            if (v < u)
                heap.push({ward_delta(mean_of(v), 1.0, mean_of(u), 1.0), v, u});

    std::vector<Merge> merges;
    merges.reserve(std::size_t(p - 1));
    for (Index next = p; next < q; ++next) {
        Candidate best{};
        for (;;) {
            if (heap.empty())
                throw StructureError("ward_cluster: ran out of admissible pairs");
            best = heap.top();
            heap.pop();
            if (active[std::size_t(best.a)] && active[std::size_t(best.b)])
                break;
        }
        const Index a = best.a;
        const Index b = best.b;
        const double sa = sizes[std::size_t(a)];
        const double sb = sizes[std::size_t(b)];
        sizes[std::size_t(next)] = sa + sb;
        means.col(next) = (sa * means.col(a) + sb * means.col(b)) / (sa + sb);
        active[std::size_t(a)] = active[std::size_t(b)] = false;
        active[std::size_t(next)] = true;

        auto& merged = nbrs[std::size_t(next)];
        merged = std::move(nbrs[std::size_t(a)]);
        merged.insert(nbrs[std::size_t(b)].begin(), nbrs[std::size_t(b)].end());
        nbrs[std::size_t(b)].clear();
        merged.erase(a);
        merged.erase(b);
        for (Index c : merged) {
            auto& back = nbrs[std::size_t(c)];
            back.erase(a);
            back.erase(b);
            back.insert(next);
            heap.push({ward_delta(mean_of(c), sizes[std::size_t(c)], mean_of(next), sizes[std::size_t(next)]), c,
                       next});
        }
        merges.push_back({a, b, best.delta});
    }
    return ClusterTree(p, merges);
}

} // namespace tsp
