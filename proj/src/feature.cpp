#include "tsp/feature.hpp"

#include <string>

namespace tsp {

MatrixXd augment(const MatrixXd& X, const ClusterTree& tree)
{
    const Index p = tree.num_leaves();
    if (X.cols() != p)
        throw DimensionError("augment: X has " + std::to_string(X.cols()) + " columns, tree has " +
                             std::to_string(p) + " leaves");
    MatrixXd out(X.rows(), tree.num_nodes());
    out.leftCols(p) = X;
    for (Index j = p; j < tree.num_nodes(); ++j) {
        const auto& n = tree.node(j);
        const double sl = double(tree.node(n.left).size);
        const double sr = double(tree.node(n.right).size);
        out.col(j) = (sl * out.col(n.left) + sr * out.col(n.right)) / (sl + sr);
    }
    return out;
}

VectorXd project_to_voxels(const VectorXd& w, const ClusterTree& tree)
{
    if (w.size() != tree.num_nodes())
        throw DimensionError("project_to_voxels: expected " + std::to_string(tree.num_nodes()) +
                             " coefficients, got " + std::to_string(w.size()));
    // Parents always carry larger ids than their children.
    VectorXd acc(tree.num_nodes());
    for (Index j = tree.num_nodes() - 1; j >= 0; --j) {
        const auto& n = tree.node(j);
        const double own = w[j] / double(n.size);
        acc[j] = n.parent < 0 ? own : acc[n.parent] + own;
    }
    return acc.head(tree.num_leaves());
}

VectorXd scale_slice(const VectorXd& w, const ClusterTree& tree, int depth)
{
    if (w.size() != tree.num_nodes())
        throw DimensionError("scale_slice: expected " + std::to_string(tree.num_nodes()) + " coefficients, got " +
                             std::to_string(w.size()));
    if (depth < 0)
        throw IndexError("scale_slice: depth must be >= 0");
    VectorXd colour = VectorXd::Zero(tree.num_nodes());
    for (Index j = tree.num_nodes() - 1; j >= 0; --j) {
        const auto& n = tree.node(j);
        if (n.depth == depth || (n.depth < depth && n.is_leaf()))
            colour[j] = w[j];
        else if (n.depth > depth)
            colour[j] = colour[n.parent];
    }
    return colour.head(tree.num_leaves());
}

VectorXd node_depths(const ClusterTree& tree)
{
    VectorXd d(tree.num_nodes());
    for (Index j = 0; j < tree.num_nodes(); ++j)
        d[j] = tree.node(j).depth;
    return d;
}

} // namespace tsp
