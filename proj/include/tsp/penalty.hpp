#pragma once

#include "tsp/cluster.hpp"
#include "tsp/common.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tsp {

enum class NormFlavor { L2, Linf };

std::string to_string(NormFlavor f);
NormFlavor parse_flavor(const std::string& s);

/// Laminar family of index groups over 0..dim-1 with positive weights.
///
/// Construction validates that any two groups are disjoint or nested, that
/// every coordinate is covered and that weights are strictly positive. The
/// processing order lists groups deepest first (children before any group
/// containing them), ties by group index.
class GroupStructure {
public:
    GroupStructure(Index dim, const std::vector<std::vector<Index>>& groups, std::vector<double> weights,
                   NormFlavor flavor);

    Index dim() const { return dim_; }
    Index num_groups() const { return Index(weights_.size()); }
    NormFlavor flavor() const { return flavor_; }

    std::span<const Index> group(Index g) const;
    double weight(Index g) const { return weights_[std::size_t(g)]; }
    /// Number of strictly larger groups containing group g.
    int nesting_depth(Index g) const { return nesting_[std::size_t(g)]; }
    const std::vector<Index>& order() const { return order_; }

private:
    Index dim_;
    std::vector<Index> offsets_;
    std::vector<Index> indices_;
    std::vector<double> weights_;
    std::vector<int> nesting_;
    std::vector<Index> order_;
    NormFlavor flavor_;
};

/// One group per tree node (its descendant set) with weight rho^depth(node).
GroupStructure tree_groups(const ClusterTree& tree, double rho, NormFlavor flavor = NormFlavor::L2);

double norm_value(const VectorXd& w, const GroupStructure& gs);

// Single-group and coordinate-wise proximal operators.
VectorXd prox_group_l2(const VectorXd& v, double tau);
VectorXd project_l1_ball(const VectorXd& v, double radius);
VectorXd prox_group_linf(const VectorXd& v, double tau);
VectorXd prox_l1(const VectorXd& w, double lambda);
VectorXd prox_weighted_l1(const VectorXd& w, double lambda, const VectorXd& weights);
/// argmin_v 1/2||v - w||^2 + l1 ||v||_1 + l2 ||v||_2^2.
VectorXd prox_elastic_net(const VectorXd& w, double l1, double l2);

/// Exact proximal operator of lambda * Omega for a laminar structure,
/// obtained by composing the group operators in processing order.
VectorXd prox_tree(const VectorXd& w, double lambda, const GroupStructure& gs);

/// Row-wise group prox of a q x c matrix (one group per row).
MatrixXd prox_multitask(const MatrixXd& W, double lambda, NormFlavor flavor);
double multitask_norm(const MatrixXd& W, NormFlavor flavor);

enum class PenaltyKind { None, Ridge, L1, WeightedL1, ElasticNet, Tree, MultiTask };

/// Regularizer lambda * Omega bound to its parameters. Column-separable
/// penalties act on each column of a d x c coefficient matrix; MultiTask
/// couples the columns row by row.
class Penalty {
public:
    static Penalty none();
    static Penalty ridge(double lambda);
    static Penalty l1(double lambda);
    static Penalty weighted_l1(double lambda, VectorXd weights);
    static Penalty elastic_net(double l1, double l2);
    static Penalty tree(double lambda, std::shared_ptr<const GroupStructure> groups);
    static Penalty multitask(double lambda, NormFlavor flavor);

    PenaltyKind kind() const { return kind_; }
    double lambda() const { return lambda_; }

    /// lambda * Omega(W).
    double value(const MatrixXd& W) const;
    /// In place W <- Prox_{step * lambda * Omega}(W).
    void prox(MatrixXd& W, double step) const;

private:
    PenaltyKind kind_ = PenaltyKind::None;
    double lambda_ = 0.0;
    double lambda2_ = 0.0;
    VectorXd weights_;
    std::shared_ptr<const GroupStructure> groups_;
    NormFlavor flavor_ = NormFlavor::L2;
};

} // namespace tsp
