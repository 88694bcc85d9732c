#include "tsp/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tsp {

std::string to_string(NormFlavor f) { return f == NormFlavor::L2 ? "l2" : "linf"; }

NormFlavor parse_flavor(const std::string& s)
{
    if (s == "l2")
        return NormFlavor::L2;
    if (s == "linf")
        return NormFlavor::Linf;
    throw ConfigError("unknown norm flavor '" + s + "' (expected l2 or linf)");
}

GroupStructure::GroupStructure(Index dim, const std::vector<std::vector<Index>>& groups, std::vector<double> weights,
                               NormFlavor flavor)
    : dim_(dim), weights_(std::move(weights)), flavor_(flavor)
{
    if (groups.size() != weights_.size())
        throw StructureError("group structure: " + std::to_string(groups.size()) + " groups but " +
                             std::to_string(weights_.size()) + " weights");
    offsets_.push_back(0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (!(weights_[g] > 0.0) || !std::isfinite(weights_[g]))
            throw StructureError("group " + std::to_string(g) + " has non-positive weight");
        if (groups[g].empty())
            throw StructureError("group " + std::to_string(g) + " is empty");
        for (Index i : groups[g]) {
            if (i < 0 || i >= dim)
                throw IndexError("group " + std::to_string(g) + " references index " + std::to_string(i) +
                                 " outside [0, " + std::to_string(dim) + ")");
            indices_.push_back(i);
        }
        offsets_.push_back(Index(indices_.size()));
    }

    // Laminarity: visiting groups from largest to smallest, every member of
    // a new group must currently sit in the same smallest enclosing group.
    const auto G = groups.size();
    std::vector<Index> by_size(G);
    std::iota(by_size.begin(), by_size.end(), Index{0});
    std::stable_sort(by_size.begin(), by_size.end(),
                     [&](Index a, Index b) { return groups[std::size_t(a)].size() > groups[std::size_t(b)].size(); });
    std::vector<Index> owner(std::size_t(dim), -1);
    std::vector<Index> stamp(std::size_t(dim), -1);
    nesting_.assign(G, 0);
    for (Index g : by_size) {
        const auto& members = groups[std::size_t(g)];
        const Index enclosing = owner[std::size_t(members.front())];
        for (Index i : members) {
            if (stamp[std::size_t(i)] == g)
                throw StructureError("group " + std::to_string(g) + " lists index " + std::to_string(i) + " twice");
            stamp[std::size_t(i)] = g;
            if (owner[std::size_t(i)] != enclosing)
                throw StructureError("groups are not laminar: group " + std::to_string(g) +
                                     " partially overlaps another group");
        }
        nesting_[std::size_t(g)] = enclosing < 0 ? 0 : nesting_[std::size_t(enclosing)] + 1;
        for (Index i : members)
            owner[std::size_t(i)] = g;
    }
    for (Index i = 0; i < dim; ++i)
        if (owner[std::size_t(i)] < 0)
            throw StructureError("index " + std::to_string(i) + " is not covered by any group");

    order_.resize(G);
    std::iota(order_.begin(), order_.end(), Index{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](Index a, Index b) { return nesting_[std::size_t(a)] > nesting_[std::size_t(b)]; });
}

std::span<const Index> GroupStructure::group(Index g) const
{
    if (g < 0 || g >= num_groups())
        throw IndexError("group id " + std::to_string(g) + " out of range");
    const auto b = offsets_[std::size_t(g)];
    return {indices_.data() + b, std::size_t(offsets_[std::size_t(g) + 1] - b)};
}

GroupStructure tree_groups(const ClusterTree& tree, double rho, NormFlavor flavor)
{
    if (!(rho > 0.0))
        throw ConfigError("tree_groups: rho must be > 0");
    std::vector<std::vector<Index>> groups;
    std::vector<double> weights;
    groups.reserve(std::size_t(tree.num_nodes()));
    for (Index j = 0; j < tree.num_nodes(); ++j) {
        const auto d = tree.descendants(j);
        groups.emplace_back(d.begin(), d.end());
        weights.push_back(std::pow(rho, tree.depth(j)));
    }
    return GroupStructure(tree.num_nodes(), groups, std::move(weights), flavor);
}

namespace {

double group_norm(const VectorXd& w, std::span<const Index> idx, NormFlavor flavor)
{
    double acc = 0.0;
    for (Index i : idx) {
        const double a = std::abs(w[i]);
        if (flavor == NormFlavor::L2)
            acc += a * a;
        else
            acc = std::max(acc, a);
    }
    return flavor == NormFlavor::L2 ? std::sqrt(acc) : acc;
}

} // namespace

double norm_value(const VectorXd& w, const GroupStructure& gs)
{
    if (w.size() != gs.dim())
        throw IndexError("norm_value: vector length " + std::to_string(w.size()) + " does not match structure dim " +
                         std::to_string(gs.dim()));
    double total = 0.0;
    for (Index g = 0; g < gs.num_groups(); ++g)
        total += gs.weight(g) * group_norm(w, gs.group(g), gs.flavor());
    return total;
}

VectorXd prox_group_l2(const VectorXd& v, double tau)
{
    const double nrm = v.norm();
    if (nrm <= tau)
        return VectorXd::Zero(v.size());
    return (1.0 - tau / nrm) * v;
}

VectorXd project_l1_ball(const VectorXd& v, double radius)
{
    if (radius < 0.0)
        throw ConfigError("project_l1_ball: radius must be >= 0");
    if (v.lpNorm<1>() <= radius)
        return v;
    if (radius == 0.0)
        return VectorXd::Zero(v.size());
    std::vector<double> u(std::size_t(v.size()));
    for (Index i = 0; i < v.size(); ++i)
        u[std::size_t(i)] = std::abs(v[i]);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cumsum += u[k];
        const double t = (cumsum - radius) / double(k + 1);
        if (u[k] - t > 0.0)
            theta = t;
        else
            break;
    }
    VectorXd out(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        const double m = std::max(std::abs(v[i]) - theta, 0.0);
        out[i] = std::copysign(m, v[i]);
    }
    return out;
}

VectorXd prox_group_linf(const VectorXd& v, double tau)
{
    if (v.lpNorm<1>() <= tau)
        return VectorXd::Zero(v.size());
    return v - project_l1_ball(v, tau);
}

namespace {

double soft(double x, double t)
{
    if (x > t)
        return x - t;
    if (x < -t)
        return x + t;
    return 0.0;
}

} // namespace

VectorXd prox_l1(const VectorXd& w, double lambda)
{
    VectorXd out(w.size());
    for (Index i = 0; i < w.size(); ++i)
        out[i] = soft(w[i], lambda);
    return out;
}

VectorXd prox_weighted_l1(const VectorXd& w, double lambda, const VectorXd& weights)
{
    if (weights.size() != w.size())
        throw DimensionError("prox_weighted_l1: weight length mismatch");
    VectorXd out(w.size());
    for (Index i = 0; i < w.size(); ++i)
        out[i] = soft(w[i], lambda * weights[i]);
    return out;
}

VectorXd prox_elastic_net(const VectorXd& w, double l1, double l2)
{
    return prox_l1(w, l1) / (1.0 + 2.0 * l2);
}

VectorXd prox_tree(const VectorXd& w, double lambda, const GroupStructure& gs)
{
    if (w.size() != gs.dim())
        throw IndexError("prox_tree: vector length " + std::to_string(w.size()) + " does not match structure dim " +
                         std::to_string(gs.dim()));
    if (lambda < 0.0)
        throw ConfigError("prox_tree: lambda must be >= 0");
    VectorXd v = w;
    VectorXd buf;
    for (Index g : gs.order()) {
        const auto idx = gs.group(g);
        const double tau = lambda * gs.weight(g);
        buf.resize(Index(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k)
            buf[Index(k)] = v[idx[k]];
        const VectorXd out = gs.flavor() == NormFlavor::L2 ? prox_group_l2(buf, tau) : prox_group_linf(buf, tau);
        for (std::size_t k = 0; k < idx.size(); ++k)
            v[idx[k]] = out[Index(k)];
    }
    return v;
}

MatrixXd prox_multitask(const MatrixXd& W, double lambda, NormFlavor flavor)
{
    MatrixXd out(W.rows(), W.cols());
    for (Index r = 0; r < W.rows(); ++r) {
        const VectorXd row = W.row(r).transpose();
        out.row(r) = (flavor == NormFlavor::L2 ? prox_group_l2(row, lambda) : prox_group_linf(row, lambda)).transpose();
    }
    return out;
}

double multitask_norm(const MatrixXd& W, NormFlavor flavor)
{
    double total = 0.0;
    for (Index r = 0; r < W.rows(); ++r)
        total += flavor == NormFlavor::L2 ? W.row(r).norm() : W.row(r).lpNorm<Eigen::Infinity>();
    return total;
}

Penalty Penalty::none() { return Penalty{}; }

Penalty Penalty::ridge(double lambda)
{
    Penalty p;
    p.kind_ = PenaltyKind::Ridge;
    p.lambda_ = lambda;
    return p;
}

Penalty Penalty::l1(double lambda)
{
    Penalty p;
    p.kind_ = PenaltyKind::L1;
    p.lambda_ = lambda;
    return p;
}

Penalty Penalty::weighted_l1(double lambda, VectorXd weights)
{
    Penalty p;
    p.kind_ = PenaltyKind::WeightedL1;
    p.lambda_ = lambda;
    p.weights_ = std::move(weights);
    return p;
}

Penalty Penalty::elastic_net(double l1, double l2)
{
    Penalty p;
    p.kind_ = PenaltyKind::ElasticNet;
    p.lambda_ = l1;
    p.lambda2_ = l2;
    return p;
}

Penalty Penalty::tree(double lambda, std::shared_ptr<const GroupStructure> groups)
{
    if (!groups)
        throw ConfigError("tree penalty requires a group structure");
    Penalty p;
    p.kind_ = PenaltyKind::Tree;
    p.lambda_ = lambda;
    p.groups_ = std::move(groups);
    return p;
}

Penalty Penalty::multitask(double lambda, NormFlavor flavor)
{
    Penalty p;
    p.kind_ = PenaltyKind::MultiTask;
    p.lambda_ = lambda;
    p.flavor_ = flavor;
    return p;
}

double Penalty::value(const MatrixXd& W) const
{
    double total = 0.0;
    switch (kind_) {
    case PenaltyKind::None:
        return 0.0;
    case PenaltyKind::Ridge:
        return lambda_ * W.squaredNorm();
    case PenaltyKind::L1:
        return lambda_ * W.lpNorm<1>();
    case PenaltyKind::WeightedL1:
        for (Index k = 0; k < W.cols(); ++k)
            total += W.col(k).cwiseAbs().dot(weights_);
        return lambda_ * total;
    case PenaltyKind::ElasticNet:
        return lambda_ * W.lpNorm<1>() + lambda2_ * W.squaredNorm();
    case PenaltyKind::Tree:
        for (Index k = 0; k < W.cols(); ++k)
            total += norm_value(W.col(k), *groups_);
        return lambda_ * total;
    case PenaltyKind::MultiTask:
        return lambda_ * multitask_norm(W, flavor_);
    }
    return 0.0;
}

void Penalty::prox(MatrixXd& W, double step) const
{
    const double t = step * lambda_;
    switch (kind_) {
    case PenaltyKind::None:
        return;
    case PenaltyKind::Ridge:
        W /= 1.0 + 2.0 * t;
        return;
    case PenaltyKind::L1:
        for (Index k = 0; k < W.cols(); ++k)
            W.col(k) = prox_l1(W.col(k), t);
        return;
    case PenaltyKind::WeightedL1:
        for (Index k = 0; k < W.cols(); ++k)
            W.col(k) = prox_weighted_l1(W.col(k), t, weights_);
        return;
    case PenaltyKind::ElasticNet:
        for (Index k = 0; k < W.cols(); ++k)
            W.col(k) = prox_elastic_net(W.col(k), t, step * lambda2_);
        return;
    case PenaltyKind::Tree:
        for (Index k = 0; k < W.cols(); ++k)
            W.col(k) = prox_tree(W.col(k), t, *groups_);
        return;
    case PenaltyKind::MultiTask:
        W = prox_multitask(W, t, flavor_);
        return;
    }
}

} // namespace tsp
