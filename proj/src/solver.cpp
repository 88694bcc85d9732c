#include "tsp/solver.hpp"

#include "tsp/feature.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

namespace tsp {

void SolverConfig::validate() const
{
    if (max_iter < 1)
        throw ConfigError("solver: max_iter must be >= 1");
    if (!(rel_tol > 0.0))
        throw ConfigError("solver: rel_tol must be > 0");
    if (patience < 1)
        throw ConfigError("solver: patience must be >= 1");
    if (lipschitz && !(*lipschitz > 0.0))
        throw ConfigError("solver: Lipschitz override must be > 0");
}

namespace {

double objective(const LossOracle& loss, const Penalty& penalty, const Parameters& x)
{
    return loss(x.W, x.b, false).value + penalty.value(x.W);
}

void check_finite(double F, int iteration)
{
    if (!std::isfinite(F))
        throw DivergenceError("objective became non-finite at iteration " + std::to_string(iteration), iteration);
}

OptimResult forward_backward(const LossOracle& loss, const Penalty& penalty, Parameters x, double L,
                             const SolverConfig& config, bool accelerate)
{
    config.validate();
    if (!(L > 0.0) || !std::isfinite(L))
        throw ConfigError("solver: Lipschitz bound must be finite and > 0");
    const double step = 1.0 / L;
    const bool has_b = x.b.size() > 0;

    OptimResult out;
    double F = objective(loss, penalty, x);
    check_finite(F, 0);
    out.objective.reserve(std::size_t(std::min(config.max_iter, 100000)) + 1);
    out.objective.push_back(F);

    Parameters y = x;
    Parameters next;
    double t = 1.0;
    int small = 0;
    LossEval at_y = loss(y.W, y.b, true);
    for (int k = 1; k <= config.max_iter; ++k) {
        next.W = y.W - step * at_y.grad_w;
        penalty.prox(next.W, step);
        if (has_b)
            next.b = y.b - step * at_y.grad_b;

        double Fnext;
        if (accelerate) {
            Fnext = objective(loss, penalty, next);
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            const double beta = (t - 1.0) / t_next;
            y.W = next.W + beta * (next.W - x.W);
            if (has_b)
                y.b = next.b + beta * (next.b - x.b);
            t = t_next;
            x = next;
        } else {
            x = next;
            y = x;
        }
        // Without momentum the gradient at the new iterate doubles as the
        // next step's gradient and its value gives the objective.
        if (!accelerate) {
            at_y = loss(y.W, y.b, true);
            Fnext = at_y.value + penalty.value(x.W);
        }
        check_finite(Fnext, k);
        out.objective.push_back(Fnext);
        out.iterations = k;

        const double scale = std::max({std::abs(Fnext), std::abs(F), DBL_MIN});
        small = std::abs(Fnext - F) <= config.rel_tol * scale ? small + 1 : 0;
        F = Fnext;
        if (small >= config.patience) {
            out.converged = true;
            break;
        }
        if (accelerate && k < config.max_iter)
            at_y = loss(y.W, y.b, true);
    }
    out.params = std::move(x);
    return out;
}

} // namespace

OptimResult fista(const LossOracle& loss, const Penalty& penalty, Parameters init, double L,
                  const SolverConfig& config)
{
    return forward_backward(loss, penalty, std::move(init), L, config, true);
}

OptimResult ista(const LossOracle& loss, const Penalty& penalty, Parameters init, double L,
                 const SolverConfig& config)
{
    return forward_backward(loss, penalty, std::move(init), L, config, false);
}

double fixed_point_residual(const LossOracle& loss, const Penalty& penalty, const Parameters& at, double L)
{
    const LossEval g = loss(at.W, at.b, true);
    MatrixXd W = at.W - g.grad_w / L;
    penalty.prox(W, 1.0 / L);
    double r = (W - at.W).lpNorm<Eigen::Infinity>();
    if (at.b.size() > 0)
        r = std::max(r, (g.grad_b / L).lpNorm<Eigen::Infinity>());
    return r;
}

OptimResult reweighted_l1(const LossOracle& loss, double lambda, Parameters init, double L,
                          const SolverConfig& config, int stages, double eps, std::vector<int>* stage_ends,
                          VectorXd* final_weights)
{
    if (stages < 1)
        throw ConfigError("reweighted_l1: stages must be >= 1");
    if (!(eps > 0.0))
        throw ConfigError("reweighted_l1: eps must be > 0");
    if (init.W.cols() != 1)
        throw DimensionError("reweighted_l1: expects a single coefficient column");
    VectorXd weights = VectorXd::Ones(init.W.rows());
    OptimResult total;
    if (stage_ends)
        stage_ends->clear();
    for (int s = 0; s < stages; ++s) {
        if (s > 0)
            weights = (total.params.W.col(0).cwiseAbs().array() + eps).inverse().matrix();
        OptimResult stage =
            fista(loss, Penalty::weighted_l1(lambda, weights), s == 0 ? init : total.params, L, config);
        const std::size_t skip = s == 0 ? 0 : 1;
        total.objective.insert(total.objective.end(), stage.objective.begin() + std::ptrdiff_t(skip),
                               stage.objective.end());
        total.iterations += stage.iterations;
        total.converged = stage.converged;
        total.params = std::move(stage.params);
        if (stage_ends)
            stage_ends->push_back(int(total.objective.size()));
    }
    if (final_weights)
        *final_weights = weights;
    return total;
}

std::string to_string(ModelPenalty p)
{
    switch (p) {
    case ModelPenalty::None:
        return "none";
    case ModelPenalty::Ridge:
        return "ridge";
    case ModelPenalty::L1:
        return "l1";
    case ModelPenalty::WeightedL1:
        return "weighted-l1";
    case ModelPenalty::ElasticNet:
        return "elastic-net";
    case ModelPenalty::ReweightedL1:
        return "reweighted-l1";
    case ModelPenalty::Tree:
        return "tree";
    case ModelPenalty::MultiTask:
        return "multitask";
    }
    return "?";
}

bool ModelSpec::needs_tree() const
{
    return penalty == ModelPenalty::Tree || penalty == ModelPenalty::WeightedL1;
}

std::string ModelSpec::describe() const
{
    std::string s = to_string(loss) + "/" + to_string(penalty);
    if (penalty == ModelPenalty::Tree || penalty == ModelPenalty::MultiTask)
        s += "-" + to_string(flavor);
    if (penalty == ModelPenalty::Tree || penalty == ModelPenalty::WeightedL1) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", rho);
        s += std::string("(rho=") + buf + ")";
    }
    if (penalty == ModelPenalty::ElasticNet) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", alpha);
        s += std::string("(alpha=") + buf + ")";
    }
    if (fits_augmented())
        s += "@augmented";
    return s;
}

Index FitResult::nonzeros() const { return Index((W.array() != 0.0).count()); }

FitProblem::FitProblem(const Dataset& data, const ModelSpec& spec, const ClusterTree* tree, SolverConfig config)
    : spec_(spec), config_(config)
{
    data.validate();
    config_.validate();
    if (spec.lambda < 0.0 || spec.alpha < 0.0)
        throw ConfigError("model: penalty parameters must be >= 0");
    if (spec.fits_augmented() && tree == nullptr)
        throw ConfigError("model " + spec.describe() + " requires a cluster tree");
    if (data.num_samples() < 1)
        throw DimensionError("model: dataset is empty");

    design_ = spec.fits_augmented() ? augment(data.X, *tree) : data.X;
    x_mean_ = design_.colwise().mean().transpose();
    design_.rowwise() -= x_mean_.transpose();

    if (is_classification(spec.loss)) {
        classes_ = class_values(data.y);
        if (classes_.size() < 2)
            throw ConfigError("classification needs at least 2 classes, got " + std::to_string(classes_.size()));
        labels_ = encode_labels(data.y, classes_);
        outputs_ = int(classes_.size());
    }
    switch (spec.loss) {
    case LossKind::Squared:
        targets_ = data.y;
        break;
    case LossKind::SquaredOVA:
    case LossKind::LogisticOVA:
        targets_ = indicator_response(labels_, outputs_);
        break;
    case LossKind::Multinomial:
        break;
    }
    intercept_ = spec.loss == LossKind::LogisticOVA || spec.loss == LossKind::Multinomial;
    if (!intercept_) {
        target_mean_ = targets_.colwise().mean().transpose();
        targets_.rowwise() -= target_mean_.transpose();
    }

    if (spec.penalty == ModelPenalty::ReweightedL1 && outputs_ != 1)
        throw ConfigError("reweighted l1 is only available for single-output regression");
    if (spec.penalty == ModelPenalty::Tree) {
        if (!(spec.rho > 0.0))
            throw ConfigError("tree penalty: rho must be > 0");
        groups_ = std::make_shared<const GroupStructure>(tree_groups(*tree, spec.rho, spec.flavor));
    }
    if (spec.penalty == ModelPenalty::WeightedL1) {
        if (!(spec.rho > 0.0))
            throw ConfigError("weighted l1: rho must be > 0");
        feature_weights_ = node_depths(*tree).unaryExpr([&](double d) { return std::pow(spec.rho, d); });
    }

    if (config_.lipschitz) {
        lipschitz_ = *config_.lipschitz;
    } else {
        lipschitz_ = lipschitz_bound(design_, spec.loss, intercept_);
        if (!(lipschitz_ > 0.0))
            lipschitz_ = 1.0; // zero design: the coefficient gradient vanishes
    }
}

LossOracle FitProblem::oracle() const
{
    return [this](const MatrixXd& W, const VectorXd& b, bool need_grad) -> LossEval {
        switch (spec_.loss) {
        case LossKind::Squared:
        case LossKind::SquaredOVA: {
            if (!need_grad) {
                LossEval e;
                e.value = (targets_ - design_ * W).squaredNorm() / (2.0 * double(design_.rows()));
                return e;
            }
            return squared_value_grad(W, design_, targets_);
        }
        case LossKind::LogisticOVA:
            return logistic_ova_value_grad(W, b, design_, targets_);
        case LossKind::Multinomial:
            return multinomial_value_grad(W, b, design_, labels_);
        }
        throw ConfigError("unknown loss");
    };
}

Penalty FitProblem::penalty(double lambda) const
{
    switch (spec_.penalty) {
    case ModelPenalty::None:
        return Penalty::none();
    case ModelPenalty::Ridge:
        return Penalty::ridge(lambda);
    case ModelPenalty::L1:
    case ModelPenalty::ReweightedL1:
        return Penalty::l1(lambda);
    case ModelPenalty::WeightedL1:
        return Penalty::weighted_l1(lambda, feature_weights_);
    case ModelPenalty::ElasticNet:
        return Penalty::elastic_net(lambda, spec_.alpha * lambda);
    case ModelPenalty::Tree:
        return Penalty::tree(lambda, groups_);
    case ModelPenalty::MultiTask:
        return Penalty::multitask(lambda, spec_.flavor);
    }
    throw ConfigError("unknown penalty");
}

Parameters FitProblem::initial() const
{
    Parameters p;
    p.W = MatrixXd::Zero(dim(), outputs_);
    if (intercept_) {
        p.b.resize(outputs_);
        std::vector<double> counts(std::size_t(outputs_), 0.0);
        for (int l : labels_)
            counts[std::size_t(l)] += 1.0;
        const double n = double(labels_.size());
        for (int k = 0; k < outputs_; ++k) {
            const double pi = counts[std::size_t(k)] / n;
            p.b[k] = spec_.loss == LossKind::Multinomial ? std::log(pi) : std::log(pi / (1.0 - pi));
        }
    }
    return p;
}

Parameters FitProblem::solver_params(const FitResult& r) const
{
    if (r.W.rows() != dim() || r.W.cols() != outputs_)
        throw DimensionError("warm start has shape " + std::to_string(r.W.rows()) + "x" + std::to_string(r.W.cols()) +
                             ", problem needs " + std::to_string(dim()) + "x" + std::to_string(outputs_));
    Parameters p;
    p.W = r.W;
    if (intercept_)
        p.b = r.b + (x_mean_.transpose() * r.W).transpose();
    return p;
}

void FitProblem::finish(FitResult& r, const Parameters& p) const
{
    r.W = p.W;
    const VectorXd shift = (x_mean_.transpose() * p.W).transpose();
    r.b = intercept_ ? VectorXd(p.b - shift) : VectorXd(target_mean_ - shift);
    r.loss = spec_.loss;
    r.augmented = spec_.fits_augmented();
    r.classes = classes_;
    r.penalty = spec_.describe();
    r.lipschitz = lipschitz_;
}

FitResult FitProblem::fit(double lambda, const FitResult* warm) const
{
    if (lambda < 0.0)
        throw ConfigError("lambda must be >= 0");
    Parameters init = warm ? solver_params(*warm) : initial();
    FitResult r;
    OptimResult opt;
    if (spec_.penalty == ModelPenalty::ReweightedL1) {
        opt = reweighted_l1(oracle(), lambda, std::move(init), lipschitz_, config_, spec_.stages, spec_.epsilon,
                            &r.stage_ends);
    } else if (config_.accelerate) {
        opt = fista(oracle(), penalty(lambda), std::move(init), lipschitz_, config_);
    } else {
        opt = ista(oracle(), penalty(lambda), std::move(init), lipschitz_, config_);
    }
    r.objective = std::move(opt.objective);
    r.iterations = opt.iterations;
    r.converged = opt.converged;
    r.lambda = lambda;
    finish(r, opt.params);
    return r;
}

double FitProblem::lambda_max() const
{
    const Parameters p0 = initial();
    const MatrixXd G = oracle()(p0.W, p0.b, true).grad_w;
    double best = 0.0;
    for (Index k = 0; k < G.cols(); ++k) {
        const auto g = G.col(k);
        double v = 0.0;
        switch (spec_.penalty) {
        case ModelPenalty::Tree:
            // The root group (weight 1) spans every coordinate, so the dual
            // norm is bounded by the dual of the root group norm.
            v = spec_.flavor == NormFlavor::L2 ? g.norm() : g.lpNorm<1>();
            break;
        case ModelPenalty::WeightedL1:
            v = g.cwiseAbs().cwiseQuotient(feature_weights_).maxCoeff();
            break;
        default:
            v = g.lpNorm<Eigen::Infinity>();
            break;
        }
        best = std::max(best, v);
    }
    if (spec_.penalty == ModelPenalty::MultiTask) {
        best = 0.0;
        for (Index r = 0; r < G.rows(); ++r)
            best = std::max(best, spec_.flavor == NormFlavor::L2 ? G.row(r).norm() : G.row(r).lpNorm<1>());
    }
    // Nudge past the boundary so rounding in the prox cannot leave a
    // residual nonzero at the grid head.
    return best * (1.0 + 1e-10);
}

FitResult fit_model(const Dataset& data, const ModelSpec& spec, const ClusterTree* tree, const SolverConfig& config)
{
    return FitProblem(data, spec, tree, config).fit(spec.lambda);
}

std::vector<FitResult> fit_path(const FitProblem& problem, const std::vector<double>& lambdas)
{
    std::vector<FitResult> out;
    out.reserve(lambdas.size());
    for (double l : lambdas)
        out.push_back(problem.fit(l, out.empty() ? nullptr : &out.back()));
    return out;
}

MatrixXd decision_scores(const FitResult& r, const MatrixXd& X, const ClusterTree* tree)
{
    MatrixXd S;
    if (X.cols() == r.W.rows()) {
        S = X * r.W;
    } else if (r.augmented && tree != nullptr && X.cols() == tree->num_leaves() &&
               tree->num_nodes() == r.W.rows()) {
        S = augment(X, *tree) * r.W;
    } else {
        throw DimensionError("predict: input has " + std::to_string(X.cols()) + " columns, model expects " +
                             std::to_string(r.W.rows()) + (r.augmented ? " (or raw voxels with the tree)" : ""));
    }
    S.rowwise() += r.b.transpose();
    return S;
}

VectorXd predict(const FitResult& r, const MatrixXd& X, const ClusterTree* tree)
{
    const MatrixXd S = decision_scores(r, X, tree);
    if (r.loss == LossKind::Squared)
        return S.col(0);
    VectorXd out(S.rows());
    for (Index i = 0; i < S.rows(); ++i) {
        Index best = 0;
        for (Index k = 1; k < S.cols(); ++k)
            if (S(i, k) > S(i, best))
                best = k;
        out[i] = r.classes[std::size_t(best)];
    }
    return out;
}

} // namespace tsp
