#pragma once

#include "tsp/cluster.hpp"
#include "tsp/common.hpp"
#include "tsp/loss.hpp"
#include "tsp/penalty.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tsp {

struct SolverConfig {
    int max_iter = 5000;
    double rel_tol = 1e-7;
    bool accelerate = true;
    std::optional<double> lipschitz; // overrides the computed bound
    std::uint64_t seed = 0;
    int patience = 5;                // consecutive small changes before stopping

    void validate() const;
};

struct Parameters {
    MatrixXd W;
    VectorXd b; // empty when the problem has no free intercept
};

/// Smooth loss at (W, b). The gradient may be skipped when need_grad is false.
using LossOracle = std::function<LossEval(const MatrixXd& W, const VectorXd& b, bool need_grad)>;

struct OptimResult {
    Parameters params;
    std::vector<double> objective; // F at the starting point, then after each iteration
    int iterations = 0;
    bool converged = false;
};

/// Accelerated forward-backward splitting with constant step 1/L. The
/// penalty is applied through its proximal operator; the intercept takes
/// plain gradient steps.
OptimResult fista(const LossOracle& loss, const Penalty& penalty, Parameters init, double L,
                  const SolverConfig& config);

/// Forward-backward splitting without momentum; objective is monotone.
OptimResult ista(const LossOracle& loss, const Penalty& penalty, Parameters init, double L,
                 const SolverConfig& config);

/// ||W - Prox_{penalty/L}(W - grad/L)||_inf, the fixed-point residual.
double fixed_point_residual(const LossOracle& loss, const Penalty& penalty, const Parameters& at, double L);

/// Multi-stage reweighted l1: stage t uses per-coordinate weights
/// 1 / (|w_j| + eps) from the previous stage (all ones at stage 1).
/// stage_ends receives the trace length after each stage.
OptimResult reweighted_l1(const LossOracle& loss, double lambda, Parameters init, double L,
                          const SolverConfig& config, int stages = 4, double eps = 0.01,
                          std::vector<int>* stage_ends = nullptr, VectorXd* final_weights = nullptr);

enum class ModelPenalty { None, Ridge, L1, WeightedL1, ElasticNet, ReweightedL1, Tree, MultiTask };

std::string to_string(ModelPenalty p);

struct ModelSpec {
    LossKind loss = LossKind::Squared;
    ModelPenalty penalty = ModelPenalty::L1;
    double lambda = 1.0;
    double rho = 1.0;          // tree group weights and depth-weighted l1
    double alpha = 0.05;       // elastic net l2 weight = alpha * lambda
    NormFlavor flavor = NormFlavor::L2;
    bool augmented = false;    // forced for Tree and WeightedL1
    int stages = 4;            // reweighted l1
    double epsilon = 0.01;

    bool needs_tree() const;
    bool fits_augmented() const { return augmented || needs_tree(); }
    std::string describe() const;
};

struct FitResult {
    MatrixXd W;                     // d x c (c = 1 for regression)
    VectorXd b;                     // c intercepts on the original design scale
    std::vector<double> objective;  // length iterations + 1
    int iterations = 0;
    bool converged = false;
    double lambda = 0.0;
    double lipschitz = 0.0;
    std::string penalty;
    LossKind loss = LossKind::Squared;
    bool augmented = false;
    std::vector<double> classes;    // label values for classification
    std::vector<int> stage_ends;    // reweighted l1 only

    /// Number of nonzero coefficients over all columns.
    Index nonzeros() const;
};

/// A dataset and model specification prepared once (design augmented and
/// centered, targets encoded, Lipschitz bound computed) so that many values
/// of lambda can be fitted cheaply.
class FitProblem {
public:
    FitProblem(const Dataset& data, const ModelSpec& spec, const ClusterTree* tree, SolverConfig config = {});

    FitResult fit(double lambda, const FitResult* warm = nullptr) const;

    Index dim() const { return design_.cols(); }
    int outputs() const { return outputs_; }
    double lipschitz() const { return lipschitz_; }
    /// Smallest lambda (up to the bound used) for which W = 0 is optimal.
    double lambda_max() const;
    /// Penalty with the given lambda, as used by the solver.
    Penalty penalty(double lambda) const;
    /// Loss on the centered design used by the solver.
    LossOracle oracle() const;
    /// Solver parameters corresponding to a fitted result.
    Parameters solver_params(const FitResult& r) const;

private:
    Parameters initial() const;
    void finish(FitResult& r, const Parameters& p) const;

    ModelSpec spec_;
    SolverConfig config_;
    MatrixXd design_; // centered
    VectorXd x_mean_;
    MatrixXd targets_; // centered for squared losses, Ybar for logistic OVA
    VectorXd target_mean_;
    std::vector<int> labels_;
    std::vector<double> classes_;
    int outputs_ = 1;
    bool intercept_ = false;
    double lipschitz_ = 0.0;
    VectorXd feature_weights_;
    std::shared_ptr<const GroupStructure> groups_;
};

FitResult fit_model(const Dataset& data, const ModelSpec& spec, const ClusterTree* tree,
                    const SolverConfig& config = {});

/// Fits along a decreasing lambda grid with warm starts.
std::vector<FitResult> fit_path(const FitProblem& problem, const std::vector<double>& lambdas);

/// Class scores (or regression outputs) X W + b; raw voxel input is
/// augmented with the tree when the model was fitted in augmented space.
MatrixXd decision_scores(const FitResult& r, const MatrixXd& X, const ClusterTree* tree = nullptr);

/// Regression outputs, or predicted label values (argmax, lowest class on ties).
VectorXd predict(const FitResult& r, const MatrixXd& X, const ClusterTree* tree = nullptr);

} // namespace tsp
