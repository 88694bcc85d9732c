#pragma once

#include "tsp/cluster.hpp"
#include "tsp/common.hpp"
#include "tsp/loss.hpp"
#include "tsp/solver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tsp {

enum class SplitKind { KFold, LeaveOneGroupOut };

struct CVPlan {
    SplitKind kind = SplitKind::KFold;
    std::vector<int> fold_of; // fold id of every sample
    int num_folds = 0;
    bool nested = true;       // select lambda by inner CV on each training part
    std::uint64_t seed = 0;

    std::vector<Index> train(int fold) const;
    std::vector<Index> test(int fold) const;
    /// Throws PlanError on empty folds or size mismatches.
    void validate(Index num_samples) const;
};

/// Balanced k-fold split of a seeded permutation.
CVPlan kfold_plan(Index n, int k, std::uint64_t seed, bool nested = true);
/// One fold per distinct group id (sorted order).
CVPlan leave_one_group_out_plan(const std::vector<int>& groups, bool nested = true);

enum class GridPreset { Simulation, General };

/// Decreasing log-spaced grid. Simulation: 1e3 .. 1e-3. General:
/// lambda_max * 2^0 .. lambda_max * 2^-(count-1).
std::vector<double> lambda_grid(GridPreset preset, int count = 30, double lambda_max = 1.0);

/// Held-out error: mean squared error for regression, misclassification
/// percentage for classification.
double prediction_error(LossKind loss, const VectorXd& truth, const VectorXd& predicted);

struct GridSearch {
    std::vector<double> grid;
    MatrixXd fold_errors; // folds x grid
    VectorXd mean_errors;
    std::vector<double> fold_nonzero_pct; // at the selected lambda
    Index best = 0;       // lowest mean error, ties towards the larger lambda
};

/// Fits every fold's training part along the grid (warm starts) and scores
/// the held-out part.
GridSearch grid_search(const Dataset& data, const CVPlan& plan, const ModelSpec& spec,
                       const std::vector<double>& grid, const ClusterTree* tree, const SolverConfig& config = {},
                       int jobs = 1);

struct EvalReport {
    std::string model;
    std::string metric;
    std::vector<double> fold_errors;
    std::vector<double> chosen_lambda;
    std::vector<double> nonzero_pct; // per fold, in the fitting space
    double mean = 0.0;
    double stddev = 0.0;
    double median_nonzero_pct = 0.0;
    double wall_time_s = 0.0;

    /// Recomputes mean, stddev (n - 1 denominator) and the median.
    void summarize();
};

/// Outer loop over the plan's folds. Nested plans pick lambda per fold by
/// inner CV on the training part and refit; non-nested plans pick the
/// lambda with the lowest mean held-out error across the outer folds.
EvalReport cross_validate(const Dataset& data, const CVPlan& plan, const ModelSpec& spec,
                          const std::vector<double>& grid, const ClusterTree* tree, const SolverConfig& config = {},
                          int jobs = 1);

struct WilcoxonResult {
    double p_value = 1.0;
    double statistic = 0.0; // sum of positive ranks
    Index used = 0;         // non-zero differences
    bool exact = true;
};

/// Two-sided paired signed-rank test on a - b. Zero differences are
/// dropped; exact distribution for up to 12 remaining pairs, normal
/// approximation with continuity and tie correction beyond.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

} // namespace tsp
