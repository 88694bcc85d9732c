#pragma once

#include "tsp/common.hpp"

#include <string>
#include <vector>

namespace tsp {

enum class LossKind { Squared, SquaredOVA, LogisticOVA, Multinomial };

std::string to_string(LossKind k);
LossKind parse_loss(const std::string& s);
inline bool is_classification(LossKind k) { return k != LossKind::Squared; }

struct LossEval {
    double value = 0.0;
    MatrixXd grad_w;
    VectorXd grad_b; // empty when the loss has no intercept
};

/// (1/2n) ||Y - X W||_F^2 and its gradient -(1/n) X^T (Y - X W). Covers
/// plain regression (one column) and one-versus-all squared loss.
LossEval squared_value_grad(const MatrixXd& W, const MatrixXd& X, const MatrixXd& Y);

/// (1/n) sum_i sum_k log(1 + exp(-Ybar_ik (x_i . w_k + b_k))).
LossEval logistic_ova_value_grad(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, const MatrixXd& Ybar);

/// Negative normalized multinomial log-likelihood; labels are 0..c-1.
LossEval multinomial_value_grad(const MatrixXd& W, const VectorXd& b, const MatrixXd& X,
                                const std::vector<int>& labels);

/// n x c matrix with +1 at (i, labels[i]) and -1 elsewhere.
MatrixXd indicator_response(const std::vector<int>& labels, int num_classes);

/// Softmax class probabilities, n x c.
MatrixXd class_probabilities(const MatrixXd& W, const VectorXd& b, const MatrixXd& X);

/// Largest singular value by power iteration on X^T X, stopped once the
/// estimate changes by less than rel_tol. With append_ones the matrix is
/// treated as [X, 1].
double spectral_norm(const MatrixXd& X, bool append_ones = false, double rel_tol = 1e-6, int max_iter = 100000);

/// Upper bound on the gradient Lipschitz constant: sigma_max^2 / n times
/// 1 (squared), 1/4 (logistic OVA) or 1/2 (multinomial), inflated by 1%.
double lipschitz_bound(const MatrixXd& X, LossKind kind, bool with_intercept = false);

} // namespace tsp

namespace tsp {

/// Design matrix with real targets (regression) or label values
/// (classification, mapped to classes in sorted order), plus optional
/// per-sample group ids used for leave-one-group-out splits.
struct Dataset {
    MatrixXd X;
    VectorXd y;
    std::vector<int> groups;

    Index num_samples() const { return X.rows(); }
    /// Throws on non-finite entries or mismatched lengths.
    void validate() const;
    Dataset subset(const std::vector<Index>& rows) const;
};

/// Sorted distinct label values of y.
std::vector<double> class_values(const VectorXd& y);
/// Class index (into class_values) of every sample.
std::vector<int> encode_labels(const VectorXd& y, const std::vector<double>& classes);

} // namespace tsp
