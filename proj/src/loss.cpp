#include "tsp/loss.hpp"

#include <cmath>

namespace tsp {

std::string to_string(LossKind k)
{
    switch (k) {
    case LossKind::Squared:
        return "squared";
    case LossKind::SquaredOVA:
        return "squared-ova";
    case LossKind::LogisticOVA:
        return "logistic-ova";
    case LossKind::Multinomial:
        return "multinomial";
    }
    return "?";
}

LossKind parse_loss(const std::string& s)
{
    if (s == "squared")
        return LossKind::Squared;
    if (s == "squared-ova")
        return LossKind::SquaredOVA;
    if (s == "logistic-ova")
        return LossKind::LogisticOVA;
    if (s == "multinomial")
        return LossKind::Multinomial;
    throw ConfigError("unknown loss '" + s + "' (expected squared, squared-ova, logistic-ova or multinomial)");
}

namespace {

void check_shapes(const MatrixXd& W, const MatrixXd& X, Index target_rows, Index target_cols, const char* who)
{
    if (X.cols() != W.rows())
        throw DimensionError(std::string(who) + ": X has " + std::to_string(X.cols()) + " columns, W has " +
                             std::to_string(W.rows()) + " rows");
    if (target_rows != X.rows())
        throw DimensionError(std::string(who) + ": " + std::to_string(target_rows) + " targets for " +
                             std::to_string(X.rows()) + " samples");
    if (target_cols >= 0 && target_cols != W.cols())
        throw DimensionError(std::string(who) + ": targets have " + std::to_string(target_cols) + " columns, W has " +
                             std::to_string(W.cols()));
}

// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

// 1 / (1 + exp(m)).
double sigmoid_neg(double m)
{
    if (m >= 0) {
        const double e = std::exp(-m);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(m));
}

} // namespace

LossEval squared_value_grad(const MatrixXd& W, const MatrixXd& X, const MatrixXd& Y)
{
    check_shapes(W, X, Y.rows(), Y.cols(), "squared_value_grad");
    const double n = double(X.rows());
    const MatrixXd R = Y - X * W;
    LossEval out;
    out.value = R.squaredNorm() / (2.0 * n);
    out.grad_w = -(X.transpose() * R) / n;
    return out;
}

LossEval logistic_ova_value_grad(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, const MatrixXd& Ybar)
{
    check_shapes(W, X, Ybar.rows(), Ybar.cols(), "logistic_ova_value_grad");
    if (b.size() != W.cols())
        throw DimensionError("logistic_ova_value_grad: intercept length mismatch");
    const double n = double(X.rows());
    MatrixXd S = X * W;
    S.rowwise() += b.transpose();
    MatrixXd dS(S.rows(), S.cols());
    double value = 0.0;
    for (Index k = 0; k < S.cols(); ++k) {
        for (Index i = 0; i < S.rows(); ++i) {
            const double y = Ybar(i, k);
            const double m = y * S(i, k);
            value += log1p_exp_neg(m);
            dS(i, k) = -y * sigmoid_neg(m);
        }
    }
    LossEval out;
    out.value = value / n;
    out.grad_w = X.transpose() * dS / n;
    out.grad_b = dS.colwise().sum().transpose() / n;
    return out;
}

LossEval multinomial_value_grad(const MatrixXd& W, const VectorXd& b, const MatrixXd& X,
                                const std::vector<int>& labels)
{
    check_shapes(W, X, Index(labels.size()), -1, "multinomial_value_grad");
    if (b.size() != W.cols())
        throw DimensionError("multinomial_value_grad: intercept length mismatch");
    const Index c = W.cols();
    const double n = double(X.rows());
    MatrixXd S = X * W;
    S.rowwise() += b.transpose();
    double value = 0.0;
    for (Index i = 0; i < S.rows(); ++i) {
        const int y = labels[std::size_t(i)];
        if (y < 0 || y >= c)
            throw IndexError("multinomial_value_grad: label " + std::to_string(y) + " outside [0, " +
                             std::to_string(c) + ")");
        const double mx = S.row(i).maxCoeff();
        double z = 0.0;
        for (Index k = 0; k < c; ++k)
            z += std::exp(S(i, k) - mx);
        value += mx + std::log(z) - S(i, y);
        for (Index k = 0; k < c; ++k)
            S(i, k) = std::exp(S(i, k) - mx) / z;
        S(i, y) -= 1.0;
    }
    LossEval out;
    out.value = value / n;
    out.grad_w = X.transpose() * S / n;
    out.grad_b = S.colwise().sum().transpose() / n;
    return out;
}

MatrixXd indicator_response(const std::vector<int>& labels, int num_classes)
{
    MatrixXd Y = MatrixXd::Constant(Index(labels.size()), num_classes, -1.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw IndexError("indicator_response: label " + std::to_string(labels[i]) + " out of range");
        Y(Index(i), labels[i]) = 1.0;
    }
    return Y;
}

MatrixXd class_probabilities(const MatrixXd& W, const VectorXd& b, const MatrixXd& X)
{
    if (X.cols() != W.rows() || b.size() != W.cols())
        throw DimensionError("class_probabilities: shape mismatch");
    MatrixXd S = X * W;
    S.rowwise() += b.transpose();
    for (Index i = 0; i < S.rows(); ++i) {
        const double mx = S.row(i).maxCoeff();
        S.row(i) = (S.row(i).array() - mx).exp().matrix();
        S.row(i) /= S.row(i).sum();
    }
    return S;
}

double spectral_norm(const MatrixXd& X, bool append_ones, double rel_tol, int max_iter)
{
    const Index d = X.cols() + (append_ones ? 1 : 0);
    if (X.rows() == 0 || d == 0)
        return 0.0;
    VectorXd v(d);
    for (Index i = 0; i < d; ++i)
        v[i] = 1.0 + 0.01 * double(i % 7);
    v.normalize();
    double estimate = 0.0;
    VectorXd u(X.rows());
    for (int it = 0; it < max_iter; ++it) {
        u = X * v.head(X.cols());
        if (append_ones)
            u.array() += v[d - 1];
        VectorXd next(d);
        next.head(X.cols()) = X.transpose() * u;
        if (append_ones)
            next[d - 1] = u.sum();
        const double nrm = next.norm();
        if (nrm == 0.0)
            return 0.0;
        const double updated = std::sqrt(nrm);
        v = next / nrm;
        if (it > 0 && std::abs(updated - estimate) <= rel_tol * updated) {
            estimate = updated;
            break;
        }
        estimate = updated;
    }
    return estimate;
}

double lipschitz_bound(const MatrixXd& X, LossKind kind, bool with_intercept)
{
    const double s = spectral_norm(X, with_intercept);
    double factor = 1.0;
    if (kind == LossKind::LogisticOVA)
        factor = 0.25;
    else if (kind == LossKind::Multinomial)
        factor = 0.5;
    return 1.01 * factor * s * s / double(X.rows());
}

} // namespace tsp

#include <algorithm>

namespace tsp {

void Dataset::validate() const
{
    if (y.size() != X.rows())
        throw DimensionError("dataset: " + std::to_string(y.size()) + " targets for " + std::to_string(X.rows()) +
                             " samples");
    if (!groups.empty() && Index(groups.size()) != X.rows())
        throw DimensionError("dataset: " + std::to_string(groups.size()) + " group ids for " +
                             std::to_string(X.rows()) + " samples");
    if (!X.allFinite() || !y.allFinite())
        throw DimensionError("dataset contains non-finite entries");
}

Dataset Dataset::subset(const std::vector<Index>& rows) const
{
    Dataset out;
    out.X.resize(Index(rows.size()), X.cols());
    out.y.resize(Index(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.X.row(Index(r)) = X.row(rows[r]);
        out.y[Index(r)] = y[rows[r]];
        if (!groups.empty())
            out.groups.push_back(groups[std::size_t(rows[r])]);
    }
    return out;
}

std::vector<double> class_values(const VectorXd& y)
{
    std::vector<double> v(y.data(), y.data() + y.size());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

std::vector<int> encode_labels(const VectorXd& y, const std::vector<double>& classes)
{
    std::vector<int> out(std::size_t(y.size()));
    for (Index i = 0; i < y.size(); ++i) {
        const auto it = std::lower_bound(classes.begin(), classes.end(), y[i]);
        if (it == classes.end() || *it != y[i])
            throw IndexError("label " + std::to_string(y[i]) + " is not one of the training classes");
        out[std::size_t(i)] = int(it - classes.begin());
    }
    return out;
}

} // namespace tsp
