#include "../support/oracles.hpp"

#include "tsp/datagen.hpp"
#include "tsp/feature.hpp"
#include "tsp/harness.hpp"
#include "tsp/solver.hpp"

#include <doctest.h>

#include <Eigen/QR>
#include <random>

using namespace tsp;

namespace {

LossOracle squared_oracle(const MatrixXd& X, const MatrixXd& Y)
{
    return [X, Y](const MatrixXd& W, const VectorXd&, bool) { return squared_value_grad(W, X, Y); };
}

SolverConfig long_run(int iters)
{
    SolverConfig c;
    c.max_iter = iters;
    c.rel_tol = 1e-300;
    c.patience = iters + 1;
    return c;
}

Dataset regression_data(Index n, Index p, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Dataset d;
    d.X = MatrixXd::NullaryExpr(n, p, [&] { return nd(rng); });
    VectorXd w = VectorXd::Zero(p);
    w.head(std::min<Index>(3, p)).setConstant(1.5);
    d.y = d.X * w + 0.2 * VectorXd::NullaryExpr(n, [&] { return nd(rng); }) + VectorXd::Constant(n, 2.0);
    return d;
}

} // namespace

TEST_CASE("unpenalized fista reaches least squares")
{
    const MatrixXd X = MatrixXd::Random(5, 3);
    const MatrixXd y = MatrixXd::Random(5, 1);
    const double L = lipschitz_bound(X, LossKind::Squared);
    const auto r = fista(squared_oracle(X, y), Penalty::none(), {MatrixXd::Zero(3, 1), {}}, L, long_run(20000));
    const MatrixXd ls = X.colPivHouseholderQr().solve(y);
    CHECK((r.params.W - ls).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("lasso with an orthonormal design is a soft threshold")
{
    const Index n = 8;
    const MatrixXd Q = Eigen::HouseholderQR<MatrixXd>(MatrixXd::Random(n, 4)).householderQ() * MatrixXd::Identity(n, 4);
    const MatrixXd X = std::sqrt(double(n)) * Q;
    const MatrixXd y = MatrixXd::Random(n, 1);
    const double lambda = 0.1;
    const double L = lipschitz_bound(X, LossKind::Squared);
    const auto r = fista(squared_oracle(X, y), Penalty::l1(lambda), {MatrixXd::Zero(4, 1), {}}, L, long_run(5000));
    const VectorXd want = prox_l1(X.transpose() * y / double(n), lambda);
    CHECK((r.params.W.col(0) - want).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fista rate bound on a small instance")
{
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    const MatrixXd X = MatrixXd::NullaryExpr(30, 20, [&] { return nd(rng); });
    const MatrixXd y = MatrixXd::NullaryExpr(30, 1, [&] { return nd(rng); });
    const auto loss = squared_oracle(X, y);
    const double L = lipschitz_bound(X, LossKind::Squared);
    const Parameters init{MatrixXd::Zero(20, 1), {}};
    const auto ref = fista(loss, Penalty::l1(0.1), init, L, long_run(100000));
    const double Fstar = ref.objective.back();
    const auto run = fista(loss, Penalty::l1(0.1), init, L, long_run(200));
    const double R2 = ref.params.W.squaredNorm();
    for (std::size_t k = 1; k < run.objective.size(); ++k)
        CHECK(run.objective[k] - Fstar <= 2 * L * R2 / double((k + 1) * (k + 1)));
}

TEST_CASE("ista is monotone and agrees with fista")
{
    const MatrixXd X = MatrixXd::Random(20, 10);
    const MatrixXd y = MatrixXd::Random(20, 1);
    const auto loss = squared_oracle(X, y);
    const double L = lipschitz_bound(X, LossKind::Squared);
    const Parameters init{MatrixXd::Zero(10, 1), {}};
    const auto slow = ista(loss, Penalty::l1(0.05), init, L, long_run(50000));
    for (std::size_t k = 1; k < slow.objective.size(); ++k)
        CHECK(slow.objective[k] <= slow.objective[k - 1] + 1e-12);
    const auto fast = fista(loss, Penalty::l1(0.05), init, L, long_run(5000));
    CHECK(std::abs(slow.objective.back() - fast.objective.back()) < 1e-6);
}

TEST_CASE("ista without penalty is gradient descent")
{
    const MatrixXd X = MatrixXd::Random(6, 3);
    const MatrixXd y = MatrixXd::Random(6, 1);
    const double L = 2.0 * lipschitz_bound(X, LossKind::Squared);
    SolverConfig c = long_run(10);
    const auto r = ista(squared_oracle(X, y), Penalty::none(), {MatrixXd::Zero(3, 1), {}}, L, c);
    MatrixXd w = MatrixXd::Zero(3, 1);
    for (int k = 0; k < 10; ++k)
        w -= squared_value_grad(w, X, y).grad_w / L;
    CHECK((r.params.W - w).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("divergence is reported")
{
    const MatrixXd X = 10 * MatrixXd::Random(6, 3);
    const MatrixXd y = MatrixXd::Random(6, 1);
    SolverConfig c = long_run(5000);
    CHECK_THROWS_AS(fista(squared_oracle(X, y), Penalty::none(), {MatrixXd::Ones(3, 1), {}}, 1e-6, c),
                    DivergenceError);
}

TEST_CASE("reweighted l1")
{
    const Dataset d = regression_data(40, 15, 3);
    const MatrixXd Xc = d.X.rowwise() - d.X.colwise().mean();
    const MatrixXd yc = (d.y.array() - d.y.mean()).matrix();
    const auto loss = squared_oracle(Xc, yc);
    const double L = lipschitz_bound(Xc, LossKind::Squared);
    const Parameters init{MatrixXd::Zero(15, 1), {}};
    SolverConfig c;
    c.max_iter = 20000;
    c.rel_tol = 1e-12;

    const auto one = reweighted_l1(loss, 0.1, init, L, c, 1);
    const auto lasso = fista(loss, Penalty::l1(0.1), init, L, c);
    CHECK((one.params.W - lasso.params.W).cwiseAbs().maxCoeff() < 1e-12);

    std::vector<int> ends;
    VectorXd weights;
    const auto four = reweighted_l1(loss, 0.1, init, L, c, 4, 0.01, &ends, &weights);
    REQUIRE(ends.size() == 4);
    CHECK(std::size_t(ends.back()) == four.objective.size());
    CHECK(four.objective.size() == std::size_t(four.iterations + 1));
    auto weighted = [&](const MatrixXd& W) {
        return loss(W, {}, false).value + 0.1 * (weights.array() * W.col(0).array().abs()).sum();
    };
    CHECK(weighted(four.params.W) <= weighted(one.params.W) + 1e-9);
}

TEST_CASE("ridge matches the closed form")
{
    const Dataset d = regression_data(12, 4, 5);
    ModelSpec spec;
    spec.penalty = ModelPenalty::Ridge;
    spec.lambda = 0.3;
    SolverConfig c;
    c.rel_tol = 1e-15;
    c.max_iter = 50000;
    const FitResult r = fit_model(d, spec, nullptr, c);
    const MatrixXd Xc = d.X.rowwise() - d.X.colwise().mean();
    const VectorXd yc = d.y.array() - d.y.mean();
    const double n = 12;
    const VectorXd want =
        (Xc.transpose() * Xc / n + 2 * 0.3 * MatrixXd::Identity(4, 4)).ldlt().solve(Xc.transpose() * yc / n);
    CHECK((r.W.col(0) - want).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(r.b[0] == doctest::Approx(d.y.mean() - d.X.colwise().mean().dot(want)).epsilon(1e-8));
}

TEST_CASE("lambda max zeroes every model")
{
    const Dataset reg = regression_data(30, 9, 6);
    const GridMask mask(GridDims{3, 3, 1});
    const ClusterTree tree = ward_cluster(reg.X, adjacency(mask));
    Dataset cls = reg;
    for (Index i = 0; i < cls.y.size(); ++i)
        cls.y[i] = double(i % 3);
    struct Case {
        LossKind loss;
        ModelPenalty pen;
        NormFlavor flavor;
    };
    const std::vector<Case> cases{
        {LossKind::Squared, ModelPenalty::L1, NormFlavor::L2},
        {LossKind::Squared, ModelPenalty::ElasticNet, NormFlavor::L2},
        {LossKind::Squared, ModelPenalty::WeightedL1, NormFlavor::L2},
        {LossKind::Squared, ModelPenalty::ReweightedL1, NormFlavor::L2},
        {LossKind::Squared, ModelPenalty::Tree, NormFlavor::L2},
        {LossKind::Squared, ModelPenalty::Tree, NormFlavor::Linf},
        {LossKind::LogisticOVA, ModelPenalty::L1, NormFlavor::L2},
        {LossKind::LogisticOVA, ModelPenalty::Tree, NormFlavor::L2},
        {LossKind::Multinomial, ModelPenalty::Tree, NormFlavor::Linf},
        {LossKind::SquaredOVA, ModelPenalty::MultiTask, NormFlavor::L2},
        {LossKind::Multinomial, ModelPenalty::MultiTask, NormFlavor::Linf},
    };
    for (const auto& cs : cases) {
        ModelSpec spec;
        spec.loss = cs.loss;
        spec.penalty = cs.pen;
        spec.flavor = cs.flavor;
        const Dataset& data = cs.loss == LossKind::Squared ? reg : cls;
        const FitProblem prob(data, spec, &tree);
        const auto grid = lambda_grid(GridPreset::General, 12, prob.lambda_max());
        CAPTURE(spec.describe());
        CHECK(prob.fit(grid.front()).nonzeros() == 0);
        CHECK(prob.fit(grid.back()).nonzeros() > 0);
    }
}

TEST_CASE("multi-task fits are row sparse")
{
    Dataset d = regression_data(60, 12, 8);
    for (Index i = 0; i < d.y.size(); ++i)
        d.y[i] = d.X(i, 0) + d.X(i, 1) > 0 ? (d.X(i, 2) > 0 ? 2.0 : 1.0) : 0.0;
    ModelSpec spec;
    spec.loss = LossKind::SquaredOVA;
    spec.penalty = ModelPenalty::MultiTask;
    spec.lambda = 0.05;
    const FitResult r = fit_model(d, spec, nullptr);
    REQUIRE(r.W.cols() == 3);
    int zero_rows = 0;
    for (Index i = 0; i < r.W.rows(); ++i) {
        const bool any = (r.W.row(i).array() != 0).any();
        const bool all = (r.W.row(i).array() != 0).all();
        CHECK(any == all);
        zero_rows += !any;
    }
    CHECK(zero_rows > 0);
}

TEST_CASE("prediction")
{
    FitResult r;
    r.loss = LossKind::Multinomial;
    r.W = MatrixXd::Zero(2, 3);
    r.b = (VectorXd(3) << 0.1, 0.5, 0.2).finished();
    r.classes = {4, 7, 9};
    const MatrixXd X = MatrixXd::Random(3, 2);
    CHECK(predict(r, X) == VectorXd::Constant(3, 7));
    r.b.setZero();
    CHECK(predict(r, X) == VectorXd::Constant(3, 4));

    FitResult s;
    s.loss = LossKind::Squared;
    s.W = MatrixXd::Zero(2, 1);
    s.W(1, 0) = 1;
    s.b = VectorXd::Zero(1);
    CHECK(predict(s, X) == X.col(1));
}

TEST_CASE("tree model predicts the same from raw and augmented inputs")
{
    const Dataset d = regression_data(30, 9, 2);
    const ClusterTree tree = ward_cluster(d.X, adjacency(GridMask(GridDims{3, 3, 1})));
    ModelSpec spec;
    spec.penalty = ModelPenalty::Tree;
    spec.lambda = 0.01;
    const FitResult r = fit_model(d, spec, &tree);
    CHECK((predict(r, d.X, &tree) - predict(r, augment(d.X, tree))).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(predict(r, d.X), DimensionError);
}

TEST_CASE("simulation regressions")
{
    SimulationSpec spec;
    const Simulation sim = simulate(spec);
    const ClusterTree tree = ward_cluster(sim.data.X, adjacency(sim.mask));

    SUBCASE("reweighting does not grow the support")
    {
        ModelSpec lasso;
        lasso.lambda = 0.05;
        ModelSpec rw = lasso;
        rw.penalty = ModelPenalty::ReweightedL1;
        const FitResult a = fit_model(sim.data, lasso, nullptr);
        const FitResult b = fit_model(sim.data, rw, nullptr);
        CHECK(b.nonzeros() <= a.nonzeros());
        REQUIRE(b.stage_ends.size() == 4);
    }
    SUBCASE("multinomial tree model runs on three classes")
    {
        Dataset d = sim.data;
        std::vector<double> sorted(d.y.data(), d.y.data() + d.y.size());
        std::sort(sorted.begin(), sorted.end());
        const double t1 = sorted[100], t2 = sorted[200];
        for (Index i = 0; i < d.y.size(); ++i)
            d.y[i] = d.y[i] < t1 ? 0 : (d.y[i] < t2 ? 1 : 2);
        ModelSpec spec;
        spec.loss = LossKind::Multinomial;
        spec.penalty = ModelPenalty::Tree;
        spec.lambda = 0.01;
        const FitResult r = fit_model(d, spec, &tree);
        CHECK(r.W.cols() == 3);
        CHECK(r.W.allFinite());
        const VectorXd pred = predict(r, d.X, &tree);
        CHECK(prediction_error(LossKind::Multinomial, d.y, pred) < 66.0);
    }
}
