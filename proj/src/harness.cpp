#include "tsp/harness.hpp"

#include "tsp/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

namespace tsp {

std::vector<Index> CVPlan::train(int fold) const
{
    std::vector<Index> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold)
            out.push_back(Index(i));
    return out;
}

std::vector<Index> CVPlan::test(int fold) const
{
    std::vector<Index> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold)
            out.push_back(Index(i));
    return out;
}

void CVPlan::validate(Index num_samples) const
{
    if (Index(fold_of.size()) != num_samples)
        throw PlanError("plan covers " + std::to_string(fold_of.size()) + " samples, dataset has " +
                        std::to_string(num_samples));
    if (num_folds < 2)
        throw PlanError("plan needs at least 2 folds");
    std::vector<Index> counts(std::size_t(num_folds), 0);
    for (int f : fold_of) {
        if (f < 0 || f >= num_folds)
            throw PlanError("fold id " + std::to_string(f) + " out of range");
        ++counts[std::size_t(f)];
    }
    for (int f = 0; f < num_folds; ++f)
        if (counts[std::size_t(f)] == 0)
            throw PlanError("fold " + std::to_string(f) + " is empty");
}

CVPlan kfold_plan(Index n, int k, std::uint64_t seed, bool nested)
{
    if (k < 2 || Index(k) > n)
        throw PlanError("k-fold plan needs 2 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    auto rng = make_stream(seed, "folds");
    for (Index i = n - 1; i > 0; --i) {
        const auto j = Index(rng() % std::uint64_t(i + 1));
        std::swap(perm[std::size_t(i)], perm[std::size_t(j)]);
    }
    CVPlan plan;
    plan.kind = SplitKind::KFold;
    plan.num_folds = k;
    plan.nested = nested;
    plan.seed = seed;
    plan.fold_of.assign(std::size_t(n), 0);
    for (Index i = 0; i < n; ++i)
        plan.fold_of[std::size_t(perm[std::size_t(i)])] = int(i % k);
    return plan;
}

CVPlan leave_one_group_out_plan(const std::vector<int>& groups, bool nested)
{
    std::map<int, int> fold_of_group;
    for (int g : groups)
        fold_of_group.emplace(g, 0);
    int next = 0;
    for (auto& [g, f] : fold_of_group)
        f = next++;
    CVPlan plan;
    plan.kind = SplitKind::LeaveOneGroupOut;
    plan.num_folds = next;
    plan.nested = nested;
    for (int g : groups)
        plan.fold_of.push_back(fold_of_group[g]);
    if (plan.num_folds < 2)
        throw PlanError("leave-one-group-out needs at least 2 groups");
    return plan;
}

std::vector<double> lambda_grid(GridPreset preset, int count, double lambda_max)
{
    if (count < 2)
        throw ConfigError("lambda grid needs at least 2 values");
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        if (preset == GridPreset::Simulation)
            grid[std::size_t(i)] = std::pow(10.0, 3.0 - 6.0 * double(i) / double(count - 1));
        else
            grid[std::size_t(i)] = lambda_max * std::ldexp(1.0, -i);
    }
    return grid;
}

double prediction_error(LossKind loss, const VectorXd& truth, const VectorXd& predicted)
{
    if (truth.size() != predicted.size() || truth.size() == 0)
        throw DimensionError("prediction_error: size mismatch");
    if (loss == LossKind::Squared)
        return (truth - predicted).squaredNorm() / double(truth.size());
    return 100.0 * double((truth.array() != predicted.array()).count()) / double(truth.size());
}

namespace {

// Runs task(i) for i in [0, count) on up to `jobs` threads; results are
// written by index so the outcome does not depend on scheduling.
template <class F>
void for_each_index(int count, int jobs, F&& task)
{
    jobs = std::max(1, std::min(jobs, count));
    if (jobs == 1) {
        for (int i = 0; i < count; ++i)
            task(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool)
        th.join();
    if (failure)
        std::rethrow_exception(failure);
}

Index select_best(const VectorXd& mean_errors, const std::vector<double>& grid)
{
    Index best = 0;
    for (Index i = 1; i < mean_errors.size(); ++i) {
        const double e = mean_errors[i];
        const double b = mean_errors[best];
        if (e < b || (e == b && grid[std::size_t(i)] > grid[std::size_t(best)]))
            best = i;
    }
    return best;
}

double nonzero_percent(const FitResult& r)
{
    return 100.0 * double(r.nonzeros()) / double(r.W.size());
}

} // namespace

GridSearch grid_search(const Dataset& data, const CVPlan& plan, const ModelSpec& spec,
                       const std::vector<double>& grid, const ClusterTree* tree, const SolverConfig& config, int jobs)
{
    plan.validate(data.num_samples());
    if (grid.empty())
        throw ConfigError("grid_search: empty lambda grid");
    GridSearch gs;
    gs.grid = grid;
    gs.fold_errors.resize(plan.num_folds, Index(grid.size()));
    std::vector<std::vector<double>> nnz(std::size_t(plan.num_folds));
    for_each_index(plan.num_folds, jobs, [&](int f) {
        const Dataset train = data.subset(plan.train(f));
        const Dataset test = data.subset(plan.test(f));
        const FitProblem problem(train, spec, tree, config);
        const auto path = fit_path(problem, grid);
        for (std::size_t l = 0; l < grid.size(); ++l) {
            gs.fold_errors(f, Index(l)) = prediction_error(spec.loss, test.y, predict(path[l], test.X, tree));
            nnz[std::size_t(f)].push_back(nonzero_percent(path[l]));
        }
    });
    gs.mean_errors = gs.fold_errors.colwise().mean().transpose();
    gs.best = select_best(gs.mean_errors, grid);
    for (const auto& v : nnz)
        gs.fold_nonzero_pct.push_back(v[std::size_t(gs.best)]);
    return gs;
}

void EvalReport::summarize()
{
    const auto n = fold_errors.size();
    mean = n ? std::accumulate(fold_errors.begin(), fold_errors.end(), 0.0) / double(n) : 0.0;
    double ss = 0.0;
    for (double e : fold_errors)
        ss += (e - mean) * (e - mean);
    stddev = n > 1 ? std::sqrt(ss / double(n - 1)) : 0.0;
    std::vector<double> nz = nonzero_pct;
    std::sort(nz.begin(), nz.end());
    if (nz.empty())
        median_nonzero_pct = 0.0;
    else if (nz.size() % 2 == 1)
        median_nonzero_pct = nz[nz.size() / 2];
    else
        median_nonzero_pct = 0.5 * (nz[nz.size() / 2 - 1] + nz[nz.size() / 2]);
}

EvalReport cross_validate(const Dataset& data, const CVPlan& plan, const ModelSpec& spec,
                          const std::vector<double>& grid, const ClusterTree* tree, const SolverConfig& config,
                          int jobs)
{
    const auto start = std::chrono::steady_clock::now();
    plan.validate(data.num_samples());
    EvalReport report;
    report.model = spec.describe();
    report.metric = spec.loss == LossKind::Squared ? "mse" : "misclassification_pct";
    const auto folds = std::size_t(plan.num_folds);
    report.fold_errors.assign(folds, 0.0);
    report.chosen_lambda.assign(folds, 0.0);
    report.nonzero_pct.assign(folds, 0.0);

    if (!plan.nested) {
        const GridSearch gs = grid_search(data, plan, spec, grid, tree, config, jobs);
        for (std::size_t f = 0; f < folds; ++f) {
            report.fold_errors[f] = gs.fold_errors(Index(f), gs.best);
            report.chosen_lambda[f] = grid[std::size_t(gs.best)];
            report.nonzero_pct[f] = gs.fold_nonzero_pct[f];
        }
    } else {
        for_each_index(plan.num_folds, jobs, [&](int f) {
            const std::vector<Index> train_rows = plan.train(f);
            const Dataset train = data.subset(train_rows);
            const Dataset test = data.subset(plan.test(f));
            CVPlan inner;
            if (plan.kind == SplitKind::LeaveOneGroupOut) {
                if (train.groups.empty())
                    throw PlanError("leave-one-group-out plan needs group ids in the dataset");
                inner = leave_one_group_out_plan(train.groups);
            } else {
                inner = kfold_plan(train.num_samples(), plan.num_folds,
                                   stream_seed(plan.seed, "inner-" + std::to_string(f)));
            }
            const GridSearch gs = grid_search(train, inner, spec, grid, tree, config, 1);
            const FitProblem problem(train, spec, tree, config);
            const std::vector<double> head(grid.begin(), grid.begin() + std::ptrdiff_t(gs.best) + 1);
            const auto path = fit_path(problem, head);
            const FitResult& fit = path.back();
            report.fold_errors[std::size_t(f)] = prediction_error(spec.loss, test.y, predict(fit, test.X, tree));
            report.chosen_lambda[std::size_t(f)] = fit.lambda;
            report.nonzero_pct[std::size_t(f)] = nonzero_percent(fit);
        });
    }
    report.summarize();
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size())
        throw DimensionError("wilcoxon: samples have different lengths");
    if (a.size() < 5)
        throw DimensionError("wilcoxon: needs at least 5 pairs");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] - b[i] != 0.0)
            d.push_back(a[i] - b[i]);
    WilcoxonResult res;
    res.used = Index(d.size());
    if (d.empty())
        return res; // degenerate: p = 1

    const std::size_t m = d.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return std::abs(d[x]) < std::abs(d[y]); });
    // Doubled average ranks stay integral under ties.
    std::vector<long> rank2(m);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < m;) {
        std::size_t j = i;
        while (j + 1 < m && std::abs(d[order[j + 1]]) == std::abs(d[order[i]]))
            ++j;
        const long r2 = long(i + 1 + j + 1); // 2 * mean of ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k)
            rank2[order[k]] = r2;
        const double t = double(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long w2 = 0;
    for (std::size_t i = 0; i < m; ++i)
        if (d[i] > 0)
            w2 += rank2[i];
    res.statistic = double(w2) / 2.0;

    if (m <= 12) {
        const long total = std::accumulate(rank2.begin(), rank2.end(), 0L);
        std::vector<double> count(std::size_t(total) + 1, 0.0);
        count[0] = 1.0;
        long reach = 0;
        for (long r : rank2) {
            for (long s = reach; s >= 0; --s)
                if (count[std::size_t(s)] != 0.0)
                    count[std::size_t(s + r)] += count[std::size_t(s)];
            reach += r;
        }
        double lower = 0.0;
        double upper = 0.0;
        for (long s = 0; s <= total; ++s) {
            if (s <= w2)
                lower += count[std::size_t(s)];
            if (s >= w2)
                upper += count[std::size_t(s)];
        }
        const double all = std::ldexp(1.0, int(m));
        res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        res.exact = true;
        return res;
    }

    const double md = double(m);
    const double mean = md * (md + 1.0) / 4.0;
    const double var = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0 - tie_term / 48.0;
    const double z = std::max(0.0, std::abs(res.statistic - mean) - 0.5) / std::sqrt(var);
    res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    res.exact = false;
    return res;
}

} // namespace tsp
