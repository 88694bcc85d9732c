#include "../support/oracles.hpp"

#include "tsp/cli.hpp"
#include "tsp/cluster.hpp"
#include "tsp/datagen.hpp"
#include "tsp/feature.hpp"
#include "tsp/grid.hpp"
#include "tsp/harness.hpp"
#include "tsp/io.hpp"
#include "tsp/loss.hpp"
#include "tsp/penalty.hpp"
#include "tsp/solver.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace tsp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome prox_equivalence()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    const double rhos[] = {0.5, 1.0, 1.5};
    const double lambdas[] = {0.01, 0.1, 1.0, 10.0};
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const Index p = std::uniform_int_distribution<Index>(2, 10)(rng);
        const ClusterTree tree = oracle::random_tree(p, rng);
        const double rho = rhos[trial % 3];
        const double lambda = lambdas[(trial / 3) % 4];
        const bool linf = trial % 2 == 1;
        // Keep the root and a random subset of the other subtrees.
        std::vector<std::vector<Index>> groups;
        std::vector<double> eta;
        std::bernoulli_distribution keep(0.7);
        for (Index j = 0; j < tree.num_nodes(); ++j) {
            if (j != tree.root() && !keep(rng))
                continue;
            const auto d = tree.descendants(j);
            groups.emplace_back(d.begin(), d.end());
            eta.push_back(std::pow(rho, tree.depth(j)));
        }
        const GroupStructure gs(tree.num_nodes(), groups, eta, linf ? NormFlavor::Linf : NormFlavor::L2);
        std::normal_distribution<double> nd(0.0, 1.0 + lambda);
        VectorXd w(tree.num_nodes());
        for (Index i = 0; i < w.size(); ++i)
            w[i] = nd(rng);
        const VectorXd got = prox_tree(w, lambda, gs);
        const VectorXd want = oracle::group_prox(w, lambda, groups, eta, linf);
        worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && secs < 60.0, fmt("200 structures, max |diff| %.2e, %.1fs", worst, secs)};
}

Outcome zero_heredity()
{
    std::mt19937_64 rng(202);
    int trials = 0, ok = 0;
    for (int t = 0; t < 200; ++t) {
        const Index p = std::uniform_int_distribution<Index>(2, 30)(rng);
        const ClusterTree tree = oracle::random_tree(p, rng);
        const auto flavor = t % 2 ? NormFlavor::Linf : NormFlavor::L2;
        const GroupStructure gs = tree_groups(tree, 0.5 + 0.5 * (t % 3), flavor);
        std::normal_distribution<double> nd(0.0, 1.0);
        VectorXd w(tree.num_nodes());
        for (Index i = 0; i < w.size(); ++i)
            w[i] = nd(rng);
        const double lambda = std::exp(std::uniform_real_distribution<double>(-3, 1)(rng));
        ++trials;
        ok += oracle::zeros_hereditary(prox_tree(w, lambda, gs), tree);
    }
    // Converged fits on small spatial problems.
    for (int t = 0; t < 40; ++t) {
        const GridMask mask(GridDims{5, 4, 1});
        Dataset data;
        data.X = MatrixXd::NullaryExpr(40, mask.num_voxels(), [&]() { return std::normal_distribution<double>()(rng); });
        VectorXd truth = VectorXd::Zero(mask.num_voxels());
        truth.head(6).setOnes();
        data.y = data.X * truth + 0.5 * VectorXd::NullaryExpr(40, [&]() { return std::normal_distribution<double>()(rng); });
        const ClusterTree tree = ward_cluster(data.X, adjacency(mask));
        ModelSpec spec;
        spec.penalty = ModelPenalty::Tree;
        spec.flavor = t % 2 ? NormFlavor::Linf : NormFlavor::L2;
        spec.rho = 0.5 + 0.5 * (t % 3);
        spec.lambda = std::exp(std::uniform_real_distribution<double>(-4, 0)(rng));
        SolverConfig cfg;
        cfg.max_iter = 20000;
        cfg.rel_tol = 1e-10;
        const FitResult r = fit_model(data, spec, &tree, cfg);
        ++trials;
        ok += r.converged && oracle::zeros_hereditary(r.W.col(0), tree);
    }
    return {ok == trials, fmt("%.0f/%.0f trials hereditary", ok, trials)};
}

Outcome ward_correctness()
{
    std::mt19937_64 rng(303);
    int exact = 0, connected = 0, instances = 0;
    double worst_forms = 0.0;
    for (int t = 0; t < 20; ++t) {
        const int side = t < 10 ? 4 : 5;
        const GridMask mask(GridDims{side, side, 1});
        const Adjacency adj = adjacency(mask);
        const MatrixXd X = MatrixXd::NullaryExpr(6, mask.num_voxels(), [&]() { return std::normal_distribution<double>()(rng); });
        const ClusterTree tree = ward_cluster(X, adj);
        const auto merges = tree.merges();
        const auto steps = oracle::ward(X, adj);
        bool same = merges.size() == steps.size();
        for (std::size_t k = 0; same && k < steps.size(); ++k) {
            same = merges[k].first == steps[k].a && merges[k].second == steps[k].b &&
                   std::abs(merges[k].delta - steps[k].delta_means) <= 1e-10 * std::max(1.0, steps[k].delta_means);
            worst_forms = std::max(worst_forms, std::abs(steps[k].delta_means - steps[k].delta_sse));
        }
        bool all_connected = true;
        for (Index j = 0; j < tree.num_nodes(); ++j) {
            const auto m = tree.members(j);
            all_connected = all_connected && oracle::connected(std::vector<Index>(m.begin(), m.end()), adj);
        }
        ++instances;
        exact += same;
        connected += all_connected;
    }
    return {exact == instances && connected == instances && worst_forms <= 1e-10,
            fmt("%.0f/20 identical, %.0f/20 connected, max form gap %.1e", exact, connected, worst_forms)};
}

double rel_err(const VectorXd& a, const VectorXd& b)
{
    return (a - b).norm() / std::max(b.norm(), 1e-12);
}

Outcome gradient_fidelity()
{
    std::mt19937_64 rng(404);
    auto normal = [&]() { return std::normal_distribution<double>()(rng); };
    double worst[3] = {0, 0, 0};
    for (int t = 0; t < 50; ++t) {
        const Index n = 8 + t % 7, p = 3 + t % 5;
        const int c = 2 + t % 3;
        const MatrixXd X = MatrixXd::NullaryExpr(n, p, normal);
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i)
            labels[std::size_t(i)] = int(i % c);
        const VectorXd b0 = VectorXd::NullaryExpr(c, normal);
        const MatrixXd W0 = MatrixXd::NullaryExpr(p, c, normal);
        const auto flat = [](const MatrixXd& W, const VectorXd& b) {
            VectorXd v(W.size() + b.size());
            v << W.reshaped(), b;
            return v;
        };
        const auto unflat = [&](const VectorXd& v, MatrixXd& W, VectorXd& b) {
            W = v.head(p * c).reshaped(p, c);
            b = v.tail(c);
        };

        // squared: no intercept argument
        {
            const MatrixXd Y = MatrixXd::NullaryExpr(n, c, normal);
            const auto e = squared_value_grad(W0, X, Y);
            const VectorXd fd = oracle::numeric_gradient(
                [&](const VectorXd& v) { return squared_value_grad(v.reshaped(p, c), X, Y).value; }, W0.reshaped());
            worst[0] = std::max(worst[0], rel_err(e.grad_w.reshaped(), fd));
        }
        {
            const MatrixXd Ybar = indicator_response(labels, c);
            const auto e = logistic_ova_value_grad(W0, b0, X, Ybar);
            const VectorXd fd = oracle::numeric_gradient(
                [&](const VectorXd& v) {
                    MatrixXd W;
                    VectorXd b;
                    unflat(v, W, b);
                    return logistic_ova_value_grad(W, b, X, Ybar).value;
                },
                flat(W0, b0));
            worst[1] = std::max(worst[1], rel_err(flat(e.grad_w, e.grad_b), fd));
        }
        {
            const auto e = multinomial_value_grad(W0, b0, X, labels);
            const VectorXd fd = oracle::numeric_gradient(
                [&](const VectorXd& v) {
                    MatrixXd W;
                    VectorXd b;
                    unflat(v, W, b);
                    return multinomial_value_grad(W, b, X, labels).value;
                },
                flat(W0, b0));
            worst[2] = std::max(worst[2], rel_err(flat(e.grad_w, e.grad_b), fd));
        }
    }
    const double m = std::max({worst[0], worst[1], worst[2]});
    return {m <= 1e-5, fmt("max rel err squared %.1e, logistic %.1e, multinomial %.1e", worst[0], worst[1], worst[2])};
}

Outcome fista_rate()
{
    std::mt19937_64 rng(505);
    auto normal = [&]() { return std::normal_distribution<double>()(rng); };
    const MatrixXd X = MatrixXd::NullaryExpr(60, 40, normal);
    const MatrixXd Y = X.leftCols(5) * VectorXd::Ones(5) + 0.3 * VectorXd::NullaryExpr(60, normal);
    const LossOracle loss = [&](const MatrixXd& W, const VectorXd&, bool) { return squared_value_grad(W, X, Y); };
    const Penalty pen = Penalty::l1(0.05);
    const double L = lipschitz_bound(X, LossKind::Squared);
    const Parameters init{MatrixXd::Zero(40, 1), VectorXd()};

    SolverConfig ref_cfg;
    ref_cfg.max_iter = 1000000;
    ref_cfg.rel_tol = 1e-300;
    ref_cfg.patience = 1000001;
    const OptimResult ref = fista(loss, pen, init, L, ref_cfg);
    const double Fstar = *std::min_element(ref.objective.begin(), ref.objective.end());
    const double R2 = (init.W - ref.params.W).squaredNorm();

    SolverConfig cfg;
    cfg.max_iter = 500;
    cfg.rel_tol = 1e-300;
    cfg.patience = 501;
    const OptimResult run = fista(loss, pen, init, L, cfg);
    double worst_ratio = 0.0;
    bool ok = run.objective.size() == 501;
    for (std::size_t k = 1; k < run.objective.size(); ++k) {
        const double bound = 2.0 * L * R2 / double((k + 1) * (k + 1));
        const double gap = run.objective[k] - Fstar;
        worst_ratio = std::max(worst_ratio, gap / bound);
        ok = ok && gap <= bound;
    }
    return {ok, fmt("max gap/bound %.3f over k=1..500 (F* from %.0f iterations)", worst_ratio, ref.iterations)};
}

struct ReplicationResult {
    double tree_mse = 0, lasso_mse = 0;
    std::vector<double> jaccard;
    int depth_c1 = -1, depth_c3 = -1;
    double seconds = 0;
};

// Regions of the thresholded map: union of its 6-connected components that
// touch the true region.
double localized_jaccard(const std::vector<bool>& support, const std::vector<Index>& region, const GridMask& mask)
{
    const Adjacency adj = adjacency(mask);
    std::set<Index> found;
    std::vector<Index> stack;
    for (Index v : region)
        if (support[std::size_t(v)] && found.insert(v).second)
            stack.push_back(v);
    while (!stack.empty()) {
        const Index v = stack.back();
        stack.pop_back();
        for (Index u : adj.neighbors[std::size_t(v)])
            if (support[std::size_t(u)] && found.insert(u).second)
                stack.push_back(u);
    }
    std::set<Index> truth(region.begin(), region.end());
    std::size_t inter = 0;
    for (Index v : found)
        inter += truth.count(v);
    const std::size_t uni = found.size() + truth.size() - inter;
    return uni ? double(inter) / double(uni) : 0.0;
}

const ReplicationResult& replication()
{
    static const ReplicationResult result = [] {
        ReplicationResult r;
        const auto t0 = std::chrono::steady_clock::now();
        const SimulationSpec spec;
        const Simulation sim = simulate(spec);
        const ClusterTree tree = ward_cluster(sim.data.X, adjacency(sim.mask));
        const CVPlan plan = kfold_plan(sim.data.num_samples(), 2, spec.seed, false);
        const auto grid = lambda_grid(GridPreset::Simulation, 30);

        ModelSpec tree_spec;
        tree_spec.penalty = ModelPenalty::Tree;
        tree_spec.rho = 1.0;
        ModelSpec lasso_spec;
        lasso_spec.penalty = ModelPenalty::L1;

        const EvalReport tr = cross_validate(sim.data, plan, tree_spec, grid, &tree);
        const EvalReport lr = cross_validate(sim.data, plan, lasso_spec, grid, nullptr);
        r.tree_mse = tr.mean;
        r.lasso_mse = lr.mean;

        const FitResult fit = fit_model(sim.data, [&] {
            ModelSpec s = tree_spec;
            s.lambda = tr.chosen_lambda.front();
            return s;
        }(), &tree);
        const VectorXd w = fit.W.col(0);
        const VectorXd map = project_to_voxels(w, tree);
        const double cut = 0.1 * map.cwiseAbs().maxCoeff();
        std::vector<bool> support(static_cast<std::size_t>(map.size()));
        for (Index v = 0; v < map.size(); ++v)
            support[std::size_t(v)] = cut > 0 && std::abs(map[v]) >= cut;
        const auto regions = region_cells(spec);
        for (const auto& reg : regions)
            r.jaccard.push_back(localized_jaccard(support, reg, sim.mask));

        // Depth 0 is a constant map of the root coefficient, identical for
        // every region, so the search starts one level down.
        auto dominant = [&](const std::vector<Index>& reg) {
            int best = -1;
            double best_val = -1;
            for (int d = 1; d <= tree.max_depth(); ++d) {
                const VectorXd s = scale_slice(w, tree, d);
                double acc = 0;
                for (Index v : reg)
                    acc += std::abs(s[v]);
                acc /= double(reg.size());
                if (acc > best_val) {
                    best_val = acc;
                    best = d;
                }
            }
            return best;
        };
        r.depth_c1 = dominant(regions[0]);
        r.depth_c3 = dominant(regions[2]);
        r.seconds = seconds_since(t0);
        return r;
    }();
    return result;
}

Outcome replication_localization()
{
    const auto& r = replication();
    bool ok = r.tree_mse <= r.lasso_mse && r.seconds < 600;
    std::string j;
    for (double v : r.jaccard) {
        ok = ok && v >= 0.3;
        j += fmt(" %.2f", v);
    }
    return {ok, "jaccard" + j + fmt(", mse tree %.3f vs lasso %.3f, %.0fs", r.tree_mse, r.lasso_mse, r.seconds)};
}

Outcome multiscale()
{
    const auto& r = replication();
    return {r.depth_c3 > r.depth_c1, fmt("dominant depth (d >= 1) C1 %.0f, C3 %.0f at the default seed", r.depth_c1, r.depth_c3)};
}

Outcome wilcoxon_oracle()
{
    long checked = 0, mismatched = 0;
    double worst = 0.0;
    // Every pattern of signs and zeros, over distinct and tied magnitudes.
    for (int n = 5; n <= 10; ++n) {
        std::vector<std::vector<double>> templates(2);
        for (int i = 0; i < n; ++i) {
            templates[0].push_back(i + 1.0);
            templates[1].push_back(1.0 + i / 2);
        }
        long patterns = 1;
        for (int i = 0; i < n; ++i)
            patterns *= 3;
        for (const auto& mag : templates) {
            for (long code = 0; code < patterns; ++code) {
                std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n), 10.0);
                long c = code;
                for (int i = 0; i < n; ++i, c /= 3)
                    a[std::size_t(i)] = 10.0 + double(c % 3 - 1) * mag[std::size_t(i)];
                const double got = wilcoxon_signed_rank(a, b).p_value;
                const double want = oracle::wilcoxon_p(a, b);
                worst = std::max(worst, std::abs(got - want));
                mismatched += std::abs(got - want) > 1e-12;
                ++checked;
            }
        }
    }
    const std::vector<double> a{0.3, 0.5, 0.2, 0.9, 0.4, 0.6, 0.1};
    const double self = wilcoxon_signed_rank(a, a).p_value;
    return {mismatched == 0 && self == 1.0,
            fmt("%.0f inputs, %.0f mismatches (max %.1e), p(a,a)=%g", double(checked), double(mismatched), worst, self)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string body = io::read_file(e.path().string());
        if (e.path().string().ends_with(".manifest.json")) {
            auto j = nlohmann::ordered_json::parse(body);
            j.erase("timing");
            body = j.dump();
        }
        files[e.path().filename().string()] = body;
    }
    return files;
}

void pipeline(const fs::path& dir)
{
    fs::create_directories(dir);
    const fs::path home = fs::current_path();
    fs::current_path(dir);
    const std::vector<std::vector<std::string>> steps{
        {"simulate", "--seed", "11", "--out-x", "x.csv", "--out-y", "y.csv", "--out-truth", "truth.csv", "--out-mask",
         "mask.txt"},
        {"cluster", "--input", "x.csv", "--mask", "mask.txt", "--out", "tree.txt", "--groups-out", "groups.txt"},
        {"fit", "--x", "x.csv", "--y", "y.csv", "--model", "tree-l2", "--tree", "tree.txt", "--lambda", "0.1", "--out",
         "fit.json"},
        {"cv", "--x", "x.csv", "--y", "y.csv", "--model", "tree-l2", "--tree", "tree.txt", "--folds", "2", "--grid-count",
         "8", "--jobs", "2", "--seed", "11", "--out", "tree_cv.csv"},
        {"cv", "--x", "x.csv", "--y", "y.csv", "--model", "ridge", "--folds", "2", "--grid-count", "8", "--seed", "11",
         "--out", "ridge_cv.csv"},
        {"project", "--weights", "fit.json", "--tree", "tree.txt", "--mask", "mask.txt", "--max-depth", "3",
         "--out-prefix", "map"},
        {"report", "--inputs", "tree_cv.csv", "ridge_cv.csv", "--out", "summary.csv", "--out-table", "summary.txt"},
    };
    std::ostringstream out, err;
    for (const auto& s : steps) {
        if (const int rc = cli::run(s, out, err); rc != 0) {
            fs::current_path(home);
            throw std::runtime_error("step '" + s.front() + "' failed: " + err.str());
        }
    }
    fs::current_path(home);
}

Outcome determinism()
{
    const fs::path root = fs::temp_directory_path() / "tsp_acceptance_determinism";
    fs::remove_all(root);
    pipeline(root / "a");
    pipeline(root / "b");
    const auto a = snapshot(root / "a");
    const auto b = snapshot(root / "b");
    std::size_t differing = 0;
    for (const auto& [name, body] : a) {
        const auto it = b.find(name);
        differing += it == b.end() || it->second != body;
    }
    differing += b.size() - std::min(a.size(), b.size());
    fs::remove_all(root);
    return {differing == 0 && a.size() > 10, fmt("%.0f artifacts compared, %.0f differ", double(a.size()), double(differing))};
}

} // namespace

int main(int argc, char** argv)
{
    // --known-fail N: report criterion N but do not count it in the exit code.
    std::set<std::size_t> known;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--known-fail")
            known.insert(std::size_t(std::stoul(argv[++i])));
    const std::vector<std::pair<std::string, Outcome (*)()>> criteria{
        {"prox oracle equivalence", prox_equivalence},
        {"zero-pattern heredity", zero_heredity},
        {"ward correctness", ward_correctness},
        {"gradient fidelity", gradient_fidelity},
        {"fista rate", fista_rate},
        {"simulation replication", replication_localization},
        {"multi-scale localization", multiscale},
        {"signed-rank oracle", wilcoxon_oracle},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const bool excused = !o.pass && known.count(i + 1);
        failures += !o.pass && !excused;
        std::cout << "criterion " << i + 1 << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << "  "
                  << o.detail << (excused ? "  [known failure, not counted]" : "") << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
