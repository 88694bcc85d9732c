#include "tsp/cli.hpp"

#include "tsp/cluster.hpp"
#include "tsp/datagen.hpp"
#include "tsp/feature.hpp"
#include "tsp/grid.hpp"
#include "tsp/harness.hpp"
#include "tsp/io.hpp"
#include "tsp/penalty.hpp"
#include "tsp/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

namespace tsp::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

/// Records inputs and outputs of one command and writes the manifest.
class Manifest {
public:
    Manifest(std::string command, std::vector<std::string> args)
        : command_(std::move(command)), args_(std::move(args)), start_(std::chrono::steady_clock::now())
    {
    }

    void input(const std::string& path) { inputs_[path] = io::digest(io::read_file(path)); }

    void output(const std::string& path, const std::string& content)
    {
        io::atomic_write(path, content);
        outputs_.emplace_back(path, io::digest(content));
    }

    void set_seed(std::uint64_t seed) { seed_ = seed; }

    void write(const std::string& path)
    {
        nlohmann::ordered_json j;
        j["command"] = command_;
        j["parameters"] = args_;
        if (seed_)
            j["seed"] = *seed_;
        else
            j["seed"] = nullptr;
        j["version"] = kVersion;
        auto& in = j["inputs"] = nlohmann::ordered_json::object();
        for (const auto& [p, d] : inputs_)
            in[p] = d;
        auto& out = j["outputs"] = nlohmann::ordered_json::object();
        for (const auto& [p, d] : outputs_)
            out[p] = d;
        j["timing"] = {{"wall_seconds",
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()}};
        io::atomic_write(path, j.dump(2) + "\n");
    }

private:
    std::string command_;
    std::vector<std::string> args_;
    std::map<std::string, std::string> inputs_;
    std::vector<std::pair<std::string, std::string>> outputs_;
    std::optional<std::uint64_t> seed_;
    std::chrono::steady_clock::time_point start_;
};

std::string manifest_path(const std::string& primary) { return primary + ".manifest.json"; }

GridDims parse_dims(const std::string& text)
{
    std::vector<int> v;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stoi(tok, &used));
            if (used != tok.size())
                throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw UsageError("--dims expects nx,ny[,nz], got '" + text + "'");
        }
    }
    if (v.size() < 2 || v.size() > 3 || *std::min_element(v.begin(), v.end()) < 1)
        throw UsageError("--dims expects nx,ny[,nz] with positive entries, got '" + text + "'");
    return {v[0], v[1], v.size() == 3 ? v[2] : 1};
}

GridMask load_mask(const std::string& mask_path, const std::string& dims, Manifest& m)
{
    if (!mask_path.empty()) {
        m.input(mask_path);
        return io::parse_mask(io::read_file(mask_path), mask_path);
    }
    if (!dims.empty())
        return GridMask(parse_dims(dims));
    throw UsageError("one of --mask or --dims is required");
}

struct ModelChoice {
    ModelPenalty penalty;
    NormFlavor flavor = NormFlavor::L2;
};

ModelChoice parse_model(const std::string& name)
{
    static const std::map<std::string, ModelChoice> table{
        {"none", {ModelPenalty::None}},
        {"ridge", {ModelPenalty::Ridge}},
        {"lasso", {ModelPenalty::L1}},
        {"l1", {ModelPenalty::L1}},
        {"weighted-l1", {ModelPenalty::WeightedL1}},
        {"elastic-net", {ModelPenalty::ElasticNet}},
        {"reweighted-l1", {ModelPenalty::ReweightedL1}},
        {"tree-l2", {ModelPenalty::Tree, NormFlavor::L2}},
        {"tree-linf", {ModelPenalty::Tree, NormFlavor::Linf}},
        {"multitask-l2", {ModelPenalty::MultiTask, NormFlavor::L2}},
        {"multitask-linf", {ModelPenalty::MultiTask, NormFlavor::Linf}},
    };
    const auto it = table.find(name);
    if (it == table.end())
        throw UsageError("unknown model '" + name + "'");
    return it->second;
}

struct ModelOptions {
    std::string model = "tree-l2";
    std::string loss = "squared";
    double rho = 1.0;
    double alpha = 0.05;
    bool augmented = false;
    int stages = 4;
    double epsilon = 0.01;
    int max_iter = 5000;
    double tol = 1e-7;
    bool ista = false;

    void add(CLI::App* app)
    {
        app->add_option("--model", model, "ridge, lasso, weighted-l1, elastic-net, reweighted-l1, tree-l2, tree-linf, "
                                          "multitask-l2, multitask-linf, none")
            ->capture_default_str();
        app->add_option("--loss", loss, "squared, squared-ova, logistic-ova, multinomial")->capture_default_str();
        app->add_option("--rho", rho, "depth ratio of the group weights")->capture_default_str();
        app->add_option("--alpha", alpha, "elastic net l2 weight as a fraction of lambda")->capture_default_str();
        app->add_flag("--augmented", augmented, "fit unstructured penalties in the augmented space");
        app->add_option("--stages", stages, "reweighted l1 stages")->capture_default_str();
        app->add_option("--epsilon", epsilon, "reweighted l1 epsilon")->capture_default_str();
        app->add_option("--max-iter", max_iter, "solver iteration cap")->capture_default_str();
        app->add_option("--tol", tol, "relative objective tolerance")->capture_default_str();
        app->add_flag("--ista", ista, "disable momentum");
    }

    ModelSpec spec(double lambda) const
    {
        const auto choice = parse_model(model);
        ModelSpec s;
        s.loss = parse_loss(loss);
        s.penalty = choice.penalty;
        s.flavor = choice.flavor;
        s.lambda = lambda;
        s.rho = rho;
        s.alpha = alpha;
        s.augmented = augmented;
        s.stages = stages;
        s.epsilon = epsilon;
        return s;
    }

    SolverConfig config(std::uint64_t seed) const
    {
        SolverConfig c;
        c.max_iter = max_iter;
        c.rel_tol = tol;
        c.accelerate = !ista;
        c.seed = seed;
        return c;
    }
};

Dataset load_dataset(const std::string& x_path, const std::string& y_path, const std::string& groups_path,
                     Manifest& m)
{
    Dataset d;
    m.input(x_path);
    d.X = io::read_matrix(x_path);
    m.input(y_path);
    d.y = io::read_vector(y_path);
    if (!groups_path.empty()) {
        m.input(groups_path);
        const VectorXd g = io::read_vector(groups_path);
        for (Index i = 0; i < g.size(); ++i)
            d.groups.push_back(int(std::lround(g[i])));
    }
    d.validate();
    return d;
}

int default_jobs()
{
    if (const char* env = std::getenv("TSP_JOBS")) {
        try {
            return std::max(1, std::stoi(env));
        } catch (const std::exception&) {
            throw UsageError("TSP_JOBS must be an integer");
        }
    }
    return 1;
}

std::string with_suffix(const std::string& path, const std::string& from, const std::string& to)
{
    if (path.size() >= from.size() && path.compare(path.size() - from.size(), from.size(), from) == 0)
        return path.substr(0, path.size() - from.size()) + to;
    return path + to;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Tree-structured sparse decoding toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // simulate
    std::uint64_t seed = 0;
    std::string out_x, out_y, out_truth, out_mask, spec_path;
    auto* sim = app.add_subcommand("simulate", "generate the synthetic multi-scale regression data");
    sim->add_option("--seed", seed, "random seed")->capture_default_str();
    sim->add_option("--out-x", out_x, "design matrix output")->required();
    sim->add_option("--out-y", out_y, "target output")->required();
    sim->add_option("--out-truth", out_truth, "ground-truth weight output")->required();
    sim->add_option("--out-mask", out_mask, "grid mask output");
    sim->add_option("--spec", spec_path, "simulation spec (key = value lines)")->check(CLI::ExistingFile);

    // cluster
    std::string input, mask_path, dims, tree_out, groups_out, flavor = "l2";
    double group_rho = 1.0;
    auto* clu = app.add_subcommand("cluster", "spatially constrained Ward clustering");
    clu->add_option("--input", input, "n x p data matrix")->required()->check(CLI::ExistingFile);
    clu->add_option("--mask", mask_path, "mask file")->check(CLI::ExistingFile);
    clu->add_option("--dims", dims, "full grid nx,ny[,nz]");
    clu->add_option("--out", tree_out, "tree output")->required();
    clu->add_option("--groups-out", groups_out, "group structure dump");
    clu->add_option("--rho", group_rho, "group weight ratio for --groups-out")->capture_default_str();
    clu->add_option("--flavor", flavor, "l2 or linf for --groups-out")->capture_default_str();

    // fit
    std::string x_path, y_path, groups_path, tree_path, fit_out;
    double lambda = 0.0;
    ModelOptions fit_opts;
    auto* fit = app.add_subcommand("fit", "fit one model at a fixed lambda");
    fit->add_option("--x", x_path, "design matrix")->required()->check(CLI::ExistingFile);
    fit->add_option("--y", y_path, "targets")->required()->check(CLI::ExistingFile);
    fit->add_option("--tree", tree_path, "cluster tree")->check(CLI::ExistingFile);
    fit->add_option("--lambda", lambda, "regularization strength")->required();
    fit->add_option("--out", fit_out, "fit record (JSON); coefficients go to <out>.coef.csv")->required();
    fit->add_option("--seed", seed, "random seed")->capture_default_str();
    fit_opts.add(fit);

    // cv
    std::string folds = "2", grid_name = "simulation", report_out;
    int grid_count = 30;
    bool no_nested = false;
    int jobs = 0;
    ModelOptions cv_opts;
    auto* cv = app.add_subcommand("cv", "cross-validated evaluation over a lambda grid");
    cv->add_option("--x", x_path, "design matrix")->required()->check(CLI::ExistingFile);
    cv->add_option("--y", y_path, "targets")->required()->check(CLI::ExistingFile);
    cv->add_option("--groups", groups_path, "per-sample group ids")->check(CLI::ExistingFile);
    cv->add_option("--tree", tree_path, "cluster tree")->check(CLI::ExistingFile);
    cv->add_option("--mask", mask_path, "mask for building the tree")->check(CLI::ExistingFile);
    cv->add_option("--dims", dims, "full grid for building the tree");
    cv->add_option("--folds", folds, "k or loo-group")->capture_default_str();
    cv->add_flag("--no-nested", no_nested, "select lambda on the outer folds instead of nested inner CV");
    cv->add_option("--grid", grid_name, "simulation (1e3..1e-3) or general (lambda_max * 2^-k)")->capture_default_str();
    cv->add_option("--grid-count", grid_count, "grid size")->capture_default_str();
    cv->add_option("--out", report_out, "report CSV")->required();
    cv->add_option("--seed", seed, "random seed")->capture_default_str();
    cv->add_option("--jobs", jobs, "concurrent folds (default: TSP_JOBS or 1)");
    cv_opts.add(cv);

    // project
    std::string weights_path, out_prefix;
    std::vector<int> depths;
    int max_depth = -1, column = 0;
    auto* proj = app.add_subcommand("project", "export voxel maps of learned coefficients");
    proj->add_option("--weights", weights_path, "coefficient CSV (or fit JSON)")->required()->check(CLI::ExistingFile);
    proj->add_option("--tree", tree_path, "cluster tree")->check(CLI::ExistingFile);
    proj->add_option("--mask", mask_path, "mask file")->check(CLI::ExistingFile);
    proj->add_option("--dims", dims, "full grid nx,ny[,nz]");
    proj->add_option("--depth", depths, "scale slice depth (repeatable)");
    proj->add_option("--max-depth", max_depth, "emit slices for depths 0..D");
    proj->add_option("--column", column, "coefficient column (class)")->capture_default_str();
    proj->add_option("--out-prefix", out_prefix, "output prefix")->required();

    // report
    std::vector<std::string> inputs;
    std::string reference, merged_out, table_out;
    auto* rep = app.add_subcommand("report", "merge CV reports and test against a reference model");
    rep->add_option("--inputs", inputs, "report CSV files")->required()->check(CLI::ExistingFile);
    rep->add_option("--reference", reference, "reference model name (default: first)");
    rep->add_option("--out", merged_out, "summary CSV");
    rep->add_option("--out-table", table_out, "summary table (text)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*sim) {
            Manifest m("simulate", args);
            SimulationSpec spec;
            if (!spec_path.empty()) {
                m.input(spec_path);
                spec = parse_simulation_spec(io::read_file(spec_path), spec_path);
            }
            spec.seed = seed;
            m.set_seed(seed);
            const Simulation s = simulate(spec);
            m.output(out_x, io::format_matrix_csv(s.data.X));
            m.output(out_y, io::format_matrix_csv(s.data.y));
            m.output(out_truth, io::format_matrix_csv(s.truth));
            if (!out_mask.empty())
                m.output(out_mask, io::format_mask(s.mask));
            m.write(manifest_path(out_x));
            out << "simulated " << s.data.X.rows() << " samples x " << s.data.X.cols() << " voxels\n";
        } else if (*clu) {
            Manifest m("cluster", args);
            m.input(input);
            const MatrixXd X = io::read_matrix(input);
            const GridMask mask = load_mask(mask_path, dims, m);
            if (X.cols() != mask.num_voxels())
                throw DimensionError("data has " + std::to_string(X.cols()) + " columns, mask has " +
                                     std::to_string(mask.num_voxels()) + " voxels");
            const ClusterTree tree = ward_cluster(X, adjacency(mask));
            m.output(tree_out, io::format_tree(tree));
            if (!groups_out.empty())
                m.output(groups_out, io::format_groups(tree_groups(tree, group_rho, parse_flavor(flavor))));
            m.write(manifest_path(tree_out));
            out << "tree with " << tree.num_nodes() << " nodes, max depth " << tree.max_depth() << "\n";
        } else if (*fit) {
            Manifest m("fit", args);
            m.set_seed(seed);
            const Dataset data = load_dataset(x_path, y_path, "", m);
            const ModelSpec spec = fit_opts.spec(lambda);
            std::optional<ClusterTree> tree;
            if (!tree_path.empty()) {
                m.input(tree_path);
                tree = io::parse_tree(io::read_file(tree_path), tree_path);
            } else if (spec.fits_augmented()) {
                throw UsageError("model " + spec.describe() + " needs --tree");
            }
            const FitResult r = fit_model(data, spec, tree ? &*tree : nullptr, fit_opts.config(seed));
            const std::string coef = with_suffix(fit_out, ".json", ".coef.csv");
            m.output(coef, io::format_matrix_csv(r.W));
            m.output(fit_out, io::format_fit_json(r, fs::path(coef).filename().string(),
                                                  fs::path(manifest_path(fit_out)).filename().string()));
            m.write(manifest_path(fit_out));
            out << spec.describe() << " lambda=" << lambda << " iterations=" << r.iterations
                << " converged=" << (r.converged ? "yes" : "no") << " nonzeros=" << r.nonzeros() << "\n";
        } else if (*cv) {
            Manifest m("cv", args);
            m.set_seed(seed);
            const Dataset data = load_dataset(x_path, y_path, groups_path, m);
            const ModelSpec spec = cv_opts.spec(1.0);
            std::optional<ClusterTree> tree;
            if (!tree_path.empty()) {
                m.input(tree_path);
                tree = io::parse_tree(io::read_file(tree_path), tree_path);
            } else if (spec.fits_augmented()) {
                if (mask_path.empty() && dims.empty())
                    throw UsageError("model " + spec.describe() + " needs --tree, --mask or --dims");
                const GridMask mask = load_mask(mask_path, dims, m);
                tree = ward_cluster(data.X, adjacency(mask));
            }
            const ClusterTree* tp = tree ? &*tree : nullptr;
            CVPlan plan;
            if (folds == "loo-group") {
                if (data.groups.empty())
                    throw UsageError("--folds loo-group needs --groups");
                plan = leave_one_group_out_plan(data.groups, !no_nested);
            } else {
                int k = 0;
                try {
                    k = std::stoi(folds);
                } catch (const std::exception&) {
                    throw UsageError("--folds expects an integer or loo-group");
                }
                plan = kfold_plan(data.num_samples(), k, seed, !no_nested);
            }
            std::vector<double> grid;
            if (grid_name == "simulation")
                grid = lambda_grid(GridPreset::Simulation, grid_count);
            else if (grid_name == "general")
                grid = lambda_grid(GridPreset::General, grid_count,
                                   FitProblem(data, spec, tp, cv_opts.config(seed)).lambda_max());
            else
                throw UsageError("--grid must be simulation or general");
            const int workers = jobs > 0 ? jobs : default_jobs();
            const EvalReport report = cross_validate(data, plan, spec, grid, tp, cv_opts.config(seed), workers);
            m.output(report_out, io::format_report_csv(report));
            m.write(manifest_path(report_out));
            out << io::format_report_table({report});
        } else if (*proj) {
            Manifest m("project", args);
            m.input(weights_path);
            MatrixXd W;
            if (weights_path.size() >= 5 && weights_path.compare(weights_path.size() - 5, 5, ".json") == 0)
                W = io::parse_fit_json(io::read_file(weights_path), fs::path(weights_path).parent_path().string()).W;
            else
                W = io::read_matrix(weights_path);
            if (column < 0 || column >= W.cols())
                throw UsageError("--column " + std::to_string(column) + " out of range");
            const VectorXd w = W.col(column);
            const GridMask mask = load_mask(mask_path, dims, m);
            std::optional<ClusterTree> tree;
            if (!tree_path.empty()) {
                m.input(tree_path);
                tree = io::parse_tree(io::read_file(tree_path), tree_path);
            }
            auto emit = [&](const std::string& tag, const VectorXd& map) {
                const MatrixXd img = io::voxel_map_grid(map, mask);
                m.output(out_prefix + tag + ".csv", io::format_matrix_csv(img));
                m.output(out_prefix + tag + ".pgm", io::format_pgm(img));
                m.output(out_prefix + tag + ".scale.txt", io::format_pgm_scale(img));
            };
            if (w.size() == mask.num_voxels()) {
                emit(".voxel", w);
            } else if (tree && w.size() == tree->num_nodes()) {
                if (tree->num_leaves() != mask.num_voxels())
                    throw DimensionError("tree leaves do not match mask voxels");
                emit(".voxel", project_to_voxels(w, *tree));
            } else {
                throw DimensionError("weights of length " + std::to_string(w.size()) +
                                     " match neither the mask voxels nor the tree nodes");
            }
            if (max_depth >= 0)
                for (int d = 0; d <= max_depth; ++d)
                    depths.push_back(d);
            std::sort(depths.begin(), depths.end());
            depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
            if (!depths.empty() && !(tree && w.size() == tree->num_nodes()))
                throw UsageError("scale slices need --tree and augmented-space weights");
            for (int d : depths) {
                if (d < 0)
                    throw UsageError("--depth must be >= 0");
                emit(".depth" + std::to_string(d), scale_slice(w, *tree, d));
            }
            m.write(manifest_path(out_prefix + ".voxel.csv"));
            out << "wrote " << 1 + depths.size() << " map(s) with prefix " << out_prefix << "\n";
        } else if (*rep) {
            Manifest m("report", args);
            std::vector<EvalReport> reports;
            for (const auto& path : inputs) {
                m.input(path);
                auto r = io::parse_report_csv(io::read_file(path), path);
                reports.insert(reports.end(), r.begin(), r.end());
            }
            if (reports.empty())
                throw UsageError("no reports found in --inputs");
            std::size_t ref = 0;
            if (!reference.empty()) {
                const auto it = std::find_if(reports.begin(), reports.end(),
                                             [&](const EvalReport& r) { return r.model == reference; });
                if (it == reports.end())
                    throw UsageError("reference model '" + reference + "' not found");
                ref = std::size_t(it - reports.begin());
            }
            std::vector<double> pvals(reports.size(), std::numeric_limits<double>::quiet_NaN());
            for (std::size_t i = 0; i < reports.size(); ++i) {
                if (i == ref || reports[i].fold_errors.size() != reports[ref].fold_errors.size() ||
                    reports[i].fold_errors.size() < 5)
                    continue;
                pvals[i] = wilcoxon_signed_rank(reports[i].fold_errors, reports[ref].fold_errors).p_value;
            }
            const std::string table = io::format_report_table(reports, pvals, false);
            out << table;
            if (!table_out.empty())
                m.output(table_out, table);
            if (!merged_out.empty()) {
                std::string csv = "model,metric,mean,std,median_nonzero_pct,p_value\n";
                char buf[160];
                for (std::size_t i = 0; i < reports.size(); ++i) {
                    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g\n", reports[i].mean, reports[i].stddev,
                                  reports[i].median_nonzero_pct, pvals[i]);
                    csv += reports[i].model + "," + reports[i].metric + buf;
                }
                m.output(merged_out, csv);
            }
            if (!merged_out.empty() || !table_out.empty())
                m.write(manifest_path(!merged_out.empty() ? merged_out : table_out));
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace tsp::cli
