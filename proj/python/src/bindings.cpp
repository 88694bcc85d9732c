#include "tsp/cluster.hpp"
#include "tsp/datagen.hpp"
#include "tsp/feature.hpp"
#include "tsp/grid.hpp"
#include "tsp/harness.hpp"
#include "tsp/penalty.hpp"
#include "tsp/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace tsp;

namespace {

ModelPenalty parse_penalty(const std::string& name, NormFlavor& flavor)
{
    flavor = NormFlavor::L2;
    if (name == "none")
        return ModelPenalty::None;
    if (name == "ridge")
        return ModelPenalty::Ridge;
    if (name == "lasso" || name == "l1")
        return ModelPenalty::L1;
    if (name == "weighted-l1")
        return ModelPenalty::WeightedL1;
    if (name == "elastic-net")
        return ModelPenalty::ElasticNet;
    if (name == "reweighted-l1")
        return ModelPenalty::ReweightedL1;
    if (name == "tree-l2" || name == "tree-linf") {
        flavor = name == "tree-l2" ? NormFlavor::L2 : NormFlavor::Linf;
        return ModelPenalty::Tree;
    }
    if (name == "multitask-l2" || name == "multitask-linf") {
        flavor = name == "multitask-l2" ? NormFlavor::L2 : NormFlavor::Linf;
        return ModelPenalty::MultiTask;
    }
    throw ConfigError("unknown model '" + name + "'");
}

ModelSpec make_spec(const std::string& model, const std::string& loss, double lambda, double rho, bool augmented)
{
    ModelSpec s;
    s.penalty = parse_penalty(model, s.flavor);
    s.loss = parse_loss(loss);
    s.lambda = lambda;
    s.rho = rho;
    s.augmented = augmented;
    return s;
}

Dataset make_data(const MatrixXd& X, const VectorXd& y, const std::vector<int>& groups)
{
    Dataset d{X, y, groups};
    d.validate();
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Tree-structured sparse regression and classification on spatial grids";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<ClusterTree>(m, "ClusterTree")
        .def(py::init([](Index p, const std::vector<std::tuple<Index, Index, double>>& merges) {
                 std::vector<Merge> ms;
                 for (const auto& [a, b, d] : merges)
                     ms.push_back({a, b, d});
                 return ClusterTree(p, ms);
             }),
             py::arg("num_leaves"), py::arg("merges"))
        .def_property_readonly("num_leaves", &ClusterTree::num_leaves)
        .def_property_readonly("num_nodes", &ClusterTree::num_nodes)
        .def_property_readonly("root", &ClusterTree::root)
        .def_property_readonly("max_depth", &ClusterTree::max_depth)
        .def("depth", &ClusterTree::depth)
        .def("members", [](const ClusterTree& t, Index j) {
            const auto s = t.members(j);
            return std::vector<Index>(s.begin(), s.end());
        })
        .def("merges", [](const ClusterTree& t) {
            std::vector<std::tuple<Index, Index, double>> out;
            for (const auto& mg : t.merges())
                out.emplace_back(mg.first, mg.second, mg.delta);
            return out;
        });

    m.def(
        "ward_cluster",
        [](const MatrixXd& X, int nx, int ny, int nz) { return ward_cluster(X, adjacency(GridMask(GridDims{nx, ny, nz}))); },
        py::arg("X"), py::arg("nx"), py::arg("ny"), py::arg("nz") = 1,
        "Spatially constrained Ward clustering of the columns of X on a full grid.");

    m.def("augment", &augment, py::arg("X"), py::arg("tree"));
    m.def("project_to_voxels", &project_to_voxels, py::arg("w"), py::arg("tree"));
    m.def("scale_slice", &scale_slice, py::arg("w"), py::arg("tree"), py::arg("depth"));

    m.def(
        "prox_tree",
        [](const VectorXd& w, double lambda, const ClusterTree& tree, double rho, const std::string& flavor) {
            return prox_tree(w, lambda, tree_groups(tree, rho, parse_flavor(flavor)));
        },
        py::arg("w"), py::arg("lam"), py::arg("tree"), py::arg("rho") = 1.0, py::arg("flavor") = "l2");

    m.def(
        "simulate",
        [](std::uint64_t seed, int n) {
            SimulationSpec spec;
            spec.seed = seed;
            spec.n = n;
            const Simulation s = simulate(spec);
            py::dict out;
            out["X"] = s.data.X;
            out["y"] = s.data.y;
            out["truth"] = s.truth;
            out["shape"] = py::make_tuple(spec.ny, spec.nx);
            return out;
        },
        py::arg("seed") = 0, py::arg("n") = 300, "Default multi-scale simulation (40x40 grid, three regions).");

    m.def(
        "fit",
        [](const MatrixXd& X, const VectorXd& y, const std::string& model, double lam, const std::string& loss,
           double rho, const ClusterTree* tree, bool augmented, int max_iter, double tol) {
            SolverConfig cfg;
            cfg.max_iter = max_iter;
            cfg.rel_tol = tol;
            const FitResult r = fit_model(make_data(X, y, {}), make_spec(model, loss, lam, rho, augmented), tree, cfg);
            py::dict out;
            out["W"] = r.W;
            out["b"] = r.b;
            out["objective"] = r.objective;
            out["iterations"] = r.iterations;
            out["converged"] = r.converged;
            out["classes"] = r.classes;
            out["penalty"] = r.penalty;
            return out;
        },
        py::arg("X"), py::arg("y"), py::arg("model") = "tree-l2", py::arg("lam") = 0.1, py::arg("loss") = "squared",
        py::arg("rho") = 1.0, py::arg("tree") = nullptr, py::arg("augmented") = false, py::arg("max_iter") = 5000,
        py::arg("tol") = 1e-7);

    m.def(
        "cross_validate",
        [](const MatrixXd& X, const VectorXd& y, const std::string& model, const std::string& loss, double rho,
           const ClusterTree* tree, int folds, bool nested, std::uint64_t seed, int grid_count, int jobs) {
            const Dataset d = make_data(X, y, {});
            const ModelSpec spec = make_spec(model, loss, 1.0, rho, false);
            const EvalReport r = cross_validate(d, kfold_plan(d.num_samples(), folds, seed, nested), spec,
                                                lambda_grid(GridPreset::Simulation, grid_count), tree, {}, jobs);
            py::dict out;
            out["model"] = r.model;
            out["fold_errors"] = r.fold_errors;
            out["chosen_lambda"] = r.chosen_lambda;
            out["mean"] = r.mean;
            out["std"] = r.stddev;
            return out;
        },
        py::arg("X"), py::arg("y"), py::arg("model") = "tree-l2", py::arg("loss") = "squared", py::arg("rho") = 1.0,
        py::arg("tree") = nullptr, py::arg("folds") = 2, py::arg("nested") = false, py::arg("seed") = 0,
        py::arg("grid_count") = 30, py::arg("jobs") = 1);

    m.def(
        "wilcoxon",
        [](const std::vector<double>& a, const std::vector<double>& b) { return wilcoxon_signed_rank(a, b).p_value; },
        py::arg("a"), py::arg("b"), "Two-sided paired signed-rank p-value.");
}
