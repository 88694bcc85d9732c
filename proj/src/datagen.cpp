#include "tsp/datagen.hpp"

#include "tsp/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace tsp {

void SimulationSpec::validate() const
{
    if (n < 1 || nx < 1 || ny < 1)
        throw SpecError("simulation: n and grid dimensions must be positive");
    if (sigma < 0.0 || truncate <= 0.0)
        throw SpecError("simulation: sigma must be >= 0 and truncate > 0");
    if (!std::isfinite(snr_db))
        throw SpecError("simulation: SNR must be finite");
    for (std::size_t r = 0; r < regions.size(); ++r) {
        const auto& g = regions[r];
        if (g.height < 0 || g.width < 0 || g.row < 0 || g.col < 0 || g.row + g.height > ny || g.col + g.width > nx)
            throw SpecError("simulation: region " + std::to_string(r) + " lies outside the " + std::to_string(ny) +
                            "x" + std::to_string(nx) + " grid");
    }
    for (const auto& c : couplings) {
        if (c.a < 0 || c.b < 0 || c.a >= int(regions.size()) || c.b >= int(regions.size()) || c.a == c.b)
            throw SpecError("simulation: coupling references invalid regions " + std::to_string(c.a) + "," +
                            std::to_string(c.b));
    }
}

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

} // namespace

SimulationSpec parse_simulation_spec(const std::string& text, const std::string& source)
{
    SimulationSpec spec;
    bool regions_seen = false;
    bool couplings_seen = false;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        if (trim(line).empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(source, lineno, 1, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val_text = trim(line.substr(eq + 1));
        std::istringstream val(val_text);
        auto fail = [&] { throw ParseError(source, lineno, eq + 2, "malformed value for '" + key + "'"); };
        auto expect_end = [&] {
            std::string rest;
            if (val >> rest)
                fail();
        };
        if (key == "n") {
            if (!(val >> spec.n))
                fail();
        } else if (key == "nx") {
            if (!(val >> spec.nx))
                fail();
        } else if (key == "ny") {
            if (!(val >> spec.ny))
                fail();
        } else if (key == "sigma") {
            if (!(val >> spec.sigma))
                fail();
        } else if (key == "truncate") {
            if (!(val >> spec.truncate))
                fail();
        } else if (key == "snr_db") {
            if (!(val >> spec.snr_db))
                fail();
        } else if (key == "seed") {
            if (!(val >> spec.seed))
                fail();
        } else if (key == "scaling") {
            std::string s;
            if (!(val >> s))
                fail();
            if (s == "region_mean")
                spec.scaling = CouplingScale::RegionMean;
            else if (s == "entrywise")
                spec.scaling = CouplingScale::Entrywise;
            else
                fail();
        } else if (key == "region") {
            if (!regions_seen)
                spec.regions.clear();
            regions_seen = true;
            if (val_text == "none")
                continue;
            Region r;
            if (!(val >> r.row >> r.col >> r.height >> r.width >> r.value))
                fail();
            spec.regions.push_back(r);
        } else if (key == "coupling") {
            if (!couplings_seen)
                spec.couplings.clear();
            couplings_seen = true;
            if (val_text == "none")
                continue;
            Coupling c;
            if (!(val >> c.a >> c.b >> c.r))
                fail();
            spec.couplings.push_back(c);
        } else {
            throw ParseError(source, lineno, 1, "unknown key '" + key + "'");
        }
        expect_end();
    }
    spec.validate();
    return spec;
}

std::string format_simulation_spec(const SimulationSpec& spec)
{
    std::ostringstream out;
    out.precision(17);
    out << "n = " << spec.n << "\nnx = " << spec.nx << "\nny = " << spec.ny << "\nsigma = " << spec.sigma
        << "\ntruncate = " << spec.truncate << "\nsnr_db = " << spec.snr_db << "\nseed = " << spec.seed
        << "\nscaling = " << (spec.scaling == CouplingScale::RegionMean ? "region_mean" : "entrywise") << "\n";
    if (spec.regions.empty())
        out << "region = none\n";
    for (const auto& r : spec.regions)
        out << "region = " << r.row << " " << r.col << " " << r.height << " " << r.width << " " << r.value << "\n";
    if (spec.couplings.empty())
        out << "coupling = none\n";
    for (const auto& c : spec.couplings)
        out << "coupling = " << c.a << " " << c.b << " " << c.r << "\n";
    return out.str();
}

std::vector<std::vector<Index>> region_cells(const SimulationSpec& spec)
{
    std::vector<std::vector<Index>> out;
    for (const auto& r : spec.regions) {
        std::vector<Index> cells;
        for (int i = r.row; i < r.row + r.height; ++i)
            for (int j = r.col; j < r.col + r.width; ++j)
                cells.push_back(Index(i) * spec.nx + j);
        out.push_back(std::move(cells));
    }
    return out;
}

VectorXd make_truth(const SimulationSpec& spec)
{
    spec.validate();
    VectorXd w = VectorXd::Zero(Index(spec.nx) * spec.ny);
    std::vector<bool> taken(std::size_t(w.size()), false);
    const auto cells = region_cells(spec);
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (Index c : cells[r]) {
            if (taken[std::size_t(c)])
                throw SpecError("simulation: region " + std::to_string(r) + " overlaps an earlier region");
            taken[std::size_t(c)] = true;
            w[c] = spec.regions[r].value;
        }
    }
    return w;
}

std::vector<double> gaussian_kernel(double sigma, double truncate)
{
    if (sigma <= 0.0)
        return {1.0};
    const int radius = int(truncate * sigma + 0.5);
    std::vector<double> k(std::size_t(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
        k[std::size_t(i + radius)] = v;
        total += v;
    }
    for (auto& v : k)
        v /= total;
    return k;
}

namespace {

int reflect(int i, int n)
{
    const int period = 2 * n;
    int m = i % period;
    if (m < 0)
        m += period;
    return m < n ? m : period - 1 - m;
}

} // namespace

VectorXd gaussian_blur(const VectorXd& image, int nx, int ny, double sigma, double truncate)
{
    if (image.size() != Index(nx) * ny)
        throw DimensionError("gaussian_blur: image size does not match grid");
    const auto k = gaussian_kernel(sigma, truncate);
    const int radius = int(k.size() / 2);
    VectorXd tmp(image.size());
    for (int r = 0; r < ny; ++r) {
        for (int c = 0; c < nx; ++c) {
            double acc = 0.0;
            for (int o = -radius; o <= radius; ++o)
                acc += k[std::size_t(o + radius)] * image[Index(r) * nx + reflect(c + o, nx)];
            tmp[Index(r) * nx + c] = acc;
        }
    }
    VectorXd out(image.size());
    for (int r = 0; r < ny; ++r) {
        for (int c = 0; c < nx; ++c) {
            double acc = 0.0;
            for (int o = -radius; o <= radius; ++o)
                acc += k[std::size_t(o + radius)] * tmp[Index(reflect(r + o, ny)) * nx + c];
            out[Index(r) * nx + c] = acc;
        }
    }
    return out;
}

CovarianceRoot::CovarianceRoot(const SimulationSpec& spec) : dim_(Index(spec.nx) * spec.ny)
{
    spec.validate();
    const auto all = region_cells(spec);
    std::vector<int> slot(all.size(), -1);
    for (std::size_t r = 0; r < all.size(); ++r) {
        if (!all[r].empty()) {
            slot[r] = int(cells_.size());
            cells_.push_back(all[r]);
        }
    }
    const Index k = Index(cells_.size());
    coupling_ = MatrixXd::Zero(k, k);
    for (const auto& c : spec.couplings) {
        const int a = slot[std::size_t(c.a)];
        const int b = slot[std::size_t(c.b)];
        if (a < 0 || b < 0)
            continue;
        const double scale = std::sqrt(double(cells_[std::size_t(a)].size()) * double(cells_[std::size_t(b)].size()));
        const double v = spec.scaling == CouplingScale::Entrywise ? c.r * scale : c.r;
        coupling_(a, b) += v;
        coupling_(b, a) += v;
    }
    const MatrixXd core = MatrixXd::Identity(k, k) + coupling_;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(core);
    eigenvalues_ = eig.eigenvalues();
    VectorXd roots(k);
    for (Index i = 0; i < k; ++i) {
        const double ev = eigenvalues_[i];
        if (ev < -1e-10) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6g", ev);
            throw SpecError(std::string("simulation: covariance is not positive semidefinite (eigenvalue ") + buf +
                            ")");
        }
        roots[i] = std::sqrt(std::max(ev, 0.0));
    }
    root_minus_identity_ = eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose() -
                           MatrixXd::Identity(k, k);
}

void CovarianceRoot::apply(Eigen::Ref<VectorXd> x) const
{
    if (x.size() != dim_)
        throw DimensionError("covariance root: vector length mismatch");
    const Index k = Index(cells_.size());
    VectorXd proj(k);
    for (Index a = 0; a < k; ++a) {
        double s = 0.0;
        for (Index c : cells_[std::size_t(a)])
            s += x[c];
        proj[a] = s / std::sqrt(double(cells_[std::size_t(a)].size()));
    }
    const VectorXd mix = root_minus_identity_ * proj;
    for (Index a = 0; a < k; ++a) {
        const double v = mix[a] / std::sqrt(double(cells_[std::size_t(a)].size()));
        for (Index c : cells_[std::size_t(a)])
            x[c] += v;
    }
}

MatrixXd CovarianceRoot::covariance() const
{
    MatrixXd S = MatrixXd::Identity(dim_, dim_);
    const Index k = Index(cells_.size());
    for (Index a = 0; a < k; ++a) {
        for (Index b = 0; b < k; ++b) {
            if (coupling_(a, b) == 0.0)
                continue;
            const double v = coupling_(a, b) / std::sqrt(double(cells_[std::size_t(a)].size()) *
                                                         double(cells_[std::size_t(b)].size()));
            for (Index i : cells_[std::size_t(a)])
                for (Index j : cells_[std::size_t(b)])
                    S(i, j) = v;
        }
    }
    return S;
}

Simulation simulate(const SimulationSpec& spec)
{
    spec.validate();
    const VectorXd truth = make_truth(spec);
    const CovarianceRoot root(spec);
    const Index p = Index(spec.nx) * spec.ny;

    auto design_rng = make_stream(spec.seed, "design");
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd X(spec.n, p);
    VectorXd img(p);
    for (int i = 0; i < spec.n; ++i) {
        for (Index c = 0; c < p; ++c)
            img[c] = normal(design_rng);
        VectorXd row = gaussian_blur(img, spec.nx, spec.ny, spec.sigma, spec.truncate);
        root.apply(row);
        X.row(i) = row.transpose();
    }

    const VectorXd signal = X * truth;
    const double signal_var = (signal.array() - signal.mean()).square().mean();
    auto noise_rng = make_stream(spec.seed, "noise");
    VectorXd noise(spec.n);
    std::normal_distribution<double> noise_normal(0.0, 1.0);
    for (int i = 0; i < spec.n; ++i)
        noise[i] = noise_normal(noise_rng);
    const double noise_var = (noise.array() - noise.mean()).square().mean();
    const double target_var = signal_var / std::pow(10.0, spec.snr_db / 10.0);
    if (noise_var > 0.0)
        noise *= std::sqrt(target_var / noise_var);

    Simulation sim{Dataset{X, signal + noise, {}}, truth, GridMask(spec.dims())};
    return sim;
}

} // namespace tsp
