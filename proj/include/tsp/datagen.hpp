#pragma once

#include "tsp/common.hpp"
#include "tsp/grid.hpp"
#include "tsp/loss.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tsp {

/// Axis-aligned rectangle of an image; row/col of the top-left cell.
struct Region {
    int row = 0;
    int col = 0;
    int height = 0;
    int width = 0;
    double value = 1.0;
};

/// Correlation between regions a and b (indices into SimulationSpec::regions).
struct Coupling {
    int a = 0;
    int b = 0;
    double r = 0.0;
};

/// How a coupling coefficient enters the covariance.
///   Entrywise:  Sigma_ij = r for every i in Ca, j in Cb.
///   RegionMean: Sigma_ij = r / sqrt(|Ca||Cb|), so the normalized
///               region-mean directions have correlation r.
enum class CouplingScale { RegionMean, Entrywise };

struct SimulationSpec {
    int n = 300;
    int nx = 40; // columns
    int ny = 40; // rows
    double sigma = 2.0;
    double truncate = 4.0;
    std::vector<Region> regions{{6, 6, 8, 8, 1.0}, {26, 6, 8, 8, 1.0}, {6, 31, 3, 3, 1.0}};
    std::vector<Coupling> couplings{{0, 1, 0.3}, {1, 2, -0.2}};
    double snr_db = 10.0;
    CouplingScale scaling = CouplingScale::RegionMean;
    std::uint64_t seed = 0;

    GridDims dims() const { return {nx, ny, 1}; }
    void validate() const;
};

/// Parses `key = value` lines (n, nx, ny, sigma, truncate, snr_db, seed,
/// scaling, region = row col height width value, coupling = a b r).
/// Region or coupling lines replace the corresponding defaults.
SimulationSpec parse_simulation_spec(const std::string& text, const std::string& source = "<spec>");
std::string format_simulation_spec(const SimulationSpec& spec);

/// Cell indices (row * nx + col) of each region.
std::vector<std::vector<Index>> region_cells(const SimulationSpec& spec);

/// Piecewise-constant ground-truth image, length nx * ny.
VectorXd make_truth(const SimulationSpec& spec);

/// Normalized 1D Gaussian kernel truncated at truncate * sigma.
std::vector<double> gaussian_kernel(double sigma, double truncate);

/// Separable Gaussian blur of a row-major ny x nx image with half-sample
/// symmetric boundary reflection.
VectorXd gaussian_blur(const VectorXd& image, int nx, int ny, double sigma, double truncate);

/// Square root of Sigma = I + U K U^T, where U holds the normalized region
/// indicators. Sigma^{1/2} = I + U ((I + K)^{1/2} - I) U^T.
class CovarianceRoot {
public:
    explicit CovarianceRoot(const SimulationSpec& spec);

    /// x <- Sigma^{1/2} x for one image.
    void apply(Eigen::Ref<VectorXd> x) const;
    /// Dense Sigma (for inspection on small grids).
    MatrixXd covariance() const;
    /// Eigenvalues of the k x k core I + K, ascending.
    const VectorXd& core_eigenvalues() const { return eigenvalues_; }

private:
    Index dim_;
    std::vector<std::vector<Index>> cells_;
    MatrixXd coupling_; // K
    MatrixXd root_minus_identity_;
    VectorXd eigenvalues_;
};

struct Simulation {
    Dataset data;
    VectorXd truth;
    GridMask mask;
};

/// n images of i.i.d. normals, blurred, multiplied by Sigma^{1/2}; targets
/// y = X w + noise with empirical SNR equal to spec.snr_db.
Simulation simulate(const SimulationSpec& spec);

} // namespace tsp
