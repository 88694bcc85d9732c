#pragma once

#include "tsp/cluster.hpp"
#include "tsp/common.hpp"
#include "tsp/grid.hpp"
#include "tsp/harness.hpp"
#include "tsp/penalty.hpp"
#include "tsp/solver.hpp"

#include <cstdint>
#include <string>

namespace tsp::io {

std::string read_file(const std::string& path);
/// Writes to a temporary sibling and renames it over `path`.
void atomic_write(const std::string& path, const std::string& content);
/// FNV-1a 64-bit digest, 16 hex digits.
std::string digest(const std::string& content);

/// Headerless CSV, one row per line, 17 significant digits.
std::string format_matrix_csv(const MatrixXd& M);
MatrixXd parse_matrix_csv(const std::string& text, const std::string& source = "<csv>");

/// Binary matrix: magic "TSP1", little-endian u64 rows and cols, row-major f64.
std::string format_matrix_binary(const MatrixXd& M);
MatrixXd parse_matrix_binary(const std::string& bytes, const std::string& source = "<bin>");

/// Reads CSV or binary (detected from the magic bytes).
MatrixXd read_matrix(const std::string& path);
/// Binary when the path ends in ".bin", CSV otherwise.
void write_matrix(const std::string& path, const MatrixXd& M);
/// A single row or column read as a vector.
VectorXd read_vector(const std::string& path);

/// `dims nx ny nz` followed by the 0/1 cells in row-major order.
std::string format_mask(const GridMask& mask);
GridMask parse_mask(const std::string& text, const std::string& source = "<mask>");

/// One node per line: `id leaf|internal child1 child2 depth size delta` with
/// 1-based ids (0 = no child).
std::string format_tree(const ClusterTree& tree);
ClusterTree parse_tree(const std::string& text, const std::string& source = "<tree>");

/// One group per line: `eta idx1 idx2 ...` with 1-based indices.
std::string format_groups(const GroupStructure& gs);

/// Voxel map laid out on the grid (excluded cells are 0): one CSV line per
/// image row, z-slices stacked.
MatrixXd voxel_map_grid(const VectorXd& map, const GridMask& mask);
/// 8-bit binary PGM with linear min-max scaling; the sidecar text records
/// the scale so pixel values can be mapped back.
std::string format_pgm(const MatrixXd& image);
std::string format_pgm_scale(const MatrixXd& image);

/// FitResult as JSON; coefficients live in a CSV sidecar named by `coef_path`.
std::string format_fit_json(const FitResult& r, const std::string& coef_path, const std::string& manifest_path);
FitResult parse_fit_json(const std::string& text, const std::string& base_dir);

/// One line per fold: model,metric,fold,error,lambda,nonzero_pct.
std::string format_report_csv(const EvalReport& r);
std::vector<EvalReport> parse_report_csv(const std::string& text, const std::string& source = "<report>");
/// Aligned text table of reports (with p-values against the first, when given).
std::string format_report_table(const std::vector<EvalReport>& reports, const std::vector<double>& p_values = {},
                                 bool with_time = true);

} // namespace tsp::io
