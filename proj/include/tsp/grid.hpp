#pragma once

#include "tsp/common.hpp"

#include <array>
#include <utility>
#include <vector>

namespace tsp {

struct GridDims {
    int nx = 1;
    int ny = 1;
    int nz = 1;

    Index cells() const { return Index(nx) * ny * nz; }
    bool operator==(const GridDims&) const = default;
};

struct Coord {
    int x = 0;
    int y = 0;
    int z = 0;

    bool operator==(const Coord&) const = default;
};

/// Voxel grid with an inclusion mask. Included cells are numbered 0..p-1 in
/// row-major order (x fastest, then y, then z). 2D grids are nz == 1.
class GridMask {
public:
    explicit GridMask(GridDims dims);
    GridMask(GridDims dims, std::vector<bool> included);

    const GridDims& dims() const { return dims_; }
    Index num_cells() const { return dims_.cells(); }
    Index num_voxels() const { return Index(cell_of_voxel_.size()); }

    bool included(Coord c) const;
    Index cell_index(Coord c) const;
    Coord cell_coord(Index cell) const;

    /// Voxel id of an included cell, -1 for excluded or out-of-range cells.
    Index voxel_id(Coord c) const;
    Coord coord(Index voxel) const;
    Index cell_of_voxel(Index voxel) const;

    /// Axis neighbours (4-connectivity in 2D, 6 in 3D) that are included.
    std::vector<Index> neighbors(Index voxel) const;

private:
    bool in_bounds(Coord c) const;
    void check_voxel(Index voxel) const;

    GridDims dims_;
    std::vector<bool> included_;
    std::vector<Index> voxel_of_cell_;
    std::vector<Index> cell_of_voxel_;
};

/// Symmetric voxel adjacency stored as sorted neighbour lists.
struct Adjacency {
    std::vector<std::vector<Index>> neighbors;

    Index num_vertices() const { return Index(neighbors.size()); }
    Index num_edges() const;
    /// Undirected edges (u < v), sorted.
    std::vector<std::pair<Index, Index>> edges() const;
};

Adjacency adjacency(const GridMask& mask);

/// Number of connected components (0 for an empty graph).
std::size_t count_components(const Adjacency& adj);

} // namespace tsp
