#include "tsp/grid.hpp"

#include <algorithm>
#include <queue>
#include <string>

namespace tsp {

GridMask::GridMask(GridDims dims) : GridMask(dims, std::vector<bool>(std::size_t(std::max<Index>(dims.cells(), 0)), true)) {}

GridMask::GridMask(GridDims dims, std::vector<bool> included) : dims_(dims), included_(std::move(included))
{
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1)
        throw DimensionError("grid dimensions must be >= 1");
    if (Index(included_.size()) != dims.cells())
        throw DimensionError("mask has " + std::to_string(included_.size()) + " cells, grid needs " +
                             std::to_string(dims.cells()));
    voxel_of_cell_.assign(included_.size(), -1);
    for (std::size_t cell = 0; cell < included_.size(); ++cell) {
        if (included_[cell]) {
            voxel_of_cell_[cell] = Index(cell_of_voxel_.size());
            cell_of_voxel_.push_back(Index(cell));
        }
    }
}

bool GridMask::in_bounds(Coord c) const
{
    return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < dims_.nx && c.y < dims_.ny && c.z < dims_.nz;
}

Index GridMask::cell_index(Coord c) const
{
    if (!in_bounds(c))
        throw IndexError("cell (" + std::to_string(c.x) + "," + std::to_string(c.y) + "," + std::to_string(c.z) +
                         ") outside grid");
    return (Index(c.z) * dims_.ny + c.y) * dims_.nx + c.x;
}

Coord GridMask::cell_coord(Index cell) const
{
    if (cell < 0 || cell >= num_cells())
        throw IndexError("cell index " + std::to_string(cell) + " out of range");
    const Index plane = Index(dims_.nx) * dims_.ny;
    return {int(cell % dims_.nx), int((cell % plane) / dims_.nx), int(cell / plane)};
}

bool GridMask::included(Coord c) const
{
    return in_bounds(c) && included_[std::size_t(cell_index(c))];
}

Index GridMask::voxel_id(Coord c) const
{
    if (!in_bounds(c))
        return -1;
    return voxel_of_cell_[std::size_t(cell_index(c))];
}

void GridMask::check_voxel(Index voxel) const
{
    if (voxel < 0 || voxel >= num_voxels())
        throw IndexError("voxel id " + std::to_string(voxel) + " out of range [0, " + std::to_string(num_voxels()) +
                         ")");
}

Index GridMask::cell_of_voxel(Index voxel) const
{
    check_voxel(voxel);
    return cell_of_voxel_[std::size_t(voxel)];
}

Coord GridMask::coord(Index voxel) const { return cell_coord(cell_of_voxel(voxel)); }

std::vector<Index> GridMask::neighbors(Index voxel) const
{
    const Coord c = coord(voxel);
    static constexpr std::array<std::array<int, 3>, 6> offsets{{
        {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
    std::vector<Index> out;
    for (const auto& o : offsets) {
        const Index v = voxel_id({c.x + o[0], c.y + o[1], c.z + o[2]});
        if (v >= 0)
            out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Index Adjacency::num_edges() const
{
    Index twice = 0;
    for (const auto& nb : neighbors)
        twice += Index(nb.size());
    return twice / 2;
}

std::vector<std::pair<Index, Index>> Adjacency::edges() const
{
    std::vector<std::pair<Index, Index>> out;
    for (Index u = 0; u < num_vertices(); ++u)
        for (Index v : neighbors[std::size_t(u)])
            if (u < v)
                out.emplace_back(u, v);
    return out;
}

Adjacency adjacency(const GridMask& mask)
{
    if (mask.num_voxels() == 0)
        throw DimensionError("adjacency of an empty mask");
    Adjacency adj;
    adj.neighbors.resize(std::size_t(mask.num_voxels()));
    for (Index v = 0; v < mask.num_voxels(); ++v)
        adj.neighbors[std::size_t(v)] = mask.neighbors(v);
    return adj;
}

std::size_t count_components(const Adjacency& adj)
{
    const auto n = std::size_t(adj.num_vertices());
    std::vector<bool> seen(n, false);
    std::size_t components = 0;
    std::queue<Index> frontier;
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s])
            continue;
        ++components;
        seen[s] = true;
        frontier.push(Index(s));
        while (!frontier.empty()) {
            const Index u = frontier.front();
            frontier.pop();
            for (Index v : adj.neighbors[std::size_t(u)]) {
                if (v < 0 || std::size_t(v) >= n)
                    throw IndexError("adjacency references vertex " + std::to_string(v));
                if (!seen[std::size_t(v)]) {
                    seen[std::size_t(v)] = true;
                    frontier.push(v);
                }
            }
        }
    }
    return components;
}

} // namespace tsp
