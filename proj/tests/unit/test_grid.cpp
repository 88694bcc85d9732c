#include "tsp/grid.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdlib>

using namespace tsp;

TEST_CASE("neighbors on a full 3x3 grid")
{
    const GridMask mask(GridDims{3, 3, 1});
    auto nb = mask.neighbors(mask.voxel_id({1, 1, 0}));
    std::sort(nb.begin(), nb.end());
    std::vector<Index> want{mask.voxel_id({1, 0, 0}), mask.voxel_id({0, 1, 0}), mask.voxel_id({2, 1, 0}),
                            mask.voxel_id({1, 2, 0})};
    std::sort(want.begin(), want.end());
    CHECK(nb == want);
    CHECK(GridMask(GridDims{1, 1, 1}).neighbors(0).empty());
}

TEST_CASE("3d neighbors match a scan over all pairs")
{
    std::vector<bool> keep(27);
    for (std::size_t i = 0; i < keep.size(); ++i)
        keep[i] = i % 5 != 3;
    const GridMask mask(GridDims{3, 3, 3}, keep);
    for (Index v = 0; v < mask.num_voxels(); ++v) {
        std::vector<Index> brute;
        const Coord a = mask.coord(v);
        for (Index u = 0; u < mask.num_voxels(); ++u) {
            const Coord b = mask.coord(u);
            if (std::abs(a.x - b.x) + std::abs(a.y - b.y) + std::abs(a.z - b.z) == 1)
                brute.push_back(u);
        }
        auto nb = mask.neighbors(v);
        std::sort(nb.begin(), nb.end());
        CHECK(nb == brute);
    }
}

TEST_CASE("voxel ids and coordinates round trip")
{
    std::vector<bool> keep{true, false, true, true, false, true};
    const GridMask mask(GridDims{3, 2, 1}, keep);
    REQUIRE(mask.num_voxels() == 4);
    for (Index v = 0; v < mask.num_voxels(); ++v)
        CHECK(mask.voxel_id(mask.coord(v)) == v);
    CHECK(mask.voxel_id({1, 0, 0}) == -1);
    CHECK(mask.voxel_id({5, 0, 0}) == -1);
    CHECK_THROWS_AS(mask.coord(4), IndexError);
}

TEST_CASE("edge counts")
{
    CHECK(adjacency(GridMask(GridDims{2, 1, 1})).num_edges() == 1);
    const auto e = adjacency(GridMask(GridDims{2, 1, 1})).edges();
    CHECK(e == std::vector<std::pair<Index, Index>>{{0, 1}});
    CHECK(adjacency(GridMask(GridDims{40, 40, 1})).num_edges() == 3120);
    std::vector<bool> one(9, false);
    one[4] = true;
    CHECK(adjacency(GridMask(GridDims{3, 3, 1}, one)).num_edges() == 0);
    CHECK_THROWS(adjacency(GridMask(GridDims{2, 2, 1}, std::vector<bool>(4, false))));
}

TEST_CASE("components")
{
    // two columns separated by an excluded column
    std::vector<bool> keep{true, false, true, true, false, true};
    CHECK(count_components(adjacency(GridMask(GridDims{3, 2, 1}, keep))) == 2);
    CHECK(count_components(adjacency(GridMask(GridDims{4, 4, 1}))) == 1);
}
