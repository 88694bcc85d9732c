#pragma once

#include "tsp/cluster.hpp"
#include "tsp/common.hpp"

namespace tsp {

/// n x q design: voxel columns 0..p-1 followed by one parcel-mean column per
/// internal node, in node creation order.
MatrixXd augment(const MatrixXd& X, const ClusterTree& tree);

/// Voxel-space map m with m . x == w . augment(x) for every volume x:
/// m_k = sum over ancestors j of k (k included) of w_j / |P_j|.
VectorXd project_to_voxels(const VectorXd& w, const ClusterTree& tree);

/// Voxel map coloured by w at each voxel's ancestor of depth d. Leaves
/// shallower than d keep their own coefficient.
VectorXd scale_slice(const VectorXd& w, const ClusterTree& tree, int depth);

/// depth(j) for every node, as a vector usable for per-feature weights.
VectorXd node_depths(const ClusterTree& tree);

} // namespace tsp
