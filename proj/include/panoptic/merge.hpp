#pragma once

#include "panoptic/block_sampler.hpp"
#include "panoptic/core.hpp"

namespace panoptic {

struct BlockInstances {
    Vec2 center{};
    std::vector<IndexSet> instances;  // global subsampled-cloud ids
};

/// Greedy block merging. Blocks are visited in (center_x, center_y) order and,
/// within a block, instances by descending size then lowest point id. Returns
/// one label per point: −1 for unassigned, otherwise 1, 2, ... in assignment
/// order. Only unassigned entries are ever written.
std::vector<InstanceId> merge_instances(std::vector<BlockInstances> blocks, std::size_t num_points, double iou_threshold);

struct BlockSemantics {
    IndexSet global_ids;
    std::vector<ClassId> predicted;
    std::vector<double> confidence;  // probability of the predicted class
};

/// Per-point majority class over the blocks covering it. Vote ties go to the
/// class backed by the most confident single block, then the smaller id.
/// Uncovered points get −1.
std::vector<ClassId> fuse_semantics(std::span<const BlockSemantics> blocks, std::size_t num_points);

struct BlockResult {
    Vec2 center{};
    BlockSemantics semantics;
    std::vector<IndexSet> instances;
};

/// Labels of the subsampled cloud after merging all blocks.
struct GlobalPanoptic {
    std::vector<InstanceId> instance;
    std::vector<ClassId> semantic;
};

/// merge_instances + fuse_semantics; stuff points end with instance −1.
/// Throws ContractError if a point is covered by no block or an instance is empty.
GlobalPanoptic block_merge(std::span<const BlockResult> blocks, std::size_t num_points, double iou_threshold,
                           const SemanticTaxonomy& taxonomy);

/// Nearest subsampled point for every original point (ties → lower index).
std::vector<std::size_t> nearest_indices(const PointCloud& original, const PointCloud& subsampled);

/// Copies labels from each original point's nearest subsampled point, then
/// clears the instance of every stuff-labeled point.
Labeling upsample_labels(const PointCloud& original, const PointCloud& subsampled, const GlobalPanoptic& labels,
                         const SemanticTaxonomy& taxonomy);

namespace reference {

/// Brute-force O(N·M) nearest neighbours.
std::vector<std::size_t> nearest_indices(const PointCloud& original, const PointCloud& subsampled);

} // namespace reference

} // namespace panoptic
