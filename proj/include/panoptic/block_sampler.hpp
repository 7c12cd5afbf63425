#pragma once

#include "panoptic/core.hpp"
#include "panoptic/kdtree.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>

namespace panoptic {

using Vec2 = std::array<double, 2>;

struct VoxelKey {
    std::int64_t i, j, k;
    friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
};

/// For each subsampled point, its voxel and the original points it stands for.
struct VoxelMap {
    std::vector<VoxelKey> keys;
    std::vector<IndexSet> members;
};

struct SubsampleResult {
    PointCloud cloud;
    std::optional<Labeling> labels;
    VoxelMap voxels;
};

/// One point per occupied voxel (key = floor(coord / voxel)), placed at the
/// members' barycentre, with majority semantic and instance labels (ties to
/// the smaller value). Output order follows first occurrence in the input.
SubsampleResult voxel_subsample(const PointCloud& cloud, const Labeling* labels, double voxel);

/// Draws k point indices with replacement, P(i) ∝ sqrt(1 / N_class(i)).
std::vector<PointId> class_balanced_draws(const Labeling& labels, std::size_t k, std::uint64_t seed);

/// (x, y) of the points chosen by class_balanced_draws.
std::vector<Vec2> class_balanced_centers(const PointCloud& cloud, const Labeling& labels, std::size_t k,
                                         std::uint64_t seed);

struct Bounds2 {
    double min_x, min_y, max_x, max_y;
};

Bounds2 xy_bounds(const PointCloud& cloud);

/// ceil(extent / step) + 1 centres per axis starting at the min corner,
/// ordered by (x, y).
std::vector<Vec2> grid_centers(const Bounds2& bounds, double step);

struct Block {
    IndexSet global_ids;
    std::vector<Vec3> local;  // global − (cx, cy, 0)
    Vec2 center{};
    double radius = 0.0;

    std::size_t size() const noexcept { return global_ids.size(); }
    bool empty() const noexcept { return global_ids.empty(); }
};

/// 2D index over a cloud's (x, y) for vertical-cylinder queries.
class CylinderIndex {
  public:
    explicit CylinderIndex(const PointCloud& cloud);

    /// Points with horizontal distance <= radius; z never filters.
    Block cut(const Vec2& center, double radius) const;

  private:
    const PointCloud* cloud_;
    KdTree<2> tree_;
};

Block cut_cylinder(const PointCloud& cloud, const Vec2& center, double radius);

struct AugmentParams {
    double jitter_sigma = 0.01;
    double scale_min = 0.9;
    double scale_max = 1.1;
    bool rotate = true;
    double reflect_prob = 0.5;
};

/// The random quantities of one augmentation, drawn up front.
struct AugmentDraw {
    double angle = 0.0;
    Vec3 scale{1.0, 1.0, 1.0};
    bool reflect_y = false;
};

AugmentDraw draw_augmentation(const AugmentParams& params, std::uint64_t seed);

/// Jitter, rotation about the cylinder axis, per-axis scale, y reflection,
/// in that order. Labels are untouched.
Block apply_augmentation(const Block& block, const AugmentDraw& draw, double jitter_sigma, std::uint64_t seed);

Block augment(const Block& block, std::uint64_t seed, const AugmentParams& params = {});

} // namespace panoptic
