#pragma once

#include "panoptic/block_sampler.hpp"
#include "panoptic/core.hpp"
#include "panoptic/features.hpp"
#include "panoptic/pcio.hpp"

#include <span>

namespace panoptic {

struct ClusterParams {
    double region_growing_radius = 0.03;
    double meanshift_bandwidth = 0.6;
    int meanshift_max_iter = 300;
    double meanshift_tol = 1e-4;
    Setting setting = Setting::IV;

    static ClusterParams from(const PipelineConfig& config);
};

// Distances compared against a closed threshold get this much relative slack
// so that spacings equal to the radius survive decimal rounding.
inline constexpr double kClosedThresholdSlack = 1e-9;

/// Connected components of the graph joining points at distance <= radius
/// with equal class. Components are ordered by their smallest member; members
/// ascend. Parallel over points.
std::vector<IndexSet> region_grow(std::span<const Vec3> points, std::span<const ClassId> class_of, double radius);

std::vector<Vec3> shift_points(std::span<const Vec3> positions, std::span<const Vec3> offsets);

struct MeanShiftParams {
    double bandwidth = 0.6;
    int max_iter = 300;
    double tol = 1e-4;
};

/// Flat-kernel mean-shift seeded from every point. Converged modes closer than
/// bandwidth/2 merge into the mode of the lowest-index seed. Output ordering
/// as region_grow. Parallel over seeds.
std::vector<IndexSet> mean_shift(std::span<const Vec5> embeddings, const MeanShiftParams& params);

/// Candidates from the generators enabled by `params.setting`, listed in
/// generator order embedding, offset, raw. Only points whose argmax class is
/// a thing class take part. Point ids are global. Scores are left at 0.
std::vector<InstanceCandidate> generate_candidates(const Block& block, const FeatureSet& features,
                                                   const SemanticTaxonomy& taxonomy, const ClusterParams& params);

bool uses_generator(Setting setting, Origin origin) noexcept;

namespace reference {

/// Serial brute-force O(M²) versions of the kernels above, kept as test oracles.
std::vector<IndexSet> region_grow(std::span<const Vec3> points, std::span<const ClassId> class_of, double radius);
std::vector<IndexSet> mean_shift(std::span<const Vec5> embeddings, const MeanShiftParams& params);

} // namespace reference

} // namespace panoptic
