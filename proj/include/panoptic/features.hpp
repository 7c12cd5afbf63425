#pragma once

#include "panoptic/block_sampler.hpp"
#include "panoptic/core.hpp"
#include "panoptic/pcio.hpp"

#include <cstdint>
#include <map>

namespace panoptic {

inline constexpr std::size_t kEmbeddingDim = 5;

/// Per-point network outputs for one block, in block point order.
struct FeatureSet {
    std::size_t num_classes = 0;
    std::vector<double> sem_probs;  // row-major, size() × num_classes
    std::vector<Vec3> offsets;
    std::vector<Vec5> embeddings;

    std::size_t size() const noexcept { return offsets.size(); }
    std::span<const double> probs(std::size_t i) const
    {
        return {sem_probs.data() + i * num_classes, num_classes};
    }
    ClassId predicted_class(std::size_t i) const;

    /// Shapes agree, values finite, probability rows non-negative and summing to 1 ± 1e-6.
    void validate() const;
};

struct OracleNoise {
    double sem_flip_prob = 0.0;
    double offset_sigma = 0.0;
    double embedding_sigma = 0.0;
};

/// Instance id → 5D code, pairwise at least `min_distance` apart.
using Codebook = std::map<InstanceId, Vec5>;

/// Codes are drawn on a sphere of radius `min_distance` by rejection, each
/// id's draws seeded by the id itself. When the sphere cannot hold the
/// requested number of codes the radius grows by 25% and sampling restarts.
Codebook make_codebook(std::span<const InstanceId> ids, double min_distance = 3.0);

/// Synthesises features from ground truth. `gt` is indexed by global point id.
/// Offsets point at the centroid of the instance's points inside the block.
FeatureSet oracle_provide(const Block& block, const Labeling& gt, const SemanticTaxonomy& taxonomy,
                          const OracleNoise& noise, std::uint64_t seed);

/// Gathers precomputed feature columns (indexed by global point id) for the
/// block. Probability rows within 1e-3 of summing to 1 are renormalised.
FeatureSet file_provide(const Block& block, const FeatureColumns& columns, std::size_t num_classes);

/// Inverse of file_provide for a whole cloud; used to export features.
FeatureColumns to_feature_columns(const FeatureSet& features);

} // namespace panoptic
