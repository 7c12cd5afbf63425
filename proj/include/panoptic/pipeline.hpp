#pragma once

#include "panoptic/block_sampler.hpp"
#include "panoptic/core.hpp"
#include "panoptic/merge.hpp"
#include "panoptic/pcio.hpp"

#include <array>
#include <string>
#include <utility>

namespace panoptic {

/// An Error raised inside a named pipeline stage.
class StageError : public Error {
  public:
    StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

  private:
    std::string stage_;
};

enum class ProviderKind { Oracle, File };
enum class ScorerKind { Oracle, Consensus };

ProviderKind provider_from_string(const std::string& name);
ScorerKind scorer_from_string(const std::string& name);

struct SegmentOptions {
    ProviderKind provider = ProviderKind::Oracle;
    ScorerKind scorer = ScorerKind::Oracle;
    int workers = 1;
    bool keep_candidates = false;
};

struct StageCounts {
    std::size_t input_points = 0;
    std::size_t subsampled_points = 0;
    std::size_t grid_centers = 0;
    std::size_t blocks = 0;  // non-empty cylinders
    std::array<std::size_t, 3> candidates_by_origin{};  // indexed by Origin
    std::size_t candidates = 0;
    std::size_t after_size = 0;
    std::size_t after_nms = 0;
    std::size_t after_score = 0;
    std::size_t block_instances = 0;
    std::size_t merged_instances = 0;
};

struct SegmentResult {
    Labeling labels;  // on the original points
    StageCounts counts;
    std::vector<std::pair<std::string, double>> timings;  // seconds; block stages summed over blocks
    std::vector<BlockCandidates> kept;                     // when SegmentOptions::keep_candidates
};

/// Averages every feature column over the members of each voxel.
FeatureColumns average_columns(const FeatureColumns& columns, const VoxelMap& voxels);

/// The cylinders cut from the grid over `cloud`, empty ones left out, in grid order.
std::vector<Block> make_blocks(const PointCloud& cloud, const PipelineConfig& config, std::size_t* grid_size = nullptr);

/// Subsample, cut blocks, provide features, cluster, score, prune, merge and
/// upsample. `gt` is required by the oracle provider and scorer; `features`
/// (per original point) by the file provider.
SegmentResult segment(const PointCloud& cloud, const Labeling* gt, const FeatureColumns* features,
                      const SemanticTaxonomy& taxonomy, const PipelineConfig& config, const SegmentOptions& options);

void write_counts(std::ostream& out, const StageCounts& counts);

} // namespace panoptic
