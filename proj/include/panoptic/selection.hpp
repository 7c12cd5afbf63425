#pragma once

#include "panoptic/core.hpp"

#include <span>
#include <unordered_map>

namespace panoptic {

/// Best IoU between the candidate and any ground-truth instance.
double oracle_score(const InstanceCandidate& candidate, std::span<const IndexSet> gt_instances);

/// oracle_score against the instances of a labeling, via label lookups instead
/// of set intersections.
class OracleScorer {
  public:
    explicit OracleScorer(const Labeling& gt);
    double score(const InstanceCandidate& candidate) const;

  private:
    const Labeling* gt_;
    std::unordered_map<InstanceId, std::size_t> sizes_;
};

/// Best IoU between candidates[index] and any candidate of another origin;
/// 1.0 when the list holds a single origin.
double consensus_score(std::size_t index, std::span<const InstanceCandidate> candidates);

/// consensus_score for every candidate at once.
std::vector<double> consensus_scores(std::span<const InstanceCandidate> candidates);

struct PruneParams {
    std::size_t min_size = 10;
    double score_threshold = 0.6;
    double nms_iou = 0.3;
};

struct PruneResult {
    std::vector<InstanceCandidate> kept;  // in NMS priority order
    std::size_t input = 0;
    std::size_t after_size = 0;
    std::size_t after_nms = 0;
    std::size_t after_score = 0;
};

/// Drops small candidates, runs greedy NMS (score descending, then larger
/// first, then lower first point id), then drops low scores.
PruneResult prune(std::vector<InstanceCandidate> candidates, const PruneParams& params);

/// NMS priority: true when `a` outranks `b`.
bool outranks(const InstanceCandidate& a, const InstanceCandidate& b) noexcept;

struct OwnedInstance {
    IndexSet points;
    ClassId class_id;
    double score;
};

/// Gives every point covered by a kept candidate to the highest-priority
/// candidate containing it. `kept` must be in priority order; instances that
/// end up empty are dropped.
std::vector<OwnedInstance> resolve_ownership(std::span<const InstanceCandidate> kept);

} // namespace panoptic
