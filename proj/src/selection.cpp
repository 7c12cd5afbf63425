#include "panoptic/selection.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>

namespace panoptic {

double oracle_score(const InstanceCandidate& candidate, std::span<const IndexSet> gt_instances)
{
    double best = 0.0;
    for (const IndexSet& gt : gt_instances) {
        if (candidate.point_ids.empty() && gt.empty()) continue;
        best = std::max(best, instance_iou(candidate.point_ids, gt));
    }
    return best;
}

OracleScorer::OracleScorer(const Labeling& gt) : gt_(&gt)
{
    for (InstanceId id : gt.instance) {
        if (id >= 0) ++sizes_[id];
    }
}

double OracleScorer::score(const InstanceCandidate& candidate) const
{
    std::map<InstanceId, std::size_t> common;
    for (PointId p : candidate.point_ids) {
        if (p >= gt_->instance.size()) throw ContractError("candidate point outside the ground truth");
        const InstanceId id = gt_->instance[p];
        if (id >= 0) ++common[id];
    }
    double best = 0.0;
    for (const auto& [id, inter] : common) {
        const double uni = static_cast<double>(candidate.point_ids.size() + sizes_.at(id) - inter);
        best = std::max(best, static_cast<double>(inter) / uni);
    }
    return best;
}

double consensus_score(std::size_t index, std::span<const InstanceCandidate> candidates)
{
    const InstanceCandidate& self = candidates[index];
    bool other_origin = false;
    double best = 0.0;
    for (const auto& c : candidates) {
        if (c.origin == self.origin) continue;
        other_origin = true;
        best = std::max(best, instance_iou(self.point_ids, c.point_ids));
    }
    return other_origin ? best : 1.0;
}

std::vector<double> consensus_scores(std::span<const InstanceCandidate> candidates)
{
    const std::size_t n = candidates.size();
    std::vector<double> scores(n, 1.0);
    if (n == 0) return scores;
    const bool single_origin = std::all_of(candidates.begin(), candidates.end(),
                                           [&](const auto& c) { return c.origin == candidates[0].origin; });
    if (single_origin) return scores;

    // point → candidates containing it
    std::unordered_map<PointId, std::vector<std::size_t>> containing;
    for (std::size_t k = 0; k < n; ++k) {
        for (PointId p : candidates[k].point_ids) containing[p].push_back(k);
    }
    std::vector<std::size_t> common(n, 0);
    std::vector<std::size_t> touched;
    for (std::size_t k = 0; k < n; ++k) {
        touched.clear();
        for (PointId p : candidates[k].point_ids) {
            for (std::size_t j : containing[p]) {
                if (candidates[j].origin == candidates[k].origin) continue;
                if (common[j]++ == 0) touched.push_back(j);
            }
        }
        double best = 0.0;
        for (std::size_t j : touched) {
            const double uni = static_cast<double>(candidates[k].point_ids.size() + candidates[j].point_ids.size() -
                                                   common[j]);
            best = std::max(best, static_cast<double>(common[j]) / uni);
            common[j] = 0;
        }
        scores[k] = best;
    }
    return scores;
}

bool outranks(const InstanceCandidate& a, const InstanceCandidate& b) noexcept
{
    if (a.score != b.score) return a.score > b.score;
    if (a.point_ids.size() != b.point_ids.size()) return a.point_ids.size() > b.point_ids.size();
    const PointId fa = a.point_ids.empty() ? 0 : a.point_ids.front();
    const PointId fb = b.point_ids.empty() ? 0 : b.point_ids.front();
    return fa < fb;
}

PruneResult prune(std::vector<InstanceCandidate> candidates, const PruneParams& params)
{
    PruneResult result;
    result.input = candidates.size();

    std::erase_if(candidates, [&](const InstanceCandidate& c) { return c.point_ids.size() < params.min_size; });
    result.after_size = candidates.size();

    std::stable_sort(candidates.begin(), candidates.end(), outranks);
    std::vector<InstanceCandidate> kept;
    for (auto& c : candidates) {
        const bool clear = std::all_of(kept.begin(), kept.end(), [&](const InstanceCandidate& k) {
            return instance_iou(c.point_ids, k.point_ids) <= params.nms_iou;
        });
        if (clear) kept.push_back(std::move(c));
    }
    result.after_nms = kept.size();

    std::erase_if(kept, [&](const InstanceCandidate& c) { return c.score < params.score_threshold; });
    result.after_score = kept.size();
    result.kept = std::move(kept);
    return result;
}

std::vector<OwnedInstance> resolve_ownership(std::span<const InstanceCandidate> kept)
{
    std::unordered_map<PointId, std::size_t> owner;
    for (std::size_t k = 0; k < kept.size(); ++k) {
        for (PointId p : kept[k].point_ids) owner.try_emplace(p, k);
    }
    std::vector<OwnedInstance> out;
    for (std::size_t k = 0; k < kept.size(); ++k) {
        OwnedInstance inst{{}, kept[k].class_id, kept[k].score};
        for (PointId p : kept[k].point_ids) {
            if (owner[p] == k) inst.points.push_back(p);
        }
        if (!inst.points.empty()) out.push_back(std::move(inst));
    }
    return out;
}

} // namespace panoptic
