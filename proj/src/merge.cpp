#include "panoptic/merge.hpp"
#include "panoptic/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <unordered_map>

namespace panoptic {

std::vector<InstanceId> merge_instances(std::vector<BlockInstances> blocks, std::size_t num_points, double iou_threshold)
{
    std::stable_sort(blocks.begin(), blocks.end(),
                     [](const BlockInstances& a, const BlockInstances& b) { return a.center < b.center; });

    std::vector<InstanceId> label(num_points, kNoInstance);
    std::vector<std::size_t> extent{0};  // extent[q] = points currently labeled q
    InstanceId next = 1;

    for (auto& block : blocks) {
        for (const IndexSet& inst : block.instances) {
            if (inst.empty()) throw ContractError("block instance with no points");
            if (inst.back() >= num_points) throw ContractError("block instance refers past the cloud");
        }
        std::stable_sort(block.instances.begin(), block.instances.end(), [](const IndexSet& a, const IndexSet& b) {
            if (a.size() != b.size()) return a.size() > b.size();
            return a.front() < b.front();
        });

        for (const IndexSet& inst : block.instances) {
            std::map<InstanceId, std::size_t> overlap;
            std::size_t unassigned = 0;
            for (PointId p : inst) {
                if (label[p] == kNoInstance) ++unassigned;
                else ++overlap[label[p]];
            }
            if (unassigned == 0) continue;

            InstanceId target = next;
            if (unassigned < inst.size()) {
                // existing label with the highest IoU against the whole instance
                InstanceId best = kNoInstance;
                double best_iou = -1.0;
                for (const auto& [q, common] : overlap) {
                    const double iou = static_cast<double>(common) /
                                       static_cast<double>(inst.size() + extent[static_cast<std::size_t>(q)] - common);
                    if (iou > best_iou) {
                        best_iou = iou;
                        best = q;
                    }
                }
                if (best_iou > iou_threshold) target = best;
            }
            if (target == next) {
                ++next;
                extent.push_back(0);
            }
            for (PointId p : inst) {
                if (label[p] == kNoInstance) {
                    label[p] = target;
                    ++extent[static_cast<std::size_t>(target)];
                }
            }
        }
    }
    return label;
}

std::vector<ClassId> fuse_semantics(std::span<const BlockSemantics> blocks, std::size_t num_points)
{
    struct Vote {
        std::size_t count = 0;
        double best_confidence = -1.0;
    };
    std::vector<std::map<ClassId, Vote>> votes(num_points);
    for (const auto& block : blocks) {
        if (block.predicted.size() != block.global_ids.size() || block.confidence.size() != block.global_ids.size()) {
            throw ContractError("block semantics arrays disagree in size");
        }
        for (std::size_t i = 0; i < block.global_ids.size(); ++i) {
            const PointId p = block.global_ids[i];
            if (p >= num_points) throw ContractError("block point outside the cloud");
            Vote& v = votes[p][block.predicted[i]];
            ++v.count;
            v.best_confidence = std::max(v.best_confidence, block.confidence[i]);
        }
    }
    std::vector<ClassId> out(num_points, -1);
    for (std::size_t p = 0; p < num_points; ++p) {
        const Vote* best = nullptr;
        for (const auto& [c, v] : votes[p]) {
            if (!best || v.count > best->count || (v.count == best->count && v.best_confidence > best->best_confidence)) {
                best = &v;
                out[p] = c;
            }
        }
    }
    return out;
}

GlobalPanoptic block_merge(std::span<const BlockResult> blocks, std::size_t num_points, double iou_threshold,
                           const SemanticTaxonomy& taxonomy)
{
    std::vector<BlockInstances> instances;
    std::vector<BlockSemantics> semantics;
    instances.reserve(blocks.size());
    semantics.reserve(blocks.size());
    for (const auto& b : blocks) {
        instances.push_back({b.center, b.instances});
        semantics.push_back(b.semantics);
    }
    GlobalPanoptic out;
    out.instance = merge_instances(std::move(instances), num_points, iou_threshold);
    out.semantic = fuse_semantics(semantics, num_points);
    for (std::size_t p = 0; p < num_points; ++p) {
        if (out.semantic[p] < 0) throw ContractError("point " + std::to_string(p) + " is not covered by any block");
        if (taxonomy.is_stuff(out.semantic[p])) out.instance[p] = kNoInstance;
    }
    return out;
}

std::vector<std::size_t> nearest_indices(const PointCloud& original, const PointCloud& subsampled)
{
    if (subsampled.empty()) throw ContractError("cannot upsample from an empty cloud");
    const KdTree<3> tree(subsampled.positions);
    const std::size_t n = original.size();
    std::vector<std::size_t> nearest(n);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) nearest[i] = tree.nearest(original.positions[i]);
    return nearest;
}

Labeling upsample_labels(const PointCloud& original, const PointCloud& subsampled, const GlobalPanoptic& labels,
                         const SemanticTaxonomy& taxonomy)
{
    if (labels.instance.size() != subsampled.size() || labels.semantic.size() != subsampled.size()) {
        throw ContractError("labels do not match the subsampled cloud");
    }
    const auto nearest = nearest_indices(original, subsampled);
    Labeling out;
    out.semantic.resize(original.size());
    out.instance.resize(original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        out.semantic[i] = labels.semantic[nearest[i]];
        out.instance[i] = taxonomy.is_stuff(out.semantic[i]) ? kNoInstance : labels.instance[nearest[i]];
    }
    return out;
}

namespace reference {

std::vector<std::size_t> nearest_indices(const PointCloud& original, const PointCloud& subsampled)
{
    if (subsampled.empty()) throw ContractError("cannot upsample from an empty cloud");
    std::vector<std::size_t> nearest(original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < subsampled.size(); ++j) {
            const double d2 = KdTree<3>::squared_distance(original.positions[i], subsampled.positions[j]);
            if (d2 < best) {
                best = d2;
                nearest[i] = j;
            }
        }
    }
    return nearest;
}

} // namespace reference

} // namespace panoptic
