#pragma once

#include "panoptic/core.hpp"

#include <iosfwd>
#include <map>
#include <optional>

namespace panoptic {

struct SemanticScores {
    std::map<ClassId, double> class_iou;  // classes present in pred or gt
    double miou = 0.0;
};

/// Per-class IoU of the semantic labels; classes absent from both sides are
/// left out of the mean.
SemanticScores semantic_miou(const Labeling& pred, const Labeling& gt, const SemanticTaxonomy& taxonomy);

struct Coverage {
    double mcov = 0.0;
    double mwcov = 0.0;
};

/// Mean (and size-weighted mean) best IoU of each gt instance; nullopt when
/// there are no gt instances. Instances within each list must be disjoint.
std::optional<Coverage> coverage(std::span<const IndexSet> pred, std::span<const IndexSet> gt);

struct MatchedPair {
    std::size_t pred;
    std::size_t gt;
    double iou;
};

struct Detection {
    double mprec = 0.0;
    double mrec = 0.0;
    double f1 = 0.0;
    std::vector<MatchedPair> true_positives;  // indices into the inputs
    std::vector<std::size_t> false_positives;
    std::vector<std::size_t> false_negatives;
};

/// Greedy one-to-one matching by descending IoU; a pair counts only when its
/// IoU is strictly above `iou_threshold`.
Detection detection_prf(std::span<const IndexSet> pred, std::span<const IndexSet> gt, double iou_threshold = 0.5);

struct ClassPanoptic {
    double pq = 0.0, sq = 0.0, rq = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
    bool in_gt = false;
};

struct PanopticScores {
    std::map<ClassId, ClassPanoptic> per_class;  // classes present in pred or gt
    double pq = 0.0, sq = 0.0, rq = 0.0;          // means over classes present in gt
};

/// Thing segments are (class, instance) point groups; each stuff class is one
/// segment. Matches need IoU > iou_threshold.
PanopticScores panoptic_quality(const Labeling& pred, const Labeling& gt, const SemanticTaxonomy& taxonomy,
                                double iou_threshold = 0.5);

struct MetricsReport {
    SemanticScores semantic;
    std::optional<Coverage> cov;
    Detection detection;
    PanopticScores panoptic;
    // Instances are identified by their lowest point index ("@anchor") so the
    // report does not depend on the id values of either labeling.
    std::vector<PointId> pred_anchor;
    std::vector<PointId> gt_anchor;
};

MetricsReport evaluate(const Labeling& pred, const Labeling& gt, const SemanticTaxonomy& taxonomy,
                       double match_iou_threshold = 0.5);

/// `key = value` lines, including per-class values and match lists.
void write_report(std::ostream& out, const MetricsReport& report, const SemanticTaxonomy& taxonomy);

/// `metric<TAB>value`, one numeric metric per line.
void write_table(std::ostream& out, const MetricsReport& report, const SemanticTaxonomy& taxonomy);

} // namespace panoptic
