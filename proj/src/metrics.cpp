#include "panoptic/metrics.hpp"
#include "panoptic/pcio.hpp"

#include <algorithm>
#include <ostream>
#include <tuple>
#include <unordered_map>

namespace panoptic {

namespace {

void check_lengths(const Labeling& pred, const Labeling& gt)
{
    if (pred.size() != gt.size() || pred.instance.size() != pred.semantic.size() ||
        gt.instance.size() != gt.semantic.size()) {
        throw ContractError("prediction has " + std::to_string(pred.size()) + " points, ground truth " +
                            std::to_string(gt.size()));
    }
}

// intersection counts for every overlapping (pred, gt) pair of disjoint sets
std::map<std::pair<std::size_t, std::size_t>, std::size_t> overlaps(std::span<const IndexSet> pred,
                                                                    std::span<const IndexSet> gt)
{
    std::unordered_map<PointId, std::size_t> owner;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        for (PointId p : pred[k]) {
            if (!owner.try_emplace(p, k).second) throw ContractError("prediction instances overlap");
        }
    }
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> table;
    for (std::size_t g = 0; g < gt.size(); ++g) {
        for (PointId p : gt[g]) {
            const auto it = owner.find(p);
            if (it != owner.end()) ++table[{it->second, g}];
        }
    }
    return table;
}

double pair_iou(std::size_t common, std::size_t a, std::size_t b)
{
    return static_cast<double>(common) / static_cast<double>(a + b - common);
}

struct Matching {
    std::vector<MatchedPair> pairs;
    std::vector<std::size_t> unmatched_pred, unmatched_gt;
};

Matching greedy_match(std::span<const IndexSet> pred, std::span<const IndexSet> gt, double threshold)
{
    std::vector<MatchedPair> all;
    for (const auto& [key, common] : overlaps(pred, gt)) {
        const double iou = pair_iou(common, pred[key.first].size(), gt[key.second].size());
        if (iou > threshold) all.push_back({key.first, key.second, iou});
    }
    std::stable_sort(all.begin(), all.end(), [](const MatchedPair& a, const MatchedPair& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        return std::tie(a.gt, a.pred) < std::tie(b.gt, b.pred);
    });
    Matching m;
    std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
    for (const auto& pair : all) {
        if (pred_used[pair.pred] || gt_used[pair.gt]) continue;
        pred_used[pair.pred] = gt_used[pair.gt] = true;
        m.pairs.push_back(pair);
    }
    std::sort(m.pairs.begin(), m.pairs.end(),
              [](const MatchedPair& a, const MatchedPair& b) { return a.gt < b.gt; });
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (!pred_used[k]) m.unmatched_pred.push_back(k);
    }
    for (std::size_t g = 0; g < gt.size(); ++g) {
        if (!gt_used[g]) m.unmatched_gt.push_back(g);
    }
    return m;
}

} // namespace

SemanticScores semantic_miou(const Labeling& pred, const Labeling& gt, const SemanticTaxonomy& taxonomy)
{
    check_lengths(pred, gt);
    const std::size_t c = taxonomy.size();
    std::vector<std::size_t> inter(c, 0), pred_count(c, 0), gt_count(c, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const ClassId p = pred.semantic[i], g = gt.semantic[i];
        if (!taxonomy.contains(p) || !taxonomy.contains(g)) throw ContractError("semantic label outside the taxonomy");
        ++pred_count[static_cast<std::size_t>(p)];
        ++gt_count[static_cast<std::size_t>(g)];
        if (p == g) ++inter[static_cast<std::size_t>(p)];
    }
    SemanticScores s;
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        const std::size_t uni = pred_count[k] + gt_count[k] - inter[k];
        if (uni == 0) continue;
        const double iou = static_cast<double>(inter[k]) / static_cast<double>(uni);
        s.class_iou[static_cast<ClassId>(k)] = iou;
        sum += iou;
    }
    if (!s.class_iou.empty()) s.miou = sum / static_cast<double>(s.class_iou.size());
    return s;
}

std::optional<Coverage> coverage(std::span<const IndexSet> pred, std::span<const IndexSet> gt)
{
    if (gt.empty()) return std::nullopt;
    std::vector<double> best(gt.size(), 0.0);
    for (const auto& [key, common] : overlaps(pred, gt)) {
        const double iou = pair_iou(common, pred[key.first].size(), gt[key.second].size());
        best[key.second] = std::max(best[key.second], iou);
    }
    Coverage cov;
    std::size_t total = 0;
    for (const auto& g : gt) total += g.size();
    for (std::size_t g = 0; g < gt.size(); ++g) {
        cov.mcov += best[g];
        cov.mwcov += best[g] * static_cast<double>(gt[g].size());
    }
    cov.mcov /= static_cast<double>(gt.size());
    cov.mwcov /= static_cast<double>(total);
    return cov;
}

Detection detection_prf(std::span<const IndexSet> pred, std::span<const IndexSet> gt, double iou_threshold)
{
    const Matching m = greedy_match(pred, gt, iou_threshold);
    Detection d;
    d.true_positives = m.pairs;
    d.false_positives = m.unmatched_pred;
    d.false_negatives = m.unmatched_gt;
    const double tp = static_cast<double>(m.pairs.size());
    if (pred.empty() && gt.empty()) {
        d.mprec = d.mrec = d.f1 = 1.0;
        return d;
    }
    d.mprec = pred.empty() ? 0.0 : tp / static_cast<double>(pred.size());
    d.mrec = gt.empty() ? 0.0 : tp / static_cast<double>(gt.size());
    d.f1 = d.mprec + d.mrec > 0.0 ? 2.0 * d.mprec * d.mrec / (d.mprec + d.mrec) : 0.0;
    return d;
}

namespace {

ClassPanoptic score_class(double iou_sum, std::size_t tp, std::size_t fp, std::size_t fn)
{
    ClassPanoptic c;
    c.tp = tp;
    c.fp = fp;
    c.fn = fn;
    const double denom = static_cast<double>(tp) + 0.5 * static_cast<double>(fp) + 0.5 * static_cast<double>(fn);
    if (denom > 0.0) {
        c.pq = iou_sum / denom;
        c.rq = static_cast<double>(tp) / denom;
    }
    c.sq = tp > 0 ? iou_sum / static_cast<double>(tp) : 0.0;
    return c;
}

// thing segments of one labeling grouped by class
std::map<ClassId, std::vector<IndexSet>> thing_segments(const Labeling& l, const SemanticTaxonomy& taxonomy)
{
    std::map<std::pair<ClassId, InstanceId>, IndexSet> groups;
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (l.instance[i] < 0 || !taxonomy.is_thing(l.semantic[i])) continue;
        groups[{l.semantic[i], l.instance[i]}].push_back(i);
    }
    std::map<ClassId, std::vector<IndexSet>> out;
    for (auto& [key, points] : groups) out[key.first].push_back(std::move(points));
    return out;
}

} // namespace

PanopticScores panoptic_quality(const Labeling& pred, const Labeling& gt, const SemanticTaxonomy& taxonomy,
                                double iou_threshold)
{
    check_lengths(pred, gt);
    PanopticScores s;
    const auto pred_things = thing_segments(pred, taxonomy);
    const auto gt_things = thing_segments(gt, taxonomy);
    static const std::vector<IndexSet> kNone;

    for (const auto& info : taxonomy.classes()) {
        const ClassId c = info.id;
        if (info.kind == ClassKind::Thing) {
            const auto pit = pred_things.find(c);
            const auto git = gt_things.find(c);
            const auto& ps = pit == pred_things.end() ? kNone : pit->second;
            const auto& gs = git == gt_things.end() ? kNone : git->second;
            if (ps.empty() && gs.empty()) continue;
            const Matching m = greedy_match(ps, gs, iou_threshold);
            double iou_sum = 0.0;
            for (const auto& pair : m.pairs) iou_sum += pair.iou;
            ClassPanoptic cp = score_class(iou_sum, m.pairs.size(), m.unmatched_pred.size(), m.unmatched_gt.size());
            cp.in_gt = !gs.empty();
            s.per_class[c] = cp;
        } else {
            std::size_t inter = 0, np = 0, ng = 0;
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const bool a = pred.semantic[i] == c, b = gt.semantic[i] == c;
                np += a;
                ng += b;
                inter += a && b;
            }
            if (np == 0 && ng == 0) continue;
            ClassPanoptic cp;
            if (np > 0 && ng > 0) {
                const double iou = pair_iou(inter, np, ng);
                cp = iou > iou_threshold ? score_class(iou, 1, 0, 0) : score_class(0.0, 0, 1, 1);
            } else {
                cp = score_class(0.0, 0, np > 0 ? 1 : 0, ng > 0 ? 1 : 0);
            }
            cp.in_gt = ng > 0;
            s.per_class[c] = cp;
        }
    }
    std::size_t counted = 0;
    for (const auto& [c, cp] : s.per_class) {
        if (!cp.in_gt) continue;
        s.pq += cp.pq;
        s.sq += cp.sq;
        s.rq += cp.rq;
        ++counted;
    }
    if (counted > 0) {
        s.pq /= static_cast<double>(counted);
        s.sq /= static_cast<double>(counted);
        s.rq /= static_cast<double>(counted);
    }
    return s;
}

MetricsReport evaluate(const Labeling& pred, const Labeling& gt, const SemanticTaxonomy& taxonomy,
                       double match_iou_threshold)
{
    check_lengths(pred, gt);
    MetricsReport r;
    r.semantic = semantic_miou(pred, gt, taxonomy);
    // ordering by first point keeps every output independent of the id values
    auto sets_of = [](const Labeling& l) {
        std::vector<IndexSet> sets;
        for (auto& inst : extract_instances(l)) sets.push_back(std::move(inst.points));
        std::sort(sets.begin(), sets.end(), [](const IndexSet& a, const IndexSet& b) { return a.front() < b.front(); });
        return sets;
    };
    const std::vector<IndexSet> pred_sets = sets_of(pred), gt_sets = sets_of(gt);
    for (const auto& s : pred_sets) r.pred_anchor.push_back(s.front());
    for (const auto& s : gt_sets) r.gt_anchor.push_back(s.front());
    r.cov = coverage(pred_sets, gt_sets);
    r.detection = detection_prf(pred_sets, gt_sets, match_iou_threshold);
    r.panoptic = panoptic_quality(pred, gt, taxonomy, match_iou_threshold);
    return r;
}

namespace {

std::vector<std::pair<std::string, double>> numeric_metrics(const MetricsReport& r, const SemanticTaxonomy& taxonomy)
{
    std::vector<std::pair<std::string, double>> rows;
    rows.emplace_back("miou", r.semantic.miou);
    for (const auto& [c, iou] : r.semantic.class_iou) rows.emplace_back("iou." + taxonomy.name(c), iou);
    if (r.cov) {
        rows.emplace_back("mcov", r.cov->mcov);
        rows.emplace_back("mwcov", r.cov->mwcov);
    }
    rows.emplace_back("mprec", r.detection.mprec);
    rows.emplace_back("mrec", r.detection.mrec);
    rows.emplace_back("f1", r.detection.f1);
    rows.emplace_back("pq", r.panoptic.pq);
    rows.emplace_back("sq", r.panoptic.sq);
    rows.emplace_back("rq", r.panoptic.rq);
    for (const auto& [c, cp] : r.panoptic.per_class) {
        const std::string& name = taxonomy.name(c);
        rows.emplace_back("pq." + name, cp.pq);
        rows.emplace_back("sq." + name, cp.sq);
        rows.emplace_back("rq." + name, cp.rq);
    }
    return rows;
}

} // namespace

void write_report(std::ostream& out, const MetricsReport& r, const SemanticTaxonomy& taxonomy)
{
    for (const auto& [key, value] : numeric_metrics(r, taxonomy)) out << key << " = " << format_real(value) << '\n';
    if (!r.cov) out << "mcov = absent\nmwcov = absent\n";
    for (const auto& [c, cp] : r.panoptic.per_class) {
        out << "counts." << taxonomy.name(c) << " = tp " << cp.tp << " fp " << cp.fp << " fn " << cp.fn << '\n';
    }
    out << "tp_pairs =";
    for (const auto& m : r.detection.true_positives) {
        out << ' ' << '@' << r.pred_anchor[m.pred] << ":@" << r.gt_anchor[m.gt] << ':' << format_real(m.iou);
    }
    out << "\nfp_ids =";
    for (std::size_t k : r.detection.false_positives) out << " @" << r.pred_anchor[k];
    out << "\nfn_ids =";
    for (std::size_t k : r.detection.false_negatives) out << " @" << r.gt_anchor[k];
    out << '\n';
}

void write_table(std::ostream& out, const MetricsReport& r, const SemanticTaxonomy& taxonomy)
{
    for (const auto& [key, value] : numeric_metrics(r, taxonomy)) out << key << '\t' << format_real(value) << '\n';
}

} // namespace panoptic
