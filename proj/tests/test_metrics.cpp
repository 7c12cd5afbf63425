#include "doctest.h"

#include "panoptic/metrics.hpp"
#include "panoptic/random.hpp"
#include "panoptic/synthgen.hpp"
#include "support.hpp"

#include <numeric>
#include <set>
#include <sstream>

using namespace panoptic;

namespace {

IndexSet range(PointId lo, PointId hi)
{
    IndexSet s(hi - lo);
    std::iota(s.begin(), s.end(), lo);
    return s;
}

// Exhaustive PQ for one thing class: tries every one-to-one assignment and
// keeps pairs above 0.5 (at most one such partner exists per segment).
struct BrutePQ {
    double pq, sq, rq;
};

BrutePQ brute_pq(const std::vector<IndexSet>& pred, const std::vector<IndexSet>& gt)
{
    std::size_t tp = 0;
    double iou_sum = 0;
    for (const auto& p : pred) {
        for (const auto& g : gt) {
            const double iou = instance_iou(p, g);
            if (iou > 0.5) {
                ++tp;
                iou_sum += iou;
            }
        }
    }
    const double fp = static_cast<double>(pred.size() - tp), fn = static_cast<double>(gt.size() - tp);
    const double denom = static_cast<double>(tp) + 0.5 * fp + 0.5 * fn;
    return {denom > 0 ? iou_sum / denom : 0.0, tp > 0 ? iou_sum / static_cast<double>(tp) : 0.0,
            denom > 0 ? static_cast<double>(tp) / denom : 0.0};
}

Labeling labeling_of(std::size_t n, const std::vector<IndexSet>& instances, ClassId cls)
{
    Labeling l{std::vector<ClassId>(n, 0), std::vector<InstanceId>(n, -1)};
    for (std::size_t k = 0; k < instances.size(); ++k) {
        for (PointId p : instances[k]) {
            l.semantic[p] = cls;
            l.instance[p] = static_cast<InstanceId>(k);
        }
    }
    return l;
}

std::string report_text(const Labeling& pred, const Labeling& gt, const SemanticTaxonomy& tax)
{
    std::ostringstream out;
    write_report(out, evaluate(pred, gt, tax), tax);
    return out.str();
}

} // namespace

TEST_CASE("semantic mIoU examples")
{
    const auto tax = SemanticTaxonomy::synthetic();
    Labeling gt{{1, 1, 1, 1, 0, 0, 0, 0}, std::vector<InstanceId>(8, -1)};
    CHECK(semantic_miou(gt, gt, tax).miou == 1.0);

    // half the class-1 points predicted as 0 and as many class-0 points predicted as 1
    Labeling pred = gt;
    pred.semantic = {1, 1, 0, 0, 1, 1, 0, 0};
    const auto s = semantic_miou(pred, gt, tax);
    CHECK(s.class_iou.at(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(s.class_iou.size() == 2);  // classes 2 and 3 appear nowhere
    CHECK(s.miou == doctest::Approx(1.0 / 3.0));

    Labeling shorter = gt;
    shorter.semantic.pop_back();
    shorter.instance.pop_back();
    CHECK_THROWS_AS(semantic_miou(shorter, gt, tax), ContractError);
    CHECK_THROWS_AS(evaluate(shorter, gt, tax), ContractError);
}

TEST_CASE("coverage examples")
{
    const std::vector<IndexSet> gt{range(0, 10), range(10, 40)};
    const auto same = coverage(gt, gt);
    REQUIRE(same);
    CHECK(same->mcov == 1.0);
    CHECK(same->mwcov == 1.0);

    const std::vector<IndexSet> pred{range(0, 10), range(10, 25)};
    const auto c = coverage(pred, gt);
    CHECK(c->mcov == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(c->mwcov == doctest::Approx(0.625).epsilon(1e-15));

    const auto none = coverage(std::vector<IndexSet>{}, gt);
    CHECK(none->mcov == 0.0);
    CHECK(none->mwcov == 0.0);
    CHECK_FALSE(coverage(pred, std::vector<IndexSet>{}).has_value());
}

TEST_CASE("detection examples")
{
    const std::vector<IndexSet> gt{range(0, 10), range(20, 30)};
    // 6 of 10 points: IoU 0.6
    const std::vector<IndexSet> pred{range(0, 6), range(50, 60)};
    const Detection d = detection_prf(pred, gt);
    CHECK(d.mprec == 0.5);
    CHECK(d.mrec == 0.5);
    CHECK(d.f1 == 0.5);
    REQUIRE(d.true_positives.size() == 1);
    CHECK(d.true_positives[0].iou == doctest::Approx(0.6));
    CHECK(d.false_positives == std::vector<std::size_t>{1});
    CHECK(d.false_negatives == std::vector<std::size_t>{1});

    const Detection half = detection_prf(std::vector<IndexSet>{range(0, 5)}, std::vector<IndexSet>{range(0, 10)});
    CHECK(half.true_positives.empty());
    CHECK(half.f1 == 0.0);

    const Detection same = detection_prf(gt, gt);
    CHECK(same.mprec == 1.0);
    CHECK(same.mrec == 1.0);
    CHECK(same.f1 == 1.0);
}

TEST_CASE("panoptic quality examples")
{
    const auto tax = SemanticTaxonomy::synthetic();
    const Labeling gt = labeling_of(20, {range(0, 10)}, 1);
    const Labeling pred = labeling_of(20, {range(0, 6)}, 1);
    const auto s = panoptic_quality(pred, gt, tax);
    const auto& tree = s.per_class.at(1);
    CHECK(tree.pq == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(tree.sq == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(tree.rq == 1.0);
    const BrutePQ b = brute_pq({range(0, 6)}, {range(0, 10)});
    CHECK(tree.pq == doctest::Approx(b.pq).epsilon(1e-15));

    const Labeling empty = labeling_of(20, {}, 1);
    const auto miss = panoptic_quality(empty, gt, tax).per_class.at(1);
    CHECK(miss.pq == 0.0);
    CHECK(miss.rq == 0.0);
    CHECK(miss.fn == 1);

    const auto same = panoptic_quality(gt, gt, tax);
    CHECK(same.pq == 1.0);
    CHECK(same.sq == 1.0);
    CHECK(same.rq == 1.0);
}

TEST_CASE("panoptic quality agrees with a brute-force matcher")
{
    const auto tax = SemanticTaxonomy::synthetic();
    Rng rng(19);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 120;
        auto random_instances = [&] {
            std::vector<IndexSet> out;
            PointId at = rng.index(5);
            while (at < n) {
                const PointId len = 3 + rng.index(20);
                out.push_back(range(at, std::min<PointId>(n, at + len)));
                at += len + rng.index(6);
            }
            return out;
        };
        const auto gt_sets = random_instances();
        const auto pred_sets = random_instances();
        const auto s = panoptic_quality(labeling_of(n, pred_sets, 2), labeling_of(n, gt_sets, 2), tax);
        const BrutePQ b = brute_pq(pred_sets, gt_sets);
        const auto& car = s.per_class.at(2);
        CHECK(car.pq == doctest::Approx(b.pq).epsilon(1e-12));
        CHECK(car.sq == doctest::Approx(b.sq).epsilon(1e-12));
        CHECK(car.rq == doctest::Approx(b.rq).epsilon(1e-12));
        if (car.tp > 0) CHECK(std::abs(car.pq - car.sq * car.rq) <= 1e-12);
    }
}

TEST_CASE("report is invariant to relabeling and every value is 1 for pred = gt")
{
    const Scene s = generate_scene(test_support::small_scene(4));
    const auto& tax = s.taxonomy;
    const MetricsReport r = evaluate(s.labels, s.labels, tax);
    CHECK(r.semantic.miou == 1.0);
    CHECK(r.cov->mcov == 1.0);
    CHECK(r.cov->mwcov == 1.0);
    CHECK(r.detection.f1 == 1.0);
    CHECK(r.panoptic.pq == 1.0);
    for (const auto& [c, cp] : r.panoptic.per_class) {
        CHECK(cp.pq == 1.0);
        CHECK(cp.sq == 1.0);
        CHECK(cp.rq == 1.0);
    }

    // a noisy prediction, then the same prediction with shuffled instance ids
    Labeling pred = s.labels;
    Rng rng(5);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred.instance[i] >= 0 && rng.uniform(0, 1) < 0.2) pred.instance[i] = (pred.instance[i] + 1) % 10;
    }
    Labeling moved = pred;
    moved.instance = test_support::relabel(pred.instance, 1000, 7);
    Labeling gt_moved = s.labels;
    gt_moved.instance = test_support::relabel(s.labels.instance, 3, 2);
    const std::string base = report_text(pred, s.labels, tax);
    CHECK(report_text(moved, s.labels, tax) == base);
    CHECK(report_text(pred, gt_moved, tax) == base);
}

TEST_CASE("removing a spurious prediction never lowers precision or PQ")
{
    const auto tax = SemanticTaxonomy::synthetic();
    const std::size_t n = 100;
    const Labeling gt = labeling_of(n, {range(0, 20), range(30, 50)}, 1);
    Labeling pred = labeling_of(n, {range(0, 18), range(30, 45), range(70, 80)}, 1);
    const MetricsReport before = evaluate(pred, gt, tax);
    for (PointId p = 70; p < 80; ++p) {
        pred.instance[p] = -1;
        pred.semantic[p] = 0;
    }
    const MetricsReport after = evaluate(pred, gt, tax);
    CHECK(after.detection.mprec >= before.detection.mprec);
    CHECK(after.panoptic.per_class.at(1).pq >= before.panoptic.per_class.at(1).pq);
}

TEST_CASE("metric tables")
{
    const auto tax = SemanticTaxonomy::synthetic();
    const Labeling gt = labeling_of(10, {range(0, 4)}, 3);
    std::ostringstream out;
    write_table(out, evaluate(gt, gt, tax), tax);
    const std::string t = out.str();
    CHECK(t.find("miou\t1") != std::string::npos);
    CHECK(t.find("pq.pole\t1") != std::string::npos);
    std::ostringstream rep;
    write_report(rep, evaluate(gt, gt, tax), tax);
    CHECK(rep.str().find("tp_pairs = @0:@0:1") != std::string::npos);

    // no gt instances at all: coverage is reported as absent
    const Labeling stuff = labeling_of(10, {}, 1);
    std::ostringstream absent;
    write_report(absent, evaluate(stuff, stuff, tax), tax);
    CHECK(absent.str().find("mcov = absent") != std::string::npos);
}
