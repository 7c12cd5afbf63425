#include "doctest.h"

#include "panoptic/merge.hpp"
#include "panoptic/random.hpp"
#include "support.hpp"

#include <numeric>

using namespace panoptic;
using test_support::cloud_of;

namespace {

IndexSet range(PointId lo, PointId hi)
{
    IndexSet s(hi - lo);
    std::iota(s.begin(), s.end(), lo);
    return s;
}

} // namespace

TEST_CASE("merge examples")
{
    const auto one = merge_instances({{{0, 0}, {range(0, 5), range(5, 12)}}}, 12, 0.01);
    CHECK(one == std::vector<InstanceId>{2, 2, 2, 2, 2, 1, 1, 1, 1, 1, 1, 1});

    // two blocks splitting one object 60/60 with 20 points in common: IoU 0.2 absorbs the second half
    const auto split = merge_instances({{{0, 0}, {range(0, 60)}}, {{1, 0}, {range(40, 100)}}}, 100, 0.01);
    CHECK(std::all_of(split.begin(), split.end(), [](InstanceId id) { return id == 1; }));
    // with a threshold above 0.2 the new points open a second instance
    const auto kept_apart = merge_instances({{{0, 0}, {range(0, 60)}}, {{1, 0}, {range(40, 100)}}}, 100, 0.25);
    CHECK(kept_apart[0] == 1);
    CHECK(kept_apart[40] == 1);
    CHECK(kept_apart[60] == 2);

    const auto disjoint = merge_instances({{{0, 0}, {range(0, 10)}}, {{5, 0}, {range(20, 30)}}}, 40, 0.01);
    CHECK(disjoint[0] == 1);
    CHECK(disjoint[20] == 2);
    CHECK(disjoint[15] == -1);

    // blocks are visited by center, not by list position
    const auto order = merge_instances({{{5, 0}, {range(20, 30)}}, {{0, 0}, {range(0, 10)}}}, 40, 0.01);
    CHECK(order == disjoint);

    CHECK_THROWS_AS(merge_instances({{{0, 0}, {IndexSet{}}}}, 4, 0.01), ContractError);
    CHECK_THROWS_AS(merge_instances({{{0, 0}, {IndexSet{7}}}}, 4, 0.01), ContractError);
}

TEST_CASE("merge never relabels an assigned point")
{
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 300;
        std::vector<BlockInstances> blocks;
        for (int b = 0; b < 6; ++b) {
            BlockInstances bi{{static_cast<double>(b), 0.0}, {}};
            std::vector<int> used(n, 0);
            for (int k = 0; k < 4; ++k) {
                const PointId lo = rng.index(n - 40);
                IndexSet inst;
                for (PointId p = lo; p < lo + 10 + rng.index(30); ++p) {
                    if (used[p]) continue;
                inst.push_back(p);
                used[p] = 1;
                }
                if (!inst.empty()) bi.instances.push_back(inst);
            }
            blocks.push_back(bi);
        }
        // replaying blocks one at a time must only ever add labels
        std::vector<InstanceId> previous(n, -1);
        for (std::size_t upto = 1; upto <= blocks.size(); ++upto) {
            const auto labels = merge_instances({blocks.begin(), blocks.begin() + static_cast<std::ptrdiff_t>(upto)}, n, 0.01);
            for (std::size_t p = 0; p < n; ++p) {
                if (previous[p] >= 0) CHECK(labels[p] == previous[p]);
            }
            previous = labels;
        }
    }
}

TEST_CASE("fuse_semantics")
{
    const std::vector<BlockSemantics> blocks{{{0, 1, 2}, {1, 1, 3}, {0.9, 0.8, 0.7}},
                                             {{0, 1, 2}, {1, 2, 2}, {0.6, 0.95, 0.5}},
                                             {{0}, {3}, {0.99}}};
    const auto fused = fuse_semantics(blocks, 4);
    CHECK(fused[0] == 1);   // 2 votes against 1
    CHECK(fused[1] == 2);   // 1:1, the more confident block wins
    CHECK(fused[2] == 3);   // 1:1, 0.7 beats 0.5
    CHECK(fused[3] == -1);  // uncovered

    const std::vector<BlockSemantics> even{{{0}, {2}, {0.5}}, {{0}, {1}, {0.5}}};
    CHECK(fuse_semantics(even, 1)[0] == 1);

    const std::vector<BlockSemantics> ragged{{{0, 1}, {1}, {0.5, 0.5}}};
    CHECK_THROWS_AS(fuse_semantics(ragged, 2), ContractError);
}

TEST_CASE("block_merge clears stuff and rejects uncovered points")
{
    const auto tax = SemanticTaxonomy::synthetic();
    const std::vector<BlockResult> blocks{{{0, 0}, {{0, 1, 2}, {0, 1, 1}, {1, 1, 1}}, {IndexSet{0, 1, 2}}}};
    const auto g = block_merge(blocks, 3, 0.01, tax);
    CHECK(g.instance == std::vector<InstanceId>{-1, 1, 1});
    CHECK(g.semantic == std::vector<ClassId>{0, 1, 1});
    CHECK_THROWS_AS(block_merge(blocks, 4, 0.01, tax), ContractError);
}

TEST_CASE("upsample examples")
{
    const auto tax = SemanticTaxonomy::synthetic();
    const PointCloud sub = cloud_of({{0, 0, 0}, {2, 0, 0}, {10, 0, 0}});
    const GlobalPanoptic labels{{4, 4, -1}, {1, 1, 0}};
    const PointCloud orig = cloud_of({{0, 0, 0}, {0.1, 0, 0}, {1, 0, 0}, {9, 0, 0}, {2.2, 0, 0}});
    const Labeling up = upsample_labels(orig, sub, labels, tax);
    CHECK(up.semantic == std::vector<ClassId>{1, 1, 1, 0, 1});
    CHECK(up.instance == std::vector<InstanceId>{4, 4, 4, -1, 4});
    CHECK(nearest_indices(orig, sub)[2] == 0);  // midpoint tie goes to the lower index

    // a stuff label drops the instance even if the subsampled point carried one
    const GlobalPanoptic odd{{4, 4, 7}, {1, 1, 0}};
    CHECK(upsample_labels(orig, sub, odd, tax).instance[3] == -1);

    CHECK_THROWS_AS(upsample_labels(orig, PointCloud{}, GlobalPanoptic{}, tax), ContractError);
    CHECK_THROWS_AS(upsample_labels(orig, sub, GlobalPanoptic{{1}, {1}}, tax), ContractError);
}

TEST_CASE("nearest_indices agrees with brute force")
{
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Vec3> a, b;
        for (int i = 0; i < 500; ++i) a.push_back({rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0, 2)});
        for (int i = 0; i < 80; ++i) {
            // quantised coordinates create exact ties
            b.push_back({std::round(rng.uniform(0, 5) * 4) / 4, std::round(rng.uniform(0, 5) * 4) / 4, 0.0});
        }
        b.push_back(b[3]);
        for (int i = 0; i < 50; ++i) a.push_back({std::round(rng.uniform(0, 5) * 8) / 8, std::round(rng.uniform(0, 5) * 8) / 8, 0.0});
        CHECK(nearest_indices(cloud_of(a), cloud_of(b)) == reference::nearest_indices(cloud_of(a), cloud_of(b)));
    }
}
