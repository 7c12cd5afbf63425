#include "panoptic/clustering.hpp"
#include "panoptic/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace panoptic {

ClusterParams ClusterParams::from(const PipelineConfig& config)
{
    return {config.region_growing_radius, config.meanshift_bandwidth, config.meanshift_max_iter,
            config.meanshift_tol, config.setting};
}

namespace {

class DisjointSets {
  public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t x)
    {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    // the smaller root wins so roots are canonical
    void unite(std::size_t a, std::size_t b)
    {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

  private:
    std::vector<std::size_t> parent_;
};

// groups points by an arbitrary label, ordered by smallest member
template <typename Label>
std::vector<IndexSet> canonical_groups(std::span<const Label> label_of)
{
    std::unordered_map<Label, std::size_t> slot;
    std::vector<IndexSet> groups;
    for (std::size_t i = 0; i < label_of.size(); ++i) {
        auto [it, inserted] = slot.try_emplace(label_of[i], groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    return groups;
}

struct CellKey {
    std::int64_t x, y, z;
    friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellHash {
    std::size_t operator()(const CellKey& k) const noexcept
    {
        std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9e3779b97f4a7c15ULL;
        h ^= static_cast<std::uint64_t>(k.y) * 0xc2b2ae3d27d4eb4fULL + (h << 6) + (h >> 2);
        h ^= static_cast<std::uint64_t>(k.z) * 0x165667b19e3779f9ULL + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

double squared_distance(const Vec3& a, const Vec3& b)
{
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

} // namespace

std::vector<IndexSet> region_grow(std::span<const Vec3> points, std::span<const ClassId> class_of, double radius)
{
    if (!(radius > 0.0)) throw InvalidArgument("region growing radius must be > 0");
    if (points.size() != class_of.size()) throw InvalidArgument("points and classes differ in length");
    const std::size_t m = points.size();
    if (m == 0) return {};

    // identical (position, class) pairs are trivially connected; work on the distinct ones
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (class_of[a] != class_of[b]) return class_of[a] < class_of[b];
        if (points[a] != points[b]) return points[a] < points[b];
        return a < b;
    });
    std::vector<std::size_t> unique_of(m);
    std::vector<std::size_t> rep;  // first point of each distinct key
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = order[k];
        if (k == 0 || class_of[i] != class_of[rep.back()] || points[i] != points[rep.back()]) rep.push_back(i);
        unique_of[i] = rep.size() - 1;
    }
    const std::size_t u = rep.size();

    const double r2 = radius * radius * (1.0 + kClosedThresholdSlack);
    // cells a little wider than the radius so rounding in floor() cannot put
    // two linked points two cells apart
    const double cell = radius * (1.0 + 1e-6);
    auto cell_of = [cell](const Vec3& p) {
        return CellKey{static_cast<std::int64_t>(std::floor(p[0] / cell)),
                       static_cast<std::int64_t>(std::floor(p[1] / cell)),
                       static_cast<std::int64_t>(std::floor(p[2] / cell))};
    };
    std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
    grid.reserve(u);
    for (std::size_t j = 0; j < u; ++j) grid[cell_of(points[rep[j]])].push_back(j);

    // neighbour lists (higher index only) are built in parallel, unions run serially
    std::vector<std::vector<std::size_t>> neighbours(u);
#pragma omp parallel for schedule(dynamic, 256)
    for (std::size_t j = 0; j < u; ++j) {
        const Vec3& p = points[rep[j]];
        const ClassId c = class_of[rep[j]];
        const CellKey home = cell_of(p);
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    const auto it = grid.find({home.x + dx, home.y + dy, home.z + dz});
                    if (it == grid.end()) continue;
                    for (std::size_t q : it->second) {
                        if (q <= j || class_of[rep[q]] != c) continue;
                        if (squared_distance(p, points[rep[q]]) <= r2) neighbours[j].push_back(q);
                    }
                }
            }
        }
    }
    DisjointSets sets(u);
    for (std::size_t j = 0; j < u; ++j) {
        for (std::size_t q : neighbours[j]) sets.unite(j, q);
    }

    std::vector<std::size_t> root(m);
    for (std::size_t i = 0; i < m; ++i) root[i] = sets.find(unique_of[i]);
    return canonical_groups<std::size_t>(root);
}

std::vector<Vec3> shift_points(std::span<const Vec3> positions, std::span<const Vec3> offsets)
{
    if (positions.size() != offsets.size()) throw InvalidArgument("positions and offsets differ in length");
    std::vector<Vec3> out(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        for (int a = 0; a < 3; ++a) out[i][a] = positions[i][a] + offsets[i][a];
    }
    return out;
}

namespace {

void check_mean_shift(std::span<const Vec5> embeddings, const MeanShiftParams& params)
{
    if (embeddings.empty()) throw InvalidArgument("mean-shift needs at least one point");
    if (!(params.bandwidth > 0.0) || params.max_iter <= 0 || !(params.tol > 0.0)) {
        throw InvalidArgument("mean-shift parameters must be positive");
    }
}

double distance5(const Vec5& a, const Vec5& b)
{
    double s = 0.0;
    for (std::size_t d = 0; d < 5; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return std::sqrt(s);
}

// modes[k] belongs to seed k, seeds visited in ascending point order
std::vector<std::size_t> merge_modes(std::span<const Vec5> modes, double merge_radius)
{
    std::vector<std::size_t> representative;  // indices into modes
    std::vector<std::size_t> assignment(modes.size());
    for (std::size_t k = 0; k < modes.size(); ++k) {
        std::size_t found = representative.size();
        for (std::size_t r = 0; r < representative.size(); ++r) {
            if (distance5(modes[representative[r]], modes[k]) < merge_radius) {
                found = r;
                break;
            }
        }
        if (found == representative.size()) representative.push_back(k);
        assignment[k] = found;
    }
    return assignment;
}

} // namespace

std::vector<IndexSet> mean_shift(std::span<const Vec5> embeddings, const MeanShiftParams& params)
{
    check_mean_shift(embeddings, params);
    const std::size_t m = embeddings.size();

    // identical vectors share a trajectory; distinct vectors keep first-occurrence order
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (embeddings[a] != embeddings[b]) return embeddings[a] < embeddings[b];
        return a < b;
    });
    std::vector<std::size_t> group_of(m);
    std::vector<std::size_t> group_first;
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = order[k];
        if (k == 0 || embeddings[i] != embeddings[group_first.back()]) group_first.push_back(i);
        group_of[i] = group_first.size() - 1;
    }
    // renumber groups by smallest member index
    std::vector<std::size_t> by_first(group_first.size());
    std::iota(by_first.begin(), by_first.end(), std::size_t{0});
    std::sort(by_first.begin(), by_first.end(),
              [&](std::size_t a, std::size_t b) { return group_first[a] < group_first[b]; });
    std::vector<std::size_t> rank(group_first.size());
    for (std::size_t r = 0; r < by_first.size(); ++r) rank[by_first[r]] = r;
    const std::size_t u = group_first.size();
    std::vector<Vec5> unique(u);
    std::vector<double> weight(u, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t g = rank[group_of[i]];
        group_of[i] = g;
        unique[g] = embeddings[i];
        weight[g] += 1.0;
    }

    const KdTree<5> tree(unique, 32);
    // weighted sums per tree node, so windows swallowing a node cost O(1)
    std::vector<Vec5> node_sum(tree.node_count(), Vec5{});
    std::vector<double> node_weight(tree.node_count(), 0.0);
#pragma omp parallel for schedule(dynamic, 64)
    for (std::size_t n = 0; n < tree.node_count(); ++n) {
        for (std::size_t q : tree.node_points(n)) {
            for (std::size_t d = 0; d < 5; ++d) node_sum[n][d] += weight[q] * unique[q][d];
            node_weight[n] += weight[q];
        }
    }

    std::vector<Vec5> modes(u);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t g = 0; g < u; ++g) {
        Vec5 mode = unique[g];
        for (int it = 0; it < params.max_iter; ++it) {
            Vec5 next{};
            double total = 0.0;
            tree.radius_visit(
                mode, params.bandwidth,
                [&](std::size_t q) {
                    for (std::size_t d = 0; d < 5; ++d) next[d] += weight[q] * unique[q][d];
                    total += weight[q];
                },
                [&](std::size_t n) {
                    for (std::size_t d = 0; d < 5; ++d) next[d] += node_sum[n][d];
                    total += node_weight[n];
                });
            if (total == 0.0) break;
            for (double& v : next) v /= total;
            const double shift = distance5(next, mode);
            mode = next;
            if (shift < params.tol) break;
        }
        modes[g] = mode;
    }

    const auto assignment = merge_modes(modes, 0.5 * params.bandwidth);
    std::vector<std::size_t> label(m);
    for (std::size_t i = 0; i < m; ++i) label[i] = assignment[group_of[i]];
    return canonical_groups<std::size_t>(label);
}

bool uses_generator(Setting setting, Origin origin) noexcept
{
    switch (origin) {
    case Origin::Embedding: return setting == Setting::I || setting == Setting::IV || setting == Setting::V;
    case Origin::Offset: return setting != Setting::I;
    case Origin::Raw: return setting == Setting::III || setting == Setting::V;
    }
    return false;
}

std::vector<InstanceCandidate> generate_candidates(const Block& block, const FeatureSet& features,
                                                   const SemanticTaxonomy& taxonomy, const ClusterParams& params)
{
    if (features.size() != block.size()) throw ContractError("features do not cover the block");
    if (features.num_classes != taxonomy.size()) throw ContractError("feature classes do not match the taxonomy");

    std::vector<std::size_t> members;  // block-local indices of predicted-thing points
    std::vector<ClassId> predicted;
    for (std::size_t i = 0; i < block.size(); ++i) {
        const ClassId c = features.predicted_class(i);
        if (taxonomy.is_thing(c)) {
            members.push_back(i);
            predicted.push_back(c);
        }
    }
    std::vector<InstanceCandidate> out;
    if (members.empty()) return out;

    std::vector<ClassId> scratch;
    auto emit = [&](const std::vector<IndexSet>& clusters, Origin origin) {
        for (const IndexSet& cluster : clusters) {
            InstanceCandidate c;
            c.origin = origin;
            c.point_ids.reserve(cluster.size());
            scratch.clear();
            for (std::size_t k : cluster) {
                c.point_ids.push_back(block.global_ids[members[k]]);
                scratch.push_back(predicted[k]);
            }
            std::sort(c.point_ids.begin(), c.point_ids.end());
            c.class_id = majority_vote<ClassId>(scratch);
            out.push_back(std::move(c));
        }
    };

    if (uses_generator(params.setting, Origin::Embedding)) {
        std::vector<Vec5> emb;
        emb.reserve(members.size());
        for (std::size_t i : members) emb.push_back(features.embeddings[i]);
        emit(mean_shift(emb, {params.meanshift_bandwidth, params.meanshift_max_iter, params.meanshift_tol}),
             Origin::Embedding);
    }
    if (uses_generator(params.setting, Origin::Offset)) {
        std::vector<Vec3> shifted;
        shifted.reserve(members.size());
        for (std::size_t i : members) {
            const Vec3& p = block.local[i];
            const Vec3& o = features.offsets[i];
            shifted.push_back({p[0] + o[0], p[1] + o[1], p[2] + o[2]});
        }
        emit(region_grow(shifted, predicted, params.region_growing_radius), Origin::Offset);
    }
    if (uses_generator(params.setting, Origin::Raw)) {
        std::vector<Vec3> raw;
        raw.reserve(members.size());
        for (std::size_t i : members) raw.push_back(block.local[i]);
        emit(region_grow(raw, predicted, params.region_growing_radius), Origin::Raw);
    }
    return out;
}

namespace reference {

std::vector<IndexSet> region_grow(std::span<const Vec3> points, std::span<const ClassId> class_of, double radius)
{
    if (!(radius > 0.0)) throw InvalidArgument("region growing radius must be > 0");
    if (points.size() != class_of.size()) throw InvalidArgument("points and classes differ in length");
    const std::size_t m = points.size();
    const double r2 = radius * radius * (1.0 + kClosedThresholdSlack);
    std::vector<std::size_t> label(m, m);
    std::vector<std::size_t> frontier;
    for (std::size_t s = 0; s < m; ++s) {
        if (label[s] != m) continue;
        label[s] = s;
        frontier.assign(1, s);
        while (!frontier.empty()) {
            const std::size_t i = frontier.back();
            frontier.pop_back();
            for (std::size_t j = 0; j < m; ++j) {
                if (label[j] != m || class_of[j] != class_of[i]) continue;
                if (squared_distance(points[i], points[j]) <= r2) {
                    label[j] = s;
                    frontier.push_back(j);
                }
            }
        }
    }
    return canonical_groups<std::size_t>(label);
}

std::vector<IndexSet> mean_shift(std::span<const Vec5> embeddings, const MeanShiftParams& params)
{
    check_mean_shift(embeddings, params);
    const std::size_t m = embeddings.size();
    const double bw2 = params.bandwidth * params.bandwidth;
    std::vector<Vec5> modes(m);
    for (std::size_t s = 0; s < m; ++s) {
        Vec5 mode = embeddings[s];
        for (int it = 0; it < params.max_iter; ++it) {
            Vec5 next{};
            double count = 0.0;
            for (std::size_t q = 0; q < m; ++q) {
                double d2 = 0.0;
                for (std::size_t d = 0; d < 5; ++d) d2 += (embeddings[q][d] - mode[d]) * (embeddings[q][d] - mode[d]);
                if (d2 > bw2) continue;
                for (std::size_t d = 0; d < 5; ++d) next[d] += embeddings[q][d];
                count += 1.0;
            }
            if (count == 0.0) break;
            for (double& v : next) v /= count;
            const double shift = distance5(next, mode);
            mode = next;
            if (shift < params.tol) break;
        }
        modes[s] = mode;
    }
    const auto assignment = merge_modes(modes, 0.5 * params.bandwidth);
    return canonical_groups<std::size_t>(assignment);
}

} // namespace reference

} // namespace panoptic
