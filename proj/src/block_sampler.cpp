#include "panoptic/block_sampler.hpp"
#include "panoptic/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace panoptic {

namespace {

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const noexcept
    {
        std::uint64_t h = mix_seed(static_cast<std::uint64_t>(k.i), 0);
        h = mix_seed(h ^ static_cast<std::uint64_t>(k.j), 1);
        h = mix_seed(h ^ static_cast<std::uint64_t>(k.k), 2);
        return static_cast<std::size_t>(h);
    }
};

// modal value of a scratch vector, ties to the smaller value
template <typename T>
T sorted_mode(std::vector<T>& values)
{
    std::sort(values.begin(), values.end());
    T best = values.front();
    std::size_t best_run = 0;
    for (std::size_t i = 0; i < values.size();) {
        std::size_t j = i;
        while (j < values.size() && values[j] == values[i]) ++j;
        if (j - i > best_run) {
            best_run = j - i;
            best = values[i];
        }
        i = j;
    }
    return best;
}

} // namespace

SubsampleResult voxel_subsample(const PointCloud& cloud, const Labeling* labels, double voxel)
{
    if (!(voxel > 0.0)) throw InvalidArgument("voxel size must be > 0");
    if (labels && labels->size() != cloud.size()) throw ContractError("labels do not match the cloud size");

    SubsampleResult out;
    std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slot;
    slot.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.positions[i];
        const VoxelKey key{static_cast<std::int64_t>(std::floor(p[0] / voxel)),
                           static_cast<std::int64_t>(std::floor(p[1] / voxel)),
                           static_cast<std::int64_t>(std::floor(p[2] / voxel))};
        auto [it, inserted] = slot.try_emplace(key, out.voxels.keys.size());
        if (inserted) {
            out.voxels.keys.push_back(key);
            out.voxels.members.emplace_back();
        }
        out.voxels.members[it->second].push_back(i);
    }

    const std::size_t m = out.voxels.keys.size();
    out.cloud.positions.resize(m);
    for (const auto& [name, column] : cloud.attributes) out.cloud.attributes[name].resize(m);
    if (labels) {
        out.labels.emplace();
        out.labels->semantic.resize(m);
        out.labels->instance.resize(m);
    }
    std::vector<ClassId> sem_scratch;
    std::vector<InstanceId> ins_scratch;
    for (std::size_t v = 0; v < m; ++v) {
        const IndexSet& members = out.voxels.members[v];
        const double inv = 1.0 / static_cast<double>(members.size());
        Vec3 sum{0.0, 0.0, 0.0};
        for (PointId i : members) {
            for (int a = 0; a < 3; ++a) sum[a] += cloud.positions[i][a];
        }
        out.cloud.positions[v] = {sum[0] * inv, sum[1] * inv, sum[2] * inv};
        for (const auto& [name, column] : cloud.attributes) {
            double s = 0.0;
            for (PointId i : members) s += column[i];
            out.cloud.attributes[name][v] = s * inv;
        }
        if (labels) {
            sem_scratch.clear();
            ins_scratch.clear();
            for (PointId i : members) {
                sem_scratch.push_back(labels->semantic[i]);
                ins_scratch.push_back(labels->instance[i]);
            }
            out.labels->semantic[v] = sorted_mode(sem_scratch);
            out.labels->instance[v] = sorted_mode(ins_scratch);
        }
    }
    return out;
}

std::vector<PointId> class_balanced_draws(const Labeling& labels, std::size_t k, std::uint64_t seed)
{
    if (k == 0) throw InvalidArgument("need at least one draw");
    if (labels.size() == 0) throw InvalidArgument("need at least one labeled point");
    std::unordered_map<ClassId, std::size_t> class_count;
    for (ClassId c : labels.semantic) ++class_count[c];

    std::vector<double> cumulative(labels.size());
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        total += 1.0 / std::sqrt(static_cast<double>(class_count[labels.semantic[i]]));
        cumulative[i] = total;
    }
    Rng rng(seed, 0);
    std::vector<PointId> draws(k);
    for (auto& d : draws) {
        const double u = rng.uniform() * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        d = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), labels.size() - 1);
    }
    return draws;
}

std::vector<Vec2> class_balanced_centers(const PointCloud& cloud, const Labeling& labels, std::size_t k,
                                         std::uint64_t seed)
{
    if (labels.size() != cloud.size()) throw ContractError("labels do not match the cloud size");
    std::vector<Vec2> centers;
    centers.reserve(k);
    for (PointId i : class_balanced_draws(labels, k, seed)) {
        centers.push_back({cloud.positions[i][0], cloud.positions[i][1]});
    }
    return centers;
}

Bounds2 xy_bounds(const PointCloud& cloud)
{
    if (cloud.empty()) throw InvalidArgument("bounds of an empty cloud");
    Bounds2 b{cloud.positions[0][0], cloud.positions[0][1], cloud.positions[0][0], cloud.positions[0][1]};
    for (const Vec3& p : cloud.positions) {
        b.min_x = std::min(b.min_x, p[0]);
        b.min_y = std::min(b.min_y, p[1]);
        b.max_x = std::max(b.max_x, p[0]);
        b.max_y = std::max(b.max_y, p[1]);
    }
    return b;
}

std::vector<Vec2> grid_centers(const Bounds2& bounds, double step)
{
    if (!(step > 0.0)) throw InvalidArgument("grid step must be > 0");
    auto lines = [step](double extent) {
        if (extent <= 0.0) return std::size_t{1};
        return static_cast<std::size_t>(std::ceil(extent / step)) + 1;
    };
    const std::size_t nx = lines(bounds.max_x - bounds.min_x);
    const std::size_t ny = lines(bounds.max_y - bounds.min_y);
    std::vector<Vec2> centers;
    centers.reserve(nx * ny);
    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
            centers.push_back({bounds.min_x + static_cast<double>(i) * step,
                               bounds.min_y + static_cast<double>(j) * step});
        }
    }
    return centers;
}

namespace {

std::vector<Vec2> xy_of(const PointCloud& cloud)
{
    std::vector<Vec2> xy(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) xy[i] = {cloud.positions[i][0], cloud.positions[i][1]};
    return xy;
}

} // namespace

CylinderIndex::CylinderIndex(const PointCloud& cloud) : cloud_(&cloud), tree_(xy_of(cloud)) {}

Block CylinderIndex::cut(const Vec2& center, double radius) const
{
    if (!(radius > 0.0)) throw InvalidArgument("cylinder radius must be > 0");
    Block block;
    block.center = center;
    block.radius = radius;
    tree_.radius_search(center, radius, block.global_ids);
    block.local.reserve(block.global_ids.size());
    for (PointId i : block.global_ids) {
        const Vec3& p = cloud_->positions[i];
        block.local.push_back({p[0] - center[0], p[1] - center[1], p[2]});
    }
    return block;
}

Block cut_cylinder(const PointCloud& cloud, const Vec2& center, double radius)
{
    return CylinderIndex(cloud).cut(center, radius);
}

AugmentDraw draw_augmentation(const AugmentParams& params, std::uint64_t seed)
{
    Rng rng(seed, 1);
    AugmentDraw draw;
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    draw.angle = params.rotate ? angle : 0.0;
    for (double& s : draw.scale) s = rng.uniform(params.scale_min, params.scale_max);
    draw.reflect_y = rng.uniform() < params.reflect_prob;
    return draw;
}

Block apply_augmentation(const Block& block, const AugmentDraw& draw, double jitter_sigma, std::uint64_t seed)
{
    Block out = block;
    Rng jitter(seed, 2);
    const double c = std::cos(draw.angle), s = std::sin(draw.angle);
    for (Vec3& p : out.local) {
        Vec3 q = p;
        if (jitter_sigma > 0.0) {
            for (double& v : q) v += jitter.normal(jitter_sigma);
        }
        if (draw.angle != 0.0) {
            const double x = c * q[0] - s * q[1];
            const double y = s * q[0] + c * q[1];
            q[0] = x;
            q[1] = y;
        }
        for (int a = 0; a < 3; ++a) q[a] *= draw.scale[a];
        if (draw.reflect_y) q[1] = -q[1];
        p = q;
    }
    return out;
}

Block augment(const Block& block, std::uint64_t seed, const AugmentParams& params)
{
    return apply_augmentation(block, draw_augmentation(params, seed), params.jitter_sigma, seed);
}

} // namespace panoptic
