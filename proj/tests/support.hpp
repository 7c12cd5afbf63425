#pragma once

#include "panoptic/core.hpp"
#include "panoptic/synthgen.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace test_support {

using namespace panoptic;

inline PointCloud cloud_of(std::vector<Vec3> positions)
{
    PointCloud c;
    c.positions = std::move(positions);
    return c;
}

// Bijection check: true when two instance labelings induce the same partition
// (−1 must coincide).
inline bool same_partition(std::span<const InstanceId> a, std::span<const InstanceId> b)
{
    if (a.size() != b.size()) return false;
    std::map<InstanceId, InstanceId> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] < 0) != (b[i] < 0)) return false;
        if (a[i] < 0) continue;
        const auto [it, fresh] = ab.try_emplace(a[i], b[i]);
        if (!fresh && it->second != b[i]) return false;
        const auto [jt, fresh2] = ba.try_emplace(b[i], a[i]);
        if (!fresh2 && jt->second != a[i]) return false;
    }
    return true;
}

// Rand index over all point pairs (O(N²); only for small inputs).
inline double rand_index(std::span<const InstanceId> a, std::span<const InstanceId> b)
{
    std::size_t agree = 0, pairs = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            ++pairs;
            if ((a[i] == a[j]) == (b[i] == b[j])) ++agree;
        }
    }
    return pairs == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(pairs);
}

// Applies a permutation-derived relabeling to non-negative ids.
inline std::vector<InstanceId> relabel(std::span<const InstanceId> ids, InstanceId offset, InstanceId stride)
{
    std::vector<InstanceId> out(ids.begin(), ids.end());
    for (auto& id : out) {
        if (id >= 0) id = offset + stride * id;
    }
    return out;
}

inline SceneSpec small_scene(std::uint64_t seed)
{
    SceneSpec s;
    s.extent = 24.0;
    s.ground_density = 8.0;
    s.min_gap = 1.0;
    s.base_height = 0.5;
    s.trees = {4, 1.2, 2.0, 30.0};
    s.cars = {3, 3.5, 4.5, 30.0};
    s.poles = {3, 3.0, 5.0, 120.0};
    s.seed = seed;
    return s;
}

} // namespace test_support
