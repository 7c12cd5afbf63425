#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace panoptic {

/// Static k-d tree over a copy of the input points. Radius queries are
/// closed (distance <= r) and nearest-neighbour ties resolve to the lower
/// point index. Const queries are safe to run concurrently.
template <std::size_t Dim>
class KdTree {
  public:
    using Point = std::array<double, Dim>;

    KdTree() = default;

    explicit KdTree(std::span<const Point> points, std::size_t leaf_size = 16)
        : points_(points.begin(), points.end()), order_(points.size()), leaf_size_(std::max<std::size_t>(leaf_size, 1))
    {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (!points_.empty()) {
            nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
            build(0, points_.size());
        }
        packed_.reserve(points_.size());
        for (std::size_t i : order_) packed_.push_back(points_[i]);
    }

    std::size_t size() const noexcept { return points_.size(); }
    const Point& point(std::size_t i) const { return points_[i]; }

    /// Appends indices of all points within `radius` of `query` to `out`,
    /// sorted ascending.
    void radius_search(const Point& query, double radius, std::vector<std::size_t>& out) const
    {
        const std::size_t first = out.size();
        if (!nodes_.empty()) radius_recurse(0, query, radius * radius, out);
        std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
    }

    std::vector<std::size_t> radius_search(const Point& query, double radius) const
    {
        std::vector<std::size_t> out;
        radius_search(query, radius, out);
        return out;
    }

    /// Calls `on_point(i)` for every point i within `radius` of `query`, except
    /// that nodes lying entirely inside the ball are reported as a whole via
    /// `on_node(node_id)`. Visiting order is fixed by the tree.
    template <class OnPoint, class OnNode>
    void radius_visit(const Point& query, double radius, OnPoint&& on_point, OnNode&& on_node) const
    {
        if (!nodes_.empty()) visit_recurse(0, query, radius * radius, on_point, on_node);
    }

    std::size_t node_count() const noexcept { return nodes_.size(); }

    /// Point indices under a node.
    std::span<const std::size_t> node_points(std::size_t node_id) const
    {
        const Node& n = nodes_[node_id];
        return {order_.data() + n.begin, n.end - n.begin};
    }

    /// Index of the nearest point; size() must be > 0.
    std::size_t nearest(const Point& query) const
    {
        std::size_t best = std::numeric_limits<std::size_t>::max();
        double best_d2 = std::numeric_limits<double>::infinity();
        nearest_recurse(0, query, best, best_d2);
        return best;
    }

    static double squared_distance(const Point& a, const Point& b) noexcept
    {
        double d2 = 0.0;
        for (std::size_t k = 0; k < Dim; ++k) {
            const double d = a[k] - b[k];
            d2 += d * d;
        }
        return d2;
    }

  private:
    struct Node {
        std::size_t begin, end;      // range into order_
        std::size_t left = 0, right = 0;  // child node ids; 0 = leaf
        std::size_t axis = 0;
        double split = 0.0;
        Point lo{}, hi{};            // bounding box
    };

    std::size_t build(std::size_t begin, std::size_t end)
    {
        const std::size_t id = nodes_.size();
        nodes_.push_back({begin, end});
        Point lo, hi;
        lo.fill(std::numeric_limits<double>::infinity());
        hi.fill(-std::numeric_limits<double>::infinity());
        for (std::size_t i = begin; i < end; ++i) {
            const Point& p = points_[order_[i]];
            for (std::size_t k = 0; k < Dim; ++k) {
                lo[k] = std::min(lo[k], p[k]);
                hi[k] = std::max(hi[k], p[k]);
            }
        }
        nodes_[id].lo = lo;
        nodes_[id].hi = hi;

        std::size_t axis = 0;
        double spread = hi[0] - lo[0];
        for (std::size_t k = 1; k < Dim; ++k) {
            if (hi[k] - lo[k] > spread) {
                spread = hi[k] - lo[k];
                axis = k;
            }
        }
        if (end - begin <= leaf_size_ || spread <= 0.0) return id;

        const std::size_t mid = begin + (end - begin) / 2;
        auto first = order_.begin() + static_cast<std::ptrdiff_t>(begin);
        std::nth_element(first, order_.begin() + static_cast<std::ptrdiff_t>(mid),
                         order_.begin() + static_cast<std::ptrdiff_t>(end),
                         [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
        nodes_[id].axis = axis;
        nodes_[id].split = points_[order_[mid]][axis];
        const std::size_t left = build(begin, mid);
        const std::size_t right = build(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    static double box_distance2(const Node& node, const Point& q) noexcept
    {
        double d2 = 0.0;
        for (std::size_t k = 0; k < Dim; ++k) {
            double d = 0.0;
            if (q[k] < node.lo[k]) d = node.lo[k] - q[k];
            else if (q[k] > node.hi[k]) d = q[k] - node.hi[k];
            d2 += d * d;
        }
        return d2;
    }

    static double box_far_distance2(const Node& node, const Point& q) noexcept
    {
        double d2 = 0.0;
        for (std::size_t k = 0; k < Dim; ++k) {
            const double d = std::max(q[k] - node.lo[k], node.hi[k] - q[k]);
            d2 += d * d;
        }
        return d2;
    }

    void radius_recurse(std::size_t id, const Point& q, double r2, std::vector<std::size_t>& out) const
    {
        const Node& node = nodes_[id];
        if (box_distance2(node, q) > r2) return;
        if (box_far_distance2(node, q) <= r2) {
            out.insert(out.end(), order_.begin() + static_cast<std::ptrdiff_t>(node.begin),
                       order_.begin() + static_cast<std::ptrdiff_t>(node.end));
            return;
        }
        if (node.left == 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                if (squared_distance(packed_[i], q) <= r2) out.push_back(order_[i]);
            }
            return;
        }
        radius_recurse(node.left, q, r2, out);
        radius_recurse(node.right, q, r2, out);
    }

    template <class OnPoint, class OnNode>
    void visit_recurse(std::size_t id, const Point& q, double r2, OnPoint& on_point, OnNode& on_node) const
    {
        const Node& node = nodes_[id];
        if (box_distance2(node, q) > r2) return;
        if (box_far_distance2(node, q) <= r2) {
            on_node(id);
            return;
        }
        if (node.left == 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                if (squared_distance(packed_[i], q) <= r2) on_point(order_[i]);
            }
            return;
        }
        visit_recurse(node.left, q, r2, on_point, on_node);
        visit_recurse(node.right, q, r2, on_point, on_node);
    }

    void nearest_recurse(std::size_t id, const Point& q, std::size_t& best, double& best_d2) const
    {
        const Node& node = nodes_[id];
        // equal distance may still hide a lower-index tie
        if (box_distance2(node, q) > best_d2) return;
        if (node.left == 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const std::size_t p = order_[i];
                const double d2 = squared_distance(packed_[i], q);
                if (d2 < best_d2 || (d2 == best_d2 && p < best)) {
                    best_d2 = d2;
                    best = p;
                }
            }
            return;
        }
        const bool go_left = q[node.axis] < node.split;
        nearest_recurse(go_left ? node.left : node.right, q, best, best_d2);
        nearest_recurse(go_left ? node.right : node.left, q, best, best_d2);
    }

    std::vector<Point> points_;
    std::vector<std::size_t> order_;   // tree position -> point index
    std::vector<Point> packed_;        // points in tree order
    std::vector<Node> nodes_;
    std::size_t leaf_size_ = 16;
};

} // namespace panoptic
