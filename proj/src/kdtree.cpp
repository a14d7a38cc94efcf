#include "cadclust/kdtree.hpp"

#include <algorithm>
#include <limits>

#include "cadclust/error.hpp"

namespace cadclust {

KdTree3::KdTree3(std::span<const Vec3> points, std::size_t leaf_size) : points_(points.begin(), points.end()) {
    if (points_.empty()) throw Error("kd-tree over an empty point set");
    if (points_.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("kd-tree: too many points");
    order_.resize(points_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(2 * points_.size() / std::max<std::size_t>(leaf_size, 1) + 1);
    build(0, static_cast<std::uint32_t>(points_.size()), std::max<std::size_t>(leaf_size, 1));
}

std::int32_t KdTree3::build(std::uint32_t begin, std::uint32_t end, std::size_t leaf_size) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= leaf_size) return id;

    Vec3 lo = points_[order_[begin]];
    Vec3 hi = lo;
    for (auto i = begin; i < end; ++i) {
        const auto& p = points_[order_[i]];
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    }
    std::uint8_t axis = 0;
    for (std::uint8_t k = 1; k < 3; ++k)
        if (hi[k] - lo[k] > hi[axis] - lo[axis]) axis = k;
    if (hi[axis] - lo[axis] <= 0.0) return id;  // all points coincide

    const auto mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t x, std::uint32_t y) {
                         const double a = points_[x][axis];
                         const double b = points_[y][axis];
                         return a < b || (a == b && x < y);
                     });
    const double split = points_[order_[mid]][axis];

    const auto left = build(begin, mid, leaf_size);
    const auto right = build(mid, end, leaf_size);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.left = left;
    node.right = right;
    node.split = split;
    node.axis = axis;
    return id;
}

void KdTree3::search(std::int32_t id, const Vec3& q, double& best, std::size_t& best_index) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.left < 0) {
        for (auto i = node.begin; i < node.end; ++i) {
            const auto idx = order_[i];
            const double d = squared_distance(points_[idx], q);
            if (d < best || (d == best && idx < best_index)) {
                best = d;
                best_index = idx;
            }
        }
        return;
    }
    // Left holds coordinates <= split, right holds >= split.
    const double diff = q[node.axis] - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, best, best_index);
    if (diff * diff <= best) search(far, q, best, best_index);
}

double KdTree3::nearest_squared(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = std::numeric_limits<std::size_t>::max();
    search(0, q, best, best_index);
    return best;
}

std::size_t KdTree3::nearest_index(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = std::numeric_limits<std::size_t>::max();
    search(0, q, best, best_index);
    return best_index;
}

}  // namespace cadclust
