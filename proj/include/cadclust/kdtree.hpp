#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cadclust/geometry.hpp"

namespace cadclust {

/// Static 3-d tree for nearest-neighbor queries over a fixed point set.
/// Built once, then read-only; queries are safe from many threads.
class KdTree3 {
public:
    explicit KdTree3(std::span<const Vec3> points, std::size_t leaf_size = 8);

    /// Squared Euclidean distance from `q` to the closest stored point.
    double nearest_squared(const Vec3& q) const;

    /// Index (into the constructor's span) of the closest point; ties go to the lowest index.
    std::size_t nearest_index(const Vec3& q) const;

    std::size_t size() const noexcept { return points_.size(); }

private:
    struct Node {
        // Leaves: [begin, end) into order_. Inner: split axis/value and children.
        std::uint32_t begin = 0;
        std::uint32_t end = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        double split = 0.0;
        std::uint8_t axis = 0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end, std::size_t leaf_size);
    void search(std::int32_t node, const Vec3& q, double& best, std::size_t& best_index) const;

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

inline double squared_distance(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

}  // namespace cadclust
