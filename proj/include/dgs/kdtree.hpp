#pragma once

#include "dgs/gaussian.hpp"

#include <cstdint>
#include <vector>

namespace dgs {

// Static 3D kd-tree over a point set, used for k-nearest-neighbor queries.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points);

    // Squared distances to the k nearest points other than `self`, ascending.
    std::vector<double> nearest_sq(std::size_t self, int k) const;

    const std::vector<Vec3> &points() const { return points_; }

private:
    struct Node {
        std::uint32_t begin, end;  // leaf range into order_
        int axis;                  // -1 for leaves
        double split;
        std::int32_t left, right;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

} // namespace dgs
