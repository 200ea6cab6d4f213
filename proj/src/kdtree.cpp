#include "dgs/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace dgs {

namespace {

constexpr std::uint32_t kLeafSize = 8;

double sq_dist(const Vec3 &a, const Vec3 &b) {
    const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
    return dx * dx + dy * dy + dz * dz;
}

} // namespace

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points_.empty()) {
        build(0, static_cast<std::uint32_t>(points_.size()));
    }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({begin, end, -1, 0.0, -1, -1});
    if (end - begin <= kLeafSize) {
        return index;
    }
    Vec3 lo = points_[order_[begin]], hi = lo;
    for (std::uint32_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[index].axis = axis;
    nodes_[index].split = split;
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
}

std::vector<double> KdTree::nearest_sq(std::size_t self, int k) const {
    const Vec3 &q = points_[self];
    std::priority_queue<double> best;  // max-heap of the k smallest so far
    auto visit = [&](auto &&recurse, std::int32_t ni) -> void {
        const Node &node = nodes_[ni];
        if (node.axis < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                if (order_[i] == self) continue;
                const double d = sq_dist(q, points_[order_[i]]);
                if (static_cast<int>(best.size()) < k) {
                    best.push(d);
                } else if (d < best.top()) {
                    best.pop();
                    best.push(d);
                }
            }
            return;
        }
        // Points equal to the split value can sit on either side.
        const double diff = q[node.axis] - node.split;
        const std::int32_t near = diff < 0.0 ? node.left : node.right;
        const std::int32_t far = diff < 0.0 ? node.right : node.left;
        recurse(recurse, near);
        if (static_cast<int>(best.size()) < k || diff * diff <= best.top()) {
            recurse(recurse, far);
        }
    };
    if (!nodes_.empty()) visit(visit, 0);
    std::vector<double> out;
    out.reserve(best.size());
    while (!best.empty()) {
        out.push_back(best.top());
        best.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

} // namespace dgs
