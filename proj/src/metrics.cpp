#include "gusl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gusl/errors.hpp"

namespace gusl {

double dsc(const BinaryMask& x, const BinaryMask& y) {
    if (!same_grid(x, y)) throw ValidationError("dsc: grid mismatch");
    size_t nx = 0, ny = 0, both = 0;
    for (size_t i = 0; i < x.data.size(); ++i) {
        bool a = x.data[i] != 0.0, b = y.data[i] != 0.0;
        nx += a;
        ny += b;
        both += a && b;
    }
    if (nx + ny == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(nx + ny);
}

BoundarySet boundary(const BinaryMask& x, const std::array<double, 3>& spacing) {
    BoundarySet out;
    for (int k = 0; k < x.d; ++k)
        for (int j = 0; j < x.w; ++j)
            for (int i = 0; i < x.h; ++i) {
                if (x.at(i, j, k) == 0.0) continue;
                bool surface = i == 0 || i == x.h - 1 || j == 0 || j == x.w - 1 ||
                               k == 0 || k == x.d - 1;
                if (!surface)
                    surface = x.at(i - 1, j, k) == 0.0 || x.at(i + 1, j, k) == 0.0 ||
                              x.at(i, j - 1, k) == 0.0 || x.at(i, j + 1, k) == 0.0 ||
                              x.at(i, j, k - 1) == 0.0 || x.at(i, j, k + 1) == 0.0;
                if (surface)
                    out.points.push_back(
                        {i * spacing[0], j * spacing[1], k * spacing[2]});
            }
    return out;
}

BoundarySet boundary(const BinaryMask& x) { return boundary(x, x.spacing); }

namespace {

// Exact nearest-neighbor queries over a point set via a median-split kd-tree.
class KdTree {
public:
    explicit KdTree(const std::vector<std::array<double, 3>>& pts) : pts_(pts) {
        order_.resize(pts.size());
        std::iota(order_.begin(), order_.end(), size_t{0});
        if (!pts.empty()) root_ = build(0, pts.size(), 0);
    }

    double nearest_sq(const std::array<double, 3>& q) const {
        double best = std::numeric_limits<double>::infinity();
        search(root_, q, 0, best);
        return best;
    }

private:
    struct Node {
        int left = -1, right = -1;
        size_t begin = 0, end = 0;  // leaf range in order_
        size_t point = 0;
        bool leaf = false;
    };

    static constexpr size_t kLeafSize = 16;

    int build(size_t begin, size_t end, int axis) {
        Node node;
        if (end - begin <= kLeafSize) {
            node.leaf = true;
            node.begin = begin;
            node.end = end;
            nodes_.push_back(node);
            return static_cast<int>(nodes_.size() - 1);
        }
        size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid,
                         order_.begin() + end, [&](size_t a, size_t b) {
                             return pts_[a][axis] < pts_[b][axis] ||
                                    (pts_[a][axis] == pts_[b][axis] && a < b);
                         });
        node.point = order_[mid];
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        int left = build(begin, mid, (axis + 1) % 3);
        int right = build(mid + 1, end, (axis + 1) % 3);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    static double dist_sq(const std::array<double, 3>& a, const std::array<double, 3>& b) {
        double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
        return dx * dx + dy * dy + dz * dz;
    }

    void search(int id, const std::array<double, 3>& q, int axis, double& best) const {
        const Node& node = nodes_[id];
        if (node.leaf) {
            for (size_t r = node.begin; r < node.end; ++r)
                best = std::min(best, dist_sq(q, pts_[order_[r]]));
            return;
        }
        best = std::min(best, dist_sq(q, pts_[node.point]));
        double delta = q[axis] - pts_[node.point][axis];
        int near = delta < 0.0 ? node.left : node.right;
        int far = delta < 0.0 ? node.right : node.left;
        search(near, q, (axis + 1) % 3, best);
        if (delta * delta < best) search(far, q, (axis + 1) % 3, best);
    }

    const std::vector<std::array<double, 3>>& pts_;
    std::vector<size_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

std::vector<double> directed_distances(const BoundarySet& from, const KdTree& to) {
    std::vector<double> out(from.points.size());
    for (size_t i = 0; i < from.points.size(); ++i)
        out[i] = std::sqrt(to.nearest_sq(from.points[i]));
    return out;
}

void pooled_distances(const BinaryMask& x, const BinaryMask& y,
                      const std::array<double, 3>& spacing, std::vector<double>& dx,
                      std::vector<double>& dy) {
    if (!same_grid(x, y)) throw ValidationError("boundary metric: grid mismatch");
    BoundarySet bx = boundary(x, spacing);
    BoundarySet by = boundary(y, spacing);
    if (bx.points.empty() || by.points.empty())
        throw ValidationError("boundary metric undefined for an empty mask");
    KdTree tx(bx.points), ty(by.points);
    dx = directed_distances(bx, ty);
    dy = directed_distances(by, tx);
}

}  // namespace

double abd(const BinaryMask& x, const BinaryMask& y, const std::array<double, 3>& spacing) {
    std::vector<double> dx, dy;
    pooled_distances(x, y, spacing, dx, dy);
    double s = 0.0;
    for (double v : dx) s += v;
    for (double v : dy) s += v;
    return s / static_cast<double>(dx.size() + dy.size());
}

double hd95(const BinaryMask& x, const BinaryMask& y, const std::array<double, 3>& spacing) {
    std::vector<double> dx, dy;
    pooled_distances(x, y, spacing, dx, dy);
    dx.insert(dx.end(), dy.begin(), dy.end());
    std::sort(dx.begin(), dx.end());
    double rank = 0.95 * static_cast<double>(dx.size() - 1);
    size_t lo = static_cast<size_t>(rank);
    double frac = rank - static_cast<double>(lo);
    if (lo + 1 >= dx.size()) return dx.back();
    return dx[lo] + frac * (dx[lo + 1] - dx[lo]);
}

}  // namespace gusl
