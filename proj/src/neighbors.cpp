#include "snack/neighbors.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

#include "snack/error.hpp"

namespace snack {

namespace {

// Total order used for results: distance, then index.
bool closer(const Neighbor& a, const Neighbor& b)
{
    if (a.squared_distance != b.squared_distance) return a.squared_distance < b.squared_distance;
    return a.index < b.index;
}

struct FartherFirst {
    bool operator()(const Neighbor& a, const Neighbor& b) const { return closer(a, b); }
};

} // namespace

NeighborIndex::NeighborIndex(Matrix points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1))
{
    if (points_.rows() < 2) throw Error("NeighborIndex needs at least 2 points");
    order_.resize(points_.rows());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points_.rows() / leaf_size_ + 2);
    build(0, order_.size());
}

int NeighborIndex::build(std::size_t begin, std::size_t end)
{
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= leaf_size_) return id;

    // Split on the dimension with the widest spread.
    std::size_t best_dim = 0;
    double best_spread = -1.0;
    for (std::size_t c = 0; c < points_.cols(); ++c) {
        double lo = points_(order_[begin], c);
        double hi = lo;
        for (std::size_t k = begin + 1; k < end; ++k) {
            const double v = points_(order_[k], c);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            best_dim = c;
        }
    }
    if (best_spread <= 0.0) return id;  // all points coincide; keep as a leaf

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                         const double va = points_(a, best_dim);
                         const double vb = points_(b, best_dim);
                         return va != vb ? va < vb : a < b;
                     });
    nodes_[id].split_dim = best_dim;
    nodes_[id].split_value = points_(order_[mid], best_dim);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

std::vector<Neighbor> NeighborIndex::query_point(std::span<const double> point, std::size_t k,
                                                 std::optional<std::size_t> exclude) const
{
    if (point.size() != points_.cols()) throw Error("query point dimension mismatch");
    const std::size_t available = points_.rows() - (exclude && *exclude < points_.rows() ? 1 : 0);
    if (k > available)
        throw Error("requested " + std::to_string(k) + " neighbours but only " + std::to_string(available) +
                    " are available");
    if (k == 0) return {};

    std::priority_queue<Neighbor, std::vector<Neighbor>, FartherFirst> best;
    std::vector<int> stack{0};
    // Pending subtrees carry a lower bound on their distance.
    std::vector<double> bounds{0.0};
    while (!stack.empty()) {
        const int id = stack.back();
        const double bound = bounds.back();
        stack.pop_back();
        bounds.pop_back();
        // Equal-distance subtrees are still visited: they may hold a tie
        // with a smaller index.
        if (best.size() == k && bound > best.top().squared_distance) continue;
        const Node& node = nodes_[id];
        if (node.left < 0) {
            for (std::size_t pos = node.begin; pos < node.end; ++pos) {
                const std::size_t idx = order_[pos];
                if (exclude && idx == *exclude) continue;
                const Neighbor cand{idx, squared_distance(points_.row(idx), point)};
                if (best.size() < k) {
                    best.push(cand);
                } else if (closer(cand, best.top())) {
                    best.pop();
                    best.push(cand);
                }
            }
            continue;
        }
        const double delta = point[node.split_dim] - node.split_value;
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        // Far side first on the stack so the near side is explored first.
        stack.push_back(far);
        bounds.push_back(std::max(bound, delta * delta));
        stack.push_back(near);
        bounds.push_back(bound);
    }

    std::vector<Neighbor> out(best.size());
    for (std::size_t pos = out.size(); pos-- > 0;) {
        out[pos] = best.top();
        best.pop();
    }
    return out;
}

std::vector<Neighbor> NeighborIndex::query_with_distances(std::size_t i, std::size_t k) const
{
    if (i >= points_.rows()) throw Error("query index out of range");
    return query_point(points_.row(i), k, i);
}

std::vector<std::size_t> NeighborIndex::query(std::size_t i, std::size_t k) const
{
    const auto found = query_with_distances(i, k);
    std::vector<std::size_t> out;
    out.reserve(found.size());
    for (const auto& n : found) out.push_back(n.index);
    return out;
}

} // namespace snack
