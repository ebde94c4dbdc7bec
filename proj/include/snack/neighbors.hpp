#ifndef SNACK_NEIGHBORS_HPP
#define SNACK_NEIGHBORS_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "snack/matrix.hpp"

namespace snack {

struct Neighbor {
    std::size_t index = 0;
    double squared_distance = 0.0;
};

// Exact k-nearest-neighbour queries over the rows of an embedding, backed by
// a kd-tree. Results are ordered by ascending distance, ties by ascending
// index. Immutable after construction; safe for concurrent queries.
class NeighborIndex {
public:
    explicit NeighborIndex(Matrix points, std::size_t leaf_size = 8);

    std::size_t size() const { return points_.rows(); }
    std::size_t dim() const { return points_.cols(); }
    const Matrix& points() const { return points_; }

    // k nearest rows to row i, excluding i itself. Throws if k > size() - 1.
    std::vector<std::size_t> query(std::size_t i, std::size_t k) const;
    std::vector<Neighbor> query_with_distances(std::size_t i, std::size_t k) const;

    // k nearest rows to an arbitrary point, optionally excluding one row.
    std::vector<Neighbor> query_point(std::span<const double> point, std::size_t k,
                                      std::optional<std::size_t> exclude = std::nullopt) const;

private:
    struct Node {
        std::size_t begin = 0;  // range into order_
        std::size_t end = 0;
        std::size_t split_dim = 0;
        double split_value = 0.0;
        int left = -1;
        int right = -1;
    };

    int build(std::size_t begin, std::size_t end);

    Matrix points_;
    std::size_t leaf_size_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

} // namespace snack

#endif
