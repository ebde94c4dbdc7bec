#ifndef SNACK_WORKER_HPP
#define SNACK_WORKER_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "snack/matrix.hpp"
#include "snack/random.hpp"
#include "snack/sampling.hpp"
#include "snack/tste.hpp"

namespace snack {

inline constexpr std::size_t kDefaultSelections = 2;

// A worker's answer to one grid: the positions (into grid.candidates) of the
// k selected candidates, in ascending order.
struct Response {
    Grid grid;
    std::vector<std::size_t> selected;
    std::string worker_id;
    std::string hit_id;
    std::int64_t timestamp = 0;

    GridKind kind_echo() const { return grid.kind; }

    friend bool operator==(const Response&, const Response&) = default;
};

// Throws unless positions are distinct and < n.
void validate_selection(std::span<const std::size_t> selected, std::size_t n_candidates);

// Label-aware simulated annotator: picks candidates sharing the anchor's
// class (uniformly among them if more than k), topping up with the
// candidates nearest the anchor in Y. A sentinel slot counts as sharing the
// anchor's class.
Response synthetic_select(const Grid& grid, std::span<const int> labels, const Matrix& y, std::size_t k, Rng& rng);

// k distinct uniform positions.
Response random_select(const Grid& grid, std::size_t k, Rng& rng);

// One (anchor, selected, unselected) triplet per selected/unselected pair.
// Only normal grids produce training triplets; other kinds throw.
TripletSet selections_to_triplets(const Response& response, TripletSource source);

} // namespace snack

#endif
