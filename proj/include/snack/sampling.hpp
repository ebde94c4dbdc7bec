#ifndef SNACK_SAMPLING_HPP
#define SNACK_SAMPLING_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "snack/neighbors.hpp"
#include "snack/random.hpp"

namespace snack {

enum class StrategyKind { Random, TopK, Distance, DistanceRnd, Oracle };

std::string_view to_string(StrategyKind k);
StrategyKind strategy_from_string(std::string_view s);

enum class DistanceWeighting {
    Proportional,  // farther pool members are more likely
    Inverse,
};

struct SamplingStrategy {
    StrategyKind kind = StrategyKind::DistanceRnd;
    std::size_t pool_size = 20;
    DistanceWeighting weighting = DistanceWeighting::Proportional;
    // Oracle: same-class candidates per grid; the rest are different-class.
    std::size_t oracle_positives = 2;

    void validate(std::size_t n_candidates) const;
};

enum class GridKind { Normal, Catch, Sentinel };

std::string_view to_string(GridKind k);
GridKind grid_kind_from_string(std::string_view s);

inline constexpr std::size_t kDefaultGridSize = 5;

// One annotation unit: an anchor and n candidates to choose from.
struct Grid {
    std::size_t anchor = 0;
    std::vector<std::size_t> candidates;
    GridKind kind = GridKind::Normal;
    // Sentinel grids replace one candidate's text with the taxonomy
    // description of the anchor's class; the excerpt index stays in place.
    std::optional<std::size_t> sentinel_slot;
    std::optional<std::string> sentinel_text;

    friend bool operator==(const Grid&, const Grid&) = default;
};

// Throws unless anchor is not a candidate, candidates are distinct and in range.
void validate_grid(const Grid& grid, std::size_t n_points);

// Draws `count` distinct positions from `weights` without replacement,
// renormalising after every draw. Zero total weight falls back to uniform
// over the remaining positions.
std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights, std::size_t count,
                                                             Rng& rng);

// labels may be empty unless the strategy is Oracle.
Grid sample_grid(const SamplingStrategy& strategy, std::size_t anchor, std::size_t n_candidates,
                 const NeighborIndex& index, std::span<const int> labels, Rng& rng);

} // namespace snack

#endif
