#include "snack/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "snack/error.hpp"

namespace snack {

std::string_view to_string(StrategyKind k)
{
    switch (k) {
    case StrategyKind::Random: return "random";
    case StrategyKind::TopK: return "topk";
    case StrategyKind::Distance: return "distance";
    case StrategyKind::DistanceRnd: return "distance-rnd";
    case StrategyKind::Oracle: return "oracle";
    }
    return "random";
}

StrategyKind strategy_from_string(std::string_view s)
{
    if (s == "random") return StrategyKind::Random;
    if (s == "topk" || s == "top-k") return StrategyKind::TopK;
    if (s == "distance") return StrategyKind::Distance;
    if (s == "distance-rnd" || s == "distance_rnd") return StrategyKind::DistanceRnd;
    if (s == "oracle") return StrategyKind::Oracle;
    throw Error("unknown sampling strategy '" + std::string(s) + "'");
}

std::string_view to_string(GridKind k)
{
    switch (k) {
    case GridKind::Normal: return "normal";
    case GridKind::Catch: return "catch";
    case GridKind::Sentinel: return "sentinel";
    }
    return "normal";
}

GridKind grid_kind_from_string(std::string_view s)
{
    if (s == "normal") return GridKind::Normal;
    if (s == "catch") return GridKind::Catch;
    if (s == "sentinel") return GridKind::Sentinel;
    throw Error("unknown grid kind '" + std::string(s) + "'");
}

void SamplingStrategy::validate(std::size_t n_candidates) const
{
    if (n_candidates == 0) throw Error("grids need at least one candidate");
    if ((kind == StrategyKind::Distance || kind == StrategyKind::DistanceRnd) && pool_size < n_candidates)
        throw Error("pool_size " + std::to_string(pool_size) + " is smaller than the grid size " +
                    std::to_string(n_candidates));
    if (kind == StrategyKind::Oracle && oracle_positives > n_candidates)
        throw Error("oracle_positives exceeds the grid size");
}

void validate_grid(const Grid& grid, std::size_t n_points)
{
    if (grid.anchor >= n_points) throw Error("grid anchor out of range");
    std::unordered_set<std::size_t> seen;
    for (auto c : grid.candidates) {
        if (c >= n_points) throw Error("grid candidate out of range");
        if (c == grid.anchor) throw Error("grid candidate equals the anchor");
        if (!seen.insert(c).second) throw Error("duplicate grid candidate " + std::to_string(c));
    }
    if (grid.sentinel_slot && *grid.sentinel_slot >= grid.candidates.size())
        throw Error("sentinel slot out of range");
}

std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights, std::size_t count,
                                                             Rng& rng)
{
    if (count > weights.size()) throw Error("cannot draw more items than the pool holds");
    std::vector<double> w(weights.begin(), weights.end());
    std::vector<bool> taken(w.size(), false);
    std::vector<std::size_t> out;
    out.reserve(count);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t draw = 0; draw < count; ++draw) {
        double total = 0.0;
        for (std::size_t m = 0; m < w.size(); ++m)
            if (!taken[m]) total += w[m];
        std::size_t pick = w.size();
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            for (std::size_t m = 0; m < w.size(); ++m) {
                if (taken[m] || w[m] <= 0.0) continue;
                acc += w[m];
                pick = m;
                if (target < acc) break;
            }
        } else {
            std::size_t remaining = 0;
            for (std::size_t m = 0; m < w.size(); ++m) remaining += taken[m] ? 0 : 1;
            std::size_t r = std::uniform_int_distribution<std::size_t>(0, remaining - 1)(rng);
            for (std::size_t m = 0; m < w.size(); ++m) {
                if (taken[m]) continue;
                if (r-- == 0) {
                    pick = m;
                    break;
                }
            }
        }
        taken[pick] = true;
        out.push_back(pick);
    }
    return out;
}

namespace {

// Uniform index in [0, n) other than `skip` and not in `exclude`.
std::size_t uniform_other(std::size_t n, std::size_t skip, const std::unordered_set<std::size_t>& exclude, Rng& rng)
{
    std::uniform_int_distribution<std::size_t> dist(0, n - 2);
    for (;;) {
        std::size_t r = dist(rng);
        if (r >= skip) ++r;
        if (!exclude.contains(r)) return r;
    }
}

std::vector<std::size_t> uniform_subset(std::span<const std::size_t> pool, std::size_t count, Rng& rng)
{
    std::vector<std::size_t> items(pool.begin(), pool.end());
    for (std::size_t pos = 0; pos < count; ++pos) {
        std::uniform_int_distribution<std::size_t> dist(pos, items.size() - 1);
        std::swap(items[pos], items[dist(rng)]);
    }
    items.resize(count);
    return items;
}

void require_points(std::size_t available, std::size_t needed, StrategyKind kind)
{
    if (available < needed)
        throw Error("corpus too small for the " + std::string(to_string(kind)) + " strategy: needs " +
                    std::to_string(needed) + " candidates, has " + std::to_string(available));
}

std::vector<std::size_t> distance_draws(const NeighborIndex& index, std::size_t anchor, std::size_t pool_size,
                                        std::size_t count, DistanceWeighting weighting, Rng& rng,
                                        std::vector<std::size_t>& pool_out)
{
    const auto pool = index.query_with_distances(anchor, pool_size);
    std::vector<double> weights;
    weights.reserve(pool.size());
    for (const auto& nb : pool) {
        const double d = std::sqrt(nb.squared_distance);
        weights.push_back(weighting == DistanceWeighting::Proportional ? d : 1.0 / std::max(d, 1e-12));
    }
    pool_out.clear();
    for (const auto& nb : pool) pool_out.push_back(nb.index);
    std::vector<std::size_t> out;
    for (auto pos : weighted_sample_without_replacement(weights, count, rng)) out.push_back(pool[pos].index);
    return out;
}

Grid oracle_grid(const SamplingStrategy& strategy, std::size_t anchor, std::size_t n_candidates,
                 const NeighborIndex& index, std::span<const int> labels, Rng& rng)
{
    const std::size_t n = index.size();
    if (labels.size() != n) throw Error("oracle sampling needs one label per point");
    std::vector<std::size_t> same;
    std::vector<std::size_t> different;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == anchor) continue;
        (labels[j] == labels[anchor] ? same : different).push_back(j);
    }
    const std::size_t positives = strategy.oracle_positives;
    std::vector<std::size_t> chosen;
    if (same.size() >= positives) {
        chosen = uniform_subset(same, positives, rng);
    } else {
        // Small class: all members, then the nearest other points.
        chosen = same;
        std::unordered_set<std::size_t> used(chosen.begin(), chosen.end());
        for (const auto& nb : index.query_with_distances(anchor, n - 1)) {
            if (chosen.size() == positives) break;
            if (!used.contains(nb.index)) {
                chosen.push_back(nb.index);
                used.insert(nb.index);
            }
        }
    }
    std::unordered_set<std::size_t> used(chosen.begin(), chosen.end());
    std::vector<std::size_t> negatives_pool;
    for (auto j : different)
        if (!used.contains(j)) negatives_pool.push_back(j);
    const std::size_t negatives = n_candidates - positives;
    require_points(negatives_pool.size(), negatives, StrategyKind::Oracle);
    for (auto j : uniform_subset(negatives_pool, negatives, rng)) chosen.push_back(j);
    for (std::size_t pos = chosen.size(); pos > 1; --pos) {
        std::uniform_int_distribution<std::size_t> dist(0, pos - 1);
        std::swap(chosen[pos - 1], chosen[dist(rng)]);
    }
    Grid grid;
    grid.anchor = anchor;
    grid.candidates = std::move(chosen);
    return grid;
}

} // namespace

Grid sample_grid(const SamplingStrategy& strategy, std::size_t anchor, std::size_t n_candidates,
                 const NeighborIndex& index, std::span<const int> labels, Rng& rng)
{
    strategy.validate(n_candidates);
    const std::size_t n = index.size();
    if (anchor >= n) throw Error("anchor out of range");
    require_points(n - 1, n_candidates, strategy.kind);

    Grid grid;
    grid.anchor = anchor;
    switch (strategy.kind) {
    case StrategyKind::Random: {
        std::unordered_set<std::size_t> taken;
        while (grid.candidates.size() < n_candidates) {
            const auto c = uniform_other(n, anchor, taken, rng);
            taken.insert(c);
            grid.candidates.push_back(c);
        }
        break;
    }
    case StrategyKind::TopK:
        grid.candidates = index.query(anchor, n_candidates);
        break;
    case StrategyKind::Distance: {
        require_points(n - 1, strategy.pool_size, strategy.kind);
        std::vector<std::size_t> pool;
        grid.candidates = distance_draws(index, anchor, strategy.pool_size, n_candidates, strategy.weighting, rng, pool);
        break;
    }
    case StrategyKind::DistanceRnd: {
        // The random slot must come from outside {anchor} and the pool.
        require_points(n - 1, strategy.pool_size + 1, strategy.kind);
        std::vector<std::size_t> pool;
        grid.candidates =
            distance_draws(index, anchor, strategy.pool_size, n_candidates - 1, strategy.weighting, rng, pool);
        const std::unordered_set<std::size_t> excluded(pool.begin(), pool.end());
        grid.candidates.push_back(uniform_other(n, anchor, excluded, rng));
        break;
    }
    case StrategyKind::Oracle:
        grid = oracle_grid(strategy, anchor, n_candidates, index, labels, rng);
        break;
    }
    return grid;
}

} // namespace snack
