#include "snack/worker.hpp"

#include <algorithm>
#include <numeric>

#include "snack/error.hpp"

namespace snack {

void validate_selection(std::span<const std::size_t> selected, std::size_t n_candidates)
{
    std::vector<bool> seen(n_candidates, false);
    for (auto pos : selected) {
        if (pos >= n_candidates) throw Error("selected position " + std::to_string(pos) + " out of range");
        if (seen[pos]) throw Error("selected position " + std::to_string(pos) + " repeated");
        seen[pos] = true;
    }
}

Response synthetic_select(const Grid& grid, std::span<const int> labels, const Matrix& y, std::size_t k, Rng& rng)
{
    const std::size_t n = grid.candidates.size();
    if (k > n) throw Error("cannot select " + std::to_string(k) + " of " + std::to_string(n) + " candidates");
    if (grid.anchor >= labels.size()) throw Error("labels do not cover the anchor");
    for (auto c : grid.candidates)
        if (c >= labels.size()) throw Error("labels do not cover every candidate");

    const int anchor_label = labels[grid.anchor];
    std::vector<std::size_t> same;
    std::vector<std::size_t> rest;
    for (std::size_t pos = 0; pos < n; ++pos) {
        const bool is_sentinel = grid.sentinel_slot && *grid.sentinel_slot == pos;
        (is_sentinel || labels[grid.candidates[pos]] == anchor_label ? same : rest).push_back(pos);
    }

    std::vector<std::size_t> selected;
    if (same.size() > k) {
        for (std::size_t pos = 0; pos < k; ++pos) {
            std::uniform_int_distribution<std::size_t> dist(pos, same.size() - 1);
            std::swap(same[pos], same[dist(rng)]);
        }
        selected.assign(same.begin(), same.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
        selected = same;
        std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
            return squared_distance(y.row(grid.anchor), y.row(grid.candidates[a])) <
                   squared_distance(y.row(grid.anchor), y.row(grid.candidates[b]));
        });
        for (std::size_t pos = 0; selected.size() < k; ++pos) selected.push_back(rest[pos]);
    }
    std::sort(selected.begin(), selected.end());
    Response r;
    r.grid = grid;
    r.selected = std::move(selected);
    return r;
}

Response random_select(const Grid& grid, std::size_t k, Rng& rng)
{
    const std::size_t n = grid.candidates.size();
    if (k > n) throw Error("cannot select " + std::to_string(k) + " of " + std::to_string(n) + " candidates");
    std::vector<std::size_t> positions(n);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    for (std::size_t pos = 0; pos < k; ++pos) {
        std::uniform_int_distribution<std::size_t> dist(pos, n - 1);
        std::swap(positions[pos], positions[dist(rng)]);
    }
    positions.resize(k);
    std::sort(positions.begin(), positions.end());
    Response r;
    r.grid = grid;
    r.selected = std::move(positions);
    return r;
}

TripletSet selections_to_triplets(const Response& response, TripletSource source)
{
    const auto& grid = response.grid;
    if (grid.kind != GridKind::Normal)
        throw Error("only normal grids yield training triplets, got a " + std::string(to_string(grid.kind)) + " grid");
    validate_selection(response.selected, grid.candidates.size());
    std::vector<bool> chosen(grid.candidates.size(), false);
    for (auto pos : response.selected) chosen[pos] = true;
    TripletSet out;
    out.reserve(response.selected.size() * (grid.candidates.size() - response.selected.size()));
    for (auto pos : response.selected)
        for (std::size_t other = 0; other < grid.candidates.size(); ++other)
            if (!chosen[other]) out.push_back({grid.anchor, grid.candidates[pos], grid.candidates[other], source});
    return out;
}

} // namespace snack
