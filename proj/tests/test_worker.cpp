#include <doctest.h>

#include <map>
#include <set>

#include "oracles.hpp"
#include "snack/error.hpp"
#include "snack/worker.hpp"

using namespace snack;

namespace {

Grid make_grid(std::size_t anchor, std::vector<std::size_t> candidates)
{
    Grid g;
    g.anchor = anchor;
    g.candidates = std::move(candidates);
    return g;
}

} // namespace

TEST_CASE("synthetic worker picks same-class candidates")
{
    const std::vector<int> labels{1, 1, 2, 1, 3, 2};
    const Matrix y = oracle::random_matrix(6, 2, 1);
    Rng rng(1);
    const Grid g = make_grid(0, {2, 1, 4, 3, 5});
    CHECK(synthetic_select(g, labels, y, 2, rng).selected == std::vector<std::size_t>{1, 3});
}

TEST_CASE("synthetic worker tops up with the nearest candidates")
{
    const std::vector<int> labels{1, 1, 2, 3, 4, 5};
    Matrix y(6, 1);
    for (std::size_t i = 0; i < 6; ++i) y(i, 0) = static_cast<double>(i);
    Rng rng(2);
    // Only position 4 (point 1) shares the class; nearest other is point 2.
    const Grid g = make_grid(0, {5, 4, 2, 3, 1});
    CHECK(synthetic_select(g, labels, y, 2, rng).selected == std::vector<std::size_t>{2, 4});
    // No same-class candidate at all: the two nearest.
    const Grid h = make_grid(0, {5, 4, 2, 3});
    CHECK(synthetic_select(h, labels, y, 2, rng).selected == std::vector<std::size_t>{2, 3});
}

TEST_CASE("synthetic worker chooses uniformly among surplus same-class candidates")
{
    const std::vector<int> labels{1, 1, 1, 1, 2, 2};
    const Matrix y = oracle::random_matrix(6, 2, 3);
    const Grid g = make_grid(0, {1, 2, 3, 4, 5});
    Rng rng(3);
    std::map<std::vector<std::size_t>, double> counts;
    const int draws = 30000;
    for (int t = 0; t < draws; ++t) counts[synthetic_select(g, labels, y, 2, rng).selected] += 1.0;
    CHECK(counts.size() == 3);
    std::vector<double> observed, expected(3, draws / 3.0);
    for (const auto& [sel, c] : counts) {
        CHECK(sel.back() <= 2);
        observed.push_back(c);
    }
    CHECK(oracle::chi_square(observed, expected) < oracle::chi_square_critical(2));
}

TEST_CASE("sentinel slot counts as same class")
{
    const std::vector<int> labels{1, 2, 3, 4, 5, 6};
    const Matrix y = oracle::random_matrix(6, 2, 4);
    Grid g = make_grid(0, {1, 2, 3, 4, 5});
    g.kind = GridKind::Sentinel;
    g.sentinel_slot = 3;
    Rng rng(4);
    const auto sel = synthetic_select(g, labels, y, 2, rng).selected;
    CHECK(std::find(sel.begin(), sel.end(), 3) != sel.end());
}

TEST_CASE("random selection covers all pairs uniformly")
{
    const Grid g = make_grid(0, {1, 2, 3, 4, 5});
    Rng rng(5);
    std::map<std::vector<std::size_t>, double> counts;
    const int draws = 100000;
    for (int t = 0; t < draws; ++t) {
        const auto r = random_select(g, 2, rng);
        CHECK(r.selected.size() == 2);
        CHECK(r.selected[0] < r.selected[1]);
        counts[r.selected] += 1.0;
    }
    REQUIRE(counts.size() == 10);
    std::vector<double> observed, expected(10, draws / 10.0);
    for (const auto& [sel, c] : counts) observed.push_back(c);
    CHECK(oracle::chi_square(observed, expected) < oracle::chi_square_critical(9));
}

TEST_CASE("selecting every candidate and too many candidates")
{
    const Grid g = make_grid(0, {1, 2, 3});
    Rng rng(6);
    CHECK(random_select(g, 3, rng).selected == std::vector<std::size_t>{0, 1, 2});
    CHECK(selections_to_triplets(random_select(g, 3, rng), TripletSource::Human).empty());
    CHECK_THROWS_AS(random_select(g, 4, rng), Error);
    const std::vector<int> labels{1, 1, 1, 1};
    CHECK_THROWS_AS(synthetic_select(g, labels, Matrix(4, 2), 4, rng), Error);
    CHECK_THROWS_AS(synthetic_select(g, std::vector<int>{1, 1}, Matrix(4, 2), 1, rng), Error);
}

TEST_CASE("each selection yields k(n-k) triplets")
{
    Rng rng(7);
    for (std::size_t n = 2; n <= 6; ++n)
        for (std::size_t k = 0; k <= n; ++k) {
            std::vector<std::size_t> cands;
            for (std::size_t c = 1; c <= n; ++c) cands.push_back(c * 10);
            Response r = random_select(make_grid(0, cands), k, rng);
            const auto ts = selections_to_triplets(r, TripletSource::Synthetic);
            CHECK(ts.size() == k * (n - k));
            std::set<std::size_t> chosen;
            for (auto pos : r.selected) chosen.insert(cands[pos]);
            for (const auto& t : ts) {
                CHECK(t.anchor == 0);
                CHECK(chosen.contains(t.positive));
                CHECK_FALSE(chosen.contains(t.negative));
                CHECK(t.source == TripletSource::Synthetic);
            }
        }
}

TEST_CASE("selecting two of five candidates yields six triplets")
{
    Response r;
    r.grid = make_grid(0, {1, 2, 3, 4, 5});
    r.selected = {1, 3};
    const auto ts = selections_to_triplets(r, TripletSource::Human);
    const std::vector<Triplet> expected{{0, 2, 1, TripletSource::Human}, {0, 2, 3, TripletSource::Human},
                                        {0, 2, 5, TripletSource::Human}, {0, 4, 1, TripletSource::Human},
                                        {0, 4, 3, TripletSource::Human}, {0, 4, 5, TripletSource::Human}};
    CHECK(ts == expected);
}

TEST_CASE("non-normal grids and invalid selections are rejected")
{
    Response r;
    r.grid = make_grid(0, {1, 2, 3, 4, 5});
    r.selected = {0, 1};
    r.grid.kind = GridKind::Catch;
    CHECK_THROWS_AS(selections_to_triplets(r, TripletSource::Human), Error);
    r.grid.kind = GridKind::Sentinel;
    CHECK_THROWS_AS(selections_to_triplets(r, TripletSource::Human), Error);
    r.grid.kind = GridKind::Normal;
    r.selected = {1, 1};
    CHECK_THROWS_AS(selections_to_triplets(r, TripletSource::Human), Error);
    r.selected = {5};
    CHECK_THROWS_AS(selections_to_triplets(r, TripletSource::Human), Error);
}
