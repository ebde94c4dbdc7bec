#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "snack/campaign.hpp"
#include "snack/error.hpp"
#include "snack/synthetic.hpp"

using namespace snack;

namespace {

SyntheticCorpus small_corpus()
{
    SyntheticCorpusOptions o;
    o.dim = 4;
    o.examples = {30, 20, 10, 25};
    o.classes = {3, 2, 1, 1};
    o.seed = 1;
    return make_synthetic_corpus(o);
}

const char* kPretest = R"([
  {"probe": "p1", "options": ["a", "b"], "correct": 0},
  {"probe": "p2", "options": ["a", "b"], "correct": 1},
  {"probe": "p3", "options": ["a", "b"], "correct": 0},
  {"probe": "p4", "options": ["a", "b"], "correct": 1},
  {"probe": "p5", "options": ["a", "b"], "correct": 0}
])";

Response answer(const Grid& g, std::vector<std::size_t> selected)
{
    Response r;
    r.grid = g;
    r.selected = std::move(selected);
    return r;
}

// Positions of the two same-class plants in a catch grid.
std::vector<std::size_t> plant_positions(const Grid& g, const std::vector<int>& labels)
{
    std::vector<std::size_t> out;
    for (std::size_t pos = 0; pos < g.candidates.size(); ++pos)
        if (labels[g.candidates[pos]] == labels[g.anchor]) out.push_back(pos);
    return out;
}

std::vector<std::size_t> catch_anchors(const Corpus& corpus)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (corpus.taxonomy().supercategory_of(corpus[i].class_id) != Supercategory::Irrelevant) out.push_back(i);
    return out;
}

} // namespace

TEST_CASE("catch trials plant two same-class and three irrelevant candidates")
{
    const auto sc = small_corpus();
    const auto labels = sc.corpus.labels();
    const auto& tax = sc.corpus.taxonomy();
    Rng rng(1);
    std::size_t built = 0;
    for (std::size_t anchor = 0; anchor < labels.size(); ++anchor) {
        if (tax.supercategory_of(labels[anchor]) == Supercategory::Irrelevant) {
            // the only irrelevant class is the anchor's own
            CHECK_THROWS_AS(make_catch_trial(anchor, labels, tax, rng), Error);
            continue;
        }
        const Grid g = make_catch_trial(anchor, labels, tax, rng);
        ++built;
        CHECK(g.kind == GridKind::Catch);
        CHECK_NOTHROW(validate_grid(g, labels.size()));
        CHECK(plant_positions(g, labels).size() == 2);
        std::size_t irrelevant = 0;
        for (auto c : g.candidates)
            if (tax.supercategory_of(labels[c]) == Supercategory::Irrelevant) ++irrelevant;
        CHECK(irrelevant == 3);
    }
    CHECK(built == 60);
}

TEST_CASE("catch trials need two class-mates")
{
    std::istringstream tin("1\tP\ta\n2\tN\tb\n");
    const Taxonomy tax = parse_taxonomy(tin);
    const std::vector<int> labels{1, 1, 2, 2, 2, 2};
    Rng rng(2);
    CHECK_THROWS_WITH_AS(make_catch_trial(0, labels, tax, rng), doctest::Contains("fewer than 2"), Error);
    const std::vector<int> enough{1, 1, 1, 2, 2};
    CHECK_THROWS_WITH_AS(make_catch_trial(0, enough, tax, rng), doctest::Contains("not enough irrelevant"), Error);
}

TEST_CASE("grading a catch trial counts selected plants")
{
    const auto sc = small_corpus();
    const auto labels = sc.corpus.labels();
    Rng rng(3);
    const Grid g = make_catch_trial(catch_anchors(sc.corpus).front(), labels, sc.corpus.taxonomy(), rng);
    const auto plants = plant_positions(g, labels);
    std::vector<std::size_t> others;
    for (std::size_t pos = 0; pos < 5; ++pos)
        if (pos != plants[0] && pos != plants[1]) others.push_back(pos);
    auto sorted = [](std::size_t a, std::size_t b) { return std::vector<std::size_t>{std::min(a, b), std::max(a, b)}; };
    CHECK(grade_catch(answer(g, sorted(plants[0], plants[1])), labels) == CatchGrade::Both);
    CHECK(grade_catch(answer(g, sorted(plants[0], others[0])), labels) == CatchGrade::One);
    CHECK(grade_catch(answer(g, sorted(others[1], others[2])), labels) == CatchGrade::None);
    Grid normal = g;
    normal.kind = GridKind::Normal;
    CHECK_THROWS_AS(grade_catch(answer(normal, {0, 1}), labels), Error);
    for (auto grade : {CatchGrade::Both, CatchGrade::One, CatchGrade::None})
        CHECK(catch_grade_from_string(to_string(grade)) == grade);
}

TEST_CASE("a random annotator grades both, one and none at 1/10, 6/10 and 3/10")
{
    const auto sc = small_corpus();
    const auto labels = sc.corpus.labels();
    const auto anchors = catch_anchors(sc.corpus);
    Rng rng(4);
    double counts[3] = {0, 0, 0};
    const int trials = 100000;
    for (int t = 0; t < trials; ++t) {
        const Grid g = make_catch_trial(anchors[static_cast<std::size_t>(t) % anchors.size()], labels, sc.corpus.taxonomy(), rng);
        const auto grade = grade_catch(random_select(g, 2, rng), labels);
        counts[static_cast<int>(grade)] += 1.0;
    }
    // C(2,2)/C(5,2), C(2,1)C(3,1)/C(5,2), C(3,2)/C(5,2)
    const double expected[3] = {0.1, 0.6, 0.3};
    for (int c = 0; c < 3; ++c) {
        const double se = std::sqrt(expected[c] * (1.0 - expected[c]) / trials);
        CHECK(std::abs(counts[c] / trials - expected[c]) <= 3.0 * se);
    }
}

TEST_CASE("HITs hold twelve grids with exactly one catch trial")
{
    const auto sc = small_corpus();
    const NeighborIndex index(sc.embeddings.matrix);
    HitOptions options;
    options.sentinel_rate = 0.3;
    Rng rng(5);
    std::set<std::size_t> positions;
    for (int h = 0; h < 200; ++h) {
        const Hit hit = assemble_hit(sc.corpus, index, options, rng, "hit-" + std::to_string(h));
        CHECK_NOTHROW(validate_hit(hit));
        positions.insert(hit.catch_position);
        for (const auto& g : hit.grids) {
            CHECK_NOTHROW(validate_grid(g, sc.corpus.size()));
            if (g.kind == GridKind::Sentinel) {
                REQUIRE(g.sentinel_slot.has_value());
                REQUIRE(g.sentinel_text.has_value());
                CHECK(*g.sentinel_text == sc.corpus.taxonomy().at(sc.corpus[g.anchor].class_id).description);
            }
        }
    }
    CHECK(positions.size() == 12);
}

TEST_CASE("sentinel grids appear at the configured rate")
{
    const auto sc = small_corpus();
    const NeighborIndex index(sc.embeddings.matrix);
    HitOptions options;
    Rng rng(6);
    double sentinels = 0.0, eligible = 0.0;
    for (int h = 0; h < 3000; ++h) {
        const Hit hit = assemble_hit(sc.corpus, index, options, rng, "h");
        for (const auto& g : hit.grids) {
            if (g.kind == GridKind::Catch) continue;
            eligible += 1.0;
            if (g.kind == GridKind::Sentinel) sentinels += 1.0;
        }
    }
    const double p = kDefaultSentinelRate;
    CHECK(p == doctest::Approx(58.0 / 2880.0));
    CHECK(std::abs(sentinels / eligible - p) <= 4.0 * std::sqrt(p * (1.0 - p) / eligible));

    options.sentinel_rate = 0.0;
    for (int h = 0; h < 50; ++h)
        for (const auto& g : assemble_hit(sc.corpus, index, options, rng, "h").grids) CHECK(g.kind != GridKind::Sentinel);
    options.sentinel_rate = 1.5;
    CHECK_THROWS_AS(assemble_hit(sc.corpus, index, options, rng, "h"), Error);
}

TEST_CASE("the per-HIT gate keeps normal grids of HITs that pass the catch trial")
{
    const auto sc = small_corpus();
    const auto labels = sc.corpus.labels();
    const NeighborIndex index(sc.embeddings.matrix);
    HitOptions options;
    options.sentinel_rate = 0.2;
    Rng rng(7);

    std::vector<HitSubmission> subs;
    std::size_t expected_accepted = 0;
    std::vector<CatchGrade> planned{CatchGrade::Both, CatchGrade::One, CatchGrade::None, CatchGrade::Both};
    for (std::size_t h = 0; h < planned.size(); ++h) {
        HitSubmission sub;
        sub.hit = assemble_hit(sc.corpus, index, options, rng, "hit-" + std::to_string(h));
        for (std::size_t gi = 0; gi < kGridsPerHit; ++gi) {
            const Grid& g = sub.hit.grids[gi];
            if (g.kind == GridKind::Catch) {
                const auto plants = plant_positions(g, labels);
                std::vector<std::size_t> others;
                for (std::size_t pos = 0; pos < 5; ++pos)
                    if (pos != plants[0] && pos != plants[1]) others.push_back(pos);
                std::vector<std::size_t> sel;
                if (planned[h] == CatchGrade::Both) sel = {plants[0], plants[1]};
                if (planned[h] == CatchGrade::One) sel = {plants[0], others[0]};
                if (planned[h] == CatchGrade::None) sel = {others[0], others[1]};
                std::sort(sel.begin(), sel.end());
                sub.responses.push_back(answer(g, sel));
            } else {
                sub.responses.push_back(answer(g, {0, 1}));
                if (g.kind == GridKind::Normal && planned[h] != CatchGrade::None) ++expected_accepted;
            }
        }
        subs.push_back(std::move(sub));
    }
    HitSubmission partial;
    partial.hit = subs[0].hit;
    partial.hit.id = "partial";
    partial.responses.assign(subs[0].responses.begin(), subs[0].responses.begin() + 5);
    subs.push_back(partial);

    const FilterResult f = filter_responses(subs, labels);
    CHECK(f.accepted.size() == expected_accepted);
    for (const auto& r : f.accepted) CHECK(r.grid.kind == GridKind::Normal);
    REQUIRE(f.grades.size() == 5);
    for (std::size_t h = 0; h < planned.size(); ++h) CHECK(f.grades[h] == planned[h]);
    CHECK_FALSE(f.grades[4].has_value());
    REQUIRE(f.warnings.size() == 1);
    CHECK(f.warnings[0].find("partial") != std::string::npos);

    const auto ts = extract_triplets(f.accepted, TripletSource::Human);
    CHECK(ts.size() == 6 * expected_accepted);
}

TEST_CASE("2880 grids at two of five yield 17280 triplets")
{
    const auto sc = small_corpus();
    const NeighborIndex index(sc.embeddings.matrix);
    SamplingStrategy s;
    Rng rng(8);
    std::vector<Response> rs;
    std::uniform_int_distribution<std::size_t> anchor(0, sc.corpus.size() - 1);
    for (int g = 0; g < 2880; ++g) rs.push_back(random_select(sample_grid(s, anchor(rng), 5, index, {}, rng), 2, rng));
    CHECK(extract_triplets(rs, TripletSource::Human).size() == 17280);
}

TEST_CASE("sentinel agreement")
{
    Grid g;
    g.anchor = 0;
    g.candidates = {1, 2, 3, 4, 5};
    CHECK_FALSE(sentinel_stats(std::vector<Response>{answer(g, {0, 1})}).has_value());
    g.kind = GridKind::Sentinel;
    g.sentinel_slot = 4;
    const std::vector<Response> rs{answer(g, {0, 4}), answer(g, {1, 2}), answer(g, {3, 4}), answer(g, {0, 1})};
    CHECK(*sentinel_stats(rs) == doctest::Approx(0.5));
}

TEST_CASE("pretest parsing and grading")
{
    const auto qs = parse_pretest(kPretest);
    REQUIRE(qs.size() == 5);
    CHECK(qs[1].correct == 1);
    const std::vector<std::size_t> perfect{0, 1, 0, 1, 0};
    const std::vector<std::size_t> four{0, 1, 0, 1, 1};
    const std::vector<std::size_t> three{1, 1, 0, 1, 1};
    CHECK(grade_pretest(perfect, qs).score == 5);
    CHECK(grade_pretest(four, qs).qualified);
    CHECK_FALSE(grade_pretest(three, qs).qualified);
    CHECK(grade_pretest(three, qs).score == 3);
    CHECK_THROWS_AS(grade_pretest(std::vector<std::size_t>{0, 1}, qs), Error);

    CHECK_THROWS_AS(parse_pretest("{}"), Error);
    CHECK_THROWS_AS(parse_pretest(R"([{"probe": "p", "options": ["a"], "correct": 0}])"), Error);
    CHECK_THROWS_AS(parse_pretest(R"([{"probe": "p", "options": ["a", "b"], "correct": 2}])"), Error);
    CHECK_THROWS_AS(parse_pretest(R"([{"probe": "a", "options": ["a", "b"], "correct": 0}])"), Error);
}

TEST_CASE("malformed HITs are rejected")
{
    Hit hit;
    hit.id = "x";
    hit.grids.resize(12);
    CHECK_THROWS_AS(validate_hit(hit), Error);
    hit.grids[3].kind = GridKind::Catch;
    hit.catch_position = 3;
    CHECK_NOTHROW(validate_hit(hit));
    hit.grids[4].kind = GridKind::Catch;
    CHECK_THROWS_AS(validate_hit(hit), Error);
    hit.grids.resize(11);
    CHECK_THROWS_AS(validate_hit(hit), Error);
}
