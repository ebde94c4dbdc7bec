#include "snack/campaign.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "snack/error.hpp"

namespace snack {

void validate_hit(const Hit& hit)
{
    if (hit.grids.size() != kGridsPerHit)
        throw Error("HIT " + hit.id + " has " + std::to_string(hit.grids.size()) + " grids, expected 12");
    const auto catches = std::count_if(hit.grids.begin(), hit.grids.end(),
                                       [](const Grid& g) { return g.kind == GridKind::Catch; });
    if (catches != 1 || hit.catch_position >= hit.grids.size() || hit.grids[hit.catch_position].kind != GridKind::Catch)
        throw Error("HIT " + hit.id + " must contain exactly one catch grid at catch_position");
}

std::string_view to_string(CatchGrade g)
{
    switch (g) {
    case CatchGrade::Both: return "both";
    case CatchGrade::One: return "one";
    case CatchGrade::None: return "none";
    }
    return "none";
}

CatchGrade catch_grade_from_string(std::string_view s)
{
    if (s == "both") return CatchGrade::Both;
    if (s == "one") return CatchGrade::One;
    if (s == "none") return CatchGrade::None;
    throw Error("unknown catch grade '" + std::string(s) + "'");
}

std::vector<PretestQuestion> parse_pretest(std::string_view json_text)
{
    const auto doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) throw Error("pretest file must be a JSON list");
    std::vector<PretestQuestion> out;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("probe") || !item.contains("options") || !item.contains("correct"))
            throw Error("pretest entries need probe, options and correct");
        PretestQuestion q;
        q.probe = item.at("probe").get<std::string>();
        const auto& opts = item.at("options");
        if (!opts.is_array() || opts.size() != 2) throw Error("pretest options must list exactly 2 texts");
        q.options = {opts[0].get<std::string>(), opts[1].get<std::string>()};
        q.correct = item.at("correct").get<std::size_t>();
        if (q.correct > 1) throw Error("pretest correct index must be 0 or 1");
        if (q.options[0] == q.probe || q.options[1] == q.probe)
            throw Error("pretest options must differ from the probe");
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<PretestQuestion> load_pretest(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_pretest(ss.str());
}

PretestResult grade_pretest(std::span<const std::size_t> answers, std::span<const PretestQuestion> questions)
{
    if (answers.size() != kPretestQuestions || questions.size() != kPretestQuestions)
        throw Error("the pretest has exactly 5 questions; got " + std::to_string(answers.size()) + " answers");
    PretestResult out;
    for (std::size_t q = 0; q < answers.size(); ++q)
        if (answers[q] == questions[q].correct) ++out.score;
    out.qualified = out.score >= kPretestPassScore;
    return out;
}

namespace {

std::vector<std::size_t> pick_uniform(std::vector<std::size_t> pool, std::size_t count, Rng& rng)
{
    for (std::size_t pos = 0; pos < count; ++pos) {
        std::uniform_int_distribution<std::size_t> dist(pos, pool.size() - 1);
        std::swap(pool[pos], pool[dist(rng)]);
    }
    pool.resize(count);
    return pool;
}

} // namespace

Grid make_catch_trial(std::size_t anchor, std::span<const int> labels, const Taxonomy& taxonomy, Rng& rng,
                      std::size_t n_candidates)
{
    if (anchor >= labels.size()) throw Error("catch trial anchor out of range");
    if (n_candidates < kCatchPlants) throw Error("catch trials need at least 2 candidates");
    const int anchor_label = labels[anchor];
    std::vector<std::size_t> same;
    std::vector<std::size_t> irrelevant;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (j == anchor) continue;
        if (labels[j] == anchor_label)
            same.push_back(j);
        else if (taxonomy.supercategory_of(labels[j]) == Supercategory::Irrelevant)
            irrelevant.push_back(j);
    }
    const std::size_t fillers = n_candidates - kCatchPlants;
    if (same.size() < kCatchPlants)
        throw Error("anchor " + std::to_string(anchor) + " has fewer than 2 other members in its class");
    if (irrelevant.size() < fillers)
        throw Error("not enough irrelevant excerpts outside the anchor's class for a catch trial");

    auto candidates = pick_uniform(same, kCatchPlants, rng);
    for (auto j : pick_uniform(irrelevant, fillers, rng)) candidates.push_back(j);
    for (std::size_t pos = candidates.size(); pos > 1; --pos) {
        std::uniform_int_distribution<std::size_t> dist(0, pos - 1);
        std::swap(candidates[pos - 1], candidates[dist(rng)]);
    }
    Grid grid;
    grid.anchor = anchor;
    grid.candidates = std::move(candidates);
    grid.kind = GridKind::Catch;
    return grid;
}

Hit assemble_hit(const Corpus& corpus, const NeighborIndex& index, const HitOptions& options, Rng& rng,
                 std::string hit_id)
{
    const std::size_t n = corpus.size();
    if (index.size() != n) throw Error("neighbour index does not match the corpus");
    if (!(options.sentinel_rate >= 0.0 && options.sentinel_rate <= 1.0)) throw Error("sentinel_rate must be in [0, 1]");
    const auto labels = corpus.labels();

    Hit hit;
    hit.id = std::move(hit_id);
    hit.catch_position = std::uniform_int_distribution<std::size_t>(0, kGridsPerHit - 1)(rng);
    std::uniform_int_distribution<std::size_t> any_anchor(0, n - 1);
    std::bernoulli_distribution sentinel(options.sentinel_rate);
    for (std::size_t g = 0; g < kGridsPerHit; ++g) {
        if (g == hit.catch_position) {
            std::optional<Grid> grid;
            for (std::size_t attempt = 0; attempt < options.max_catch_attempts && !grid; ++attempt) {
                try {
                    grid = make_catch_trial(any_anchor(rng), labels, corpus.taxonomy(), rng, options.n_candidates);
                } catch (const Error&) {
                    // resample the anchor
                }
            }
            if (!grid) throw Error("no anchor in the corpus can host a catch trial");
            hit.grids.push_back(std::move(*grid));
            continue;
        }
        Grid grid = sample_grid(options.strategy, any_anchor(rng), options.n_candidates, index, labels, rng);
        if (sentinel(rng)) {
            grid.kind = GridKind::Sentinel;
            grid.sentinel_slot = std::uniform_int_distribution<std::size_t>(0, grid.candidates.size() - 1)(rng);
            grid.sentinel_text = corpus.taxonomy().at(labels[grid.anchor]).description;
        }
        hit.grids.push_back(std::move(grid));
    }
    return hit;
}

CatchGrade grade_catch(const Response& response, std::span<const int> labels)
{
    const auto& grid = response.grid;
    if (grid.kind != GridKind::Catch) throw Error("grade_catch called on a non-catch grid");
    validate_selection(response.selected, grid.candidates.size());
    std::size_t plants = 0;
    for (auto pos : response.selected)
        if (labels[grid.candidates[pos]] == labels[grid.anchor]) ++plants;
    if (plants >= kCatchPlants) return CatchGrade::Both;
    return plants == 1 ? CatchGrade::One : CatchGrade::None;
}

FilterResult filter_responses(std::span<const HitSubmission> submissions, std::span<const int> labels)
{
    FilterResult out;
    for (const auto& sub : submissions) {
        const auto& hit = sub.hit;
        const bool complete = hit.grids.size() == kGridsPerHit && sub.responses.size() == kGridsPerHit &&
                              hit.catch_position < kGridsPerHit;
        if (!complete) {
            out.warnings.push_back("HIT " + hit.id + " is incomplete; excluded");
            out.grades.emplace_back();
            continue;
        }
        const auto grade = grade_catch(sub.responses[hit.catch_position], labels);
        out.grades.emplace_back(grade);
        if (grade == CatchGrade::None) continue;
        for (const auto& r : sub.responses)
            if (r.grid.kind == GridKind::Normal) out.accepted.push_back(r);
    }
    return out;
}

TripletSet extract_triplets(std::span<const Response> accepted, TripletSource source)
{
    TripletSet out;
    for (const auto& r : accepted) {
        auto ts = selections_to_triplets(r, source);
        out.insert(out.end(), ts.begin(), ts.end());
    }
    return out;
}

std::optional<double> sentinel_stats(std::span<const Response> responses)
{
    std::size_t total = 0;
    std::size_t hit = 0;
    for (const auto& r : responses) {
        if (r.grid.kind != GridKind::Sentinel || !r.grid.sentinel_slot) continue;
        ++total;
        if (std::find(r.selected.begin(), r.selected.end(), *r.grid.sentinel_slot) != r.selected.end()) ++hit;
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(hit) / static_cast<double>(total);
}

} // namespace snack
