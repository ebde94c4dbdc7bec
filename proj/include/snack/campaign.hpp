#ifndef SNACK_CAMPAIGN_HPP
#define SNACK_CAMPAIGN_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "snack/corpus.hpp"
#include "snack/neighbors.hpp"
#include "snack/sampling.hpp"
#include "snack/worker.hpp"

namespace snack {

inline constexpr std::size_t kGridsPerHit = 12;
inline constexpr std::size_t kCatchPlants = 2;
inline constexpr std::size_t kPretestQuestions = 5;
inline constexpr std::size_t kPretestPassScore = 4;
inline constexpr double kDefaultSentinelRate = 58.0 / 2880.0;

// A unit of paid work: 12 grids, exactly one of which is a catch trial.
struct Hit {
    std::string id;
    std::vector<Grid> grids;
    std::size_t catch_position = 0;

    friend bool operator==(const Hit&, const Hit&) = default;
};

void validate_hit(const Hit& hit);

enum class CatchGrade { Both, One, None };

std::string_view to_string(CatchGrade g);
CatchGrade catch_grade_from_string(std::string_view s);

struct WorkerRecord {
    std::string worker_id;
    bool qualified = false;
    std::size_t pretest_score = 0;
    std::size_t hits_completed = 0;
    std::vector<CatchGrade> catch_history;

    friend bool operator==(const WorkerRecord&, const WorkerRecord&) = default;
};

struct PretestQuestion {
    std::string probe;
    std::array<std::string, 2> options;
    std::size_t correct = 0;
};

// JSON list of {probe, options[2], correct}.
std::vector<PretestQuestion> parse_pretest(std::string_view json_text);
std::vector<PretestQuestion> load_pretest(const std::filesystem::path& path);

struct PretestResult {
    std::size_t score = 0;
    bool qualified = false;
};

PretestResult grade_pretest(std::span<const std::size_t> answers, std::span<const PretestQuestion> questions);

// Two candidates from the anchor's class plus three from the Irrelevant
// supercategory (outside the anchor's class), shuffled. Throws when the
// anchor cannot host a catch trial; callers resample the anchor.
Grid make_catch_trial(std::size_t anchor, std::span<const int> labels, const Taxonomy& taxonomy, Rng& rng,
                      std::size_t n_candidates = kDefaultGridSize);

struct HitOptions {
    SamplingStrategy strategy;
    std::size_t n_candidates = kDefaultGridSize;
    double sentinel_rate = kDefaultSentinelRate;
    std::size_t max_catch_attempts = 10000;
};

// 11 strategy-sampled grids with uniform anchors and one catch trial at a
// uniform position. Each non-catch grid independently becomes a sentinel
// grid with probability sentinel_rate.
Hit assemble_hit(const Corpus& corpus, const NeighborIndex& index, const HitOptions& options, Rng& rng,
                 std::string hit_id);

// Counts selected same-class plants on a catch grid.
CatchGrade grade_catch(const Response& response, std::span<const int> labels);

struct HitSubmission {
    Hit hit;
    std::vector<Response> responses;  // one per grid, in grid order
};

struct FilterResult {
    std::vector<Response> accepted;
    std::vector<std::optional<CatchGrade>> grades;  // per submission; empty when incomplete
    std::vector<std::string> warnings;
};

// Per-HIT gate: non-catch, non-sentinel responses of a HIT are accepted iff
// its catch grade is Both or One.
FilterResult filter_responses(std::span<const HitSubmission> submissions, std::span<const int> labels);

TripletSet extract_triplets(std::span<const Response> accepted, TripletSource source);

// Fraction of sentinel grids whose sentinel candidate was selected;
// nullopt when there are none.
std::optional<double> sentinel_stats(std::span<const Response> responses);

} // namespace snack

#endif
