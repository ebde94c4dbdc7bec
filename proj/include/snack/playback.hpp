#ifndef SNACK_PLAYBACK_HPP
#define SNACK_PLAYBACK_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "snack/metrics.hpp"
#include "snack/optimizer.hpp"
#include "snack/sampling.hpp"

namespace snack {

enum class BudgetUnit { Triplets, Grids };

// Playback: sample grids from the current embedding, answer them with the
// synthetic worker, turn the answers into triplets and refit periodically.
struct PlaybackConfig {
    SamplingStrategy strategy;
    std::size_t n = kDefaultGridSize;
    std::size_t k = kDefaultSelections;
    BudgetUnit unit = BudgetUnit::Triplets;
    std::size_t budget = 4000;
    std::size_t refit_every = 1000;  // same unit as budget
    SnackConfig snack = [] {
        SnackConfig c;
        c.iters = 10000;
        return c;
    }();
    std::uint64_t seed = 0;
    std::size_t tgr_samples = 1000;
    std::size_t metric_repeats = 10;
    KnnOptions knn;
    bool curve_metrics = true;  // TGR/KNNGR after every refit

    void validate() const;
};

struct CurvePoint {
    std::size_t grids = 0;
    std::size_t triplets = 0;
    MeanStd tgr;
    MeanStd knngr;
};

struct PlaybackResult {
    Matrix y;
    TripletSet triplets;
    std::vector<Response> responses;
    std::vector<CurvePoint> curve;
    MetricsReport report;
    std::size_t fits = 0;
};

// Full metrics of an embedding against ground-truth labels.
MetricsReport evaluate_embedding(const Matrix& y, std::span<const int> labels, std::uint64_t seed,
                                 std::size_t tgr_samples = 1000, std::size_t repeats = 10,
                                 const KnnOptions& knn = {});

// p: joint affinities of the input embeddings at cfg.snack.perplexity.
// initial_y: triplet-free fit to start from (computed when absent); pass it
// to share one fit across strategies.
PlaybackResult run_playback(std::span<const int> labels, const Matrix& p, const PlaybackConfig& cfg,
                            const std::optional<Matrix>& initial_y = std::nullopt);

} // namespace snack

#endif
