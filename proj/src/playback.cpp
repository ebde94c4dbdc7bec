#include "snack/playback.hpp"

#include <memory>

#include "snack/error.hpp"
#include "snack/neighbors.hpp"
#include "snack/worker.hpp"

namespace snack {

namespace {

enum Stream : std::uint64_t { kSampling = 11, kTgr = 12, kKnn = 13 };

} // namespace

void PlaybackConfig::validate() const
{
    if (n < 2) throw Error("grids need at least 2 candidates");
    if (k < 1 || k >= n) throw Error("k must satisfy 1 <= k < n so every grid yields triplets");
    if (budget == 0) throw Error("playback budget must be positive");
    if (refit_every == 0) throw Error("refit_every must be positive");
    strategy.validate(n);
    snack.validate();
}

MetricsReport evaluate_embedding(const Matrix& y, std::span<const int> labels, std::uint64_t seed,
                                 std::size_t tgr_samples, std::size_t repeats, const KnnOptions& knn)
{
    MetricsReport report;
    report.tgr = triplet_generalization_ratio(y, labels, derive_seed(seed, kTgr), tgr_samples, repeats);
    KnnOptions opts = knn;
    opts.repeats = repeats;
    report.knngr = knn_generalization_ratio(y, labels, derive_seed(seed, kKnn), opts);
    report.snr = snr_distance(y, labels);
    return report;
}

PlaybackResult run_playback(std::span<const int> labels, const Matrix& p, const PlaybackConfig& cfg,
                            const std::optional<Matrix>& initial_y)
{
    cfg.validate();
    const std::size_t n_points = p.rows();
    if (labels.size() != n_points) throw Error("labels do not match the affinity matrix");

    PlaybackResult result;
    if (initial_y) {
        result.y = *initial_y;
    } else {
        result.y = snack_fit_affinities(p, {}, cfg.snack).y;
        ++result.fits;
    }
    auto index = std::make_unique<NeighborIndex>(result.y);

    auto rng = make_rng(cfg.seed, kSampling);
    std::uniform_int_distribution<std::size_t> any_anchor(0, n_points - 1);
    const TripletSource source =
        cfg.strategy.kind == StrategyKind::Oracle ? TripletSource::Oracle : TripletSource::Synthetic;

    std::size_t grids = 0;
    auto progress = [&] { return cfg.unit == BudgetUnit::Triplets ? result.triplets.size() : grids; };
    std::size_t next_refit = cfg.refit_every;
    while (progress() < cfg.budget) {
        const Grid grid = sample_grid(cfg.strategy, any_anchor(rng), cfg.n, *index, labels, rng);
        Response response = synthetic_select(grid, labels, result.y, cfg.k, rng);
        response.worker_id = "synthetic";
        const auto ts = selections_to_triplets(response, source);
        result.triplets.insert(result.triplets.end(), ts.begin(), ts.end());
        result.responses.push_back(std::move(response));
        ++grids;

        if (progress() >= next_refit || progress() >= cfg.budget) {
            result.y = snack_fit_affinities(p, result.triplets, cfg.snack).y;
            ++result.fits;
            index = std::make_unique<NeighborIndex>(result.y);
            while (next_refit <= progress()) next_refit += cfg.refit_every;
            if (cfg.curve_metrics) {
                CurvePoint point;
                point.grids = grids;
                point.triplets = result.triplets.size();
                point.tgr = triplet_generalization_ratio(result.y, labels, derive_seed(cfg.seed, kTgr),
                                                         cfg.tgr_samples, cfg.metric_repeats);
                KnnOptions opts = cfg.knn;
                opts.repeats = cfg.metric_repeats;
                point.knngr = knn_generalization_ratio(result.y, labels, derive_seed(cfg.seed, kKnn), opts);
                result.curve.push_back(point);
            }
        }
    }

    result.report = evaluate_embedding(result.y, labels, cfg.seed, cfg.tgr_samples, cfg.metric_repeats, cfg.knn);
    result.report.annotations = annotation_stats(result.responses, labels);
    return result;
}

} // namespace snack
