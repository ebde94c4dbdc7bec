// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
// non-zero when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "snack/campaign.hpp"
#include "snack/corpus.hpp"
#include "snack/metrics.hpp"
#include "snack/optimizer.hpp"
#include "snack/playback.hpp"
#include "snack/synthetic.hpp"
#include "snack/tsne.hpp"
#include "snack/tste.hpp"

using namespace snack;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
    Outcome outcome = Outcome::Fail;
    std::string detail;
};

Verdict verdict(bool ok, std::string detail)
{
    return {ok ? Outcome::Pass : Outcome::Fail, std::move(detail)};
}

std::string fmt(const char* format, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

constexpr int kSeeds = 10;
constexpr int kRefitIters = 10000;
constexpr double kBenchmarkNoise = 2.0;

// Gradients: 20 instances, N=12, d=2, alpha in {1, 2}; tolerance 1e-4; < 5 s.
Verdict gradient_check()
{
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (unsigned inst = 0; inst < 20; ++inst) {
        const Matrix x = oracle::random_matrix(12, 5, 100 + inst);
        const Matrix p = affinities_from_distances(pairwise_distances(x), 4.0);
        const Matrix y = oracle::random_matrix(12, 2, 200 + inst);
        const Matrix fd_kl = oracle::numeric_gradient([&](const Matrix& m) { return oracle::kl(p, m); }, y);
        worst = std::max(worst, oracle::max_relative_error(tsne_loss_grad(p, y).grad, fd_kl));

        const double alpha = inst % 2 == 0 ? 1.0 : 2.0;
        std::mt19937 gen(300 + inst);
        std::uniform_int_distribution<std::size_t> pick(0, 11);
        std::vector<Triplet> ts;
        while (ts.size() < 40) {
            Triplet t{pick(gen), pick(gen), pick(gen)};
            if (t.anchor != t.positive && t.anchor != t.negative && t.positive != t.negative) ts.push_back(t);
        }
        const Matrix fd_ste = oracle::numeric_gradient([&](const Matrix& m) { return oracle::tste_loglik(m, ts, alpha); }, y);
        worst = std::max(worst, oracle::max_relative_error(tste_loss_grad(y, ts, {alpha}).grad, fd_ste));
    }
    const double elapsed = seconds_since(start);
    return verdict(worst <= 1e-4 && elapsed < 5.0, fmt("max relative error %.3g (tol 1e-4), %.2f s (limit 5 s)", worst, elapsed));
}

// Perplexity: random 50-point instances at u=30; every row within 30(1 +- 1e-5).
Verdict perplexity_check()
{
    double worst = 0.0;
    for (unsigned inst = 0; inst < 10; ++inst) {
        const Matrix x = oracle::random_matrix(50, 10, 400 + inst, 1.0 + inst);
        const Matrix k = pairwise_distances(x);
        const BandwidthVector bw = bisect_bandwidths(k, 30.0);
        const Matrix kk = oracle::distances(x);
        for (std::size_t i = 0; i < 50; ++i) {
            const double realised = std::exp2(oracle::entropy_bits(oracle::conditional(kk, i, bw.sigma[i])));
            worst = std::max(worst, std::abs(realised / 30.0 - 1.0));
        }
    }
    return verdict(worst <= 1e-5, fmt("max |perp/30 - 1| = %.3g over 500 rows (tol 1e-5)", worst));
}

// snack_fit with no triplets equals the plain t-SNE path bit for bit.
Verdict degeneracy_check()
{
    const Matrix x = oracle::random_matrix(60, 8, 7);
    SnackConfig cfg;
    cfg.iters = 1000;
    cfg.seed = 17;
    const Matrix k = pairwise_distances(x);
    const FitResult a = snack_fit(k, {}, cfg);
    const FitResult b = tsne_fit(affinities_from_distances(k, cfg.perplexity), cfg);
    const bool same = a.y.values() == b.y.values() && a.losses == b.losses;
    return verdict(same, fmt("%zu loss records and %zu coordinates compared exactly", a.losses.size(), a.y.values().size()));
}

struct Benchmark {
    SyntheticCorpus sc;
    std::vector<int> labels;
    Matrix p;
    Matrix initial;
};

Benchmark benchmark(std::uint64_t seed)
{
    SyntheticCorpusOptions o;
    o.noise = kBenchmarkNoise;
    o.seed = seed;
    Benchmark b{make_synthetic_corpus(o), {}, {}, {}};
    b.labels = b.sc.corpus.labels();
    b.p = affinities_from_distances(pairwise_distances(b.sc.embeddings.matrix), 30.0);
    SnackConfig cfg;
    cfg.iters = kRefitIters;
    cfg.seed = seed;
    b.initial = snack_fit_affinities(b.p, {}, cfg).y;
    return b;
}

PlaybackConfig playback_config(StrategyKind kind, std::uint64_t seed)
{
    PlaybackConfig cfg;
    cfg.strategy.kind = kind;
    cfg.snack.iters = kRefitIters;
    cfg.snack.seed = seed;
    cfg.seed = seed;
    cfg.curve_metrics = false;
    return cfg;
}

// Oracle sampling with the synthetic worker never disagrees with the labels.
Verdict oracle_check()
{
    std::size_t disagreements = 0;
    double min_p = 100.0, min_r = 100.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SyntheticCorpusOptions o;
        o.seed = seed;
        const auto sc = make_synthetic_corpus(o);
        const auto labels = sc.corpus.labels();
        const Matrix p = affinities_from_distances(pairwise_distances(sc.embeddings.matrix), 30.0);
        PlaybackConfig cfg = playback_config(StrategyKind::Oracle, seed);
        cfg.snack.iters = 500;
        const PlaybackResult r = run_playback(labels, p, cfg);
        disagreements += r.report.annotations->disagreements;
        min_p = std::min(min_p, r.report.annotations->precision);
        min_r = std::min(min_r, r.report.annotations->recall);
    }
    return verdict(disagreements == 0 && min_p == 100.0 && min_r == 100.0,
                   fmt("5 seeds: disagreements %zu, min precision %.4f, min recall %.4f (exact 0 / 100 / 100)",
                       disagreements, min_p, min_r));
}

struct SeedRun {
    double random = 0.0, distance_rnd = 0.0, oracle = 0.0;
    double tgr_5c2 = 0.0, tgr_2c1 = 0.0;
    double ordering_seconds = 0.0;
};

// One benchmark corpus per seed, shared by the ordering and n-choose-k runs.
// Random and Distance-Rnd refit every 2000 triplets; Oracle grids and answers
// do not depend on the embedding, so it refits once at the end.
SeedRun run_seed(std::uint64_t seed)
{
    SeedRun out;
    auto start = std::chrono::steady_clock::now();
    const Benchmark b = benchmark(seed);
    auto knngr = [&](StrategyKind kind, std::size_t refit_every) {
        PlaybackConfig cfg = playback_config(kind, seed);
        cfg.refit_every = refit_every;
        return run_playback(b.labels, b.p, cfg, b.initial).report.knngr->mean;
    };
    out.random = knngr(StrategyKind::Random, 2000);
    out.distance_rnd = knngr(StrategyKind::DistanceRnd, 2000);
    out.oracle = knngr(StrategyKind::Oracle, 4000);
    out.ordering_seconds = seconds_since(start);

    auto tgr = [&](std::size_t n, std::size_t k) {
        PlaybackConfig cfg = playback_config(StrategyKind::DistanceRnd, seed);
        cfg.n = n;
        cfg.k = k;
        cfg.unit = BudgetUnit::Grids;
        cfg.budget = 667;
        cfg.refit_every = 667;
        return run_playback(b.labels, b.p, cfg, b.initial).report.tgr->mean;
    };
    out.tgr_5c2 = tgr(5, 2);
    out.tgr_2c1 = tgr(2, 1);
    return out;
}

Verdict metric_sanity_check()
{
    std::vector<int> labels(300);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 6);
    const MeanStd random_tgr = triplet_generalization_ratio(oracle::random_matrix(300, 2, 1), labels, 1);

    Matrix separated = oracle::random_matrix(300, 2, 2, 0.01);
    for (std::size_t i = 0; i < 300; ++i) separated(i, 0) += 100.0 * labels[i];
    const MeanStd sep_tgr = triplet_generalization_ratio(separated, labels, 2);
    const MeanStd sep_knn = knn_generalization_ratio(separated, labels, 2);

    Matrix identical(300, 3);
    const Matrix centres = oracle::random_matrix(6, 3, 3);
    for (std::size_t i = 0; i < 300; ++i)
        for (std::size_t c = 0; c < 3; ++c) identical(i, c) = centres(static_cast<std::size_t>(labels[i]), c);
    const double snr = snr_distance(identical, labels).value;

    const bool ok = std::abs(random_tgr.mean - 0.5) <= 0.05 && sep_tgr.mean >= 0.99 && sep_knn.mean >= 0.99 && snr == 0.0;
    return verdict(ok, fmt("random TGR %.4f (0.50 +- 0.05), separated TGR %.4f and KNNGR %.4f (>= 0.99), SNR %.3g (= 0)",
                           random_tgr.mean, sep_tgr.mean, sep_knn.mean, snr));
}

Verdict triplet_arithmetic_check()
{
    SyntheticCorpusOptions o;
    const auto sc = make_synthetic_corpus(o);
    const NeighborIndex index(sc.embeddings.matrix);
    SamplingStrategy s;
    Rng rng = make_rng(0, 1);
    std::uniform_int_distribution<std::size_t> anchor(0, sc.corpus.size() - 1);
    std::vector<Response> responses;
    for (int g = 0; g < 2880; ++g)
        responses.push_back(random_select(sample_grid(s, anchor(rng), 5, index, {}, rng), 2, rng));
    const std::size_t count = extract_triplets(responses, TripletSource::Human).size();
    return verdict(count == 17280, fmt("2880 grids -> %zu triplets (expected 17280)", count));
}

Verdict dataset_check()
{
    const char* dir = std::getenv("SNACK_CORPUS_DIR");
    if (!dir) return {Outcome::Skip, "set SNACK_CORPUS_DIR to a directory holding excerpts.tsv and taxonomy.tsv"};
    const std::filesystem::path root(dir);
    const Corpus corpus = load_corpus(root / "excerpts.tsv", root / "taxonomy.tsv");
    const CorpusStats stats = corpus_stats(corpus);
    const std::size_t examples[] = {169, 92, 49, 290};
    const double ttr[] = {0.33, 0.39, 0.47, 0.37};
    const double length[] = {26, 28, 26, 18};
    bool ok = true;
    std::string detail;
    for (std::size_t s = 0; s < kSupercategoryCount; ++s) {
        const auto& st = stats.per_supercategory[s];
        ok = ok && st.examples == examples[s] && std::abs(st.ttr - ttr[s]) <= 0.02 &&
             std::abs(st.avg_length - length[s]) <= 2.0;
        detail += fmt("%s%zu/%.3f/%.1f", s ? ", " : "examples/ttr/length ", st.examples, st.ttr, st.avg_length);
    }
    return verdict(ok, detail);
}

Verdict catch_check()
{
    SyntheticCorpusOptions o;
    const auto sc = make_synthetic_corpus(o);
    const auto labels = sc.corpus.labels();
    std::vector<std::size_t> anchors;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (sc.corpus.taxonomy().supercategory_of(labels[i]) != Supercategory::Irrelevant) anchors.push_back(i);
    Rng rng = make_rng(0, 2);
    const int trials = 100000;
    double counts[3] = {0, 0, 0};
    for (int t = 0; t < trials; ++t) {
        const Grid g = make_catch_trial(anchors[static_cast<std::size_t>(t) % anchors.size()], labels,
                                        sc.corpus.taxonomy(), rng);
        counts[static_cast<int>(grade_catch(random_select(g, 2, rng), labels))] += 1.0;
    }
    const double expected[3] = {0.1, 0.6, 0.3};
    bool ok = true;
    double worst_z = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double se = std::sqrt(expected[c] * (1.0 - expected[c]) / trials);
        const double z = std::abs(counts[c] / trials - expected[c]) / se;
        worst_z = std::max(worst_z, z);
        ok = ok && z <= 3.0;
    }
    return verdict(ok, fmt("both %.4f, one %.4f, none %.4f; max deviation %.2f SE (limit 3)", counts[0] / trials,
                           counts[1] / trials, counts[2] / trials, worst_z));
}

} // namespace

int main()
{
    int failures = 0;
    auto report = [&](const char* name, const Verdict& v) {
        const char* tag = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Fail ? "FAIL" : "SKIP";
        if (v.outcome == Outcome::Fail) ++failures;
        std::printf("%s %s: %s\n", tag, name, v.detail.c_str());
        std::fflush(stdout);
    };
    auto guarded = [&](const char* name, const std::function<Verdict()>& f) {
        try {
            report(name, f());
        } catch (const std::exception& e) {
            report(name, {Outcome::Fail, std::string("exception: ") + e.what()});
        }
    };

    guarded("gradient correctness", gradient_check);
    guarded("perplexity bisection", perplexity_check);
    guarded("t-SNE degeneracy", degeneracy_check);
    guarded("oracle exactness", oracle_check);

    std::vector<SeedRun> runs;
    std::string run_error;
    try {
        for (int seed = 0; seed < kSeeds; ++seed) runs.push_back(run_seed(static_cast<std::uint64_t>(seed)));
    } catch (const std::exception& e) {
        run_error = e.what();
    }
    guarded("strategy ordering", [&]() -> Verdict {
        if (!run_error.empty()) return {Outcome::Fail, "exception: " + run_error};
        int held = 0;
        double seconds = 0.0;
        std::string detail;
        for (const auto& r : runs) {
            held += r.oracle > r.distance_rnd && r.distance_rnd > r.random ? 1 : 0;
            seconds += r.ordering_seconds;
            detail += fmt(" [%.3f > %.3f > %.3f]", r.oracle, r.distance_rnd, r.random);
        }
        return verdict(held >= 8 && seconds <= 900.0,
                       fmt("Oracle > Distance-Rnd > Random KNNGR in %d/10 seeds (need 8), %.0f s (limit 900 s);", held,
                           seconds) + detail);
    });
    guarded("metric sanity", metric_sanity_check);
    guarded("triplet arithmetic", triplet_arithmetic_check);
    guarded("dataset statistics", dataset_check);
    guarded("catch-trial combinatorics", catch_check);
    guarded("n-choose-k sweep", [&]() -> Verdict {
        if (!run_error.empty()) return {Outcome::Fail, "exception: " + run_error};
        int held = 0;
        std::string detail;
        for (const auto& r : runs) {
            held += r.tgr_5c2 >= r.tgr_2c1 ? 1 : 0;
            detail += fmt(" [%.3f vs %.3f]", r.tgr_5c2, r.tgr_2c1);
        }
        return verdict(held >= 8, fmt("5-choose-2 TGR >= 2-choose-1 at 667 grids in %d/10 seeds (need 8);", held) + detail);
    });
    return failures == 0 ? 0 : 1;
}
