// Operator entry point: corpus statistics, fitting, playback simulation,
// evaluation, hyperparameter sweeps, visualisation export and the annotation
// service.

#include <CLI11.hpp>
#include <httplib.h>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "snack/api.hpp"
#include "snack/corpus.hpp"
#include "snack/metrics.hpp"
#include "snack/optimizer.hpp"
#include "snack/playback.hpp"
#include "snack/records.hpp"
#include "snack/service.hpp"
#include "snack/synthetic.hpp"
#include "snack/tsne.hpp"

namespace fs = std::filesystem;
using namespace snack;

namespace {

std::string num(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// Files written by one command. Unless commit() is reached, every
// registered file is deleted again, and the directory too if we made it.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir))
    {
        if (dir_.empty()) throw Error("--out is required");
        created_dir_ = !fs::exists(dir_);
        fs::create_directories(dir_);
    }
    Outputs(const Outputs&) = delete;
    Outputs& operator=(const Outputs&) = delete;
    ~Outputs()
    {
        if (committed_) return;
        std::error_code ec;
        for (const auto& f : files_) fs::remove(f, ec);
        if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
    }

    fs::path file(const std::string& name)
    {
        files_.push_back(dir_ / name);
        return files_.back();
    }

    std::ofstream open(const std::string& name)
    {
        std::ofstream out(file(name), std::ios::binary);
        if (!out) throw Error("cannot write " + (dir_ / name).string());
        return out;
    }

    void commit() { committed_ = true; }

private:
    fs::path dir_;
    std::vector<fs::path> files_;
    bool created_dir_ = false;
    bool committed_ = false;
};

struct DataOptions {
    std::string excerpts;
    std::string taxonomy;
    std::string embeddings;
    bool synthetic = false;
    double noise = 1.0;
    std::size_t dim = 64;
    std::uint64_t synthetic_seed = 0;

    void add(CLI::App& cmd, bool need_embeddings)
    {
        cmd.add_option("--excerpts", excerpts, "Excerpt file (<class_id>\\t<text> per line)");
        cmd.add_option("--taxonomy", taxonomy, "Taxonomy file (<id>\\t<P|H|O|N>\\t<description>)");
        if (need_embeddings) cmd.add_option("--embeddings", embeddings, "Embedding matrix (<N> <D> header)");
        cmd.add_flag("--synthetic", synthetic, "Use the built-in synthetic benchmark corpus");
        cmd.add_option("--noise", noise, "Synthetic within-class noise")->capture_default_str();
        cmd.add_option("--dim", dim, "Synthetic embedding width")->capture_default_str();
        cmd.add_option("--corpus-seed", synthetic_seed, "Synthetic corpus seed")->capture_default_str();
    }

    SyntheticCorpus load(bool need_embeddings) const
    {
        if (synthetic) {
            SyntheticCorpusOptions o;
            o.noise = noise;
            o.dim = dim;
            o.seed = synthetic_seed;
            return make_synthetic_corpus(o);
        }
        if (excerpts.empty() || taxonomy.empty()) throw Error("need --excerpts and --taxonomy, or --synthetic");
        Corpus corpus = load_corpus(excerpts, taxonomy);
        InputEmbeddings emb;
        if (need_embeddings) {
            if (embeddings.empty()) throw Error("need --embeddings");
            emb = load_embeddings(embeddings, corpus);
        }
        return {std::move(corpus), std::move(emb)};
    }
};

struct FitOptions {
    std::string preset = "main-text";
    std::optional<double> lambda;
    std::optional<double> gamma;
    std::optional<int> iters;
    std::optional<double> alpha;
    std::optional<std::string> weighting;
    double perplexity = 30.0;
    std::uint64_t seed = 0;
    bool ramp = false;

    void add(CLI::App& cmd)
    {
        cmd.add_option("--preset", preset, "Weight preset")
            ->check(CLI::IsMember({"main-text", "appendix"}))
            ->capture_default_str();
        cmd.add_option("--lambda", lambda, "t-SNE weight");
        cmd.add_option("--gamma", gamma, "t-STE weight");
        cmd.add_option("--iters", iters, "Gradient iterations per fit");
        cmd.add_option("--alpha", alpha, "t-STE degrees of freedom (default max(d-1, 1))");
        cmd.add_option("--weighting", weighting, "loss_level or gradient_level")
            ->check(CLI::IsMember({"loss_level", "gradient_level"}));
        cmd.add_option("--perplexity", perplexity)->capture_default_str();
        cmd.add_option("--seed", seed)->capture_default_str();
        cmd.add_flag("--ramp", ramp, "Scale the t-STE term by |T| / (|T| + N)");
    }

    SnackConfig config(int default_iters) const
    {
        SnackConfig c = snack_preset(preset);
        c.iters = iters.value_or(default_iters);
        if (lambda) c.lambda = *lambda;
        if (gamma) c.gamma = *gamma;
        c.alpha = alpha;
        if (weighting) c.weighting = weighting_mode_from_string(*weighting);
        c.perplexity = perplexity;
        c.seed = seed;
        c.tste_ramp = ramp;
        c.validate();
        return c;
    }
};

struct PlaybackOptions {
    std::string strategy = "distance-rnd";
    std::size_t pool_size = 20;
    std::string weighting = "proportional";
    std::size_t n = kDefaultGridSize;
    std::size_t k = kDefaultSelections;
    std::size_t budget = 4000;
    std::string unit = "triplets";
    std::size_t refit_every = 1000;
    std::size_t repeats = 10;

    void add(CLI::App& cmd)
    {
        cmd.add_option("--strategy", strategy)
            ->check(CLI::IsMember({"random", "topk", "distance", "distance-rnd", "oracle"}))
            ->capture_default_str();
        cmd.add_option("--pool-size", pool_size, "Neighbour pool for the distance strategies")->capture_default_str();
        cmd.add_option("--distance-weighting", weighting)
            ->check(CLI::IsMember({"proportional", "inverse"}))
            ->capture_default_str();
        cmd.add_option("--n", n, "Candidates per grid (at most 5)")->check(CLI::Range(2, 5))->capture_default_str();
        cmd.add_option("--k", k, "Selections per grid")->capture_default_str();
        cmd.add_option("--budget", budget, "Simulated annotation budget")->capture_default_str();
        cmd.add_option("--budget-unit", unit)->check(CLI::IsMember({"triplets", "grids"}))->capture_default_str();
        cmd.add_option("--refit-every", refit_every, "Refit cadence, in budget units")->capture_default_str();
        cmd.add_option("--repeats", repeats, "Metric repeats")->capture_default_str();
    }

    PlaybackConfig config(const SnackConfig& snack, std::uint64_t seed) const
    {
        PlaybackConfig c;
        c.strategy.kind = strategy_from_string(strategy);
        c.strategy.pool_size = pool_size;
        c.strategy.weighting =
            weighting == "inverse" ? DistanceWeighting::Inverse : DistanceWeighting::Proportional;
        c.n = n;
        c.k = k;
        c.budget = budget;
        c.unit = unit == "grids" ? BudgetUnit::Grids : BudgetUnit::Triplets;
        c.refit_every = refit_every;
        c.metric_repeats = repeats;
        c.knn.repeats = repeats;
        c.snack = snack;
        c.seed = seed;
        c.validate();
        return c;
    }
};

void print_stats(const Corpus& corpus)
{
    const CorpusStats stats = corpus_stats(corpus);
    std::printf("%-12s %8s %10s %10s %8s\n", "category", "examples", "avg_length", "word_types", "ttr");
    std::size_t total = 0;
    for (std::size_t s = 0; s < kSupercategoryCount; ++s) {
        const auto cat = static_cast<Supercategory>(s);
        const auto& st = stats[cat];
        total += st.examples;
        std::printf("%-12s %8zu %10.2f %10zu %8.3f\n", std::string(supercategory_name(cat)).c_str(), st.examples,
                    st.avg_length, st.word_types, st.ttr);
    }
    std::printf("%-12s %8zu\n", "total", total);
}

void write_losses(std::ostream& out, const std::vector<LossRecord>& losses)
{
    out << "iter,total,tsne,tste\n";
    for (const auto& l : losses)
        out << l.iter << ',' << num(l.total) << ',' << num(l.tsne_part) << ',' << num(l.tste_part) << '\n';
}

void write_curve(std::ostream& out, const std::vector<CurvePoint>& curve)
{
    out << "grids,triplets,tgr_mean,tgr_std,knngr_mean,knngr_std\n";
    for (const auto& c : curve)
        out << c.grids << ',' << c.triplets << ',' << num(c.tgr.mean) << ',' << num(c.tgr.std) << ','
            << num(c.knngr.mean) << ',' << num(c.knngr.std) << '\n';
}

void write_viz(std::ostream& out, const Matrix& y, const Corpus& corpus)
{
    if (y.rows() != corpus.size()) throw Error("embedding rows do not match the corpus");
    if (y.cols() < 2) throw Error("visualisation export needs at least 2 dimensions");
    out << "index,x,y,class_id,supercategory\n";
    for (std::size_t i = 0; i < y.rows(); ++i) {
        const int c = corpus[i].class_id;
        out << i << ',' << num(y(i, 0)) << ',' << num(y(i, 1)) << ',' << c << ','
            << supercategory_code(corpus.taxonomy().supercategory_of(c)) << '\n';
    }
}

// Co-annotation counts: how often each candidate excerpt was selected for an
// anchor. Sentinel slots carry no excerpt and are skipped.
void write_edges(std::ostream& out, const std::vector<Response>& responses)
{
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
    for (const auto& r : responses)
        for (auto pos : r.selected) {
            if (r.grid.sentinel_slot && *r.grid.sentinel_slot == pos) continue;
            ++counts[{r.grid.anchor, r.grid.candidates.at(pos)}];
        }
    out << "anchor,selected,count\n";
    for (const auto& [edge, count] : counts) out << edge.first << ',' << edge.second << ',' << count << '\n';
}

void write_text(Outputs& outputs, const std::string& name, const std::string& text)
{
    auto out = outputs.open(name);
    out << text;
}

// Values of lambda and gamma swept by gridsearch: the union of the two
// published ranges, applied to both weights.
const std::vector<double> kWeightGrid{0.0, 0.025, 0.1, 0.25, 0.5, 2.5, 5.0, 10.0, 25.0};
const std::vector<std::size_t> kPoolGrid{5, 10, 15, 20, 25, 30};

int run(int argc, char** argv)
{
    CLI::App app{"Triplet-guided narrative embeddings"};
    app.require_subcommand(1);

    DataOptions data;
    FitOptions fit;
    PlaybackOptions play;
    std::string out_dir;
    std::string embedding_path;
    std::string triplet_path;
    std::string response_path;
    std::string config_path;

    auto* stats = app.add_subcommand("stats", "Per-supercategory corpus statistics");
    data.add(*stats, false);

    auto* synth = app.add_subcommand("synth", "Write the synthetic benchmark corpus to disk");
    synth->add_option("--noise", data.noise)->capture_default_str();
    synth->add_option("--dim", data.dim)->capture_default_str();
    synth->add_option("--corpus-seed", data.synthetic_seed)->capture_default_str();
    synth->add_option("--out", out_dir)->required();

    auto* fit_cmd = app.add_subcommand("fit", "Fit an embedding from input embeddings and optional triplets");
    fit_cmd->set_config("--config");
    data.add(*fit_cmd, true);
    fit.add(*fit_cmd);
    fit_cmd->add_option("--triplets", triplet_path, "Triplet CSV (anchor,positive,negative,source)");
    fit_cmd->add_option("--out", out_dir)->required();

    auto* sim = app.add_subcommand("simulate", "Playback simulation with the synthetic annotator");
    sim->set_config("--config");
    data.add(*sim, true);
    fit.add(*sim);
    play.add(*sim);
    sim->add_option("--out", out_dir)->required();

    auto* eval = app.add_subcommand("evaluate", "Metrics for an embedding snapshot");
    eval->set_config("--config");
    data.add(*eval, false);
    eval->add_option("--embedding", embedding_path)->required();
    eval->add_option("--responses", response_path, "Response log (JSON lines) for annotation statistics");
    eval->add_option("--seed", fit.seed)->capture_default_str();
    eval->add_option("--repeats", play.repeats)->capture_default_str();
    eval->add_option("--out", out_dir)->required();

    std::vector<double> lambdas = kWeightGrid;
    std::vector<double> gammas = kWeightGrid;
    std::vector<std::size_t> pools = kPoolGrid;
    bool skip_weights = false;
    bool skip_pools = false;
    bool nk_sweep = false;
    auto* grid = app.add_subcommand("gridsearch", "TGR over lambda x gamma, pool sizes and (n, k)");
    grid->set_config("--config");
    data.add(*grid, true);
    fit.add(*grid);
    play.add(*grid);
    grid->add_option("--lambdas", lambdas)->delimiter(',');
    grid->add_option("--gammas", gammas)->delimiter(',');
    grid->add_option("--pool-sizes", pools)->delimiter(',');
    grid->add_flag("--no-weight-sweep", skip_weights);
    grid->add_flag("--no-pool-sweep", skip_pools);
    grid->add_flag("--nk-sweep", nk_sweep, "Also sweep n in 2..5, k in 1..n-1 at equal grid budget");
    grid->add_option("--out", out_dir)->required();

    auto* viz = app.add_subcommand("export-viz", "Coordinates and co-annotation edges as CSV");
    data.add(*viz, false);
    viz->add_option("--embedding", embedding_path)->required();
    viz->add_option("--responses", response_path);
    viz->add_option("--out", out_dir)->required();

    auto* serve = app.add_subcommand("serve", "Run the annotation service");
    serve->add_option("--config", config_path, "Service config (JSON); SNACK_* variables override it");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (stats->parsed()) {
        print_stats(data.load(false).corpus);
        return 0;
    }

    if (synth->parsed()) {
        Outputs outputs(out_dir);
        SyntheticCorpusOptions o;
        o.noise = data.noise;
        o.dim = data.dim;
        o.seed = data.synthetic_seed;
        const auto sc = make_synthetic_corpus(o);
        save_corpus(sc.corpus, outputs.file("excerpts.tsv"), outputs.file("taxonomy.tsv"));
        save_matrix(sc.embeddings.matrix, outputs.file("embeddings.txt"));
        outputs.commit();
        std::printf("wrote %zu excerpts to %s\n", sc.corpus.size(), out_dir.c_str());
        return 0;
    }

    if (fit_cmd->parsed()) {
        const auto ds = data.load(true);
        const SnackConfig cfg = fit.config(100000);
        TripletSet triplets;
        if (!triplet_path.empty()) triplets = load_triplets(triplet_path);
        Outputs outputs(out_dir);
        const auto result = snack_fit(pairwise_distances(ds.embeddings.matrix), triplets, cfg);
        save_matrix(result.y, outputs.file("embedding.txt"));
        auto curve = outputs.open("curve.csv");
        write_losses(curve, result.losses);
        curve.close();
        outputs.commit();
        std::printf("final loss %s over %zu triplets\n", num(result.losses.back().total).c_str(), triplets.size());
        return 0;
    }

    if (sim->parsed()) {
        const auto ds = data.load(true);
        const SnackConfig snack_cfg = fit.config(10000);
        const PlaybackConfig cfg = play.config(snack_cfg, fit.seed);
        Outputs outputs(out_dir);
        const auto labels = ds.corpus.labels();
        const Matrix p = affinities_from_distances(pairwise_distances(ds.embeddings.matrix), snack_cfg.perplexity);
        const auto result = run_playback(labels, p, cfg);
        MetricsReport report = result.report;
        report.sentinel_agreement.reset();
        save_matrix(result.y, outputs.file("embedding.txt"));
        write_text(outputs, "metrics.json", report_to_json(report) + "\n");
        auto curve = outputs.open("curve.csv");
        write_curve(curve, result.curve);
        curve.close();
        save_triplets(result.triplets, outputs.file("triplets.csv"));
        auto log = outputs.open("responses.jsonl");
        write_responses(log, result.responses);
        log.close();
        if (report.annotations) {
            auto pc = outputs.open("per_class.csv");
            write_per_class_csv(pc, *report.annotations);
        }
        outputs.commit();
        std::printf("%s", report_to_text(report).c_str());
        return 0;
    }

    if (eval->parsed()) {
        const auto ds = data.load(false);
        const Matrix y = load_matrix(embedding_path);
        if (y.rows() != ds.corpus.size()) throw Error("embedding rows do not match the corpus");
        const auto labels = ds.corpus.labels();
        Outputs outputs(out_dir);
        KnnOptions knn;
        knn.repeats = play.repeats;
        MetricsReport report = evaluate_embedding(y, labels, fit.seed, 1000, play.repeats, knn);
        if (!response_path.empty()) {
            const auto responses = load_responses(response_path);
            std::vector<Response> normal;
            for (const auto& r : responses)
                if (r.grid.kind == GridKind::Normal) normal.push_back(r);
            if (!normal.empty()) report.annotations = annotation_stats(normal, labels);
            report.sentinel_agreement = sentinel_stats(responses);
        }
        write_text(outputs, "metrics.json", report_to_json(report) + "\n");
        if (report.annotations) {
            auto pc = outputs.open("per_class.csv");
            write_per_class_csv(pc, *report.annotations);
        }
        outputs.commit();
        std::printf("%s", report_to_text(report).c_str());
        return 0;
    }

    if (grid->parsed()) {
        const auto ds = data.load(true);
        const SnackConfig base = fit.config(10000);
        const auto labels = ds.corpus.labels();
        const Matrix p = affinities_from_distances(pairwise_distances(ds.embeddings.matrix), base.perplexity);
        Outputs outputs(out_dir);
        const Matrix y0 = snack_fit_affinities(p, {}, base).y;

        if (!skip_weights) {
            // Triplets are collected once with the base weights, then every
            // (lambda, gamma) pair refits on the same set.
            PlaybackConfig cfg = play.config(base, fit.seed);
            cfg.curve_metrics = false;
            const auto collected = run_playback(labels, p, cfg, y0);
            auto out = outputs.open("gridsearch.csv");
            out << "lambda,gamma,tgr_mean,tgr_std\n";
            for (double l : lambdas)
                for (double g : gammas) {
                    if (l == 0.0 && g == 0.0) continue;
                    SnackConfig c = base;
                    c.lambda = l;
                    c.gamma = g;
                    const Matrix y = snack_fit_affinities(p, collected.triplets, c).y;
                    const auto tgr = triplet_generalization_ratio(y, labels, fit.seed, 1000, play.repeats);
                    out << num(l) << ',' << num(g) << ',' << num(tgr.mean) << ',' << num(tgr.std) << '\n';
                    std::printf("lambda %s gamma %s tgr %.4f\n", num(l).c_str(), num(g).c_str(), tgr.mean);
                }
        }
        if (!skip_pools) {
            PlaybackConfig cfg = play.config(base, fit.seed);
            cfg.curve_metrics = false;
            if (cfg.strategy.kind != StrategyKind::Distance) cfg.strategy.kind = StrategyKind::DistanceRnd;
            auto out = outputs.open("pool_sweep.csv");
            out << "pool_size,tgr_mean,tgr_std,knngr_mean,knngr_std\n";
            for (auto pool : pools) {
                cfg.strategy.pool_size = pool;
                cfg.validate();
                const auto r = run_playback(labels, p, cfg, y0);
                out << pool << ',' << num(r.report.tgr->mean) << ',' << num(r.report.tgr->std) << ','
                    << num(r.report.knngr->mean) << ',' << num(r.report.knngr->std) << '\n';
                std::printf("pool %zu tgr %.4f\n", pool, r.report.tgr->mean);
            }
        }
        if (nk_sweep) {
            PlaybackConfig cfg = play.config(base, fit.seed);
            cfg.curve_metrics = false;
            cfg.unit = BudgetUnit::Grids;
            auto out = outputs.open("nk_sweep.csv");
            out << "n,k,grids,triplets,tgr_mean,tgr_std\n";
            for (std::size_t n = 2; n <= kDefaultGridSize; ++n)
                for (std::size_t k = 1; k < n; ++k) {
                    cfg.n = n;
                    cfg.k = k;
                    cfg.strategy.oracle_positives = std::min<std::size_t>(k, n - 1);
                    cfg.validate();
                    const auto r = run_playback(labels, p, cfg, y0);
                    out << n << ',' << k << ',' << r.responses.size() << ',' << r.triplets.size() << ','
                        << num(r.report.tgr->mean) << ',' << num(r.report.tgr->std) << '\n';
                    std::printf("%zu choose %zu tgr %.4f\n", n, k, r.report.tgr->mean);
                }
        }
        outputs.commit();
        return 0;
    }

    if (viz->parsed()) {
        const auto ds = data.load(false);
        const Matrix y = load_matrix(embedding_path);
        std::vector<Response> responses;
        if (!response_path.empty()) responses = load_responses(response_path);
        Outputs outputs(out_dir);
        auto v = outputs.open("viz.csv");
        write_viz(v, y, ds.corpus);
        v.close();
        auto e = outputs.open("edges.csv");
        write_edges(e, responses);
        e.close();
        outputs.commit();
        return 0;
    }

    if (serve->parsed()) {
        std::optional<fs::path> path;
        if (!config_path.empty()) path = config_path;
        const ServiceConfig config = load_service_config(path, [](const char* n) { return std::getenv(n); });
        if (config.pretest.empty()) throw Error("service config needs a pretest file");
        Corpus corpus = load_corpus(config.excerpts, config.taxonomy);
        InputEmbeddings emb = load_embeddings(config.embeddings, corpus);
        CampaignService service(std::move(corpus), std::move(emb), load_pretest(config.pretest),
                                service_options(config));
        for (const auto& w : service.recovery_warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
        httplib::Server server;
        bind_routes(server, service);
        std::printf("listening on %s:%d (embedding version %zu)\n", config.host.c_str(), config.port,
                    service.version());
        std::fflush(stdout);
        if (!server.listen(config.host, config.port)) throw Error("cannot listen on port " + std::to_string(config.port));
        return 0;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
