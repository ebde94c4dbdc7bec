#include "snack/optimizer.hpp"

#include <cmath>
#include <random>
#include <string>

#include "snack/error.hpp"
#include "snack/random.hpp"
#include "snack/tsne.hpp"

namespace snack {

std::string_view to_string(WeightingMode m)
{
    return m == WeightingMode::LossLevel ? "loss_level" : "gradient_level";
}

WeightingMode weighting_mode_from_string(std::string_view s)
{
    if (s == "loss_level" || s == "loss") return WeightingMode::LossLevel;
    if (s == "gradient_level" || s == "gradient") return WeightingMode::GradientLevel;
    throw Error("unknown weighting mode '" + std::string(s) + "'");
}

SnackConfig SnackConfig::main_text()
{
    return SnackConfig{};
}

SnackConfig SnackConfig::appendix()
{
    SnackConfig cfg;
    cfg.lambda = 5.0;
    cfg.gamma = 0.1;
    return cfg;
}

void SnackConfig::validate() const
{
    auto fail = [](const std::string& what) { throw Error("invalid SnackConfig: " + what); };
    if (!(lambda >= 0.0) || !(gamma >= 0.0)) fail("lambda and gamma must be >= 0");
    if (lambda == 0.0 && gamma == 0.0) fail("lambda and gamma cannot both be zero");
    if (!(perplexity > 1.0)) fail("perplexity must be > 1");
    if (out_dim < 1) fail("out_dim must be >= 1");
    if (iters < 1) fail("iters must be >= 1");
    if (alpha && !(*alpha > 0.0 && std::isfinite(*alpha))) fail("alpha must be positive");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (exaggeration_iters < 0 || !(exaggeration_factor > 0.0)) fail("bad early exaggeration settings");
    if (loss_interval < 1) fail("loss_interval must be >= 1");
}

TsteConfig SnackConfig::tste() const
{
    return alpha ? TsteConfig{*alpha} : TsteConfig::for_dimension(out_dim);
}

double tste_ramp_weight(std::size_t triplet_count, std::size_t n)
{
    if (triplet_count == 0) return 0.0;
    return static_cast<double>(triplet_count) / static_cast<double>(triplet_count + n);
}

namespace {

double triplet_weight(std::size_t triplet_count, std::size_t n, const SnackConfig& cfg)
{
    return cfg.tste_ramp ? tste_ramp_weight(triplet_count, n) : 1.0;
}

void require_finite(const Matrix& m, int iter, const char* what)
{
    for (double v : m.values())
        if (!std::isfinite(v)) throw Error(std::string("non-finite ") + what + " at iteration " + std::to_string(iter));
}

bool record_loss_at(int iter, const SnackConfig& cfg)
{
    return iter % cfg.loss_interval == 0 || iter == cfg.iters - 1;
}

} // namespace

CombinedLoss combined_loss(const Matrix& p, std::span<const Triplet> triplets, const Matrix& y,
                           const SnackConfig& cfg)
{
    validate_triplets(triplets, y.rows());
    CombinedLoss out;
    Matrix scratch(y.rows(), y.cols());
    TsneGradient tsne(p);
    out.tsne_part = tsne.accumulate(y, 1.0, 1.0, scratch, true);
    if (!triplets.empty())
        out.tste_part = triplet_weight(triplets.size(), y.rows(), cfg) *
                        tste_accumulate(y, triplets, cfg.tste(), 1.0, scratch);
    out.total = cfg.lambda * out.tsne_part + cfg.gamma * out.tste_part;
    return out;
}

void descent_step(OptState& state, const SnackConfig& cfg, const Matrix& grad, Matrix& y)
{
    const double momentum = state.iter < cfg.momentum_switch_iter ? cfg.momentum_init : cfg.momentum_final;
    auto& vel = state.velocity.values();
    auto& gains = state.gains.values();
    const auto& g = grad.values();
    auto& yv = y.values();
    for (std::size_t c = 0; c < yv.size(); ++c) {
        // Grow the gain while the step keeps heading the same way.
        if ((g[c] > 0.0) != (vel[c] > 0.0))
            gains[c] += 0.2;
        else
            gains[c] *= 0.8;
        if (gains[c] < kMinGain) gains[c] = kMinGain;
        vel[c] = momentum * vel[c] - cfg.learning_rate * gains[c] * g[c];
        yv[c] += vel[c];
    }
    ++state.iter;
}

Matrix initial_embedding(std::size_t n, const SnackConfig& cfg)
{
    if (!cfg.point_ids.empty() && cfg.point_ids.size() != n)
        throw Error("point_ids size does not match the number of points");
    Matrix y(n, cfg.out_dim);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = make_rng(cfg.seed, cfg.point_ids.empty() ? i : cfg.point_ids[i]);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t c = 0; c < cfg.out_dim; ++c) y(i, c) = normal(rng) * cfg.init_scale;
    }
    return y;
}

FitResult snack_fit_affinities(const Matrix& p, std::span<const Triplet> triplets, const SnackConfig& cfg,
                               const Checkpoint& checkpoint)
{
    cfg.validate();
    const std::size_t n = p.rows();
    if (n < 2) throw Error("snack_fit needs at least 2 points");
    validate_triplets(triplets, n);

    const auto tste_cfg = cfg.tste();
    const double ramp = triplet_weight(triplets.size(), n, cfg);
    double tste_weight = cfg.gamma * ramp;
    if (cfg.weighting == WeightingMode::GradientLevel && !triplets.empty())
        tste_weight *= static_cast<double>(n) / static_cast<double>(triplets.size());
    const bool use_tste = !triplets.empty() && cfg.gamma > 0.0;

    FitResult result{initial_embedding(n, cfg), {}};
    OptState state(n, cfg.out_dim);
    Matrix grad(n, cfg.out_dim);
    TsneGradient tsne(p);

    for (int it = 0; it < cfg.iters; ++it) {
        grad.fill(0.0);
        const bool want_loss = record_loss_at(it, cfg);
        const double exaggeration = it < cfg.exaggeration_iters ? cfg.exaggeration_factor : 1.0;
        LossRecord rec{it, 0.0, 0.0, 0.0};
        if (cfg.lambda > 0.0) rec.tsne_part = tsne.accumulate(result.y, exaggeration, cfg.lambda, grad, want_loss);
        if (use_tste) rec.tste_part = ramp * tste_accumulate(result.y, triplets, tste_cfg, tste_weight, grad);
        require_finite(grad, it, "gradient");
        if (want_loss) {
            rec.total = cfg.lambda * rec.tsne_part + cfg.gamma * rec.tste_part;
            if (!std::isfinite(rec.total)) throw Error("non-finite loss at iteration " + std::to_string(it));
            result.losses.push_back(rec);
        }
        descent_step(state, cfg, grad, result.y);
        require_finite(result.y, it, "embedding");
        if (checkpoint.interval > 0 && checkpoint.callback && (it + 1) % checkpoint.interval == 0)
            checkpoint.callback(it + 1, result.y);
    }
    return result;
}

FitResult snack_fit(const Matrix& distances, std::span<const Triplet> triplets, const SnackConfig& cfg,
                    const Checkpoint& checkpoint)
{
    cfg.validate();
    return snack_fit_affinities(affinities_from_distances(distances, cfg.perplexity), triplets, cfg, checkpoint);
}

FitResult tsne_fit(const Matrix& p, const SnackConfig& cfg)
{
    cfg.validate();
    const std::size_t n = p.rows();
    if (n < 2) throw Error("tsne_fit needs at least 2 points");
    FitResult result{initial_embedding(n, cfg), {}};
    OptState state(n, cfg.out_dim);
    Matrix grad(n, cfg.out_dim);
    TsneGradient tsne(p);
    for (int it = 0; it < cfg.iters; ++it) {
        grad.fill(0.0);
        const bool want_loss = record_loss_at(it, cfg);
        const double exaggeration = it < cfg.exaggeration_iters ? cfg.exaggeration_factor : 1.0;
        const double kl = tsne.accumulate(result.y, exaggeration, cfg.lambda, grad, want_loss);
        require_finite(grad, it, "gradient");
        if (want_loss) result.losses.push_back({it, cfg.lambda * kl, kl, 0.0});
        descent_step(state, cfg, grad, result.y);
        require_finite(result.y, it, "embedding");
    }
    return result;
}

} // namespace snack
