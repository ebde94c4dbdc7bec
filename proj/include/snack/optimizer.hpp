#ifndef SNACK_OPTIMIZER_HPP
#define SNACK_OPTIMIZER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "snack/matrix.hpp"
#include "snack/tste.hpp"

namespace snack {

enum class WeightingMode {
    // lambda and gamma scale the two losses; the combined gradient is the
    // gradient of the weighted sum.
    LossLevel,
    // The triplet gradient is averaged over T and rescaled by N before
    // weighting, so its contribution does not grow with |T|.
    GradientLevel,
};

std::string_view to_string(WeightingMode m);
WeightingMode weighting_mode_from_string(std::string_view s);

struct SnackConfig {
    double lambda = 0.1;
    double gamma = 5.0;
    double perplexity = 30.0;
    std::optional<double> alpha;  // unset: max(out_dim - 1, 1)
    std::size_t out_dim = 2;
    double learning_rate = 1.0;
    double momentum_init = 0.5;
    double momentum_final = 0.8;
    int momentum_switch_iter = 20;
    int iters = 100000;
    double exaggeration_factor = 4.0;
    int exaggeration_iters = 100;
    WeightingMode weighting = WeightingMode::LossLevel;
    bool tste_ramp = false;
    std::uint64_t seed = 0;
    double init_scale = 1e-4;
    // Losses are recorded at iteration 0, every loss_interval iterations and
    // at the last iteration.
    int loss_interval = 50;
    // Per-point seeds for initialisation; empty means the row index. Carrying
    // ids along a permutation keeps each point's initial coordinates.
    std::vector<std::uint64_t> point_ids;

    static SnackConfig main_text();  // lambda 0.1, gamma 5
    static SnackConfig appendix();   // lambda 5, gamma 0.1

    void validate() const;
    TsteConfig tste() const;
};

// Bounded, monotone triplet-count weight |T| / (|T| + N).
double tste_ramp_weight(std::size_t triplet_count, std::size_t n);

struct CombinedLoss {
    double total = 0.0;
    double tsne_part = 0.0;  // KL(P || Q)
    double tste_part = 0.0;  // -sum log p, times the ramp weight when enabled
};

// P is the joint affinity matrix derived from K at cfg.perplexity.
CombinedLoss combined_loss(const Matrix& p, std::span<const Triplet> triplets, const Matrix& y,
                           const SnackConfig& cfg);

struct LossRecord {
    int iter = 0;
    double total = 0.0;
    double tsne_part = 0.0;
    double tste_part = 0.0;

    friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

struct FitResult {
    Matrix y;
    std::vector<LossRecord> losses;
};

// Called after every `interval` iterations with (iterations done, Y).
struct Checkpoint {
    int interval = 0;
    std::function<void(int, const Matrix&)> callback;
};

// Momentum SGD with per-coordinate gains.
struct OptState {
    Matrix velocity;
    Matrix gains;
    int iter = 0;

    OptState(std::size_t n, std::size_t d) : velocity(n, d, 0.0), gains(n, d, 1.0) {}
};

inline constexpr double kMinGain = 0.01;

// One update: gains, momentum schedule, velocity, position.
void descent_step(OptState& state, const SnackConfig& cfg, const Matrix& grad, Matrix& y);

Matrix initial_embedding(std::size_t n, const SnackConfig& cfg);

// Minimises lambda * KL + gamma * (-loglik) starting from the seeded
// initialisation. Deterministic in (K, T, cfg).
FitResult snack_fit(const Matrix& distances, std::span<const Triplet> triplets, const SnackConfig& cfg,
                    const Checkpoint& checkpoint = {});
FitResult snack_fit_affinities(const Matrix& p, std::span<const Triplet> triplets, const SnackConfig& cfg,
                               const Checkpoint& checkpoint = {});

// Plain t-SNE path with the same schedule and weight lambda; the reference
// the triplet-free snack_fit must match.
FitResult tsne_fit(const Matrix& p, const SnackConfig& cfg);

} // namespace snack

#endif
