#ifndef SNACK_TSNE_HPP
#define SNACK_TSNE_HPP

#include <cstddef>
#include <utility>
#include <vector>

#include "snack/matrix.hpp"

namespace snack {

// Exact (dense, O(N^2)) t-SNE machinery. All functions are pure.

// Pairwise Euclidean distances between rows. Throws if fewer than 2 rows.
Matrix pairwise_distances(const Matrix& x);

enum class BandwidthStatus {
    Converged,
    // Target entropy unreachable (e.g. fewer than u distinct neighbours);
    // sigma stopped at a bracket bound.
    Clamped,
    // All off-diagonal distances are zero; sigma fixed at 1.
    Degenerate,
};

struct BandwidthVector {
    std::vector<double> sigma;
    double perplexity = 30.0;
    std::vector<BandwidthStatus> status;

    bool any_warning() const;
};

struct BisectionOptions {
    double sigma_min = 1e-20;
    double sigma_max = 1e20;
    double sigma_init = 1.0;
    int max_iterations = 200;
    double entropy_tolerance = 1e-5;  // bits
};

// Conditional distribution p_{.|i} for a single row at bandwidth sigma,
// written into out (out[i] = 0). Returns the entropy in bits.
double conditional_row(const Matrix& distances, std::size_t i, double sigma, std::span<double> out);

// Per-row binary search for sigma_i such that 2^H(p_{.|i}) equals the
// perplexity. Throws Error naming the row on non-convergence.
BandwidthVector bisect_bandwidths(const Matrix& distances, double perplexity,
                                  const BisectionOptions& options = {});

// Symmetrised joint affinities p_ij = (p_{j|i} + p_{i|j}) / (2N).
Matrix high_dim_affinities(const Matrix& distances, const BandwidthVector& bandwidths);

// Convenience: bisect at the given perplexity, then symmetrise.
Matrix affinities_from_distances(const Matrix& distances, double perplexity);

// Normalised Student-t (one degree of freedom) affinities of the embedding.
Matrix low_dim_affinities(const Matrix& y);

struct LossGrad {
    double loss = 0.0;
    Matrix grad;
};

inline constexpr double kAffinityFloor = 1e-12;

// KL(P || Q(Y)) and its gradient with respect to Y.
LossGrad tsne_loss_grad(const Matrix& p, const Matrix& y);

// Scratch-buffer version used inside the optimiser. Adds
// weight * dKL/dY (with P scaled by p_scale) into grad and, when
// want_loss is set, returns KL(p_scale * P || Q); otherwise returns 0.
class TsneGradient {
public:
    explicit TsneGradient(const Matrix& p);

    double accumulate(const Matrix& y, double p_scale, double weight, Matrix& grad, bool want_loss);

private:
    double sweep_2d(const Matrix& y);
    double sweep_generic(const Matrix& y);
    double kl(const Matrix& y, double p_scale, double z);

    const Matrix& p_;
    std::vector<double> sums_;
    std::vector<double> coords_;
    std::vector<std::pair<double, double>> entropy_cache_;  // p_scale -> sum p log p
};

} // namespace snack

#endif
