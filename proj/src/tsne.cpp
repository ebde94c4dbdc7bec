#include "snack/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "snack/error.hpp"

namespace snack {

Matrix pairwise_distances(const Matrix& x)
{
    const std::size_t n = x.rows();
    if (n < 2) throw Error("pairwise_distances needs at least 2 rows, got " + std::to_string(n));
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::sqrt(squared_distance(x.row(i), x.row(j)));
            k(i, j) = d;
            k(j, i) = d;
        }
    }
    return k;
}

bool BandwidthVector::any_warning() const
{
    return std::any_of(status.begin(), status.end(),
                       [](BandwidthStatus s) { return s != BandwidthStatus::Converged; });
}

double conditional_row(const Matrix& distances, std::size_t i, double sigma, std::span<double> out)
{
    const std::size_t n = distances.rows();
    double min_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = distances(i, j);
        min_d2 = std::min(min_d2, d * d);
    }
    const double inv_two_s2 = 1.0 / (2.0 * sigma * sigma);
    double sum = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
            out[j] = 0.0;
            continue;
        }
        const double d = distances(i, j);
        const double shifted = (d * d - min_d2) * inv_two_s2;
        const double e = std::exp(-shifted);
        out[j] = e;
        sum += e;
        weighted += e * shifted;
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= sum;
    // H = log S + E[shifted], in nats.
    const double h_nats = std::log(sum) + weighted / sum;
    return h_nats / std::numbers::ln2;
}

BandwidthVector bisect_bandwidths(const Matrix& distances, double perplexity, const BisectionOptions& options)
{
    if (!(perplexity > 1.0) || !std::isfinite(perplexity))
        throw Error("perplexity must be > 1, got " + std::to_string(perplexity));
    const std::size_t n = distances.rows();
    const double target = std::log2(perplexity);

    BandwidthVector out;
    out.perplexity = perplexity;
    out.sigma.assign(n, options.sigma_init);
    out.status.assign(n, BandwidthStatus::Converged);

    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        bool any_positive = false;
        for (std::size_t j = 0; j < n && !any_positive; ++j) any_positive = j != i && distances(i, j) > 0.0;
        if (!any_positive) {
            out.sigma[i] = 1.0;
            out.status[i] = BandwidthStatus::Degenerate;
            continue;
        }

        double sigma = options.sigma_init;
        double lo = options.sigma_min;
        double hi = options.sigma_max;
        bool have_lo = false;
        bool have_hi = false;
        bool done = false;
        for (int it = 0; it < options.max_iterations; ++it) {
            const double diff = conditional_row(distances, i, sigma, row) - target;
            if (std::abs(diff) <= options.entropy_tolerance) {
                done = true;
                break;
            }
            if (diff > 0.0) {
                // Too flat: shrink sigma.
                if (sigma <= options.sigma_min) {
                    out.status[i] = BandwidthStatus::Clamped;
                    done = true;
                    break;
                }
                hi = sigma;
                have_hi = true;
                sigma = have_lo ? 0.5 * (lo + hi) : std::max(sigma * 0.5, options.sigma_min);
            } else {
                if (sigma >= options.sigma_max) {
                    out.status[i] = BandwidthStatus::Clamped;
                    done = true;
                    break;
                }
                lo = sigma;
                have_lo = true;
                sigma = have_hi ? 0.5 * (lo + hi) : std::min(sigma * 2.0, options.sigma_max);
            }
        }
        if (!done)
            throw Error("bandwidth bisection did not converge for row " + std::to_string(i) + " after " +
                        std::to_string(options.max_iterations) + " iterations");
        out.sigma[i] = sigma;
    }
    return out;
}

Matrix high_dim_affinities(const Matrix& distances, const BandwidthVector& bandwidths)
{
    const std::size_t n = distances.rows();
    if (bandwidths.sigma.size() != n) throw Error("bandwidth vector does not match distance matrix");
    Matrix cond(n, n);
    for (std::size_t i = 0; i < n; ++i) conditional_row(distances, i, bandwidths.sigma[i], cond.row(i));
    Matrix p(n, n);
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = (cond(i, j) + cond(j, i)) * scale;
            p(i, j) = v;
            p(j, i) = v;
        }
    }
    return p;
}

Matrix affinities_from_distances(const Matrix& distances, double perplexity)
{
    return high_dim_affinities(distances, bisect_bandwidths(distances, perplexity));
}

Matrix low_dim_affinities(const Matrix& y)
{
    const std::size_t n = y.rows();
    if (n < 2) throw Error("low_dim_affinities needs at least 2 points");
    Matrix q(n, n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double num = 1.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
            q(i, j) = num;
            q(j, i) = num;
            z += 2.0 * num;
        }
    }
    for (auto& v : q.values()) v /= z;
    return q;
}

LossGrad tsne_loss_grad(const Matrix& p, const Matrix& y)
{
    LossGrad out{0.0, Matrix(y.rows(), y.cols())};
    TsneGradient g(p);
    out.loss = g.accumulate(y, 1.0, 1.0, out.grad, true);
    return out;
}

TsneGradient::TsneGradient(const Matrix& p) : p_(p)
{
    const std::size_t n = p.rows();
    sums_.resize(4 * n);
    coords_.resize(2 * n);
}

namespace {

using v2d = double __attribute__((vector_size(16)));

inline v2d load2(const double* p)
{
    v2d v;
    std::memcpy(&v, p, sizeof(v));
    return v;
}

inline void store2(double* p, v2d v)
{
    std::memcpy(p, &v, sizeof(v));
}

} // namespace

// The gradient is 4 * [sum_j p_ij num_ij (y_i - y_j) - (1/Z) sum_j num_ij^2 (y_i - y_j)],
// so both sums and Z come out of a single sweep over pairs i < j.
double TsneGradient::sweep_2d(const Matrix& y)
{
    const std::size_t n = y.rows();
    double* xs = coords_.data();
    double* ys = coords_.data() + n;
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = y(i, 0);
        ys[i] = y(i, 1);
    }
    std::fill(sums_.begin(), sums_.end(), 0.0);
    double* ax_all = sums_.data();
    double* ay_all = ax_all + n;
    double* bx_all = ay_all + n;
    double* by_all = bx_all + n;
    const double* pv = p_.values().data();

    double z = 0.0;
    const v2d one = {1.0, 1.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = xs[i];
        const double yi = ys[i];
        const double* prow = pv + i * n;
        double ax = 0.0, ay = 0.0, bx = 0.0, by = 0.0, zi = 0.0;
        std::size_t j = i + 1;
        if (j < n && ((n - j) & 1U)) {
            const double dx = xi - xs[j];
            const double dy = yi - ys[j];
            const double q = 1.0 / (1.0 + dx * dx + dy * dy);
            const double pq = prow[j] * q;
            const double qq = q * q;
            zi += q;
            ax += pq * dx;
            ay += pq * dy;
            bx += qq * dx;
            by += qq * dy;
            ax_all[j] -= pq * dx;
            ay_all[j] -= pq * dy;
            bx_all[j] -= qq * dx;
            by_all[j] -= qq * dy;
            ++j;
        }
        const v2d vxi = {xi, xi};
        const v2d vyi = {yi, yi};
        v2d vax = {0.0, 0.0}, vay = {0.0, 0.0}, vbx = {0.0, 0.0}, vby = {0.0, 0.0}, vz = {0.0, 0.0};
        for (; j < n; j += 2) {
            const v2d dx = vxi - load2(xs + j);
            const v2d dy = vyi - load2(ys + j);
            const v2d q = one / (one + dx * dx + dy * dy);
            const v2d pq = load2(prow + j) * q;
            const v2d qq = q * q;
            vz += q;
            const v2d pdx = pq * dx, pdy = pq * dy, qdx = qq * dx, qdy = qq * dy;
            vax += pdx;
            vay += pdy;
            vbx += qdx;
            vby += qdy;
            store2(ax_all + j, load2(ax_all + j) - pdx);
            store2(ay_all + j, load2(ay_all + j) - pdy);
            store2(bx_all + j, load2(bx_all + j) - qdx);
            store2(by_all + j, load2(by_all + j) - qdy);
        }
        ax_all[i] += ax + (vax[0] + vax[1]);
        ay_all[i] += ay + (vay[0] + vay[1]);
        bx_all[i] += bx + (vbx[0] + vbx[1]);
        by_all[i] += by + (vby[0] + vby[1]);
        z += zi + (vz[0] + vz[1]);
    }
    return 2.0 * z;
}

double TsneGradient::sweep_generic(const Matrix& y)
{
    const std::size_t n = y.rows();
    const std::size_t d = y.cols();
    if (sums_.size() != 2 * n * d) sums_.assign(2 * n * d, 0.0);
    std::fill(sums_.begin(), sums_.end(), 0.0);
    double* a_all = sums_.data();
    double* b_all = sums_.data() + n * d;
    const double* pv = p_.values().data();
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto yi = y.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto yj = y.row(j);
            const double q = 1.0 / (1.0 + squared_distance(yi, yj));
            const double pq = pv[i * n + j] * q;
            const double qq = q * q;
            z += q;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = yi[c] - yj[c];
                a_all[i * d + c] += pq * diff;
                a_all[j * d + c] -= pq * diff;
                b_all[i * d + c] += qq * diff;
                b_all[j * d + c] -= qq * diff;
            }
        }
    }
    return 2.0 * z;
}

double TsneGradient::kl(const Matrix& y, double p_scale, double z)
{
    const std::size_t n = y.rows();
    // sum p log p depends only on the scale; at most a couple of scales occur
    // per fit (exaggerated and plain), so cache them.
    auto cached = std::find_if(entropy_cache_.begin(), entropy_cache_.end(),
                               [&](const auto& e) { return e.first == p_scale; });
    if (cached == entropy_cache_.end()) {
        double plogp = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double pij = p_(i, j) * p_scale;
                if (pij > 0.0) plogp += 2.0 * pij * std::log(std::max(pij, kAffinityFloor));
            }
        }
        entropy_cache_.emplace_back(p_scale, plogp);
        cached = std::prev(entropy_cache_.end());
    }
    const double log_z = std::log(z);
    double cross = 0.0;
    double mass = 0.0;
    const double* pv = p_.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        const auto yi = y.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double pij = pv[i * n + j];
            if (pij <= 0.0) continue;
            cross += pij * std::log1p(squared_distance(yi, y.row(j)));
            mass += pij;
        }
    }
    // -sum p log q = sum p log(1 + d^2) + log Z * sum p
    return cached->second + 2.0 * p_scale * (cross + log_z * mass);
}

double TsneGradient::accumulate(const Matrix& y, double p_scale, double weight, Matrix& grad, bool want_loss)
{
    const std::size_t n = y.rows();
    const std::size_t d = y.cols();
    const double factor = 4.0 * weight;
    double z = 0.0;
    if (d == 2) {
        z = sweep_2d(y);
        const double inv_z = 1.0 / z;
        const double* ax = sums_.data();
        const double* ay = ax + n;
        const double* bx = ay + n;
        const double* by = bx + n;
        for (std::size_t i = 0; i < n; ++i) {
            grad(i, 0) += factor * (p_scale * ax[i] - inv_z * bx[i]);
            grad(i, 1) += factor * (p_scale * ay[i] - inv_z * by[i]);
        }
    } else {
        z = sweep_generic(y);
        const double inv_z = 1.0 / z;
        const double* a = sums_.data();
        const double* b = sums_.data() + n * d;
        for (std::size_t k = 0; k < n * d; ++k) grad.values()[k] += factor * (p_scale * a[k] - inv_z * b[k]);
    }
    return want_loss ? kl(y, p_scale, z) : 0.0;
}

} // namespace snack
