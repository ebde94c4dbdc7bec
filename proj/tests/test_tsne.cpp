#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "snack/error.hpp"
#include "snack/tsne.hpp"

using namespace snack;

namespace {

double off_diagonal_sum(const Matrix& m)
{
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (i != j) s += m(i, j);
    return s;
}

Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& perm)
{
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t c = 0; c < m.cols(); ++c) out(i, c) = m(perm[i], c);
    return out;
}

Matrix equilateral()
{
    Matrix y(3, 2);
    y(1, 0) = 1.0;
    y(2, 0) = 0.5;
    y(2, 1) = std::sqrt(3.0) / 2.0;
    return y;
}

} // namespace

TEST_CASE("pairwise distances: 3-4-5 triangle and identical rows")
{
    Matrix x(2, 2);
    x(1, 0) = 3.0;
    x(1, 1) = 4.0;
    const Matrix k = pairwise_distances(x);
    CHECK(k(0, 1) == 5.0);
    CHECK(k(1, 0) == 5.0);
    CHECK(k(0, 0) == 0.0);

    Matrix same(4, 3, 2.5);
    const Matrix z = pairwise_distances(same);
    for (double v : z.values()) CHECK(v == 0.0);

    CHECK_THROWS_AS(pairwise_distances(Matrix(1, 3)), Error);
}

TEST_CASE("pairwise distances match a brute-force recomputation")
{
    const Matrix x = oracle::random_matrix(10, 8, 3);
    const Matrix k = pairwise_distances(x);
    const Matrix ref = oracle::distances(x);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) {
            CHECK(k(i, j) == doctest::Approx(ref(i, j)).epsilon(1e-14));
            CHECK(k(i, j) == k(j, i));
        }
}

TEST_CASE("two points: the single neighbour gets all the mass")
{
    Matrix x(2, 1);
    x(1, 0) = 1.0;
    const Matrix k = pairwise_distances(x);
    const BandwidthVector bw = bisect_bandwidths(k, 30.0);
    CHECK(bw.status[0] == BandwidthStatus::Clamped);
    CHECK(bw.any_warning());
    std::vector<double> row(2);
    CHECK(conditional_row(k, 0, bw.sigma[0], row) == doctest::Approx(0.0));
    CHECK(row[1] == 1.0);
    const Matrix p = high_dim_affinities(k, bw);
    // (p_{1|0} + p_{0|1}) / (2N) with both conditionals equal to 1.
    CHECK(p(0, 1) == doctest::Approx(0.5));
    CHECK(p(1, 0) == doctest::Approx(0.5));
    CHECK(off_diagonal_sum(p) == doctest::Approx(1.0));
}

TEST_CASE("equidistant triple: uniform conditionals and joint entries of 1/6")
{
    Matrix k(3, 3, 2.0);
    for (std::size_t i = 0; i < 3; ++i) k(i, i) = 0.0;
    for (double sigma : {0.1, 1.0, 7.0}) {
        std::vector<double> row(3);
        conditional_row(k, 0, sigma, row);
        CHECK(row[1] == doctest::Approx(0.5));
        CHECK(row[2] == doctest::Approx(0.5));
    }
    // Entropy is pinned at 1 bit for every sigma, so any target other than 2
    // leaves the rows clamped; the joint matrix is uniform regardless.
    for (double u : {1.5, 2.0, 5.0}) {
        const Matrix p = affinities_from_distances(k, u);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                if (i != j) CHECK(p(i, j) == doctest::Approx(1.0 / 6.0));
    }
}

TEST_CASE("bisection hits the target perplexity on random data")
{
    for (unsigned seed : {1u, 2u, 3u}) {
        const Matrix k = pairwise_distances(oracle::random_matrix(50, 10, seed, 1.0 + seed));
        const BandwidthVector bw = bisect_bandwidths(k, 30.0);
        CHECK_FALSE(bw.any_warning());
        for (std::size_t i = 0; i < 50; ++i) {
            const double perplexity = std::exp2(oracle::entropy_bits(oracle::conditional(k, i, bw.sigma[i])));
            CHECK(perplexity >= 30.0 * (1.0 - 1e-5));
            CHECK(perplexity <= 30.0 * (1.0 + 1e-5));
        }
    }
}

TEST_CASE("bisection reaches extreme distance scales")
{
    for (double scale : {1e-6, 1e6}) {
        const Matrix k = pairwise_distances(oracle::random_matrix(40, 5, 9, scale));
        const BandwidthVector bw = bisect_bandwidths(k, 10.0);
        CHECK_FALSE(bw.any_warning());
        for (std::size_t i = 0; i < 40; ++i)
            CHECK(oracle::entropy_bits(oracle::conditional(k, i, bw.sigma[i])) ==
                  doctest::Approx(std::log2(10.0)).epsilon(1e-5));
    }
}

TEST_CASE("bisection is monotone in the perplexity")
{
    const Matrix k = pairwise_distances(oracle::random_matrix(40, 6, 11));
    std::vector<double> previous(40, 0.0);
    for (double u : {2.0, 5.0, 10.0, 20.0, 30.0, 38.0}) {
        const BandwidthVector bw = bisect_bandwidths(k, u);
        for (std::size_t i = 0; i < 40; ++i) {
            CHECK(bw.sigma[i] >= previous[i]);
            previous[i] = bw.sigma[i];
        }
    }
}

TEST_CASE("degenerate rows and invalid perplexity")
{
    Matrix x(4, 2, 0.0);
    x(3, 0) = 1.0;
    Matrix k = pairwise_distances(x);
    // Rows 0..2 still see point 3 at distance 1, so only an all-zero
    // distance row is degenerate.
    Matrix zero(3, 3, 0.0);
    const BandwidthVector bw = bisect_bandwidths(zero, 2.0);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(bw.status[i] == BandwidthStatus::Degenerate);
        CHECK(bw.sigma[i] == 1.0);
    }
    CHECK_THROWS_AS(bisect_bandwidths(k, 1.0), Error);
    CHECK_THROWS_AS(bisect_bandwidths(k, 0.5), Error);
    BisectionOptions tight;
    tight.max_iterations = 2;
    CHECK_THROWS_WITH(bisect_bandwidths(pairwise_distances(oracle::random_matrix(20, 3, 5)), 7.0, tight),
                      doctest::Contains("row 0"));
}

TEST_CASE("joint affinities match a direct evaluation")
{
    const Matrix k = pairwise_distances(oracle::random_matrix(25, 4, 21));
    const BandwidthVector bw = bisect_bandwidths(k, 8.0);
    const Matrix p = high_dim_affinities(k, bw);
    const Matrix ref = oracle::joint(k, bw.sigma);
    for (std::size_t i = 0; i < 25; ++i) {
        CHECK(p(i, i) == 0.0);
        for (std::size_t j = 0; j < 25; ++j) {
            CHECK(p(i, j) == doctest::Approx(ref(i, j)).epsilon(1e-10));
            CHECK(p(i, j) == p(j, i));
            CHECK(p(i, j) >= 0.0);
        }
    }
    CHECK(std::abs(off_diagonal_sum(p) - 1.0) <= 1e-9);
}

TEST_CASE("student-t affinities: two points, equilateral triangle, random")
{
    Matrix two(2, 2);
    two(1, 1) = 3.0;
    const Matrix q2 = low_dim_affinities(two);
    CHECK(q2(0, 1) == doctest::Approx(0.5));
    CHECK(q2(1, 0) == doctest::Approx(0.5));

    const Matrix q3 = low_dim_affinities(equilateral());
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j) CHECK(q3(i, j) == doctest::Approx(1.0 / 6.0));

    const Matrix y = oracle::random_matrix(15, 2, 4);
    const Matrix q = low_dim_affinities(y);
    const Matrix ref = oracle::student_q(y);
    for (std::size_t i = 0; i < 15; ++i)
        for (std::size_t j = 0; j < 15; ++j) {
            CHECK(q(i, j) == doctest::Approx(ref(i, j)).epsilon(1e-12));
            if (i != j) CHECK(q(i, j) > 0.0);
        }
    CHECK(std::abs(off_diagonal_sum(q) - 1.0) <= 1e-9);
}

TEST_CASE("affinities are permutation equivariant")
{
    const Matrix x = oracle::random_matrix(20, 5, 31);
    const Matrix y = oracle::random_matrix(20, 2, 32);
    std::vector<std::size_t> perm(20);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937 gen(5);
    std::shuffle(perm.begin(), perm.end(), gen);

    const Matrix p = affinities_from_distances(pairwise_distances(x), 6.0);
    const Matrix pp = affinities_from_distances(pairwise_distances(permute_rows(x, perm)), 6.0);
    const Matrix q = low_dim_affinities(y);
    const Matrix qp = low_dim_affinities(permute_rows(y, perm));
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 20; ++j) {
            CHECK(pp(i, j) == doctest::Approx(p(perm[i], perm[j])).epsilon(1e-12));
            CHECK(qp(i, j) == doctest::Approx(q(perm[i], perm[j])).epsilon(1e-12));
        }
}

TEST_CASE("KL is zero with zero gradient when Q equals P")
{
    const Matrix y = equilateral();
    Matrix p(3, 3, 1.0 / 6.0);
    for (std::size_t i = 0; i < 3; ++i) p(i, i) = 0.0;
    const LossGrad lg = tsne_loss_grad(p, y);
    CHECK(lg.loss == doctest::Approx(0.0).epsilon(1e-12));
    for (double g : lg.grad.values()) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("KL loss and gradient match the oracle and finite differences")
{
    for (unsigned seed = 0; seed < 5; ++seed) {
        const Matrix p = affinities_from_distances(pairwise_distances(oracle::random_matrix(12, 5, 100 + seed)), 4.0);
        for (std::size_t d : {std::size_t{2}, std::size_t{3}}) {
            const Matrix y = oracle::random_matrix(12, d, 200 + seed);
            const LossGrad lg = tsne_loss_grad(p, y);
            CHECK(lg.loss == doctest::Approx(oracle::kl(p, y)).epsilon(1e-10));
            CHECK(lg.loss >= 0.0);
            const Matrix fd = oracle::numeric_gradient([&](const Matrix& m) { return oracle::kl(p, m); }, y);
            CHECK(oracle::max_relative_error(lg.grad, fd) <= 1e-4);
            for (std::size_t c = 0; c < d; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < 12; ++i) s += lg.grad(i, c);
                CHECK(std::abs(s) <= 1e-8);
            }
        }
    }
}

TEST_CASE("KL is positive away from the matching configuration")
{
    const Matrix p = affinities_from_distances(pairwise_distances(oracle::random_matrix(10, 3, 8)), 3.0);
    for (unsigned seed = 0; seed < 10; ++seed) CHECK(tsne_loss_grad(p, oracle::random_matrix(10, 2, seed)).loss > 0.0);
}

TEST_CASE("scratch gradient accumulator agrees with the reference gradient")
{
    const Matrix p = affinities_from_distances(pairwise_distances(oracle::random_matrix(30, 6, 41)), 5.0);
    for (std::size_t d : {std::size_t{1}, std::size_t{2}, std::size_t{3}}) {
        const Matrix y = oracle::random_matrix(30, d, 42);
        TsneGradient acc(p);
        for (double scale : {1.0, 4.0}) {
            Matrix scaled = p;
            for (auto& v : scaled.values()) v *= scale;
            const LossGrad ref = tsne_loss_grad(scaled, y);
            Matrix grad(30, d, 1.0);
            const double loss = acc.accumulate(y, scale, 0.5, grad, true);
            // KL(sP || Q) with sP not normalised: sum sP log(sP / Q).
            CHECK(loss == doctest::Approx(ref.loss).epsilon(1e-10));
            for (std::size_t i = 0; i < grad.values().size(); ++i)
                CHECK(grad.values()[i] == doctest::Approx(1.0 + 0.5 * ref.grad.values()[i]).epsilon(1e-10));
            Matrix no_loss(30, d, 0.0);
            CHECK(acc.accumulate(y, scale, 1.0, no_loss, false) == 0.0);
        }
    }
}
