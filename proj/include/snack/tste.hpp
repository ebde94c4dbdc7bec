#ifndef SNACK_TSTE_HPP
#define SNACK_TSTE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "snack/matrix.hpp"
#include "snack/tsne.hpp"

namespace snack {

enum class TripletSource { Human, Synthetic, Oracle };

std::string_view to_string(TripletSource s);
TripletSource triplet_source_from_string(std::string_view s);

// "anchor is closer to positive than to negative".
struct Triplet {
    std::size_t anchor = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
    TripletSource source = TripletSource::Synthetic;

    friend bool operator==(const Triplet&, const Triplet&) = default;
};

using TripletSet = std::vector<Triplet>;

// Throws Error unless the three indices are pairwise distinct and < n.
void validate_triplet(const Triplet& t, std::size_t n);
void validate_triplets(std::span<const Triplet> triplets, std::size_t n);

struct TsteConfig {
    double alpha = 1.0;  // Student-t degrees of freedom

    // max(d - 1, 1)
    static TsteConfig for_dimension(std::size_t out_dim);
};

inline constexpr double kProbabilityFloor = 1e-12;

// p = f(d_ij) / (f(d_ij) + f(d_ik)), f(d) = (1 + d^2/alpha)^(-(1+alpha)/2).
double triplet_prob(const Matrix& y, const Triplet& t, const TsteConfig& cfg);

// Log-likelihood sum_T log p and its gradient (an ascent direction). The
// optimiser minimises the negation. Empty T gives (0, zeros).
LossGrad tste_loss_grad(const Matrix& y, std::span<const Triplet> triplets, const TsteConfig& cfg);

// Adds weight * d(-loglik)/dY into grad; returns -loglik (floored).
double tste_accumulate(const Matrix& y, std::span<const Triplet> triplets, const TsteConfig& cfg, double weight,
                       Matrix& grad);

// CSV lines "anchor,positive,negative,source".
void write_triplets(std::ostream& out, std::span<const Triplet> triplets);
TripletSet parse_triplets(std::istream& in, const std::string& name = "<triplets>");
TripletSet load_triplets(const std::filesystem::path& path);
void save_triplets(std::span<const Triplet> triplets, const std::filesystem::path& path);

} // namespace snack

#endif
