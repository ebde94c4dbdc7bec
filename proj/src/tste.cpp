#include "snack/tste.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "snack/error.hpp"

namespace snack {

std::string_view to_string(TripletSource s)
{
    switch (s) {
    case TripletSource::Human: return "human";
    case TripletSource::Synthetic: return "synthetic";
    case TripletSource::Oracle: return "oracle";
    }
    return "synthetic";
}

TripletSource triplet_source_from_string(std::string_view s)
{
    if (s == "human") return TripletSource::Human;
    if (s == "synthetic") return TripletSource::Synthetic;
    if (s == "oracle") return TripletSource::Oracle;
    throw Error("unknown triplet source '" + std::string(s) + "'");
}

void validate_triplet(const Triplet& t, std::size_t n)
{
    if (t.anchor >= n || t.positive >= n || t.negative >= n)
        throw Error("triplet index out of range (N=" + std::to_string(n) + ")");
    if (t.anchor == t.positive || t.anchor == t.negative || t.positive == t.negative)
        throw Error("triplet indices must be pairwise distinct: (" + std::to_string(t.anchor) + ", " +
                    std::to_string(t.positive) + ", " + std::to_string(t.negative) + ")");
}

void validate_triplets(std::span<const Triplet> triplets, std::size_t n)
{
    for (const auto& t : triplets) validate_triplet(t, n);
}

TsteConfig TsteConfig::for_dimension(std::size_t out_dim)
{
    return TsteConfig{std::max(static_cast<double>(out_dim) - 1.0, 1.0)};
}

namespace {

struct TripletTerms {
    double log_p = 0.0;
    double p = 0.0;
    double a = 0.0;  // squared anchor-positive distance
    double b = 0.0;  // squared anchor-negative distance
};

TripletTerms evaluate(const Matrix& y, const Triplet& t, double alpha)
{
    TripletTerms out;
    out.a = squared_distance(y.row(t.anchor), y.row(t.positive));
    out.b = squared_distance(y.row(t.anchor), y.row(t.negative));
    const double e = -0.5 * (1.0 + alpha);
    const double lf_a = e * std::log1p(out.a / alpha);
    const double lf_b = e * std::log1p(out.b / alpha);
    // log p = lf_a - log(exp(lf_a) + exp(lf_b))
    const double hi = std::max(lf_a, lf_b);
    const double lse = hi + std::log(std::exp(lf_a - hi) + std::exp(lf_b - hi));
    out.log_p = lf_a - lse;
    out.p = std::exp(out.log_p);
    return out;
}

void check_alpha(const TsteConfig& cfg)
{
    if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha))
        throw Error("t-STE alpha must be positive and finite");
}

} // namespace

double triplet_prob(const Matrix& y, const Triplet& t, const TsteConfig& cfg)
{
    check_alpha(cfg);
    validate_triplet(t, y.rows());
    return evaluate(y, t, cfg.alpha).p;
}

double tste_accumulate(const Matrix& y, std::span<const Triplet> triplets, const TsteConfig& cfg, double weight,
                       Matrix& grad)
{
    check_alpha(cfg);
    const double alpha = cfg.alpha;
    const double log_floor = std::log(kProbabilityFloor);
    const std::size_t d = y.cols();
    double neg_loglik = 0.0;
    for (const auto& t : triplets) {
        const auto terms = evaluate(y, t, alpha);
        neg_loglik -= std::max(terms.log_p, log_floor);
        // d(-log p)/dy_i = (1+alpha)(1-p) [ (y_i-y_j)/(alpha+a) - (y_i-y_k)/(alpha+b) ]
        const double one_minus_p = 1.0 - terms.p;
        const double ca = weight * (1.0 + alpha) * one_minus_p / (alpha + terms.a);
        const double cb = weight * (1.0 + alpha) * one_minus_p / (alpha + terms.b);
        const auto yi = y.row(t.anchor);
        const auto yj = y.row(t.positive);
        const auto yk = y.row(t.negative);
        auto gi = grad.row(t.anchor);
        auto gj = grad.row(t.positive);
        auto gk = grad.row(t.negative);
        for (std::size_t c = 0; c < d; ++c) {
            const double dij = ca * (yi[c] - yj[c]);
            const double dik = cb * (yi[c] - yk[c]);
            gi[c] += dij - dik;
            gj[c] -= dij;
            gk[c] += dik;
        }
    }
    return neg_loglik;
}

LossGrad tste_loss_grad(const Matrix& y, std::span<const Triplet> triplets, const TsteConfig& cfg)
{
    validate_triplets(triplets, y.rows());
    LossGrad out{0.0, Matrix(y.rows(), y.cols())};
    if (triplets.empty()) return out;
    // Accumulating with weight -1 turns the descent direction of -loglik
    // into the gradient of loglik.
    out.loss = -tste_accumulate(y, triplets, cfg, -1.0, out.grad);
    return out;
}

void write_triplets(std::ostream& out, std::span<const Triplet> triplets)
{
    for (const auto& t : triplets)
        out << t.anchor << ',' << t.positive << ',' << t.negative << ',' << to_string(t.source) << '\n';
}

TripletSet parse_triplets(std::istream& in, const std::string& name)
{
    TripletSet out;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line_no == 1 && line.starts_with("anchor")) continue;
        std::size_t fields[3];
        std::size_t pos = 0;
        for (auto& f : fields) {
            const auto comma = line.find(',', pos);
            if (comma == std::string_view::npos) throw ParseError(name, line_no, "expected 4 comma-separated fields");
            auto [ptr, ec] = std::from_chars(line.data() + pos, line.data() + comma, f);
            if (ec != std::errc() || ptr != line.data() + comma) throw ParseError(name, line_no, "malformed index");
            pos = comma + 1;
        }
        Triplet t{fields[0], fields[1], fields[2], TripletSource::Synthetic};
        try {
            t.source = triplet_source_from_string(line.substr(pos));
        } catch (const Error& e) {
            throw ParseError(name, line_no, e.what());
        }
        out.push_back(t);
    }
    return out;
}

TripletSet load_triplets(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return parse_triplets(in, path.string());
}

void save_triplets(std::span<const Triplet> triplets, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_triplets(out, triplets);
}

} // namespace snack
