#include "snack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "snack/error.hpp"

namespace snack {

MeanStd mean_std(std::span<const double> values)
{
    if (values.empty()) return {};
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

namespace {

std::map<int, std::vector<std::size_t>> members_by_class(std::span<const int> labels)
{
    std::map<int, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
    return out;
}

void check_shapes(const Matrix& y, std::span<const int> labels)
{
    if (y.rows() != labels.size()) throw Error("embedding rows do not match the label count");
}

} // namespace

double triplet_generalization_once(const Matrix& y, std::span<const int> labels, std::size_t n_samples, Rng& rng)
{
    check_shapes(y, labels);
    const std::size_t n = labels.size();
    const auto members = members_by_class(labels);
    // Anchor i appears in (c_i - 1)(N - c_i) ground-truth triplets.
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = static_cast<double>(members.at(labels[i]).size());
        weights[i] = (c - 1.0) * (static_cast<double>(n) - c);
    }
    if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; }))
        throw Error("no ground-truth triplet exists for these labels");
    std::discrete_distribution<std::size_t> pick_anchor(weights.begin(), weights.end());

    std::vector<std::size_t> others;
    std::size_t satisfied = 0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const std::size_t i = pick_anchor(rng);
        const auto& same = members.at(labels[i]);
        std::size_t j = i;
        while (j == i) j = same[std::uniform_int_distribution<std::size_t>(0, same.size() - 1)(rng)];
        std::size_t k = i;
        while (labels[k] == labels[i]) k = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        if (squared_distance(y.row(i), y.row(j)) < squared_distance(y.row(i), y.row(k))) ++satisfied;
    }
    return static_cast<double>(satisfied) / static_cast<double>(n_samples);
}

MeanStd triplet_generalization_ratio(const Matrix& y, std::span<const int> labels, std::uint64_t seed,
                                     std::size_t n_samples, std::size_t repeats)
{
    if (n_samples == 0 || repeats == 0) throw Error("TGR needs at least one sample and one repeat");
    std::vector<double> ratios;
    for (std::size_t r = 0; r < repeats; ++r) {
        auto rng = make_rng(seed, r);
        ratios.push_back(triplet_generalization_once(y, labels, n_samples, rng));
    }
    return mean_std(ratios);
}

MeanStd knn_generalization_ratio(const Matrix& y, std::span<const int> labels, std::uint64_t seed,
                                 const KnnOptions& options)
{
    check_shapes(y, labels);
    const std::size_t n = labels.size();
    const auto n_train = static_cast<std::size_t>(std::llround(options.train_frac * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) throw Error("KNNGR split leaves an empty train or test set");
    if (options.k == 0 || options.repeats == 0) throw Error("KNNGR needs k >= 1 and at least one repeat");
    const std::size_t n_classes = members_by_class(labels).size();

    std::vector<double> accuracies;
    std::vector<std::size_t> order(n);
    for (std::size_t r = 0; r < options.repeats; ++r) {
        auto rng = make_rng(seed, r);
        bool covered = false;
        for (std::size_t attempt = 0; attempt < options.max_split_attempts && !covered; ++attempt) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            std::vector<int> seen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
            for (auto& idx : seen) idx = labels[static_cast<std::size_t>(idx)];
            std::sort(seen.begin(), seen.end());
            covered = static_cast<std::size_t>(std::unique(seen.begin(), seen.end()) - seen.begin()) == n_classes;
        }
        if (!covered)
            throw Error("KNNGR could not draw a train split covering every class in " +
                        std::to_string(options.max_split_attempts) + " attempts");

        const std::span<const std::size_t> train(order.data(), n_train);
        const std::size_t k = std::min(options.k, n_train);
        std::size_t correct = 0;
        std::vector<std::pair<double, std::size_t>> dists(n_train);
        for (std::size_t t = n_train; t < n; ++t) {
            const std::size_t q = order[t];
            for (std::size_t m = 0; m < n_train; ++m) dists[m] = {squared_distance(y.row(q), y.row(train[m])), train[m]};
            std::partial_sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k), dists.end());
            std::map<int, std::size_t> votes;
            std::size_t top = 0;
            for (std::size_t m = 0; m < k; ++m) top = std::max(top, ++votes[labels[dists[m].second]]);
            int predicted = labels[dists[0].second];
            for (std::size_t m = 0; m < k; ++m) {
                if (votes[labels[dists[m].second]] == top) {
                    predicted = labels[dists[m].second];
                    break;
                }
            }
            if (predicted == labels[q]) ++correct;
        }
        accuracies.push_back(static_cast<double>(correct) / static_cast<double>(n - n_train));
    }
    return mean_std(accuracies);
}

SnrResult snr_distance(const Matrix& y, std::span<const int> labels)
{
    check_shapes(y, labels);
    if (y.cols() < 2) throw Error("SNR distance needs at least 2 embedding dimensions");
    const std::size_t d = y.cols();
    auto variance = [d](auto&& value_at) {
        double mean = 0.0;
        for (std::size_t c = 0; c < d; ++c) mean += value_at(c);
        mean /= static_cast<double>(d);
        double ss = 0.0;
        for (std::size_t c = 0; c < d; ++c) ss += (value_at(c) - mean) * (value_at(c) - mean);
        return ss / static_cast<double>(d);
    };

    SnrResult out;
    double sum = 0.0;
    bool any_pair = false;
    for (const auto& [label, members] : members_by_class(labels)) {
        for (auto i : members) {
            const double var_i = variance([&](std::size_t c) { return y(i, c); });
            for (auto j : members) {
                if (i == j) continue;
                any_pair = true;
                if (var_i == 0.0) {
                    ++out.skipped;
                    continue;
                }
                sum += variance([&](std::size_t c) { return y(i, c) - y(j, c); }) / var_i;
                ++out.pairs;
            }
        }
    }
    if (!any_pair) throw Error("SNR distance needs at least one same-class pair");
    out.value = out.pairs ? sum / static_cast<double>(out.pairs) : 0.0;
    return out;
}

AnnotationStats annotation_stats(std::span<const Response> responses, std::span<const int> labels)
{
    struct Counts {
        std::size_t tp = 0, fp = 0, fn = 0;
    };
    std::map<int, Counts> per_class;
    AnnotationStats out;
    for (const auto& r : responses) {
        const auto& grid = r.grid;
        validate_grid(grid, labels.size());
        validate_selection(r.selected, grid.candidates.size());
        const int anchor_label = labels[grid.anchor];
        auto& counts = per_class[anchor_label];
        std::vector<bool> chosen(grid.candidates.size(), false);
        for (auto pos : r.selected) chosen[pos] = true;
        for (std::size_t pos = 0; pos < grid.candidates.size(); ++pos) {
            const bool same = (grid.sentinel_slot && *grid.sentinel_slot == pos) ||
                              labels[grid.candidates[pos]] == anchor_label;
            if (chosen[pos]) {
                if (same) {
                    ++counts.tp;
                    ++out.agreements;
                } else {
                    ++counts.fp;
                    ++out.disagreements;
                }
            } else if (same) {
                ++counts.fn;
            }
        }
    }

    std::map<int, std::size_t> class_sizes;
    for (int l : labels) ++class_sizes[l];
    double wsum = 0.0;
    for (const auto& [id, c] : per_class) {
        ClassPrecisionRecall pr{id};
        pr.tp = c.tp;
        pr.fp = c.fp;
        pr.fn = c.fn;
        pr.precision = c.tp + c.fp ? 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
        pr.recall = c.tp + c.fn ? 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
        const double w = static_cast<double>(class_sizes[id]);
        out.precision += pr.precision;
        out.recall += pr.recall;
        out.weighted_precision += w * pr.precision;
        out.weighted_recall += w * pr.recall;
        wsum += w;
        out.per_class.push_back(pr);
    }
    if (!out.per_class.empty()) {
        const auto classes = static_cast<double>(out.per_class.size());
        out.precision /= classes;
        out.recall /= classes;
        out.weighted_precision /= wsum;
        out.weighted_recall /= wsum;
    }
    return out;
}

namespace {

nlohmann::ordered_json report_json(const MetricsReport& report)
{
    nlohmann::ordered_json j;
    if (report.tgr) j["tgr"] = {{"mean", report.tgr->mean}, {"std", report.tgr->std}};
    if (report.knngr) j["knngr"] = {{"mean", report.knngr->mean}, {"std", report.knngr->std}};
    if (report.snr)
        j["snr"] = {{"value", report.snr->value},
                    {"pairs", report.snr->pairs},
                    {"skipped", report.snr->skipped},
                    {"pair_set", "ordered same-class pairs, i != j"}};
    if (report.annotations) {
        const auto& a = *report.annotations;
        auto per_class = nlohmann::ordered_json::array();
        for (const auto& c : a.per_class)
            per_class.push_back({{"class_id", c.class_id}, {"precision", c.precision}, {"recall", c.recall}});
        j["annotations"] = {{"agreements", a.agreements},
                            {"disagreements", a.disagreements},
                            {"precision", a.precision},
                            {"recall", a.recall},
                            {"weighted_precision", a.weighted_precision},
                            {"weighted_recall", a.weighted_recall},
                            {"per_class", per_class}};
    }
    if (report.sentinel_agreement) j["sentinel_agreement"] = *report.sentinel_agreement;
    return j;
}

} // namespace

std::string report_to_json(const MetricsReport& report)
{
    return report_json(report).dump(2);
}

std::string report_to_text(const MetricsReport& report)
{
    std::ostringstream out;
    out.precision(6);
    out << std::fixed;
    if (report.tgr) out << "tgr_mean " << report.tgr->mean << "\ntgr_std " << report.tgr->std << '\n';
    if (report.knngr) out << "knngr_mean " << report.knngr->mean << "\nknngr_std " << report.knngr->std << '\n';
    if (report.snr) out << "snr " << report.snr->value << "\nsnr_pairs " << report.snr->pairs << '\n';
    if (report.annotations) {
        const auto& a = *report.annotations;
        out << "agreements " << a.agreements << "\ndisagreements " << a.disagreements << "\nprecision "
            << a.precision << "\nrecall " << a.recall << "\nweighted_precision " << a.weighted_precision
            << "\nweighted_recall " << a.weighted_recall << '\n';
    }
    if (report.sentinel_agreement) out << "sentinel_agreement " << *report.sentinel_agreement << '\n';
    return out.str();
}

void write_per_class_csv(std::ostream& out, const AnnotationStats& stats)
{
    out << "class_id,precision,recall\n";
    for (const auto& c : stats.per_class) out << c.class_id << ',' << c.precision << ',' << c.recall << '\n';
}

} // namespace snack
