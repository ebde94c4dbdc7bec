#ifndef SNACK_METRICS_HPP
#define SNACK_METRICS_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snack/matrix.hpp"
#include "snack/worker.hpp"

namespace snack {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation over repeats
};

MeanStd mean_std(std::span<const double> values);

// Triplet generalisation ratio: the fraction of ground-truth triplets
// (label(i) = label(j) != label(k), drawn uniformly from all such triplets)
// with ||y_i - y_j|| < ||y_i - y_k||. Repeat r uses seed stream r.
double triplet_generalization_once(const Matrix& y, std::span<const int> labels, std::size_t n_samples, Rng& rng);
MeanStd triplet_generalization_ratio(const Matrix& y, std::span<const int> labels, std::uint64_t seed,
                                     std::size_t n_samples = 1000, std::size_t repeats = 10);

struct KnnOptions {
    double train_frac = 0.7;
    std::size_t repeats = 10;
    std::size_t k = 5;
    std::size_t max_split_attempts = 100;
};

// k-NN majority vote (ties go to the label of the nearest tied voter),
// trained on a seeded split and scored on the held-out rest.
MeanStd knn_generalization_ratio(const Matrix& y, std::span<const int> labels, std::uint64_t seed,
                                 const KnnOptions& options = {});

struct SnrResult {
    double value = 0.0;
    std::size_t pairs = 0;    // ordered same-class pairs that were scored
    std::size_t skipped = 0;  // pairs dropped because var(y_i) == 0
};

// Mean over ordered same-class pairs (i != j) of var(y_i - y_j) / var(y_i),
// variances taken over the coordinates.
SnrResult snr_distance(const Matrix& y, std::span<const int> labels);

struct ClassPrecisionRecall {
    int class_id = 0;
    double precision = 0.0;  // percent
    double recall = 0.0;     // percent
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct AnnotationStats {
    std::size_t agreements = 0;
    std::size_t disagreements = 0;
    double precision = 0.0;  // macro, percent
    double recall = 0.0;
    double weighted_precision = 0.0;  // weighted by per-class excerpt counts
    double weighted_recall = 0.0;
    std::vector<ClassPrecisionRecall> per_class;  // classes that anchored a response, ascending id
};

AnnotationStats annotation_stats(std::span<const Response> responses, std::span<const int> labels);

struct MetricsReport {
    std::optional<MeanStd> tgr;
    std::optional<MeanStd> knngr;
    std::optional<SnrResult> snr;
    std::optional<AnnotationStats> annotations;
    std::optional<double> sentinel_agreement;
};

// Flat "key value" lines, a JSON document, and the per-class CSV
// "class_id,precision,recall".
std::string report_to_text(const MetricsReport& report);
std::string report_to_json(const MetricsReport& report);
void write_per_class_csv(std::ostream& out, const AnnotationStats& stats);

} // namespace snack

#endif
