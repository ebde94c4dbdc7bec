#include "snack/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "snack/error.hpp"
#include "snack/random.hpp"

namespace snack {

namespace {

enum Stream : std::uint64_t { kCenters = 1, kNoise = 2, kOrder = 3 };

} // namespace

std::vector<std::size_t> synthetic_class_sizes(const SyntheticCorpusOptions& options)
{
    std::vector<std::size_t> sizes;
    for (std::size_t s = 0; s < kSupercategoryCount; ++s) {
        const std::size_t classes = options.classes[s];
        if (classes == 0) {
            if (options.examples[s] != 0) throw Error("examples assigned to a supercategory without classes");
            continue;
        }
        for (std::size_t c = 0; c < classes; ++c)
            sizes.push_back(options.examples[s] / classes + (c < options.examples[s] % classes ? 1 : 0));
    }
    return sizes;
}

SyntheticCorpus make_synthetic_corpus(const SyntheticCorpusOptions& options)
{
    const auto sizes = synthetic_class_sizes(options);
    if (sizes.size() + 2 > static_cast<std::size_t>(Taxonomy::kMaxClassId))
        throw Error("too many synthetic classes for the taxonomy id range");

    std::vector<NarrativeClass> classes;
    int id = 1;
    for (std::size_t s = 0; s < kSupercategoryCount; ++s) {
        for (std::size_t c = 0; c < options.classes[s]; ++c, ++id)
            classes.push_back({id, static_cast<Supercategory>(s), "synthetic narrative " + std::to_string(id)});
    }
    // Supercategory-only ids with no excerpts.
    classes.push_back({id, Supercategory::ProDryer, "synthetic narrative " + std::to_string(id)});
    ++id;
    classes.push_back({id, Supercategory::Other, "synthetic narrative " + std::to_string(id)});
    Taxonomy taxonomy(std::move(classes));

    std::vector<int> labels;
    for (std::size_t c = 0; c < sizes.size(); ++c) labels.insert(labels.end(), sizes[c], static_cast<int>(c + 1));
    auto order_rng = make_rng(options.seed, kOrder);
    std::shuffle(labels.begin(), labels.end(), order_rng);

    auto center_rng = make_rng(options.seed, kCenters);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix centers(sizes.size(), options.dim);
    for (auto& v : centers.values()) v = normal(center_rng) * options.center_scale;

    auto noise_rng = make_rng(options.seed, kNoise);
    Matrix x(labels.size(), options.dim);
    std::vector<Excerpt> excerpts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i] - 1);
        for (std::size_t k = 0; k < options.dim; ++k) x(i, k) = centers(c, k) + options.noise * normal(noise_rng);
        excerpts.push_back({i, "synthetic excerpt " + std::to_string(i) + " about narrative " + std::to_string(labels[i]),
                            labels[i]});
    }
    return {Corpus(std::move(excerpts), std::move(taxonomy)), InputEmbeddings{std::move(x)}};
}

} // namespace snack
