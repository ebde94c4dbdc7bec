#ifndef SNACK_SYNTHETIC_HPP
#define SNACK_SYNTHETIC_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "snack/corpus.hpp"

namespace snack {

// Benchmark corpus: 169 / 92 / 49 / 290 excerpts over 15 / 8 / 7 / 1 classes
// in the four supercategories, plus two empty supercategory-only ids (32, 33).
// Each class gets a Gaussian centre in `dim` dimensions; excerpts scatter around it.
struct SyntheticCorpusOptions {
    std::size_t dim = 64;
    double center_scale = 1.0;
    double noise = 1.0;
    std::uint64_t seed = 0;
    std::array<std::size_t, kSupercategoryCount> examples{169, 92, 49, 290};
    std::array<std::size_t, kSupercategoryCount> classes{15, 8, 7, 1};
};

struct SyntheticCorpus {
    Corpus corpus;
    InputEmbeddings embeddings;
};

// Per-class sizes: each supercategory's count split as evenly as possible,
// remainders to the lower ids.
std::vector<std::size_t> synthetic_class_sizes(const SyntheticCorpusOptions& options);

SyntheticCorpus make_synthetic_corpus(const SyntheticCorpusOptions& options);

} // namespace snack

#endif
