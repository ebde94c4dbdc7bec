#ifndef SNACK_CORPUS_HPP
#define SNACK_CORPUS_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "snack/matrix.hpp"

namespace snack {

enum class Supercategory { ProPaper = 0, ProDryer = 1, Other = 2, Irrelevant = 3 };

inline constexpr std::size_t kSupercategoryCount = 4;

// Taxonomy files use one-letter codes: P, H, O, N.
Supercategory supercategory_from_code(char code);
char supercategory_code(Supercategory s);
std::string_view supercategory_name(Supercategory s);

struct NarrativeClass {
    int id = 0;
    Supercategory supercategory = Supercategory::Other;
    std::string description;
};

class Taxonomy {
public:
    static constexpr int kMaxClassId = 33;

    Taxonomy() = default;
    // Throws Error on duplicate/out-of-range ids or empty descriptions.
    explicit Taxonomy(std::vector<NarrativeClass> classes);

    const std::vector<NarrativeClass>& classes() const { return classes_; }
    bool contains(int id) const;
    const NarrativeClass& at(int id) const;
    Supercategory supercategory_of(int id) const { return at(id).supercategory; }

private:
    std::vector<NarrativeClass> classes_;
    std::array<int, kMaxClassId + 1> slot_{};  // id -> position + 1, 0 if absent
};

struct Excerpt {
    std::size_t index = 0;
    std::string text;
    int class_id = 0;
};

class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<Excerpt> excerpts, Taxonomy taxonomy);

    std::size_t size() const { return excerpts_.size(); }
    const std::vector<Excerpt>& excerpts() const { return excerpts_; }
    const Excerpt& operator[](std::size_t i) const { return excerpts_[i]; }
    const Taxonomy& taxonomy() const { return taxonomy_; }

    // Class id per excerpt, indexed by excerpt index.
    std::vector<int> labels() const;

private:
    std::vector<Excerpt> excerpts_;
    Taxonomy taxonomy_;
};

Taxonomy load_taxonomy(const std::filesystem::path& path);
Taxonomy parse_taxonomy(std::istream& in, const std::string& name = "<taxonomy>");

Corpus load_corpus(const std::filesystem::path& excerpt_path, const std::filesystem::path& taxonomy_path);
std::vector<Excerpt> parse_excerpts(std::istream& in, const Taxonomy& taxonomy,
                                    const std::string& name = "<excerpts>");

void write_excerpts(std::ostream& out, const Corpus& corpus);
void write_taxonomy(std::ostream& out, const Taxonomy& taxonomy);
void save_corpus(const Corpus& corpus, const std::filesystem::path& excerpt_path,
                 const std::filesystem::path& taxonomy_path);

// Lowercase (ASCII), split on Unicode whitespace, strip leading and trailing
// punctuation. Tokens that are pure punctuation vanish.
std::vector<std::string> tokenize(std::string_view text);

struct SupercategoryStats {
    double avg_length = 0.0;
    std::size_t word_types = 0;
    double ttr = 0.0;
    std::size_t examples = 0;
    std::size_t tokens = 0;
};

struct CorpusStats {
    std::array<SupercategoryStats, kSupercategoryCount> per_supercategory{};

    const SupercategoryStats& operator[](Supercategory s) const
    {
        return per_supercategory[static_cast<std::size_t>(s)];
    }
};

CorpusStats corpus_stats(const Corpus& corpus);

// Machine-kernel input: one row per excerpt.
struct InputEmbeddings {
    Matrix matrix;

    std::size_t size() const { return matrix.rows(); }
    std::size_t dim() const { return matrix.cols(); }
};

// Reads "<N> <D>" followed by N rows of D floats. Row count must equal the
// corpus size.
InputEmbeddings load_embeddings(const std::filesystem::path& path, const Corpus& corpus);
InputEmbeddings parse_embeddings(std::istream& in, std::size_t expected_rows,
                                 const std::string& name = "<embeddings>");

// Shared "<N> <D>" matrix text format, also used for embedding snapshots.
Matrix parse_matrix(std::istream& in, const std::string& name);
void write_matrix(std::ostream& out, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);
void save_matrix(const Matrix& m, const std::filesystem::path& path);

} // namespace snack

#endif
