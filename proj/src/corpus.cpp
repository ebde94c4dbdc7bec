#include "snack/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "snack/error.hpp"

namespace snack {

namespace {

std::string_view strip_cr(std::string_view line)
{
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

bool parse_int(std::string_view s, int& out)
{
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

bool parse_size(std::string_view s, std::size_t& out)
{
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), last, out);
    return ec == std::errc() && ptr == last;
}

std::ifstream open_for_read(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return in;
}

// Decodes one UTF-8 code point starting at text[pos]; advances pos. Invalid
// bytes decode as themselves so tokenization never throws.
char32_t next_code_point(std::string_view text, std::size_t& pos)
{
    const auto b0 = static_cast<unsigned char>(text[pos]);
    std::size_t len = 1;
    char32_t cp = b0;
    if (b0 >= 0xF0 && b0 < 0xF8) {
        len = 4;
        cp = b0 & 0x07;
    } else if (b0 >= 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if (b0 >= 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    }
    if (len > 1) {
        if (pos + len > text.size()) {
            ++pos;
            return b0;
        }
        for (std::size_t k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(text[pos + k]);
            if ((b & 0xC0) != 0x80) {
                ++pos;
                return b0;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
    }
    pos += len;
    return cp;
}

bool is_unicode_space(char32_t cp)
{
    switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
        return true;
    default:
        return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_punctuation(char32_t cp)
{
    if (cp < 0x80) {
        const auto c = static_cast<unsigned char>(cp);
        return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
               (c >= 0x7B && c <= 0x7E);
    }
    return cp == 0xA1 || cp == 0xA7 || cp == 0xAB || cp == 0xB6 || cp == 0xB7 || cp == 0xBB ||
           cp == 0xBF || (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
           (cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x3008 && cp <= 0x3011) ||
           (cp >= 0xFE50 && cp <= 0xFE6B) || (cp >= 0xFF01 && cp <= 0xFF0F);
}

std::string strip_punctuation(std::string_view token)
{
    // Collect code point boundaries, then trim from both ends.
    std::vector<std::size_t> starts;
    std::vector<char32_t> cps;
    std::size_t pos = 0;
    while (pos < token.size()) {
        starts.push_back(pos);
        cps.push_back(next_code_point(token, pos));
    }
    starts.push_back(token.size());
    std::size_t lo = 0;
    std::size_t hi = cps.size();
    while (lo < hi && is_punctuation(cps[lo])) ++lo;
    while (hi > lo && is_punctuation(cps[hi - 1])) --hi;
    return std::string(token.substr(starts[lo], starts[hi] - starts[lo]));
}

} // namespace

Supercategory supercategory_from_code(char code)
{
    switch (code) {
    case 'P': return Supercategory::ProPaper;
    case 'H': return Supercategory::ProDryer;
    case 'O': return Supercategory::Other;
    case 'N': return Supercategory::Irrelevant;
    default: throw Error(std::string("unknown supercategory code '") + code + "'");
    }
}

char supercategory_code(Supercategory s)
{
    static constexpr char codes[] = {'P', 'H', 'O', 'N'};
    return codes[static_cast<std::size_t>(s)];
}

std::string_view supercategory_name(Supercategory s)
{
    static constexpr std::string_view names[] = {"ProPaper", "ProDryer", "Other", "Irrelevant"};
    return names[static_cast<std::size_t>(s)];
}

Taxonomy::Taxonomy(std::vector<NarrativeClass> classes) : classes_(std::move(classes))
{
    for (std::size_t pos = 0; pos < classes_.size(); ++pos) {
        const auto& c = classes_[pos];
        if (c.id < 1 || c.id > kMaxClassId)
            throw Error("taxonomy id " + std::to_string(c.id) + " out of range 1.." + std::to_string(kMaxClassId));
        if (slot_[c.id] != 0) throw Error("duplicate taxonomy id " + std::to_string(c.id));
        if (c.description.empty()) throw Error("empty description for taxonomy id " + std::to_string(c.id));
        slot_[c.id] = static_cast<int>(pos) + 1;
    }
}

bool Taxonomy::contains(int id) const
{
    return id >= 1 && id <= kMaxClassId && slot_[id] != 0;
}

const NarrativeClass& Taxonomy::at(int id) const
{
    if (!contains(id)) throw Error("unknown class_id " + std::to_string(id));
    return classes_[slot_[id] - 1];
}

Corpus::Corpus(std::vector<Excerpt> excerpts, Taxonomy taxonomy)
    : excerpts_(std::move(excerpts)), taxonomy_(std::move(taxonomy))
{
    for (std::size_t i = 0; i < excerpts_.size(); ++i) {
        if (excerpts_[i].index != i) throw Error("excerpt indices must be dense and ordered");
        if (!taxonomy_.contains(excerpts_[i].class_id))
            throw Error("unknown class_id " + std::to_string(excerpts_[i].class_id) + " for excerpt " +
                        std::to_string(i));
    }
}

std::vector<int> Corpus::labels() const
{
    std::vector<int> out;
    out.reserve(excerpts_.size());
    for (const auto& e : excerpts_) out.push_back(e.class_id);
    return out;
}

Taxonomy parse_taxonomy(std::istream& in, const std::string& name)
{
    std::vector<NarrativeClass> classes;
    std::unordered_set<int> seen;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = strip_cr(raw);
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string_view::npos) throw ParseError(name, line_no, "expected <id>\\t<code>\\t<description>");
        NarrativeClass c;
        if (!parse_int(line.substr(0, t1), c.id)) throw ParseError(name, line_no, "malformed class id");
        const auto code = line.substr(t1 + 1, t2 - t1 - 1);
        if (code.size() != 1) throw ParseError(name, line_no, "malformed supercategory code");
        try {
            c.supercategory = supercategory_from_code(code[0]);
        } catch (const Error& e) {
            throw ParseError(name, line_no, e.what());
        }
        c.description = std::string(line.substr(t2 + 1));
        if (c.id < 1 || c.id > Taxonomy::kMaxClassId)
            throw ParseError(name, line_no,
                             "taxonomy id " + std::to_string(c.id) + " out of range 1.." +
                                 std::to_string(Taxonomy::kMaxClassId));
        if (c.description.empty()) throw ParseError(name, line_no, "empty description");
        if (!seen.insert(c.id).second) throw ParseError(name, line_no, "duplicate taxonomy id " + std::to_string(c.id));
        classes.push_back(std::move(c));
    }
    return Taxonomy(std::move(classes));
}

Taxonomy load_taxonomy(const std::filesystem::path& path)
{
    auto in = open_for_read(path);
    return parse_taxonomy(in, path.string());
}

std::vector<Excerpt> parse_excerpts(std::istream& in, const Taxonomy& taxonomy, const std::string& name)
{
    std::vector<Excerpt> excerpts;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = strip_cr(raw);
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) throw ParseError(name, line_no, "expected <class_id>\\t<text>");
        Excerpt e;
        if (!parse_int(line.substr(0, tab), e.class_id)) throw ParseError(name, line_no, "malformed class_id");
        if (!taxonomy.contains(e.class_id))
            throw ParseError(name, line_no, "unknown class_id " + std::to_string(e.class_id));
        e.index = excerpts.size();
        e.text = std::string(line.substr(tab + 1));
        excerpts.push_back(std::move(e));
    }
    return excerpts;
}

Corpus load_corpus(const std::filesystem::path& excerpt_path, const std::filesystem::path& taxonomy_path)
{
    auto taxonomy = load_taxonomy(taxonomy_path);
    auto in = open_for_read(excerpt_path);
    auto excerpts = parse_excerpts(in, taxonomy, excerpt_path.string());
    return Corpus(std::move(excerpts), std::move(taxonomy));
}

void write_excerpts(std::ostream& out, const Corpus& corpus)
{
    for (const auto& e : corpus.excerpts()) out << e.class_id << '\t' << e.text << '\n';
}

void write_taxonomy(std::ostream& out, const Taxonomy& taxonomy)
{
    for (const auto& c : taxonomy.classes())
        out << c.id << '\t' << supercategory_code(c.supercategory) << '\t' << c.description << '\n';
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& excerpt_path,
                 const std::filesystem::path& taxonomy_path)
{
    std::ofstream ex(excerpt_path, std::ios::binary);
    std::ofstream tx(taxonomy_path, std::ios::binary);
    if (!ex || !tx) throw Error("cannot write corpus files");
    write_excerpts(ex, corpus);
    write_taxonomy(tx, corpus.taxonomy());
}

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        auto stripped = strip_punctuation(current);
        if (!stripped.empty()) tokens.push_back(std::move(stripped));
        current.clear();
    };
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t start = pos;
        const char32_t cp = next_code_point(text, pos);
        if (is_unicode_space(cp)) {
            flush();
            continue;
        }
        for (std::size_t k = start; k < pos; ++k) {
            char ch = text[k];
            if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
            current.push_back(ch);
        }
    }
    flush();
    return tokens;
}

CorpusStats corpus_stats(const Corpus& corpus)
{
    CorpusStats stats;
    std::array<std::unordered_set<std::string>, kSupercategoryCount> types;
    for (const auto& e : corpus.excerpts()) {
        const auto s = static_cast<std::size_t>(corpus.taxonomy().supercategory_of(e.class_id));
        auto tokens = tokenize(e.text);
        stats.per_supercategory[s].examples += 1;
        stats.per_supercategory[s].tokens += tokens.size();
        for (auto& t : tokens) types[s].insert(std::move(t));
    }
    for (std::size_t s = 0; s < kSupercategoryCount; ++s) {
        auto& st = stats.per_supercategory[s];
        st.word_types = types[s].size();
        st.avg_length = st.examples ? static_cast<double>(st.tokens) / static_cast<double>(st.examples) : 0.0;
        st.ttr = st.tokens ? static_cast<double>(st.word_types) / static_cast<double>(st.tokens) : 0.0;
    }
    return stats;
}

Matrix parse_matrix(std::istream& in, const std::string& name)
{
    std::string raw;
    if (!std::getline(in, raw)) throw ParseError(name, 1, "missing \"<rows> <cols>\" header");
    std::size_t rows = 0;
    std::size_t cols = 0;
    {
        std::istringstream header{std::string(strip_cr(raw))};
        std::string a, b, extra;
        if (!(header >> a >> b) || (header >> extra) || !parse_size(a, rows) || !parse_size(b, cols))
            throw ParseError(name, 1, "malformed header, expected \"<rows> <cols>\"");
    }
    Matrix m(rows, cols);
    std::size_t line_no = 1;
    for (std::size_t r = 0; r < rows; ++r) {
        if (!std::getline(in, raw))
            throw ParseError(name, line_no + 1,
                             "row-count mismatch: header declares " + std::to_string(rows) + " rows, file has " +
                                 std::to_string(r));
        ++line_no;
        const std::string_view line = strip_cr(raw);
        std::size_t c = 0;
        std::size_t pos = 0;
        while (pos < line.size()) {
            while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
            if (pos >= line.size()) break;
            std::size_t end = pos;
            while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
            if (c >= cols)
                throw ParseError(name, line_no, "dimension mismatch: row " + std::to_string(r) + " has more than " +
                                                    std::to_string(cols) + " values");
            double v = 0.0;
            const auto* last = line.data() + end;
            auto [ptr, ec] = std::from_chars(line.data() + pos, last, v);
            if (ec != std::errc() || ptr != last)
                throw ParseError(name, line_no, "malformed number '" + std::string(line.substr(pos, end - pos)) + "'");
            if (!std::isfinite(v))
                throw ParseError(name, line_no,
                                 "non-finite value at (" + std::to_string(r) + ", " + std::to_string(c) + ")");
            m(r, c++) = v;
            pos = end;
        }
        if (c != cols)
            throw ParseError(name, line_no, "dimension mismatch: row " + std::to_string(r) + " has " +
                                                std::to_string(c) + " values, expected " + std::to_string(cols));
    }
    while (std::getline(in, raw)) {
        ++line_no;
        if (!strip_cr(raw).empty())
            throw ParseError(name, line_no, "row-count mismatch: more than " + std::to_string(rows) + " rows");
    }
    return m;
}

InputEmbeddings parse_embeddings(std::istream& in, std::size_t expected_rows, const std::string& name)
{
    InputEmbeddings emb{parse_matrix(in, name)};
    if (emb.size() != expected_rows)
        throw Error(name + ": row-count mismatch: " + std::to_string(emb.size()) + " rows for " +
                    std::to_string(expected_rows) + " excerpts");
    return emb;
}

InputEmbeddings load_embeddings(const std::filesystem::path& path, const Corpus& corpus)
{
    auto in = open_for_read(path);
    return parse_embeddings(in, corpus.size(), path.string());
}

void write_matrix(std::ostream& out, const Matrix& m)
{
    out << m.rows() << ' ' << m.cols() << '\n';
    char buf[64];
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m(r, c));
            if (c) out << ' ';
            out.write(buf, ptr - buf);
        }
        out << '\n';
    }
}

Matrix load_matrix(const std::filesystem::path& path)
{
    auto in = open_for_read(path);
    return parse_matrix(in, path.string());
}

void save_matrix(const Matrix& m, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_matrix(out, m);
}

} // namespace snack
