#include "polarity/embed.hpp"

#include "polarity/fileio.hpp"
#include "polarity/textproc.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace polarity::embed {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) fields.push_back(line.substr(i, j - i));
        i = j;
    }
    return fields;
}

bool parse_integer(std::string_view s, long long& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_real(std::string_view s, double& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::string line_error(std::size_t line, const std::string& what) {
    return "vector table line " + std::to_string(line) + ": " + what;
}

}  // namespace

std::string_view to_string(PoolingMode mode) {
    return mode == PoolingMode::Max ? "max" : "average";
}

std::optional<PoolingMode> parse_pooling(std::string_view text) {
    if (text == "average" || text == "avg" || text == "mean") return PoolingMode::Average;
    if (text == "max") return PoolingMode::Max;
    return std::nullopt;
}

void WordVectorTable::insert(std::string token, std::span<const double> values) {
    if (auto it = index_.find(token); it != index_.end()) {
        std::copy(values.begin(), values.end(), values_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
        ++duplicates_;
        return;
    }
    index_.emplace(token, tokens_.size());
    tokens_.push_back(std::move(token));
    values_.insert(values_.end(), values.begin(), values.end());
}

WordVectorTable WordVectorTable::from_rows(std::size_t dim,
                                           std::vector<std::pair<std::string, std::vector<double>>> rows) {
    if (dim == 0) {
        throw EmbedError("vector dimension must be positive");
    }
    WordVectorTable table;
    table.dim_ = dim;
    for (auto& [token, values] : rows) {
        if (values.size() != dim) {
            throw EmbedError("vector for '" + token + "' has " + std::to_string(values.size()) +
                             " components, expected " + std::to_string(dim));
        }
        if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
            throw EmbedError("vector for '" + token + "' has a non-finite component");
        }
        table.insert(std::move(token), values);
    }
    return table;
}

std::optional<std::span<const double>> WordVectorTable::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return vector_at(it->second);
}

std::span<const double> WordVectorTable::vector_at(std::size_t index) const {
    return std::span<const double>(values_).subspan(index * dim_, dim_);
}

std::string WordVectorTable::to_text() const {
    std::string out = std::to_string(vocab_size()) + " " + std::to_string(dim_) + "\n";
    char buf[32];
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        out += tokens_[i];
        for (double v : vector_at(i)) {
            std::snprintf(buf, sizeof buf, " %.17g", v);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

WordVectorTable parse_table(std::string_view contents) {
    WordVectorTable table;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool first_content_line = true;
    std::vector<double> values;

    while (pos < contents.size()) {
        std::size_t end = contents.find('\n', pos);
        if (end == std::string_view::npos) end = contents.size();
        std::string_view line = contents.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        auto fields = split_fields(line);
        if (fields.empty()) continue;

        if (first_content_line) {
            first_content_line = false;
            long long a = 0;
            long long b = 0;
            if (fields.size() == 2 && parse_integer(fields[0], a) && parse_integer(fields[1], b)) {
                continue;  // "vocab_size dim" header
            }
        }
        if (fields.size() < 2) {
            throw EmbedError(line_error(line_no, "expected a token followed by values"));
        }
        const std::size_t dim = fields.size() - 1;
        if (table.dim_ == 0) {
            table.dim_ = dim;
        } else if (dim != table.dim_) {
            throw EmbedError(line_error(line_no, "has " + std::to_string(dim) + " values, expected " +
                                                     std::to_string(table.dim_)));
        }
        values.assign(dim, 0.0);
        for (std::size_t k = 0; k < dim; ++k) {
            if (!parse_real(fields[k + 1], values[k])) {
                throw EmbedError(line_error(line_no, "cannot parse value '" + std::string(fields[k + 1]) + "'"));
            }
            if (!std::isfinite(values[k])) {
                throw EmbedError(line_error(line_no, "non-finite value"));
            }
        }
        table.insert(std::string(fields[0]), values);
    }
    if (table.tokens_.empty()) {
        throw EmbedError("vector table is empty");
    }
    return table;
}

WordVectorTable load_table(const std::filesystem::path& path) {
    std::string contents;
    try {
        contents = read_file(path);
    } catch (const IoError& e) {
        throw EmbedError(e.what());
    }
    try {
        return parse_table(contents);
    } catch (const EmbedError& e) {
        throw EmbedError(path.string() + ": " + e.what());
    }
}

WordVectorTable make_random_table(std::span<const std::string> tokens, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    rows.reserve(tokens.size());
    for (const auto& tok : tokens) {
        std::vector<double> v(dim);
        for (auto& x : v) x = normal(rng);
        rows.emplace_back(tok, std::move(v));
    }
    return WordVectorTable::from_rows(dim, std::move(rows));
}

SentenceVector embed_sentence(const WordVectorTable& table, std::span<const std::string> tokens,
                              PoolingMode mode) {
    if (table.empty()) {
        throw EmbedError("cannot embed with an empty vector table");
    }
    SentenceVector out;
    out.total_tokens = tokens.size();
    const std::size_t dim = table.dim();
    out.values.assign(dim, mode == PoolingMode::Max ? -std::numeric_limits<double>::infinity() : 0.0);

    for (const auto& tok : tokens) {
        auto vec = table.find(tok);
        if (!vec) continue;
        ++out.covered_tokens;
        for (std::size_t k = 0; k < dim; ++k) {
            if (mode == PoolingMode::Max) {
                out.values[k] = std::max(out.values[k], (*vec)[k]);
            } else {
                out.values[k] += (*vec)[k];
            }
        }
    }
    if (out.covered_tokens == 0) {
        std::fill(out.values.begin(), out.values.end(), 0.0);
    } else if (mode == PoolingMode::Average) {
        const auto n = static_cast<double>(out.covered_tokens);
        for (auto& v : out.values) v /= n;
    }
    return out;
}

SentenceVector embed_text(const WordVectorTable& table, std::string_view text, PoolingMode mode) {
    const auto tokens = textproc::tokenize_words(text);
    return embed_sentence(table, tokens, mode);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw EmbedError("cosine similarity of vectors with dimensions " + std::to_string(u.size()) + " and " +
                         std::to_string(v.size()));
    }
    double dot = 0.0;
    double uu = 0.0;
    double vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) {
        throw EmbedError("cosine similarity is undefined for a zero vector");
    }
    return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<AnalogyCandidate> solve_analogy(const WordVectorTable& table, std::string_view a,
                                            std::string_view b, std::string_view c, std::size_t top_n) {
    if (top_n == 0) {
        throw EmbedError("top_n must be at least 1");
    }
    auto lookup = [&](std::string_view tok) {
        auto v = table.find(tok);
        if (!v) throw EmbedError("token not in vocabulary: '" + std::string(tok) + "'");
        return *v;
    };
    const auto va = lookup(a);
    const auto vb = lookup(b);
    const auto vc = lookup(c);
    const std::size_t dim = table.dim();

    std::vector<double> target(dim);
    for (std::size_t k = 0; k < dim; ++k) target[k] = va[k] - vb[k];

    std::vector<AnalogyCandidate> ranked;
    std::vector<double> diff(dim);
    for (std::size_t i = 0; i < table.vocab_size(); ++i) {
        const auto& tok = table.token_at(i);
        if (tok == a || tok == b || tok == c) continue;
        const auto vw = table.vector_at(i);
        bool zero = true;
        for (std::size_t k = 0; k < dim; ++k) {
            diff[k] = vc[k] - vw[k];
            zero = zero && diff[k] == 0.0;
        }
        if (zero) continue;  // w coincides with c; angle undefined
        ranked.push_back({tok, cosine_similarity(target, diff)});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& x, const auto& y) { return x.similarity > y.similarity; });
    if (ranked.size() > top_n) ranked.resize(top_n);
    return ranked;
}

}  // namespace polarity::embed
