#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace polarity::embed {

class EmbedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PoolingMode { Average, Max };

std::string_view to_string(PoolingMode mode);
std::optional<PoolingMode> parse_pooling(std::string_view text);

/// Immutable token -> D-dimensional vector map. Vectors live in one contiguous buffer.
class WordVectorTable {
public:
    WordVectorTable() = default;

    /// Builds a table from (token, vector) rows; later duplicates replace earlier ones.
    static WordVectorTable from_rows(std::size_t dim,
                                     std::vector<std::pair<std::string, std::vector<double>>> rows);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t vocab_size() const noexcept { return tokens_.size(); }
    bool empty() const noexcept { return tokens_.empty(); }
    std::size_t duplicate_count() const noexcept { return duplicates_; }

    std::optional<std::span<const double>> find(std::string_view token) const;
    std::span<const double> vector_at(std::size_t index) const;
    const std::string& token_at(std::size_t index) const { return tokens_[index]; }

    /// Text serialization with a "vocab dim" header, 17 significant digits per value.
    std::string to_text() const;

private:
    friend WordVectorTable parse_table(std::string_view contents);
    void insert(std::string token, std::span<const double> values);

    std::size_t dim_ = 0;
    std::vector<std::string> tokens_;
    std::vector<double> values_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t duplicates_ = 0;
};

struct SentenceVector {
    std::vector<double> values;
    std::size_t covered_tokens = 0;
    std::size_t total_tokens = 0;
};

WordVectorTable load_table(const std::filesystem::path& path);
WordVectorTable parse_table(std::string_view contents);

/// Standard-normal components, seeded; used to build desk-scale tables for synthetic corpora.
WordVectorTable make_random_table(std::span<const std::string> tokens, std::size_t dim, std::uint64_t seed);

SentenceVector embed_sentence(const WordVectorTable& table, std::span<const std::string> tokens,
                              PoolingMode mode);

/// Tokenizes the whole text and pools it into one vector.
SentenceVector embed_text(const WordVectorTable& table, std::string_view text, PoolingMode mode);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct AnalogyCandidate {
    std::string token;
    double similarity = 0.0;
};

/// Ranks every token w outside {a, b, c} by cos(v_a - v_b, v_c - v_w), best first.
std::vector<AnalogyCandidate> solve_analogy(const WordVectorTable& table, std::string_view a,
                                            std::string_view b, std::string_view c, std::size_t top_n);

}  // namespace polarity::embed
