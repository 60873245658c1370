#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace polarity::textproc {

struct SentenceSeq {
    std::vector<std::string> sentences;
    std::size_t source_len = 0;  // bytes in the source text
};

/// Abbreviations (without the trailing period) after which a period does not end a sentence.
/// Matching is case-insensitive.
class AbbreviationSet {
public:
    AbbreviationSet() = default;
    explicit AbbreviationSet(std::vector<std::string> entries);

    static const AbbreviationSet& defaults();
    /// One abbreviation per line, no trailing period; blank lines and '#' comments ignored.
    static AbbreviationSet load(const std::filesystem::path& path);

    bool contains(std::string_view word) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::set<std::string, std::less<>> entries_;
};

/// Splits on '.', '!' or '?' followed by whitespace or end of input. A lone period after a
/// listed abbreviation or a single uppercase letter is not a boundary. Sentences are trimmed.
SentenceSeq split_sentences(std::string_view text,
                            const AbbreviationSet& abbreviations = AbbreviationSet::defaults());

/// Lowercases, strips edge punctuation from each whitespace-delimited chunk (keeping a leading
/// '#' or '@'), and drops chunks that end up empty.
std::vector<std::string> tokenize_words(std::string_view sentence);

}  // namespace polarity::textproc
