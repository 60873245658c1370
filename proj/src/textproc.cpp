#include "polarity/textproc.hpp"

#include "polarity/fileio.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace polarity::textproc {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

// Closing characters allowed between terminal punctuation and the following whitespace.
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Multi-byte punctuation commonly found in scraped text: curly quotes, dashes, ellipsis.
constexpr std::array<std::string_view, 8> kUtf8Punct{
    "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99",
    "\xE2\x80\x93", "\xE2\x80\x94", "\xE2\x80\xA6", "\xC2\xAB"};

std::size_t leading_punct_len(std::string_view s) {
    if (s.empty()) return 0;
    unsigned char c = static_cast<unsigned char>(s.front());
    if (c < 0x80) {
        return (std::ispunct(c) && c != '#' && c != '@') ? 1 : 0;
    }
    for (auto p : kUtf8Punct) {
        if (s.starts_with(p)) return p.size();
    }
    return s.starts_with("\xC2\xBB") ? 2 : 0;
}

std::size_t trailing_punct_len(std::string_view s) {
    if (s.empty()) return 0;
    unsigned char c = static_cast<unsigned char>(s.back());
    if (c < 0x80) {
        return std::ispunct(c) ? 1 : 0;
    }
    for (auto p : kUtf8Punct) {
        if (s.ends_with(p)) return p.size();
    }
    return s.ends_with("\xC2\xBB") ? 2 : 0;
}

}  // namespace

AbbreviationSet::AbbreviationSet(std::vector<std::string> entries) {
    for (auto& e : entries) {
        entries_.insert(to_lower(e));
    }
}

const AbbreviationSet& AbbreviationSet::defaults() {
    static const AbbreviationSet set({"Mr", "Mrs", "Ms", "Dr", "Prof", "Sen", "Rep", "Gov", "U.S", "St",
                                      "vs", "etc", "e.g", "i.e"});
    return set;
}

AbbreviationSet AbbreviationSet::load(const std::filesystem::path& path) {
    const std::string contents = read_file(path);
    std::vector<std::string> entries;
    std::size_t pos = 0;
    while (pos <= contents.size()) {
        std::size_t end = contents.find('\n', pos);
        if (end == std::string::npos) end = contents.size();
        std::string_view line = trim(std::string_view(contents).substr(pos, end - pos));
        pos = end + 1;
        if (line.empty() || line.front() == '#') continue;
        while (!line.empty() && line.back() == '.') line.remove_suffix(1);
        if (!line.empty()) entries.emplace_back(line);
    }
    return AbbreviationSet(std::move(entries));
}

bool AbbreviationSet::contains(std::string_view word) const {
    return entries_.find(to_lower(word)) != entries_.end();
}

SentenceSeq split_sentences(std::string_view text, const AbbreviationSet& abbreviations) {
    SentenceSeq seq;
    seq.source_len = text.size();

    std::size_t start = 0;
    std::size_t i = 0;
    auto emit = [&](std::size_t end) {
        auto piece = trim(text.substr(start, end - start));
        if (!piece.empty()) {
            seq.sentences.emplace_back(piece);
        }
        start = end;
    };

    while (i < text.size()) {
        if (!is_terminal(text[i])) {
            ++i;
            continue;
        }
        const std::size_t run_begin = i;
        while (i < text.size() && is_terminal(text[i])) ++i;
        const std::size_t run_end = i;
        while (i < text.size() && is_closer(text[i])) ++i;
        if (i < text.size() && !is_space(text[i])) {
            continue;
        }

        if (run_end - run_begin == 1 && text[run_begin] == '.') {
            std::size_t w = run_begin;
            while (w > start && !is_space(text[w - 1])) --w;
            std::string_view word = text.substr(w, run_begin - w);
            while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) {
                word.remove_prefix(1);
            }
            const bool single_initial =
                word.size() == 1 && std::isupper(static_cast<unsigned char>(word.front()));
            if (single_initial || abbreviations.contains(word)) {
                continue;
            }
        }
        emit(i);
    }
    emit(text.size());
    return seq;
}

std::vector<std::string> tokenize_words(std::string_view sentence) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < sentence.size()) {
        while (i < sentence.size() && is_space(sentence[i])) ++i;
        std::size_t j = i;
        while (j < sentence.size() && !is_space(sentence[j])) ++j;
        std::string_view chunk = sentence.substr(i, j - i);
        i = j;

        while (std::size_t n = leading_punct_len(chunk)) chunk.remove_prefix(n);
        while (std::size_t n = trailing_punct_len(chunk)) chunk.remove_suffix(n);
        if (!chunk.empty()) {
            tokens.push_back(to_lower(chunk));
        }
    }
    return tokens;
}

}  // namespace polarity::textproc
