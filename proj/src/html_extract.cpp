#include "polarity/html_extract.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <vector>

namespace polarity::service {

namespace {

constexpr std::array<std::string_view, 10> kSkippedElements{
    "script", "style", "nav", "header", "footer", "aside", "head", "noscript", "template", "svg"};

// Elements whose content is raw text and must be skipped without tag parsing.
constexpr std::array<std::string_view, 3> kRawTextElements{"script", "style", "textarea"};

constexpr std::array<std::string_view, 14> kInlineElements{
    "a", "b", "i", "em", "strong", "span", "small", "abbr", "cite", "code", "q", "sub", "sup", "u"};

// Elements that implicitly close an open paragraph.
constexpr std::array<std::string_view, 17> kBlockElements{
    "p", "div", "section", "article", "main", "h1", "h2", "h3", "h4", "h5", "h6",
    "ul", "ol", "li", "table", "blockquote", "pre"};

template <std::size_t N>
bool in(const std::array<std::string_view, N>& set, std::string_view name) {
    return std::find(set.begin(), set.end(), name) != set.end();
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

struct NamedEntity {
    std::string_view name;
    std::uint32_t codepoint;
};

constexpr std::array<NamedEntity, 14> kEntities{{{"amp", '&'},
                                                 {"lt", '<'},
                                                 {"gt", '>'},
                                                 {"quot", '"'},
                                                 {"apos", '\''},
                                                 {"nbsp", ' '},
                                                 {"mdash", 0x2014},
                                                 {"ndash", 0x2013},
                                                 {"hellip", 0x2026},
                                                 {"lsquo", 0x2018},
                                                 {"rsquo", 0x2019},
                                                 {"ldquo", 0x201C},
                                                 {"rdquo", 0x201D},
                                                 {"copy", 0xA9}}};

std::string decode_entities(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '&') {
            out += text[i++];
            continue;
        }
        const auto semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out += text[i++];
            continue;
        }
        std::string_view body = text.substr(i + 1, semi - i - 1);
        bool decoded = false;
        if (!body.empty() && body.front() == '#') {
            std::uint32_t cp = 0;
            std::string_view digits = body.substr(1);
            int base = 10;
            if (!digits.empty() && (digits.front() == 'x' || digits.front() == 'X')) {
                digits.remove_prefix(1);
                base = 16;
            }
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, base);
            if (!digits.empty() && ec == std::errc() && p == digits.data() + digits.size()) {
                append_utf8(out, cp);
                decoded = true;
            }
        } else {
            for (const auto& e : kEntities) {
                if (e.name == body) {
                    append_utf8(out, e.codepoint);
                    decoded = true;
                    break;
                }
            }
        }
        if (decoded) {
            i = semi + 1;
        } else {
            out += text[i++];
        }
    }
    return out;
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += c;
        }
    }
    return out;
}

std::size_t find_case_insensitive(std::string_view haystack, std::string_view needle, std::size_t from) {
    auto it = std::search(haystack.begin() + static_cast<std::ptrdiff_t>(from), haystack.end(), needle.begin(),
                          needle.end(), [](char a, char b) {
                              return std::tolower(static_cast<unsigned char>(a)) ==
                                     std::tolower(static_cast<unsigned char>(b));
                          });
    return it == haystack.end() ? std::string_view::npos : static_cast<std::size_t>(it - haystack.begin());
}

}  // namespace

std::string sanitize_utf8(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto c = static_cast<unsigned char>(bytes[i]);
        std::size_t len = 0;
        std::uint32_t min_cp = 0;
        if (c < 0x80) {
            out += static_cast<char>(c);
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            min_cp = 0x80;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            min_cp = 0x800;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            min_cp = 0x10000;
        }
        bool valid = len > 0 && i + len <= bytes.size();
        std::uint32_t cp = len > 0 ? (c & (0xFF >> (len + 1))) : 0;
        for (std::size_t k = 1; valid && k < len; ++k) {
            const auto cc = static_cast<unsigned char>(bytes[i + k]);
            valid = (cc & 0xC0) == 0x80;
            cp = (cp << 6) | (cc & 0x3F);
        }
        valid = valid && cp >= min_cp && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
        if (valid) {
            out.append(bytes.substr(i, len));
            i += len;
        } else {
            out += "\xEF\xBF\xBD";
            ++i;
        }
    }
    return out;
}

std::string extract_article_text(std::string_view raw, std::string_view base_url) {
    if (raw.find('\0') != std::string_view::npos) {
        throw UndecodableError("content from " + std::string(base_url) + " is binary, not HTML text");
    }
    const std::string html = sanitize_utf8(raw);

    std::vector<std::string> paragraphs;
    std::string body_text;
    std::string current;
    bool in_paragraph = false;
    int skip_depth = 0;

    auto close_paragraph = [&] {
        if (in_paragraph) {
            auto text = collapse_whitespace(decode_entities(current));
            if (!text.empty()) paragraphs.push_back(std::move(text));
            current.clear();
            in_paragraph = false;
        }
    };

    std::size_t i = 0;
    const std::string_view doc(html);
    while (i < doc.size()) {
        if (doc[i] != '<') {
            const auto next = doc.find('<', i);
            const auto chunk = doc.substr(i, next == std::string_view::npos ? std::string_view::npos : next - i);
            if (skip_depth == 0) {
                body_text += chunk;
                if (in_paragraph) current += chunk;
            }
            i = next == std::string_view::npos ? doc.size() : next;
            continue;
        }
        if (doc.substr(i).starts_with("<!--")) {
            const auto end = doc.find("-->", i + 4);
            i = end == std::string_view::npos ? doc.size() : end + 3;
            continue;
        }
        if (i + 1 < doc.size() && (doc[i + 1] == '!' || doc[i + 1] == '?')) {
            const auto end = doc.find('>', i);
            i = end == std::string_view::npos ? doc.size() : end + 1;
            continue;
        }

        std::size_t j = i + 1;
        const bool closing = j < doc.size() && doc[j] == '/';
        if (closing) ++j;
        const std::size_t name_start = j;
        while (j < doc.size() && (std::isalnum(static_cast<unsigned char>(doc[j])) || doc[j] == '-')) ++j;
        if (j == name_start) {
            // A bare '<' in text.
            if (skip_depth == 0) {
                body_text += '<';
                if (in_paragraph) current += '<';
            }
            ++i;
            continue;
        }
        const std::string name = lower(doc.substr(name_start, j - name_start));

        // Scan to the end of the tag, honouring quoted attribute values.
        char quote = 0;
        while (j < doc.size() && (quote != 0 || doc[j] != '>')) {
            if (quote != 0) {
                if (doc[j] == quote) quote = 0;
            } else if (doc[j] == '"' || doc[j] == '\'') {
                quote = doc[j];
            }
            ++j;
        }
        const bool self_closing = j > 0 && j < doc.size() && doc[j - 1] == '/';
        i = j < doc.size() ? j + 1 : doc.size();

        if (!closing && in(kRawTextElements, name)) {
            const auto end = find_case_insensitive(doc, "</" + name, i);
            if (end == std::string_view::npos) {
                i = doc.size();
            } else {
                const auto gt = doc.find('>', end);
                i = gt == std::string_view::npos ? doc.size() : gt + 1;
            }
            if (skip_depth == 0) body_text += ' ';
            continue;
        }
        if (in(kSkippedElements, name)) {
            if (closing) {
                skip_depth = std::max(0, skip_depth - 1);
            } else if (!self_closing) {
                close_paragraph();
                ++skip_depth;
            }
            continue;
        }
        if (skip_depth > 0) continue;

        if (name == "p") {
            close_paragraph();
            if (!closing && !self_closing) in_paragraph = true;
        } else if (in(kBlockElements, name) || name == "body" || name == "html") {
            close_paragraph();
        }
        if (!in(kInlineElements, name)) {
            body_text += ' ';
            if (in_paragraph) current += ' ';
        }
    }
    close_paragraph();

    if (paragraphs.size() >= 3) {
        std::string out;
        for (const auto& p : paragraphs) {
            if (!out.empty()) out += "\n\n";
            out += p;
        }
        return out;
    }
    auto text = collapse_whitespace(decode_entities(body_text));
    if (text.empty()) {
        throw NoContentError("no article text found at " + std::string(base_url));
    }
    return text;
}

}  // namespace polarity::service
