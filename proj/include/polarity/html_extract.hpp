#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polarity::service {

/// No article text survived extraction.
class NoContentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The payload is not text (e.g. contains NUL bytes).
class UndecodableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Replaces invalid UTF-8 sequences with U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

/// Article text from an HTML page. Drops script/style/nav/header/footer/aside (and head)
/// content, then joins the text of <p> elements with blank lines. Pages with fewer than
/// three non-empty paragraphs fall back to the whole body text. Whitespace is collapsed.
std::string extract_article_text(std::string_view html, std::string_view base_url);

}  // namespace polarity::service
