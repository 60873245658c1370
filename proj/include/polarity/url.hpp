#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace polarity::service {

struct Url {
    std::string scheme;  // lowercase
    std::string host;
    int port = 0;
    std::string target;  // path plus query, always starting with '/'

    /// scheme://host[:port], suitable as an HTTP client base.
    std::string origin() const;
    std::string str() const;
};

/// Accepts only absolute http/https URLs with a host; anything else yields nullopt.
std::optional<Url> parse_http_url(std::string_view text);

/// Resolves a redirect Location (absolute, scheme-relative, or path) against `base`.
/// The result is not checked for scheme; callers re-validate it.
std::optional<Url> resolve_location(const Url& base, std::string_view location);

}  // namespace polarity::service
