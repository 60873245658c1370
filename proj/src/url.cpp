#include "polarity/url.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace polarity::service {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool has_control_or_space(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return c <= 0x20 || c == 0x7f; });
}

}  // namespace

std::string Url::origin() const {
    const bool default_port = (scheme == "http" && port == 80) || (scheme == "https" && port == 443);
    std::string out = scheme + "://" + host;
    if (!default_port) out += ":" + std::to_string(port);
    return out;
}

std::string Url::str() const { return origin() + target; }

std::optional<Url> parse_http_url(std::string_view text) {
    if (has_control_or_space(text)) return std::nullopt;
    const auto sep = text.find("://");
    if (sep == std::string_view::npos) return std::nullopt;

    Url url;
    url.scheme = lower(text.substr(0, sep));
    if (url.scheme != "http" && url.scheme != "https") return std::nullopt;
    url.port = url.scheme == "https" ? 443 : 80;

    std::string_view rest = text.substr(sep + 3);
    const auto path_start = rest.find_first_of("/?#");
    std::string_view authority = rest.substr(0, path_start);
    std::string_view tail = path_start == std::string_view::npos ? std::string_view{} : rest.substr(path_start);

    if (authority.find('@') != std::string_view::npos) return std::nullopt;  // no userinfo
    std::string_view host = authority;
    if (!authority.empty() && authority.front() == '[') {
        const auto close = authority.find(']');
        if (close == std::string_view::npos) return std::nullopt;
        host = authority.substr(0, close + 1);
        authority.remove_prefix(close + 1);
        if (!authority.empty()) {
            if (authority.front() != ':') return std::nullopt;
            authority.remove_prefix(1);
            int port = 0;
            auto [p, ec] = std::from_chars(authority.data(), authority.data() + authority.size(), port);
            if (ec != std::errc() || p != authority.data() + authority.size() || port <= 0 || port > 65535) {
                return std::nullopt;
            }
            url.port = port;
        }
    } else if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
        host = authority.substr(0, colon);
        std::string_view port_text = authority.substr(colon + 1);
        int port = 0;
        auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
        if (ec != std::errc() || p != port_text.data() + port_text.size() || port <= 0 || port > 65535) {
            return std::nullopt;
        }
        url.port = port;
    }
    if (host.empty()) return std::nullopt;
    url.host = lower(host);

    if (const auto hash = tail.find('#'); hash != std::string_view::npos) tail = tail.substr(0, hash);
    url.target = tail.empty() || tail.front() != '/' ? "/" + std::string(tail) : std::string(tail);
    return url;
}

std::optional<Url> resolve_location(const Url& base, std::string_view location) {
    const auto colon = location.find(':');
    const auto delim = location.find_first_of("/?#");
    const bool has_scheme =
        colon != std::string_view::npos && colon > 0 && (delim == std::string_view::npos || colon < delim) &&
        std::isalpha(static_cast<unsigned char>(location.front())) &&
        std::all_of(location.begin(), location.begin() + static_cast<std::ptrdiff_t>(colon), [](unsigned char c) {
            return std::isalnum(c) || c == '+' || c == '-' || c == '.';
        });
    if (has_scheme) {
        const auto scheme = lower(location.substr(0, colon));
        if (scheme != "http" && scheme != "https") {
            // Returned so the caller can report the offending scheme.
            Url other;
            other.scheme = scheme;
            return other;
        }
        return parse_http_url(location);
    }
    if (location.starts_with("//")) {
        return parse_http_url(base.scheme + ":" + std::string(location));
    }
    Url out = base;
    if (location.starts_with("/")) {
        out.target = std::string(location);
    } else {
        std::string dir = base.target.substr(0, base.target.find('?'));
        dir = dir.substr(0, dir.rfind('/') + 1);
        out.target = dir + std::string(location);
    }
    if (const auto hash = out.target.find('#'); hash != std::string::npos) out.target.resize(hash);
    return out;
}

}  // namespace polarity::service
