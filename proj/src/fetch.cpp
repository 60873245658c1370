#include "polarity/service.hpp"
#include "polarity/url.hpp"

#include <httplib.h>

namespace polarity::service {

std::string HttpFetcher::fetch(const std::string& url_text, const FetchLimits& limits) const {
    auto url = parse_http_url(url_text);
    if (!url) {
        throw ServiceError(ErrorCode::UnsupportedScheme, "not an absolute http(s) URL");
    }
    const auto deadline = std::chrono::steady_clock::now() + limits.timeout;
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(limits.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(limits.timeout - secs);

    for (int hop = 0; hop <= limits.max_redirects; ++hop) {
        httplib::Client client(url->origin());
        client.set_follow_location(false);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        client.set_keep_alive(false);

        std::string body;
        bool too_large = false;
        bool timed_out = false;
        const httplib::Headers headers{{"Accept", "text/html, text/plain;q=0.9, */*;q=0.5"}};
        auto result = client.Get(
            url->target, headers,
            [&](const httplib::Response& response) {
                if (response.has_header("Content-Length")) {
                    const auto declared = std::strtoull(response.get_header_value("Content-Length").c_str(), nullptr, 10);
                    if (declared > limits.max_bytes) {
                        too_large = true;
                        return false;
                    }
                }
                return true;
            },
            [&](const char* data, std::size_t length) {
                if (body.size() + length > limits.max_bytes) {
                    too_large = true;
                    return false;
                }
                if (std::chrono::steady_clock::now() > deadline) {
                    timed_out = true;
                    return false;
                }
                body.append(data, length);
                return true;
            });

        if (too_large) {
            throw ServiceError(ErrorCode::UpstreamTooLarge,
                               "fetched page exceeds " + std::to_string(limits.max_bytes) + " bytes");
        }
        if (timed_out || std::chrono::steady_clock::now() > deadline) {
            throw ServiceError(ErrorCode::FetchTimeout, "fetch exceeded " + std::to_string(limits.timeout.count()) + " ms");
        }
        if (!result) {
            const auto err = result.error();
            if (err == httplib::Error::ConnectionTimeout) {
                throw ServiceError(ErrorCode::FetchTimeout, "connection timed out");
            }
            throw ServiceError(ErrorCode::FetchFailed, "fetch failed: " + httplib::to_string(err));
        }

        const int status = result->status;
        if (status >= 300 && status < 400 && result->has_header("Location")) {
            auto next = resolve_location(*url, result->get_header_value("Location"));
            if (!next) {
                throw ServiceError(ErrorCode::FetchFailed, "invalid redirect location");
            }
            if (next->scheme != "http" && next->scheme != "https") {
                throw ServiceError(ErrorCode::UnsupportedScheme, "redirect to a non-http(s) scheme");
            }
            url = std::move(next);
            continue;
        }
        if (status < 200 || status >= 300) {
            throw ServiceError(ErrorCode::FetchFailed, "upstream returned status " + std::to_string(status));
        }
        return body;
    }
    throw ServiceError(ErrorCode::FetchFailed,
                       "more than " + std::to_string(limits.max_redirects) + " redirects");
}

}  // namespace polarity::service
