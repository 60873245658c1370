#pragma once

#include "polarity/cascade.hpp"
#include "polarity/embed.hpp"
#include "polarity/nnet.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace polarity::service {

enum class ErrorCode {
    BadRequest,
    UnsupportedScheme,
    PayloadTooLarge,
    NoContent,
    UndecodableContent,
    NoSignal,
    FetchFailed,
    FetchTimeout,
    UpstreamTooLarge,
    ModelUnavailable,
    Internal,
};

std::string_view code_name(ErrorCode code);
int http_status(ErrorCode code);

class ServiceError : public std::runtime_error {
public:
    ServiceError(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline constexpr std::size_t kMiB = 1024 * 1024;

struct PredictRequest {
    std::optional<std::string> text;
    std::optional<std::string> url;
};

/// Parses a JSON body holding exactly one of "text" or "url". Throws ServiceError.
PredictRequest parse_predict_body(std::string_view body, std::size_t max_text_bytes = kMiB);

/// Checks the one-of rule, the text size cap, and the URL scheme. Throws ServiceError.
void validate_request(const PredictRequest& req, std::size_t max_text_bytes = kMiB);

struct SentenceEntry {
    std::string hash;  // first 16 hex digits of the sentence's SHA-256
    std::string text;
    double neutral_probability = 0.0;
    bool kept = false;
};

struct PredictResponse {
    std::optional<double> score;  // absent iff all_neutral
    bool all_neutral = false;
    std::string bucket;           // five-point name or "all_neutral"
    std::size_t kept_count = 0;
    std::size_t dropped_count = 0;
    std::optional<std::vector<SentenceEntry>> sentences;
    std::string model_id;
    std::int64_t elapsed_ms = 0;
};

std::string to_json(const PredictResponse& response);
PredictResponse response_from_json(std::string_view json);
std::string error_json(ErrorCode code, std::string_view message);

struct ModelRegistry {
    nnet::MlpModel polarity;
    nnet::MlpModel neutral;
    embed::WordVectorTable table;
    cascade::CascadeConfig cfg;
    std::string model_id;

    /// Loads the three files; model_id is a digest of their bytes.
    static std::shared_ptr<const ModelRegistry> load(const std::filesystem::path& polarity_model,
                                                     const std::filesystem::path& neutral_model,
                                                     const std::filesystem::path& vector_table,
                                                     const cascade::CascadeConfig& cfg);

    /// In-memory variant; model_id is a digest of the serialized models and table.
    static std::shared_ptr<const ModelRegistry> from_parts(nnet::MlpModel polarity, nnet::MlpModel neutral,
                                                           embed::WordVectorTable table,
                                                           const cascade::CascadeConfig& cfg);

    void validate() const;
};

/// Holds the active registry; readers take a snapshot, reloads replace it whole.
class RegistryHolder {
public:
    explicit RegistryHolder(std::shared_ptr<const ModelRegistry> initial = nullptr)
        : current_(std::move(initial)) {}

    std::shared_ptr<const ModelRegistry> get() const {
        std::lock_guard lock(mutex_);
        return current_;
    }

    void swap(std::shared_ptr<const ModelRegistry> next) {
        std::lock_guard lock(mutex_);
        current_ = std::move(next);
    }

private:
    mutable std::mutex mutex_;
    std::shared_ptr<const ModelRegistry> current_;
};

struct FetchLimits {
    std::chrono::milliseconds timeout{10'000};
    std::size_t max_bytes = 5 * kMiB;
    int max_redirects = 5;
};

class Fetcher {
public:
    virtual ~Fetcher() = default;
    /// Returns the body of a 2xx response. Throws ServiceError (FetchFailed, FetchTimeout,
    /// UpstreamTooLarge, UnsupportedScheme).
    virtual std::string fetch(const std::string& url, const FetchLimits& limits) const = 0;
};

/// HTTP(S) GET with manual redirect handling; every hop must stay on http or https.
class HttpFetcher final : public Fetcher {
public:
    std::string fetch(const std::string& url, const FetchLimits& limits) const override;
};

/// On-disk response cache keyed by (model_id, detail flag, content hash) with a TTL.
class ResponseCache {
public:
    ResponseCache(std::filesystem::path dir, std::chrono::seconds ttl);

    std::optional<PredictResponse> get(const std::string& key) const;
    void put(const std::string& key, const PredictResponse& response) const;
    static std::string key_for(std::string_view model_id, bool detail, std::string_view text);

private:
    std::filesystem::path dir_;
    std::chrono::seconds ttl_;
};

struct ServiceOptions {
    FetchLimits fetch;
    std::size_t max_text_bytes = kMiB;
    std::optional<std::filesystem::path> cache_dir;
    std::chrono::seconds cache_ttl{3600};
};

struct HealthStatus {
    bool ok = false;
    std::string model_id;
    std::size_t vocab_size = 0;
    double uptime_seconds = 0.0;
};

std::string to_json(const HealthStatus& status);

class PredictService {
public:
    PredictService(std::shared_ptr<const ModelRegistry> registry, ServiceOptions options = {},
                   std::shared_ptr<const Fetcher> fetcher = std::make_shared<HttpFetcher>());

    /// Throws ServiceError; every failure maps to exactly one ErrorCode.
    PredictResponse handle_predict(const PredictRequest& req, bool detail) const;
    HealthStatus handle_health() const;

    void reload(std::shared_ptr<const ModelRegistry> registry) { registry_.swap(std::move(registry)); }
    const ServiceOptions& options() const { return options_; }

private:
    PredictResponse predict_text(const ModelRegistry& registry, const std::string& text, bool detail) const;

    RegistryHolder registry_;
    ServiceOptions options_;
    std::shared_ptr<const Fetcher> fetcher_;
    std::optional<ResponseCache> cache_;
    std::chrono::steady_clock::time_point started_;
};

}  // namespace polarity::service
