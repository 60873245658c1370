#include "polarity/service.hpp"

#include "polarity/fileio.hpp"
#include "polarity/hashing.hpp"
#include "polarity/html_extract.hpp"
#include "polarity/url.hpp"

#include <json.hpp>

#include <algorithm>

namespace polarity::service {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t millis_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::string_view code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::BadRequest: return "bad_request";
        case ErrorCode::UnsupportedScheme: return "unsupported_scheme";
        case ErrorCode::PayloadTooLarge: return "payload_too_large";
        case ErrorCode::NoContent: return "no_content";
        case ErrorCode::UndecodableContent: return "undecodable_content";
        case ErrorCode::NoSignal: return "no_signal";
        case ErrorCode::FetchFailed: return "fetch_failed";
        case ErrorCode::FetchTimeout: return "fetch_timeout";
        case ErrorCode::UpstreamTooLarge: return "upstream_too_large";
        case ErrorCode::ModelUnavailable: return "model_unavailable";
        case ErrorCode::Internal: return "internal_error";
    }
    return "internal_error";
}

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::BadRequest:
        case ErrorCode::UnsupportedScheme: return 400;
        case ErrorCode::PayloadTooLarge: return 413;
        case ErrorCode::NoContent:
        case ErrorCode::UndecodableContent:
        case ErrorCode::NoSignal: return 422;
        case ErrorCode::FetchFailed:
        case ErrorCode::UpstreamTooLarge: return 502;
        case ErrorCode::FetchTimeout: return 504;
        case ErrorCode::ModelUnavailable: return 503;
        case ErrorCode::Internal: return 500;
    }
    return 500;
}

void validate_request(const PredictRequest& req, std::size_t max_text_bytes) {
    if (req.text.has_value() == req.url.has_value()) {
        throw ServiceError(ErrorCode::BadRequest, "request must contain exactly one of 'text' or 'url'");
    }
    if (req.text) {
        if (req.text->size() > max_text_bytes) {
            throw ServiceError(ErrorCode::PayloadTooLarge, "text exceeds " + std::to_string(max_text_bytes) + " bytes");
        }
        if (is_blank(*req.text)) {
            throw ServiceError(ErrorCode::BadRequest, "text is empty");
        }
        return;
    }
    const auto& url = *req.url;
    const auto sep = url.find("://");
    if (sep == std::string::npos) {
        throw ServiceError(ErrorCode::BadRequest, "url must be absolute");
    }
    if (!parse_http_url(url)) {
        std::string scheme = url.substr(0, sep);
        std::transform(scheme.begin(), scheme.end(), scheme.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (scheme != "http" && scheme != "https") {
            throw ServiceError(ErrorCode::UnsupportedScheme, "only http and https URLs are accepted");
        }
        throw ServiceError(ErrorCode::BadRequest, "url is not a valid absolute http(s) URL");
    }
}

PredictRequest parse_predict_body(std::string_view body, std::size_t max_text_bytes) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
        throw ServiceError(ErrorCode::BadRequest, "request body is not valid JSON");
    }
    if (!doc.is_object()) {
        throw ServiceError(ErrorCode::BadRequest, "request body must be an object");
    }
    PredictRequest req;
    for (const char* field : {"text", "url"}) {
        if (!doc.contains(field)) continue;
        if (!doc[field].is_string()) {
            throw ServiceError(ErrorCode::BadRequest, std::string("'") + field + "' must be a string");
        }
        (std::string_view(field) == "text" ? req.text : req.url) = doc[field].get<std::string>();
    }
    validate_request(req, max_text_bytes);
    return req;
}

std::string to_json(const PredictResponse& r) {
    nlohmann::json j;
    j["score"] = r.score ? nlohmann::json(*r.score) : nlohmann::json(nullptr);
    j["all_neutral"] = r.all_neutral;
    j["bucket"] = r.bucket;
    j["kept_count"] = r.kept_count;
    j["dropped_count"] = r.dropped_count;
    if (r.sentences) {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& s : *r.sentences) {
            list.push_back({{"hash", s.hash},
                            {"text", s.text},
                            {"neutral_probability", s.neutral_probability},
                            {"kept", s.kept}});
        }
        j["sentences"] = std::move(list);
    }
    j["model_id"] = r.model_id;
    j["elapsed_ms"] = r.elapsed_ms;
    return j.dump();
}

PredictResponse response_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    PredictResponse r;
    if (!j.at("score").is_null()) r.score = j.at("score").get<double>();
    r.all_neutral = j.at("all_neutral").get<bool>();
    r.bucket = j.at("bucket").get<std::string>();
    r.kept_count = j.at("kept_count").get<std::size_t>();
    r.dropped_count = j.at("dropped_count").get<std::size_t>();
    if (j.contains("sentences")) {
        std::vector<SentenceEntry> list;
        for (const auto& s : j["sentences"]) {
            list.push_back({s.at("hash").get<std::string>(), s.at("text").get<std::string>(),
                            s.at("neutral_probability").get<double>(), s.at("kept").get<bool>()});
        }
        r.sentences = std::move(list);
    }
    r.model_id = j.at("model_id").get<std::string>();
    r.elapsed_ms = j.value("elapsed_ms", std::int64_t{0});
    return r;
}

std::string error_json(ErrorCode code, std::string_view message) {
    nlohmann::json j{{"error", {{"code", code_name(code)}, {"status", http_status(code)}, {"message", message}}}};
    return j.dump();
}

std::string to_json(const HealthStatus& s) {
    nlohmann::json j{{"status", s.ok ? "ok" : "degraded"},
                     {"model_id", s.model_id},
                     {"vocab_size", s.vocab_size},
                     {"uptime_seconds", s.uptime_seconds}};
    return j.dump();
}

void ModelRegistry::validate() const {
    if (polarity.input_dim != table.dim() || neutral.input_dim != table.dim()) {
        throw ServiceError(ErrorCode::ModelUnavailable,
                           "model input dimensions (" + std::to_string(polarity.input_dim) + ", " +
                               std::to_string(neutral.input_dim) + ") do not match vector table dimension " +
                               std::to_string(table.dim()));
    }
    cfg.validate();
}

std::shared_ptr<const ModelRegistry> ModelRegistry::load(const std::filesystem::path& polarity_model,
                                                         const std::filesystem::path& neutral_model,
                                                         const std::filesystem::path& vector_table,
                                                         const cascade::CascadeConfig& cfg) {
    auto reg = std::make_shared<ModelRegistry>();
    const std::string polarity_bytes = read_file(polarity_model);
    const std::string neutral_bytes = read_file(neutral_model);
    const std::string table_bytes = read_file(vector_table);
    reg->polarity = nnet::deserialize_model(polarity_bytes);
    reg->neutral = nnet::deserialize_model(neutral_bytes);
    reg->table = embed::parse_table(table_bytes);
    reg->cfg = cfg;
    reg->model_id = sha256_hex(sha256_hex(polarity_bytes) + sha256_hex(neutral_bytes) + sha256_hex(table_bytes))
                        .substr(0, 16);
    reg->validate();
    return reg;
}

std::shared_ptr<const ModelRegistry> ModelRegistry::from_parts(nnet::MlpModel polarity, nnet::MlpModel neutral,
                                                               embed::WordVectorTable table,
                                                               const cascade::CascadeConfig& cfg) {
    auto reg = std::make_shared<ModelRegistry>();
    reg->model_id = sha256_hex(sha256_hex(nnet::serialize_model(polarity)) + sha256_hex(nnet::serialize_model(neutral)) +
                               sha256_hex(table.to_text()))
                        .substr(0, 16);
    reg->polarity = std::move(polarity);
    reg->neutral = std::move(neutral);
    reg->table = std::move(table);
    reg->cfg = cfg;
    reg->validate();
    return reg;
}

ResponseCache::ResponseCache(std::filesystem::path dir, std::chrono::seconds ttl)
    : dir_(std::move(dir)), ttl_(ttl) {
    std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key_for(std::string_view model_id, bool detail, std::string_view text) {
    return sha256_hex(std::string(model_id) + (detail ? "\n1\n" : "\n0\n") + sha256_hex(text));
}

std::optional<PredictResponse> ResponseCache::get(const std::string& key) const {
    const auto path = dir_ / (key + ".json");
    std::error_code ec;
    const auto mtime = std::filesystem::last_write_time(path, ec);
    if (ec) return std::nullopt;
    if (std::filesystem::file_time_type::clock::now() - mtime > ttl_) {
        std::filesystem::remove(path, ec);
        return std::nullopt;
    }
    try {
        return response_from_json(read_file(path));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void ResponseCache::put(const std::string& key, const PredictResponse& response) const {
    try {
        write_file_atomic(dir_ / (key + ".json"), to_json(response));
    } catch (const IoError&) {
        // A cache write failure must not fail the request.
    }
}

PredictService::PredictService(std::shared_ptr<const ModelRegistry> registry, ServiceOptions options,
                               std::shared_ptr<const Fetcher> fetcher)
    : registry_(std::move(registry)),
      options_(std::move(options)),
      fetcher_(std::move(fetcher)),
      started_(Clock::now()) {
    if (options_.cache_dir) {
        cache_.emplace(*options_.cache_dir, options_.cache_ttl);
    }
}

PredictResponse PredictService::predict_text(const ModelRegistry& registry, const std::string& text,
                                             bool detail) const {
    const auto start = Clock::now();
    std::string key;
    if (cache_) {
        key = ResponseCache::key_for(registry.model_id, detail, text);
        if (auto hit = cache_->get(key)) {
            hit->elapsed_ms = millis_since(start);
            return *hit;
        }
    }

    cascade::CascadeVerdict verdict;
    try {
        verdict = cascade::two_step_predict(registry.polarity, registry.neutral, registry.table, text, registry.cfg);
    } catch (const cascade::NoSignalError& e) {
        throw ServiceError(ErrorCode::NoSignal, e.what());
    } catch (const cascade::CascadeError& e) {
        throw ServiceError(ErrorCode::BadRequest, e.what());
    }

    PredictResponse r;
    r.all_neutral = verdict.all_neutral();
    if (verdict.final) {
        r.score = verdict.final->score;
        r.bucket = std::string(cascade::to_string(verdict.final->bucket));
    } else {
        r.bucket = "all_neutral";
    }
    r.kept_count = verdict.kept.size();
    r.dropped_count = verdict.dropped.size();
    if (detail) {
        std::vector<SentenceEntry> entries(verdict.sentence_count());
        for (const auto* group : {&verdict.kept, &verdict.dropped}) {
            const bool kept = group == &verdict.kept;
            for (const auto& s : *group) {
                entries[s.index] = {sha256_hex(s.text).substr(0, 16), s.text, s.neutral_probability, kept};
            }
        }
        r.sentences = std::move(entries);
    }
    r.model_id = registry.model_id;
    if (cache_) cache_->put(key, r);
    r.elapsed_ms = millis_since(start);
    return r;
}

PredictResponse PredictService::handle_predict(const PredictRequest& req, bool detail) const {
    const auto start = Clock::now();
    validate_request(req, options_.max_text_bytes);
    const auto registry = registry_.get();
    if (!registry) {
        throw ServiceError(ErrorCode::ModelUnavailable, "no models are loaded");
    }

    std::string text;
    if (req.text) {
        text = *req.text;
    } else {
        const std::string html = fetcher_->fetch(*req.url, options_.fetch);
        try {
            text = extract_article_text(html, *req.url);
        } catch (const NoContentError& e) {
            throw ServiceError(ErrorCode::NoContent, e.what());
        } catch (const UndecodableError& e) {
            throw ServiceError(ErrorCode::UndecodableContent, e.what());
        }
    }
    auto response = predict_text(*registry, text, detail);
    response.elapsed_ms = millis_since(start);
    return response;
}

HealthStatus PredictService::handle_health() const {
    HealthStatus s;
    s.uptime_seconds = std::chrono::duration<double>(Clock::now() - started_).count();
    if (const auto registry = registry_.get()) {
        s.ok = true;
        s.model_id = registry->model_id;
        s.vocab_size = registry->table.vocab_size();
    }
    return s;
}

}  // namespace polarity::service
