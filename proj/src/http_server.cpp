#include "polarity/http_server.hpp"

#include <httplib.h>

#include <chrono>

namespace polarity::service {

namespace {

// Each request is handled start to finish on one worker thread.
thread_local std::chrono::steady_clock::time_point request_start;

constexpr const char* kJson = "application/json; charset=utf-8";

void set_cors(httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Max-Age", "600");
}

void send_error(httplib::Response& res, ErrorCode code, std::string_view message) {
    res.status = http_status(code);
    res.set_header("X-Error-Code", std::string(code_name(code)));
    res.set_content(error_json(code, message), kJson);
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<PredictService> service, ServerOptions options)
    : service_(std::move(service)), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    auto& srv = *server_;
    // Bodies above the text cap still get a structured 413 from the handler; far larger ones
    // are refused by the transport with a bare 413.
    srv.set_payload_max_length(service_->options().max_text_bytes * 4 + 64 * 1024);

    auto predict = [this](const httplib::Request& req, httplib::Response& res, PredictRequest body) {
        const bool detail = req.get_param_value("detail") == "1";
        auto response = service_->handle_predict(body, detail);
        res.status = 200;
        res.set_content(to_json(response), kJson);
    };

    srv.Post("/api/v1/predict", [this, predict](const httplib::Request& req, httplib::Response& res) {
        set_cors(res);
        try {
            predict(req, res, parse_predict_body(req.body, service_->options().max_text_bytes));
        } catch (const ServiceError& e) {
            send_error(res, e.code(), e.what());
        }
    });

    srv.Get("/api/v1/predict", [predict](const httplib::Request& req, httplib::Response& res) {
        set_cors(res);
        try {
            if (!req.has_param("url")) {
                throw ServiceError(ErrorCode::BadRequest, "missing 'url' query parameter");
            }
            PredictRequest body;
            body.url = req.get_param_value("url");
            predict(req, res, std::move(body));
        } catch (const ServiceError& e) {
            send_error(res, e.code(), e.what());
        }
    });

    srv.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
        set_cors(res);
        const auto status = service_->handle_health();
        res.status = status.ok ? 200 : 503;
        res.set_content(to_json(status), kJson);
    });

    srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        set_cors(res);
        res.status = 204;
    });

    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        set_cors(res);
        std::string message = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        send_error(res, ErrorCode::Internal, message);
    });

    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        set_cors(res);
        if (!res.body.empty()) return;
        if (res.status == 413) {
            send_error(res, ErrorCode::PayloadTooLarge, "request body too large");
        } else if (res.status == 404) {
            res.set_content(R"({"error":{"code":"not_found","status":404,"message":"no such route"}})", kJson);
        }
    });

    if (options_.access_log) {
        srv.set_pre_routing_handler([](const httplib::Request&, httplib::Response&) {
            request_start = std::chrono::steady_clock::now();
            return httplib::Server::HandlerResponse::Unhandled;
        });
        srv.set_logger([log = options_.access_log](const httplib::Request& req, const httplib::Response& res) {
            const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - request_start)
                                .count();
            std::string line = req.method + " " + req.path + " " + std::to_string(res.status);
            if (res.has_header("X-Error-Code")) line += " " + res.get_header_value("X-Error-Code");
            line += " " + std::to_string(ms) + "ms";
            log(line);
        });
    }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
    if (options_.port == 0) {
        const int port = server_->bind_to_any_port(options_.host);
        if (port < 0) throw std::runtime_error("cannot bind " + options_.host);
        return port;
    }
    if (!server_->bind_to_port(options_.host, options_.port)) {
        throw std::runtime_error("cannot bind " + options_.host + ":" + std::to_string(options_.port));
    }
    return options_.port;
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::stop() {
    if (server_ && server_->is_running()) server_->stop();
}

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace polarity::service
