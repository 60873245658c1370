#pragma once

#include "polarity/service.hpp"

#include <functional>
#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace polarity::service {

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 binds an ephemeral port
    /// Receives one line per request: method, path, status, error code, elapsed ms. Never the
    /// query string, body, or client address.
    std::function<void(const std::string&)> access_log;
};

/// Routes:
///   POST /api/v1/predict          body {"text": ...} or {"url": ...}; ?detail=1 adds the audit
///   GET  /api/v1/predict?url=...  compatibility alias
///   GET  /healthz
class HttpServer {
public:
    HttpServer(std::shared_ptr<PredictService> service, ServerOptions options);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds the listening socket and returns the bound port; throws std::runtime_error on failure.
    int bind();
    /// Serves until stop() is called. Blocks.
    void run();
    void stop();
    void wait_until_ready() const;

private:
    std::shared_ptr<PredictService> service_;
    ServerOptions options_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace polarity::service
