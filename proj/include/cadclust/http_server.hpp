#pragma once

#include <memory>
#include <string>
#include <thread>

#include "cadclust/service.hpp"

namespace httplib {
class Server;
}

namespace cadclust {

/// JSON-over-HTTP front end for an AnnotationService.
///
///   GET  /api/health
///   GET  /api/clusters/next?annotator=<token>      task or 204
///   POST /api/clusters/<id>/rounds                 {"annotator","checked"[,"round"]}
///   GET  /api/export?annotator=<token>             edge-set TSV
///   GET  /api/progress
///   GET  /api/preview/<model_id>.xyz
class HttpServer {
public:
    explicit HttpServer(AnnotationService& service);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Returns the bound port; throws Error when binding fails.
    int start(const std::string& host, int port);

    /// Blocks in the calling thread until stop() is called elsewhere.
    void serve(const std::string& host, int port);

    void stop();

private:
    AnnotationService& service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace cadclust
