#include "cadclust/http_server.hpp"

#include <httplib.h>

#include <json.hpp>

#include "cadclust/text_io.hpp"

namespace cadclust {

using json = nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void reply_error(httplib::Response& res, int status, const std::string& what,
                 const std::vector<ModelId>& offending = {}) {
    json body{{"error", what}};
    if (!offending.empty()) body["offending"] = offending;
    reply(res, status, body);
}

// Runs a handler and maps service exceptions onto status codes.
template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const AuthError& e) {
            reply_error(res, 403, e.what());
        } catch (const NotFoundError& e) {
            reply_error(res, 404, e.what());
        } catch (const ConflictError& e) {
            reply_error(res, 409, e.what(), e.offending());
        } catch (const json::exception& e) {
            reply_error(res, 400, std::string("bad request body: ") + e.what());
        } catch (const std::exception& e) {
            reply_error(res, 500, e.what());
        }
    };
}

std::string token_of(const httplib::Request& req) {
    if (!req.has_param("annotator")) throw AuthError("missing annotator token");
    return req.get_param_value("annotator");
}

json task_json(const AnnotationTask& t) {
    json previews = json::array();
    for (const auto& id : t.members) previews.push_back("/api/preview/" + id + ".xyz");
    return json{{"cluster_id", t.cluster_id}, {"members", t.members}, {"remaining", t.remaining},
                {"round", t.round},           {"previews", previews}};
}

json progress_json(const Progress& p) {
    json annotators = json::array();
    for (const auto& a : p.annotators)
        annotators.push_back(json{{"annotator", a.annotator},
                                  {"completed", a.completed},
                                  {"total", a.total},
                                  {"edges_labeled", a.edges_labeled}});
    json pairs = json::array();
    for (const auto& c : p.consistency)
        pairs.push_back(json{{"a", c.a}, {"b", c.b}, {"value", c.value ? json(*c.value) : json(nullptr)}});
    return json{{"annotators", annotators}, {"consistency", pairs}};
}

}  // namespace

HttpServer::HttpServer(AnnotationService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;

    s.Get("/api/health", guarded([this](const httplib::Request&, httplib::Response& res) {
              reply(res, 200, json{{"status", "ok"}, {"tasks", service_.num_tasks()}});
          }));

    s.Get("/api/clusters/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
              const auto task = service_.next_cluster(token_of(req));
              if (!task) {
                  res.status = 204;
                  return;
              }
              reply(res, 200, task_json(*task));
          }));

    s.Post(R"(/api/clusters/(\d+)/rounds)", guarded([this](const httplib::Request& req, httplib::Response& res) {
               std::uint64_t id = 0;
               if (!text::parse_u64(req.matches[1].str(), id)) throw NotFoundError("bad cluster id");
               const auto body = json::parse(req.body);
               if (!body.is_object()) {
                   reply_error(res, 400, "request body must be a JSON object");
                   return;
               }
               const auto token = body.at("annotator").get<std::string>();
               const auto checked = body.at("checked").get<std::vector<ModelId>>();
               std::optional<std::size_t> round;
               if (body.contains("round") && !body["round"].is_null()) round = body["round"].get<std::size_t>();
               const auto r = service_.submit_round(token, static_cast<std::size_t>(id), checked, round);
               reply(res, 200, json{{"remaining", r.remaining}, {"terminal", r.terminal}, {"round", r.round}});
           }));

    s.Get("/api/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
              const auto token = token_of(req);
              const auto edges = service_.export_edges(token);
              res.status = 200;
              res.set_header("Content-Disposition",
                             "attachment; filename=\"" + service_.annotator(token) + ".tsv\"");
              res.set_content(format_edge_set(edges), "text/tab-separated-values");
          }));

    s.Get("/api/progress", guarded([this](const httplib::Request&, httplib::Response& res) {
              reply(res, 200, progress_json(service_.progress()));
          }));

    s.Get(R"(/api/preview/([^/]+)\.xyz)", guarded([this](const httplib::Request& req, httplib::Response& res) {
              const auto path = service_.preview_path(req.matches[1].str());
              res.status = 200;
              res.set_content(text::read_file(path), "text/plain");
          }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = server_->bind_to_any_port(host);
    } else if (!server_->bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void HttpServer::serve(const std::string& host, int port) {
    if (!server_->listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace cadclust
