// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "phosphor/error.hpp"
#include "phosphor/service.hpp"

// after Eigen: <resolv.h> defines a _res macro that clashes with Eigen internals
#include <httplib.h>

namespace phosphor {

namespace {

void reply(httplib::Response& res, const HttpResult& result) {
  res.status = result.status;
  res.set_content(result.body, result.content_type);
}

}  // namespace

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(ExperimentService& service) : impl_(std::make_unique<Impl>()) {
  httplib::Server& server = impl_->server;
  server.Get("/api/health", [&service](const httplib::Request&, httplib::Response& res) { reply(res, service.health()); });
  server.Get(R"(/api/session/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.session(req.matches[1].str()));
  });
  server.Get(R"(/api/stimulus/([^/]+)/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.stimulus(req.matches[1].str(), req.matches[2].str()));
  });
  server.Get(R"(/api/stimulus/([^/]+)/([^/]+)/(spv|original)/(\d+)\.png)",
             [&service](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.frame(req.matches[1].str(), req.matches[2].str(), req.matches[3].str(),
                                        req.matches[4].str()));
             });
  server.Post("/api/response", [&service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.post_response(req.body));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(json{{"error", "Internal"}, {"message", message}}.dump(), "application/json");
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::run() {
  if (!impl_->server.listen_after_bind()) throw Error(ErrorCode::Io, "HTTP server stopped unexpectedly");
}

void HttpServer::stop() { impl_->server.stop(); }

void serve(ExperimentService& service) {
  HttpServer server(service);
  const RunConfig& config = service.config();
  const int port = server.bind(config.host, config.port);
  std::cerr << "serving on http://" << config.host << ":" << port << "\n";
  server.run();
}

}  // namespace phosphor
