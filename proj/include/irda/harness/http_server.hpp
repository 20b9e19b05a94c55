#pragma once

// HTTP/JSON routes over a Service.

#include <memory>
#include <string>

#include "httplib.h"
#include "json.hpp"

#include "irda/harness/service.hpp"

namespace irda::harness {

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    send_json(res, 200, f());
  } catch (const std::exception& e) {
    const ApiError err = to_api_error(e);
    send_json(res, http_status(err.code), error_body(err));
  }
}

inline json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    fail(ErrorKind::BadRequest, std::string("request body is not JSON: ") + e.what());
  }
}

}  // namespace detail

/// Registers every route; the caller owns the server's lifetime and port.
inline std::unique_ptr<httplib::Server> make_server(Service& svc) {
  auto srv = std::make_unique<httplib::Server>();
  using detail::guarded;

  srv->Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    detail::send_json(res, 200, json{{"status", "ok"}});
  });
  srv->Post("/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return svc.create_session(detail::parse_body(req)); });
  });
  srv->Get(R"(/sessions/([A-Za-z0-9_-]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return svc.get_session(req.matches[1]); });
  });
  srv->Post(R"(/sessions/([A-Za-z0-9_-]+)/messages)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = detail::parse_body(req);
      if (!body.contains("seq") || !body["seq"].is_number_integer())
        fail(ErrorKind::BadRequest, "message needs an integer seq");
      if (!body.contains("text") || !body["text"].is_string()) fail(ErrorKind::BadRequest, "message needs text");
      return svc.post_message(req.matches[1], body["seq"].get<std::int64_t>(), body["text"].get<std::string>());
    });
  });
  srv->Get(R"(/sessions/([A-Za-z0-9_-]+)/trajectories/([A-Za-z0-9_-]+)/frames)",
           [&svc](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] { return svc.frames(req.matches[1], req.matches[2]); });
           });
  srv->Get(R"(/sessions/([A-Za-z0-9_-]+)/context)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return svc.context(req.matches[1]); });
  });
  srv->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty())
      detail::send_json(res, res.status, error_body({res.status == 404 ? ApiCode::not_found : ApiCode::bad_request,
                                                     "no such route", false}));
  });
  return srv;
}

}  // namespace irda::harness
