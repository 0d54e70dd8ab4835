#pragma once

// HTTP front end for SessionStore. Request and response bodies are JSON except
// the mesh export, which is OBJ text.

#include <string>

#include <json.hpp>

#include "lap/io.hpp"
#include "lap/session.hpp"

#include <httplib.h>

namespace lap {

namespace detail {

inline void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline nlohmann::json request_body(const httplib::Request& req) {
  if (req.body.find_first_not_of(" \t\r\n") == std::string::npos) return nlohmann::json::object();
  auto j = parse_json(req.body, "request body");
  if (!j.is_object()) throw Error(ErrorCode::FormatError, "request body: expected an object");
  return j;
}

inline std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw Error(ErrorCode::FormatError, std::string(key) + ": expected a string");
  return j[key].get<std::string>();
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_json(res, {{"error", e.what()}}, e.code() == ErrorCode::UnknownSession ? 404 : 400);
    } catch (const nlohmann::json::exception& e) {
      send_json(res, {{"error", std::string("FormatError: ") + e.what()}}, 400);
    } catch (const std::exception& e) {
      send_json(res, {{"error", e.what()}}, 500);
    }
  };
}

} // namespace detail

/// Registers the session routes on `srv`.
inline void mount_routes(httplib::Server& srv, SessionStore& store) {
  using detail::guarded;
  using detail::send_json;
  using Req = httplib::Request;
  using Res = httplib::Response;

  srv.Post("/sessions", guarded([&store](const Req& req, Res& res) {
    const Scene scene = scene_from_json(parse_json(req.body, "request body"));
    const std::string id = store.create(scene);
    send_json(res, {{"id", id}, {"layout", layout_to_json(store.state(id))}}, 201);
  }));

  srv.Get(R"(/sessions/([^/]+)/state)", guarded([&store](const Req& req, Res& res) {
    send_json(res, layout_to_json(store.state(req.matches[1])));
  }));

  srv.Post(R"(/sessions/([^/]+)/actions)", guarded([&store](const Req& req, Res& res) {
    // Either {"text": "..."} or the raw action text.
    std::string text = req.body;
    const auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (!j.is_discarded() && j.is_object()) text = detail::opt_string(j, "text").value_or("");
    auto r = store.act(req.matches[1], text);
    send_json(res, {{"layout", layout_to_json(r.layout)}, {"diagnostics", diagnostics_to_json(r.diagnostics)}});
  }));

  srv.Post(R"(/sessions/([^/]+)/undo)", guarded([&store](const Req& req, Res& res) {
    send_json(res, layout_to_json(store.undo(req.matches[1])));
  }));

  srv.Post(R"(/sessions/([^/]+)/refine)", guarded([&store](const Req& req, Res& res) {
    const auto j = detail::request_body(req);
    const PolicyKind kind = policy_kind_from_string(detail::opt_string(j, "policy").value_or("rule"));
    std::optional<int> rounds;
    if (j.contains("max_rounds")) rounds = j["max_rounds"].get<int>();
    auto r = store.refine_session(req.matches[1], kind, rounds, detail::opt_string(j, "endpoint"),
                                  detail::opt_string(j, "contact"));
    nlohmann::json body{{"layout", layout_to_json(r.layout)},
                        {"rounds_used", r.rounds_used},
                        {"converged", r.converged},
                        {"sequences", r.sequences}};
    if (r.error) body["error"] = *r.error;
    send_json(res, body);
  }));

  srv.Get(R"(/sessions/([^/]+)/metrics)", guarded([&store](const Req& req, Res& res) {
    send_json(res, report_to_json(store.metrics(req.matches[1])));
  }));

  srv.Post(R"(/sessions/([^/]+)/assemble)", guarded([&store](const Req& req, Res& res) {
    const auto j = detail::request_body(req);
    auto [layout, diags] = store.assemble(req.matches[1], detail::opt_string(j, "contact"));
    send_json(res, {{"layout", layout_to_json(layout)}, {"diagnostics", diags}});
  }));

  srv.Get(R"(/sessions/([^/]+)/export)", guarded([&store](const Req& req, Res& res) {
    const std::string format = req.has_param("format") ? req.get_param_value("format") : "grid";
    const std::string body = store.export_as(req.matches[1], format);
    res.set_content(body, format == "mesh" ? "text/plain" : "application/json");
  }));
}

} // namespace lap
