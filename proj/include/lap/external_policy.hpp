#pragma once

// Planner policy backed by a network endpoint. One POST per round with body
// {"system", "user", "image"}; the reply is {"text": "..."} (a bare text body
// is accepted too) and is parsed leniently.

#include <chrono>
#include <string>

#include <json.hpp>

#include "lap/actions.hpp"
#include "lap/error.hpp"
#include "lap/prompts.hpp"
#include "lap/refine.hpp"

#include <httplib.h>

namespace lap {

struct Endpoint {
  std::string origin; // scheme://host[:port]
  std::string path = "/";
};

inline Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::FormatError, "endpoint needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) e.path = url.substr(path_start);
  return e;
}

class ExternalPolicy : public Policy {
public:
  ExternalPolicy(std::string url, double timeout_s) : url_(std::move(url)), timeout_s_(timeout_s) {
    endpoint_ = parse_endpoint(url_);
  }

  PolicyOutput propose(const PolicyContext& ctx) override {
    const std::string text = request(ctx);
    auto parsed = parse(text, ParseMode::Lenient);
    return {std::move(parsed.actions), std::move(parsed.diagnostics)};
  }

  std::string name() const override { return "external"; }

  /// Raw reply text for one round.
  std::string request(const PolicyContext& ctx) const {
    nlohmann::json body;
    body["system"] = planner_system_prompt(ctx.layout->config);
    body["user"] = planner_user_prompt(*ctx.layout);
    body["image"] = ctx.image;

    httplib::Client cli(endpoint_.origin);
    const auto timeout = std::chrono::duration<double>(timeout_s_);
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
    cli.set_connection_timeout(us);
    cli.set_read_timeout(us);
    cli.set_write_timeout(us);

    auto res = cli.Post(endpoint_.path, body.dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      const std::string what = url_ + ": " + httplib::to_string(err);
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
        throw Error(ErrorCode::Timeout, what);
      throw Error(ErrorCode::TransportError, what);
    }
    if (res->status != 200)
      throw Error(ErrorCode::TransportError, url_ + ": HTTP " + std::to_string(res->status));

    std::string text = res->body;
    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (!reply.is_discarded()) {
      if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string())
        throw Error(ErrorCode::EmptyResponse, url_ + ": reply has no text field");
      text = reply["text"].get<std::string>();
    }
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
      throw Error(ErrorCode::EmptyResponse, url_ + ": empty reply");
    return text;
  }

private:
  std::string url_;
  Endpoint endpoint_;
  double timeout_s_;
};

} // namespace lap
