#include "ngd/app/server.hpp"

#include <httplib.h>

#include "ngd/core/error.hpp"
#include "ngd/core/log.hpp"

namespace ngd::app {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& tag,
          const std::string& message) {
  reply(res, status, json{{"error", tag}, {"message", message}});
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body);
  if (!j.is_object()) throw json::type_error::create(302, "body must be an object", nullptr);
  return j;
}

// Maps domain errors to HTTP statuses.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    reply(res, 200, fn());
  } catch (const ParseError& e) {
    fail(res, 400, "unparseable_expression", e.what());
  } catch (const UnknownCategory& e) {
    fail(res, 400, "unknown_object", e.what());
  } catch (const NoPlausiblePlacement& e) {
    fail(res, 400, "no_plausible_placement", e.what());
  } catch (const UnknownId& e) {
    fail(res, 404, "unknown_session", e.what());
  } catch (const NoInstruction& e) {
    fail(res, 409, "no_instruction", e.what());
  } catch (const json::exception& e) {
    fail(res, 400, "bad_request", e.what());
  } catch (const std::exception& e) {
    fail(res, 500, "internal", e.what());
  }
}

}  // namespace

InstructServer::InstructServer(std::shared_ptr<const InstructModels> models,
                               std::uint64_t seed)
    : store_(std::move(models), seed), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.Post("/api/session", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { return json{{"session_id", store_.create()}}; });
  });
  s.Get(R"(/api/session/([^/]+)/state)",
        [this](const httplib::Request& req, httplib::Response& res) {
          guarded(res, [&] {
            const std::string id = req.matches[1];
            return store_.with(id, [](InstructSession& ss) { return ss.state(); });
          });
        });
  s.Post(R"(/api/session/([^/]+)/instruct)",
         [this](const httplib::Request& req, httplib::Response& res) {
           guarded(res, [&] {
             const std::string id = req.matches[1];
             const std::string text = body_of(req).at("text").get<std::string>();
             return store_.with(id, [&](InstructSession& ss) { return ss.instruct(text); });
           });
         });
  s.Post(R"(/api/session/([^/]+)/step)",
         [this](const httplib::Request& req, httplib::Response& res) {
           guarded(res, [&] {
             const std::string id = req.matches[1];
             const json body = body_of(req);
             const std::size_t count = body.value("count", std::size_t{1});
             return store_.with(id, [&](InstructSession& ss) { return ss.step(count); });
           });
         });
  s.Post(R"(/api/session/([^/]+)/reset)",
         [this](const httplib::Request& req, httplib::Response& res) {
           guarded(res, [&] {
             const std::string id = req.matches[1];
             const json body = body_of(req);
             std::optional<std::uint64_t> seed;
             if (body.contains("seed") && !body["seed"].is_null())
               seed = body["seed"].get<std::uint64_t>();
             return store_.with(id, [&](InstructSession& ss) {
               ss.reset(seed);
               return ss.state();
             });
           });
         });
}

InstructServer::~InstructServer() = default;

bool InstructServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    return port_ > 0;
  }
  port_ = port;
  return server_->bind_to_port(host, port);
}

void InstructServer::listen() {
  log_info("instruct server listening on port " + std::to_string(port_));
  server_->listen_after_bind();
}

void InstructServer::stop() { server_->stop(); }

}  // namespace ngd::app
