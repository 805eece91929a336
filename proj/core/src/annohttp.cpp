// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/annohttp.hpp"

#include <fstream>
#include <sstream>

#include <httplib.h>

#include "motif/error.hpp"

namespace motif::anno {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void reply(httplib::Response& res, int status, const ojson& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, {{"error", message}});
}

std::string content_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".ppm") return "image/x-portable-pixmap";
  if (ext == ".pgm") return "image/x-portable-graymap";
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".mp4") return "video/mp4";
  if (ext == ".webm") return "video/webm";
  if (ext == ".json" || ext == ".jsonl") return "application/json";
  return "application/octet-stream";
}

ojson task_view(const std::string& session_id, const PairTask& t) {
  const std::string base = "/sessions/" + session_id + "/tasks/" + t.task_id;
  return {{"task_id", t.task_id},
          {"prompt_text", t.pair.prompt_text},
          {"image_url", base + "/image"},
          {"left_url", base + "/left"},
          {"right_url", base + "/right"},
          {"min_watch_seconds", t.min_watch_seconds},
          {"required_annotators", t.required_annotators}};
}

}  // namespace

AnnoServer::AnnoServer(ServerOptions options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  std::filesystem::create_directories(options_.log_dir);
  routes();
}

AnnoServer::~AnnoServer() { stop(); }

std::optional<std::filesystem::path> AnnoServer::resolve(const std::string& ref) const {
  if (ref.empty()) return std::nullopt;
  const std::filesystem::path rel(ref);
  if (rel.is_absolute()) return std::nullopt;
  for (const auto& part : rel) {
    if (part == "..") return std::nullopt;
  }
  return options_.asset_root / rel;
}

bool AnnoServer::asset_exists(const std::string& ref) const {
  const auto p = resolve(ref);
  return p && std::filesystem::is_regular_file(*p);
}

std::string AnnoServer::create_session(const SessionConfig& config) {
  Session s = build_session(config, [this](const std::string& ref) { return asset_exists(ref); });
  std::lock_guard lock(mu_);
  if (sessions_.contains(s.id)) throw ContractError("session '" + s.id + "' already exists");
  const std::string id = s.id;
  sessions_[id] = std::make_unique<Service>(std::move(s), options_.log_dir / (id + ".jsonl"),
                                            options_.clock);
  return id;
}

std::string AnnoServer::load_session(const std::filesystem::path& log_path) {
  auto svc = Service::replay(log_path, options_.clock);
  const std::string id = svc->session().id;
  std::lock_guard lock(mu_);
  if (sessions_.contains(id)) throw ContractError("session '" + id + "' already exists");
  sessions_[id] = std::move(svc);
  return id;
}

Service* AnnoServer::service(const std::string& session_id) {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : it->second.get();
}

void AnnoServer::routes() {
  auto& srv = *server_;

  srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const SessionConfig config = session_config_from_json(json::parse(req.body));
      const std::string id = create_session(config);
      Service* svc = service(id);
      reply(res, 201,
            {{"session_id", id},
             {"tasks", svc->session().tasks.size()},
             {"excluded", svc->session().excluded}});
    } catch (const json::exception& e) {
      fail(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const std::exception& e) {
      fail(res, 400, e.what());
    }
  });

  srv.Get("/sessions/:id", [this](const httplib::Request& req, httplib::Response& res) {
    Service* svc = service(req.path_params.at("id"));
    if (svc == nullptr) return fail(res, 404, "no such session");
    std::size_t votes = svc->votes().size();
    reply(res, 200,
          {{"session_id", svc->session().id},
           {"tasks", svc->session().tasks.size()},
           {"votes", votes},
           {"required_annotators", svc->session().required_annotators}});
  });

  srv.Get("/sessions/:id/next", [this](const httplib::Request& req, httplib::Response& res) {
    Service* svc = service(req.path_params.at("id"));
    if (svc == nullptr) return fail(res, 404, "no such session");
    const std::string annotator = req.get_param_value("annotator");
    if (annotator.empty()) return fail(res, 400, "missing annotator parameter");
    const auto task = svc->next_task(annotator);
    if (!task) return reply(res, 200, {{"done", true}});
    reply(res, 200, {{"done", false}, {"task", task_view(svc->session().id, *task)}});
  });

  auto send_file = [](const std::filesystem::path& path, httplib::Response& res) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return fail(res, 404, "asset not found");
    std::ostringstream buf;
    buf << in.rdbuf();
    res.status = 200;
    res.set_content(buf.str(), content_type(path));
  };

  srv.Get("/sessions/:id/tasks/:task/:slot",
          [this, send_file](const httplib::Request& req, httplib::Response& res) {
            Service* svc = service(req.path_params.at("id"));
            if (svc == nullptr) return fail(res, 404, "no such session");
            const PairTask* t = svc->session().find(req.path_params.at("task"));
            if (t == nullptr) return fail(res, 404, "no such task");
            const std::string& slot = req.path_params.at("slot");
            std::string ref;
            if (slot == "image") {
              ref = t->pair.image_ref;
            } else if (slot == "left") {
              ref = t->left_ref();
            } else if (slot == "right") {
              ref = t->right_ref();
            } else {
              return fail(res, 404, "slot must be image, left or right");
            }
            const auto path = resolve(ref);
            if (!path) return fail(res, 404, "asset not found");
            send_file(*path, res);
          });

  srv.Get(R"(/assets/(.+))", [this, send_file](const httplib::Request& req, httplib::Response& res) {
    const auto path = resolve(req.matches[1].str());
    if (!path) return fail(res, 403, "invalid asset path");
    send_file(*path, res);
  });

  srv.Post("/sessions/:id/votes", [this](const httplib::Request& req, httplib::Response& res) {
    Service* svc = service(req.path_params.at("id"));
    if (svc == nullptr) return fail(res, 404, "no such session");
    VoteRecord vote;
    try {
      vote = vote_from_json(json::parse(req.body));
    } catch (const std::exception& e) {
      return fail(res, 400, e.what());
    }
    const Verdict v = svc->submit(vote);
    if (v == Verdict::kAccepted) return reply(res, 200, {{"status", "accepted"}});
    const int status = v == Verdict::kUnknownTask ? 404 : 409;
    reply(res, status, {{"status", "rejected"}, {"reason", to_string(v)}});
  });

  srv.Get("/sessions/:id/aggregate", [this](const httplib::Request& req, httplib::Response& res) {
    Service* svc = service(req.path_params.at("id"));
    if (svc == nullptr) return fail(res, 404, "no such session");
    reply(res, 200, to_json(svc->aggregate()));
  });
}

int AnnoServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

bool AnnoServer::listen() { return server_->listen_after_bind(); }

void AnnoServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

bool AnnoServer::running() const { return server_->is_running(); }

}  // namespace motif::anno
