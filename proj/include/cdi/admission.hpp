// Copyright 2026 The CDI Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// HTTP admission endpoint evaluating submitted bundles against one policy.
//
//   POST /v1/admit   {"artifact_digest": hex, "bundle": {...}}
//                    200 admit / 403 deny, body = Decision + policy_id
//                    400 malformed request, 413 body over the size limit
//   GET  /v1/policy  {"policy_id": hex, "mode": ...}
//   POST /v1/reload  re-read the policy file; 409 if it no longer parses
//   GET  /healthz

#pragma once

#include <httplib.h>

#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <string>

#include "cdi/json_io.hpp"
#include "cdi/policy.hpp"

namespace cdi {

struct AdmissionOptions {
  std::filesystem::path policy_path;
  std::size_t max_bundle_bytes = std::size_t{64} << 20;
  unsigned verify_threads = 1;
  std::ostream* log = &std::cerr;  // one JSON line per decision; may be null
};

struct PolicySnapshot {
  Policy policy;
  Digest policy_id;  // SHA-256 of the policy document bytes
};

struct HttpReply {
  int status = 200;
  Json body;
};

inline std::shared_ptr<const PolicySnapshot> LoadPolicySnapshot(
    const std::filesystem::path& path) {
  std::string text = ReadTextFile(path);
  Policy policy = ParsePolicy(text, path.parent_path());
  return std::make_shared<const PolicySnapshot>(PolicySnapshot{std::move(policy), HashBytes(text)});
}

class AdmissionService {
 public:
  // Throws if the initial policy cannot be loaded.
  explicit AdmissionService(AdmissionOptions options)
      : options_(std::move(options)), active_(LoadPolicySnapshot(options_.policy_path)) {
    server_.set_payload_max_length(options_.max_bundle_bytes);
    server_.Post("/v1/admit", [this](const httplib::Request& req, httplib::Response& res) {
      Send(res, HandleAdmit(req.body));
    });
    server_.Get("/v1/policy", [this](const httplib::Request&, httplib::Response& res) {
      Send(res, HandlePolicy());
    });
    server_.Post("/v1/reload", [this](const httplib::Request&, httplib::Response& res) {
      Send(res, HandleReload());
    });
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"status\":\"ok\"}", "application/json");
    });
  }

  AdmissionService(const AdmissionService&) = delete;
  AdmissionService& operator=(const AdmissionService&) = delete;

  std::shared_ptr<const PolicySnapshot> snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return active_;
  }

  HttpReply HandleAdmit(std::string_view body) const {
    if (body.size() > options_.max_bundle_bytes) {
      return ErrorReply(413, "", "request body exceeds " + std::to_string(options_.max_bundle_bytes) + " bytes");
    }
    if (body.empty()) return ErrorReply(400, "", "empty request body");
    Json req;
    try {
      req = Json::parse(body);
    } catch (const Json::parse_error& e) {
      return ErrorReply(400, "", e.what());
    }
    if (!req.is_object()) return ErrorReply(400, "", "expected JSON object");
    for (const auto& [k, _] : req.items()) {
      if (k != "artifact_digest" && k != "bundle") return ErrorReply(400, k, "unknown field");
    }
    if (!req.contains("artifact_digest")) return ErrorReply(400, "artifact_digest", "missing");
    if (!req.contains("bundle")) return ErrorReply(400, "bundle", "missing");
    std::optional<Digest> digest;
    if (req["artifact_digest"].is_string()) {
      digest = Digest::FromHex(req["artifact_digest"].get_ref<const std::string&>());
    }
    if (!digest) return ErrorReply(400, "artifact_digest", "expected 64 lowercase hex characters");

    Bundle bundle;
    try {
      bundle = BundleFromJson(req["bundle"]);
    } catch (const cdi::Error& e) {
      return ErrorReply(400, "bundle", e.what());
    }
    if (bundle.reports.count(bundle.final_report_id) == 0) {
      return ErrorReply(400, "bundle.final_report_id", "final report not in bundle");
    }
    for (const auto& [id, r] : bundle.reports) {
      for (const auto& in : r.input_report_digests) {
        if (bundle.reports.count(in) == 0) {
          return ErrorReply(400, "bundle.reports",
                       "report " + id.Hex() + " references missing report " + in.Hex());
        }
      }
    }

    // The snapshot stays alive for this evaluation even if a reload swaps it.
    std::shared_ptr<const PolicySnapshot> snap = snapshot();
    Decision decision =
        Evaluate(snap->policy, bundle, *digest, VerifyOptions{options_.verify_threads});
    Json out = ToJson(decision);
    out["policy_id"] = snap->policy_id.Hex();
    Log({{"event", "decision"},
         {"policy_id", snap->policy_id.Hex()},
         {"artifact_digest", digest->Hex()},
         {"verdict", out["verdict"]},
         {"reasons", out["reasons"].size()},
         {"reports", bundle.reports.size()}});
    return HttpReply{decision.admitted() ? 200 : 403, std::move(out)};
  }

  HttpReply HandlePolicy() const {
    auto snap = snapshot();
    return HttpReply{200, {{"policy_id", snap->policy_id.Hex()},
                           {"mode", PolicyModeName(snap->policy.mode)}}};
  }

  // Swaps the active policy atomically; the old one stays on failure.
  HttpReply HandleReload() {
    std::shared_ptr<const PolicySnapshot> next;
    try {
      next = LoadPolicySnapshot(options_.policy_path);
    } catch (const std::exception& e) {
      auto snap = snapshot();
      Log({{"event", "reload-rejected"}, {"detail", e.what()}});
      return HttpReply{409, {{"error", "reload-rejected"},
                             {"detail", e.what()},
                             {"policy_id", snap->policy_id.Hex()}}};
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      active_ = next;
    }
    Log({{"event", "reload"}, {"policy_id", next->policy_id.Hex()}});
    return HttpReply{200, {{"policy_id", next->policy_id.Hex()},
                           {"mode", PolicyModeName(next->policy.mode)}}};
  }

  bool Listen(const std::string& host, int port) { return server_.listen(host, port); }
  bool BindToPort(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  int BindToAnyPort(const std::string& host) { return server_.bind_to_any_port(host); }
  bool ListenAfterBind() { return server_.listen_after_bind(); }
  void WaitUntilReady() const { server_.wait_until_ready(); }
  void Stop() { server_.stop(); }

 private:
  static HttpReply ErrorReply(int status, const std::string& field, const std::string& detail) {
    return HttpReply{status, {{"error", status == 413 ? "payload-too-large" : "malformed-request"},
                              {"field", field},
                              {"detail", detail}}};
  }

  static void Send(httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(-1, ' ', false, Json::error_handler_t::replace), "application/json");
  }

  void Log(const Json& line) const {
    if (options_.log == nullptr) return;
    std::lock_guard<std::mutex> lock(log_mu_);
    *options_.log << line.dump(-1, ' ', false, Json::error_handler_t::replace) << std::endl;
  }

  AdmissionOptions options_;
  mutable std::mutex mu_;
  std::shared_ptr<const PolicySnapshot> active_;
  mutable std::mutex log_mu_;
  httplib::Server server_;
};

}  // namespace cdi
