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

// Admission policies and their evaluation against a bundle.
//
// Policy document (JSON, one policy per file):
//
//   {
//     "mode": "default-deny",            // or "accept-all"
//     "anchors": ["<64-hex key_id>", "roots/root.pub"],
//     "required_tags": ["CODE_SANDBOXING"],
//     "tag_map": {"CODE_SANDBOXING": ["WASM_SANDBOXING"]},
//     "operation_rules": {
//       "compile": {"required_properties": ["WASM_SANDBOXING"], "threshold": 2}
//     },
//     "default_threshold": 1
//   }
//
// Only "mode" is mandatory. Anchor entries that are not 64 lowercase hex
// characters are read as verifying-key files relative to the policy file.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cdi/authority.hpp"
#include "cdi/json_io.hpp"
#include "cdi/keyfile.hpp"
#include "cdi/provenance.hpp"

namespace cdi {

enum class PolicyMode { kAcceptAll, kDefaultDeny };

inline std::string_view PolicyModeName(PolicyMode m) {
  return m == PolicyMode::kAcceptAll ? "accept-all" : "default-deny";
}

struct OperationRule {
  std::set<std::string> required_properties;
  unsigned threshold = 1;
};

struct Policy {
  PolicyMode mode = PolicyMode::kAcceptAll;
  TrustAnchorSet anchors;
  std::vector<std::string> required_tags;
  std::map<std::string, std::set<std::string>> tag_map;
  std::map<std::string, OperationRule> operation_rules;
  unsigned default_threshold = 1;

  // Unlisted operation kinds get no property requirements and the default
  // threshold.
  OperationRule RuleFor(const std::string& operation_kind) const {
    auto it = operation_rules.find(operation_kind);
    if (it != operation_rules.end()) return it->second;
    return OperationRule{{}, default_threshold};
  }
};

class PolicyParseError : public Error {
 public:
  PolicyParseError(std::string field, std::size_t line, const std::string& message)
      : Error(ErrorCode::kPolicy,
              (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                  (field.empty() ? "" : field + ": ") + message),
        field_(std::move(field)),
        line_(line) {}

  const std::string& field() const { return field_; }
  std::size_t line() const { return line_; }  // 0 when not a syntax error

 private:
  std::string field_;
  std::size_t line_;
};

// Throws PolicyParseError for syntax errors, unknown modes or fields,
// default-deny without anchors, tags without a non-empty mapping, and
// thresholds below 1.
inline Policy ParsePolicy(std::string_view text,
                          const std::filesystem::path& base_dir = {}) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1;
    std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < upto; ++i) line += text[i] == '\n';
    throw PolicyParseError("", line, e.what());
  }
  auto fail = [](const std::string& field, const std::string& msg) {
    throw PolicyParseError(field, 0, msg);
  };
  if (!j.is_object()) fail("", "policy must be a JSON object");
  static const std::set<std::string> kKnown = {"mode",     "anchors",         "required_tags",
                                               "tag_map",  "operation_rules", "default_threshold"};
  for (const auto& [k, _] : j.items()) {
    if (kKnown.count(k) == 0) fail(k, "unknown field");
  }

  auto string_list = [&](const Json& v, const std::string& field) {
    if (!v.is_array()) fail(field, "expected array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) fail(field, "expected array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  };
  auto threshold = [&](const Json& v, const std::string& field) -> unsigned {
    if (!v.is_number_integer()) fail(field, "expected integer");
    auto n = v.get<std::int64_t>();
    if (n < 1) fail(field, "threshold must be >= 1");
    return static_cast<unsigned>(n);
  };

  Policy p;
  if (!j.contains("mode") || !j["mode"].is_string()) fail("mode", "required string");
  const auto& mode = j["mode"].get_ref<const std::string&>();
  if (mode == "accept-all") {
    p.mode = PolicyMode::kAcceptAll;
  } else if (mode == "default-deny") {
    p.mode = PolicyMode::kDefaultDeny;
  } else {
    fail("mode", "unknown mode '" + mode + "'");
  }

  if (j.contains("anchors")) {
    for (const auto& a : string_list(j["anchors"], "anchors")) {
      if (auto id = Digest::FromHex(a)) {
        p.anchors.Add(*id);
        continue;
      }
      std::filesystem::path path(a);
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      try {
        p.anchors.Add(ReadVerifyingKeyFile(path));
      } catch (const Error& e) {
        fail("anchors", std::string("cannot load anchor '") + a + "': " + e.what());
      }
    }
  }
  if (p.mode == PolicyMode::kDefaultDeny && p.anchors.empty()) {
    fail("anchors", "default-deny requires at least one trusted vetting authority");
  }

  if (j.contains("tag_map")) {
    const Json& tm = j["tag_map"];
    if (!tm.is_object()) fail("tag_map", "expected object");
    for (const auto& [tag, props] : tm.items()) {
      auto list = string_list(props, "tag_map." + tag);
      if (list.empty()) fail("tag_map." + tag, "maps to no properties");
      p.tag_map[tag] = std::set<std::string>(list.begin(), list.end());
    }
  }
  if (j.contains("required_tags")) {
    p.required_tags = string_list(j["required_tags"], "required_tags");
    for (const auto& tag : p.required_tags) {
      if (p.tag_map.count(tag) == 0) {
        fail("required_tags", "tag '" + tag + "' does not resolve through tag_map");
      }
    }
  }
  if (j.contains("default_threshold")) {
    p.default_threshold = threshold(j["default_threshold"], "default_threshold");
  }
  if (j.contains("operation_rules")) {
    const Json& rules = j["operation_rules"];
    if (!rules.is_object()) fail("operation_rules", "expected object");
    for (const auto& [kind, rule] : rules.items()) {
      std::string field = "operation_rules." + kind;
      if (!rule.is_object()) fail(field, "expected object");
      OperationRule r{{}, p.default_threshold};
      for (const auto& [k, v] : rule.items()) {
        if (k == "required_properties") {
          auto list = string_list(v, field + ".required_properties");
          r.required_properties.insert(list.begin(), list.end());
        } else if (k == "threshold") {
          r.threshold = threshold(v, field + ".threshold");
        } else {
          fail(field + "." + k, "unknown field");
        }
      }
      p.operation_rules[kind] = std::move(r);
    }
  }
  return p;
}

inline Policy LoadPolicyFile(const std::filesystem::path& path) {
  return ParsePolicy(ReadTextFile(path), path.parent_path());
}

struct ThresholdResult {
  bool satisfied = false;
  std::size_t distinct_roots = 0;
};

// Counts certifications that verify against anchors, certify the report's
// signing key, and cover every property in must_certify; distinct by root.
inline ThresholdResult CheckThreshold(const CdiReport& report, unsigned k,
                                      const TrustAnchorSet& anchors,
                                      const std::set<std::string>& must_certify = {}) {
  std::set<Digest> roots;
  for (const auto& v : VerifiedCertifications(report, anchors)) {
    bool covers = true;
    for (const auto& p : must_certify) covers = covers && v.cert->properties.Contains(p);
    if (covers) roots.insert(v.root_key_id);
  }
  return ThresholdResult{roots.size() >= k, roots.size()};
}

struct TagResolution {
  bool satisfied = false;
  std::vector<std::string> witness;
};

inline std::map<std::string, TagResolution> ResolveTags(const Policy& policy,
                                                        const CdiReport& final_report) {
  std::set<std::string> certified;
  for (const auto& v : VerifiedCertifications(final_report, policy.anchors)) {
    certified.insert(v.cert->properties.values().begin(), v.cert->properties.values().end());
  }
  std::map<std::string, TagResolution> out;
  for (const auto& tag : policy.required_tags) {
    TagResolution res;
    auto it = policy.tag_map.find(tag);
    if (it != policy.tag_map.end()) {
      for (const auto& p : it->second) {
        if (certified.count(p) > 0) res.witness.push_back(p);
      }
    }
    res.satisfied = !res.witness.empty();
    out[tag] = std::move(res);
  }
  return out;
}

enum class Verdict { kAdmit, kDeny };

struct Reason {
  std::string rule;
  std::optional<Digest> report_id;
  std::string detail;

  friend bool operator==(const Reason&, const Reason&) = default;
};

struct Decision {
  Verdict verdict = Verdict::kDeny;
  std::vector<Reason> reasons;
  std::vector<AuditEntry> audit_trace;

  bool admitted() const { return verdict == Verdict::kAdmit; }
};

inline Decision Evaluate(const Policy& policy, const Bundle& bundle,
                         const Digest& artifact_digest, VerifyOptions options = {}) {
  Decision d;
  ProvenanceResult verified = VerifyProvenance(bundle, artifact_digest, policy.anchors, options);
  d.audit_trace = std::move(verified.trace);
  if (policy.mode == PolicyMode::kAcceptAll) {
    d.verdict = Verdict::kAdmit;
    return d;
  }

  for (const auto& f : verified.failures) {
    d.reasons.push_back({std::string(ProvenanceFailureName(f.reason)), f.report_id, f.detail});
  }
  for (const auto& entry : d.audit_trace) {
    const CdiReport& report = bundle.reports.at(entry.report_id);
    OperationRule rule = policy.RuleFor(report.metadata.operation_kind);
    std::set<std::string> have(entry.properties.begin(), entry.properties.end());
    std::string missing;
    for (const auto& p : rule.required_properties) {
      if (have.count(p) == 0) missing += (missing.empty() ? "" : ",") + p;
    }
    if (!missing.empty()) {
      d.reasons.push_back({"property-missing", entry.report_id,
                           "operation '" + report.metadata.operation_kind +
                               "' lacks certified properties: " + missing});
    }
    ThresholdResult t =
        CheckThreshold(report, rule.threshold, policy.anchors, rule.required_properties);
    if (!t.satisfied) {
      d.reasons.push_back({"threshold-unsatisfied", entry.report_id,
                           "requires " + std::to_string(rule.threshold) +
                               " distinct anchored roots, found " +
                               std::to_string(t.distinct_roots)});
    }
  }
  auto final_it = bundle.reports.find(bundle.final_report_id);
  if (final_it != bundle.reports.end()) {
    for (const auto& [tag, res] : ResolveTags(policy, final_it->second)) {
      if (!res.satisfied) {
        d.reasons.push_back({"tag-unsatisfied", bundle.final_report_id,
                             "no certified property satisfies tag " + tag});
      }
    }
  } else {
    for (const auto& tag : policy.required_tags) {
      d.reasons.push_back({"tag-unsatisfied", std::nullopt,
                           "final report absent; cannot satisfy tag " + tag});
    }
  }
  d.verdict = d.reasons.empty() ? Verdict::kAdmit : Verdict::kDeny;
  return d;
}

inline Json ToJson(const Decision& d) {
  Json reasons = Json::array();
  for (const auto& r : d.reasons) {
    reasons.push_back({{"rule", r.rule},
                       {"report_id", r.report_id ? Json(r.report_id->Hex()) : Json(nullptr)},
                       {"detail", r.detail}});
  }
  Json trace = Json::array();
  for (const auto& e : d.audit_trace) trace.push_back(ToJson(e));
  return {{"verdict", d.verdict == Verdict::kAdmit ? "admit" : "deny"},
          {"reasons", reasons},
          {"audit_trace", trace}};
}

}  // namespace cdi
