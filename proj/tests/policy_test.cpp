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


#include <gtest/gtest.h>

#include <filesystem>

#include "cdi/policy.hpp"
#include "support/fixtures.hpp"

namespace cdi {
namespace {

using fixtures::Scenario;

std::string AnchorList(const TrustAnchorSet& a) {
  std::string out;
  for (const auto& id : a.ids()) out += (out.empty() ? "\"" : ",\"") + id.Hex() + "\"";
  return "[" + out + "]";
}

std::vector<std::string> Rules(const Decision& d) {
  std::vector<std::string> out;
  for (const auto& r : d.reasons) out.push_back(r.rule);
  return out;
}

PolicyParseError ParseFailure(const std::string& text) {
  try {
    ParsePolicy(text);
  } catch (const PolicyParseError& e) {
    return e;
  }
  ADD_FAILURE() << "policy parsed: " << text;
  return PolicyParseError("", 0, "");
}

TEST(PolicyParseTest, MinimalAndFullDocuments) {
  Policy p = ParsePolicy(R"({"mode":"accept-all"})");
  EXPECT_EQ(p.mode, PolicyMode::kAcceptAll);
  EXPECT_TRUE(p.anchors.empty());

  std::string id = HashBytes(std::string_view("anchor")).Hex();
  Policy q = ParsePolicy(R"({"mode":"default-deny","anchors":[")" + id + R"("],
    "required_tags":["CODE_SANDBOXING"],
    "tag_map":{"CODE_SANDBOXING":["WASM_SANDBOXING","NACL"]},
    "operation_rules":{"compile":{"required_properties":["WASM_SANDBOXING"],"threshold":2}},
    "default_threshold":1})");
  EXPECT_EQ(q.mode, PolicyMode::kDefaultDeny);
  EXPECT_TRUE(q.anchors.Contains(*Digest::FromHex(id)));
  EXPECT_EQ(q.tag_map.at("CODE_SANDBOXING").size(), 2u);
  EXPECT_EQ(q.RuleFor("compile").threshold, 2u);
  EXPECT_EQ(q.RuleFor("link").threshold, 1u);
  EXPECT_TRUE(q.RuleFor("link").required_properties.empty());
}

TEST(PolicyParseTest, SyntaxErrorReportsLine) {
  PolicyParseError e = ParseFailure("{\n  \"mode\": \"accept-all\",\n  oops\n}");
  EXPECT_EQ(e.line(), 3u);
  EXPECT_EQ(e.code(), ErrorCode::kPolicy);
}

TEST(PolicyParseTest, SemanticErrorsNameTheField) {
  std::string id = "\"" + HashBytes(std::string_view("a")).Hex() + "\"";
  EXPECT_EQ(ParseFailure(R"({"mode":"allow-everything"})").field(), "mode");
  EXPECT_EQ(ParseFailure(R"({})").field(), "mode");
  EXPECT_EQ(ParseFailure(R"([1,2])").field(), "");
  EXPECT_EQ(ParseFailure(R"({"mode":"accept-all","extra":1})").field(), "extra");
  EXPECT_EQ(ParseFailure(R"({"mode":"default-deny"})").field(), "anchors");
  EXPECT_EQ(ParseFailure(R"({"mode":"default-deny","anchors":[)" + id +
                         R"(],"required_tags":["T"]})").field(),
            "required_tags");
  EXPECT_EQ(ParseFailure(R"({"mode":"default-deny","anchors":[)" + id +
                         R"(],"tag_map":{"T":[]}})").field(),
            "tag_map.T");
  EXPECT_EQ(ParseFailure(R"({"mode":"default-deny","anchors":[)" + id +
                         R"(],"operation_rules":{"compile":{"threshold":0}}})").field(),
            "operation_rules.compile.threshold");
  EXPECT_EQ(ParseFailure(R"({"mode":"default-deny","anchors":[)" + id +
                         R"(],"operation_rules":{"compile":{"thresh":1}}})").field(),
            "operation_rules.compile.thresh");
  EXPECT_EQ(ParseFailure(R"({"mode":"default-deny","anchors":["missing.pub"]})").field(),
            "anchors");
  EXPECT_EQ(ParseFailure(R"({"mode":"accept-all","default_threshold":"2"})").field(),
            "default_threshold");
}

TEST(PolicyParseTest, AnchorFilesResolveRelativeToPolicy) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / ("cdi_policy_test_" + std::to_string(::getpid()));
  fs::create_directories(dir / "roots");
  KeyPair k = fixtures::Key("anchor-file");
  WriteVerifyingKeyFile(dir / "roots" / "root.pub", k.verifying);
  WriteTextFile(dir / "policy.json", R"({"mode":"default-deny","anchors":["roots/root.pub"]})");
  Policy p = LoadPolicyFile(dir / "policy.json");
  EXPECT_TRUE(p.anchors.Contains(k.verifying.key_id()));
  fs::remove_all(dir);
}

Policy DenyPolicy(const Scenario& s, const std::string& extra = "") {
  return ParsePolicy(R"({"mode":"default-deny","anchors":)" + AnchorList(s.Anchors()) + extra + "}");
}

TEST(EvaluateTest, DefaultDenyAdmitsValidBundle) {
  Scenario s = fixtures::PocScenario();
  Decision d = Evaluate(DenyPolicy(s, R"(,"required_tags":["CODE_SANDBOXING"],
      "tag_map":{"CODE_SANDBOXING":["WASM_SANDBOXING"]},
      "operation_rules":{"compile":{"required_properties":["WASM_SANDBOXING"]}})"),
                        s.bundle, s.artifact_digest);
  EXPECT_TRUE(d.admitted()) << (d.reasons.empty() ? "" : d.reasons[0].detail);
  EXPECT_EQ(d.audit_trace.size(), 1u);
  Json j = ToJson(d);
  EXPECT_EQ(j["verdict"], "admit");
  EXPECT_TRUE(j["reasons"].empty());
}

TEST(EvaluateTest, DefaultDenyReportsEachViolation) {
  Scenario s = fixtures::PocScenario();
  Decision wrong_root = Evaluate(
      ParsePolicy(R"({"mode":"default-deny","anchors":[")" +
                  s.va.key.verifying.key_id().Hex() + R"("]})"),
      s.bundle, s.artifact_digest);
  EXPECT_EQ(Rules(wrong_root), (std::vector<std::string>{"untrusted-root", "threshold-unsatisfied"}));

  Decision prop = Evaluate(
      DenyPolicy(s, R"(,"operation_rules":{"compile":{"required_properties":["MEMORY_SAFE"]}})"),
      s.bundle, s.artifact_digest);
  EXPECT_EQ(Rules(prop), (std::vector<std::string>{"property-missing", "threshold-unsatisfied"}));

  Decision tag = Evaluate(DenyPolicy(s, R"(,"required_tags":["CFI_TAG"],"tag_map":{"CFI_TAG":["CFI"]})"),
                          s.bundle, s.artifact_digest);
  EXPECT_EQ(Rules(tag), std::vector<std::string>{"tag-unsatisfied"});

  Decision art = Evaluate(DenyPolicy(s), s.bundle, HashBytes(std::string_view("other")));
  EXPECT_EQ(Rules(art), (std::vector<std::string>{"artifact-mismatch", "artifact-mismatch"}));
  EXPECT_EQ(ToJson(art)["verdict"], "deny");
}

TEST(EvaluateTest, AcceptAllAdmitsEverythingWithTrace) {
  Scenario s = fixtures::DiamondScenario();
  Policy p = ParsePolicy(R"({"mode":"accept-all"})");
  Bundle broken = s.bundle;
  broken.reports.erase(ReportId(s.reports[1]));
  for (const Bundle* b : {&s.bundle, &broken}) {
    Decision d = Evaluate(p, *b, HashBytes(std::string_view("anything")));
    EXPECT_TRUE(d.admitted());
    EXPECT_TRUE(d.reasons.empty());
    EXPECT_EQ(d.audit_trace.size(), b->reports.size());
  }
}

TEST(EvaluateTest, TagsResolveAgainstFinalReportOnly) {
  // Only the fetch step is certified for the tagged property.
  fixtures::Authority root = fixtures::Root("tags");
  fixtures::Authority va = fixtures::Child(root, "tags-va");
  fixtures::Tool tool = fixtures::MakeTool("tags-tool");
  ToolCertification plain = fixtures::Certify(va, tool, {"REPRODUCIBLE"});
  ToolCertification sandboxed = fixtures::Certify(va, tool, {"WASM_SANDBOXING"});
  CdiReport a = CreateReport(tool.key.signing, {sandboxed}, fixtures::Meta("fetch"),
                             ByteView(ToBytes("a")), {});
  CdiReport b = CreateReport(tool.key.signing, {plain}, fixtures::Meta("package"),
                             ByteView(ToBytes("b")), {a});
  Digest art = HashBytes(std::string_view("b"));
  Bundle bundle = BuildBundle(art, b, {a, b});
  TrustAnchorSet anchors;
  anchors.Add(root.key.verifying);
  Policy p = ParsePolicy(R"({"mode":"default-deny","anchors":)" + AnchorList(anchors) +
                         R"(,"required_tags":["CODE_SANDBOXING"],
                             "tag_map":{"CODE_SANDBOXING":["WASM_SANDBOXING","NACL"]}})");
  Decision d = Evaluate(p, bundle, art);
  EXPECT_EQ(Rules(d), std::vector<std::string>{"tag-unsatisfied"});
  auto res = ResolveTags(p, a);
  EXPECT_TRUE(res.at("CODE_SANDBOXING").satisfied);
  EXPECT_EQ(res.at("CODE_SANDBOXING").witness, std::vector<std::string>{"WASM_SANDBOXING"});
}

// Five roots each certify the same tool; three are anchored.
struct MultiRoot {
  std::vector<fixtures::Authority> roots;
  fixtures::Tool tool = fixtures::MakeTool("multi");
  CdiReport report;
  Bundle bundle;
  Digest artifact;
};

MultiRoot MakeMultiRoot() {
  MultiRoot m;
  std::vector<ToolCertification> certs;
  for (int i = 0; i < 5; ++i) {
    m.roots.push_back(fixtures::Root("multi" + std::to_string(i)));
    fixtures::Authority va = fixtures::Child(m.roots.back(), "multi-va" + std::to_string(i));
    certs.push_back(fixtures::Certify(va, m.tool));
  }
  m.report = CreateReport(m.tool.key.signing, certs, fixtures::Meta("compile"),
                          ByteView(ToBytes("multi")), {});
  m.artifact = HashBytes(std::string_view("multi"));
  m.bundle = BuildBundle(m.artifact, m.report, {m.report});
  return m;
}

TEST(ThresholdTest, ExhaustiveOverAnchorSubsetsAndK) {
  MultiRoot m = MakeMultiRoot();
  for (unsigned mask = 0; mask < 32; ++mask) {
    TrustAnchorSet anchors;
    unsigned anchored = 0;
    for (int i = 0; i < 5; ++i) {
      if (mask & (1u << i)) {
        anchors.Add(m.roots[i].key.verifying);
        ++anchored;
      }
    }
    for (unsigned k = 1; k <= 5; ++k) {
      ThresholdResult t = CheckThreshold(m.report, k, anchors);
      EXPECT_EQ(t.distinct_roots, anchored);
      EXPECT_EQ(t.satisfied, anchored >= k) << "mask " << mask << " k " << k;
    }
  }
}

TEST(ThresholdTest, RepeatedRootCountsOnce) {
  fixtures::Authority root = fixtures::Root("dup");
  fixtures::Authority va1 = fixtures::Child(root, "dup1");
  fixtures::Authority va2 = fixtures::Child(root, "dup2");
  fixtures::Tool tool = fixtures::MakeTool("dup");
  CdiReport r = CreateReport(tool.key.signing, {fixtures::Certify(va1, tool), fixtures::Certify(va2, tool)},
                             fixtures::Meta("compile"), ByteView(ToBytes("x")), {});
  TrustAnchorSet anchors;
  anchors.Add(root.key.verifying);
  EXPECT_EQ(CheckThreshold(r, 2, anchors).distinct_roots, 1u);
  EXPECT_FALSE(CheckThreshold(r, 2, anchors).satisfied);
}

TEST(ThresholdTest, OnlyCertificationsCoveringRequiredPropertiesCount) {
  fixtures::Authority r1 = fixtures::Root("cov1");
  fixtures::Authority r2 = fixtures::Root("cov2");
  fixtures::Tool tool = fixtures::MakeTool("cov");
  CdiReport r = CreateReport(
      tool.key.signing,
      {fixtures::Certify(fixtures::Child(r1, "v1"), tool, {"WASM_SANDBOXING"}),
       fixtures::Certify(fixtures::Child(r2, "v2"), tool, {"REPRODUCIBLE"})},
      fixtures::Meta("compile"), ByteView(ToBytes("x")), {});
  TrustAnchorSet anchors;
  anchors.Add(r1.key.verifying);
  anchors.Add(r2.key.verifying);
  EXPECT_TRUE(CheckThreshold(r, 2, anchors).satisfied);
  EXPECT_FALSE(CheckThreshold(r, 2, anchors, {"WASM_SANDBOXING"}).satisfied);
  EXPECT_TRUE(CheckThreshold(r, 1, anchors, {"WASM_SANDBOXING"}).satisfied);
}

TEST(ThresholdTest, PolicyThresholdDecisionsFollowAnchoredCount) {
  MultiRoot m = MakeMultiRoot();
  TrustAnchorSet anchors;
  for (int i = 0; i < 3; ++i) anchors.Add(m.roots[i].key.verifying);
  for (unsigned k = 1; k <= 5; ++k) {
    Policy p = ParsePolicy(R"({"mode":"default-deny","anchors":)" + AnchorList(anchors) +
                           R"(,"operation_rules":{"compile":{"threshold":)" + std::to_string(k) + "}}}");
    Decision d = Evaluate(p, m.bundle, m.artifact);
    EXPECT_EQ(d.admitted(), k <= 3) << k;
    if (!d.admitted()) {
      EXPECT_EQ(Rules(d), std::vector<std::string>{"threshold-unsatisfied"});
    }
  }
}

// More anchors or fewer requirements never flip admit to deny.
TEST(EvaluateTest, DecisionsAreMonotone) {
  MultiRoot m = MakeMultiRoot();
  const std::vector<std::string> requirement_sets = {
      "", R"(,"required_tags":["S"],"tag_map":{"S":["WASM_SANDBOXING"]})",
      R"(,"operation_rules":{"compile":{"threshold":2}})",
      R"(,"operation_rules":{"compile":{"required_properties":["WASM_SANDBOXING"],"threshold":3}})"};
  for (unsigned mask = 1; mask < 32; ++mask) {
    TrustAnchorSet small;
    for (int i = 0; i < 5; ++i) {
      if (mask & (1u << i)) small.Add(m.roots[i].key.verifying);
    }
    TrustAnchorSet big = small;
    big.Add(m.roots[(mask * 7) % 5].key.verifying);
    for (std::size_t strict = 0; strict < requirement_sets.size(); ++strict) {
      auto policy = [&](const TrustAnchorSet& a, std::size_t req) {
        return ParsePolicy(R"({"mode":"default-deny","anchors":)" + AnchorList(a) +
                           requirement_sets[req] + "}");
      };
      bool admitted = Evaluate(policy(small, strict), m.bundle, m.artifact).admitted();
      if (!admitted) continue;
      EXPECT_TRUE(Evaluate(policy(big, strict), m.bundle, m.artifact).admitted());
      EXPECT_TRUE(Evaluate(policy(small, 0), m.bundle, m.artifact).admitted());
    }
  }
}

}  // namespace
}  // namespace cdi
