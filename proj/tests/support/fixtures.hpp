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

// Deterministic authorities, tools and bundles shared by the test suites.

#pragma once

#include <string>
#include <vector>

#include "cdi/cdi.hpp"

namespace fixtures {

using namespace cdi;

inline constexpr std::uint64_t kClock = 1700000000;

inline KeyPair Key(const std::string& label) {
  return GenerateKeypair(ToBytes("fixture-seed/" + label + "/0123456789abcdef0123456789abcdef"));
}

struct Authority {
  KeyPair key;
  AuthorityChain chain;
};

inline Authority Root(const std::string& label) {
  KeyPair k = Key("root/" + label);
  AuthorityChain chain = CreateRootAuthority(k);
  return Authority{std::move(k), std::move(chain)};
}

inline Authority Child(const Authority& parent, const std::string& label) {
  KeyPair k = Key("va/" + label);
  AuthorityChain chain = CertifyAuthority(parent.key.signing, parent.chain, k.verifying);
  return Authority{std::move(k), std::move(chain)};
}

struct Tool {
  KeyPair key;
  ToolDescriptor descriptor;
};

inline Tool MakeTool(const std::string& label, const std::string& name = "wamr-aot",
                     const std::string& version = "1.0") {
  KeyPair k = Key("tool/" + label);
  ToolDescriptor d{name, version, Key("release/" + label).verifying.key_id(), k.verifying};
  return Tool{std::move(k), std::move(d)};
}

inline ToolCertification Certify(const Authority& va, const Tool& tool,
                                 std::vector<std::string> props = {"WASM_SANDBOXING"}) {
  return CertifyTool(va.key.signing, va.chain, tool.descriptor, PropertySet::Make(std::move(props)));
}

inline OperationMetadata Meta(const std::string& kind, std::vector<std::string> invocation = {}) {
  OperationMetadata m;
  m.operation_kind = kind;
  m.tool_invocation = std::move(invocation);
  m.timestamp = kClock;
  return m;
}

struct Scenario {
  Authority root;
  Authority va;
  Tool tool;
  ToolCertification cert;
  std::vector<CdiReport> reports;  // creation order; back() is final
  Bytes artifact;
  Digest artifact_digest;
  Bundle bundle;

  TrustAnchorSet Anchors() const {
    TrustAnchorSet a;
    a.Add(root.key.verifying);
    return a;
  }
};

// Root VA -> tool VA -> wamr-aot certified for WASM_SANDBOXING; one wrapped
// compile of Wasm bytecode into an AoT binary.
inline Scenario PocScenario() {
  Authority root = Root("poc");
  Authority va = Child(root, "poc-toolchain");
  Tool tool = MakeTool("wamr");
  ToolCertification cert = Certify(va, tool);
  Scenario s{root, va, tool, cert, {}, {}, {}, {}};
  Bytes bytecode = ToBytes("asm wasm bytecode for contract");
  s.artifact = ToBytes("aot binary compiled from contract");
  OperationMetadata m = Meta("compile", {"wamrc", "--bounds-checks=1", "-o", "contract.aot", "contract.wasm"});
  m.input_artifact_digests["contract.wasm"] = HashBytes(bytecode);
  s.reports.push_back(CreateReport(s.tool.key.signing, {s.cert}, m, ByteView(s.artifact), {}));
  s.artifact_digest = HashBytes(s.artifact);
  s.bundle = BuildBundle(s.artifact_digest, s.reports.back(), s.reports);
  return s;
}

// n reports, each consuming the previous one's output.
inline Scenario LinearScenario(std::size_t n) {
  Authority root = Root("linear");
  Authority va = Child(root, "linear-va");
  Tool tool = MakeTool("linear-tool", "pipeline-step", "2.1");
  ToolCertification cert = Certify(va, tool);
  Scenario s{root, va, tool, cert, {}, {}, {}, {}};
  Bytes current = ToBytes("source tree");
  for (std::size_t i = 0; i < n; ++i) {
    OperationMetadata m = Meta(i == 0 ? "fetch" : (i + 1 == n ? "package" : "compile"),
                               {"step", std::to_string(i)});
    if (i == 0) m.input_artifact_digests["source"] = HashBytes(current);
    current.push_back(static_cast<std::uint8_t>('a' + i % 26));
    std::vector<CdiReport> inputs;
    if (i > 0) inputs.push_back(s.reports.back());
    s.reports.push_back(CreateReport(s.tool.key.signing, {s.cert}, m, ByteView(current), inputs));
  }
  s.artifact = current;
  s.artifact_digest = HashBytes(current);
  s.bundle = BuildBundle(s.artifact_digest, s.reports.back(), s.reports);
  return s;
}

// fetch(A) -> compile(B), test(C) -> link(D <- B, C) -> package(E).
inline Scenario DiamondScenario() {
  Authority root = Root("diamond");
  Authority va = Child(root, "diamond-va");
  Tool tool = MakeTool("diamond-tool", "toolchain", "3.0");
  ToolCertification cert = Certify(va, tool);
  Scenario s{root, va, tool, cert, {}, {}, {}, {}};
  auto report = [&](const std::string& kind, const std::string& out,
                    const std::vector<CdiReport>& inputs) {
    OperationMetadata m = Meta(kind, {kind});
    if (inputs.empty()) m.input_artifact_digests["src"] = HashBytes(std::string_view("src"));
    return CreateReport(s.tool.key.signing, {s.cert}, m, ByteView(ToBytes(out)), inputs);
  };
  CdiReport a = report("fetch", "A", {});
  CdiReport b = report("compile", "B", {a});
  CdiReport c = report("test", "C", {a});
  CdiReport d = report("link", "D", {b, c});
  s.artifact = ToBytes("E");
  CdiReport e = report("package", "E", {d});
  s.reports = {a, b, c, d, e};
  s.artifact_digest = HashBytes(s.artifact);
  s.bundle = BuildBundle(s.artifact_digest, e, s.reports);
  return s;
}

}  // namespace fixtures
