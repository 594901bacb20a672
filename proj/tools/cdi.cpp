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

// cdi: key and authority management, tool wrapping, bundling, verification
// and policy evaluation.
//
// Exit codes: 0 success/admit, 1 wrapped command failed, 2 verification
// failure/deny, 3 malformed input, usage or I/O error.
// Stdout carries JSON only; diagnostics go to stderr.

#include <CLI11.hpp>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cdi/cdi.hpp"
#include "subprocess.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCommandFailed = 1;
constexpr int kExitRejected = 2;
constexpr int kExitBadInput = 3;

// Thrown for malformed CLI input that is not already a cdi::Error.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void PrintJson(const cdi::Json& j) { std::cout << j.dump() << std::endl; }

cdi::Digest ParseDigestArg(const std::string& text, const std::string& flag) {
  auto d = cdi::Digest::FromHex(text);
  if (!d) throw UsageError(flag + ": expected 64 lowercase hex characters");
  return *d;
}

// An anchor is either a key_id in hex or a verifying-key file.
cdi::TrustAnchorSet ParseAnchors(const std::vector<std::string>& specs) {
  cdi::TrustAnchorSet anchors;
  for (const auto& s : specs) {
    if (auto id = cdi::Digest::FromHex(s)) {
      anchors.Add(*id);
    } else {
      anchors.Add(cdi::ReadVerifyingKeyFile(s));
    }
  }
  return anchors;
}

cdi::Digest ArtifactDigest(const std::string& path, const std::string& digest_hex) {
  if (!digest_hex.empty()) return ParseDigestArg(digest_hex, "--artifact-digest");
  if (path.empty()) throw UsageError("one of --artifact or --artifact-digest is required");
  return cdi::HashFile(path);
}

std::uint64_t Now() {
  if (const char* clock = std::getenv("CDI_CLOCK")) {
    std::string text(clock);
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
      throw UsageError("CDI_CLOCK must be a non-negative integer number of seconds");
    }
    return std::stoull(text);
  }
  return static_cast<std::uint64_t>(std::time(nullptr));
}

std::pair<std::string, std::string> SplitAssignment(const std::string& s,
                                                    const std::string& flag) {
  auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError(flag + ": expected KEY=VALUE");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

struct KeygenArgs {
  std::string out;
  std::optional<std::string> seed;
};

int RunKeygen(const KeygenArgs& a) {
  cdi::KeyPair kp = a.seed ? cdi::GenerateKeypair(cdi::ToBytes(*a.seed)) : cdi::GenerateKeypair();
  fs::path sk = a.out + ".key";
  fs::path pk = a.out + ".pub";
  cdi::WriteSigningKeyFile(sk, kp.signing);
  cdi::WriteVerifyingKeyFile(pk, kp.verifying);
  PrintJson({{"key_id", kp.verifying.key_id().Hex()},
             {"signing_key", sk.string()},
             {"verifying_key", pk.string()}});
  return kExitOk;
}

struct VaRootArgs {
  std::string key;
  std::string out;
};

int RunVaRoot(const VaRootArgs& a) {
  cdi::SigningKey key = cdi::ReadSigningKeyFile(a.key);
  cdi::AuthorityChain chain = cdi::CreateRootAuthority(key);
  cdi::SaveJsonFile(a.out, cdi::ToJson(chain));
  PrintJson({{"root_key_id", key.key_id().Hex()}, {"chain", a.out}});
  return kExitOk;
}

struct VaCertifyArgs {
  std::string key;
  std::string chain;
  std::string child;
  std::string out;
};

int RunVaCertify(const VaCertifyArgs& a) {
  cdi::SigningKey key = cdi::ReadSigningKeyFile(a.key);
  cdi::AuthorityChain parent = cdi::AuthorityChainFromJson(cdi::LoadJsonFile(a.chain), a.chain);
  cdi::VerifyingKey child = cdi::ReadVerifyingKeyFile(a.child);
  cdi::AuthorityChain chain = cdi::CertifyAuthority(key, parent, child);
  cdi::SaveJsonFile(a.out, cdi::ToJson(chain));
  PrintJson({{"child_key_id", child.key_id().Hex()},
             {"depth", chain.links.size()},
             {"chain", a.out}});
  return kExitOk;
}

struct ToolCertifyArgs {
  std::string key;
  std::string chain;
  std::string report_key;
  std::string name;
  std::string version;
  std::string release_key_id;
  std::vector<std::string> properties;
  std::string out;
};

int RunToolCertify(const ToolCertifyArgs& a) {
  cdi::SigningKey key = cdi::ReadSigningKeyFile(a.key);
  cdi::AuthorityChain chain = cdi::AuthorityChainFromJson(cdi::LoadJsonFile(a.chain), a.chain);
  cdi::VerifyingKey report_key = cdi::ReadVerifyingKeyFile(a.report_key);
  cdi::Digest release = a.release_key_id.empty()
                            ? report_key.key_id()
                            : ParseDigestArg(a.release_key_id, "--release-key-id");
  cdi::ToolDescriptor tool{a.name, a.version, release, report_key};
  if (tool.name.empty() || tool.version.empty()) {
    throw UsageError("--name and --tool-version must be non-empty");
  }
  cdi::ToolCertification cert = cdi::CertifyTool(
      key, chain, std::move(tool), cdi::PropertySet::Make(a.properties));
  cdi::SaveJsonFile(a.out, cdi::ToJson(cert));
  PrintJson({{"tool", a.name + "@" + a.version},
             {"properties", cert.properties.values()},
             {"certification", a.out}});
  return kExitOk;
}

struct WrapArgs {
  std::string key;
  std::vector<std::string> certs;
  std::string kind;
  std::vector<std::string> inputs;
  std::vector<std::string> input_reports;
  std::vector<std::string> extra;
  std::string evidence;
  std::string output;
  std::string report;
  std::vector<std::string> command;
};

int RunWrap(const WrapArgs& a) {
  // Everything the report needs except the output is loaded before the
  // command runs, so a bad declaration never costs a build.
  cdi::SigningKey key = cdi::ReadSigningKeyFile(a.key);
  std::vector<cdi::ToolCertification> certs;
  for (const auto& c : a.certs) {
    certs.push_back(cdi::CertificationFromJson(cdi::LoadJsonFile(c), c));
  }
  std::vector<cdi::CdiReport> input_reports;
  for (const auto& r : a.input_reports) input_reports.push_back(cdi::LoadReportFile(r));

  cdi::OperationMetadata meta;
  meta.operation_kind = a.kind;
  meta.tool_invocation = a.command;
  for (const auto& in : a.inputs) {
    std::string name = fs::path(in).filename().string();
    std::string path = in;
    if (auto eq = in.find('='); eq != std::string::npos && eq > 0) {
      name = in.substr(0, eq);
      path = in.substr(eq + 1);
    }
    if (!meta.input_artifact_digests.emplace(name, cdi::HashFile(path)).second) {
      throw UsageError("duplicate input name '" + name + "'");
    }
  }
  for (const auto& kv : a.extra) {
    auto [k, v] = SplitAssignment(kv, "--extra");
    meta.extra[k] = v;
  }
  if (!a.evidence.empty()) meta.attestation_evidence = cdi::ToBytes(cdi::ReadTextFile(a.evidence));
  meta.timestamp = Now();

  // Fail early on key/certification mismatch.
  const auto& certified = certs.front().tool.report_verifying_key;
  if (key.key_id() != certified.key_id()) {
    throw cdi::Error(cdi::ErrorCode::kKeyMismatch,
                     "--key does not match the certified report key " + certified.key_id().Hex());
  }

  std::error_code ec;
  fs::remove(a.output, ec);
  cdi::tools::ProcessResult proc = cdi::tools::RunProcess(a.command);
  if (!proc.started) {
    std::cerr << "cdi wrap: cannot execute '" << a.command.front()
              << "': " << std::strerror(proc.spawn_errno) << "\n";
    return kExitCommandFailed;
  }
  if (proc.signal != 0) {
    std::cerr << "cdi wrap: command killed by signal " << proc.signal << "\n";
    return kExitCommandFailed;
  }
  if (proc.exit_code != 0) {
    std::cerr << "cdi wrap: command exited with status " << proc.exit_code << "\n";
    return proc.exit_code;
  }
  if (!fs::is_regular_file(a.output, ec)) {
    std::cerr << "cdi wrap: declared output " << a.output << " was not produced\n";
    return kExitCommandFailed;
  }

  cdi::CdiReport report = cdi::CreateReport(key, std::move(certs), std::move(meta),
                                            cdi::HashFile(a.output), input_reports);
  cdi::SaveJsonFile(a.report, cdi::ToJson(report));
  PrintJson({{"report_id", cdi::ReportId(report).Hex()},
             {"output_digest", report.output_digest.Hex()},
             {"report", a.report}});
  return kExitOk;
}

struct BundleArgs {
  std::string artifact;
  std::string artifact_digest;
  std::string final_report;
  std::vector<std::string> reports;
  std::string out;
};

int RunBundle(const BundleArgs& a) {
  cdi::Digest artifact = ArtifactDigest(a.artifact, a.artifact_digest);
  cdi::CdiReport final_report = cdi::LoadReportFile(a.final_report);
  std::vector<cdi::CdiReport> pool{final_report};
  for (const auto& r : a.reports) pool.push_back(cdi::LoadReportFile(r));
  cdi::Bundle bundle = cdi::BuildBundle(artifact, final_report, pool);
  cdi::SaveJsonFile(a.out, cdi::ToJson(bundle));
  PrintJson({{"final_report_id", bundle.final_report_id.Hex()},
             {"reports", bundle.reports.size()},
             {"bundle", a.out}});
  return kExitOk;
}

struct VerifyArgs {
  std::string bundle;
  std::string artifact;
  std::string artifact_digest;
  std::vector<std::string> anchors;
  unsigned threads = 1;
};

int RunVerify(const VerifyArgs& a) {
  cdi::Bundle bundle = cdi::BundleFromJson(cdi::LoadJsonFile(a.bundle), a.bundle);
  cdi::Digest artifact = ArtifactDigest(a.artifact, a.artifact_digest);
  cdi::TrustAnchorSet anchors = ParseAnchors(a.anchors);
  cdi::ProvenanceResult result =
      cdi::VerifyProvenance(bundle, artifact, anchors, cdi::VerifyOptions{a.threads});
  for (const auto& e : result.trace) PrintJson(cdi::ToJson(e));
  for (const auto& f : result.failures) {
    std::cerr << cdi::Json{{"reason", cdi::ProvenanceFailureName(f.reason)},
                           {"report_id", f.report_id ? cdi::Json(f.report_id->Hex())
                                                     : cdi::Json(nullptr)},
                           {"detail", f.detail}}
                     .dump()
              << "\n";
  }
  return result.ok() ? kExitOk : kExitRejected;
}

struct EvalArgs {
  std::string bundle;
  std::string artifact;
  std::string artifact_digest;
  std::string policy;
  unsigned threads = 1;
};

int RunEval(const EvalArgs& a) {
  cdi::Policy policy = cdi::LoadPolicyFile(a.policy);
  cdi::Bundle bundle = cdi::BundleFromJson(cdi::LoadJsonFile(a.bundle), a.bundle);
  cdi::Digest artifact = ArtifactDigest(a.artifact, a.artifact_digest);
  cdi::Decision d = cdi::Evaluate(policy, bundle, artifact, cdi::VerifyOptions{a.threads});
  PrintJson(cdi::ToJson(d));
  return d.admitted() ? kExitOk : kExitRejected;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Code deployment integrity: provenance reports and admission policies"};
  app.require_subcommand(1);

  KeygenArgs keygen;
  auto* keygen_cmd = app.add_subcommand("keygen", "Generate an ECDSA P-256 key pair");
  keygen_cmd->add_option("--out", keygen.out, "Output prefix (<prefix>.key, <prefix>.pub)")->required();
  keygen_cmd->add_option("--seed", keygen.seed, "Deterministic seed (tests only)");

  VaRootArgs va_root;
  auto* va_root_cmd = app.add_subcommand("va-root", "Create a root vetting-authority chain");
  va_root_cmd->add_option("--key", va_root.key, "Root signing key file")->required();
  va_root_cmd->add_option("--out", va_root.out, "Chain JSON output")->required();

  VaCertifyArgs va_certify;
  auto* va_certify_cmd = app.add_subcommand("va-certify", "Certify a child vetting authority");
  va_certify_cmd->add_option("--key", va_certify.key, "Parent signing key file")->required();
  va_certify_cmd->add_option("--chain", va_certify.chain, "Parent chain JSON")->required();
  va_certify_cmd->add_option("--child", va_certify.child, "Child verifying key file")->required();
  va_certify_cmd->add_option("--out", va_certify.out, "Child chain JSON output")->required();

  ToolCertifyArgs tool_certify;
  auto* tool_certify_cmd = app.add_subcommand("tool-certify", "Certify a tool for a set of properties");
  tool_certify_cmd->add_option("--key", tool_certify.key, "Authority signing key file")->required();
  tool_certify_cmd->add_option("--chain", tool_certify.chain, "Authority chain JSON")->required();
  tool_certify_cmd->add_option("--report-key", tool_certify.report_key, "Tool report verifying key file")->required();
  tool_certify_cmd->add_option("--name", tool_certify.name, "Tool name")->required();
  tool_certify_cmd->add_option("--tool-version", tool_certify.version, "Tool version")->required();
  tool_certify_cmd->add_option("--release-key-id", tool_certify.release_key_id,
                               "Tool owner's release key id (defaults to the report key id)");
  tool_certify_cmd->add_option("--property", tool_certify.properties, "Certified property (repeatable)")->required();
  tool_certify_cmd->add_option("--out", tool_certify.out, "Certification JSON output")->required();

  WrapArgs wrap;
  auto* wrap_cmd = app.add_subcommand("wrap", "Run a supply-chain step and emit a signed report");
  wrap_cmd->add_option("--key", wrap.key, "Tool report signing key file")->required();
  wrap_cmd->add_option("--cert", wrap.certs, "Tool certification JSON (repeatable)")->required();
  wrap_cmd->add_option("--kind", wrap.kind, "Operation kind, e.g. compile")->required();
  wrap_cmd->add_option("--input", wrap.inputs, "Input artifact, [NAME=]PATH (repeatable)");
  wrap_cmd->add_option("--input-report", wrap.input_reports, "Upstream report JSON (repeatable)");
  wrap_cmd->add_option("--extra", wrap.extra, "Extra metadata KEY=VALUE (repeatable)");
  wrap_cmd->add_option("--evidence", wrap.evidence, "Opaque attestation evidence file");
  wrap_cmd->add_option("--output", wrap.output, "Output artifact produced by the command")->required();
  wrap_cmd->add_option("--report", wrap.report, "Report JSON output")->required();
  wrap_cmd->add_option("command", wrap.command, "Command to run (after --)")->required();

  BundleArgs bundle;
  auto* bundle_cmd = app.add_subcommand("bundle", "Assemble a bundle from a final report");
  bundle_cmd->add_option("--artifact", bundle.artifact, "Deployable artifact file");
  bundle_cmd->add_option("--artifact-digest", bundle.artifact_digest, "Artifact digest (hex)");
  bundle_cmd->add_option("--final", bundle.final_report, "Final report JSON")->required();
  bundle_cmd->add_option("--report", bundle.reports, "Upstream report JSON (repeatable)");
  bundle_cmd->add_option("--out", bundle.out, "Bundle JSON output")->required();

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Verify a bundle's provenance");
  verify_cmd->add_option("--bundle", verify.bundle, "Bundle JSON")->required();
  verify_cmd->add_option("--artifact", verify.artifact, "Artifact file");
  verify_cmd->add_option("--artifact-digest", verify.artifact_digest, "Artifact digest (hex)");
  verify_cmd->add_option("--anchor", verify.anchors, "Trusted root: key_id hex or key file (repeatable)");
  verify_cmd->add_option("--threads", verify.threads, "Verification threads (0 = all cores)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a bundle against a policy");
  eval_cmd->add_option("--bundle", eval.bundle, "Bundle JSON")->required();
  eval_cmd->add_option("--artifact", eval.artifact, "Artifact file");
  eval_cmd->add_option("--artifact-digest", eval.artifact_digest, "Artifact digest (hex)");
  eval_cmd->add_option("--policy", eval.policy, "Policy JSON")->required();
  eval_cmd->add_option("--threads", eval.threads, "Verification threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadInput;
  }

  try {
    if (*keygen_cmd) return RunKeygen(keygen);
    if (*va_root_cmd) return RunVaRoot(va_root);
    if (*va_certify_cmd) return RunVaCertify(va_certify);
    if (*tool_certify_cmd) return RunToolCertify(tool_certify);
    if (*wrap_cmd) return RunWrap(wrap);
    if (*bundle_cmd) return RunBundle(bundle);
    if (*verify_cmd) return RunVerify(verify);
    if (*eval_cmd) return RunEval(eval);
  } catch (const cdi::Error& e) {
    std::cerr << "cdi: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const UsageError& e) {
    std::cerr << "cdi: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "cdi: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitBadInput;
}
