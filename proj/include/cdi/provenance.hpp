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

// Signed per-operation reports, bundles of reports, and end-to-end
// verification of the hash-linked provenance DAG.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cdi/authority.hpp"
#include "cdi/crypto.hpp"
#include "cdi/encoding.hpp"
#include "cdi/error.hpp"

namespace cdi {

struct OperationMetadata {
  std::string operation_kind;
  std::vector<std::string> tool_invocation;
  std::map<std::string, Digest> input_artifact_digests;
  std::uint64_t timestamp = 0;  // informational, signed
  std::map<std::string, std::string> extra;
  // Opaque TEE evidence; carried and signed, never validated.
  std::optional<Bytes> attestation_evidence;

  friend bool operator==(const OperationMetadata&, const OperationMetadata&) = default;
};

inline Bytes CanonicalEncode(const OperationMetadata& m) {
  if (m.operation_kind.empty()) {
    throw Error(ErrorCode::kIncomplete, "operation_kind is required");
  }
  std::vector<Bytes> evidence;
  if (m.attestation_evidence) evidence.push_back(*m.attestation_evidence);
  return Encoder()
      .Field(m.operation_kind)
      .StringList(m.tool_invocation)
      .List(m.input_artifact_digests,
            [](const auto& kv) {
              return Encoder().Field(kv.first).Field(CanonicalEncode(kv.second)).Take();
            })
      .U64(m.timestamp)
      .StringMap(m.extra)
      .List(evidence, [](const Bytes& b) { return b; })
      .Take();
}

template <>
inline OperationMetadata CanonicalDecode<OperationMetadata>(ByteView data) {
  Decoder dec(data);
  OperationMetadata m;
  m.operation_kind = dec.String();
  if (m.operation_kind.empty()) throw Error(ErrorCode::kMalformed, "empty operation_kind");
  m.tool_invocation = dec.StringList();
  std::uint32_t n = dec.Count();
  const std::string* prev = nullptr;
  for (std::uint32_t i = 0; i < n; ++i) {
    Decoder pair(dec.Field());
    std::string name = pair.String();
    Digest d = CanonicalDecode<Digest>(pair.Field());
    pair.ExpectEnd();
    if (prev != nullptr && !(*prev < name)) {
      throw Error(ErrorCode::kMalformed, "input names not ascending");
    }
    prev = &m.input_artifact_digests.emplace(std::move(name), d).first->first;
  }
  m.timestamp = dec.U64();
  m.extra = dec.StringMap();
  std::uint32_t evidence = dec.Count();
  if (evidence > 1) throw Error(ErrorCode::kMalformed, "optional with >1 element");
  if (evidence == 1) m.attestation_evidence = dec.FieldBytes();
  dec.ExpectEnd();
  return m;
}

struct CdiReport {
  std::vector<ToolCertification> certifications;
  OperationMetadata metadata;
  Digest output_digest;
  std::vector<Digest> input_report_digests;  // order is signed
  Signature report_signature;

  friend bool operator==(const CdiReport&, const CdiReport&) = default;
};

namespace detail {

inline Encoder& EncodeReportBody(Encoder& enc, const CdiReport& r) {
  if (r.certifications.empty()) {
    throw Error(ErrorCode::kIncomplete, "report carries no certifications");
  }
  return enc
      .List(r.certifications,
            [](const ToolCertification& c) { return CanonicalEncode(c); })
      .Field(CanonicalEncode(r.metadata))
      .Field(CanonicalEncode(r.output_digest))
      .List(r.input_report_digests, [](const Digest& d) { return CanonicalEncode(d); });
}

}  // namespace detail

// Signed bytes: every report field except the signature.
inline Bytes ReportPayload(const CdiReport& r) {
  Encoder enc;
  return detail::EncodeReportBody(enc, r).Take();
}

inline Bytes CanonicalEncode(const CdiReport& r) {
  Encoder enc;
  detail::EncodeReportBody(enc, r);
  return enc.Field(CanonicalEncode(r.report_signature)).Take();
}

template <>
inline CdiReport CanonicalDecode<CdiReport>(ByteView data) {
  Decoder dec(data);
  CdiReport r;
  std::uint32_t certs = dec.Count();
  if (certs == 0) throw Error(ErrorCode::kMalformed, "report carries no certifications");
  for (std::uint32_t i = 0; i < certs; ++i) {
    r.certifications.push_back(CanonicalDecode<ToolCertification>(dec.Field()));
  }
  r.metadata = CanonicalDecode<OperationMetadata>(dec.Field());
  r.output_digest = CanonicalDecode<Digest>(dec.Field());
  std::uint32_t inputs = dec.Count();
  for (std::uint32_t i = 0; i < inputs; ++i) {
    r.input_report_digests.push_back(CanonicalDecode<Digest>(dec.Field()));
  }
  r.report_signature = CanonicalDecode<Signature>(dec.Field());
  dec.ExpectEnd();
  return r;
}

// Hash of the full signed report, so references commit to content and signer.
inline Digest ReportId(const CdiReport& r) { return HashBytes(CanonicalEncode(r)); }

inline CdiReport CreateReport(const SigningKey& tool_key,
                              std::vector<ToolCertification> certifications,
                              OperationMetadata metadata, const Digest& output_digest,
                              const std::vector<CdiReport>& input_reports) {
  if (certifications.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "at least one certification is required");
  }
  const VerifyingKey& certified = certifications.front().tool.report_verifying_key;
  for (const auto& c : certifications) {
    if (c.tool.report_verifying_key != certified) {
      throw Error(ErrorCode::kKeyMismatch,
                  "certifications disagree on the tool report key");
    }
  }
  if (tool_key.key_id() != certified.key_id()) {
    throw Error(ErrorCode::kKeyMismatch,
                "signing key does not match the certified report key");
  }
  CdiReport r;
  r.certifications = std::move(certifications);
  r.metadata = std::move(metadata);
  r.output_digest = output_digest;
  for (const auto& in : input_reports) r.input_report_digests.push_back(ReportId(in));
  r.report_signature = SignPayload(tool_key, ReportPayload(r));
  return r;
}

inline CdiReport CreateReport(const SigningKey& tool_key,
                              std::vector<ToolCertification> certifications,
                              OperationMetadata metadata, ByteView output,
                              const std::vector<CdiReport>& input_reports) {
  return CreateReport(tool_key, std::move(certifications), std::move(metadata),
                      HashBytes(output), input_reports);
}

struct Bundle {
  Digest artifact_digest;
  Digest final_report_id;
  // Keyed by the declared report_id; verification recomputes each key.
  std::map<Digest, CdiReport> reports;
};

// Collects the final report and everything it transitively references from
// all_reports. Pool reports outside that closure are not included.
inline Bundle BuildBundle(const Digest& artifact_digest, const CdiReport& final_report,
                          const std::vector<CdiReport>& all_reports) {
  std::map<Digest, const CdiReport*> pool;
  for (const auto& r : all_reports) {
    Digest id = ReportId(r);
    auto [it, inserted] = pool.emplace(id, &r);
    if (!inserted && CanonicalEncode(*it->second) != CanonicalEncode(r)) {
      throw Error(ErrorCode::kDuplicateReport, id.Hex());
    }
  }
  Digest final_id = ReportId(final_report);
  if (pool.count(final_id) == 0) {
    throw Error(ErrorCode::kMissingReports, "final report not in report set: " + final_id.Hex());
  }

  Bundle bundle{artifact_digest, final_id, {}};
  std::set<Digest> missing;
  std::vector<Digest> stack{final_id};
  while (!stack.empty()) {
    Digest id = stack.back();
    stack.pop_back();
    if (bundle.reports.count(id) > 0) continue;
    auto it = pool.find(id);
    if (it == pool.end()) {
      missing.insert(id);
      continue;
    }
    bundle.reports.emplace(id, *it->second);
    for (const auto& in : it->second->input_report_digests) stack.push_back(in);
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& m : missing) ids += (ids.empty() ? "" : ",") + m.Hex();
    throw Error(ErrorCode::kMissingReports, ids);
  }
  return bundle;
}

struct ProvenanceGraph {
  // Inputs precede their consumers; ties broken by report_id.
  std::vector<Digest> nodes;
  // consumer -> distinct inputs
  std::map<Digest, std::vector<Digest>> edges;
  std::vector<Digest> roots;  // leaf operations, ascending
  Digest sink;

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& [_, ins] : edges) n += ins.size();
    return n;
  }
};

namespace detail {

struct GraphScan {
  std::vector<Digest> order;           // topological prefix
  std::vector<Digest> cyclic;          // nodes left over by Kahn's algorithm
  std::vector<Digest> orphans;         // present but unreachable from the sink
  std::vector<std::pair<Digest, Digest>> dangling;  // (consumer, missing input)
  std::map<Digest, std::vector<Digest>> edges;
  bool sink_present = false;
};

inline GraphScan ScanGraph(const Bundle& bundle) {
  GraphScan scan;
  const auto& reports = bundle.reports;
  std::map<Digest, std::size_t> pending;  // unresolved inputs per node
  std::map<Digest, std::vector<Digest>> consumers;
  for (const auto& [id, r] : reports) {
    std::set<Digest> ins(r.input_report_digests.begin(), r.input_report_digests.end());
    auto& edge = scan.edges[id];
    for (const auto& in : ins) {
      if (reports.count(in) == 0) {
        scan.dangling.emplace_back(id, in);
        continue;
      }
      edge.push_back(in);
      consumers[in].push_back(id);
    }
    pending[id] = edge.size();
  }

  std::set<Digest> ready;
  for (const auto& [id, n] : pending) {
    if (n == 0) ready.insert(id);
  }
  while (!ready.empty()) {
    Digest id = *ready.begin();
    ready.erase(ready.begin());
    scan.order.push_back(id);
    for (const auto& c : consumers[id]) {
      if (--pending[c] == 0) ready.insert(c);
    }
  }
  for (const auto& [id, n] : pending) {
    if (n > 0) scan.cyclic.push_back(id);
  }

  scan.sink_present = reports.count(bundle.final_report_id) > 0;
  std::set<Digest> reached;
  if (scan.sink_present) {
    std::vector<Digest> stack{bundle.final_report_id};
    while (!stack.empty()) {
      Digest id = stack.back();
      stack.pop_back();
      if (!reached.insert(id).second) continue;
      for (const auto& in : scan.edges[id]) stack.push_back(in);
    }
  }
  for (const auto& [id, _] : reports) {
    if (reached.count(id) == 0) scan.orphans.push_back(id);
  }
  return scan;
}

}  // namespace detail

inline ProvenanceGraph BuildGraph(const Bundle& bundle) {
  detail::GraphScan scan = detail::ScanGraph(bundle);
  if (!scan.sink_present) {
    throw Error(ErrorCode::kMissingReports,
                "final report not in bundle: " + bundle.final_report_id.Hex());
  }
  if (!scan.dangling.empty()) {
    throw Error(ErrorCode::kMissingReports, scan.dangling.front().second.Hex());
  }
  if (!scan.cyclic.empty()) {
    throw Error(ErrorCode::kCycle, "cycle through " + scan.cyclic.front().Hex());
  }
  if (!scan.orphans.empty()) {
    throw Error(ErrorCode::kOrphanReport, scan.orphans.front().Hex());
  }
  ProvenanceGraph g;
  g.nodes = std::move(scan.order);
  g.edges = std::move(scan.edges);
  for (const auto& [id, ins] : g.edges) {
    if (ins.empty()) g.roots.push_back(id);
  }
  g.sink = bundle.final_report_id;
  return g;
}

enum class ProvenanceFailure {
  kMissingReport,
  kLinkageMismatch,
  kCycle,
  kOrphanReport,
  kMissingCertification,
  kInconsistentCertifications,
  kUntrustedRoot,
  kBadChainSignature,
  kBadCertificationSignature,
  kBadReportSignature,
  kArtifactMismatch,
};

inline std::string_view ProvenanceFailureName(ProvenanceFailure f) {
  switch (f) {
    case ProvenanceFailure::kMissingReport: return "missing-report";
    case ProvenanceFailure::kLinkageMismatch: return "linkage-mismatch";
    case ProvenanceFailure::kCycle: return "cycle";
    case ProvenanceFailure::kOrphanReport: return "orphan-report";
    case ProvenanceFailure::kMissingCertification: return "missing-certification";
    case ProvenanceFailure::kInconsistentCertifications: return "inconsistent-certifications";
    case ProvenanceFailure::kUntrustedRoot: return "untrusted-root";
    case ProvenanceFailure::kBadChainSignature: return "bad-chain-signature";
    case ProvenanceFailure::kBadCertificationSignature: return "bad-certification-signature";
    case ProvenanceFailure::kBadReportSignature: return "bad-report-signature";
    case ProvenanceFailure::kArtifactMismatch: return "artifact-mismatch";
  }
  return "unknown";
}

struct ProvenanceIssue {
  ProvenanceFailure reason;
  std::optional<Digest> report_id;
  std::string detail;

  friend bool operator==(const ProvenanceIssue&, const ProvenanceIssue&) = default;
};

struct AuditEntry {
  Digest report_id;
  std::string operation_kind;
  std::string tool_name;
  std::string tool_version;
  // Union of properties over certifications that verified against the anchors.
  std::vector<std::string> properties;
  std::vector<Digest> root_key_ids;

  friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

struct ProvenanceResult {
  std::vector<ProvenanceIssue> failures;
  std::vector<AuditEntry> trace;

  bool ok() const { return failures.empty(); }
};

struct VerifyOptions {
  // Worker threads for per-report checks; 0 picks hardware concurrency.
  unsigned threads = 1;
};

// Certifications on a report that verify against anchors and certify the key
// that signed the report.
struct VerifiedCertification {
  const ToolCertification* cert;
  Digest root_key_id;
};

inline std::vector<VerifiedCertification> VerifiedCertifications(
    const CdiReport& report, const TrustAnchorSet& anchors) {
  std::vector<VerifiedCertification> out;
  for (const auto& c : report.certifications) {
    if (c.tool.report_verifying_key.key_id() != report.report_signature.signer_key_id) {
      continue;
    }
    ChainVerification v = VerifyToolCertification(c, anchors);
    if (v.ok()) out.push_back({&c, *v.root_key_id});
  }
  return out;
}

namespace detail {

inline ProvenanceFailure FromChainFailure(ChainFailure f) {
  switch (f) {
    case ChainFailure::kBadChainSignature: return ProvenanceFailure::kBadChainSignature;
    case ChainFailure::kBadCertificationSignature:
      return ProvenanceFailure::kBadCertificationSignature;
    default: return ProvenanceFailure::kUntrustedRoot;
  }
}

struct ReportCheck {
  bool id_matches = true;
  std::vector<ProvenanceIssue> issues;
  AuditEntry entry;
};

inline ReportCheck CheckReport(const Digest& declared_id, const CdiReport& report,
                               const TrustAnchorSet& anchors) {
  ReportCheck out;
  out.entry.report_id = declared_id;
  out.entry.operation_kind = report.metadata.operation_kind;
  if (!report.certifications.empty()) {
    out.entry.tool_name = report.certifications.front().tool.name;
    out.entry.tool_version = report.certifications.front().tool.version;
  }

  if (report.certifications.empty()) {
    out.id_matches = false;
    out.issues.push_back({ProvenanceFailure::kMissingCertification, declared_id,
                          "report carries no certifications"});
    return out;
  }
  out.id_matches = ReportId(report) == declared_id;

  // Check 1: some certification chains to an anchored root.
  std::set<std::string> props;
  std::set<Digest> roots;
  std::optional<ChainVerification> first_failure;
  const VerifyingKey& certified = report.certifications.front().tool.report_verifying_key;
  bool consistent = true;
  for (const auto& c : report.certifications) {
    if (c.tool.report_verifying_key != certified) consistent = false;
    ChainVerification v = VerifyToolCertification(c, anchors);
    if (v.ok()) {
      props.insert(c.properties.values().begin(), c.properties.values().end());
      roots.insert(*v.root_key_id);
    } else if (!first_failure) {
      first_failure = v;
    }
  }
  if (!consistent) {
    out.issues.push_back({ProvenanceFailure::kInconsistentCertifications, declared_id,
                          "certifications name different report keys"});
  }
  if (roots.empty()) {
    ChainFailure f = first_failure ? first_failure->failure : ChainFailure::kUntrustedRoot;
    out.issues.push_back({FromChainFailure(f), declared_id,
                          std::string(ChainFailureName(f)) + " at chain link " +
                              std::to_string(first_failure ? first_failure->failing_link : 0)});
  } else {
    out.entry.properties.assign(props.begin(), props.end());
    out.entry.root_key_ids.assign(roots.begin(), roots.end());
  }

  // Check 2: signed by the certified tool key.
  if (!VerifySignature(report.report_signature, ReportPayload(report), certified)) {
    out.issues.push_back({ProvenanceFailure::kBadReportSignature, declared_id,
                          "report signature does not verify under the certified tool key " +
                              certified.key_id().Hex()});
  }
  return out;
}

template <typename Fn>
void ParallelFor(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace detail

// Full check of a bundle: report_id linkage, DAG shape, per-report
// certification and signature checks, and the artifact binding. All failures
// are collected. The trace is in topological order (inputs first) and the
// result is independent of the thread count.
inline ProvenanceResult VerifyProvenance(const Bundle& bundle, const Digest& artifact_digest,
                                         const TrustAnchorSet& anchors,
                                         VerifyOptions options = {}) {
  ProvenanceResult result;
  detail::GraphScan scan = detail::ScanGraph(bundle);

  std::vector<Digest> order = scan.order;
  order.insert(order.end(), scan.cyclic.begin(), scan.cyclic.end());

  std::vector<const CdiReport*> items;
  items.reserve(order.size());
  for (const auto& id : order) items.push_back(&bundle.reports.at(id));
  std::vector<detail::ReportCheck> checks(order.size());
  detail::ParallelFor(order.size(), options.threads, [&](std::size_t i) {
    checks[i] = detail::CheckReport(order[i], *items[i], anchors);
  });

  auto& f = result.failures;
  if (!scan.sink_present) {
    f.push_back({ProvenanceFailure::kMissingReport, bundle.final_report_id,
                 "final report not in bundle"});
  }
  for (const auto& [consumer, missing] : scan.dangling) {
    f.push_back({ProvenanceFailure::kMissingReport, consumer,
                 "referenced input report " + missing.Hex() + " not in bundle"});
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!checks[i].id_matches && !bundle.reports.at(order[i]).certifications.empty()) {
      f.push_back({ProvenanceFailure::kLinkageMismatch, order[i],
                   "recomputed report_id differs from the referenced digest"});
    }
  }
  for (const auto& id : scan.cyclic) {
    f.push_back({ProvenanceFailure::kCycle, id, "report is part of a reference cycle"});
  }
  for (const auto& id : scan.orphans) {
    if (std::find(scan.cyclic.begin(), scan.cyclic.end(), id) != scan.cyclic.end()) continue;
    f.push_back({ProvenanceFailure::kOrphanReport, id,
                 "report not reachable from the final report"});
  }
  for (auto& c : checks) {
    for (auto& issue : c.issues) f.push_back(std::move(issue));
  }

  // Check 3: the deployed artifact is the one the final report describes.
  if (bundle.artifact_digest != artifact_digest) {
    f.push_back({ProvenanceFailure::kArtifactMismatch, std::nullopt,
                 "bundle artifact digest " + bundle.artifact_digest.Hex() +
                     " != presented artifact " + artifact_digest.Hex()});
  }
  if (scan.sink_present) {
    const CdiReport& final_report = bundle.reports.at(bundle.final_report_id);
    if (final_report.output_digest != artifact_digest) {
      f.push_back({ProvenanceFailure::kArtifactMismatch, bundle.final_report_id,
                   "final report output " + final_report.output_digest.Hex() +
                       " != presented artifact " + artifact_digest.Hex()});
    }
  }

  result.trace.reserve(checks.size());
  for (auto& c : checks) result.trace.push_back(std::move(c.entry));
  return result;
}

}  // namespace cdi
