#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ccls/coding.hpp"
#include "ccls/homomorphic_hash.hpp"

namespace ccls {

// Per-block state a node keeps instead of the block itself: the manifest of
// k source-fragment hashes plus r locally generated coded fragments with
// their hashes.  The raw block is dropped after ingest.
struct BlockManifest {
  uint64_t block_id = 0;
  uint64_t block_len = 0;
  std::vector<FragmentHash> source_hashes;

  bool operator==(const BlockManifest&) const = default;
};

inline BlockLayout manifest_layout(const SystemParams& params, const BlockManifest& manifest) {
  return BlockLayout{manifest.block_len, params.k, params.m, params.element_size};
}

// Canonical text form, one "key value" line per field, hashes as
// fixed-width lowercase hex at the byte width of p.
inline std::string manifest_to_text(const SystemParams& params, const BlockManifest& manifest) {
  if (manifest.source_hashes.size() != params.k)
    fail(Errc::dimension_mismatch, "manifest hash count");
  std::string out;
  out += "block_id " + std::to_string(manifest.block_id) + "\n";
  out += "block_len " + std::to_string(manifest.block_len) + "\n";
  out += "k " + std::to_string(params.k) + "\n";
  out += "element_size " + std::to_string(params.element_size) + "\n";
  for (uint32_t u = 0; u < params.k; ++u)
    out += "hash[" + std::to_string(u) + "] " +
           int_to_hex(manifest.source_hashes[u].value, params.p_width()) + "\n";
  return out;
}

inline BlockManifest manifest_from_text(const SystemParams& params, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto next_field = [&](const std::string& key) -> std::string {
    if (!std::getline(in, line)) fail(Errc::malformed_encoding, "manifest truncated");
    auto space = line.find(' ');
    if (space == std::string::npos || line.substr(0, space) != key)
      fail(Errc::malformed_encoding, "expected field " + key);
    return line.substr(space + 1);
  };
  auto parse_u64 = [](const std::string& s) -> uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      fail(Errc::malformed_encoding, "bad decimal field");
    return std::stoull(s);
  };

  BlockManifest manifest;
  manifest.block_id = parse_u64(next_field("block_id"));
  manifest.block_len = parse_u64(next_field("block_len"));
  uint64_t k = parse_u64(next_field("k"));
  uint64_t element_size = parse_u64(next_field("element_size"));
  if (k != params.k || element_size != params.element_size)
    fail(Errc::malformed_encoding, "manifest geometry disagrees with params");
  for (uint32_t u = 0; u < params.k; ++u) {
    std::string hex = next_field("hash[" + std::to_string(u) + "]");
    if (hex.size() != 2 * params.p_width()) fail(Errc::malformed_encoding, "bad hash width");
    Int value = int_from_hex(hex);
    if (value <= 0 || value >= params.p) fail(Errc::malformed_encoding, "hash out of range");
    manifest.source_hashes.push_back(FragmentHash{value});
  }
  if (std::getline(in, line) && !line.empty()) fail(Errc::malformed_encoding, "trailing content");
  return manifest;
}

enum class Offense { bad_hash, bad_fragment, unresponsive };

inline const char* offense_name(Offense o) {
  switch (o) {
    case Offense::bad_hash: return "bad_hash";
    case Offense::bad_fragment: return "bad_fragment";
    case Offense::unresponsive: return "unresponsive";
  }
  return "unknown";
}

struct EvidenceRecord {
  Int claimed_hash;             // the hash value the peer vouched for
  std::string fragment_digest;  // sha256 of the fragment wire bytes, empty for hash offenses

  bool operator==(const EvidenceRecord&) const = default;
};

struct PeerReport {
  uint64_t reporter = 0;
  uint64_t accused = 0;
  uint64_t block_id = 0;
  uint32_t index = 0;
  Offense offense = Offense::unresponsive;
  std::optional<EvidenceRecord> evidence;
};

struct StoredBlock {
  BlockManifest manifest;
  std::vector<CodedFragment> fragments;
  std::vector<FragmentHash> hashes;
};

struct NodeState {
  uint64_t node_id = 0;
  uint32_t replication = 2;  // coded fragments kept per block
  uint32_t degree = 0;       // code degree, 0 meaning dense (k)
  double epsilon_budget = 0.1;
  std::map<uint64_t, StoredBlock> store;
  std::map<uint64_t, Offense> blacklist;  // accused node -> first offense
  std::vector<PeerReport> reports;

  uint32_t effective_degree(const SystemParams& params) const {
    return degree == 0 ? params.k : degree;
  }
};

// Records an accusation.  Offenses with a replayable failing check
// (bad_hash, bad_fragment) also blacklist the peer; unresponsiveness is
// logged but never blacklisted, since there is no evidence a third party
// could verify.  First offense wins; entries are never removed.
inline const PeerReport& report_malicious(NodeState& state, uint64_t accused, uint64_t block_id,
                                          uint32_t index, Offense offense,
                                          std::optional<EvidenceRecord> evidence) {
  state.reports.push_back(PeerReport{state.node_id, accused, block_id, index, offense,
                                     std::move(evidence)});
  if (offense != Offense::unresponsive) state.blacklist.emplace(accused, offense);
  return state.reports.back();
}

// Splits, hashes and encodes one block, keeping only coded state.  The
// coded-fragment hashes can be produced two equivalent ways: combining the
// source hashes under the derived coefficients, or hashing the coded
// payload directly.  Combining costs one table power per nonzero
// coefficient, hashing one per element, so the cheaper path depends on the
// geometry; audit_store re-checks stored hashes both ways regardless.
inline void ingest_block(NodeState& state, const SystemParams& params, uint64_t block_id,
                         std::span<const uint8_t> block,
                         const BlockManifest* expected_manifest = nullptr,
                         const FragmentHasher* hasher = nullptr) {
  auto split = split_block(params, block);

  StoredBlock entry;
  entry.manifest.block_id = block_id;
  entry.manifest.block_len = block.size();
  if (hasher) {
    entry.manifest.source_hashes.reserve(params.k);
    for (const Fragment& f : split.fragments)
      entry.manifest.source_hashes.push_back(hasher->hash(f));
  } else {
    entry.manifest.source_hashes = hash_block(params, split.fragments);
  }
  if (expected_manifest && !(entry.manifest == *expected_manifest))
    fail(Errc::manifest_mismatch, "computed manifest disagrees with expected manifest");

  uint32_t degree = state.effective_degree(params);
  uint64_t qbits = uint64_t(bit_length(params.q));
  uint64_t ebits = params.element_size ? std::min<uint64_t>(8 * params.element_size, qbits) : qbits;
  bool combine = degree * (qbits / 6 + 1) < uint64_t(params.m) * (ebits / 5 + 1);
  std::optional<HashCombiner> combiner;
  if (combine) combiner.emplace(params, entry.manifest.source_hashes);
  std::optional<FragmentHasher> own_hasher;
  if (!combine && !hasher) {
    own_hasher.emplace(params, 4);
    hasher = &*own_hasher;
  }

  entry.fragments.reserve(state.replication);
  entry.hashes.reserve(state.replication);
  for (uint32_t u = 0; u < state.replication; ++u) {
    auto cv = derive_coefficients(params, state.node_id, block_id, u, degree);
    entry.fragments.push_back(encode_fragment(params, split.fragments, cv));
    entry.hashes.push_back(combine ? combiner->combine(cv.coeffs)
                                   : hasher->hash(entry.fragments.back().data));
  }
  state.store[block_id] = std::move(entry);
}

struct HashResponse {
  FragmentHash hash;
  uint64_t node_id = 0;
  uint64_t block_id = 0;
  uint32_t index = 0;
};

inline const StoredBlock& stored_block(const NodeState& state, uint64_t block_id) {
  auto it = state.store.find(block_id);
  if (it == state.store.end()) fail(Errc::not_stored, "block not in store");
  return it->second;
}

inline HashResponse serve_hash(const NodeState& state, uint64_t block_id, uint32_t index) {
  const StoredBlock& entry = stored_block(state, block_id);
  if (index >= entry.hashes.size()) fail(Errc::not_stored, "fragment index not held");
  return HashResponse{entry.hashes[index], state.node_id, block_id, index};
}

inline const CodedFragment& serve_fragment(const NodeState& state, uint64_t block_id,
                                           uint32_t index) {
  const StoredBlock& entry = stored_block(state, block_id);
  if (index >= entry.fragments.size()) fail(Errc::not_stored, "fragment index not held");
  return entry.fragments[index];
}

inline const BlockManifest& serve_manifest(const NodeState& state, uint64_t block_id) {
  return stored_block(state, block_id).manifest;
}

// Bytes a node dedicates to one block: fragment wire forms, stored coded
// hashes at the byte width of p, and the manifest text.
inline uint64_t stored_block_bytes(const NodeState& state, const SystemParams& params,
                                   uint64_t block_id) {
  const StoredBlock& entry = stored_block(state, block_id);
  uint64_t total = 0;
  for (const CodedFragment& cf : entry.fragments)
    total += 24 + uint64_t(cf.data.elements.size()) * params.q_width();
  total += entry.hashes.size() * params.p_width();
  total += manifest_to_text(params, entry.manifest).size();
  return total;
}

// Re-derives and re-verifies everything in the store; returns one line per
// inconsistency, empty when clean.
inline std::vector<std::string> audit_store(const NodeState& state, const SystemParams& params) {
  std::vector<std::string> issues;
  FragmentHasher hasher(params, 4);
  for (const auto& [block_id, entry] : state.store) {
    if (entry.manifest.block_id != block_id) {
      issues.push_back("block " + std::to_string(block_id) + ": manifest id mismatch");
      continue;
    }
    if (entry.manifest.source_hashes.size() != params.k) {
      issues.push_back("block " + std::to_string(block_id) + ": manifest hash count");
      continue;
    }
    HashCombiner combiner(params, entry.manifest.source_hashes);
    for (uint32_t u = 0; u < entry.fragments.size(); ++u) {
      const CodedFragment& cf = entry.fragments[u];
      std::string where = "block " + std::to_string(block_id) + " fragment " + std::to_string(u);
      if (cf.node_id != state.node_id || cf.block_id != block_id || cf.index != u) {
        issues.push_back(where + ": wrong origin");
        continue;
      }
      auto cv = derive_coefficients(params, state.node_id, block_id, u,
                                    state.effective_degree(params));
      if (u >= entry.hashes.size()) {
        issues.push_back(where + ": missing hash");
        continue;
      }
      if (!combiner.verify(cv.coeffs, entry.hashes[u]))
        issues.push_back(where + ": stored hash disagrees with manifest combination");
      if (!fragment_is_canonical(params, cf.data) || !hasher.verify(cf.data, entry.hashes[u]))
        issues.push_back(where + ": fragment does not match stored hash");
    }
  }
  return issues;
}

// Transport interface a recovering node talks through.  Requests return
// nullopt when the peer does not answer.
class Peer {
 public:
  virtual ~Peer() = default;
  virtual uint64_t id() const = 0;
  virtual uint32_t fragment_count(uint64_t block_id) const = 0;
  virtual std::optional<HashResponse> request_hash(uint64_t block_id, uint32_t index) = 0;
  virtual std::optional<CodedFragment> request_fragment(uint64_t block_id, uint32_t index) = 0;
  virtual std::optional<BlockManifest> request_manifest(uint64_t block_id) = 0;
};

using PeerDirectory = std::vector<Peer*>;

// In-process peer serving honestly from a NodeState.
class LocalPeer : public Peer {
 public:
  explicit LocalPeer(const NodeState& state) : state_(&state) {}

  uint64_t id() const override { return state_->node_id; }

  uint32_t fragment_count(uint64_t block_id) const override {
    auto it = state_->store.find(block_id);
    return it == state_->store.end() ? 0 : uint32_t(it->second.fragments.size());
  }

  std::optional<HashResponse> request_hash(uint64_t block_id, uint32_t index) override {
    if (index >= fragment_count(block_id)) return std::nullopt;
    return serve_hash(*state_, block_id, index);
  }

  std::optional<CodedFragment> request_fragment(uint64_t block_id, uint32_t index) override {
    if (index >= fragment_count(block_id)) return std::nullopt;
    return serve_fragment(*state_, block_id, index);
  }

  std::optional<BlockManifest> request_manifest(uint64_t block_id) override {
    if (!state_->store.count(block_id)) return std::nullopt;
    return serve_manifest(*state_, block_id);
  }

 private:
  const NodeState* state_;
};

struct TraceHashCheck {
  uint64_t peer = 0;
  uint32_t index = 0;
  Int claimed;
  bool ok = false;
};

struct TraceFragmentCheck {
  uint64_t peer = 0;
  uint32_t index = 0;
  Int expected_hash;
  std::string digest;         // sha256 of the wire bytes when encodable
  bool ok = false;
  std::vector<Int> elements;  // full payload kept only as evidence of failure
};

struct TraceBlacklist {
  uint64_t peer = 0;
  uint32_t index = 0;
  Offense offense = Offense::bad_hash;
};

struct TraceDecodeRound {
  uint32_t rows_fed = 0;
  uint32_t rank = 0;
  bool complete = false;
};

// Complete record of one recovery attempt: enough to re-verify offline that
// every check outcome and every blacklisting was justified.
struct RecoveryTrace {
  uint64_t recoverer = 0;
  uint64_t block_id = 0;
  uint32_t k = 0;
  uint32_t degree = 0;
  double epsilon = 0;
  std::vector<Int> manifest_hashes;
  std::vector<TraceHashCheck> hash_checks;
  std::vector<TraceFragmentCheck> fragment_checks;
  std::vector<TraceBlacklist> blacklists;
  std::vector<TraceDecodeRound> decode_rounds;
  std::vector<uint64_t> unresponsive;
  uint32_t hashes_fetched = 0;
  uint32_t fragments_fetched = 0;
  bool success = false;
};

struct RecoveryOutcome {
  std::optional<std::vector<uint8_t>> block;
  RecoveryTrace trace;
  std::optional<Errc> error;
};

struct RecoveryResult {
  std::vector<uint8_t> block;
  RecoveryTrace trace;
};

struct RecoverOptions {
  const FragmentHasher* hasher = nullptr;           // shared generator tables
  const BlockManifest* pinned_manifest = nullptr;   // trusted local manifest
};

// Five-phase recovery:
//   1. obtain the manifest (pinned locally or two agreeing peer responses),
//   2. fetch ceil(k * (1 + epsilon)) coded-fragment hashes and verify each
//      against the manifest under re-derived coefficients,
//   3. fetch fragments for verified hashes, checking each against its hash,
//      until k independent rows have been fed to the decoder,
//   4. on shortfall, raise the hash budget by ceil(k/10) and repeat,
//   5. decode and reassemble.
// Peers serving anything that fails a check are reported and blacklisted on
// the spot and never asked again; unresponsive peers are skipped for the
// rest of the attempt but stay off the blacklist.  Fragments are requested
// strictly lazily, so with a clean peer set exactly k are transferred.
inline RecoveryOutcome try_recover_block(NodeState& state, const SystemParams& params,
                                         uint64_t block_id, const PeerDirectory& directory,
                                         const RecoverOptions& opts = {}) {
  RecoveryOutcome outcome;
  RecoveryTrace& trace = outcome.trace;
  trace.recoverer = state.node_id;
  trace.block_id = block_id;
  trace.k = params.k;
  trace.degree = state.effective_degree(params);
  trace.epsilon = state.epsilon_budget;

  std::optional<FragmentHasher> own_hasher;
  const FragmentHasher* hasher = opts.hasher;
  if (!hasher) {
    own_hasher.emplace(params);
    hasher = &*own_hasher;
  }

  std::vector<Peer*> order(directory.begin(), directory.end());
  {
    std::vector<uint8_t> msg(params.seed.begin(), params.seed.end());
    const char label[] = "recover-order";
    msg.insert(msg.end(), label, label + sizeof(label) - 1);
    bytes::put_u64(msg, state.node_id);
    bytes::put_u64(msg, block_id);
    XofStream shuffle(std::move(msg));
    for (size_t i = 0; i + 1 < order.size(); ++i) {
      size_t j = i + size_t(shuffle.below(order.size() - i));
      std::swap(order[i], order[j]);
    }
  }

  std::set<uint64_t> silent;  // peers that stopped answering this attempt
  auto skip_peer = [&](const Peer* p) {
    return state.blacklist.count(p->id()) != 0 || silent.count(p->id()) != 0;
  };
  auto mark_unresponsive = [&](Peer* p, uint32_t index) {
    silent.insert(p->id());
    trace.unresponsive.push_back(p->id());
    report_malicious(state, p->id(), block_id, index, Offense::unresponsive, std::nullopt);
  };

  BlockManifest manifest;
  bool have_manifest = false;
  if (opts.pinned_manifest) {
    manifest = *opts.pinned_manifest;
    have_manifest = true;
  } else if (auto it = state.store.find(block_id); it != state.store.end()) {
    manifest = it->second.manifest;
    have_manifest = true;
  } else {
    std::vector<BlockManifest> seen;
    for (Peer* p : order) {
      if (have_manifest) break;
      if (skip_peer(p)) continue;
      auto resp = p->request_manifest(block_id);
      if (!resp) {
        mark_unresponsive(p, UINT32_MAX);
        continue;
      }
      for (const auto& prev : seen)
        if (prev == *resp) {
          manifest = *resp;
          have_manifest = true;
          break;
        }
      if (!have_manifest) seen.push_back(std::move(*resp));
    }
  }
  if (!have_manifest || manifest.block_id != block_id ||
      manifest.source_hashes.size() != params.k) {
    outcome.error = Errc::manifest_unavailable;
    return outcome;
  }
  trace.manifest_hashes.reserve(params.k);
  for (const auto& h : manifest.source_hashes) trace.manifest_hashes.push_back(h.value);

  std::optional<HashCombiner> combiner;
  try {
    combiner.emplace(params, manifest.source_hashes);
  } catch (const Error&) {
    outcome.error = Errc::manifest_unavailable;
    return outcome;
  }

  // round-robin candidate enumeration: slot s asks every peer for index s
  std::vector<uint32_t> counts(order.size());
  uint32_t max_count = 0;
  for (size_t i = 0; i < order.size(); ++i) {
    counts[i] = order[i]->fragment_count(block_id);
    max_count = std::max(max_count, counts[i]);
  }
  size_t rr_slot = 0, rr_peer = 0;
  auto next_candidate = [&]() -> std::optional<std::pair<Peer*, uint32_t>> {
    while (rr_slot < max_count) {
      if (rr_peer == order.size()) {
        rr_peer = 0;
        ++rr_slot;
        continue;
      }
      size_t i = rr_peer++;
      if (rr_slot < counts[i]) return std::make_pair(order[i], uint32_t(rr_slot));
    }
    return std::nullopt;
  };
  bool exhausted = false;

  struct Candidate {
    Peer* peer;
    uint32_t index;
    FragmentHash hash;
    CoeffVector cv;
  };
  std::vector<Candidate> verified;
  size_t next_fragment = 0;

  IncrementalDecoder decoder(params);
  uint64_t target = uint64_t(std::ceil(double(params.k) * (1.0 + state.epsilon_budget)));
  uint64_t escalation = (params.k + 9) / 10;

  for (;;) {
    // phase 2: verified-hash pool up to the current budget
    while (verified.size() < target && !exhausted) {
      auto cand = next_candidate();
      if (!cand) {
        exhausted = true;
        break;
      }
      auto [peer, index] = *cand;
      if (skip_peer(peer)) continue;
      auto resp = peer->request_hash(block_id, index);
      if (!resp) {
        mark_unresponsive(peer, index);
        continue;
      }
      ++trace.hashes_fetched;
      auto cv = derive_coefficients(params, peer->id(), block_id, index, trace.degree);
      bool ok = combiner->verify(cv.coeffs, resp->hash);
      trace.hash_checks.push_back(TraceHashCheck{peer->id(), index, resp->hash.value, ok});
      if (!ok) {
        report_malicious(state, peer->id(), block_id, index, Offense::bad_hash,
                         EvidenceRecord{resp->hash.value, ""});
        trace.blacklists.push_back(TraceBlacklist{peer->id(), index, Offense::bad_hash});
        continue;
      }
      verified.push_back(Candidate{peer, index, resp->hash, std::move(cv)});
    }

    // phase 3: lazy fragment fetch against the verified pool
    while (!decoder.complete() && next_fragment < verified.size()) {
      Candidate& cand = verified[next_fragment++];
      if (skip_peer(cand.peer)) continue;
      auto frag = cand.peer->request_fragment(block_id, cand.index);
      if (!frag) {
        mark_unresponsive(cand.peer, cand.index);
        continue;
      }
      ++trace.fragments_fetched;
      bool structural = frag->node_id == cand.peer->id() && frag->block_id == block_id &&
                        frag->index == cand.index && fragment_is_canonical(params, frag->data);
      bool ok = structural && hasher->verify(frag->data, cand.hash);
      TraceFragmentCheck check;
      check.peer = cand.peer->id();
      check.index = cand.index;
      check.expected_hash = cand.hash.value;
      check.ok = ok;
      if (structural) check.digest = sha256_hex(coded_fragment_to_bytes(params, *frag));
      if (!ok) check.elements = frag->data.elements;
      trace.fragment_checks.push_back(std::move(check));
      if (!ok) {
        report_malicious(state, cand.peer->id(), block_id, cand.index, Offense::bad_fragment,
                         EvidenceRecord{cand.hash.value, trace.fragment_checks.back().digest});
        trace.blacklists.push_back(
            TraceBlacklist{cand.peer->id(), cand.index, Offense::bad_fragment});
        continue;
      }
      decoder.feed(cand.cv, *frag);
    }
    trace.decode_rounds.push_back(
        TraceDecodeRound{decoder.rows_fed(), decoder.rank(), decoder.complete()});
    if (decoder.complete()) break;
    if (exhausted && next_fragment >= verified.size()) {
      outcome.error = Errc::recovery_failed;
      return outcome;
    }
    target += escalation;  // phase 4
  }

  // phase 5
  auto fragments = decoder.solve();
  if (params.element_size == 0) {
    outcome.error = Errc::invalid_geometry;
    return outcome;
  }
  outcome.block = reassemble_block(params, fragments, manifest_layout(params, manifest));
  trace.success = true;
  return outcome;
}

inline RecoveryResult recover_block(NodeState& state, const SystemParams& params,
                                    uint64_t block_id, const PeerDirectory& directory,
                                    const RecoverOptions& opts = {}) {
  auto outcome = try_recover_block(state, params, block_id, directory, opts);
  if (!outcome.block) fail(*outcome.error, "block " + std::to_string(block_id));
  return RecoveryResult{std::move(*outcome.block), std::move(outcome.trace)};
}

}  // namespace ccls
