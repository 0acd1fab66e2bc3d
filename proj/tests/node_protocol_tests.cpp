#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <memory>

#include "ccls/node_protocol.hpp"
#include "test_params.hpp"

using namespace ccls;

namespace {

std::vector<uint8_t> pattern_block(size_t n, uint8_t salt = 0) {
  std::vector<uint8_t> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = uint8_t(i * 31 + salt);
  return out;
}

NodeState make_node(uint64_t id, uint32_t replication, uint32_t degree = 0) {
  NodeState state;
  state.node_id = id;
  state.replication = replication;
  state.degree = degree;
  return state;
}

}  // namespace

TEST_CASE("ingest keeps coded state consistent with the manifest", "[node]") {
  const auto& params = small_params();
  auto block = pattern_block(100);
  NodeState state = make_node(7, 3, 2);
  ingest_block(state, params, 42, block);

  REQUIRE(state.store.count(42) == 1);
  const StoredBlock& entry = state.store.at(42);
  CHECK(entry.manifest.block_id == 42);
  CHECK(entry.manifest.block_len == 100);
  REQUIRE(entry.manifest.source_hashes.size() == params.k);
  REQUIRE(entry.fragments.size() == 3);
  REQUIRE(entry.hashes.size() == 3);

  HashCombiner combiner(params, entry.manifest.source_hashes);
  FragmentHasher hasher(params);
  for (uint32_t u = 0; u < 3; ++u) {
    const CodedFragment& cf = entry.fragments[u];
    CHECK(cf.node_id == 7);
    CHECK(cf.block_id == 42);
    CHECK(cf.index == u);
    CHECK(cf.data.elements.size() == params.m);
    auto cv = derive_coefficients(params, 7, 42, u, 2);
    // stored hash, direct hash of the payload and manifest combination all agree
    CHECK(combiner.verify(cv.coeffs, entry.hashes[u]));
    CHECK(hasher.verify(cf.data, entry.hashes[u]));
  }
  CHECK(audit_store(state, params).empty());

  uint64_t expected_bytes = 3 * (24 + uint64_t(params.m) * params.q_width()) +
                            3 * params.p_width() +
                            manifest_to_text(params, entry.manifest).size();
  CHECK(stored_block_bytes(state, params, 42) == expected_bytes);
}

TEST_CASE("ingest rejects a block that contradicts the expected manifest", "[node]") {
  const auto& params = small_params();
  NodeState source = make_node(1, 1);
  ingest_block(source, params, 3, pattern_block(64));
  BlockManifest manifest = source.store.at(3).manifest;

  NodeState other = make_node(2, 1);
  CHECK_THROWS_MATCHES(ingest_block(other, params, 3, pattern_block(64, 1), &manifest), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == Errc::manifest_mismatch;
                       }));
  // same bytes satisfy it
  ingest_block(other, params, 3, pattern_block(64), &manifest);
  CHECK(other.store.count(3) == 1);
}

TEST_CASE("serve operations return stored state or not_stored", "[node]") {
  const auto& params = small_params();
  NodeState state = make_node(5, 2);
  ingest_block(state, params, 9, pattern_block(80));

  CHECK(serve_manifest(state, 9).block_len == 80);
  CHECK(serve_hash(state, 9, 1).hash == state.store.at(9).hashes[1]);
  CHECK(serve_hash(state, 9, 1).node_id == 5);
  CHECK(serve_fragment(state, 9, 0) == state.store.at(9).fragments[0]);

  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::invalid_argument;
  };
  CHECK(code_of([&] { serve_manifest(state, 8); }) == Errc::not_stored);
  CHECK(code_of([&] { serve_hash(state, 9, 2); }) == Errc::not_stored);
  CHECK(code_of([&] { serve_fragment(state, 9, 7); }) == Errc::not_stored);
}

TEST_CASE("manifest text form is canonical and strict", "[node]") {
  auto params = toy_params();
  BlockManifest manifest;
  manifest.block_id = 7;
  manifest.block_len = 0;
  manifest.source_hashes = {FragmentHash{4}, FragmentHash{9}};

  std::string text = manifest_to_text(params, manifest);
  CHECK(text ==
        "block_id 7\n"
        "block_len 0\n"
        "k 2\n"
        "element_size 0\n"
        "hash[0] 04\n"
        "hash[1] 09\n");
  CHECK(manifest_from_text(params, text) == manifest);

  auto rejects = [&](const std::string& bad) {
    try {
      manifest_from_text(params, bad);
    } catch (const Error& e) {
      return e.code() == Errc::malformed_encoding;
    }
    return false;
  };
  CHECK(rejects(""));                                       // truncated
  CHECK(rejects(text.substr(0, text.size() - 9)));          // missing last hash
  CHECK(rejects(text + "extra line\n"));                    // trailing content
  CHECK(rejects([&] {                                       // hash of zero
    std::string t = text;
    t.replace(t.find("hash[0] 04"), 10, "hash[0] 00");
    return t;
  }()));
  CHECK(rejects([&] {  // wrong hash width
    std::string t = text;
    t.replace(t.find("hash[0] 04"), 10, "hash[0] 4");
    return t;
  }()));
  CHECK(rejects([&] {  // geometry disagrees with params
    std::string t = text;
    t.replace(t.find("k 2"), 3, "k 3");
    return t;
  }()));

  // large hash values survive the roundtrip at full width
  const auto& wide = small_params();
  NodeState state = make_node(1, 1);
  ingest_block(state, wide, 0, pattern_block(50));
  const BlockManifest& real = state.store.at(0).manifest;
  CHECK(manifest_from_text(wide, manifest_to_text(wide, real)) == real);
}

TEST_CASE("reports blacklist evidence-backed offenses only", "[node]") {
  NodeState state = make_node(1, 1);
  report_malicious(state, 9, 5, 0, Offense::unresponsive, std::nullopt);
  CHECK(state.reports.size() == 1);
  CHECK(state.blacklist.empty());

  report_malicious(state, 9, 5, 1, Offense::bad_hash, EvidenceRecord{Int(3), ""});
  CHECK(state.blacklist.at(9) == Offense::bad_hash);
  // first offense wins, reports accumulate
  report_malicious(state, 9, 5, 2, Offense::bad_fragment, EvidenceRecord{Int(4), "ab"});
  CHECK(state.blacklist.at(9) == Offense::bad_hash);
  CHECK(state.reports.size() == 3);
}

namespace {

// Directory of honestly ingested nodes, by value so tests can mutate.
struct World {
  std::vector<NodeState> nodes;
  std::vector<std::unique_ptr<Peer>> peers;
  PeerDirectory directory;

  Peer* peer_for(uint64_t id) {
    for (auto& p : peers)
      if (p->id() == id) return p.get();
    return nullptr;
  }
};

World honest_world(const SystemParams& params, uint64_t block_id,
                   std::span<const uint8_t> block, uint32_t peer_count, uint32_t replication,
                   uint32_t degree = 0) {
  World w;
  w.nodes.reserve(peer_count);
  for (uint32_t i = 0; i < peer_count; ++i) {
    w.nodes.push_back(make_node(i + 1, replication, degree));
    ingest_block(w.nodes.back(), params, block_id, block);
  }
  for (auto& n : w.nodes) w.peers.push_back(std::make_unique<LocalPeer>(n));
  for (auto& p : w.peers) w.directory.push_back(p.get());
  return w;
}

class TamperedFragmentPeer : public LocalPeer {
 public:
  TamperedFragmentPeer(const NodeState& state, const Int& q) : LocalPeer(state), q_(q) {}

  std::optional<CodedFragment> request_fragment(uint64_t block_id, uint32_t index) override {
    auto cf = LocalPeer::request_fragment(block_id, index);
    if (cf) cf->data.elements[0] = (cf->data.elements[0] + 1) % q_;
    return cf;
  }

 private:
  Int q_;
};

class TamperedHashPeer : public LocalPeer {
 public:
  TamperedHashPeer(const NodeState& state, const Int& p) : LocalPeer(state), p_(p) {}

  std::optional<HashResponse> request_hash(uint64_t block_id, uint32_t index) override {
    auto resp = LocalPeer::request_hash(block_id, index);
    if (resp) resp->hash.value = resp->hash.value % (p_ - 1) + 1;
    return resp;
  }

 private:
  Int p_;
};

class DeadPeer : public Peer {
 public:
  explicit DeadPeer(uint64_t id) : id_(id) {}
  uint64_t id() const override { return id_; }
  uint32_t fragment_count(uint64_t) const override { return 2; }
  std::optional<HashResponse> request_hash(uint64_t, uint32_t) override { return std::nullopt; }
  std::optional<CodedFragment> request_fragment(uint64_t, uint32_t) override {
    return std::nullopt;
  }
  std::optional<BlockManifest> request_manifest(uint64_t) override { return std::nullopt; }

 private:
  uint64_t id_;
};

}  // namespace

TEST_CASE("recovery from honest peers is bit-exact and fetches exactly k fragments", "[node]") {
  const auto& params = small_params();
  auto block = pattern_block(77);
  World w = honest_world(params, 6, block, 3, 2);

  NodeState recoverer = make_node(100, 2);
  recoverer.epsilon_budget = 0.1;
  auto result = recover_block(recoverer, params, 6, w.directory);

  CHECK(result.block == block);
  CHECK(result.trace.success);
  CHECK(result.trace.fragments_fetched == params.k);  // lazy fetch, no waste
  CHECK(result.trace.hashes_fetched == 5);            // ceil(4 * 1.1)
  CHECK(result.trace.blacklists.empty());
  CHECK(recoverer.blacklist.empty());
  CHECK(result.trace.manifest_hashes.size() == params.k);
  for (const auto& check : result.trace.hash_checks) CHECK(check.ok);
  for (const auto& check : result.trace.fragment_checks) CHECK(check.ok);
  REQUIRE(!result.trace.decode_rounds.empty());
  CHECK(result.trace.decode_rounds.back().complete);

  // deterministic: a second identical attempt produces the same trace shape
  NodeState again = make_node(100, 2);
  auto repeat = recover_block(again, params, 6, w.directory);
  CHECK(repeat.block == block);
  CHECK(repeat.trace.hashes_fetched == result.trace.hashes_fetched);
  CHECK(repeat.trace.fragments_fetched == result.trace.fragments_fetched);
}

TEST_CASE("recovery works from the recoverer's own manifest or a pinned one", "[node]") {
  const auto& params = small_params();
  auto block = pattern_block(44);
  World w = honest_world(params, 11, block, 2, 2);

  SECTION("own store supplies the manifest") {
    NodeState recoverer = make_node(50, 2);
    ingest_block(recoverer, params, 11, block);
    auto result = recover_block(recoverer, params, 11, w.directory);
    CHECK(result.block == block);
  }
  SECTION("pinned manifest, no peer quorum needed") {
    // one well-stocked peer: no two-peer quorum is possible, the pin makes
    // it moot and the six fragments still cover the k=4 decode
    World solo = honest_world(params, 11, block, 1, 6);
    BlockManifest pinned = solo.nodes[0].store.at(11).manifest;
    RecoverOptions opts;
    opts.pinned_manifest = &pinned;
    NodeState recoverer = make_node(51, 2);
    auto result = recover_block(recoverer, params, 11, solo.directory, opts);
    CHECK(result.block == block);
  }
  SECTION("single peer without a pin cannot establish the manifest") {
    NodeState recoverer = make_node(52, 2);
    PeerDirectory one{w.directory[0]};
    auto outcome = try_recover_block(recoverer, params, 11, one);
    REQUIRE(outcome.error.has_value());
    CHECK(*outcome.error == Errc::manifest_unavailable);
    CHECK_FALSE(outcome.trace.success);
  }
}

TEST_CASE("manifest needs two agreeing peers", "[node]") {
  const auto& params = small_params();
  auto block = pattern_block(60);
  World w = honest_world(params, 4, block, 3, 2);

  // one peer advertises a divergent manifest: no two agree until the third
  w.nodes[1].store.at(4).manifest.block_len = 59;
  NodeState recoverer = make_node(60, 2);
  auto result = recover_block(recoverer, params, 4, w.directory);
  CHECK(result.block == block);

  // with only the divergent pair, no quorum forms
  w.nodes[0].store.at(4).manifest.block_len = 58;
  NodeState second = make_node(61, 2);
  PeerDirectory two{w.directory[0], w.directory[1]};
  auto outcome = try_recover_block(second, params, 4, two);
  REQUIRE(outcome.error.has_value());
  CHECK(*outcome.error == Errc::manifest_unavailable);
}

TEST_CASE("a peer serving corrupt fragments is blacklisted and routed around", "[node]") {
  const auto& params = small_params();
  auto block = pattern_block(90);
  World w = honest_world(params, 8, block, 3, 2);

  TamperedFragmentPeer bad(w.nodes[1], params.q);
  w.directory[1] = &bad;

  NodeState recoverer = make_node(70, 2);
  auto result = recover_block(recoverer, params, 8, w.directory);
  CHECK(result.block == block);
  REQUIRE(recoverer.blacklist.count(2) == 1);
  CHECK(recoverer.blacklist.at(2) == Offense::bad_fragment);
  CHECK(recoverer.blacklist.size() == 1);

  uint32_t failed = 0;
  for (const auto& check : result.trace.fragment_checks)
    if (!check.ok) {
      ++failed;
      CHECK(check.peer == 2);
      CHECK(check.elements.size() == params.m);  // evidence retained
      CHECK(!check.digest.empty());
    }
  CHECK(failed == 1);  // blacklisted after the first bad serve, never asked again
  const auto& report = recoverer.reports;
  REQUIRE(!report.empty());
  CHECK(report.back().evidence.has_value());
}

TEST_CASE("a peer serving corrupt hashes is caught before any fragment is fetched", "[node]") {
  const auto& params = small_params();
  auto block = pattern_block(33);
  World w = honest_world(params, 2, block, 3, 2);

  TamperedHashPeer bad(w.nodes[2], params.p);
  w.directory[2] = &bad;

  NodeState recoverer = make_node(71, 2);
  auto result = recover_block(recoverer, params, 2, w.directory);
  CHECK(result.block == block);
  REQUIRE(recoverer.blacklist.count(3) == 1);
  CHECK(recoverer.blacklist.at(3) == Offense::bad_hash);
  for (const auto& check : result.trace.fragment_checks) CHECK(check.peer != 3);
}

TEST_CASE("unresponsive peers are skipped but never blacklisted", "[node]") {
  const auto& params = small_params();
  auto block = pattern_block(55);
  World w = honest_world(params, 12, block, 2, 2);

  DeadPeer dead(99);
  w.directory.push_back(&dead);

  NodeState recoverer = make_node(72, 2);
  auto result = recover_block(recoverer, params, 12, w.directory);
  CHECK(result.block == block);
  CHECK(recoverer.blacklist.empty());
  CHECK(std::count(result.trace.unresponsive.begin(), result.trace.unresponsive.end(), 99) >= 1);
  bool reported = false;
  for (const auto& r : recoverer.reports)
    reported |= r.accused == 99 && r.offense == Offense::unresponsive;
  CHECK(reported);
}

TEST_CASE("recovery fails cleanly when peers cannot supply k independent rows", "[node]") {
  const auto& params = small_params();  // k = 4
  auto block = pattern_block(70);
  World w = honest_world(params, 13, block, 1, 3);  // one peer, three fragments

  NodeState recoverer = make_node(73, 2);
  ingest_block(recoverer, params, 13, block);  // manifest comes from its own store
  auto outcome = try_recover_block(recoverer, params, 13, w.directory);
  CHECK_FALSE(outcome.block.has_value());
  REQUIRE(outcome.error.has_value());
  CHECK(*outcome.error == Errc::recovery_failed);
  CHECK_FALSE(outcome.trace.success);
  CHECK(outcome.trace.fragments_fetched == 3);
  REQUIRE(!outcome.trace.decode_rounds.empty());
  CHECK(outcome.trace.decode_rounds.back().rank == 3);

  CHECK_THROWS_MATCHES(recover_block(recoverer, params, 13, w.directory), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == Errc::recovery_failed;
                       }));
}

TEST_CASE("corrupt serves cost extra fetches but recovery still lands", "[node]") {
  const auto& params = small_params();  // k = 4, initial hash target 5
  auto block = pattern_block(99);
  World w = honest_world(params, 14, block, 3, 2);

  // corrupt fragments sit inside the initial verified pool, so at least one
  // fetch is wasted and replaced from the remaining supply
  TamperedFragmentPeer bad(w.nodes[0], params.q);
  w.directory[0] = &bad;

  NodeState recoverer = make_node(74, 2);
  auto result = recover_block(recoverer, params, 14, w.directory);
  CHECK(result.block == block);
  CHECK(result.trace.fragments_fetched >= params.k + 1);
  CHECK(recoverer.blacklist.at(1) == Offense::bad_fragment);
}

TEST_CASE("sparse coded stores still recover", "[node]") {
  const auto& params = small_params();  // k = 4
  auto block = pattern_block(88);
  World w = honest_world(params, 15, block, 6, 3, 2);  // degree-2 fragments

  NodeState recoverer = make_node(75, 2);
  recoverer.degree = 2;
  auto result = recover_block(recoverer, params, 15, w.directory);
  CHECK(result.block == block);
  CHECK(result.trace.degree == 2);
}

TEST_CASE("store audit flags tampering", "[node]") {
  const auto& params = small_params();
  NodeState state = make_node(3, 2);
  ingest_block(state, params, 1, pattern_block(40));
  REQUIRE(audit_store(state, params).empty());

  SECTION("payload flip") {
    auto& e = state.store.at(1).fragments[0].data.elements[0];
    e = (e + 1) % params.q;
    auto issues = audit_store(state, params);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].find("fragment 0") != std::string::npos);
  }
  SECTION("stored hash flip") {
    state.store.at(1).hashes[1].value = 1;
    CHECK(audit_store(state, params).size() >= 1);
  }
  SECTION("wrong origin") {
    state.store.at(1).fragments[1].node_id = 9;
    auto issues = audit_store(state, params);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].find("wrong origin") != std::string::npos);
  }
}
