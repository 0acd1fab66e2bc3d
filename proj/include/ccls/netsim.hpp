#pragma once

#include <chrono>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccls/node_protocol.hpp"

namespace ccls {

enum class Strategy { honest, corrupt_fragment, corrupt_hash, unresponsive };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::honest: return "honest";
    case Strategy::corrupt_fragment: return "corrupt_fragment";
    case Strategy::corrupt_hash: return "corrupt_hash";
    case Strategy::unresponsive: return "unresponsive";
  }
  return "unknown";
}

// A whole simulated deployment: node count, adversary mix, block workload
// and code geometry.  Runs are a pure function of this struct.
struct ScenarioConfig {
  uint32_t nodes = 10;
  uint32_t k = 8;
  uint32_t r = 2;
  uint32_t degree = 0;  // 0 = dense
  uint32_t blocks = 10;
  uint64_t block_size = 4096;
  double epsilon = 0.1;
  double corrupt_fragment_fraction = 0.0;
  double corrupt_hash_fraction = 0.0;
  double unresponsive_fraction = 0.0;
  uint64_t rng_seed = 0;
  unsigned p_bits = 1024;
  unsigned q_bits = 257;
  uint32_t element_size = 32;
  bool keep_traces = false;

  std::array<uint8_t, 32> seed_bytes() const {
    std::array<uint8_t, 32> seed{};
    for (int b = 0; b < 8; ++b) seed[b] = uint8_t(rng_seed >> (56 - 8 * b));
    return seed;
  }
};

inline std::string scenario_to_text(const ScenarioConfig& cfg) {
  std::string out;
  auto put = [&out](const char* key, const std::string& value) {
    out += key;
    out += ' ';
    out += value;
    out += '\n';
  };
  char buf[64];
  auto real = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  put("nodes", std::to_string(cfg.nodes));
  put("k", std::to_string(cfg.k));
  put("r", std::to_string(cfg.r));
  put("degree", std::to_string(cfg.degree));
  put("blocks", std::to_string(cfg.blocks));
  put("block_size", std::to_string(cfg.block_size));
  put("epsilon", real(cfg.epsilon));
  put("corrupt_fragment", real(cfg.corrupt_fragment_fraction));
  put("corrupt_hash", real(cfg.corrupt_hash_fraction));
  put("unresponsive", real(cfg.unresponsive_fraction));
  put("rng_seed", std::to_string(cfg.rng_seed));
  put("p_bits", std::to_string(cfg.p_bits));
  put("q_bits", std::to_string(cfg.q_bits));
  put("element_size", std::to_string(cfg.element_size));
  return out;
}

inline ScenarioConfig scenario_from_text(std::string_view text) {
  ScenarioConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto space = line.find(' ');
    if (space == std::string::npos) fail(Errc::malformed_encoding, "expected 'key value'");
    std::string key = line.substr(0, space);
    std::string value = line.substr(space + 1);
    try {
      if (key == "nodes") cfg.nodes = uint32_t(std::stoul(value));
      else if (key == "k") cfg.k = uint32_t(std::stoul(value));
      else if (key == "r") cfg.r = uint32_t(std::stoul(value));
      else if (key == "degree") cfg.degree = uint32_t(std::stoul(value));
      else if (key == "blocks") cfg.blocks = uint32_t(std::stoul(value));
      else if (key == "block_size") cfg.block_size = std::stoull(value);
      else if (key == "epsilon") cfg.epsilon = std::stod(value);
      else if (key == "corrupt_fragment") cfg.corrupt_fragment_fraction = std::stod(value);
      else if (key == "corrupt_hash") cfg.corrupt_hash_fraction = std::stod(value);
      else if (key == "unresponsive") cfg.unresponsive_fraction = std::stod(value);
      else if (key == "rng_seed") cfg.rng_seed = std::stoull(value);
      else if (key == "p_bits") cfg.p_bits = unsigned(std::stoul(value));
      else if (key == "q_bits") cfg.q_bits = unsigned(std::stoul(value));
      else if (key == "element_size") cfg.element_size = uint32_t(std::stoul(value));
      else fail(Errc::malformed_encoding, "unknown key " + key);
    } catch (const std::logic_error&) {
      fail(Errc::malformed_encoding, "bad value for " + key);
    }
  }
  return cfg;
}

inline std::vector<Strategy> assign_strategies(const ScenarioConfig& cfg) {
  auto frac_ok = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!frac_ok(cfg.corrupt_fragment_fraction) || !frac_ok(cfg.corrupt_hash_fraction) ||
      !frac_ok(cfg.unresponsive_fraction))
    fail(Errc::invalid_argument, "adversary fractions must be within [0, 1]");
  uint32_t n_cf = uint32_t(cfg.corrupt_fragment_fraction * cfg.nodes);
  uint32_t n_ch = uint32_t(cfg.corrupt_hash_fraction * cfg.nodes);
  uint32_t n_un = uint32_t(cfg.unresponsive_fraction * cfg.nodes);
  if (n_cf + n_ch + n_un >= cfg.nodes)
    fail(Errc::invalid_argument, "no honest node left to recover");

  std::vector<uint32_t> ids(cfg.nodes);
  std::iota(ids.begin(), ids.end(), 0);
  auto seed = cfg.seed_bytes();
  XofStream stream(seed, "strategies");
  for (size_t i = 0; i + 1 < ids.size(); ++i) {
    size_t j = i + size_t(stream.below(ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  std::vector<Strategy> strategies(cfg.nodes, Strategy::honest);
  size_t at = 0;
  for (uint32_t i = 0; i < n_cf; ++i) strategies[ids[at++]] = Strategy::corrupt_fragment;
  for (uint32_t i = 0; i < n_ch; ++i) strategies[ids[at++]] = Strategy::corrupt_hash;
  for (uint32_t i = 0; i < n_un; ++i) strategies[ids[at++]] = Strategy::unresponsive;
  return strategies;
}

struct ScenarioMetrics {
  uint32_t recoveries = 0;
  uint32_t succeeded = 0;
  uint64_t hashes_fetched = 0;
  uint64_t fragments_fetched = 0;
  uint64_t bad_hashes_detected = 0;
  uint64_t bad_fragments_detected = 0;
  uint64_t corrupt_hashes_served = 0;
  uint64_t corrupt_fragments_served = 0;
  uint64_t honest_blacklisted = 0;
  uint64_t corrupt_servers_unpunished = 0;
  uint64_t payload_mismatches = 0;
  double mean_epsilon = 0.0;  // over successful recoveries: fetched fragments / k - 1
  bool unsolvable = false;
  double ingest_seconds = 0.0;
  double recovery_seconds = 0.0;
};

struct RecoveryRow {
  uint64_t block_id = 0;
  uint64_t recoverer = 0;
  bool success = false;
  uint32_t hashes_fetched = 0;
  uint32_t fragments_fetched = 0;
  uint32_t bad_hashes = 0;
  uint32_t bad_fragments = 0;
  uint32_t blacklisted = 0;
  double epsilon_measured = 0.0;
};

struct ScenarioResult {
  ScenarioConfig config;
  SystemParams params;
  std::vector<Strategy> strategies;
  ScenarioMetrics metrics;
  std::vector<RecoveryRow> rows;
  std::vector<RecoveryTrace> traces;  // populated when config.keep_traces
};

namespace detail {

// Peer adapter that plays one of the adversary strategies on top of an
// honestly ingested store.  Corruptions are deterministic per
// (node, block, index) and counted as served so runs can assert that every
// served corruption was caught.
class SimPeer final : public Peer {
 public:
  SimPeer(const SystemParams& params, const NodeState& state, Strategy strategy,
          ScenarioMetrics& metrics, std::set<uint64_t>& corrupt_servers)
      : params_(&params), state_(&state), strategy_(strategy), metrics_(&metrics),
        corrupt_servers_(&corrupt_servers) {}

  uint64_t id() const override { return state_->node_id; }

  uint32_t fragment_count(uint64_t block_id) const override {
    auto it = state_->store.find(block_id);
    return it == state_->store.end() ? 0 : uint32_t(it->second.fragments.size());
  }

  std::optional<BlockManifest> request_manifest(uint64_t block_id) override {
    if (strategy_ == Strategy::unresponsive) return std::nullopt;
    if (!state_->store.count(block_id)) return std::nullopt;
    return serve_manifest(*state_, block_id);
  }

  std::optional<HashResponse> request_hash(uint64_t block_id, uint32_t index) override {
    if (strategy_ == Strategy::unresponsive) return std::nullopt;
    if (index >= fragment_count(block_id)) return std::nullopt;
    auto resp = serve_hash(*state_, block_id, index);
    if (strategy_ == Strategy::corrupt_hash) {
      XofStream stream(std::span<const uint8_t>(params_->seed), "adversary-hash",
                       std::array<uint64_t, 3>{id(), block_id, index});
      Int exp = stream.uniform_int(params_->q - 1, params_->q_width() + 1) + 1;
      Int fake = powmod(params_->g[0], exp, params_->p);
      if (fake == resp.hash.value) fake = mulmod(fake, params_->g[0], params_->p);
      resp.hash.value = fake;
      ++metrics_->corrupt_hashes_served;
      corrupt_servers_->insert(id());
    }
    return resp;
  }

  std::optional<CodedFragment> request_fragment(uint64_t block_id, uint32_t index) override {
    if (strategy_ == Strategy::unresponsive) return std::nullopt;
    if (index >= fragment_count(block_id)) return std::nullopt;
    CodedFragment cf = serve_fragment(*state_, block_id, index);
    if (strategy_ == Strategy::corrupt_fragment) {
      XofStream stream(std::span<const uint8_t>(params_->seed), "adversary-fragment",
                       std::array<uint64_t, 3>{id(), block_id, index});
      size_t pos = size_t(stream.below(cf.data.elements.size()));
      Int delta = stream.uniform_int(params_->q - 1, params_->q_width() + 1) + 1;
      cf.data.elements[pos] = (cf.data.elements[pos] + delta) % params_->q;
      ++metrics_->corrupt_fragments_served;
      corrupt_servers_->insert(id());
    }
    return cf;
  }

 private:
  const SystemParams* params_;
  const NodeState* state_;
  Strategy strategy_;
  ScenarioMetrics* metrics_;
  std::set<uint64_t>* corrupt_servers_;
};

}  // namespace detail

// Runs the scenario: per block, every node ingests it, one designated
// honest node drops its copy and recovers it from the others.  Worlds are
// rebuilt per block, so blacklists start empty for every recovery.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  using clock = std::chrono::steady_clock;
  if (cfg.nodes < 2) fail(Errc::invalid_argument, "need at least two nodes");
  if (cfg.blocks == 0) fail(Errc::invalid_argument, "need at least one block");
  if (cfg.degree > cfg.k) fail(Errc::invalid_argument, "degree exceeds k");

  ScenarioResult result;
  result.config = cfg;
  result.strategies = assign_strategies(cfg);

  GenOptions gen;
  gen.p_bits = cfg.p_bits;
  gen.q_bits = cfg.q_bits;
  gen.k = cfg.k;
  gen.element_size = cfg.element_size;
  gen.block_size = cfg.block_size;
  gen.seed = cfg.seed_bytes();
  result.params = generate_params(gen);
  const SystemParams& params = result.params;
  FragmentHasher hasher(params);

  std::vector<uint32_t> honest_ids;
  for (uint32_t i = 0; i < cfg.nodes; ++i)
    if (result.strategies[i] == Strategy::honest) honest_ids.push_back(i);
  ScenarioMetrics& metrics = result.metrics;
  metrics.unsolvable = uint64_t(honest_ids.size() - 1) * cfg.r < cfg.k;

  uint64_t usable = std::min<uint64_t>(cfg.block_size, params.packed_capacity() - 8);
  double epsilon_sum = 0.0;

  for (uint64_t j = 0; j < cfg.blocks; ++j) {
    uint64_t size;
    if (j == 0) size = 0;
    else if (j == 1) size = usable;
    else {
      XofStream stream(gen.seed, "block-size", std::array<uint64_t, 1>{j});
      size = stream.below(usable + 1);
    }
    XofStream data(gen.seed, "block-data", std::array<uint64_t, 1>{j});
    std::vector<uint8_t> block = data.next(size);

    auto t0 = clock::now();
    std::vector<NodeState> nodes(cfg.nodes);
    for (uint32_t i = 0; i < cfg.nodes; ++i) {
      nodes[i].node_id = i;
      nodes[i].replication = cfg.r;
      nodes[i].degree = cfg.degree;
      nodes[i].epsilon_budget = cfg.epsilon;
      ingest_block(nodes[i], params, j, block, nullptr, &hasher);
    }
    auto t1 = clock::now();
    metrics.ingest_seconds += std::chrono::duration<double>(t1 - t0).count();

    uint32_t recoverer = honest_ids[j % honest_ids.size()];
    nodes[recoverer].store.erase(j);

    std::set<uint64_t> corrupt_servers;
    std::vector<detail::SimPeer> peers;
    peers.reserve(cfg.nodes - 1);
    PeerDirectory directory;
    for (uint32_t i = 0; i < cfg.nodes; ++i) {
      if (i == recoverer) continue;
      peers.emplace_back(params, nodes[i], result.strategies[i], metrics, corrupt_servers);
      directory.push_back(&peers.back());
    }

    RecoverOptions opts;
    opts.hasher = &hasher;
    auto outcome = try_recover_block(nodes[recoverer], params, j, directory, opts);
    auto t2 = clock::now();
    metrics.recovery_seconds += std::chrono::duration<double>(t2 - t1).count();

    const RecoveryTrace& trace = outcome.trace;
    RecoveryRow row;
    row.block_id = j;
    row.recoverer = recoverer;
    row.success = trace.success;
    row.hashes_fetched = trace.hashes_fetched;
    row.fragments_fetched = trace.fragments_fetched;
    for (const auto& check : trace.hash_checks) row.bad_hashes += !check.ok;
    for (const auto& check : trace.fragment_checks) row.bad_fragments += !check.ok;
    row.blacklisted = uint32_t(nodes[recoverer].blacklist.size());
    row.epsilon_measured = double(trace.fragments_fetched) / double(params.k) - 1.0;

    ++metrics.recoveries;
    metrics.hashes_fetched += trace.hashes_fetched;
    metrics.fragments_fetched += trace.fragments_fetched;
    metrics.bad_hashes_detected += row.bad_hashes;
    metrics.bad_fragments_detected += row.bad_fragments;
    if (trace.success) {
      ++metrics.succeeded;
      epsilon_sum += row.epsilon_measured;
      if (!outcome.block || *outcome.block != block) ++metrics.payload_mismatches;
    }
    for (const auto& [accused, offense] : nodes[recoverer].blacklist) {
      (void)offense;
      Strategy s = result.strategies[accused];
      if (s == Strategy::honest || s == Strategy::unresponsive) ++metrics.honest_blacklisted;
    }
    for (uint64_t server : corrupt_servers)
      if (!nodes[recoverer].blacklist.count(server)) ++metrics.corrupt_servers_unpunished;

    result.rows.push_back(row);
    if (cfg.keep_traces) result.traces.push_back(std::move(outcome.trace));
  }
  if (metrics.succeeded > 0) metrics.mean_epsilon = epsilon_sum / metrics.succeeded;
  return result;
}

inline std::string rows_to_csv(std::span<const RecoveryRow> rows) {
  std::string out =
      "block_id,recoverer,success,hashes_fetched,fragments_fetched,bad_hashes,bad_fragments,"
      "blacklisted,epsilon\n";
  char line[256];
  for (const RecoveryRow& r : rows) {
    std::snprintf(line, sizeof(line), "%llu,%llu,%d,%u,%u,%u,%u,%u,%.6g\n",
                  (unsigned long long)r.block_id, (unsigned long long)r.recoverer,
                  r.success ? 1 : 0, r.hashes_fetched, r.fragments_fetched, r.bad_hashes,
                  r.bad_fragments, r.blacklisted, r.epsilon_measured);
    out += line;
  }
  return out;
}

inline std::string metrics_to_csv(const ScenarioMetrics& m) {
  std::string out = "metric,value\n";
  char line[128];
  auto put = [&](const char* key, double value) {
    std::snprintf(line, sizeof(line), "%s,%.6g\n", key, value);
    out += line;
  };
  put("recoveries", m.recoveries);
  put("succeeded", m.succeeded);
  put("hashes_fetched", double(m.hashes_fetched));
  put("fragments_fetched", double(m.fragments_fetched));
  put("bad_hashes_detected", double(m.bad_hashes_detected));
  put("bad_fragments_detected", double(m.bad_fragments_detected));
  put("corrupt_hashes_served", double(m.corrupt_hashes_served));
  put("corrupt_fragments_served", double(m.corrupt_fragments_served));
  put("honest_blacklisted", double(m.honest_blacklisted));
  put("corrupt_servers_unpunished", double(m.corrupt_servers_unpunished));
  put("payload_mismatches", double(m.payload_mismatches));
  put("mean_epsilon", m.mean_epsilon);
  put("unsolvable", m.unsolvable ? 1 : 0);
  return out;
}

// ---- trace serialization and offline replay ----

inline nlohmann::json trace_to_json(const RecoveryTrace& trace) {
  nlohmann::json j;
  j["recoverer"] = trace.recoverer;
  j["block_id"] = trace.block_id;
  j["k"] = trace.k;
  j["degree"] = trace.degree;
  j["epsilon"] = trace.epsilon;
  j["success"] = trace.success;
  j["hashes_fetched"] = trace.hashes_fetched;
  j["fragments_fetched"] = trace.fragments_fetched;
  j["manifest_hashes"] = nlohmann::json::array();
  for (const Int& h : trace.manifest_hashes) j["manifest_hashes"].push_back(h.get_str(16));
  j["hash_checks"] = nlohmann::json::array();
  for (const auto& c : trace.hash_checks)
    j["hash_checks"].push_back({{"peer", c.peer},
                                {"index", c.index},
                                {"claimed", c.claimed.get_str(16)},
                                {"ok", c.ok}});
  j["fragment_checks"] = nlohmann::json::array();
  for (const auto& c : trace.fragment_checks) {
    nlohmann::json e{{"peer", c.peer},
                     {"index", c.index},
                     {"expected", c.expected_hash.get_str(16)},
                     {"digest", c.digest},
                     {"ok", c.ok}};
    if (!c.ok) {
      e["elements"] = nlohmann::json::array();
      for (const Int& x : c.elements) e["elements"].push_back(x.get_str(16));
    }
    j["fragment_checks"].push_back(std::move(e));
  }
  j["blacklists"] = nlohmann::json::array();
  for (const auto& b : trace.blacklists)
    j["blacklists"].push_back(
        {{"peer", b.peer}, {"index", b.index}, {"offense", offense_name(b.offense)}});
  j["decode_rounds"] = nlohmann::json::array();
  for (const auto& d : trace.decode_rounds)
    j["decode_rounds"].push_back(
        {{"rows_fed", d.rows_fed}, {"rank", d.rank}, {"complete", d.complete}});
  j["unresponsive"] = trace.unresponsive;
  return j;
}

inline Int int_from_json_hex(const nlohmann::json& j) {
  if (!j.is_string()) fail(Errc::malformed_encoding, "expected hex string");
  try {
    return Int(j.get<std::string>(), 16);
  } catch (const std::invalid_argument&) {
    fail(Errc::malformed_encoding, "bad hex integer");
  }
}

inline RecoveryTrace trace_from_json(const nlohmann::json& j) {
  try {
    RecoveryTrace trace;
    trace.recoverer = j.at("recoverer").get<uint64_t>();
    trace.block_id = j.at("block_id").get<uint64_t>();
    trace.k = j.at("k").get<uint32_t>();
    trace.degree = j.at("degree").get<uint32_t>();
    trace.epsilon = j.at("epsilon").get<double>();
    trace.success = j.at("success").get<bool>();
    trace.hashes_fetched = j.at("hashes_fetched").get<uint32_t>();
    trace.fragments_fetched = j.at("fragments_fetched").get<uint32_t>();
    for (const auto& h : j.at("manifest_hashes")) trace.manifest_hashes.push_back(int_from_json_hex(h));
    for (const auto& c : j.at("hash_checks"))
      trace.hash_checks.push_back(TraceHashCheck{c.at("peer").get<uint64_t>(),
                                                 c.at("index").get<uint32_t>(),
                                                 int_from_json_hex(c.at("claimed")),
                                                 c.at("ok").get<bool>()});
    for (const auto& c : j.at("fragment_checks")) {
      TraceFragmentCheck check;
      check.peer = c.at("peer").get<uint64_t>();
      check.index = c.at("index").get<uint32_t>();
      check.expected_hash = int_from_json_hex(c.at("expected"));
      check.digest = c.at("digest").get<std::string>();
      check.ok = c.at("ok").get<bool>();
      if (c.contains("elements"))
        for (const auto& x : c.at("elements")) check.elements.push_back(int_from_json_hex(x));
      trace.fragment_checks.push_back(std::move(check));
    }
    for (const auto& b : j.at("blacklists")) {
      TraceBlacklist entry;
      entry.peer = b.at("peer").get<uint64_t>();
      entry.index = b.at("index").get<uint32_t>();
      std::string name = b.at("offense").get<std::string>();
      if (name == "bad_hash") entry.offense = Offense::bad_hash;
      else if (name == "bad_fragment") entry.offense = Offense::bad_fragment;
      else if (name == "unresponsive") entry.offense = Offense::unresponsive;
      else fail(Errc::malformed_encoding, "unknown offense " + name);
      trace.blacklists.push_back(entry);
    }
    for (const auto& d : j.at("decode_rounds"))
      trace.decode_rounds.push_back(TraceDecodeRound{d.at("rows_fed").get<uint32_t>(),
                                                     d.at("rank").get<uint32_t>(),
                                                     d.at("complete").get<bool>()});
    trace.unresponsive = j.at("unresponsive").get<std::vector<uint64_t>>();
    return trace;
  } catch (const nlohmann::json::exception&) {
    fail(Errc::malformed_encoding, "trace fields missing or mistyped");
  }
}

inline std::string traces_to_json_text(const SystemParams& params,
                                       std::span<const RecoveryTrace> traces) {
  nlohmann::json j;
  j["format"] = "ccls-trace-v1";
  j["params"] = bytes::to_hex(serialize_params(params));
  j["traces"] = nlohmann::json::array();
  for (const auto& t : traces) j["traces"].push_back(trace_to_json(t));
  return j.dump(2);
}

inline std::pair<SystemParams, std::vector<RecoveryTrace>> traces_from_json_text(
    std::string_view text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(Errc::malformed_encoding, "not valid JSON");
  try {
    if (j.at("format").get<std::string>() != "ccls-trace-v1")
      fail(Errc::malformed_encoding, "unknown trace format");
    SystemParams params = parse_params(bytes::from_hex(j.at("params").get<std::string>()));
    std::vector<RecoveryTrace> traces;
    for (const auto& t : j.at("traces")) traces.push_back(trace_from_json(t));
    return {std::move(params), std::move(traces)};
  } catch (const nlohmann::json::exception&) {
    fail(Errc::malformed_encoding, "trace envelope fields missing");
  }
}

struct ReplayConfirmation {
  uint64_t peer = 0;
  uint32_t index = 0;
  Offense offense = Offense::bad_hash;
};

struct ReplayVerdict {
  uint32_t hash_checks = 0;
  uint32_t fragment_checks = 0;
  std::vector<ReplayConfirmation> confirmed_blacklists;
};

// Re-runs every recorded check from public data only (params, manifest
// hashes, re-derived coefficients, recorded payload evidence) and confirms
// each blacklisting is backed by a failing check.  Any inconsistency throws
// tampered_trace.
inline ReplayVerdict replay_trace(const SystemParams& params, const RecoveryTrace& trace) {
  ReplayVerdict verdict;
  if (trace.manifest_hashes.empty() && trace.hash_checks.empty() &&
      trace.fragment_checks.empty() && trace.blacklists.empty())
    return verdict;

  if (trace.manifest_hashes.size() != params.k || trace.k != params.k)
    fail(Errc::tampered_trace, "manifest hash count disagrees with params");
  if (trace.degree < 1 || trace.degree > params.k)
    fail(Errc::tampered_trace, "degree out of range");
  std::vector<FragmentHash> sources;
  sources.reserve(params.k);
  for (const Int& h : trace.manifest_hashes) {
    if (h <= 0 || h >= params.p) fail(Errc::tampered_trace, "manifest hash out of range");
    sources.push_back(FragmentHash{h});
  }
  HashCombiner combiner(params, sources);

  std::map<std::pair<uint64_t, uint32_t>, const TraceHashCheck*> hash_by_origin;
  for (const auto& check : trace.hash_checks) {
    auto cv = derive_coefficients(params, check.peer, trace.block_id, check.index, trace.degree);
    Int expected = combiner.combine(cv.coeffs).value;
    bool genuine = sgn(check.claimed) > 0 && check.claimed < params.p &&
                   expected == check.claimed;
    if (genuine != check.ok) fail(Errc::tampered_trace, "hash check outcome not reproducible");
    if (!hash_by_origin.emplace(std::make_pair(check.peer, check.index), &check).second)
      fail(Errc::tampered_trace, "duplicate hash check");
    ++verdict.hash_checks;
  }

  std::map<std::pair<uint64_t, uint32_t>, const TraceFragmentCheck*> frag_by_origin;
  for (const auto& check : trace.fragment_checks) {
    auto it = hash_by_origin.find({check.peer, check.index});
    if (it == hash_by_origin.end() || !it->second->ok ||
        it->second->claimed != check.expected_hash)
      fail(Errc::tampered_trace, "fragment check without a verified hash");
    if (!check.ok) {
      Fragment f{check.elements};
      bool canonical = fragment_is_canonical(params, f);
      if (canonical) {
        if (hash_fragment(params, f).value == check.expected_hash)
          fail(Errc::tampered_trace, "fragment evidence actually verifies");
        CodedFragment cf;
        cf.node_id = check.peer;
        cf.block_id = trace.block_id;
        cf.index = check.index;
        cf.data = std::move(f);
        if (sha256_hex(coded_fragment_to_bytes(params, cf)) != check.digest)
          fail(Errc::tampered_trace, "fragment digest mismatch");
      } else if (!check.digest.empty()) {
        fail(Errc::tampered_trace, "digest recorded for unencodable fragment");
      }
    }
    frag_by_origin.emplace(std::make_pair(check.peer, check.index), &check);
    ++verdict.fragment_checks;
  }

  for (const auto& accusation : trace.blacklists) {
    bool justified = false;
    if (accusation.offense == Offense::bad_hash) {
      auto it = hash_by_origin.find({accusation.peer, accusation.index});
      justified = it != hash_by_origin.end() && !it->second->ok;
    } else if (accusation.offense == Offense::bad_fragment) {
      auto it = frag_by_origin.find({accusation.peer, accusation.index});
      justified = it != frag_by_origin.end() && !it->second->ok;
    }
    if (!justified) fail(Errc::tampered_trace, "blacklisting without failing evidence");
    verdict.confirmed_blacklists.push_back(
        ReplayConfirmation{accusation.peer, accusation.index, accusation.offense});
  }
  return verdict;
}

}  // namespace ccls
