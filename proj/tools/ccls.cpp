// Command line front end: parameter generation, storage planning, encoding
// blocks into coded stores, recovering them back, scenario simulation with
// offline trace replay, and microbenchmarks.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ccls/bench.hpp"
#include "ccls/netsim.hpp"
#include "ccls/planner.hpp"

namespace fs = std::filesystem;
using namespace ccls;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(Errc::io_error, "cannot read " + path.string());
  return ss.str();
}

std::vector<uint8_t> read_bytes(const fs::path& path) {
  std::string s = read_text(path);
  return {s.begin(), s.end()};
}

void write_bytes(const fs::path& path, std::span<const uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
  out.flush();
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
}

void write_text(const fs::path& path, std::string_view text) {
  write_bytes(path, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

std::array<uint8_t, 32> seed_from_hex(const std::string& hex) {
  if (hex.size() > 64 || hex.size() % 2 != 0)
    fail(Errc::invalid_argument, "seed must be an even-length hex string of at most 64 digits");
  auto bytes = bytes::from_hex(hex);
  std::array<uint8_t, 32> seed{};
  std::copy(bytes.begin(), bytes.end(), seed.begin());
  return seed;
}

void print_params_summary(std::ostream& out, const SystemParams& params) {
  out << "p_bits " << bit_length(params.p) << "\n"
      << "q_bits " << bit_length(params.q) << "\n"
      << "k " << params.k << "\n"
      << "m " << params.m << "\n"
      << "element_size " << params.element_size << "\n"
      << "block_size " << params.block_size << "\n";
}

fs::path fragment_file(const fs::path& dir, uint32_t index) {
  char name[32];
  std::snprintf(name, sizeof(name), "frag_%05u.bin", index);
  return dir / name;
}

// One coded store directory produced by `encode`: manifest.txt, hashes.txt
// (node id plus per-fragment hashes) and frag_NNNNN.bin wire files.
// Hashes and the manifest load eagerly; fragment payloads are read on
// request so corrupt files surface as failed checks, not load errors.
class FilePeer final : public Peer {
 public:
  FilePeer(const SystemParams& params, fs::path dir) : params_(&params), dir_(std::move(dir)) {
    try {
      manifest_ = manifest_from_text(*params_, read_text(dir_ / "manifest.txt"));
    } catch (const Error&) {
      return;  // unreadable store: the peer just has nothing to offer
    }
    try {
      std::istringstream in(read_text(dir_ / "hashes.txt"));
      std::string line;
      if (!std::getline(in, line) || line.rfind("node_id ", 0) != 0)
        fail(Errc::malformed_encoding, "missing node_id line");
      id_ = std::stoull(line.substr(8));
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto space = line.find(' ');
        if (space == std::string::npos || std::stoul(line.substr(0, space)) != hashes_.size())
          fail(Errc::malformed_encoding, "hash lines must be indexed consecutively");
        Int value = int_from_hex(line.substr(space + 1));
        if (value <= 0 || value >= params_->p)
          fail(Errc::malformed_encoding, "hash out of range");
        hashes_.push_back(FragmentHash{std::move(value)});
      }
    } catch (const Error&) {
      hashes_.clear();
    } catch (const std::logic_error&) {
      hashes_.clear();
    }
  }

  uint64_t id() const override { return id_; }

  uint32_t fragment_count(uint64_t block_id) const override {
    return manifest_ && manifest_->block_id == block_id ? uint32_t(hashes_.size()) : 0;
  }

  std::optional<HashResponse> request_hash(uint64_t block_id, uint32_t index) override {
    if (index >= fragment_count(block_id)) return std::nullopt;
    return HashResponse{hashes_[index], id_, block_id, index};
  }

  std::optional<CodedFragment> request_fragment(uint64_t block_id, uint32_t index) override {
    if (index >= fragment_count(block_id)) return std::nullopt;
    try {
      return coded_fragment_from_bytes(*params_, read_bytes(fragment_file(dir_, index)));
    } catch (const Error&) {
      return std::nullopt;  // unreadable or truncated file: treat as no answer
    }
  }

  std::optional<BlockManifest> request_manifest(uint64_t block_id) override {
    if (!manifest_ || manifest_->block_id != block_id) return std::nullopt;
    return manifest_;
  }

 private:
  const SystemParams* params_;
  fs::path dir_;
  uint64_t id_ = 0;
  std::optional<BlockManifest> manifest_;
  std::vector<FragmentHash> hashes_;
};

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::invalid_geometry:
    case Errc::invalid_degree:
    case Errc::dimension_mismatch:
    case Errc::element_out_of_range:
    case Errc::block_too_large:
      return 2;
    case Errc::manifest_mismatch:
    case Errc::tampered_trace:
    case Errc::corrupt_layout:
      return 3;
    case Errc::recovery_failed:
    case Errc::rank_deficient:
    case Errc::manifest_unavailable:
    case Errc::not_stored:
      return 4;
    case Errc::io_error:
    case Errc::malformed_encoding:
      return 5;
    default:
      return 1;
  }
}

uint32_t parse_degree_token(const std::string& token, uint32_t k) {
  if (token == "k") return k;
  try {
    unsigned long v = std::stoul(token);
    if (v < 1 || v > k) fail(Errc::invalid_degree, "degree " + token + " outside [1, k]");
    return uint32_t(v);
  } catch (const std::logic_error&) {
    fail(Errc::invalid_argument, "bad degree token " + token);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coded block storage: homomorphic-hash verified fragment stores"};
  app.require_subcommand(1);
  int rc = 0;

  // gen-params
  struct {
    std::string profile = "production";
    unsigned p_bits = 1024, q_bits = 257;
    uint32_t k = 32, element_size = 32;
    uint64_t block_size = uint64_t(1) << 20;
    std::string seed_hex, out, check;
  } gp;
  auto* gen = app.add_subcommand("gen-params", "generate or check system parameters");
  gen->add_option("--profile", gp.profile, "production or toy")
      ->check(CLI::IsMember({"production", "toy"}));
  gen->add_option("--pbits", gp.p_bits, "modulus size in bits");
  gen->add_option("--qbits", gp.q_bits, "subgroup order size in bits");
  gen->add_option("--k", gp.k, "fragments per block");
  gen->add_option("--element-size", gp.element_size, "packed element size in bytes");
  gen->add_option("--block-size", gp.block_size, "block size budget in bytes");
  gen->add_option("--seed", gp.seed_hex, "hex seed, at most 64 digits");
  gen->add_option("--out", gp.out, "output file for the parameter blob");
  gen->add_option("--check", gp.check, "validate an existing parameter file instead");
  gen->callback([&] {
    if (!gp.check.empty()) {
      SystemParams params = parse_params(read_bytes(gp.check));
      auto report = validate_params(params);
      print_params_summary(std::cout, params);
      for (const auto& v : report.violations) std::cout << "violation: " << v << "\n";
      std::cout << (report.ok ? "params ok\n" : "params invalid\n");
      rc = report.ok ? 0 : 3;
      return;
    }
    if (gp.out.empty()) fail(Errc::invalid_argument, "gen-params needs --out or --check");
    SystemParams params;
    if (gp.profile == "toy") {
      params = toy_params();
    } else {
      GenOptions opt;
      opt.p_bits = gp.p_bits;
      opt.q_bits = gp.q_bits;
      opt.k = gp.k;
      opt.element_size = gp.element_size;
      opt.block_size = gp.block_size;
      if (!gp.seed_hex.empty()) opt.seed = seed_from_hex(gp.seed_hex);
      params = generate_params(opt);
    }
    write_bytes(gp.out, serialize_params(params));
    print_params_summary(std::cout, params);
  });

  // plan
  struct {
    uint64_t block_size = uint64_t(1) << 20;
    double hash_size = 134.0;
    uint32_t r = 1;
    std::vector<uint32_t> ks{4, 32, 64, 128, 256};
    std::vector<uint32_t> rs{1, 5};
    bool table = false, optimal = false;
    std::string out;
  } pl;
  auto* plan = app.add_subcommand("plan", "storage compression planning");
  plan->add_option("--block-size", pl.block_size, "block size in bytes");
  plan->add_option("--hash-size", pl.hash_size, "stored size of one hash in bytes");
  plan->add_flag("--table", pl.table, "print a compression table as CSV");
  plan->add_flag("--optimal", pl.optimal, "print the k minimizing the compression factor");
  plan->add_option("--k", pl.ks, "k values for --table")->delimiter(',');
  plan->add_option("--r", pl.rs, "r values for --table")->delimiter(',');
  plan->add_option("--replication", pl.r, "r value for --optimal");
  plan->add_option("--out", pl.out, "write CSV here instead of stdout");
  plan->callback([&] {
    if (pl.table == pl.optimal)
      fail(Errc::invalid_argument, "choose exactly one of --table or --optimal");
    if (pl.optimal) {
      StoragePlan best = optimal_plan(pl.r, pl.block_size, pl.hash_size);
      std::cout << "k " << best.k << "\n";
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6g", best.compression);
      std::cout << "compression " << buf << "\n";
      return;
    }
    auto plans = plan_table(pl.ks, pl.rs, pl.block_size, pl.hash_size);
    std::string csv = plan_table_csv(plans);
    if (pl.out.empty()) std::cout << csv;
    else write_text(pl.out, csv);
  });

  // encode
  struct {
    std::string params, in, out;
    uint64_t node_id = 1, block_id = 0;
    uint32_t replication = 2, degree = 0;
  } en;
  auto* enc = app.add_subcommand("encode", "ingest a block into a coded store directory");
  enc->add_option("--params", en.params, "parameter file")->required();
  enc->add_option("--in", en.in, "block input file")->required();
  enc->add_option("--out", en.out, "store directory to create")->required();
  enc->add_option("--node-id", en.node_id, "identity of the storing node");
  enc->add_option("--replication", en.replication, "coded fragments to keep");
  enc->add_option("--degree", en.degree, "code degree, 0 for dense");
  enc->add_option("--block-id", en.block_id, "block identifier");
  enc->callback([&] {
    SystemParams params = parse_params(read_bytes(en.params));
    std::vector<uint8_t> block = read_bytes(en.in);
    NodeState state;
    state.node_id = en.node_id;
    state.replication = en.replication;
    state.degree = en.degree;
    ingest_block(state, params, en.block_id, block);
    const StoredBlock& entry = state.store.at(en.block_id);

    fs::create_directories(en.out);
    write_text(fs::path(en.out) / "manifest.txt", manifest_to_text(params, entry.manifest));
    std::string hashes = "node_id " + std::to_string(en.node_id) + "\n";
    for (uint32_t u = 0; u < entry.fragments.size(); ++u) {
      write_bytes(fragment_file(en.out, u), coded_fragment_to_bytes(params, entry.fragments[u]));
      hashes += std::to_string(u) + " " + int_to_hex(entry.hashes[u].value, params.p_width()) +
                "\n";
    }
    write_text(fs::path(en.out) / "hashes.txt", hashes);
    std::cout << "stored " << entry.fragments.size() << " coded fragments ("
              << stored_block_bytes(state, params, en.block_id) << " bytes) in " << en.out
              << "\n";
  });

  // recover
  struct {
    std::string params, out, manifest;
    std::vector<std::string> stores;
    uint64_t node_id = 0, block_id = 0;
    uint32_t degree = 0;
    double epsilon = 0.1;
  } re;
  auto* rec = app.add_subcommand("recover", "rebuild a block from coded store directories");
  rec->add_option("--params", re.params, "parameter file")->required();
  rec->add_option("--store", re.stores, "store directory, repeatable")->required();
  rec->add_option("--block-id", re.block_id, "block identifier");
  rec->add_option("--out", re.out, "output file for the recovered block")->required();
  rec->add_option("--manifest", re.manifest,
                  "trusted manifest file (defaults to the first store's)");
  rec->add_option("--node-id", re.node_id, "identity of the recovering node");
  rec->add_option("--degree", re.degree, "code degree the stores used, 0 for dense");
  rec->add_option("--epsilon", re.epsilon, "hash overfetch budget");
  rec->callback([&] {
    SystemParams params = parse_params(read_bytes(re.params));
    BlockManifest pinned = manifest_from_text(
        params, read_text(re.manifest.empty() ? fs::path(re.stores[0]) / "manifest.txt"
                                              : fs::path(re.manifest)));
    std::vector<std::unique_ptr<FilePeer>> peers;
    PeerDirectory directory;
    for (const std::string& dir : re.stores) {
      peers.push_back(std::make_unique<FilePeer>(params, dir));
      directory.push_back(peers.back().get());
    }
    NodeState state;
    state.node_id = re.node_id;
    state.degree = re.degree;
    state.epsilon_budget = re.epsilon;
    RecoverOptions opts;
    opts.pinned_manifest = &pinned;
    auto result = recover_block(state, params, re.block_id, directory, opts);
    write_bytes(re.out, result.block);
    std::cout << "recovered " << result.block.size() << " bytes from "
              << result.trace.fragments_fetched << " fragments\n";
    for (const auto& [peer, offense] : state.blacklist)
      std::cout << "blacklisted node " << peer << " (" << offense_name(offense) << ")\n";
  });

  // simulate
  struct {
    std::string config, out, metrics, trace_out;
  } si;
  auto* sim = app.add_subcommand("simulate", "run a deterministic storage network scenario");
  sim->add_option("--config", si.config, "scenario config file")->required();
  sim->add_option("--out", si.out, "per-recovery rows CSV");
  sim->add_option("--metrics", si.metrics, "aggregate metrics CSV");
  sim->add_option("--trace-out", si.trace_out, "recovery traces as JSON");
  sim->callback([&] {
    ScenarioConfig cfg = scenario_from_text(read_text(si.config));
    cfg.keep_traces = !si.trace_out.empty();
    ScenarioResult result = run_scenario(cfg);
    std::cout << metrics_to_csv(result.metrics);
    if (!si.out.empty()) write_text(si.out, rows_to_csv(result.rows));
    if (!si.metrics.empty()) write_text(si.metrics, metrics_to_csv(result.metrics));
    if (!si.trace_out.empty())
      write_text(si.trace_out, traces_to_json_text(result.params, result.traces));
  });

  // replay
  struct {
    std::string trace;
  } rp;
  auto* rep = app.add_subcommand("replay", "re-verify recovery traces offline");
  rep->add_option("--trace", rp.trace, "trace JSON file")->required();
  rep->callback([&] {
    auto [params, traces] = traces_from_json_text(read_text(rp.trace));
    for (size_t i = 0; i < traces.size(); ++i) {
      ReplayVerdict verdict = replay_trace(params, traces[i]);
      std::cout << "trace " << i << ": verified (" << verdict.hash_checks << " hash checks, "
                << verdict.fragment_checks << " fragment checks, "
                << verdict.confirmed_blacklists.size() << " blacklistings confirmed)\n";
    }
  });

  // bench
  struct {
    std::string suite = "hash", out, check;
    std::vector<uint32_t> ks{32};
    std::vector<std::string> ds{"4"};
    uint64_t block_size = uint64_t(1) << 20, seed = 0;
    uint32_t trials = 50;
    unsigned p_bits = 1024, q_bits = 257;
    uint32_t element_size = 32;
  } be;
  auto* ben = app.add_subcommand("bench", "microbenchmarks with CSV output");
  ben->add_option("--suite", be.suite, "encode, hash or combine")
      ->check(CLI::IsMember({"encode", "hash", "combine"}));
  ben->add_option("--k", be.ks, "k values")->delimiter(',');
  ben->add_option("--d", be.ds, "degree values, the token k meaning dense")->delimiter(',');
  ben->add_option("--block-size", be.block_size, "block size in bytes");
  ben->add_option("--trials", be.trials, "timed iterations per measurement");
  ben->add_option("--pbits", be.p_bits, "modulus size in bits");
  ben->add_option("--qbits", be.q_bits, "subgroup order size in bits");
  ben->add_option("--element-size", be.element_size, "packed element size in bytes");
  ben->add_option("--seed", be.seed, "numeric seed for generated inputs");
  ben->add_option("--out", be.out, "write CSV here instead of stdout");
  ben->add_option("--check", be.check, "verify complexity shapes of an existing CSV instead");
  ben->callback([&] {
    if (!be.check.empty()) {
      auto rows = bench_rows_from_csv(read_text(be.check));
      auto report = check_bench_shapes(rows);
      for (const auto& v : report.violations) std::cout << "violation: " << v << "\n";
      std::cout << (report.ok() ? "shapes ok\n" : "shapes violated\n");
      rc = report.ok() ? 0 : 3;
      return;
    }
    std::vector<BenchRow> rows;
    for (uint32_t k : be.ks) {
      GenOptions opt;
      opt.p_bits = be.p_bits;
      opt.q_bits = be.q_bits;
      opt.k = k;
      opt.element_size = be.element_size;
      opt.block_size = be.block_size;
      for (int b = 0; b < 8; ++b) opt.seed[b] = uint8_t(be.seed >> (56 - 8 * b));
      SystemParams params = generate_params(opt);
      if (be.suite == "hash") {
        rows.push_back(bench_hash(params, be.trials));
      } else {
        for (const std::string& token : be.ds) {
          uint32_t d = parse_degree_token(token, k);
          rows.push_back(be.suite == "encode" ? bench_encode(params, d, be.trials)
                                              : bench_combine(params, d, be.trials));
        }
      }
    }
    std::string csv = bench_rows_csv(rows);
    if (be.out.empty()) std::cout << csv;
    else write_text(be.out, csv);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << " [" << errc_name(e.code()) << "]\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
