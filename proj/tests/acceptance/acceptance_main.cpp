// Acceptance suite: one line per criterion, exit code = number of failures.
// Usage: mavguard_acceptance <repo-root>
#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include "expr_gen.hpp"
#include "mavguard/harness.hpp"
#include "reference/mission_automaton.hpp"
#include "reference/reference_codec.hpp"
#include "reference/reference_eval.hpp"
#include "test_util.hpp"

using namespace mavguard;
namespace fs = std::filesystem;

namespace {

std::string g_root;

std::string repo_file(const std::string& rel) { return g_root + "/" + rel; }

std::shared_ptr<const dsl::ProtocolSpec> load_default_spec() {
  std::ifstream in(repo_file("specs/default.spec"));
  std::ostringstream os;
  os << in.rdbuf();
  auto res = dsl::parse_spec(os.str());
  if (!res.ok()) {
    std::fprintf(stderr, "default.spec failed to parse:\n%s",
                 dsl::format_diagnostics(res.diagnostics).c_str());
    std::exit(2);
  }
  return std::make_shared<const dsl::ProtocolSpec>(std::move(*res.spec));
}

struct Criterion {
  int number;
  const char* name;
  std::function<bool(std::string&)> run;
};

// matrix state shared between criteria 1, 3 and 8
sim::MatrixReport g_matrix;
bool g_matrix_ran = false;

bool ensure_matrix(std::string& detail) {
  if (g_matrix_ran) return true;
  auto spec = load_default_spec();
  sim::Scenario benign =
      sim::load_scenario(repo_file("scenarios/benign_mission_25.json"));
  std::vector<sim::Scenario> attacks;
  for (const char* name :
       {"attack_inaccurate_bounds", "attack_parachute", "attack_mission_overflow"}) {
    attacks.push_back(
        sim::load_scenario(repo_file(std::string("scenarios/") + name + ".json")));
  }
  GatewayConfig cfg;
  auto dir = fs::temp_directory_path() /
             ("mavguard-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  cfg.log_dir = dir.string();
  g_matrix = sim::run_matrix(attacks, benign, spec, cfg);
  g_matrix_ran = true;
  detail = "matrix executed";
  return true;
}

// [1] all three attacks detected under gateway+spec and rejected at the
// attacking message; zero rejects on the benign mission
bool criterion_table3(std::string& detail) {
  std::string ignore;
  ensure_matrix(ignore);
  bool ok = g_matrix.detection_ok && g_matrix.benign_clean;
  // "rejected at the attacking message": the per-index expectations of every
  // gateway+spec attack run must have held
  for (const auto& run : g_matrix.all_runs) {
    if (run.config == "gateway+spec" && run.scenario.rfind("attack_", 0) == 0) {
      if (!run.assertions_checked || !run.assertions_passed) {
        ok = false;
        detail += run.scenario + " expectations failed; ";
        for (const auto& f : run.failures) detail += f + "; ";
      }
    }
  }
  std::ostringstream os;
  os << "detection_ok=" << (g_matrix.detection_ok ? "yes" : "no")
     << " benign_rejects=" << g_matrix.benign_runs.at("gateway+spec").rejected;
  detail = os.str() + (detail.empty() ? "" : " | " + detail);
  return ok;
}

// [2] >= 5000 uplink messages end to end, zero loss, FIFO order
bool criterion_workload(std::string& detail) {
  auto spec = load_default_spec();
  sim::Scenario benign =
      sim::load_scenario(repo_file("scenarios/benign_mission_25.json"));
  sim::RunOptions opts;
  opts.config = sim::HarnessConfig::GatewaySpec;
  opts.record_streams = true;
  std::vector<std::uint8_t> sent_bytes, received_bytes;
  opts.gcs_sent_bytes = &sent_bytes;
  opts.fcs_received_bytes = &received_bytes;
  sim::RunReport r = sim::run_scenario(benign, spec, opts);

  const bool volume_ok = r.sent >= 5000;
  const bool no_loss = r.dropped == 0 && r.rejected == 0 && r.forwarded == r.sent;
  const bool conservation = r.conservation_holds();
  // byte-for-byte stream equality proves both zero loss and FIFO order
  const bool fifo = sent_bytes == received_bytes;
  std::ostringstream os;
  os << "sent=" << r.sent << " forwarded=" << r.forwarded << " rejected="
     << r.rejected << " dropped=" << r.dropped << " fifo=" << (fifo ? "yes" : "no");
  detail = os.str();
  return volume_ok && no_loss && conservation && fifo;
}

// [3] latency report in mean±ci form; added median <= 1 ms; ordering holds
bool criterion_latency(std::string& detail) {
  std::string ignore;
  ensure_matrix(ignore);
  const double added_ms = g_matrix.added_median_us / 1000.0;
  const bool added_ok = added_ms <= 1.0;
  std::ostringstream os;
  for (const char* cfg : {"passthrough", "gateway", "gateway+spec"}) {
    const auto& run = g_matrix.benign_runs.at(cfg);
    os << cfg << "=" << run.latency.format() << " (median "
       << run.median_latency_us / 1000.0 << " ms) ";
  }
  os << "added_median=" << added_ms << " ms ordered="
     << (g_matrix.median_ordered ? "yes" : "no");
  detail = os.str();
  return added_ok && g_matrix.median_ordered;
}

// [4] codec round trips, CRC check value, reference-encoder agreement
bool criterion_codec(std::string& detail) {
  const std::string s = "123456789";
  std::vector<std::uint8_t> bytes(s.begin(), s.end());
  if (mav::crc16_mcrf4xx(bytes) != 0x6F91) {
    detail = "CRC-16/MCRF4XX check value mismatch";
    return false;
  }

  std::mt19937_64 rng(0xACC4);
  std::uint64_t round_trips = 0;
  for (int type = 0; type < testutil::kMessageTypeCount; ++type) {
    for (int i = 0; i < 10000; ++i) {
      mav::MavMessage m = testutil::random_message_of(rng, type);
      auto frame = mav::frame_encode(m, static_cast<std::uint8_t>(i), 255, 190);
      auto res = mav::frame_decode(frame);
      if (res.status != mav::DecodeStatus::Ok || !(*res.message == m) ||
          res.consumed != frame.size()) {
        detail = "round-trip failure on " +
                 std::string(mav::message_name(mav::message_id(m)));
        return false;
      }
      ++round_trips;
    }
  }

  int ref_checked = 0;
  for (int i = 0; i < 500; ++i) {
    mav::MavMessage m = testutil::random_message(rng);
    std::uint8_t seq = static_cast<std::uint8_t>(rng());
    std::uint8_t sys = static_cast<std::uint8_t>(rng());
    std::uint8_t comp = static_cast<std::uint8_t>(rng());
    if (mav::frame_encode(m, seq, sys, comp) != refcodec::encode(m, seq, sys, comp)) {
      detail = "reference encoder disagreement";
      return false;
    }
    ++ref_checked;
  }
  std::ostringstream os;
  os << round_trips << " round trips, crc check 0x6F91 ok, " << ref_checked
     << " reference-encoder frames identical";
  detail = os.str();
  return true;
}

// [5] mission machinery == brute-force automaton, exhaustive N<=3, len<=6
bool criterion_mission_oracle(std::string& detail) {
  auto spec_res = dsl::parse_spec(
      "iter mission_upload: on MISSION_COUNT(count->N) expect "
      "MISSION_ITEM_INT(seq->i)\n");
  auto spec = std::make_shared<const dsl::ProtocolSpec>(std::move(*spec_res.spec));
  Attestor attestor(spec);

  mav::MissionCount counts[4];
  for (int n = 0; n < 4; ++n) counts[n].count = static_cast<std::uint16_t>(n);
  mav::MissionItemInt items[4];
  for (int s = 0; s < 4; ++s) {
    items[s].seq = static_cast<std::uint16_t>(s);
    items[s].z = 50.0f;
  }
  const mav::MissionAck ack{};

  std::uint64_t sequences = 0, disagreements = 0;
  std::vector<int> seq;
  std::function<void(int)> explore = [&](int remaining) {
    if (remaining == 0) return;
    for (int sym = 0; sym < 9 && disagreements == 0; ++sym) {
      seq.push_back(sym);
      ++sequences;
      attestor.reset();
      refmission::MissionAutomaton ref;
      for (int s : seq) {
        bool ref_ok, mine_ok;
        if (s < 4) {
          ref_ok = ref.on_count(static_cast<std::uint16_t>(s));
          mine_ok = attestor.attest(counts[s]).accepted();
        } else if (s < 8) {
          ref_ok = ref.on_item(static_cast<std::uint16_t>(s - 4));
          mine_ok = attestor.attest(items[s - 4]).accepted();
        } else {
          ref_ok = ref.on_ack();
          mine_ok = attestor.attest(ack).accepted();
        }
        if (ref_ok != mine_ok) {
          ++disagreements;
          break;
        }
      }
      explore(remaining - 1);
      seq.pop_back();
    }
  };
  explore(6);
  std::ostringstream os;
  os << sequences << " sequences, " << disagreements << " disagreements";
  detail = os.str();
  return disagreements == 0 && sequences == 9 + 81 + 729 + 6561 + 59049 + 531441;
}

// [6] evaluator vs reference interpreter, 10^4 random trees, bit-for-bit
bool criterion_eval_oracle(std::string& detail) {
  auto spec_res = dsl::parse_spec(
      "define m1 10\n"
      "param MC_PITCH_P default 6.5 min 0 max 12\n"
      "param MC_PITCHRATE_MAX default 220 min 0 max 1800\n");
  auto spec = std::make_shared<const dsl::ProtocolSpec>(std::move(*spec_res.spec));
  VehicleState st = state_init(*spec);
  st.armed = true;
  st.flight_mode = 5;
  st.altitude_m = 12.5;
  st.climb_rate_mps = -0.25;

  mav::ParamSet ps;
  ps.param_id = "MC_PITCH_P";
  ps.param_value = 6.5f;
  mav::MavMessage msg = ps;
  std::map<std::string, dsl::Value> binders{
      {"n", dsl::Value{220.0}},
      {"s", dsl::Value{std::string("MC_PITCH_P")}},
      {"flag", dsl::Value{true}}};
  dsl::IterBindings iter{2.0, 25.0};
  dsl::EvalContext ctx;
  ctx.msg = &msg;
  ctx.state = &st;
  ctx.binders = &binders;
  ctx.defines = &spec->defines;
  ctx.iter = &iter;

  std::mt19937_64 rng(0xE6A1);
  std::uint64_t checked = 0, errors_seen = 0;
  for (int i = 0; i < 10000; ++i) {
    const bool ill_typed = i % 8 == 7;
    auto want = static_cast<exprgen::Want>(rng() % 3);
    auto e = exprgen::gen(rng, 1 + static_cast<int>(rng() % 4), want, ill_typed);
    dsl::EvalOutcome mine = dsl::eval_expr(*e, ctx);
    dsl::EvalOutcome ref = refeval::eval(*e, ctx);
    if (mine.ok() != ref.ok()) {
      detail = "ok-ness disagreement on " + dsl::print_expr(*e);
      return false;
    }
    if (!mine.ok()) {
      ++errors_seen;
      if (mine.error().kind != ref.error().kind) {
        detail = "error-kind disagreement on " + dsl::print_expr(*e);
        return false;
      }
    } else {
      if (mine.value().index() != ref.value().index()) {
        detail = "type disagreement on " + dsl::print_expr(*e);
        return false;
      }
      if (const auto* d = std::get_if<double>(&mine.value())) {
        if (std::bit_cast<std::uint64_t>(*d) !=
            std::bit_cast<std::uint64_t>(std::get<double>(ref.value()))) {
          detail = "bit disagreement on " + dsl::print_expr(*e);
          return false;
        }
      } else if (!(mine.value() == ref.value())) {
        detail = "value disagreement on " + dsl::print_expr(*e);
        return false;
      }
    }
    ++checked;
  }
  std::ostringstream os;
  os << checked << " trees bit-identical (" << errors_seen << " error outcomes)";
  detail = os.str();
  return checked == 10000;
}

// [7] 1e5 frames through a capacity-64 ring, 20 randomized backoff settings
bool criterion_ring_stress(std::string& detail) {
  std::mt19937_64 rng(0x217E55);
  for (int run = 0; run < 20; ++run) {
    SpinBackoff producer_backoff{static_cast<std::uint32_t>(rng() % 2000),
                                 std::chrono::microseconds(1 + rng() % 100)};
    SpinBackoff consumer_backoff{static_cast<std::uint32_t>(rng() % 2000),
                                 std::chrono::microseconds(1 + rng() % 100)};
    constexpr std::uint64_t kFrames = 100000;
    auto [prod, cons] = ring_create(64);

    std::thread producer([&prod = prod, &producer_backoff] {
      std::uint32_t spins = 0;
      std::uint8_t buf[64];
      for (std::uint64_t i = 0; i < kFrames; ++i) {
        const std::size_t len = 9 + i % 48;
        for (std::size_t b = 0; b < len; ++b)
          buf[b] = static_cast<std::uint8_t>((i >> ((b % 8) * 8)) & 0xFF);
        while (prod.push(std::span(buf, len)) != PushResult::Ok)
          producer_backoff.wait(spins);
        SpinBackoff::reset(spins);
      }
    });

    std::uint64_t received = 0, bad = 0;
    std::uint32_t spins = 0;
    while (received < kFrames) {
      auto f = cons.pop();
      if (!f) {
        consumer_backoff.wait(spins);
        continue;
      }
      SpinBackoff::reset(spins);
      if (f->size() != 9 + received % 48) ++bad;
      std::uint64_t tag = 0;
      for (int b = 0; b < 8; ++b) tag |= static_cast<std::uint64_t>((*f)[b]) << (b * 8);
      if ((tag & 0xFF) != ((received >> 0) & 0xFF)) ++bad;
      ++received;
    }
    producer.join();
    if (bad != 0 || received != kFrames || cons.pop().has_value()) {
      std::ostringstream os;
      os << "run " << run << ": received=" << received << " bad=" << bad;
      detail = os.str();
      return false;
    }
  }
  detail = "20 runs x 100000 frames, zero loss/duplication, order preserved";
  return true;
}

// [8] forwarded-frame log is exactly the Accept set for every matrix run
bool criterion_non_bypass(std::string& detail) {
  std::string ignore;
  ensure_matrix(ignore);
  std::uint64_t audited = 0;
  for (const auto& run : g_matrix.all_runs) {
    if (run.config == "passthrough") continue;  // no attestor to audit
    ++audited;
    if (!run.audit.ok || run.audit.extras != 0 || run.audit.rejected_forwarded != 0 ||
        run.audit.forwarded != run.audit.accepted) {
      std::ostringstream os;
      os << run.scenario << "/" << run.config << ": forwarded=" << run.audit.forwarded
         << " accepted=" << run.audit.accepted << " extras=" << run.audit.extras
         << " rejected_forwarded=" << run.audit.rejected_forwarded;
      detail = os.str();
      return false;
    }
  }
  std::ostringstream os;
  os << audited << " gateway runs audited, forwarded set == accept set";
  detail = os.str();
  return audited > 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: mavguard_acceptance <repo-root>\n");
    return 2;
  }
  g_root = argv[1];

  const Criterion criteria[] = {
      {1, "attack detection matrix (all attacks caught, benign clean)",
       criterion_table3},
      {2, "workload: >=5000 messages end to end, zero loss, FIFO", criterion_workload},
      {3, "latency: mean±ci report, added median <= 1 ms, ordering",
       criterion_latency},
      {4, "codec: 1e4 round trips per type, crc check value, reference encoder",
       criterion_codec},
      {5, "mission oracle: exhaustive N<=3, sequences <=6", criterion_mission_oracle},
      {6, "expression evaluator vs reference interpreter, 1e4 trees",
       criterion_eval_oracle},
      {7, "ring stress: 1e5 frames x 20 randomized backoffs", criterion_ring_stress},
      {8, "non-bypass audit on every matrix run", criterion_non_bypass},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    if (!ok) ++failures;
    std::printf("[%d] %-66s %s\n", c.number, c.name, ok ? "PASS" : "FAIL");
    if (!detail.empty()) std::printf("    %s\n", detail.c_str());
    std::fflush(stdout);
  }

  if (g_matrix_ran) {
    std::printf("\n%s\n%s", g_matrix.latency_table().c_str(),
                g_matrix.detection_table().c_str());
  }
  std::printf("\n%d/%zu criteria passed\n",
              static_cast<int>(std::size(criteria)) - failures, std::size(criteria));
  return failures;
}
