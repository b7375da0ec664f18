// mavguard: partitioned MAVLink gateway with a protocol-refinement attestor.
//
// Subcommands:
//   check-spec   parse and validate a refinement spec
//   proxy        run the gateway (net-ingress + fcs-ingress) until interrupted
//   simulate     run one scenario against a chosen configuration
//   matrix       run the attack/benign evaluation matrix over three configurations
//   replay       pump a scenario or recorded frame log through the attestor offline
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mavguard/gateway.hpp"
#include "mavguard/harness.hpp"
#include "mavguard/spec_dsl.hpp"

namespace fs = std::filesystem;
using namespace mavguard;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;  // validation / assertion failure
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;  // ports, IO

std::atomic<bool> g_interrupted{false};

void on_sigint(int) { g_interrupted.store(true); }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, double> parse_defines(const std::vector<std::string>& raw) {
  std::map<std::string, double> out;
  for (const auto& kv : raw) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw CLI::ValidationError("--define", "expected K=V, got '" + kv + "'");
    char* end = nullptr;
    const std::string vs = kv.substr(eq + 1);
    double v = std::strtod(vs.c_str(), &end);
    if (end == vs.c_str() || *end != '\0')
      throw CLI::ValidationError("--define", "value of '" + kv.substr(0, eq) +
                                                 "' is not a number");
    out[kv.substr(0, eq)] = v;
  }
  return out;
}

// parse + validate; prints diagnostics, returns spec or nullptr
std::shared_ptr<const dsl::ProtocolSpec> load_spec(
    const std::string& path, const std::map<std::string, double>& defines,
    bool print_count) {
  dsl::ParseResult res = dsl::parse_spec(read_file(path), defines);
  if (!res.diagnostics.empty()) std::cerr << dsl::format_diagnostics(res.diagnostics);
  if (print_count)
    std::cout << res.diagnostics.size() << " diagnostics" << std::endl;
  if (!res.spec) return nullptr;
  return std::make_shared<const dsl::ProtocolSpec>(std::move(*res.spec));
}

bool parse_hostport(const std::string& s, std::string& host, std::uint16_t& port) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos) return false;
  host = s.substr(0, colon);
  const int p = std::atoi(s.c_str() + colon + 1);
  if (p <= 0 || p > 65535) return false;
  port = static_cast<std::uint16_t>(p);
  return true;
}

std::string effective_log_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  const char* env = std::getenv("MAVGUARD_LOG_DIR");
  if (env != nullptr && env[0] != '\0') return env;
  return "mavguard-logs";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

int cmd_check_spec(const std::string& spec_path,
                   const std::vector<std::string>& defines_raw) {
  auto spec = load_spec(spec_path, parse_defines(defines_raw), true);
  return spec ? kExitOk : kExitFailure;
}

int cmd_proxy(const std::string& spec_path, const std::vector<std::string>& defines_raw,
              GatewayConfig cfg, const std::string& gcs_listen, const std::string& fcs) {
  if (!gcs_listen.empty() &&
      !parse_hostport(gcs_listen, cfg.gcs_listen_host, cfg.gcs_listen_port)) {
    std::cerr << "bad --gcs-listen, expected HOST:PORT\n";
    return kExitUsage;
  }
  if (!fcs.empty() && !parse_hostport(fcs, cfg.fcs_host, cfg.fcs_port)) {
    std::cerr << "bad --fcs, expected HOST:PORT\n";
    return kExitUsage;
  }

  std::shared_ptr<const dsl::ProtocolSpec> spec;
  if (!spec_path.empty()) {
    spec = load_spec(spec_path, parse_defines(defines_raw), false);
    if (!spec) return kExitFailure;
  } else {
    spec = std::make_shared<const dsl::ProtocolSpec>();
  }

  fs::create_directories(cfg.log_dir);
  try {
    Gateway gw(cfg, spec);
    gw.start();
    std::cout << "gateway up: GCS side 127.0.0.1:" << gw.gcs_bound_port()
              << " -> FCS " << cfg.fcs_host << ":" << cfg.fcs_port
              << " (fcs-side port " << gw.fcs_bound_port() << ")\n"
              << "verdicts: " << cfg.verdict_log_path() << "\n";
    std::signal(SIGINT, on_sigint);
    std::signal(SIGTERM, on_sigint);
    while (!g_interrupted.load()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    gw.stop();
    CountersSnapshot c = gw.counters();
    std::printf("uplink=%llu forwarded=%llu rejected=%llu malformed=%llu downlink=%llu\n",
                (unsigned long long)c.uplink_frames, (unsigned long long)c.forwarded,
                (unsigned long long)c.rejected, (unsigned long long)c.malformed,
                (unsigned long long)c.downlink_frames);
  } catch (const std::exception& e) {
    std::cerr << "proxy failed: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_simulate(const std::string& scenario_path, const std::string& spec_path,
                 const std::string& config_name,
                 const std::vector<std::string>& defines_raw, GatewayConfig cfg,
                 unsigned seed) {
  sim::RunOptions opts;
  opts.gateway = cfg;
  opts.seed = seed;
  if (config_name == "passthrough") {
    opts.config = sim::HarnessConfig::Passthrough;
  } else if (config_name == "gateway") {
    opts.config = sim::HarnessConfig::Gateway;
  } else if (config_name == "gateway-spec") {
    opts.config = sim::HarnessConfig::GatewaySpec;
  } else {
    std::cerr << "bad --config (passthrough|gateway|gateway-spec)\n";
    return kExitUsage;
  }

  std::shared_ptr<const dsl::ProtocolSpec> spec;
  if (!spec_path.empty()) {
    spec = load_spec(spec_path, parse_defines(defines_raw), false);
    if (!spec) return kExitFailure;
  }

  try {
    sim::Scenario sc = sim::load_scenario(scenario_path);
    fs::create_directories(cfg.log_dir);
    sim::RunReport report = sim::run_scenario(sc, spec, opts);
    std::cout << report.text_table();
    const std::string out =
        cfg.log_dir + "/" + sc.name + "_" + report.config + "_report.json";
    write_text_file(out, report.to_json());
    std::cout << "report: " << out << "\n";
    if (!report.conservation_holds()) {
      std::cerr << "conservation violated\n";
      return kExitFailure;
    }
    return report.assertions_passed ? kExitOk : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "simulate failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_matrix(const std::string& scenario_dir, const std::string& spec_path,
               const std::vector<std::string>& defines_raw, GatewayConfig cfg) {
  std::shared_ptr<const dsl::ProtocolSpec> spec;
  if (!spec_path.empty()) {
    spec = load_spec(spec_path, parse_defines(defines_raw), false);
    if (!spec) return kExitFailure;
  } else {
    std::cerr << "matrix needs --spec\n";
    return kExitUsage;
  }

  try {
    const fs::path dir(scenario_dir);
    sim::Scenario benign = sim::load_scenario((dir / "benign_mission_25.json").string());
    std::vector<sim::Scenario> attacks;
    for (const char* name : {"attack_inaccurate_bounds.json", "attack_parachute.json",
                             "attack_mission_overflow.json"}) {
      attacks.push_back(sim::load_scenario((dir / name).string()));
    }
    fs::create_directories(cfg.log_dir);
    sim::MatrixReport mr = sim::run_matrix(attacks, benign, spec, cfg);
    std::cout << mr.latency_table() << "\n" << mr.detection_table();
    std::printf("added median latency (gateway+spec vs passthrough): %.3f ms\n",
                mr.added_median_us / 1000.0);
    std::printf("detection_ok=%s benign_clean=%s audits_ok=%s median_ordered=%s\n",
                mr.detection_ok ? "yes" : "no", mr.benign_clean ? "yes" : "no",
                mr.audits_ok ? "yes" : "no", mr.median_ordered ? "yes" : "no");
    const std::string out = cfg.log_dir + "/matrix_report.json";
    write_text_file(out, mr.to_json());
    std::cout << "report: " << out << "\n";
    return (mr.detection_ok && mr.benign_clean && mr.audits_ok) ? kExitOk : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "matrix failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_replay(const std::string& scenario_path, const std::string& frames_path,
               const std::string& spec_path,
               const std::vector<std::string>& defines_raw, bool default_deny,
               const std::string& log_dir) {
  std::shared_ptr<const dsl::ProtocolSpec> spec;
  if (!spec_path.empty()) {
    spec = load_spec(spec_path, parse_defines(defines_raw), false);
    if (!spec) return kExitFailure;
  } else {
    spec = std::make_shared<const dsl::ProtocolSpec>();
  }

  AttestorOptions aopts;
  aopts.default_deny = default_deny;

  try {
    if (!scenario_path.empty()) {
      sim::Scenario sc = sim::load_scenario(scenario_path);
      sim::RunReport report = sim::replay_scenario(sc, spec, aopts);
      std::cout << report.text_table();
      fs::create_directories(log_dir);
      const std::string out = log_dir + "/" + sc.name + "_replay_report.json";
      write_text_file(out, report.to_json());
      return report.assertions_passed ? kExitOk : kExitFailure;
    }

    // raw frame log: concatenated MAVLink v2 frames, uplink only
    std::ifstream in(frames_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + frames_path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    mav::StreamDecoder dec;
    dec.feed(bytes);
    dec.finish();
    Attestor attestor(spec, aopts);
    std::uint64_t accepts = 0, rejects = 0, junk = 0;
    while (auto item = dec.next()) {
      Verdict v;
      if (item->status == mav::DecodeStatus::Ok) {
        v = attestor.attest(*item->message);
      } else if (item->status == mav::DecodeStatus::UnknownMsgId) {
        v = attestor.attest_unknown(item->msgid);
      } else {
        ++junk;
        continue;
      }
      if (v.accepted()) {
        ++accepts;
      } else {
        ++rejects;
        std::printf("reject idx=%llu msgid=%u rule=%s reason=%s\n",
                    (unsigned long long)v.uplink_index, v.msgid, v.rule.c_str(),
                    v.reason.c_str());
      }
    }
    std::printf("frames: accepted=%llu rejected=%llu junk-items=%llu\n",
                (unsigned long long)accepts, (unsigned long long)rejects,
                (unsigned long long)junk);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "replay failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partitioned MAVLink gateway with protocol-refinement attestation"};
  app.require_subcommand(1);

  std::string spec_path;
  std::vector<std::string> defines_raw;
  std::string log_dir_flag;
  bool default_deny = false;
  unsigned seed = 0;

  auto add_common = [&](CLI::App* cmd, bool with_spec = true) {
    if (with_spec) cmd->add_option("--spec", spec_path, "refinement spec file");
    cmd->add_option("--define", defines_raw, "substitute a named constant, K=V");
    cmd->add_option("--log-dir", log_dir_flag,
                    "directory for logs and reports (env MAVGUARD_LOG_DIR)");
    cmd->add_flag("--default-deny", default_deny,
                  "reject messages matched by no rule");
    cmd->add_option("--seed", seed, "run seed (scenario sequence numbering)");
  };

  // check-spec
  auto* check = app.add_subcommand("check-spec", "parse and validate a spec file");
  std::string check_file;
  check->add_option("file", check_file, "spec file")->required();
  check->add_option("--define", defines_raw, "substitute a named constant, K=V");

  // proxy
  auto* proxy = app.add_subcommand("proxy", "run the gateway until interrupted");
  std::string gcs_listen, fcs_target;
  GatewayConfig cfg;
  add_common(proxy);
  proxy->add_option("--gcs-listen", gcs_listen, "HOST:PORT to listen for the GCS on");
  proxy->add_option("--fcs", fcs_target, "HOST:PORT of the FCS endpoint");
  proxy->add_option("--ring-capacity", cfg.ring_capacity, "ring slots (power of two)");
  proxy->add_option("--slot-size", cfg.ring_slot_size, "ring slot bytes");
  proxy->add_option("--spin", cfg.spin_count, "busy-wait spins before sleeping");
  proxy->add_option("--sleep-us", cfg.sleep_us, "backoff sleep in microseconds");
  bool no_feedback_ack = false;
  proxy->add_flag("--no-feedback-ack", no_feedback_ack,
                  "do not send COMMAND_ACK(DENIED) for rejected commands");
  proxy->add_flag("--feedback-statustext", cfg.feedback_statustext,
                  "send STATUSTEXT naming the violated rule");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run one scenario");
  std::string scenario_path, config_name = "gateway-spec";
  add_common(simulate);
  simulate->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  simulate->add_option("--config", config_name,
                       "passthrough | gateway | gateway-spec");

  // matrix
  auto* matrix = app.add_subcommand("matrix", "run the evaluation matrix");
  std::string scenario_dir = "scenarios";
  add_common(matrix);
  matrix->add_option("--scenario-dir", scenario_dir, "directory with the scenario corpus");

  // replay
  auto* replay = app.add_subcommand("replay", "offline attestation replay");
  std::string replay_scenario_path, frames_path;
  add_common(replay);
  replay->add_option("--scenario", replay_scenario_path,
                     "scenario JSON (virtual-clock replay)");
  replay->add_option("--frames", frames_path, "raw frame log (binary)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (check->parsed()) return cmd_check_spec(check_file, defines_raw);

    const std::string log_dir = effective_log_dir(log_dir_flag);
    cfg.log_dir = log_dir;
    cfg.default_deny = default_deny;

    if (proxy->parsed()) {
      cfg.feedback_command_ack = !no_feedback_ack;
      return cmd_proxy(spec_path, defines_raw, cfg, gcs_listen, fcs_target);
    }
    if (simulate->parsed())
      return cmd_simulate(scenario_path, spec_path, config_name, defines_raw, cfg, seed);
    if (matrix->parsed()) return cmd_matrix(scenario_dir, spec_path, defines_raw, cfg);
    if (replay->parsed()) {
      if (replay_scenario_path.empty() && frames_path.empty()) {
        std::cerr << "replay needs --scenario or --frames\n";
        return kExitUsage;
      }
      return cmd_replay(replay_scenario_path, frames_path, spec_path, defines_raw,
                        default_deny, log_dir);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
