#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mavguard/harness.hpp"
#include "test_paths.hpp"
#include "test_util.hpp"

using namespace mavguard;
using namespace mavguard::sim;

namespace {

std::shared_ptr<const dsl::ProtocolSpec> load_default_spec() {
  std::ifstream in(testpaths::repo_file("specs/default.spec"));
  std::ostringstream os;
  os << in.rdbuf();
  auto res = dsl::parse_spec(os.str());
  REQUIRE(res.ok());
  return std::make_shared<const dsl::ProtocolSpec>(std::move(*res.spec));
}

Scenario mini_benign() {
  Scenario s;
  s.name = "mini_benign";
  s.fcs_script.telemetry_hz = 50;
  s.fcs_script.auto_ack = true;
  s.fcs_script.phases.push_back({4000, true, "AUTO", 20.0, 0.0});

  ScriptEntry hb;
  mav::Heartbeat h;
  h.type = 6;
  hb.msg = h;
  hb.delay_ms = 50;
  s.gcs_script.push_back(hb);

  mav::ParamSet ps;
  ps.param_id = "MC_PITCHRATE_MAX";
  ps.param_value = 230.0f;
  s.gcs_script.push_back({5, ps});

  mav::MissionCount mc;
  mc.count = 3;
  s.gcs_script.push_back({5, mc});
  for (std::uint16_t i = 0; i < 3; ++i) {
    mav::MissionItemInt item;
    item.seq = i;
    item.z = 55.0f;
    s.gcs_script.push_back({2, item});
  }
  s.padding.count = 60;
  s.padding.burst = 20;
  s.padding.gap_ms = 1;
  s.expect_zero_rejects = true;
  s.expect_session_complete = true;
  s.timeout_s = 30;
  return s;
}

}  // namespace

TEST_CASE("latency statistics match hand-computed values") {
  auto same = latency_stats({1000, 1000, 1000});
  CHECK(same.mean_ms == doctest::Approx(1.0));
  CHECK(same.sd_ms == doctest::Approx(0.0));
  CHECK(same.format() == "1.000 ± 0.000");

  auto spread = latency_stats({1000, 2000, 3000});
  CHECK(spread.mean_ms == doctest::Approx(2.0));
  CHECK(spread.sd_ms == doctest::Approx(1.0));
  CHECK(spread.ci95_ms == doctest::Approx(1.96 / std::sqrt(3.0)).epsilon(1e-9));
  CHECK(spread.format() == "2.000 ± 1.132");

  CHECK(latency_stats({4061}).format() == "4.061 ± 0.000");
  CHECK_THROWS_AS(latency_stats({}), std::invalid_argument);

  CHECK(median_us({5, 1, 9}) == 5.0);
  CHECK(median_us({4, 1, 9, 5}) == 4.5);
}

TEST_CASE("messages survive the json round trip") {
  std::mt19937_64 rng(0x7503);
  for (int type = 0; type < testutil::kMessageTypeCount; ++type) {
    for (int i = 0; i < 20; ++i) {
      mav::MavMessage m = testutil::random_message_of(rng, type);
      mav::MavMessage back = message_from_json(message_to_json(m));
      CAPTURE(mav::message_name(mav::message_id(m)));
      CHECK(back == m);
    }
  }
}

TEST_CASE("scenario files load and round trip") {
  Scenario s = load_scenario(testpaths::repo_file("scenarios/attack_parachute.json"));
  CHECK(s.name == "attack_parachute");
  CHECK(s.gcs_script.size() == 3);
  CHECK(s.expected.size() == 2);
  CHECK(s.fcs_script.phases.size() == 1);
  CHECK(s.fcs_script.phases[0].climb_rate_mps == 2.0);

  Scenario back = scenario_from_json(scenario_to_json(s));
  CHECK(back.name == s.name);
  CHECK(back.gcs_script.size() == s.gcs_script.size());
  CHECK(back.expected.size() == s.expected.size());
  CHECK(back.gcs_script[1].msg == s.gcs_script[1].msg);
}

TEST_CASE("padding expansion appends heartbeat entries with burst pacing") {
  Scenario s;
  s.padding.count = 250;
  s.padding.burst = 100;
  s.padding.gap_ms = 2;
  expand_padding(s);
  CHECK(s.gcs_script.size() == 250);
  int delayed = 0;
  for (const auto& e : s.gcs_script) {
    if (e.delay_ms > 0) ++delayed;
  }
  CHECK(delayed == 3);  // one gap per burst edge
  CHECK(s.padding.count == 0);
}

TEST_CASE("replay of an empty scenario reports all-zero counts") {
  Scenario s;
  s.name = "empty";
  RunReport r = replay_scenario(s, load_default_spec());
  CHECK(r.sent == 0);
  CHECK(r.forwarded == 0);
  CHECK(r.rejected == 0);
  CHECK(r.dropped == 0);
  CHECK(r.conservation_holds());
  CHECK(!r.attack_detected);
}

TEST_CASE("offline replay detects the shipped attacks deterministically") {
  auto spec = load_default_spec();
  for (const char* name : {"attack_inaccurate_bounds", "attack_parachute",
                           "attack_mission_overflow"}) {
    CAPTURE(name);
    Scenario s = load_scenario(
        testpaths::repo_file(std::string("scenarios/") + name + ".json"));
    RunReport first = replay_scenario(s, spec);
    CHECK(first.attack_detected);
    CHECK_MESSAGE(first.assertions_passed, [&] {
      std::string all;
      for (const auto& f : first.failures) all += f + "; ";
      return all;
    }());
    CHECK(first.conservation_holds());

    RunReport second = replay_scenario(s, spec);
    REQUIRE(first.verdicts.size() == second.verdicts.size());
    for (std::size_t i = 0; i < first.verdicts.size(); ++i) {
      CHECK(first.verdicts[i].decision == second.verdicts[i].decision);
      CHECK(first.verdicts[i].rule == second.verdicts[i].rule);
      CHECK(first.verdicts[i].reason == second.verdicts[i].reason);
    }
  }
}

TEST_CASE("offline replay accepts the benign mission") {
  Scenario s =
      load_scenario(testpaths::repo_file("scenarios/benign_mission_25.json"));
  RunReport r = replay_scenario(s, load_default_spec());
  CHECK(r.rejected == 0);
  CHECK(r.final_session == SessionStatus::Complete);
  CHECK_MESSAGE(r.assertions_passed, [&] {
    std::string all;
    for (const auto& f : r.failures) all += f + "; ";
    return all;
  }());
  CHECK(r.sent >= 5000);
}

TEST_CASE("socket run: small benign scenario conserves every frame") {
  Scenario s = mini_benign();
  RunOptions opts;
  opts.config = HarnessConfig::GatewaySpec;
  RunReport r = run_scenario(s, load_default_spec(), opts);
  CHECK_MESSAGE(r.assertions_passed, [&] {
    std::string all;
    for (const auto& f : r.failures) all += f + "; ";
    return all;
  }());
  CHECK(r.sent == 66);  // 6 scripted + 60 padding
  CHECK(r.rejected == 0);
  CHECK(r.dropped == 0);
  CHECK(r.forwarded == r.sent);
  CHECK(r.conservation_holds());
  CHECK(r.final_session == SessionStatus::Complete);
  CHECK(r.audit.ok);
  CHECK(!r.latency_us.empty());
  CHECK(r.verdicts.size() == r.sent);
}

TEST_CASE("socket run: transparency for an all-benign replay") {
  Scenario s = mini_benign();
  s.fcs_script.auto_ack = false;  // keep the downlink to telemetry only
  RunOptions opts;
  opts.config = HarnessConfig::GatewaySpec;
  opts.record_streams = true;
  std::vector<std::uint8_t> sent_bytes, received_bytes;
  opts.gcs_sent_bytes = &sent_bytes;
  opts.fcs_received_bytes = &received_bytes;
  RunReport r = run_scenario(s, load_default_spec(), opts);
  CHECK(r.rejected == 0);
  CHECK(r.dropped == 0);
  REQUIRE(r.forwarded == r.sent);
  CHECK(sent_bytes == received_bytes);
}

TEST_CASE("socket run: parachute attack is rejected at the scripted index") {
  Scenario s =
      load_scenario(testpaths::repo_file("scenarios/attack_parachute.json"));
  RunOptions opts;
  opts.config = HarnessConfig::GatewaySpec;
  RunReport r = run_scenario(s, load_default_spec(), opts);
  CHECK(r.attack_detected);
  CHECK_MESSAGE(r.assertions_passed, [&] {
    std::string all;
    for (const auto& f : r.failures) all += f + "; ";
    return all;
  }());
  REQUIRE(r.verdicts.size() >= 2);
  CHECK(!r.verdicts[1].accepted());
  CHECK(r.verdicts[1].rule == "parachute");
  CHECK(r.verdicts[2].accepted());
  CHECK(r.audit.ok);
  CHECK(r.conservation_holds());
}

TEST_CASE("passthrough forwards attacks undetected") {
  Scenario s =
      load_scenario(testpaths::repo_file("scenarios/attack_parachute.json"));
  RunOptions opts;
  opts.config = HarnessConfig::Passthrough;
  RunReport r = run_scenario(s, load_default_spec(), opts);
  CHECK(!r.attack_detected);
  CHECK(r.rejected == 0);
  CHECK(r.forwarded == r.sent);
  CHECK(r.conservation_holds());
}

TEST_CASE("run report json carries counts and conservation") {
  Scenario s;
  s.name = "empty";
  RunReport r = replay_scenario(s, load_default_spec());
  std::string j = r.to_json();
  CHECK(j.find("\"conservation_holds\": true") != std::string::npos);
  CHECK(j.find("\"scenario\": \"empty\"") != std::string::npos);
}
