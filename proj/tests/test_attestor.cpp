#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "mavguard/attestor.hpp"
#include "reference/mission_automaton.hpp"
#include "test_util.hpp"
#include "test_paths.hpp"

using namespace mavguard;
using namespace std::chrono;

namespace {

std::shared_ptr<const dsl::ProtocolSpec> load_spec_text(const std::string& text) {
  auto res = dsl::parse_spec(text);
  REQUIRE_MESSAGE(res.ok(), dsl::format_diagnostics(res.diagnostics));
  return std::make_shared<const dsl::ProtocolSpec>(std::move(*res.spec));
}

std::shared_ptr<const dsl::ProtocolSpec> load_default_spec() {
  std::ifstream in(testpaths::repo_file("specs/default.spec"));
  std::ostringstream os;
  os << in.rdbuf();
  return load_spec_text(os.str());
}

// fake monotonic clock driven by the test
struct TestClock {
  std::shared_ptr<std::int64_t> us = std::make_shared<std::int64_t>(0);
  std::function<TimePoint()> fn() const {
    auto p = us;
    return [p] { return TimePoint(microseconds(*p)); };
  }
  void advance_ms(std::int64_t ms) { *us += ms * 1000; }
};

mav::ParamSet param_set(const std::string& name, float value) {
  mav::ParamSet ps;
  ps.param_id = name;
  ps.param_value = value;
  return ps;
}

mav::CommandLong parachute_cmd(float action) {
  mav::CommandLong cmd;
  cmd.command = mav::kCmdDoParachute;
  cmd.param1 = action;
  return cmd;
}

mav::MissionCount count_msg(std::uint16_t n) {
  mav::MissionCount mc;
  mc.count = n;
  return mc;
}

mav::MissionItemInt item_msg(std::uint16_t seq) {
  mav::MissionItemInt it;
  it.seq = seq;
  it.z = 60.0f;
  return it;
}

// armed, level, 30 m, fresh telemetry
void feed_level_telemetry(Attestor& a) {
  mav::Heartbeat hb;
  hb.base_mode = 0x80 | 0x10;
  hb.custom_mode = kModeStabilize;
  a.observe_telemetry(hb);
  mav::GlobalPositionInt pos;
  pos.relative_alt = 30000;
  pos.vz = 0;
  a.observe_telemetry(pos);
}

}  // namespace

TEST_CASE("inaccurate-bounds attack sequence is rejected at the ceiling request") {
  TestClock clk;
  AttestorOptions opts;
  opts.clock = clk.fn();
  Attestor a(load_default_spec(), opts);
  feed_level_telemetry(a);

  // shipped weights allow the near-default ceiling
  CHECK(a.attest(param_set("MC_PITCHRATE_MAX", 221.0f)).accepted());
  CHECK(a.attest(param_set("MC_PITCH_P", 12.0f)).accepted());
  CHECK(a.attest(param_set("MC_PITCHRATE_FF", 2.0f)).accepted());
  CHECK(a.state().params.at("MC_PITCH_P").value == 12.0);

  // bound is now (10*12)*(25*0.15)*(1*2+1) = 1350, so 1800 must be rejected
  Verdict v = a.attest(param_set("MC_PITCHRATE_MAX", 1800.0f));
  CHECK(!v.accepted());
  CHECK(v.rule == "pitchrate_bound");
  CHECK(v.reason.find("requirement failed") != std::string::npos);
  // rejected set must not touch the mirror
  CHECK(a.state().params.at("MC_PITCHRATE_MAX").value == 221.0);

  // 1350 exactly is within the refinement
  CHECK(a.attest(param_set("MC_PITCHRATE_MAX", 1350.0f)).accepted());
  CHECK(a.state().params.at("MC_PITCHRATE_MAX").value == 1350.0);
}

TEST_CASE("parachute release preconditions") {
  TestClock clk;
  AttestorOptions opts;
  opts.clock = clk.fn();
  Attestor a(load_default_spec(), opts);

  SUBCASE("rejected while climbing") {
    mav::Heartbeat hb;
    hb.base_mode = 0x80 | 0x10;
    a.observe_telemetry(hb);
    mav::GlobalPositionInt pos;
    pos.relative_alt = 15000;
    pos.vz = -150;  // ascending 1.5 m/s
    a.observe_telemetry(pos);

    Verdict v = a.attest(parachute_cmd(2.0f));
    CHECK(!v.accepted());
    CHECK(v.rule == "parachute");
    CHECK(v.reason.find("climb_rate_mps") != std::string::npos);
  }

  SUBCASE("rejected when disarmed") {
    mav::Heartbeat hb;
    hb.base_mode = 0x10;  // not armed
    a.observe_telemetry(hb);
    mav::GlobalPositionInt pos;
    pos.relative_alt = 30000;
    pos.vz = 50;  // descending
    a.observe_telemetry(pos);
    Verdict v = a.attest(parachute_cmd(2.0f));
    CHECK(!v.accepted());
    CHECK(v.reason.find("state.armed") != std::string::npos);
  }

  SUBCASE("rejected in FLIP or ACRO mode") {
    mav::Heartbeat hb;
    hb.base_mode = 0x80 | 0x10;
    hb.custom_mode = kModeFlip;
    a.observe_telemetry(hb);
    mav::GlobalPositionInt pos;
    pos.relative_alt = 30000;
    pos.vz = 100;
    a.observe_telemetry(pos);
    Verdict v = a.attest(parachute_cmd(2.0f));
    CHECK(!v.accepted());
    CHECK(v.reason.find("flight_mode") != std::string::npos);
  }

  SUBCASE("rejected below the minimum altitude") {
    mav::Heartbeat hb;
    hb.base_mode = 0x80 | 0x10;
    a.observe_telemetry(hb);
    mav::GlobalPositionInt pos;
    pos.relative_alt = 5000;  // 5 m < CHUTE_ALT_MIN 10
    pos.vz = 100;
    a.observe_telemetry(pos);
    Verdict v = a.attest(parachute_cmd(2.0f));
    CHECK(!v.accepted());
    CHECK(v.reason.find("CHUTE_ALT_MIN") != std::string::npos);
  }

  SUBCASE("accepted when all preconditions hold") {
    mav::Heartbeat hb;
    hb.base_mode = 0x80 | 0x10;
    a.observe_telemetry(hb);
    mav::GlobalPositionInt pos;
    pos.relative_alt = 30000;
    pos.vz = 100;  // descending 1 m/s
    a.observe_telemetry(pos);
    CHECK(a.attest(parachute_cmd(2.0f)).accepted());
  }

  SUBCASE("disable and enable branches accept without preconditions") {
    feed_level_telemetry(a);
    CHECK(a.attest(parachute_cmd(0.0f)).accepted());
    CHECK(a.attest(parachute_cmd(1.0f)).accepted());
  }

  SUBCASE("an action outside the constrained choice hits no branch") {
    feed_level_telemetry(a);
    Verdict v = a.attest(parachute_cmd(7.0f));
    CHECK(!v.accepted());
    CHECK(v.reason == "no branch");
  }
}

TEST_CASE("telemetry staleness fails closed") {
  TestClock clk;
  AttestorOptions opts;
  opts.clock = clk.fn();
  Attestor a(load_default_spec(), opts);

  // no telemetry at all: precondition rules reject
  Verdict v = a.attest(parachute_cmd(2.0f));
  CHECK(!v.accepted());
  CHECK(v.reason.find("stale") != std::string::npos);

  // fresh telemetry, level descent at altitude: accepted
  feed_level_telemetry(a);
  mav::GlobalPositionInt pos;
  pos.relative_alt = 30000;
  pos.vz = 100;
  a.observe_telemetry(pos);
  CHECK(a.attest(parachute_cmd(2.0f)).accepted());

  // same state but 6 s later: stale again
  clk.advance_ms(6000);
  Verdict late = a.attest(parachute_cmd(2.0f));
  CHECK(!late.accepted());
  CHECK(late.reason.find("stale") != std::string::npos);

  // parameter-only rules do not depend on telemetry freshness
  CHECK(a.attest(param_set("MC_PITCHRATE_MAX", 220.0f)).accepted());
}

TEST_CASE("mission session machinery") {
  TestClock clk;
  AttestorOptions opts;
  opts.clock = clk.fn();
  Attestor a(load_default_spec(), opts);
  feed_level_telemetry(a);

  SUBCASE("exactly N distinct items complete the session") {
    CHECK(a.attest(count_msg(3)).accepted());
    CHECK(a.session().status == SessionStatus::Uploading);
    CHECK(a.attest(item_msg(0)).accepted());
    CHECK(a.attest(item_msg(2)).accepted());
    CHECK(a.attest(item_msg(1)).accepted());
    CHECK(a.session().status == SessionStatus::Complete);

    // the session is closed: stale waypoints must not be re-buffered
    Verdict v = a.attest(item_msg(0));
    CHECK(!v.accepted());
    CHECK(v.reason == "no matching session");
  }

  SUBCASE("duplicate sequence numbers are rejected") {
    CHECK(a.attest(count_msg(3)).accepted());
    CHECK(a.attest(item_msg(1)).accepted());
    Verdict v = a.attest(item_msg(1));
    CHECK(!v.accepted());
    CHECK(v.reason.find("duplicate") != std::string::npos);
    CHECK(a.session().status == SessionStatus::Uploading);
  }

  SUBCASE("out-of-range sequence numbers are rejected") {
    CHECK(a.attest(count_msg(3)).accepted());
    Verdict v = a.attest(item_msg(3));
    CHECK(!v.accepted());
    CHECK(v.reason.find("outside") != std::string::npos);
  }

  SUBCASE("a second count during upload is rejected, not restarted") {
    CHECK(a.attest(count_msg(3)).accepted());
    CHECK(a.attest(item_msg(0)).accepted());
    Verdict v = a.attest(count_msg(5));
    CHECK(!v.accepted());
    CHECK(v.reason.find("in progress") != std::string::npos);
    CHECK(a.session().expected_count == 3);
  }

  SUBCASE("count zero completes immediately") {
    CHECK(a.attest(count_msg(0)).accepted());
    CHECK(a.session().status == SessionStatus::Complete);
    CHECK(!a.attest(item_msg(0)).accepted());
  }

  SUBCASE("items without any session are rejected") {
    Verdict v = a.attest(item_msg(0));
    CHECK(!v.accepted());
    CHECK(v.reason == "no matching session");
  }

  SUBCASE("idle timeout closes the session with a logged event") {
    CHECK(a.attest(count_msg(3)).accepted());
    CHECK(a.attest(item_msg(0)).accepted());
    clk.advance_ms(11000);
    Verdict v = a.attest(item_msg(1));
    CHECK(!v.accepted());
    CHECK(v.reason == "no matching session");
    auto events = a.drain_events();
    REQUIRE(events.size() == 1);
    CHECK(events[0].reason.find("timed out") != std::string::npos);
    // a fresh upload can start afterwards
    CHECK(a.attest(count_msg(2)).accepted());
  }
}

TEST_CASE("static bounds gate param sets before mirroring") {
  Attestor a(load_default_spec());
  Verdict v = a.attest(param_set("MC_PITCH_P", 15.0f));  // max is 12
  CHECK(!v.accepted());
  CHECK(v.rule == "static_bounds");
  CHECK(a.state().params.at("MC_PITCH_P").value == 6.5);

  CHECK(!a.attest(param_set("MC_PITCHRATE_P", -0.5f)).accepted());
  CHECK(a.attest(param_set("MC_PITCHRATE_P", 0.6f)).accepted());
  CHECK(a.state().params.at("MC_PITCHRATE_P").value == doctest::Approx(0.6));
}

TEST_CASE("undeclared parameters pass through and are flagged") {
  Attestor a(load_default_spec());
  Verdict v = a.attest(param_set("SOME_OTHER_PARAM", 42.0f));
  CHECK(v.accepted());
  CHECK(v.reason.find("unbounded") != std::string::npos);
  CHECK(a.state().params.at("SOME_OTHER_PARAM").value == 42.0);
}

TEST_CASE("evaluation errors reject, never forward") {
  auto spec = load_spec_text(
      "rule divzero: on PARAM_SET(param_value->n)\n"
      "  require 1 / (n - n) > 0\n");
  Attestor a(spec);
  Verdict v = a.attest(param_set("ANY", 5.0f));
  CHECK(!v.accepted());
  CHECK(v.rule == "divzero");
  CHECK(v.reason.find("evaluation error") != std::string::npos);
}

TEST_CASE("unmatched messages default-permit, or reject under default-deny") {
  mav::Heartbeat hb;
  hb.base_mode = 0;

  Attestor permissive(load_default_spec());
  CHECK(permissive.attest(hb).accepted());
  CHECK(permissive.attest_unknown(4242).accepted());

  AttestorOptions opts;
  opts.default_deny = true;
  Attestor strict(load_default_spec(), opts);
  CHECK(!strict.attest(hb).accepted());
  CHECK(!strict.attest_unknown(4242).accepted());
}

TEST_CASE("vacuous spec accepts every supported message") {
  auto empty = std::make_shared<const dsl::ProtocolSpec>();
  Attestor a(empty);
  std::mt19937_64 rng(0xACCE);
  for (int i = 0; i < 500; ++i) {
    auto msg = testutil::random_message(rng);
    CHECK(a.attest(msg).accepted());
  }
}

TEST_CASE("reset restores freshly constructed behavior") {
  TestClock clk;
  AttestorOptions opts;
  opts.clock = clk.fn();
  Attestor a(load_default_spec(), opts);

  auto scenario = [&](Attestor& at) {
    std::vector<Verdict> out;
    feed_level_telemetry(at);
    out.push_back(at.attest(param_set("MC_PITCH_P", 12.0f)));
    out.push_back(at.attest(count_msg(2)));
    out.push_back(at.attest(item_msg(0)));
    out.push_back(at.attest(item_msg(1)));
    out.push_back(at.attest(parachute_cmd(2.0f)));
    out.push_back(at.attest(param_set("MC_PITCHRATE_MAX", 1800.0f)));
    return out;
  };

  auto first = scenario(a);
  a.reset();
  CHECK(a.state().params.at("MC_PITCH_P").value == 6.5);
  CHECK(a.session().status == SessionStatus::Idle);
  auto second = scenario(a);

  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].decision == second[i].decision);
    CHECK(first[i].rule == second[i].rule);
    CHECK(first[i].reason == second[i].reason);
  }

  // reset mid-upload closes the session
  a.reset();
  feed_level_telemetry(a);
  CHECK(a.attest(count_msg(3)).accepted());
  a.reset();
  feed_level_telemetry(a);
  CHECK(!a.attest(item_msg(0)).accepted());
}

TEST_CASE("monotone safety: accepted param sets keep declared params in bounds") {
  Attestor a(load_default_spec());
  std::mt19937_64 rng(0x9010);
  const char* names[] = {"MC_PITCH_P", "MC_PITCHRATE_P", "MC_PITCHRATE_FF",
                         "MC_PITCHRATE_MAX", "CHUTE_ALT_MIN"};
  std::uniform_real_distribution<float> val(-100.0f, 2000.0f);
  for (int i = 0; i < 2000; ++i) {
    a.attest(param_set(names[rng() % 5], val(rng)));
    for (const auto& [name, entry] : a.state().params) {
      if (!entry.declared) continue;
      CHECK(entry.within_bounds(entry.value));
    }
  }
}

TEST_CASE("mission machinery matches the brute-force automaton exhaustively") {
  auto spec = load_spec_text(
      "iter mission_upload: on MISSION_COUNT(count->N) expect "
      "MISSION_ITEM_INT(seq->i)\n");
  Attestor a(spec);

  // alphabet: COUNT(0..3), ITEM(0..3), ACK
  const int kAlphabet = 9;
  const int max_len = 5;  // the acceptance suite runs the full length-6 space

  std::uint64_t sequences = 0;
  std::vector<int> seq;
  auto run_symbol = [&](Attestor& at, refmission::MissionAutomaton& ref, int s) {
    bool ref_ok, mine_ok;
    if (s < 4) {
      ref_ok = ref.on_count(static_cast<std::uint16_t>(s));
      mine_ok = at.attest(count_msg(static_cast<std::uint16_t>(s))).accepted();
    } else if (s < 8) {
      ref_ok = ref.on_item(static_cast<std::uint16_t>(s - 4));
      mine_ok = at.attest(item_msg(static_cast<std::uint16_t>(s - 4))).accepted();
    } else {
      ref_ok = ref.on_ack();
      mine_ok = at.attest(mav::MissionAck{}).accepted();
    }
    return std::pair(ref_ok, mine_ok);
  };

  std::function<void(int)> explore = [&](int remaining) {
    if (remaining == 0) return;
    for (int s = 0; s < kAlphabet; ++s) {
      seq.push_back(s);
      ++sequences;
      a.reset();
      refmission::MissionAutomaton ref;
      bool diverged = false;
      for (int sym : seq) {
        auto [ref_ok, mine_ok] = run_symbol(a, ref, sym);
        if (ref_ok != mine_ok) {
          diverged = true;
          break;
        }
      }
      REQUIRE(!diverged);
      explore(remaining - 1);
      seq.pop_back();
    }
  };
  explore(max_len);
  CHECK(sequences > 50000);
}
