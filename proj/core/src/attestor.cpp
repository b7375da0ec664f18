#include "mavguard/attestor.hpp"

#include <sstream>

namespace mavguard {

namespace {

// does any expression in the rule consult telemetry-derived state?
bool expr_uses_telemetry(const dsl::Expr& e) {
  if (e.kind == dsl::ExprKind::StateRef) {
    return e.text == "armed" || e.text == "flight_mode" || e.text == "altitude_m" ||
           e.text == "climb_rate_mps";
  }
  if (e.lhs && expr_uses_telemetry(*e.lhs)) return true;
  if (e.rhs && expr_uses_telemetry(*e.rhs)) return true;
  return false;
}

bool rule_uses_telemetry(const dsl::Rule& r) {
  for (const auto& br : r.branches) {
    if (br.guard && expr_uses_telemetry(*br.guard)) return true;
    for (const auto& req : br.requirements) {
      if (expr_uses_telemetry(*req)) return true;
    }
  }
  return false;
}

dsl::Value field_to_value(const mav::FieldValue& fv) {
  if (const auto* d = std::get_if<double>(&fv)) return *d;
  return std::get<std::string>(fv);
}

}  // namespace

std::string_view session_status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::Idle:
      return "idle";
    case SessionStatus::Uploading:
      return "uploading";
    case SessionStatus::Complete:
      return "complete";
  }
  return "?";
}

Attestor::Attestor(std::shared_ptr<const dsl::ProtocolSpec> spec, AttestorOptions opts)
    : spec_(std::move(spec)), opts_(std::move(opts)) {
  if (!opts_.clock) opts_.clock = [] { return MonotonicClock::now(); };
  state_ = state_init(*spec_);
  rule_needs_telemetry_.reserve(spec_->rules.size());
  for (const auto& r : spec_->rules) rule_needs_telemetry_.push_back(rule_uses_telemetry(r));
  iteration_ = spec_->iterations.empty() ? nullptr : &spec_->iterations.front();
}

Verdict Attestor::make_verdict(Decision d, std::string rule, std::string reason,
                               std::uint32_t msgid, TimePoint now) {
  Verdict v;
  v.decision = d;
  v.rule = std::move(rule);
  v.reason = std::move(reason);
  v.msgid = msgid;
  v.uplink_index = next_index_++;
  v.timestamp = now;
  return v;
}

void Attestor::expire_session(TimePoint now) {
  if (session_.status != SessionStatus::Uploading) return;
  if (now - session_.opened_at <= opts_.session_timeout) return;
  session_.status = SessionStatus::Idle;
  session_.received_seqs.clear();
  Verdict ev;
  ev.decision = Decision::Reject;
  ev.rule = iteration_ != nullptr ? iteration_->name : "iteration";
  ev.reason = "session timed out before completion";
  ev.timestamp = now;
  events_.push_back(std::move(ev));
}

bool Attestor::pattern_matches(const dsl::MsgPattern& pat, const mav::MavMessage& msg,
                               std::map<std::string, dsl::Value>& binders) const {
  if (mav::message_id(msg) != pat.msg_id) return false;
  for (const auto& eq : pat.equals) {
    auto fv = mav::message_field(msg, eq.field);
    if (!fv) return false;
    if (eq.literal->kind == dsl::ExprKind::String) {
      const auto* s = std::get_if<std::string>(&*fv);
      if (s == nullptr || *s != eq.literal->text) return false;
    } else {
      const auto* d = std::get_if<double>(&*fv);
      if (d == nullptr || *d != eq.literal->number) return false;
    }
  }
  for (const auto& b : pat.binds) {
    auto fv = mav::message_field(msg, b.field);
    if (!fv) return false;
    binders[b.binder] = field_to_value(*fv);
  }
  return true;
}

Verdict Attestor::attest(const mav::MavMessage& msg) {
  const TimePoint now = opts_.clock();
  expire_session(now);

  const auto msgid = static_cast<std::uint32_t>(mav::message_id(msg));
  bool governed = false;
  std::string satisfied;

  // 1. refinement rules, in declaration order; all matching rules must pass
  for (std::size_t i = 0; i < spec_->rules.size(); ++i) {
    const dsl::Rule& rule = spec_->rules[i];
    std::map<std::string, dsl::Value> binders;
    if (!pattern_matches(rule.trigger, msg, binders)) continue;
    governed = true;
    satisfied = rule.name;

    if (rule_needs_telemetry_[i]) {
      const bool stale = !state_.telemetry_seen ||
                         (now - state_.last_update) > opts_.stale_window;
      if (stale)
        return make_verdict(Decision::Reject, rule.name,
                            "stale state: no fresh telemetry to check preconditions",
                            msgid, now);
    }

    dsl::EvalContext ctx;
    ctx.msg = &msg;
    ctx.state = &state_;
    ctx.binders = &binders;
    ctx.defines = &spec_->defines;

    const dsl::Branch* selected = nullptr;
    for (const auto& br : rule.branches) {
      if (!br.guard) {
        selected = &br;
        break;
      }
      dsl::EvalOutcome g = dsl::eval_expr(*br.guard, ctx);
      if (!g.ok())
        return make_verdict(Decision::Reject, rule.name,
                            "evaluation error: " + g.error().message, msgid, now);
      const bool* gb = std::get_if<bool>(&g.value());
      if (gb == nullptr)
        return make_verdict(Decision::Reject, rule.name,
                            "evaluation error: guard is not boolean", msgid, now);
      if (*gb) {
        selected = &br;
        break;
      }
    }
    if (selected == nullptr)
      return make_verdict(Decision::Reject, rule.name, "no branch", msgid, now);

    for (const auto& req : selected->requirements) {
      dsl::EvalOutcome r = dsl::eval_expr(*req, ctx);
      if (!r.ok())
        return make_verdict(Decision::Reject, rule.name,
                            "evaluation error: " + r.error().message, msgid, now);
      const bool* rb = std::get_if<bool>(&r.value());
      if (rb == nullptr)
        return make_verdict(Decision::Reject, rule.name,
                            "evaluation error: requirement is not boolean", msgid, now);
      if (!*rb)
        return make_verdict(Decision::Reject, rule.name,
                            "requirement failed: " + dsl::print_expr(*req), msgid, now);
    }
  }

  // 2. bounded-iteration sessions
  for (const auto& iter : spec_->iterations) {
    std::map<std::string, dsl::Value> binders;
    if (iter.open_pattern.msg_id == mav::message_id(msg) &&
        pattern_matches(iter.open_pattern, msg, binders)) {
      if (session_.status == SessionStatus::Uploading)
        return make_verdict(Decision::Reject, iter.name,
                            "upload already in progress; duplicate count rejected",
                            msgid, now);
      const double n = std::get<double>(binders.at(iter.open_pattern.binds[0].binder));
      const auto count = static_cast<std::uint16_t>(n);
      session_.expected_count = count;
      session_.received_seqs.clear();
      session_.opened_at = now;
      session_.status = count == 0 ? SessionStatus::Complete : SessionStatus::Uploading;
      governed = true;
      satisfied = iter.name;
      continue;
    }
    std::map<std::string, dsl::Value> item_binders;
    if (iter.item_pattern.msg_id == mav::message_id(msg) &&
        pattern_matches(iter.item_pattern, msg, item_binders)) {
      governed = true;
      if (session_.status != SessionStatus::Uploading)
        return make_verdict(Decision::Reject, iter.name, "no matching session", msgid,
                            now);
      const double s =
          std::get<double>(item_binders.at(iter.item_pattern.binds[0].binder));
      const auto seq = static_cast<std::uint16_t>(s);
      if (seq >= session_.expected_count)
        return make_verdict(
            Decision::Reject, iter.name,
            "item sequence " + std::to_string(seq) + " outside 0.." +
                std::to_string(session_.expected_count - 1),
            msgid, now);
      if (session_.received_seqs.count(seq) != 0)
        return make_verdict(Decision::Reject, iter.name,
                            "duplicate item sequence " + std::to_string(seq), msgid,
                            now);

      dsl::IterBindings ib;
      ib.index = static_cast<double>(session_.received_seqs.size());
      ib.count = static_cast<double>(session_.expected_count);
      dsl::EvalContext ctx;
      ctx.msg = &msg;
      ctx.state = &state_;
      ctx.binders = &item_binders;
      ctx.defines = &spec_->defines;
      ctx.iter = &ib;
      for (const auto& req : iter.item_requirements) {
        dsl::EvalOutcome r = dsl::eval_expr(*req, ctx);
        if (!r.ok())
          return make_verdict(Decision::Reject, iter.name,
                              "evaluation error: " + r.error().message, msgid, now);
        const bool* rb = std::get_if<bool>(&r.value());
        if (rb == nullptr || !*rb)
          return make_verdict(Decision::Reject, iter.name,
                              "requirement failed: " + dsl::print_expr(*req), msgid,
                              now);
      }
      session_.received_seqs.insert(seq);
      if (session_.received_seqs.size() == session_.expected_count)
        session_.status = SessionStatus::Complete;
      satisfied = iter.name;
    }
  }

  // 3. static bounds gate for PARAM_SET, then state mirroring
  if (const auto* ps = std::get_if<mav::ParamSet>(&msg)) {
    const dsl::StateDecl* decl = spec_->find_state_decl(ps->param_id);
    if (decl != nullptr) {
      const double v = ps->param_value;
      if (!value_within_static_bounds(v, decl->min, decl->max)) {
        std::ostringstream os;
        os << "value " << v << " outside static bounds";
        if (decl->min) os << " min " << *decl->min;
        if (decl->max) os << " max " << *decl->max;
        return make_verdict(Decision::Reject, "static_bounds", os.str(), msgid, now);
      }
      apply_accepted_command(state_, msg);
      if (satisfied.empty()) satisfied = "static_bounds";
      governed = true;
    } else {
      apply_accepted_command(state_, msg);
      return make_verdict(Decision::Accept, satisfied,
                          "mirrored undeclared parameter (unbounded)", msgid, now);
    }
  }

  if (!governed && opts_.default_deny)
    return make_verdict(Decision::Reject, "default_deny",
                        "no rule matched and default-deny is active", msgid, now);

  return make_verdict(Decision::Accept, satisfied,
                      governed ? "all checks passed" : "no matching rule", msgid, now);
}

Verdict Attestor::attest_unknown(std::uint32_t msgid) {
  const TimePoint now = opts_.clock();
  expire_session(now);
  if (opts_.default_deny)
    return make_verdict(Decision::Reject, "default_deny",
                        "unknown msgid and default-deny is active", msgid, now);
  return make_verdict(Decision::Accept, "", "unknown msgid forwarded opaquely", msgid,
                      now);
}

void Attestor::observe_telemetry(const mav::MavMessage& msg) {
  apply_telemetry(state_, msg, opts_.clock());
}

void Attestor::reset() {
  state_ = state_init(*spec_);
  session_ = MissionSession{};
  next_index_ = 0;
  events_.clear();
}

std::vector<Verdict> Attestor::drain_events() {
  std::vector<Verdict> out;
  out.swap(events_);
  return out;
}

}  // namespace mavguard
