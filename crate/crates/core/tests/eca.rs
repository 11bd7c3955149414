//! Reactive rule processing: discovery, slot evaluation order, provisional
//! actions, else routing and cycle semantics.

mod support;

use contractlog::eca::{self, SlotCounters, Status};
use contractlog::solve::machine;
use contractlog::solve::Session;
use contractlog::{parse, ModuleId};
use support::session_with_ec;

fn rules_of(session: &mut Session) -> Vec<eca::EcaRule> {
    let (rules, diagnostics) = eca::discover(session);
    assert!(diagnostics.is_empty(), "unexpected diagnostics: {:?}", diagnostics);
    rules
}

fn holds(session: &mut Session, goal: &str) -> bool {
    let g = parse::parse_term(goal).expect("goal parses");
    machine::exists(session, &[g]).expect("query runs")
}

#[test]
fn discovery_pads_short_arities_and_keeps_ids_stable() {
    let mut session = session_with_ec(
        "low(widget).\n\
         eca(low(X), notify(ops, reorder(X))).\n\
         eca(tick(T), low(X), notify(ops, reorder(X))).\n",
    );
    let rules = rules_of(&mut session);
    assert_eq!(rules.len(), 2);

    // Shorter arities come first; missing slots read as placeholders.
    let two = &rules[0];
    assert!(two.slots[0].to_string() == "_" || two.slots[0].is_var());
    assert_eq!(two.slots[2].to_string(), "low(X)");
    let three = &rules[1];
    assert_eq!(three.slots[1].to_string(), "tick(T)");

    for r in &rules {
        assert!(r.id.starts_with("eca#"), "id {}", r.id);
    }
    let again = rules_of(&mut session);
    let ids: Vec<_> = rules.iter().map(|r| r.id.clone()).collect();
    let ids_again: Vec<_> = again.iter().map(|r| r.id.clone()).collect();
    assert_eq!(ids, ids_again, "ids survive rediscovery");
}

#[test]
fn textually_identical_rules_collapse_to_one() {
    let mut session = session_with_ec(
        "eca(low(X), notify(ops, reorder(X))).\n\
         eca(low(X), notify(ops, reorder(X))).\n",
    );
    assert_eq!(rules_of(&mut session).len(), 1);
}

#[test]
fn malformed_slots_are_reported_and_skipped() {
    let mut session = session_with_ec(
        "eca(5, notify(ops, bad)).\n\
         eca(good, notify(ops, fine)).\n",
    );
    let (rules, diagnostics) = eca::discover(&mut session);
    assert_eq!(rules.len(), 1);
    assert_eq!(rules[0].slots[2].to_string(), "good");
    assert_eq!(diagnostics.len(), 1);
    assert!(diagnostics[0].contains("not a goal"), "{}", diagnostics[0]);
}

#[test]
fn condition_action_rule_fires_on_the_first_solution() {
    let mut session = session_with_ec(
        "low(widget).\n\
         low(gadget).\n\
         eca(low(X), notify(ops, reorder(X))).\n",
    );
    let rules = rules_of(&mut session);
    let out = eca::evaluate(&mut session, &rules[0]);
    assert_eq!(out.status, Status::Fired);
    assert_eq!(out.detail.as_deref(), Some("notify(ops, reorder(widget))"));
    assert_eq!(out.counters, SlotCounters { t: 0, e: 0, c: 1, a: 1, p: 0, el: 0 });
    assert_eq!(session.outbox.len(), 1);
}

#[test]
fn time_failure_short_circuits_every_later_slot() {
    let mut session = session_with_ec(
        "evt(e1).\n\
         eca(no_such_time, evt(X), _, notify(ops, X), _, notify(ops, fallback)).\n",
    );
    let rules = rules_of(&mut session);
    let out = eca::evaluate(&mut session, &rules[0]);
    assert_eq!(out.status, Status::NotApplicable);
    assert_eq!(out.detail, None);
    assert_eq!(out.counters, SlotCounters { t: 1, e: 0, c: 0, a: 0, p: 0, el: 0 });
    assert!(session.outbox.is_empty());
}

#[test]
fn else_branch_covers_absent_events() {
    let mut session = session_with_ec(
        "eca(_, down(S), _, notify(ops, restart(S)), _, notify(ops, all_quiet)).\n",
    );
    let rules = rules_of(&mut session);
    let out = eca::evaluate(&mut session, &rules[0]);
    assert_eq!(out.status, Status::ElseFired);
    assert_eq!(out.detail.as_deref(), Some("notify(ops, all_quiet)"));
    assert_eq!(out.counters, SlotCounters { t: 0, e: 1, c: 0, a: 0, p: 0, el: 1 });
    assert_eq!(session.outbox.len(), 1);
    assert_eq!(session.outbox[0].message.to_string(), "all_quiet");
}

#[test]
fn else_branch_covers_exhausted_branches_with_event_bindings() {
    let mut session = session_with_ec(
        "evt(e1).\n\
         eca(_, evt(X), _, update(mark, \"marker(_0).\", [X]), never, notify(ops, fallback(X))).\n",
    );
    let rules = rules_of(&mut session);
    let out = eca::evaluate(&mut session, &rules[0]);
    assert_eq!(out.status, Status::ElseFired);
    assert_eq!(out.detail.as_deref(), Some("notify(ops, fallback(e1))"));
    assert_eq!(out.counters, SlotCounters { t: 0, e: 1, c: 0, a: 1, p: 1, el: 1 });
    // The provisional marker was rolled back before the else ran.
    assert!(!holds(&mut session, "marker(e1)"));
    assert!(session.kb.module(&ModuleId::named("mark")).is_none());
}

#[test]
fn post_condition_failure_reports_rolled_back() {
    let mut session = session_with_ec(
        "evt(e1).\n\
         eca(evt(X), _, update(mark, \"marker(_0).\", [X]), never).\n",
    );
    let rules = rules_of(&mut session);
    let log_before = session.kb.log().len();
    let out = eca::evaluate(&mut session, &rules[0]);
    assert_eq!(out.status, Status::RolledBack);
    assert_eq!(out.detail, None);
    assert_eq!(session.kb.log().len(), log_before, "no update survives");
    assert!(!holds(&mut session, "marker(e1)"));
}

#[test]
fn action_errors_are_logged_and_backtrack_to_the_next_branch() {
    let mut session = session_with_ec(
        "c(one).\n\
         c(two).\n\
         pick(one) :- update(mark, 42).\n\
         pick(two) :- notify(ops, ok(two)).\n\
         eca(c(X), pick(X)).\n",
    );
    let rules = rules_of(&mut session);
    let out = eca::evaluate(&mut session, &rules[0]);
    assert_eq!(out.status, Status::Fired);
    assert_eq!(out.detail.as_deref(), Some("pick(two)"));
    assert_eq!(out.counters.a, 2);
    assert_eq!(out.errors.len(), 1);
    assert!(out.errors[0].starts_with("action:"), "{}", out.errors[0]);
    assert_eq!(session.outbox.len(), 1);
}

#[test]
fn load_balancing_backtracks_inside_the_action() {
    let mut session = session_with_ec(
        "server(s1).\n\
         server(s2).\n\
         request(orders).\n\
         dispatch(Task) :- server(S), rbsla.utils.WebService.load(S, Task),\n\
                           notify(ops, assigned(S, Task)).\n\
         eca(_, request(Task), _, dispatch(Task), _, _).\n",
    );
    session.env.set_load_response("s1", contractlog::term::Term::constant("busy"));
    session.env.set_load_response("s2", contractlog::term::Term::constant("orders"));
    let rules = rules_of(&mut session);
    let out = eca::evaluate(&mut session, &rules[0]);
    assert_eq!(out.status, Status::Fired);
    assert_eq!(out.detail.as_deref(), Some("dispatch(orders)"));
    // One action invocation: the retry happened inside its search, and the
    // refused first server never produced an assignment.
    assert_eq!(out.counters.a, 1);
    assert_eq!(session.outbox.len(), 1);
    assert_eq!(session.outbox[0].message.to_string(), "assigned(s2, orders)");
}

#[test]
fn interval_throttle_spaces_out_firings() {
    let mut session = session_with_ec(
        "eca(interval(10, Now), _, _, notify(ops, beat), _).\n",
    );
    let rules = rules_of(&mut session);
    let mut fire_at = |session: &mut Session, t: i64| {
        session.clock.set(t);
        eca::evaluate(session, &rules[0]).status
    };
    assert_eq!(fire_at(&mut session, 0), Status::Fired);
    assert_eq!(fire_at(&mut session, 5), Status::NotApplicable);
    assert_eq!(fire_at(&mut session, 10), Status::Fired);
    assert_eq!(session.outbox.len(), 2);
}

#[test]
fn zero_span_interval_always_passes() {
    let mut session = session_with_ec(
        "eca(interval(0, Now), _, _, notify(ops, beat), _).\n",
    );
    let rules = rules_of(&mut session);
    for _ in 0..3 {
        assert_eq!(eca::evaluate(&mut session, &rules[0]).status, Status::Fired);
    }
    assert_eq!(session.outbox.len(), 3);
}

#[test]
fn committed_updates_pass_their_own_post_condition() {
    let mut session = session_with_ec(
        "eca(_, update(flagmod, \"flag.\"), flag, _).\n",
    );
    let rules = rules_of(&mut session);
    let out = eca::evaluate(&mut session, &rules[0]);
    assert_eq!(out.status, Status::Fired);
    assert!(holds(&mut session, "flag"), "committed update persists");
}

#[test]
fn snapshot_isolation_defers_visibility_to_the_next_cycle() {
    let mut session = session_with_ec(
        "eca(_, update(m_one, \"trigger.\")).\n\
         eca(trigger, notify(ops, saw_it)).\n",
    );
    let first = eca::poll_cycle(&mut session);
    assert!(first.diagnostics.is_empty());
    let statuses: Vec<_> = first.outcomes.iter().map(|o| o.status.clone()).collect();
    assert_eq!(statuses, vec![Status::Fired, Status::NotApplicable]);
    assert!(holds(&mut session, "trigger"), "committed after the cycle");
    assert!(session.outbox.is_empty());

    let second = eca::poll_cycle(&mut session);
    let statuses: Vec<_> = second.outcomes.iter().map(|o| o.status.clone()).collect();
    assert_eq!(statuses, vec![Status::Fired, Status::Fired]);
    assert_eq!(session.outbox.len(), 1);
    assert_eq!(session.outbox[0].message.to_string(), "saw_it");
}

#[test]
fn commit_conflicts_surface_as_diagnostics() {
    let mut session = session_with_ec(
        "go_one.\n\
         go_two.\n\
         eca(go_one, remove(victim)).\n\
         eca(go_two, remove(victim)).\n",
    );
    let setup = parse::parse_term("update(victim, \"v.\")").unwrap();
    assert!(machine::exists(&mut session, &[setup]).unwrap());
    assert!(holds(&mut session, "v"));

    let report = eca::poll_cycle(&mut session);
    let statuses: Vec<_> = report.outcomes.iter().map(|o| o.status.clone()).collect();
    // Each rule saw the same snapshot, so both removals succeeded locally.
    assert_eq!(statuses, vec![Status::Fired, Status::Fired]);
    assert_eq!(report.diagnostics.len(), 1);
    assert!(report.diagnostics[0].contains("commit"), "{}", report.diagnostics[0]);
    assert!(!holds(&mut session, "v"), "first removal committed");
}

#[test]
fn escalation_guard_fires_once_across_cycles() {
    let mut session = session_with_ec(
        "outage(s1).\n\
         eca(_, outage(S), not(escalated(S)),\n\
             update(mark(S), \"escalated(_0).\", [S]), escalated(S), _).\n",
    );
    let mut fired = 0;
    for _ in 0..3 {
        let report = eca::poll_cycle(&mut session);
        fired += report
            .outcomes
            .iter()
            .filter(|o| o.status == Status::Fired)
            .count();
    }
    assert_eq!(fired, 1, "guard suppresses re-escalation");
    assert!(holds(&mut session, "escalated(s1)"));
}

#[test]
fn cycles_are_deterministic() {
    let script = "low(widget).\n\
                  low(gadget).\n\
                  eca(_, update(seen, \"handled(_0).\", [widget])).\n\
                  eca(low(X), notify(ops, reorder(X))).\n\
                  eca(interval(60, N), handled(Y), _, notify(ops, done(Y)), _).\n";
    let run = || {
        let mut session = session_with_ec(script);
        let mut lines = Vec::new();
        for cycle in 0..3 {
            session.clock.set(cycle * 60);
            let report = eca::poll_cycle(&mut session);
            for o in &report.outcomes {
                lines.push(format!(
                    "{} {} {} {:?}",
                    cycle, o.rule, o.status, o.detail
                ));
            }
        }
        lines
    };
    assert_eq!(run(), run());
}
