//! Scripted scenario execution around the reactive daemon.
//!
//! A scenario is a line-oriented script that drives the virtual clock, the
//! simulated environment and the knowledge base while the rule daemon polls
//! on a fixed period. Directives:
//!
//! ```text
//! poll <seconds>                   cycle period, default 60
//! at <seconds> <service> up|down   scripted availability change
//! at <seconds> assert <clauses>    knowledge added under a scn#N module
//! run-until <seconds>              advance, running due changes and cycles
//! step                             one cycle at the current time
//! expect <goal> <true|false|unknown>
//! watch <label> <goal>             re-evaluated per cycle, logged on change
//! mvi <fluent>                     validity intervals up to now
//! ```
//!
//! `$now` inside goals is replaced by the current time in seconds. A change
//! scheduled at the same instant as a cycle applies after it, so rules
//! observe it one period later. The outcome log is fully deterministic;
//! `expect` mismatches flip the final line to `result: FAIL`.

use crate::ec;
use crate::eca;
use crate::kb::ModuleId;
use crate::parse;
use crate::solve::{self, Session, SolveError, Truth};
use std::collections::BTreeSet;

#[derive(Clone, Debug)]
pub enum Change {
    Up(String),
    Down(String),
    Assert(String),
}

#[derive(Clone, Debug)]
pub enum Directive {
    Poll(i64),
    At(i64, Change),
    RunUntil(i64),
    Step,
    Expect(String, Truth),
    Watch(String, String),
    Mvi(String),
}

pub fn parse_scenario(text: &str) -> Result<Vec<Directive>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: &str| format!("line {}: {}", i + 1, m);
        let mut words = line.split_whitespace();
        let head = words.next().unwrap();
        let d = match head {
            "poll" => Directive::Poll(int_arg(words.next(), &err)?),
            "run-until" => Directive::RunUntil(int_arg(words.next(), &err)?),
            "step" => Directive::Step,
            "at" => {
                let t = int_arg(words.next(), &err)?;
                let subject = words.next().ok_or_else(|| err("missing subject"))?;
                if subject == "assert" {
                    let rest = rest_after(line, "assert");
                    if rest.is_empty() {
                        return Err(err("nothing to assert"));
                    }
                    Directive::At(t, Change::Assert(rest))
                } else {
                    match words.next() {
                        Some("up") => Directive::At(t, Change::Up(subject.to_string())),
                        Some("down") => Directive::At(t, Change::Down(subject.to_string())),
                        _ => return Err(err("expected up or down")),
                    }
                }
            }
            "expect" => {
                let mut parts: Vec<&str> = line.split_whitespace().skip(1).collect();
                let want = match parts.pop() {
                    Some("true") => Truth::True,
                    Some("false") => Truth::False,
                    Some("unknown") => Truth::Unknown,
                    _ => return Err(err("expected true, false or unknown")),
                };
                if parts.is_empty() {
                    return Err(err("missing goal"));
                }
                Directive::Expect(parts.join(" "), want)
            }
            "watch" => {
                let label = words.next().ok_or_else(|| err("missing label"))?;
                let goal = words.collect::<Vec<_>>().join(" ");
                if goal.is_empty() {
                    return Err(err("missing goal"));
                }
                Directive::Watch(label.to_string(), goal)
            }
            "mvi" => {
                let pat = words.collect::<Vec<_>>().join(" ");
                if pat.is_empty() {
                    return Err(err("missing fluent"));
                }
                Directive::Mvi(pat)
            }
            other => return Err(err(&format!("unknown directive {}", other))),
        };
        out.push(d);
    }
    Ok(out)
}

fn int_arg(w: Option<&str>, err: &dyn Fn(&str) -> String) -> Result<i64, String> {
    w.and_then(|s| s.parse().ok()).ok_or_else(|| err("expected a number of seconds"))
}

fn rest_after(line: &str, marker: &str) -> String {
    match line.find(marker) {
        Some(i) => line[i + marker.len()..].trim().to_string(),
        None => String::new(),
    }
}

#[derive(Debug)]
pub struct ScenarioReport {
    pub lines: Vec<String>,
    pub passed: bool,
}

impl ScenarioReport {
    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

struct Watch {
    label: String,
    goal: String,
    last: Option<String>,
}

struct Driver<'a> {
    session: &'a mut Session,
    poll: i64,
    next_cycle: i64,
    schedule: Vec<(i64, usize, Change)>,
    seq: usize,
    asserts: usize,
    watches: Vec<Watch>,
    lines: Vec<String>,
    failures: usize,
}

pub fn run_scenario(
    session: &mut Session,
    directives: &[Directive],
) -> Result<ScenarioReport, SolveError> {
    let mut driver = Driver {
        next_cycle: session.clock.now() + 60,
        session,
        poll: 60,
        schedule: Vec::new(),
        seq: 0,
        asserts: 0,
        watches: Vec::new(),
        lines: Vec::new(),
        failures: 0,
    };
    for d in directives {
        driver.execute(d)?;
    }
    let verdict = if driver.failures == 0 { "PASS" } else { "FAIL" };
    driver.lines.push(format!("result: {}", verdict));
    Ok(ScenarioReport { lines: driver.lines, passed: driver.failures == 0 })
}

impl Driver<'_> {
    fn now(&self) -> i64 {
        self.session.clock.now()
    }

    fn execute(&mut self, d: &Directive) -> Result<(), SolveError> {
        match d {
            Directive::Poll(p) => {
                if *p <= 0 {
                    return Err(SolveError::Builtin("poll period must be positive".into()));
                }
                self.poll = *p;
                self.next_cycle = (self.now() / p + 1) * p;
            }
            Directive::At(t, change) => {
                if *t < self.now() {
                    return Err(SolveError::Builtin(format!("at {} is in the past", t)));
                }
                self.schedule.push((*t, self.seq, change.clone()));
                self.seq += 1;
                self.schedule.sort_by_key(|(t, s, _)| (*t, *s));
            }
            Directive::RunUntil(target) => self.advance(*target)?,
            Directive::Step => {
                let now = self.now();
                self.cycle(now)?;
            }
            Directive::Expect(goal, want) => self.expect(goal, *want)?,
            Directive::Watch(label, goal) => self.watches.push(Watch {
                label: label.clone(),
                goal: goal.clone(),
                last: None,
            }),
            Directive::Mvi(pattern) => self.mvi(pattern)?,
        }
        Ok(())
    }

    /// Discrete-event advance: due changes and poll cycles in time order,
    /// cycle first on ties.
    fn advance(&mut self, target: i64) -> Result<(), SolveError> {
        loop {
            let change_at = self.schedule.first().map(|(t, _, _)| *t).filter(|t| *t <= target);
            let cycle_at = Some(self.next_cycle).filter(|t| *t <= target);
            match (cycle_at, change_at) {
                (None, None) => break,
                (Some(tc), ca) if ca.map_or(true, |t| tc <= t) => {
                    self.session.clock.set(tc);
                    self.cycle(tc)?;
                    self.next_cycle = tc + self.poll;
                }
                _ => {
                    let (t, _, change) = self.schedule.remove(0);
                    self.session.clock.set(t);
                    self.apply(t, change)?;
                }
            }
        }
        self.session.clock.set(target);
        Ok(())
    }

    fn apply(&mut self, t: i64, change: Change) -> Result<(), SolveError> {
        match change {
            Change::Up(s) => {
                self.session.env.set_up(&s, true);
                self.lines.push(format!("t={} env {} up", t, s));
            }
            Change::Down(s) => {
                self.session.env.set_up(&s, false);
                self.lines.push(format!("t={} env {} down", t, s));
            }
            Change::Assert(text) => {
                let clauses = parse::parse_clauses(&text)?;
                self.asserts += 1;
                let id = ModuleId::named(&format!("scn#{}", self.asserts));
                self.session.kb = self.session.kb.add_module(id, clauses)?;
                self.lines.push(format!("t={} assert scn#{}", t, self.asserts));
            }
        }
        Ok(())
    }

    fn cycle(&mut self, now: i64) -> Result<(), SolveError> {
        let report = eca::poll_cycle(self.session);
        for o in &report.outcomes {
            if o.status != eca::Status::NotApplicable {
                let detail = o.detail.as_deref().map(|d| format!(" {}", d)).unwrap_or_default();
                self.lines.push(format!("t={} rule={} {}{}", now, o.rule, o.status, detail));
            }
            for e in &o.errors {
                self.lines.push(format!("t={} rule={} error {}", now, o.rule, e));
            }
        }
        for d in &report.diagnostics {
            self.lines.push(format!("t={} diagnostic {}", now, d));
        }
        for i in 0..self.watches.len() {
            let goal = self.watches[i].goal.clone();
            let rendered = self.render_goal(&goal);
            let w = &mut self.watches[i];
            if w.last.as_deref() != Some(rendered.as_str()) {
                self.lines.push(format!("t={} {}: {}", now, w.label, rendered));
                self.watches[i].last = Some(rendered);
            }
        }
        Ok(())
    }

    fn substitute_now(&self, text: &str) -> String {
        text.replace("$now", &self.now().to_string())
    }

    /// Answers rendered as sorted binding lists; a ground goal renders as
    /// its truth value. Errors render inline so a broken watch cannot stop
    /// the scenario.
    fn render_goal(&mut self, text: &str) -> String {
        let substituted = self.substitute_now(text);
        let goals = match parse::parse_goals(&substituted) {
            Ok(g) => g,
            Err(e) => return format!("parse error: {}", e),
        };
        let outcome = match solve::solve(self.session, &goals) {
            Ok(o) => o,
            Err(e) => return format!("error: {}", e),
        };
        let mut rows = BTreeSet::new();
        let mut saw_unknown = false;
        for a in &outcome.answers {
            match a.truth {
                Truth::True => {
                    let mut parts: Vec<String> = a
                        .subst
                        .iter()
                        .map(|((name, _), t)| format!("{} = {}", name, t))
                        .collect();
                    parts.sort();
                    rows.insert(if parts.is_empty() { "true".to_string() } else { parts.join(", ") });
                }
                Truth::Unknown => saw_unknown = true,
                Truth::False => {}
            }
        }
        if rows.is_empty() {
            if saw_unknown || outcome.bounded {
                "unknown".to_string()
            } else {
                "false".to_string()
            }
        } else {
            rows.into_iter().collect::<Vec<_>>().join("; ")
        }
    }

    fn expect(&mut self, goal_text: &str, want: Truth) -> Result<(), SolveError> {
        let substituted = self.substitute_now(goal_text);
        let goals = parse::parse_goals(&substituted)?;
        let got = solve::solve(self.session, &goals)?.truth();
        let now = self.now();
        if got == want {
            self.lines.push(format!("t={} expect {} {}", now, substituted, got));
        } else {
            self.failures += 1;
            self.lines.push(format!("t={} expect {} {} (want {})", now, substituted, got, want));
        }
        Ok(())
    }

    fn mvi(&mut self, pattern: &str) -> Result<(), SolveError> {
        let substituted = self.substitute_now(pattern);
        let pat = parse::parse_term(&substituted)?;
        let now = self.now();
        let report = ec::validity_intervals(self.session, &pat, 0.0, now as f64)?;
        if report.is_empty() {
            self.lines.push(format!("t={} mvi {}: none", now, substituted));
        }
        for group in report {
            let spans: Vec<String> = group
                .episodes
                .iter()
                .map(|(a, b)| format!("[{}, {})", fmt_num(*a), fmt_num(*b)))
                .collect();
            self.lines.push(format!(
                "t={} mvi {}: {} total {}",
                now,
                group.fluent,
                spans.join(" "),
                fmt_num(group.total)
            ));
        }
        Ok(())
    }
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{}", v)
    }
}
