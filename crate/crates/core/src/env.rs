//! Runtime environment for monitoring sessions: a virtual clock and a
//! simulated service environment the effectful builtins talk to.

use crate::sym::Sym;
use crate::term::Term;
use std::collections::HashMap;

/// Monotonic virtual time in whole seconds. Scenario drivers advance it
/// explicitly, so runs are deterministic and independent of wall time.
#[derive(Clone, Copy, Debug)]
pub struct VirtualClock {
    now: i64,
}

impl VirtualClock {
    pub fn starting_at(now: i64) -> VirtualClock {
        VirtualClock { now }
    }

    pub fn now(&self) -> i64 {
        self.now
    }

    pub fn advance(&mut self, seconds: i64) {
        debug_assert!(seconds >= 0);
        self.now += seconds;
    }

    pub fn set(&mut self, t: i64) {
        debug_assert!(t >= self.now, "clock moves forward");
        self.now = t;
    }
}

impl Default for VirtualClock {
    fn default() -> VirtualClock {
        VirtualClock { now: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Notification {
    pub at: i64,
    pub recipient: Term,
    pub message: Term,
}

/// Stand-in for the managed infrastructure: which services answer pings and
/// what loading a URL returns. Tests and scenario scripts mutate it between
/// processor cycles.
#[derive(Clone, Debug, Default)]
pub struct SimEnvironment {
    down: HashMap<Sym, bool>,
    load_responses: HashMap<String, Term>,
    pings: u64,
}

impl SimEnvironment {
    pub fn new() -> SimEnvironment {
        SimEnvironment::default()
    }

    /// Services are up unless told otherwise.
    pub fn set_up(&mut self, service: &str, up: bool) {
        self.down.insert(Sym::new(service), !up);
    }

    pub fn is_up(&self, service: Sym) -> bool {
        !self.down.get(&service).copied().unwrap_or(false)
    }

    pub fn ping(&mut self, service: Sym) -> bool {
        self.pings += 1;
        self.is_up(service)
    }

    pub fn ping_count(&self) -> u64 {
        self.pings
    }

    pub fn set_load_response(&mut self, url: &str, response: Term) {
        self.load_responses.insert(url.to_string(), response);
    }

    pub fn load(&self, url: &str) -> Option<Term> {
        self.load_responses.get(url).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_advances() {
        let mut c = VirtualClock::default();
        c.advance(90);
        c.set(120);
        assert_eq!(c.now(), 120);
    }

    #[test]
    fn services_default_up() {
        let mut env = SimEnvironment::new();
        let s = Sym::new("apache");
        assert!(env.ping(s));
        env.set_up("apache", false);
        assert!(!env.ping(s));
        env.set_up("apache", true);
        assert!(env.ping(s));
        assert_eq!(env.ping_count(), 3);
    }
}
