//! Randomized scenario checking and failure minimization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::batch::{derive_seed, map_indices, Exec};
use crate::catalog::Catalog;
use crate::generate::{random_scenario, ScenarioBounds};

use super::engine::{SimConfig, Simulation};
use super::invariants::{InvariantChecker, Violation, ViolationKind};
use super::oracle::oracle_check;
use super::scenario::{Scenario, BUILTIN_SAMPLE};

/// Runs `scenario` with invariant checks at every processed millisecond and,
/// when `oracle_step_ms` is given, compares against the oracle.
pub fn check_scenario(scenario: &Scenario, catalog: &Catalog, oracle_step_ms: Option<u64>) -> Vec<Violation> {
    let mut violations = Vec::new();
    let engine_failure =
        |t, e: &dyn std::fmt::Display| Violation { t_ms: t, device: "A".into(), kind: ViolationKind::EngineError, detail: e.to_string() };
    if let Err(e) = scenario.validate(catalog) {
        return vec![engine_failure(0, &e)];
    }
    let mut sim = match Simulation::new(catalog, SimConfig::from_scenario(scenario)) {
        Ok(sim) => sim.streaming(),
        Err(e) => return vec![engine_failure(0, &e)],
    };
    for ev in &scenario.events {
        if let Err(e) = sim.schedule(ev.clone()) {
            return vec![engine_failure(ev.at_ms, &e)];
        }
    }
    let mut checker = InvariantChecker::default();
    loop {
        match sim.step(scenario.end_ms) {
            Ok(Some(t)) => {
                checker.check(&sim, t, &mut violations);
                sim.take_changes();
                sim.take_outcomes();
            }
            Ok(None) => break,
            Err(e) => {
                violations.push(engine_failure(sim.now(), &e));
                break;
            }
        }
    }
    if let Some(step) = oracle_step_ms {
        match oracle_check(scenario, catalog, step) {
            Ok(cmp) => violations.extend(cmp.mismatches.into_iter().map(|m| Violation {
                t_ms: m.t_ms,
                device: m.device,
                kind: ViolationKind::OracleMismatch,
                detail: format!("engine {:?} vs oracle {:?}", m.engine, m.oracle),
            })),
            Err(e) => violations.push(engine_failure(0, &e)),
        }
    }
    violations
}

/// Greedily drops events (and trims the end time) while `still_fails` holds.
pub fn minimize(scenario: &Scenario, mut still_fails: impl FnMut(&Scenario) -> bool) -> Scenario {
    let mut best = scenario.clone();
    let mut i = best.events.len();
    while i > 0 {
        i -= 1;
        let mut candidate = best.clone();
        candidate.events.remove(i);
        if still_fails(&candidate) {
            best = candidate;
        }
    }
    let floor = best.events.last().map_or(0, |e| e.at_ms);
    let mut candidate = best.clone();
    candidate.end_ms = floor + (best.end_ms - floor) / 2;
    while candidate.end_ms < best.end_ms && still_fails(&candidate) {
        best = candidate.clone();
        candidate.end_ms = floor + (best.end_ms - floor) / 2;
    }
    best
}

#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub runs: u64,
    pub seed: u64,
    pub bounds: ScenarioBounds,
    pub oracle_step_ms: Option<u64>,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self { runs: 1000, seed: 0, bounds: ScenarioBounds::default(), oracle_step_ms: None }
    }
}

#[derive(Clone, Debug)]
pub struct FuzzFailure {
    pub run: u64,
    pub scenario: Scenario,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, Default)]
pub struct FuzzReport {
    pub runs: u64,
    pub events: u64,
    pub failures: Vec<FuzzFailure>,
}

/// The scenario fuzz run `run` of a campaign with base `seed` checks.
pub fn fuzz_scenario(catalog: &Catalog, seed: u64, run: u64, bounds: &ScenarioBounds) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, run));
    random_scenario(&mut rng, catalog, BUILTIN_SAMPLE, bounds)
}

pub fn fuzz(catalog: &Catalog, config: &FuzzConfig, exec: Exec) -> FuzzReport {
    let results = map_indices(exec, config.runs, |run| {
        let scenario = fuzz_scenario(catalog, config.seed, run, &config.bounds);
        let violations = check_scenario(&scenario, catalog, config.oracle_step_ms);
        let events = scenario.events.len() as u64;
        (events, (!violations.is_empty()).then_some(FuzzFailure { run, scenario, violations }))
    });
    let mut report = FuzzReport { runs: config.runs, ..Default::default() };
    for (events, failure) in results {
        report.events += events;
        report.failures.extend(failure);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::ScenarioEvent;

    #[test]
    fn minimize_keeps_only_needed_events() {
        let mut s = Scenario::new(BUILTIN_SAMPLE, 10_000);
        for t in 0..10 {
            s.events.push(ScenarioEvent::new(t * 100, "A", crate::harness::scenario::Action::StopPersonal));
        }
        // "fails" while an event at 300 ms remains
        let min = minimize(&s, |c| c.events.iter().any(|e| e.at_ms == 300));
        assert_eq!(min.events.len(), 1);
        assert_eq!(min.events[0].at_ms, 300);
        assert!(min.end_ms < 1000);
    }

    #[test]
    fn small_campaign_is_clean_in_both_modes() {
        let catalog = Catalog::sample();
        let config = FuzzConfig { runs: 40, seed: 5, oracle_step_ms: Some(10), ..Default::default() };
        for exec in [Exec::Sequential, Exec::Parallel] {
            let report = fuzz(&catalog, &config, exec);
            let first = report.failures.first().map(|f| f.violations[0].to_string());
            assert!(report.failures.is_empty(), "{first:?}");
        }
    }
}
