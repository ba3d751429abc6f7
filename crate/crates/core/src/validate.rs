//! Property suites checking a transport solver against conservation laws,
//! exact identities and the analytic references.
//!
//! The solver is passed in, so the same suites can be pointed at a
//! deliberately broken solver to confirm they catch it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closedform::{t_b2_closed, t_single_closed, t_t2_closed, TwoEmitterParams};
use crate::ddi::DdiMatrix;
use crate::disorder::DisorderSpec;
use crate::ensemble::{run_ensemble, ProblemTemplate};
use crate::error::Result;
use crate::params::{ChiralityMode, EmitterChain, EmitterParams, UnitSystem};
use crate::scatter::{PhaseConvention, ScatterProblem, TransportSolution};

pub const FLUX_TOLERANCE: f64 = 1e-12;
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub max_error: f64,
    pub tolerance: f64,
    /// First few failing cases, human readable.
    pub examples: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str, tolerance: f64) -> Self {
        SuiteReport {
            name: name.to_string(),
            cases: 0,
            failures: 0,
            max_error: 0.0,
            tolerance,
            examples: Vec::new(),
        }
    }

    fn record(&mut self, error: f64, describe: impl FnOnce() -> String) {
        self.cases += 1;
        // NaN counts as a failure
        let error = if error.is_nan() { f64::INFINITY } else { error };
        self.max_error = self.max_error.max(error);
        if error > self.tolerance {
            self.failures += 1;
            if self.examples.len() < 5 {
                self.examples.push(describe());
            }
        }
    }

    fn record_failure(&mut self, what: String) {
        self.cases += 1;
        self.failures += 1;
        self.max_error = f64::INFINITY;
        if self.examples.len() < 5 {
            self.examples.push(what);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

/// Sizes of the randomized suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub seed: u64,
    pub flux_instances: usize,
    pub oracle_tuples: usize,
    pub oracle_grid: usize,
    pub identity_instances: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            seed: 20_240_601,
            flux_instances: 1000,
            oracle_tuples: 20,
            oracle_grid: 1000,
            identity_instances: 200,
        }
    }
}

fn relative_error(got: Complex64, want: Complex64) -> f64 {
    (got - want).norm() / want.norm().max(1e-300)
}

/// Random chain with up to `max_n` emitters and gaps in `[1, 120]` nm.
fn random_chain(rng: &mut ChaCha8Rng, max_n: usize, params: EmitterParams) -> EmitterChain {
    let n = rng.random_range(1..=max_n);
    let mut x = Vec::with_capacity(n);
    let mut pos = rng.random_range(-50.0..50.0);
    for _ in 0..n {
        x.push(pos);
        pos += rng.random_range(1.0..120.0);
    }
    EmitterChain::new(x, params).expect("random chain is valid")
}

fn random_params(rng: &mut ChaCha8Rng, gamma: f64) -> EmitterParams {
    EmitterParams {
        gamma,
        big_gamma_bottom: rng.random_range(0.0..30.0),
        big_gamma_top: rng.random_range(0.0..30.0),
        big_gamma_bottom_left: rng.random_range(0.0..30.0),
        big_gamma_top_left: rng.random_range(0.0..30.0),
        theta_dipole: rng.random_range(0.0..PI),
    }
}

/// Random instance: physical or stretched phases, random velocities.
fn random_problem(rng: &mut ChaCha8Rng, gamma: f64, mode: ChiralityMode) -> ScatterProblem {
    let params = random_params(rng, gamma);
    let chain = random_chain(rng, 20, params);
    let delta = rng.random_range(-300.0..300.0);
    let mut p = ScatterProblem::new(chain, UnitSystem::default(), delta, mode).expect("valid problem");
    if rng.random_bool(0.5) {
        // O(1) phases between neighbours
        p.phase = PhaseConvention::Physical {
            phase_scale: rng.random_range(1e5..1e7),
        };
    }
    if rng.random_bool(0.5) {
        p.v_top = p.v_bottom * rng.random_range(0.3..3.0);
    }
    p
}

pub fn flux_suite(solver: &dyn Fn(&ScatterProblem) -> Result<TransportSolution>, cfg: &ValidationConfig) -> Vec<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lossless = SuiteReport::new("flux conservation (γ = 0)", FLUX_TOLERANCE);
    let mut lossy = SuiteReport::new("loss within [0, 1] (γ > 0)", FLUX_TOLERANCE);
    for i in 0..cfg.flux_instances {
        let mode = if i % 2 == 0 { ChiralityMode::Chiral } else { ChiralityMode::Bidirectional };
        let p = random_problem(&mut rng, 0.0, mode);
        match solver(&p) {
            Ok(s) => lossless.record(s.loss.abs(), || format!("N={} Δ={:.3} {:?}: loss {:e}", p.chain.count(), p.delta, mode, s.loss)),
            Err(e) => lossless.record_failure(format!("N={} Δ={:.3}: {e}", p.chain.count(), p.delta)),
        }
        let gamma = rng.random_range(0.01..20.0);
        let p = random_problem(&mut rng, gamma, mode);
        match solver(&p) {
            Ok(s) => {
                let over = (-s.loss).max(s.loss - 1.0).max(0.0);
                let bad_port = [s.probabilities.t_top, s.probabilities.t_bottom, s.probabilities.r_top, s.probabilities.r_bottom]
                    .iter()
                    .map(|&q| (-q).max(q - 1.0).max(0.0))
                    .fold(0.0, f64::max);
                lossy.record(over.max(bad_port), || format!("N={} γ={gamma:.3}: loss {}", p.chain.count(), s.loss));
            }
            Err(e) => lossy.record_failure(format!("N={} γ={gamma:.3}: {e}", p.chain.count())),
        }
    }
    vec![lossless, lossy]
}

/// General solver against the one- and two-emitter closed forms in the
/// dimensionless-phase convention.
pub fn oracle_suite(solver: &dyn Fn(&ScatterProblem) -> Result<TransportSolution>, cfg: &ValidationConfig) -> Vec<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0A11_CE);
    let grid: Vec<f64> = (0..cfg.oracle_grid)
        .map(|i| -300.0 + 600.0 * i as f64 / (cfg.oracle_grid.max(2) - 1) as f64)
        .collect();

    let mut single = SuiteReport::new("oracle N=1", ORACLE_TOLERANCE);
    let mut pair = SuiteReport::new("oracle N=2", ORACLE_TOLERANCE);
    for _ in 0..cfg.oracle_tuples {
        let gamma = rng.random_range(0.0..20.0);
        let big_gamma = rng.random_range(0.5..30.0);
        let j = rng.random_range(-60.0..60.0);
        let r12 = rng.random_range(0.01..0.2);
        let params = EmitterParams::symmetric(gamma, big_gamma);

        let one = EmitterChain::new(vec![0.0], params).unwrap();
        let two = EmitterChain::new(vec![0.0, r12], params).unwrap();
        let ddi = DdiMatrix::pair(j).unwrap();
        for &delta in &grid {
            let (tb, tt) = t_single_closed(delta, gamma, big_gamma);
            let p1 = ScatterProblem::dimensionless(one.clone(), DdiMatrix::zeros(1), delta, ChiralityMode::Chiral);
            match solver(&p1) {
                Ok(s) => single.record(relative_error(s.t_bottom[1], tb).max(relative_error(s.t_top[1], tt)), || {
                    format!("Δ={delta:.3} γ={gamma:.3} Γ={big_gamma:.3}")
                }),
                Err(e) => single.record_failure(format!("Δ={delta:.3}: {e}")),
            }

            let cf = TwoEmitterParams {
                delta,
                gamma,
                big_gamma,
                j_ddi: j,
                phase: r12 * delta,
            };
            let p2 = ScatterProblem::dimensionless(two.clone(), ddi.clone(), delta, ChiralityMode::Chiral);
            match (solver(&p2), t_b2_closed(&cf), t_t2_closed(&cf)) {
                (Ok(s), Ok(tb), Ok(tt)) => pair.record(relative_error(s.t_bottom[2], tb).max(relative_error(s.t_top[2], tt)), || {
                    format!("Δ={delta:.3} γ={gamma:.3} Γ={big_gamma:.3} J={j:.3} r12={r12:.4}")
                }),
                (s, tb, tt) => pair.record_failure(format!("Δ={delta:.3}: {:?} {:?} {:?}", s.err(), tb.err(), tt.err())),
            }
        }
    }
    vec![single, pair]
}

pub fn identity_suite(solver: &dyn Fn(&ScatterProblem) -> Result<TransportSolution>, cfg: &ValidationConfig) -> Vec<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1D_E47);
    let mut top_bottom = SuiteReport::new("t_top = t_bottom − 1 (equal chiral coupling)", IDENTITY_TOLERANCE);
    let mut translation = SuiteReport::new("translation invariance", IDENTITY_TOLERANCE);
    let mut chiral_limit = SuiteReport::new("bidirectional with zero left coupling = chiral", IDENTITY_TOLERANCE);
    for i in 0..cfg.identity_instances {
        let gamma = rng.random_range(0.0..15.0);
        let big_gamma = rng.random_range(0.1..30.0);
        let params = EmitterParams {
            theta_dipole: rng.random_range(0.0..PI),
            ..EmitterParams::symmetric(gamma, big_gamma)
        };
        let chain = random_chain(&mut rng, 20, params);
        let delta = rng.random_range(-300.0..300.0);
        let mut p = ScatterProblem::new(chain, UnitSystem::default(), delta, ChiralityMode::Chiral).unwrap();
        if i % 2 == 1 {
            p.phase = PhaseConvention::Physical {
                phase_scale: rng.random_range(1e5..1e7),
            };
        }
        match solver(&p) {
            Ok(s) => {
                let err = s
                    .t_top
                    .iter()
                    .zip(&s.t_bottom)
                    .map(|(t, b)| (t - (b - 1.0)).norm())
                    .fold(0.0, f64::max);
                top_bottom.record(err, || format!("N={} Δ={delta:.3}", p.chain.count()));
            }
            Err(e) => top_bottom.record_failure(format!("N={}: {e}", p.chain.count())),
        }

        let mode = if i % 2 == 0 { ChiralityMode::Chiral } else { ChiralityMode::Bidirectional };
        let loss_rate = rng.random_range(0.0..10.0);
        let mut q = random_problem(&mut rng, loss_rate, mode);
        let shifted = ScatterProblem {
            chain: q.chain.translated(rng.random_range(-500.0..500.0)),
            ..q.clone()
        };
        match (solver(&q), solver(&shifted)) {
            (Ok(a), Ok(b)) => {
                let (a, b) = (a.probabilities, b.probabilities);
                let err = [a.t_top - b.t_top, a.t_bottom - b.t_bottom, a.r_top - b.r_top, a.r_bottom - b.r_bottom]
                    .iter()
                    .map(|d| d.abs())
                    .fold(0.0, f64::max);
                translation.record(err, || format!("N={} Δ={:.3}", q.chain.count(), q.delta));
            }
            (a, b) => translation.record_failure(format!("{:?} {:?}", a.err(), b.err())),
        }

        q.mode = ChiralityMode::Chiral;
        let mut bidir = q.clone();
        bidir.mode = ChiralityMode::Bidirectional;
        bidir.chain.params.big_gamma_bottom_left = 0.0;
        bidir.chain.params.big_gamma_top_left = 0.0;
        match (solver(&q), solver(&bidir)) {
            (Ok(a), Ok(b)) => {
                let err = a
                    .t_bottom
                    .iter()
                    .zip(&b.t_bottom)
                    .chain(a.t_top.iter().zip(&b.t_top))
                    .chain(a.r_bottom.iter().zip(&b.r_bottom))
                    .chain(a.r_top.iter().zip(&b.r_top))
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                chiral_limit.record(err, || format!("N={} Δ={:.3}", q.chain.count(), q.delta));
            }
            (a, b) => chiral_limit.record_failure(format!("{:?} {:?}", a.err(), b.err())),
        }
    }
    vec![top_bottom, translation, chiral_limit]
}

/// Ensemble reruns must be bit-identical for any thread count.
pub fn determinism_suite(cfg: &ValidationConfig) -> Vec<SuiteReport> {
    let mut report = SuiteReport::new("ensemble determinism", 0.0);
    let template = ProblemTemplate::new(6, EmitterParams::default(), UnitSystem::default(), ChiralityMode::Chiral);
    let grid: Vec<f64> = (0..25).map(|i| -120.0 + 10.0 * i as f64).collect();
    let spec = DisorderSpec::new(655.0 / 20.0, 0.1, cfg.seed).expect("valid spec");
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())
            .and_then(|pool| pool.install(|| run_ensemble(&spec, &template, &grid, 100).map_err(|e| e.to_string())))
    };
    match (run(1), run(1), run(4)) {
        (Ok(a), Ok(b), Ok(c)) => {
            report.record(if a == b { 0.0 } else { 1.0 }, || "serial rerun differs".into());
            report.record(if a == c { 0.0 } else { 1.0 }, || "parallel run differs from serial".into());
        }
        (a, b, c) => report.record_failure(format!("{:?} {:?} {:?}", a.err(), b.err(), c.err())),
    }
    vec![report]
}

/// Runs every suite against `solver`.
pub fn run_all(solver: &dyn Fn(&ScatterProblem) -> Result<TransportSolution>, cfg: &ValidationConfig) -> ValidationReport {
    let mut suites = flux_suite(solver, cfg);
    suites.extend(oracle_suite(solver, cfg));
    suites.extend(identity_suite(solver, cfg));
    suites.extend(determinism_suite(cfg));
    ValidationReport { seed: cfg.seed, suites }
}
