//! Benchmark fixtures shared by the criterion targets.

use wqed_core::ensemble::ProblemTemplate;
use wqed_core::{build_periodic_chain, ChiralityMode, EmitterParams, ScatterProblem, UnitSystem};

pub fn template(n: usize) -> ProblemTemplate {
    ProblemTemplate::new(n, EmitterParams::default(), UnitSystem::default(), ChiralityMode::Chiral)
}

/// Periodic chain at `λe/20` spacing, detuned to `delta`.
pub fn periodic_problem(n: usize, delta: f64) -> ScatterProblem {
    let units = UnitSystem::default();
    let chain = build_periodic_chain(n, units.lambda_e_nm / 20.0, EmitterParams::default()).expect("valid chain");
    ScatterProblem::new(chain, units, delta, ChiralityMode::Chiral).expect("valid problem")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_solve() {
        for n in [1, 2, 20] {
            let sol = wqed_core::solve_transport(&periodic_problem(n, 25.0)).unwrap();
            assert!(sol.probabilities.total() <= 1.0 + 1e-12);
        }
        assert_eq!(template(4).n, 4);
    }
}
