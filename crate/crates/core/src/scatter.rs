//! Single-photon transport through the emitter ladder.
//!
//! The photon enters the bottom guide from the left. Between neighbouring
//! emitters each of the four channels (bottom/top, right/left-moving) is a
//! plane wave with its own coefficient; emitter `j` sits on the boundary
//! between segment `j` (to its left) and segment `j + 1`. Coefficients are
//! stored segment-indexed: entry `0` is the region left of the first emitter,
//! entry `N` the region right of the last.
//!
//! The field driving an emitter is the average of the coefficients on either
//! side of it. Substituting the jump conditions into the emitter equations
//! gives a dense `N × N` system for the emitter amplitudes whose diagonal is
//! `Δ + i(γ + Σ_c Γ_c)/2` and whose off-diagonals hold `−J_ij` plus the
//! guided exchange terms `iΓ_c e^{±ik(x_i − x_j)}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ddi::{ddi_matrix, DdiMatrix};
use crate::error::{Error, Result};
use crate::params::{ChiralityMode, EmitterChain, UnitSystem};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// How detuning and position combine into a propagation phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PhaseConvention {
    /// `k x = phase_scale · Δ Γ0 x / v_g` in SI units, with positions in nm
    /// and velocities in m/s.
    Physical { phase_scale: f64 },
    /// `k x = Δ x / v`: positions and velocities are plain numbers, so a
    /// two-emitter chain at `[0, r]` with `v = 1` carries phase `rΔ`.
    Dimensionless,
}

impl Default for PhaseConvention {
    fn default() -> Self {
        PhaseConvention::Physical { phase_scale: 1.0 }
    }
}

/// One fully specified transport instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterProblem {
    pub chain: EmitterChain,
    pub ddi: DdiMatrix,
    /// Detuning `Δ = ω − ω_eg` in `Γ0`.
    pub delta: f64,
    pub mode: ChiralityMode,
    pub v_bottom: f64,
    pub v_top: f64,
    pub units: UnitSystem,
    pub phase: PhaseConvention,
}

impl ScatterProblem {
    /// Problem with dipole couplings computed from the chain geometry, both
    /// guides at the unit system's group velocity and physical phases.
    pub fn new(chain: EmitterChain, units: UnitSystem, delta: f64, mode: ChiralityMode) -> Result<Self> {
        units.validate()?;
        let ddi = ddi_matrix(&chain, &units)?;
        Ok(ScatterProblem {
            chain,
            ddi,
            delta,
            mode,
            v_bottom: units.group_velocity,
            v_top: units.group_velocity,
            units,
            phase: PhaseConvention::default(),
        })
    }

    /// Problem in the dimensionless-phase convention (`v = 1`) with an
    /// explicit coupling matrix.
    pub fn dimensionless(chain: EmitterChain, ddi: DdiMatrix, delta: f64, mode: ChiralityMode) -> Self {
        ScatterProblem {
            chain,
            ddi,
            delta,
            mode,
            v_bottom: 1.0,
            v_top: 1.0,
            units: UnitSystem::default(),
            phase: PhaseConvention::Dimensionless,
        }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        ScatterProblem { delta, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ddi.n() != self.chain.count() {
            return Err(Error::domain(
                "ddi",
                format!("{}×{} matrix for {} emitters", self.ddi.n(), self.ddi.n(), self.chain.count()),
            ));
        }
        for (name, v) in [("v_bottom", self.v_bottom), ("v_top", self.v_top)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(name, format!("{v} must be positive")));
            }
        }
        if !self.delta.is_finite() {
            return Err(Error::domain("delta", "detuning must be finite"));
        }
        if let PhaseConvention::Physical { phase_scale } = self.phase {
            if !phase_scale.is_finite() {
                return Err(Error::domain("phase_scale", "must be finite"));
            }
        }
        self.chain.params.validate()
    }

    /// Wavenumbers `(k, m)` for the bottom and top guide, per unit position.
    pub fn wavenumbers(&self) -> (f64, f64) {
        match self.phase {
            PhaseConvention::Physical { phase_scale } => (
                phase_scale * self.delta * self.units.phase_per_detuning_nm(self.v_bottom),
                phase_scale * self.delta * self.units.phase_per_detuning_nm(self.v_top),
            ),
            PhaseConvention::Dimensionless => (self.delta / self.v_bottom, self.delta / self.v_top),
        }
    }

    /// Channel rates `(bottom-right, bottom-left, top-right, top-left)` in
    /// `Γ0`; left-moving rates vanish in chiral mode.
    pub fn channel_rates(&self) -> ChannelRates {
        let p = &self.chain.params;
        let (bl, tl) = match self.mode {
            ChiralityMode::Chiral => (0.0, 0.0),
            ChiralityMode::Bidirectional => (p.big_gamma_bottom_left, p.big_gamma_top_left),
        };
        ChannelRates {
            bottom_right: p.big_gamma_bottom,
            bottom_left: bl,
            top_right: p.big_gamma_top,
            top_left: tl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRates {
    pub bottom_right: f64,
    pub bottom_left: f64,
    pub top_right: f64,
    pub top_left: f64,
}

impl ChannelRates {
    pub fn total(&self) -> f64 {
        self.bottom_right + self.bottom_left + self.top_right + self.top_left
    }
}

/// Port detection probabilities. Top-guide values are flux-weighted by
/// `v_top / v_bottom`, which is the identity for equal group velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PortProbabilities {
    /// Port 4.
    pub t_top: f64,
    /// Port 2.
    pub t_bottom: f64,
    pub r_top: f64,
    /// Port 1.
    pub r_bottom: f64,
}

impl PortProbabilities {
    pub fn total(&self) -> f64 {
        self.t_top + self.t_bottom + self.r_top + self.r_bottom
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSolution {
    /// Emitter excitation amplitudes `A_j`.
    pub amplitudes: Vec<Complex64>,
    /// Segment-indexed right-moving coefficients; `t_bottom[0] = 1`, `t_top[0] = 0`.
    pub t_bottom: Vec<Complex64>,
    pub t_top: Vec<Complex64>,
    /// Segment-indexed left-moving coefficients; the last entry is 0 and the
    /// first is the reflected amplitude.
    pub r_bottom: Vec<Complex64>,
    pub r_top: Vec<Complex64>,
    pub probabilities: PortProbabilities,
    /// Probability lost to non-guided emission.
    pub loss: f64,
}

/// Solves the transport equations for one detuning.
pub fn solve_transport(problem: &ScatterProblem) -> Result<TransportSolution> {
    problem.validate()?;
    let n = problem.chain.count();
    let x = problem.chain.positions_nm();
    let (k, m) = problem.wavenumbers();
    let rates = problem.channel_rates();
    let gamma = problem.chain.params.gamma;

    let phase_b: Vec<Complex64> = x.iter().map(|&xj| Complex64::cis(k * xj)).collect();
    let phase_t: Vec<Complex64> = x.iter().map(|&yj| Complex64::cis(m * yj)).collect();

    let diagonal = Complex64::new(problem.delta, 0.5 * (gamma + rates.total()));
    let mut system = DMatrix::<Complex64>::zeros(n, n);
    for row in 0..n {
        let couplings = problem.ddi.row(row);
        for col in 0..n {
            system[(row, col)] = if row == col {
                diagonal
            } else if col < row {
                // right-movers emitted upstream reach `row`
                -couplings[col]
                    + I * (rates.bottom_right * phase_b[row] * phase_b[col].conj()
                        + rates.top_right * phase_t[row] * phase_t[col].conj())
            } else {
                -couplings[col]
                    + I * (rates.bottom_left * phase_b[col] * phase_b[row].conj()
                        + rates.top_left * phase_t[col] * phase_t[row].conj())
            };
        }
    }
    // amplitudes are solved in units of sqrt(v_bottom)
    let drive = rates.bottom_right.sqrt();
    let rhs = DVector::from_iterator(n, phase_b.iter().map(|p| drive * p));
    let scaled = solve_dense(system, rhs, problem.delta)?;

    let sqrt_vb = problem.v_bottom.sqrt();
    let amplitudes: Vec<Complex64> = scaled.iter().map(|a| a * sqrt_vb).collect();

    // (V/v)·A for each channel, expressed through the scaled amplitudes
    let top_factor = (problem.v_bottom / problem.v_top).sqrt();
    let c_br = rates.bottom_right.sqrt();
    let c_bl = rates.bottom_left.sqrt();
    let c_tr = rates.top_right.sqrt() * top_factor;
    let c_tl = rates.top_left.sqrt() * top_factor;

    let zero = Complex64::new(0.0, 0.0);
    let mut t_bottom = vec![zero; n + 1];
    let mut t_top = vec![zero; n + 1];
    let mut r_bottom = vec![zero; n + 1];
    let mut r_top = vec![zero; n + 1];
    t_bottom[0] = Complex64::new(1.0, 0.0);
    for j in 0..n {
        t_bottom[j + 1] = t_bottom[j] - I * c_br * scaled[j] * phase_b[j].conj();
        t_top[j + 1] = t_top[j] - I * c_tr * scaled[j] * phase_t[j].conj();
    }
    if problem.mode == ChiralityMode::Bidirectional {
        for j in (0..n).rev() {
            r_bottom[j] = r_bottom[j + 1] - I * c_bl * scaled[j] * phase_b[j];
            r_top[j] = r_top[j + 1] - I * c_tl * scaled[j] * phase_t[j];
        }
    }

    let flux_top = problem.v_top / problem.v_bottom;
    let probabilities = PortProbabilities {
        t_top: flux_top * t_top[n].norm_sqr(),
        t_bottom: t_bottom[n].norm_sqr(),
        r_top: flux_top * r_top[0].norm_sqr(),
        r_bottom: r_bottom[0].norm_sqr(),
    };
    Ok(TransportSolution {
        amplitudes,
        t_bottom,
        t_top,
        r_bottom,
        r_top,
        loss: 1.0 - probabilities.total(),
        probabilities,
    })
}

/// Relative pivot size below which the system is treated as singular.
const SINGULAR_PIVOT: f64 = 1e-13;

fn solve_dense(system: DMatrix<Complex64>, rhs: DVector<Complex64>, delta: f64) -> Result<DVector<Complex64>> {
    let scale = system.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Singular { delta });
    }
    let lu = system.lu();
    let smallest_pivot = lu.u().diagonal().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if smallest_pivot <= SINGULAR_PIVOT * scale {
        return Err(Error::Singular { delta });
    }
    let solution = lu.solve(&rhs).ok_or(Error::Singular { delta })?;
    if solution.iter().any(|z| !z.is_finite()) {
        return Err(Error::Singular { delta });
    }
    Ok(solution)
}

/// The four channel fields at one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub x: f64,
    pub bottom_right: Complex64,
    pub bottom_left: Complex64,
    pub top_right: Complex64,
    pub top_left: Complex64,
}

/// Evaluates the piecewise plane-wave fields on `grid`. At an emitter
/// position the two adjacent segments are averaged.
pub fn field_profile(problem: &ScatterProblem, solution: &TransportSolution, grid: &[f64]) -> Vec<FieldSample> {
    let x = problem.chain.positions_nm();
    let (k, m) = problem.wavenumbers();
    let at_segment = |s: usize, pos: f64| {
        let eb = Complex64::cis(k * pos);
        let et = Complex64::cis(m * pos);
        [
            solution.t_bottom[s] * eb,
            solution.r_bottom[s] * eb.conj(),
            solution.t_top[s] * et,
            solution.r_top[s] * et.conj(),
        ]
    };
    grid.iter()
        .map(|&pos| {
            let seg = x.partition_point(|&xe| xe < pos);
            let f = if x.get(seg) == Some(&pos) {
                let (l, r) = (at_segment(seg, pos), at_segment(seg + 1, pos));
                [0, 1, 2, 3].map(|c| 0.5 * (l[c] + r[c]))
            } else {
                at_segment(seg, pos)
            };
            FieldSample {
                x: pos,
                bottom_right: f[0],
                bottom_left: f[1],
                top_right: f[2],
                top_left: f[3],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::params::{build_periodic_chain, EmitterParams};

    fn chain(n: usize, gamma: f64, big_gamma: f64) -> EmitterChain {
        build_periodic_chain(n, 32.75, EmitterParams::symmetric(gamma, big_gamma)).unwrap()
    }

    /// Hand-derived single-emitter result for equal couplings:
    /// `t_t = −iΓ/(Δ + i(γ/2 + Γ))`.
    fn single_top(delta: f64, gamma: f64, big_gamma: f64) -> Complex64 {
        -I * big_gamma / Complex64::new(delta, gamma / 2.0 + big_gamma)
    }

    #[test]
    fn lossless_resonant_single_emitter_routes_fully() {
        let p = ScatterProblem::new(chain(1, 0.0, 11.03), UnitSystem::default(), 0.0, ChiralityMode::Chiral).unwrap();
        let s = solve_transport(&p).unwrap();
        assert_relative_eq!(s.probabilities.t_top, 1.0, epsilon = 1e-14);
        assert!(s.probabilities.t_bottom < 1e-28);
        assert_eq!(s.t_bottom[0], Complex64::new(1.0, 0.0));
        assert_eq!(s.t_top[0], Complex64::new(0.0, 0.0));
        assert!(s.r_bottom.iter().chain(&s.r_top).all(|r| *r == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn lossy_single_emitter_matches_hand_result() {
        for &delta in &[-40.0, -3.0, 0.0, 0.7, 25.0] {
            let p = ScatterProblem::new(chain(1, 6.86, 11.03), UnitSystem::default(), delta, ChiralityMode::Chiral)
                .unwrap();
            let s = solve_transport(&p).unwrap();
            let expect = single_top(delta, 6.86, 11.03);
            assert!((s.t_top[1] - expect).norm() < 1e-13);
        }
        let p = ScatterProblem::new(chain(1, 6.86, 11.03), UnitSystem::default(), 0.0, ChiralityMode::Chiral).unwrap();
        let t = solve_transport(&p).unwrap().probabilities.t_top;
        assert_relative_eq!(t, (11.03f64 / (3.43 + 11.03)).powi(2), max_relative = 1e-13);
        assert!((t - 0.582).abs() < 5e-4);
    }

    #[test]
    fn decoupled_chain_is_transparent() {
        for mode in [ChiralityMode::Chiral, ChiralityMode::Bidirectional] {
            let p = ScatterProblem::new(chain(7, 2.0, 0.0), UnitSystem::default(), 13.0, mode).unwrap();
            let s = solve_transport(&p).unwrap();
            assert_eq!(s.t_bottom[7], Complex64::new(1.0, 0.0));
            assert!(s.t_top.iter().chain(&s.r_bottom).chain(&s.r_top).all(|c| c.norm() == 0.0));
            assert_eq!(s.loss, 0.0);
        }
    }

    #[test]
    fn exact_pole_is_an_error() {
        let p = ScatterProblem::new(chain(1, 0.0, 0.0), UnitSystem::default(), 0.0, ChiralityMode::Chiral).unwrap();
        assert!(matches!(solve_transport(&p), Err(Error::Singular { .. })));
        // two emitters, no waveguide, Δ on the symmetric DDI eigenvalue
        let c = chain(2, 0.0, 0.0);
        let j = ddi_matrix(&c, &UnitSystem::default()).unwrap().get(0, 1);
        let p = ScatterProblem::new(c, UnitSystem::default(), j, ChiralityMode::Chiral).unwrap();
        assert!(matches!(solve_transport(&p), Err(Error::Singular { .. })));
    }

    #[test]
    fn mismatched_ddi_rejected() {
        let mut p = ScatterProblem::new(chain(3, 1.0, 1.0), UnitSystem::default(), 0.0, ChiralityMode::Chiral).unwrap();
        p.ddi = DdiMatrix::zeros(2);
        assert!(matches!(solve_transport(&p), Err(Error::Domain { name: "ddi", .. })));
        p.ddi = DdiMatrix::zeros(3);
        p.v_top = 0.0;
        assert!(solve_transport(&p).is_err());
    }

    #[test]
    fn fields_free_propagation() {
        let p = ScatterProblem::dimensionless(chain(3, 1.0, 0.0), DdiMatrix::zeros(3), 0.4, ChiralityMode::Bidirectional);
        let s = solve_transport(&p).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| -40.0 + 4.0 * i as f64).collect();
        for f in field_profile(&p, &s, &grid) {
            assert!((f.bottom_right - Complex64::cis(0.4 * f.x)).norm() < 1e-14);
            assert_eq!(f.bottom_left.norm(), 0.0);
            assert_eq!(f.top_right.norm(), 0.0);
            assert_eq!(f.top_left.norm(), 0.0);
        }
    }

    #[test]
    fn fields_single_emitter_resonance() {
        let p = ScatterProblem::new(chain(1, 0.0, 11.03), UnitSystem::default(), 0.0, ChiralityMode::Chiral).unwrap();
        let s = solve_transport(&p).unwrap();
        let f = field_profile(&p, &s, &[-10.0, 0.0, 10.0, 30.0]);
        assert!((f[0].bottom_right.norm() - 1.0).abs() < 1e-14);
        assert!(f[0].top_right.norm() < 1e-14);
        // on the emitter: average of both sides
        assert!((f[1].bottom_right.norm() - 0.5).abs() < 1e-14);
        for right in &f[2..] {
            assert!((right.top_right.norm() - 1.0).abs() < 1e-14);
            assert!(right.bottom_right.norm() < 1e-14);
        }
        assert!(f.iter().all(|s| s.bottom_left.norm() == 0.0 && s.top_left.norm() == 0.0));
    }

    #[test]
    fn bidirectional_single_emitter_closed_form() {
        // all four channels at rate Γ: total width γ/2 + 2Γ, t_b = 1 − iΓ/(Δ+i(γ/2+2Γ)), r_b = −iΓ/(...)
        let (delta, gamma, g) = (1.7, 0.9, 2.3);
        let p = ScatterProblem::dimensionless(chain(1, gamma, g), DdiMatrix::zeros(1), delta, ChiralityMode::Bidirectional);
        let s = solve_transport(&p).unwrap();
        let den = Complex64::new(delta, gamma / 2.0 + 2.0 * g);
        assert!((s.t_bottom[1] - (1.0 - I * g / den)).norm() < 1e-14);
        assert!((s.r_bottom[0] - (-I * g / den)).norm() < 1e-14);
        assert!((s.t_top[1] - (-I * g / den)).norm() < 1e-14);
        assert!((s.r_top[0] - (-I * g / den)).norm() < 1e-14);
        assert_eq!(s.r_bottom[1], Complex64::new(0.0, 0.0));
    }
}
