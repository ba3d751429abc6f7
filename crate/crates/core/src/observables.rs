//! Quantities derived from transport solutions: routing efficiency, detuning
//! spectra, peak routing probability and localization length.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, ProblemTemplate};
use crate::error::{Error, Result};
use crate::params::{build_periodic_chain, ChiralityMode};
use crate::scatter::{solve_transport, PortProbabilities, ScatterProblem, TransportSolution};

/// Routing efficiency `(T_t − T_b)/(T_t + T_b)`.
pub fn routing_efficiency(solution: &TransportSolution) -> Result<f64> {
    efficiency_of(&solution.probabilities)
}

pub fn efficiency_of(ports: &PortProbabilities) -> Result<f64> {
    let sum = ports.t_top + ports.t_bottom;
    if sum > 0.0 {
        Ok((ports.t_top - ports.t_bottom) / sum)
    } else {
        Err(Error::UndefinedEfficiency)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub delta: f64,
    pub ports: PortProbabilities,
    /// `None` where no flux is transmitted.
    pub xi: Option<f64>,
}

/// Port probabilities of a fixed chain across a detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub n: usize,
    pub mode: ChiralityMode,
    pub rows: Vec<SpectrumRow>,
}

impl Spectrum {
    pub fn delta_grid(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.delta)
    }

    /// Row with the largest Port-4 probability.
    pub fn peak_top(&self) -> Option<&SpectrumRow> {
        self.rows.iter().max_by(|a, b| a.ports.t_top.total_cmp(&b.ports.t_top))
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("delta_grid", "grid is empty"));
    }
    if grid.iter().any(|d| !d.is_finite()) {
        return Err(Error::domain("delta_grid", "grid has non-finite entries"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("delta_grid", "grid must be strictly increasing"));
    }
    Ok(())
}

/// Solves `template` at every detuning of `delta_grid`. Points are solved
/// concurrently and returned in grid order.
pub fn spectrum(template: &ScatterProblem, delta_grid: &[f64]) -> Result<Spectrum> {
    check_grid(delta_grid)?;
    let rows = delta_grid
        .par_iter()
        .map(|&delta| {
            let ports = solve_transport(&template.with_delta(delta))?.probabilities;
            Ok(SpectrumRow {
                delta,
                ports,
                xi: efficiency_of(&ports).ok(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        n: template.chain.count(),
        mode: template.mode,
        rows,
    })
}

/// Evenly spaced grid from `lo` to `hi` inclusive with spacing close to `step`.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(hi > lo) || !(step > 0.0) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain("grid", format!("bad range [{lo}, {hi}] step {step}")));
    }
    let intervals = ((hi - lo) / step).round().max(1.0) as usize;
    Ok((0..=intervals)
        .map(|i| lo + (hi - lo) * i as f64 / intervals as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmaxResult {
    pub n: usize,
    pub p_max: f64,
    pub delta_max: f64,
    /// The best coarse sample sat on the edge of the scanned range, so the
    /// true maximum may lie outside it.
    pub on_boundary: bool,
}

/// Detuning resolution of the peak refinement, in `Γ0`.
pub const REFINE_TOLERANCE: f64 = 1e-3;

/// Maximizes `f` given its values on a coarse grid: golden-section search
/// inside the bracket around the best sample. Never returns less than the
/// best coarse value.
pub fn refine_peak(
    grid: &[f64],
    values: &[f64],
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64, bool)> {
    let (best, &best_val) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::domain("grid", "empty"))?;
    let on_boundary = best == 0 || best + 1 == grid.len();
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (mut x_best, mut f_best) = (grid[best], best_val);
    if hi > lo {
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        while b - a > REFINE_TOLERANCE {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = f(d)?;
            }
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v > f_best {
                x_best = x;
                f_best = v;
            }
        }
    }
    Ok((x_best, f_best, on_boundary))
}

/// Peak Port-4 probability of one fixed chain over `[lo, hi]`.
pub fn pmax_of(problem: &ScatterProblem, delta_range: (f64, f64), step: f64) -> Result<PmaxResult> {
    let grid = uniform_grid(delta_range.0, delta_range.1, step)?;
    let spec = spectrum(problem, &grid)?;
    let values: Vec<f64> = spec.rows.iter().map(|r| r.ports.t_top).collect();
    let (delta_max, p_max, on_boundary) = refine_peak(&grid, &values, |d| {
        Ok(solve_transport(&problem.with_delta(d))?.probabilities.t_top)
    })?;
    Ok(PmaxResult {
        n: problem.chain.count(),
        p_max,
        delta_max,
        on_boundary,
    })
}

/// Peak Port-4 probability of periodic chains of each length in `n_values`,
/// spaced by `spacing_nm`.
pub fn pmax_scan(
    n_values: &[usize],
    template: &ProblemTemplate,
    spacing_nm: f64,
    delta_range: (f64, f64),
    step: f64,
) -> Result<Vec<PmaxResult>> {
    n_values
        .iter()
        .map(|&n| {
            let chain = build_periodic_chain(n, spacing_nm, template.params)?;
            let ddi = crate::ddi::ddi_matrix(&chain, &template.units)?;
            let problem = ProblemTemplate { n, ..*template }.instantiate(chain, ddi, 0.0);
            pmax_of(&problem, delta_range, step)
        })
        .collect()
}

/// Peak of the ensemble-mean Port-4 probability.
pub fn ensemble_pmax(ensemble: &Ensemble, n: usize, delta_range: (f64, f64), step: f64) -> Result<PmaxResult> {
    let grid = uniform_grid(delta_range.0, delta_range.1, step)?;
    let stats = ensemble.spectrum(&grid)?;
    let (delta_max, p_max, on_boundary) = refine_peak(&grid, &stats.t_top.mean, |d| ensemble.mean_t_top(d))?;
    Ok(PmaxResult {
        n,
        p_max,
        delta_max,
        on_boundary,
    })
}

/// Finite-chain localization length `N / ⟨T_t⟩`, in emitter-count units.
pub fn localization_length(mean_t_top: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n", "need at least one emitter"));
    }
    if !(mean_t_top >= 0.0 && mean_t_top <= 1.0 + 1e-12) {
        return Err(Error::domain("mean_t_top", format!("{mean_t_top} is not a probability")));
    }
    if mean_t_top == 0.0 {
        return Err(Error::ZeroTransmission);
    }
    Ok(n as f64 / mean_t_top)
}

/// Conventional estimator `−2N / ⟨ln T_t⟩`.
pub fn localization_length_conventional(mean_ln_t_top: f64, n: usize) -> Result<f64> {
    if mean_ln_t_top == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if !(mean_ln_t_top < 0.0) {
        return Err(Error::domain(
            "mean_ln_t_top",
            format!("{mean_ln_t_top}: estimator needs ⟨ln T⟩ < 0"),
        ));
    }
    Ok(-2.0 * n as f64 / mean_ln_t_top)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
