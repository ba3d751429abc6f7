//! Disorder averaging over many realizations.
//!
//! Realizations are the unit of parallel work. Each one is a pure function of
//! `(master_seed, realization_index)`, results are gathered in index order in
//! fixed-size chunks and folded sequentially, so the statistics are
//! bit-identical for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddi::{ddi_matrix, DdiMatrix};
use crate::disorder::{sample_chain, DisorderSpec};
use crate::error::{Error, Result};
use crate::observables::{localization_length, localization_length_conventional};
use crate::params::{ChiralityMode, EmitterChain, EmitterParams, UnitSystem};
use crate::scatter::{solve_transport, PhaseConvention, PortProbabilities, ScatterProblem};

/// Realizations folded per parallel batch. Part of the determinism contract.
const CHUNK: usize = 64;

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let d = value - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (value - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard error of the mean; undefined below two samples.
    pub fn stderr(&self) -> Option<f64> {
        (self.count > 1).then(|| (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt())
    }
}

/// Per-point mean and standard error of one observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub mean: Vec<f64>,
    /// `None` for a single realization.
    pub stderr: Option<Vec<f64>>,
    pub n_realizations: u64,
    pub master_seed: u64,
}

impl EnsembleStats {
    fn from_accumulators(acc: &[MeanAccumulator], master_seed: u64) -> Self {
        let n_realizations = acc.first().map_or(0, |a| a.count());
        EnsembleStats {
            mean: acc.iter().map(|a| a.mean()).collect(),
            stderr: acc.iter().map(|a| a.stderr()).collect(),
            n_realizations,
            master_seed,
        }
    }

    /// Standard error at point `i`, NaN when undefined.
    pub fn stderr_at(&self, i: usize) -> f64 {
        self.stderr.as_ref().map_or(f64::NAN, |s| s[i])
    }
}

/// Everything about a transport problem except the emitter positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemTemplate {
    pub n: usize,
    pub params: EmitterParams,
    pub units: UnitSystem,
    pub mode: ChiralityMode,
    pub phase: PhaseConvention,
}

impl ProblemTemplate {
    pub fn new(n: usize, params: EmitterParams, units: UnitSystem, mode: ChiralityMode) -> Self {
        ProblemTemplate {
            n,
            params,
            units,
            mode,
            phase: PhaseConvention::default(),
        }
    }

    /// Problem at `delta` for a realized chain.
    pub fn instantiate(&self, chain: EmitterChain, ddi: DdiMatrix, delta: f64) -> ScatterProblem {
        ScatterProblem {
            chain,
            ddi,
            delta,
            mode: self.mode,
            v_bottom: self.units.group_velocity,
            v_top: self.units.group_velocity,
            units: self.units,
            phase: self.phase,
        }
    }
}

/// Port statistics of a disorder ensemble on a detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortEnsemble {
    pub delta_grid: Vec<f64>,
    pub t_top: EnsembleStats,
    pub t_bottom: EnsembleStats,
    pub r_top: EnsembleStats,
    pub r_bottom: EnsembleStats,
    /// Mean of the per-realization routing efficiency; NaN where it is
    /// undefined (no transmitted flux).
    pub xi: EnsembleStats,
    /// Mean of `ln T_top`, for the conventional localization estimator.
    pub ln_t_top: EnsembleStats,
}

#[derive(Debug, Clone, PartialEq)]
struct Member {
    chain: EmitterChain,
    ddi: DdiMatrix,
}

/// A frozen set of disorder realizations that can be solved at any detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    spec: DisorderSpec,
    template: ProblemTemplate,
    members: Vec<Member>,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    ports: PortProbabilities,
    xi: f64,
}

impl Ensemble {
    pub fn sample(spec: &DisorderSpec, template: &ProblemTemplate, n_realizations: u64) -> Result<Self> {
        if n_realizations == 0 {
            return Err(Error::domain("n_realizations", "need at least one realization"));
        }
        spec.validate()?;
        template.units.validate()?;
        let members = (0..n_realizations)
            .into_par_iter()
            .map(|r| {
                let member = sample_chain(spec, template.n, template.params, r).and_then(|chain| {
                    let ddi = ddi_matrix(&chain, &template.units)?;
                    Ok(Member { chain, ddi })
                });
                member.map_err(|e| tagged(r, e))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble {
            spec: *spec,
            template: *template,
            members,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn spec(&self) -> &DisorderSpec {
        &self.spec
    }

    pub fn chains(&self) -> impl Iterator<Item = &EmitterChain> {
        self.members.iter().map(|m| &m.chain)
    }

    fn solve_member(&self, index: usize, delta_grid: &[f64]) -> Result<Vec<Sample>> {
        let m = &self.members[index];
        let mut problem = self.template.instantiate(m.chain.clone(), m.ddi.clone(), 0.0);
        delta_grid
            .iter()
            .map(|&delta| {
                problem.delta = delta;
                let ports = solve_transport(&problem)?.probabilities;
                let transmitted = ports.t_top + ports.t_bottom;
                let xi = if transmitted > 0.0 {
                    (ports.t_top - ports.t_bottom) / transmitted
                } else {
                    f64::NAN
                };
                Ok(Sample { ports, xi })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| tagged(index as u64, e))
    }

    /// Solves every realization on `delta_grid` and aggregates the port statistics.
    pub fn spectrum(&self, delta_grid: &[f64]) -> Result<PortEnsemble> {
        let points = delta_grid.len();
        let mut acc = vec![[MeanAccumulator::default(); 6]; points];
        let indices: Vec<usize> = (0..self.members.len()).collect();
        for chunk in indices.chunks(CHUNK) {
            let solved = chunk
                .par_iter()
                .map(|&r| self.solve_member(r, delta_grid))
                .collect::<Result<Vec<_>>>()?;
            for samples in &solved {
                for (a, s) in acc.iter_mut().zip(samples) {
                    a[0].push(s.ports.t_top);
                    a[1].push(s.ports.t_bottom);
                    a[2].push(s.ports.r_top);
                    a[3].push(s.ports.r_bottom);
                    a[4].push(s.xi);
                    a[5].push(s.ports.t_top.ln());
                }
            }
        }
        let seed = self.spec.master_seed;
        let column = |c: usize| {
            let col: Vec<MeanAccumulator> = acc.iter().map(|a| a[c]).collect();
            EnsembleStats::from_accumulators(&col, seed)
        };
        Ok(PortEnsemble {
            delta_grid: delta_grid.to_vec(),
            t_top: column(0),
            t_bottom: column(1),
            r_top: column(2),
            r_bottom: column(3),
            xi: column(4),
            ln_t_top: column(5),
        })
    }

    /// Ensemble-mean Port-4 probability at a single detuning.
    pub fn mean_t_top(&self, delta: f64) -> Result<f64> {
        Ok(self.spectrum(&[delta])?.t_top.mean[0])
    }
}

fn tagged(index: u64, e: Error) -> Error {
    match e {
        e @ Error::Realization { .. } => e,
        e => Error::Realization {
            index,
            source: Box::new(e),
        },
    }
}

/// Samples `n_realizations` chains from `spec`, rebuilds the dipole couplings
/// of each, solves the whole detuning grid and averages the probabilities.
pub fn run_ensemble(
    spec: &DisorderSpec,
    template: &ProblemTemplate,
    delta_grid: &[f64],
    n_realizations: u64,
) -> Result<PortEnsemble> {
    Ensemble::sample(spec, template, n_realizations)?.spectrum(delta_grid)
}

/// One `(N, σ)` cell of a localization sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationPoint {
    pub n: usize,
    pub sigma_fraction: f64,
    pub delta: f64,
    pub mean_t_top: f64,
    pub stderr_t_top: f64,
    /// `N / ⟨T_t⟩`; `None` when the mean transmission vanishes.
    pub length: Option<f64>,
    /// Propagated from the standard error of `⟨T_t⟩`.
    pub length_err: f64,
    /// `−2N / ⟨ln T_t⟩`, the conventional estimator.
    pub length_conventional: Option<f64>,
    pub n_realizations: u64,
}

/// Localization length versus disorder strength for several chain lengths,
/// each at its own detuning.
pub fn localization_sweep(
    spec: &DisorderSpec,
    template: &ProblemTemplate,
    sigma_grid: &[f64],
    n_and_delta: &[(usize, f64)],
    n_realizations: u64,
) -> Result<Vec<LocalizationPoint>> {
    if let Some(&bad) = sigma_grid.iter().find(|s| !(0.0..=0.25).contains(*s)) {
        return Err(Error::domain("sigma_grid", format!("{bad} is outside [0, 0.25]")));
    }
    let mut out = Vec::with_capacity(sigma_grid.len() * n_and_delta.len());
    for &(n, delta) in n_and_delta {
        let template = ProblemTemplate { n, ..*template };
        for &sigma in sigma_grid {
            let stats = run_ensemble(&spec.with_sigma(sigma), &template, &[delta], n_realizations)?;
            let mean = stats.t_top.mean[0];
            let se = stats.t_top.stderr_at(0);
            let length = localization_length(mean, n).ok();
            out.push(LocalizationPoint {
                n,
                sigma_fraction: sigma,
                delta,
                mean_t_top: mean,
                stderr_t_top: se,
                length,
                length_err: length.map_or(f64::NAN, |_| n as f64 * se / (mean * mean)),
                length_conventional: localization_length_conventional(stats.ln_t_top.mean[0], n).ok(),
                n_realizations,
            });
        }
    }
    Ok(out)
}
