//! One function per subcommand. Each writes its outputs through the run
//! context, which collects paths and warnings for the manifest.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use wqed_core::disorder::mean_ddi_curve;
use wqed_core::ensemble::{localization_sweep, Ensemble};
use wqed_core::observables::{ensemble_pmax, pmax_scan, spectrum, uniform_grid};
use wqed_core::validate::{run_all, ValidationConfig, ValidationReport};
use wqed_core::{
    build_periodic_chain, ddi_matrix, run_ensemble, DisorderSpec, Result as CoreResult, ScatterProblem,
    TransportSolution,
};

use crate::config::Config;
use crate::output::{cell, write_json, CsvOut};
use crate::CliError;

pub struct RunContext {
    pub out_dir: PathBuf,
    pub config: Config,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl RunContext {
    pub fn new(out_dir: PathBuf, config: Config) -> Self {
        RunContext {
            out_dir,
            config,
            outputs: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn path(&mut self, name: &Path) -> PathBuf {
        let p = self.out_dir.join(name);
        self.outputs.push(p.clone());
        p
    }

    fn warn(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }

    fn seed_meta(&self, sigma: f64) -> Vec<(&'static str, String)> {
        let realizations = if sigma > 0.0 { self.config.run.realizations } else { 1 };
        vec![
            ("master_seed", self.config.run.seed.to_string()),
            ("n_realizations", realizations.to_string()),
            ("sigma_fraction", sigma.to_string()),
        ]
    }
}

fn check_sigma(sigma: f64) -> Result<(), CliError> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("sigma must be a non-negative fraction, got {sigma}")))
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, CliError> {
    uniform_grid(lo, hi, step).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DdiCurveArgs {
    /// Disorder width as a fraction of the separation.
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 10.0)]
    pub l_min: f64,
    #[arg(long, default_value_t = 160.0)]
    pub l_max: f64,
    #[arg(long, default_value_t = 0.25)]
    pub l_step: f64,
    #[arg(long, short, default_value = "ddi_curve.csv")]
    pub output: PathBuf,
}

/// Coupling versus separation, periodic and disorder-averaged.
pub fn ddi_curve(args: &DdiCurveArgs, ctx: &mut RunContext) -> Result<(), CliError> {
    check_sigma(args.sigma)?;
    let l_grid = grid(args.l_min, args.l_max, args.l_step)?;
    let cfg = ctx.config;
    let spec = DisorderSpec::new(args.l_min, args.sigma, cfg.run.seed)?;
    let curve = mean_ddi_curve(&spec, &l_grid, cfg.run.realizations, cfg.emitter.theta_dipole, &cfg.units)?;
    let mut meta = ctx.seed_meta(args.sigma);
    meta[1].1 = cfg.run.realizations.to_string();
    meta.push(("theta_dipole", cfg.emitter.theta_dipole.to_string()));
    let path = ctx.path(&args.output);
    let mut out = CsvOut::create(
        &path,
        "wqed.ddi-curve/1",
        &meta,
        &["L_nm", "kL_over_pi", "J_periodic", "J_disordered_mean", "J_disordered_stderr"],
    )?;
    for (i, &l) in curve.l_nm.iter().enumerate() {
        out.row(&[
            cell(Some(l)),
            cell(Some(2.0 * l / cfg.units.lambda_e_nm)),
            cell(Some(curve.j_periodic[i])),
            cell(Some(curve.j_mean[i])),
            cell(curve.j_stderr.as_ref().map(|s| s[i])),
        ])?;
    }
    out.finish()
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    /// Number of emitters.
    #[arg(long, short, default_value_t = 2)]
    pub n: usize,
    /// Disorder width as a fraction of the spacing; 0 for a periodic chain.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Mean spacing in nm (default λe/20).
    #[arg(long)]
    pub spacing_nm: Option<f64>,
    #[arg(long, default_value_t = -300.0, allow_hyphen_values = true)]
    pub delta_min: f64,
    #[arg(long, default_value_t = 300.0, allow_hyphen_values = true)]
    pub delta_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta_step: f64,
    #[arg(long, short, default_value = "spectrum.csv")]
    pub output: PathBuf,
}

/// Port probabilities versus detuning for one chain length.
pub fn spectrum_cmd(args: &SpectrumArgs, ctx: &mut RunContext) -> Result<(), CliError> {
    check_sigma(args.sigma)?;
    let cfg = ctx.config;
    let spacing = args.spacing_nm.unwrap_or(cfg.spacing_nm());
    let deltas = grid(args.delta_min, args.delta_max, args.delta_step)?;
    let template = cfg.template(args.n);
    let mut meta = ctx.seed_meta(args.sigma);
    meta.push(("N", args.n.to_string()));
    meta.push(("spacing_nm", spacing.to_string()));
    let columns = ["delta", "P2", "P4", "xi", "stderr"];
    let path = ctx.path(&args.output);
    if args.sigma == 0.0 {
        let chain = build_periodic_chain(args.n, spacing, cfg.emitter)?;
        let ddi = ddi_matrix(&chain, &cfg.units)?;
        let spec = spectrum(&template.instantiate(chain, ddi, 0.0), &deltas)?;
        let mut out = CsvOut::create(&path, "wqed.spectrum/1", &meta, &columns)?;
        for r in &spec.rows {
            out.row(&[
                cell(Some(r.delta)),
                cell(Some(r.ports.t_bottom)),
                cell(Some(r.ports.t_top)),
                cell(r.xi),
                String::new(),
            ])?;
        }
        out.finish()
    } else {
        let spec = DisorderSpec::new(spacing, args.sigma, cfg.run.seed)?;
        let stats = run_ensemble(&spec, &template, &deltas, cfg.run.realizations)?;
        let mut out = CsvOut::create(&path, "wqed.spectrum/1", &meta, &columns)?;
        for (i, &d) in deltas.iter().enumerate() {
            out.row(&[
                cell(Some(d)),
                cell(Some(stats.t_bottom.mean[i])),
                cell(Some(stats.t_top.mean[i])),
                cell(Some(stats.xi.mean[i])),
                cell(stats.t_top.stderr.as_ref().map(|s| s[i])),
            ])?;
        }
        out.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PmaxArgs {
    /// Chain lengths, comma separated (default 1..=20).
    #[arg(long, short, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long)]
    pub spacing_nm: Option<f64>,
    #[arg(long, default_value_t = -100.0, allow_hyphen_values = true)]
    pub delta_min: f64,
    #[arg(long, default_value_t = 300.0, allow_hyphen_values = true)]
    pub delta_max: f64,
    /// Coarse grid step before golden-section refinement.
    #[arg(long, default_value_t = 0.1)]
    pub delta_step: f64,
    #[arg(long, short, default_value = "pmax.csv")]
    pub output: PathBuf,
}

/// Peak Port-4 probability and its detuning for each chain length.
pub fn pmax(args: &PmaxArgs, ctx: &mut RunContext) -> Result<(), CliError> {
    check_sigma(args.sigma)?;
    let cfg = ctx.config;
    let spacing = args.spacing_nm.unwrap_or(cfg.spacing_nm());
    let ns: Vec<usize> = if args.n.is_empty() { (1..=20).collect() } else { args.n.clone() };
    let range = (args.delta_min, args.delta_max);
    grid(args.delta_min, args.delta_max, args.delta_step)?;
    let results = if args.sigma == 0.0 {
        pmax_scan(&ns, &cfg.template(1), spacing, range, args.delta_step)?
    } else {
        let spec = DisorderSpec::new(spacing, args.sigma, cfg.run.seed)?;
        ns.iter()
            .map(|&n| {
                let ens = Ensemble::sample(&spec, &cfg.template(n), cfg.run.realizations)?;
                ensemble_pmax(&ens, n, range, args.delta_step)
            })
            .collect::<CoreResult<Vec<_>>>()?
    };
    for r in results.iter().filter(|r| r.on_boundary) {
        ctx.warn(format!("N={}: peak sits on the edge of the detuning range", r.n));
    }
    let mut meta = ctx.seed_meta(args.sigma);
    meta.push(("spacing_nm", spacing.to_string()));
    let path = ctx.path(&args.output);
    let mut out = CsvOut::create(&path, "wqed.pmax/1", &meta, &["N", "p_max", "delta_max", "boundary_flag"])?;
    for r in &results {
        out.row(&[
            r.n.to_string(),
            cell(Some(r.p_max)),
            cell(Some(r.delta_max)),
            u8::from(r.on_boundary).to_string(),
        ])?;
    }
    out.finish()
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EfficiencyMapArgs {
    #[arg(long, short, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = -200.0, allow_hyphen_values = true)]
    pub delta_min: f64,
    #[arg(long, default_value_t = 200.0, allow_hyphen_values = true)]
    pub delta_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta_step: f64,
    /// Separation range in units of λe.
    #[arg(long, default_value_t = 0.01)]
    pub l_min: f64,
    #[arg(long, default_value_t = 0.23)]
    pub l_max: f64,
    #[arg(long, default_value_t = 0.005)]
    pub l_step: f64,
    #[arg(long, short, default_value = "efficiency_map.csv")]
    pub output: PathBuf,
}

/// Routing efficiency over a detuning × separation grid, in long format.
pub fn efficiency_map(args: &EfficiencyMapArgs, ctx: &mut RunContext) -> Result<(), CliError> {
    check_sigma(args.sigma)?;
    let cfg = ctx.config;
    let deltas = grid(args.delta_min, args.delta_max, args.delta_step)?;
    let ls = grid(args.l_min, args.l_max, args.l_step)?;
    let template = cfg.template(args.n);
    let lambda = cfg.units.lambda_e_nm;

    // rows: (delta, L/λ, mean, stderr)
    let mut rows = Vec::with_capacity(deltas.len() * ls.len());
    for &l in &ls {
        if args.sigma == 0.0 {
            let chain = build_periodic_chain(args.n, l * lambda, cfg.emitter)?;
            let ddi = ddi_matrix(&chain, &cfg.units)?;
            let spec = spectrum(&template.instantiate(chain, ddi, 0.0), &deltas)?;
            rows.extend(spec.rows.iter().map(|r| (r.delta, l, r.xi, None)));
        } else {
            let spec = DisorderSpec::new(l * lambda, args.sigma, cfg.run.seed)?;
            let stats = run_ensemble(&spec, &template, &deltas, cfg.run.realizations)?;
            rows.extend(deltas.iter().enumerate().map(|(i, &d)| {
                let m = stats.xi.mean[i];
                (d, l, m.is_finite().then_some(m), stats.xi.stderr.as_ref().map(|s| s[i]))
            }));
        }
    }

    let no_top = cfg.emitter.big_gamma_top == 0.0 && cfg.emitter.big_gamma_top_left == 0.0;
    if no_top {
        ctx.warn("top-guide coupling is zero: no flux can be routed, rows flagged no_top_coupling".into());
    }
    let undefined = rows.iter().filter(|r| r.2.is_none()).count();
    if undefined > 0 {
        ctx.warn(format!("{undefined} rows have undefined efficiency (no transmitted flux)"));
    }

    let mut meta = ctx.seed_meta(args.sigma);
    meta.push(("N", args.n.to_string()));
    let path = ctx.path(&args.output);
    let mut out = CsvOut::create(
        &path,
        "wqed.efficiency-map/1",
        &meta,
        &["delta", "L_over_lambda", "xi_mean", "xi_stderr", "flag"],
    )?;
    for (d, l, xi, se) in rows {
        let flag = match (xi, no_top) {
            (None, _) => "undefined_efficiency",
            (Some(_), true) => "no_top_coupling",
            _ => "",
        };
        out.row(&[cell(Some(d)), cell(Some(l)), cell(xi), cell(se), flag.to_string()])?;
    }
    out.finish()
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LocalizationArgs {
    /// Disorder widths as fractions of the spacing, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = default_sigmas())]
    pub sigma: Vec<f64>,
    /// `N:Δ` pairs, comma separated.
    #[arg(long = "case", value_delimiter = ',', value_parser = parse_case,
          default_values_t = default_cases())]
    pub cases: Vec<Case>,
    #[arg(long)]
    pub spacing_nm: Option<f64>,
    /// Add the conventional estimator `−2N/⟨ln T⟩` as an extra column.
    #[arg(long)]
    pub conventional: bool,
    #[arg(long, short, default_value = "localization.csv")]
    pub output: PathBuf,
}

fn default_cases() -> Vec<Case> {
    [(2, 30.0), (5, 80.0), (10, 150.0), (20, 200.0)].map(Case::from).to_vec()
}

fn default_sigmas() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 40.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub n: usize,
    pub delta: f64,
}

impl From<(usize, f64)> for Case {
    fn from((n, delta): (usize, f64)) -> Self {
        Case { n, delta }
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.n, self.delta)
    }
}

fn parse_case(s: &str) -> Result<Case, String> {
    let (n, d) = s.split_once(':').ok_or_else(|| format!("expected N:delta, got `{s}`"))?;
    Ok(Case {
        n: n.trim().parse().map_err(|e| format!("bad N in `{s}`: {e}"))?,
        delta: d.trim().parse().map_err(|e| format!("bad delta in `{s}`: {e}"))?,
    })
}

/// Localization length versus disorder strength.
pub fn localization(args: &LocalizationArgs, ctx: &mut RunContext) -> Result<(), CliError> {
    if args.sigma.iter().any(|&s| !(s > 0.0 && s <= 0.25)) {
        return Err(CliError::Usage("sigma values must lie in (0, 0.25]".into()));
    }
    let cfg = ctx.config;
    let spacing = args.spacing_nm.unwrap_or(cfg.spacing_nm());
    let spec = DisorderSpec::new(spacing, 0.0, cfg.run.seed)?;
    let cases: Vec<(usize, f64)> = args.cases.iter().map(|c| (c.n, c.delta)).collect();
    let points = localization_sweep(&spec, &cfg.template(1), &args.sigma, &cases, cfg.run.realizations)?;
    if points.iter().any(|p| p.length.is_none()) {
        ctx.warn("zero mean transmission in some cells: length reported as inf".into());
    }

    let meta = vec![
        ("master_seed", cfg.run.seed.to_string()),
        ("n_realizations", cfg.run.realizations.to_string()),
        ("spacing_nm", spacing.to_string()),
        ("estimator", "L = N / <T_top>".to_string()),
    ];
    let mut columns = vec!["N", "delta", "sigma_fraction", "mean_T_top", "stderr_T_top", "L", "L_err"];
    if args.conventional {
        columns.push("L_conventional");
    }
    let path = ctx.path(&args.output);
    let mut out = CsvOut::create(&path, "wqed.localization/1", &meta, &columns)?;
    for p in &points {
        let mut row = vec![
            p.n.to_string(),
            cell(Some(p.delta)),
            cell(Some(p.sigma_fraction)),
            cell(Some(p.mean_t_top)),
            cell(Some(p.stderr_t_top)),
            cell(Some(p.length.unwrap_or(f64::INFINITY))),
            cell(Some(p.length_err)),
        ];
        if args.conventional {
            row.push(cell(p.length_conventional));
        }
        out.row(&row)?;
    }
    out.finish()
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 1000)]
    pub flux_instances: usize,
    #[arg(long, default_value_t = 20)]
    pub oracle_tuples: usize,
    #[arg(long, default_value_t = 1000)]
    pub oracle_grid: usize,
    #[arg(long, default_value_t = 200)]
    pub identity_instances: usize,
    #[arg(long, short, default_value = "validation.json")]
    pub output: PathBuf,
}

#[derive(Serialize)]
struct ValidationFile<'a> {
    schema: &'static str,
    version: &'static str,
    passed: bool,
    #[serde(flatten)]
    report: &'a ValidationReport,
}

/// Runs the property suites against `solver` and writes the report.
pub fn validate_with(
    solver: &dyn Fn(&ScatterProblem) -> CoreResult<TransportSolution>,
    args: &ValidateArgs,
    ctx: &mut RunContext,
) -> Result<(), CliError> {
    let cfg = ValidationConfig {
        seed: ctx.config.run.seed,
        flux_instances: args.flux_instances,
        oracle_tuples: args.oracle_tuples,
        oracle_grid: args.oracle_grid,
        identity_instances: args.identity_instances,
    };
    let report = run_all(solver, &cfg);
    for s in &report.suites {
        println!(
            "{:4} {:<48} {:>6} cases {:>5} failed  max error {:.3e} (tol {:.0e})",
            if s.passed() { "ok" } else { "FAIL" },
            s.name,
            s.cases,
            s.failures,
            s.max_error,
            s.tolerance
        );
        for ex in &s.examples {
            println!("       {ex}");
        }
    }
    let path = ctx.path(&args.output);
    write_json(
        &path,
        &ValidationFile {
            schema: "wqed.validation/1",
            version: crate::output::VERSION,
            passed: report.passed(),
            report: &report,
        },
    )?;
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.suites.iter().filter(|s| !s.passed()).map(|s| s.name.as_str()).collect();
        Err(CliError::Validation(failed.join(", ")))
    }
}

pub fn validate(args: &ValidateArgs, ctx: &mut RunContext) -> Result<(), CliError> {
    validate_with(&wqed_core::solve_transport, args, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases_parse() {
        assert_eq!(parse_case("10:150").unwrap(), Case { n: 10, delta: 150.0 });
        assert_eq!(parse_case(" 2 : -30.5").unwrap(), Case { n: 2, delta: -30.5 });
        assert!(parse_case("10").is_err());
        assert!(parse_case("x:1").is_err());
    }

    #[test]
    fn default_sigma_grid() {
        let s = default_sigmas();
        assert_eq!(s.len(), 10);
        assert_eq!(s[0], 0.025);
        assert_eq!(s[9], 0.25);
    }
}
