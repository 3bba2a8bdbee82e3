use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use twolocal::ensemble::{self, RealizationRun, SweepOptions};
use twolocal::localizer::{self, CouplingMatrixJ, Settings, Variant};
use twolocal::spectra::{self, SpectrumRecord};
use twolocal::spectral_stats;
use twolocal::stability;
use twolocal::sw::{self, SwSettings};
use twolocal::{BasisFlavor, EnsembleConfig, Generator, PauliString, Spectrum, StringBasis};

use crate::config;
use crate::output::{read_envelope, OutDir};
use crate::PartialFailure;

type Scalar = f64;

pub struct Context {
    pub seed: u64,
    pub out: PathBuf,
    pub file: Map<String, Value>,
    pub global_echo: Value,
}

impl Context {
    /// Merges command flags with the config file and opens the output
    /// directory with the combined echo.
    fn prepare<A: Serialize + for<'de> Deserialize<'de>>(&self, command: &str, args: &A) -> Result<(A, OutDir)> {
        let (merged, echo) = config::merge(args, &self.file)?;
        config::check_keys(&self.file, &[&echo, &self.global_echo])?;
        let mut full = self.global_echo.clone();
        if let (Value::Object(g), Value::Object(c)) = (&mut full, echo) {
            g.extend(c);
        }
        let out = OutDir::create(&self.out, command, full, self.seed)?;
        Ok((merged, out))
    }
}

fn parse_flavor(s: Option<&str>, default: BasisFlavor) -> Result<BasisFlavor> {
    Ok(match s {
        Some(s) => s.parse()?,
        None => default,
    })
}

fn parse_generator(s: Option<&str>) -> Result<Generator> {
    Ok(match s {
        Some(s) => s.parse()?,
        None => Generator::GoeDense,
    })
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GenSpectrumArgs {
    /// Qubit count.
    #[arg(long)]
    pub n: Option<u32>,
    /// Number of realizations.
    #[arg(long)]
    pub count: Option<usize>,
    /// `goe` (dense) or `tridiag`.
    #[arg(long)]
    pub generator: Option<String>,
    /// Multiplies every eigenvalue.
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Serialize)]
struct SpectrumRow {
    n: u32,
    realization: usize,
    stream: u64,
    mean: f64,
    mean_square: f64,
}

pub fn gen_spectrum(ctx: &Context, args: GenSpectrumArgs) -> Result<()> {
    let (a, out) = ctx.prepare("gen-spectrum", &args)?;
    let n = a.n.context("--n is required")?;
    let mut cfg = EnsembleConfig::new(n, a.count.unwrap_or(1), ctx.seed, parse_generator(a.generator.as_deref())?);
    cfg.scale = a.scale.unwrap_or(1.0);
    cfg.validate()?;
    let records: Vec<SpectrumRecord> = {
        use rayon::prelude::*;
        (0..cfg.n_realizations).into_par_iter().map(|i| SpectrumRecord::generate(&cfg, i)).collect::<Result<_, _>>()?
    };
    let mut rows = Vec::new();
    for r in records {
        let s: Spectrum<Scalar> = r.spectrum()?;
        rows.push(SpectrumRow { n, realization: r.realization, stream: r.stream, mean: s.mean(), mean_square: s.mean_square() });
        out.write_json(&format!("spectrum_n{n}_{:04}.json", r.realization), Some(r.stream), &r)?;
    }
    out.write_summary(&rows)?;
    println!("wrote {} spectra of dimension {}", rows.len(), 1usize << n);
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct LocalizeArgs {
    /// Qubit counts, e.g. `4,5,6` or `6-10`.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub count: Option<usize>,
    /// complex_2local, real_2local, z_only_2local, one_local_z, one_local_real.
    #[arg(long)]
    pub flavor: Option<String>,
    /// plain, low-rank or sparse.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Smoothing of the L1 penalty.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Extra random starts per target.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Skip remaining restarts once the cost is at or below this.
    #[arg(long)]
    pub accept_cost: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub gradient_tolerance: Option<f64>,
    #[arg(long)]
    pub generator: Option<String>,
}

#[derive(Serialize)]
struct LocalizeRow {
    n: u32,
    flavor: String,
    variant: String,
    n_ok: usize,
    n_failed: usize,
    mean_final_cost: f64,
    std_final_cost: f64,
    geometric_mean_cost: f64,
    max_final_cost: f64,
    mean_sparsity: f64,
}

#[derive(Serialize)]
struct RunError {
    realization: usize,
    stream: u64,
    error: String,
}

fn parse_variant(a: &LocalizeArgs) -> Result<Variant<Scalar>> {
    Ok(match a.variant.as_deref().unwrap_or("plain").replace('_', "-").as_str() {
        "plain" => Variant::Plain,
        "low-rank" | "lowrank" => Variant::LowRank { rank: a.rank.context("--rank is required for low-rank")? },
        "sparse" => Variant::Sparse { lambda: a.lambda.context("--lambda is required for sparse")? },
        other => bail!("unknown variant {other:?}"),
    })
}

pub fn localize(ctx: &Context, args: LocalizeArgs) -> Result<()> {
    let (a, out) = ctx.prepare("localize", &args)?;
    let ns = config::parse_n_list(a.n.as_deref().context("--n is required")?)?;
    let flavor = parse_flavor(a.flavor.as_deref(), BasisFlavor::Real2Local)?;
    let variant = parse_variant(&a)?;
    let mut settings = Settings::<Scalar> { max_iterations: a.max_iterations, ..Settings::default() };
    if let Some(t) = a.gradient_tolerance {
        settings.gradient_tolerance = t;
    }
    if let Some(e) = a.epsilon {
        settings.l1_epsilon = e;
    }
    let opts = SweepOptions::new(flavor)
        .with_variant(variant.clone())
        .with_settings(settings)
        .with_restarts(a.restarts.unwrap_or(0), a.accept_cost);
    let generator = parse_generator(a.generator.as_deref())?;
    let count = a.count.unwrap_or(1);
    // Validate every size before spending time on any of them.
    for &n in &ns {
        EnsembleConfig::new(n, count, ctx.seed, generator).validate()?;
        ensemble::sweep_basis(n, flavor, &variant)?;
    }
    let (mut rows, mut failed, mut total) = (Vec::new(), 0, 0);
    for n in ns {
        let cfg = EnsembleConfig::new(n, count, ctx.seed, generator);
        let runs = ensemble::localize_ensemble::<Scalar>(&cfg, &opts)?;
        for (i, r) in runs.iter().enumerate() {
            total += 1;
            let stream = cfg.stream(i);
            match r {
                Ok(run) => {
                    out.write_json(&format!("localize_n{n}_{i:04}.json"), Some(stream), run)?;
                }
                Err(e) => {
                    failed += 1;
                    log::error!("n={n} realization {i}: {e}");
                    let err = RunError { realization: i, stream, error: e.to_string() };
                    out.write_json(&format!("localize_n{n}_{i:04}.error.json"), Some(stream), &err)?;
                }
            }
        }
        if let Ok(s) = ensemble::summarize(&runs) {
            println!("n={n} {flavor} {variant}: mean cost {:.3e} (n={}, failed={})", s.mean, s.n, s.n_failed);
            rows.push(LocalizeRow {
                n,
                flavor: flavor.to_string(),
                variant: variant.to_string(),
                n_ok: s.n,
                n_failed: s.n_failed,
                mean_final_cost: s.mean,
                std_final_cost: s.std,
                geometric_mean_cost: s.geometric_mean,
                max_final_cost: s.max,
                mean_sparsity: s.mean_sparsity,
            });
        }
    }
    out.write_summary(&rows)?;
    if failed > 0 {
        return Err(PartialFailure { failed, total }.into());
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SwArgs {
    /// Built-in target instead of a GOE sample: `xxx`.
    #[arg(long)]
    pub demo: Option<String>,
    #[arg(long)]
    pub n: Option<u32>,
    /// GOE realization index under --seed.
    #[arg(long)]
    pub index: Option<usize>,
    #[arg(long)]
    pub flavor: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub residual_tol: Option<f64>,
    #[arg(long)]
    pub degeneracy_floor: Option<f64>,
    #[arg(long)]
    pub kick: Option<f64>,
}

#[derive(Serialize)]
struct SwReport<'a> {
    n_qubits: u32,
    flavor: BasisFlavor,
    settings: &'a SwSettings<Scalar>,
    converged: bool,
    stagnated: bool,
    fixed_point: bool,
    kicked: bool,
    iterations: usize,
    residual_norm: f64,
    max_spectral_drift: f64,
    max_unitarity_defect: f64,
    degenerate_pairs: usize,
    /// Spectral cost of the local part against the centered input spectrum.
    local_cost: f64,
    couplings: &'a [Scalar],
}

#[derive(Serialize)]
struct SwRow {
    n_qubits: u32,
    converged: bool,
    iterations: usize,
    residual_norm: f64,
    max_spectral_drift: f64,
    local_cost: f64,
}

pub fn sw(ctx: &Context, args: SwArgs) -> Result<()> {
    let (a, out) = ctx.prepare("sw", &args)?;
    let (h, n, stream) = match a.demo.as_deref() {
        Some("xxx") => (PauliString::parse(3, "X1*X2*X3")?.to_dense::<Scalar, Scalar>()?, 3, None),
        Some(other) => bail!("unknown demo {other:?}"),
        None => {
            let n = a.n.context("--n or --demo is required")?;
            let cfg = EnsembleConfig::new(n, a.index.unwrap_or(0) + 1, ctx.seed, Generator::GoeDense);
            let i = a.index.unwrap_or(0);
            (cfg.dense_matrix::<Scalar>(i)?, n, Some(cfg.stream(i)))
        }
    };
    let flavor = parse_flavor(a.flavor.as_deref(), BasisFlavor::Real2Local)?;
    let basis = StringBasis::enumerate(n, flavor)?;
    let mut settings = SwSettings::<Scalar> { seed: ctx.seed, ..SwSettings::default() };
    settings.alpha = a.alpha.unwrap_or(settings.alpha);
    settings.max_iters = a.max_iters.unwrap_or(settings.max_iters);
    settings.residual_tol = a.residual_tol.unwrap_or(settings.residual_tol);
    settings.degeneracy_floor = a.degeneracy_floor.unwrap_or(settings.degeneracy_floor);
    settings.kick = a.kick.unwrap_or(settings.kick);
    let o = sw::sw_localize::<Scalar, Scalar>(&h, &basis, &settings)?;
    let target = spectra::spectrum_of::<Scalar, Scalar>(h.as_ref())?.traceless();
    let trial = localizer::trial_spectrum(&basis, o.local.couplings(), false)?;
    let local_cost = localizer::cost(&target, &trial)?;
    let report = SwReport {
        n_qubits: n,
        flavor,
        settings: &settings,
        converged: o.converged,
        stagnated: o.stagnated,
        fixed_point: o.fixed_point,
        kicked: o.kicked,
        iterations: o.state.iteration,
        residual_norm: o.state.residual_norm,
        max_spectral_drift: o.max_spectral_drift,
        max_unitarity_defect: o.max_unitarity_defect,
        degenerate_pairs: o.total_degenerate_pairs,
        local_cost,
        couplings: o.local.couplings(),
    };
    out.write_json("sw.json", stream, &report)?;
    o.write_trace_csv(out.csv("sw_trace.csv")?)?;
    out.write_summary(&[SwRow {
        n_qubits: n,
        converged: o.converged,
        iterations: o.state.iteration,
        residual_norm: o.state.residual_norm,
        max_spectral_drift: o.max_spectral_drift,
        local_cost,
    }])?;
    println!(
        "sw: converged={} iterations={} residual={:.3e} local cost={:.3e}",
        o.converged, o.state.iteration, o.state.residual_norm, local_cost
    );
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct StabilityArgs {
    /// A `localize_*.json` result.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of eigenoperator curves to export.
    #[arg(long)]
    pub operators: Option<usize>,
    /// Highest polynomial degree for the variational estimates.
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub fit_degree: Option<usize>,
}

#[derive(Serialize)]
struct StabilityReport {
    input: String,
    n_qubits: u32,
    flavor: BasisFlavor,
    gradient_norm: f64,
    identity: bool,
    identity_deviation: f64,
    eigenvalues: Vec<f64>,
    polynomial_estimates: Vec<f64>,
    fit_residuals: Vec<f64>,
}

#[derive(Serialize)]
struct StabilityRow {
    n_qubits: u32,
    flavor: String,
    lambda_1: f64,
    lambda_2: f64,
    estimate_2: f64,
    identity: bool,
}

pub fn stability(ctx: &Context, args: StabilityArgs) -> Result<()> {
    let (a, out) = ctx.prepare("stability", &args)?;
    let input = a.input.context("--input is required")?;
    let env = read_envelope::<RealizationRun<Scalar>>(&input)?;
    let run = env.data;
    if !run.best.converged {
        log::warn!("{} did not converge; the metric is only approximate", input.display());
    }
    let h0 = run.best.hamiltonian()?;
    let metric = stability::metric_at_minimum(&h0, &run.target)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("result").to_string();
    let ops = stability::eigen_operators(&metric, &h0, a.operators.unwrap_or(4).min(metric.len()))?;
    let degree = a.fit_degree.unwrap_or(6);
    let mut fit_residuals = Vec::new();
    for op in &ops {
        op.write_csv(out.csv(&format!("{stem}_op{}.csv", op.k))?)?;
        fit_residuals.push(op.fit_residual(degree)?);
    }
    metric.write_spectrum_csv(out.csv(&format!("{stem}_metric.csv"))?)?;
    let k_max = a.k_max.unwrap_or(4);
    let estimates = stability::estimate_lambdas(&h0, k_max)?;
    let dev = metric.identity_deviation();
    let report = StabilityReport {
        input: input.display().to_string(),
        n_qubits: h0.n_qubits(),
        flavor: h0.basis().flavor(),
        gradient_norm: metric.gradient_norm,
        identity: dev < 1e-12,
        identity_deviation: dev,
        eigenvalues: metric.eigenvalues.clone(),
        polynomial_estimates: estimates.clone(),
        fit_residuals,
    };
    out.write_json(&format!("{stem}_stability.json"), Some(run.stream), &report)?;
    out.write_summary(&[StabilityRow {
        n_qubits: h0.n_qubits(),
        flavor: h0.basis().flavor().to_string(),
        lambda_1: metric.eigenvalues[0],
        lambda_2: metric.eigenvalues.get(1).copied().unwrap_or(f64::NAN),
        estimate_2: estimates.get(1).copied().unwrap_or(f64::NAN),
        identity: report.identity,
    }])?;
    println!("metric: lambda_1={:.12} identity={}", metric.eigenvalues[0], report.identity);
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SffArgs {
    /// Directory of stored spectra or localization results; without it a
    /// fresh ensemble is sampled.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
}

/// Spectra from every JSON file in `dir`: spectrum records as stored,
/// localization results as the spectrum of their couplings.
fn load_spectra(dir: &std::path::Path) -> Result<Vec<Spectrum<Scalar>>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("missing input directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.to_string_lossy().ends_with(".error.json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let env = read_envelope::<Value>(&p)?;
        if env.data.get("values").is_some() {
            let r: SpectrumRecord = serde_json::from_value(env.data).with_context(|| format!("corrupt spectrum {}", p.display()))?;
            out.push(r.spectrum()?);
        } else if env.data.get("best").is_some() {
            let r: RealizationRun<Scalar> =
                serde_json::from_value(env.data).with_context(|| format!("corrupt result {}", p.display()))?;
            out.push(localizer::trial_spectrum(&r.best.basis, &r.best.couplings, false)?);
        }
    }
    if out.is_empty() {
        bail!("no spectra found in {}", dir.display());
    }
    Ok(out)
}

#[derive(Serialize)]
struct SffReport<'a> {
    curve: &'a spectral_stats::SffCurve,
    ramp_onset: Option<f64>,
}

pub fn sff(ctx: &Context, args: SffArgs) -> Result<()> {
    let (a, out) = ctx.prepare("sff", &args)?;
    let spectra = match &a.input {
        Some(dir) => load_spectra(dir)?,
        None => {
            let n = a.n.context("--n or --input is required")?;
            let cfg = EnsembleConfig::new(n, a.count.unwrap_or(1), ctx.seed, parse_generator(a.generator.as_deref())?);
            cfg.realizations()?
        }
    };
    let times = spectral_stats::log_grid(
        a.t_min.unwrap_or(spectral_stats::DEFAULT_T_MIN),
        a.t_max.unwrap_or(spectral_stats::DEFAULT_T_MAX),
        a.points.unwrap_or(spectral_stats::DEFAULT_POINTS),
    )?;
    let curve = spectral_stats::sff(&spectra, &times)?;
    curve.write_csv(out.csv("sff.csv")?)?;
    out.write_json("sff.json", None, SffReport { curve: &curve, ramp_onset: curve.ramp_onset() })?;
    #[derive(Serialize)]
    struct Row {
        dimension: usize,
        n_realizations: usize,
        ramp_onset: Option<f64>,
    }
    out.write_summary(&[Row { dimension: curve.dimension, n_realizations: curve.n_realizations, ramp_onset: curve.ramp_onset() }])?;
    println!("sff over {} spectra of dimension {}", curve.n_realizations, curve.dimension);
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Lambda2Args {
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Also localize in real_2local and report the second metric
    /// eigenvalue there.
    #[arg(long)]
    pub exact: Option<bool>,
}

#[derive(Serialize, Deserialize)]
struct Lambda2Row {
    #[serde(rename = "N")]
    n: u32,
    seed: u64,
    stream: u64,
    lambda2_closed: f64,
    lambda2_bruteforce: f64,
    lambda2_exact_metric: Option<f64>,
    asymptote: f64,
    bound: f64,
}

pub fn lambda2(ctx: &Context, args: Lambda2Args) -> Result<()> {
    use rayon::prelude::*;
    let (a, out) = ctx.prepare("lambda2", &args)?;
    let ns = config::parse_n_list(a.n.as_deref().context("--n is required")?)?;
    let count = a.count.unwrap_or(1);
    let exact = a.exact.unwrap_or(false);
    let mut rows = Vec::new();
    for n in ns {
        let cfg = EnsembleConfig::new(n, count, ctx.seed, Generator::GoeDense);
        cfg.validate()?;
        let batch: Vec<Lambda2Row> = (0..count)
            .into_par_iter()
            .map(|i| -> Result<Lambda2Row> {
                let target = cfg.realization::<Scalar>(i)?;
                let stream = cfg.stream(i);
                let r = localizer::localize_diagonal(&target, None, Settings::default(), Some(stream))?;
                let j: CouplingMatrixJ<Scalar> = r.coupling_matrix()?;
                let closed = stability::lambda2_closed_form(&j)?;
                let brute = stability::lambda2_bruteforce(&j)?;
                let exact_metric = if exact {
                    let basis = StringBasis::enumerate(n, BasisFlavor::Real2Local)?;
                    let opts = SweepOptions::<Scalar>::new(BasisFlavor::Real2Local);
                    let (_, best) = ensemble::localize_target(target.clone(), basis, stream, &opts)?;
                    let m = stability::metric_at_minimum(&best.hamiltonian()?, &target)?;
                    m.eigenvalues.get(1).copied()
                } else {
                    None
                };
                Ok(Lambda2Row {
                    n,
                    seed: ctx.seed,
                    stream,
                    lambda2_closed: closed.value,
                    lambda2_bruteforce: brute,
                    lambda2_exact_metric: exact_metric,
                    asymptote: closed.asymptote,
                    bound: closed.bound,
                })
            })
            .collect::<Result<_>>()?;
        let mean = batch.iter().map(|r| r.lambda2_closed).sum::<f64>() / batch.len() as f64;
        println!("n={n}: mean lambda_2 (closed form) {mean:.4}");
        rows.extend(batch);
    }
    out.write_json("lambda2.json", None, &rows)?;
    out.write_summary(&rows)?;
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RankBoundArgs {
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub flavor: Option<String>,
}

#[derive(Serialize)]
struct RankRow {
    n: u32,
    flavor: String,
    basis_size: usize,
    generic: f64,
    tight: Option<f64>,
}

pub fn rank_bound(ctx: &Context, args: RankBoundArgs) -> Result<()> {
    let (a, out) = ctx.prepare("rank-bound", &args)?;
    let flavor = parse_flavor(a.flavor.as_deref(), BasisFlavor::Complex2Local)?;
    let mut rows = Vec::new();
    for n in config::parse_n_list(a.n.as_deref().context("--n is required")?)? {
        let basis = StringBasis::enumerate(n, flavor)?;
        let b = stability::rank_lower_bound(n, &basis)?;
        println!("n={n} {flavor}: rank >= {:.6}{}", b.generic, b.tight.map(|t| format!(" (tight {t:.6})")).unwrap_or_default());
        rows.push(RankRow { n, flavor: flavor.to_string(), basis_size: basis.len(), generic: b.generic, tight: b.tight });
    }
    out.write_json("rank_bound.json", None, &rows)?;
    out.write_summary(&rows)?;
    Ok(())
}
