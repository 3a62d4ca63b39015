//! Command-line front end.
//!
//! Exit codes: 0 success, 1 selftest failure, 2 input or format error, 3 conditioning
//! error, 4 dimension or density-file mismatch.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{BasisSpec, DomainMap, Family};
use crate::datagen::{self, ScenarioSpec};
use crate::error::{Error, Result};
use crate::io::{parse_spectral_density, read_samples, write_samples};
use crate::joint::{
    density_matrix_correlation, probability_correlation, pure_squared_correlation, pureness_estimate,
    value_correlation, DensityMatrix, JointDistributionMatrix, JointKind,
};
use crate::moments::{accumulate_grams, grams_from_moments, moments_from_samples, Process, SampleSet};
use crate::oracle;
use crate::pipeline::{analyze, Analysis, PipelineConfig, DEFAULT_ORDER};
use crate::report::{JointReport, Meta, QuadratureReport, Report};
use crate::spectral::{lebesgue_quadrature, SolverOptions, DEFAULT_EPSILON};

#[derive(Debug, Parser)]
#[command(
    name = "lebjoint",
    version,
    about = "Lebesgue quadratures and joint distributions of sampled processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lebesgue quadrature of f (and g when present).
    Quadrature(RunArgs),
    /// Joint distribution matrices of f and g.
    Joint(JointArgs),
    /// Run the built-in invariant suite.
    Selftest(SelftestArgs),
    /// List the built-in scenarios.
    Scenarios,
    /// Write a scenario's samples as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// CSV file with columns x,w,f,g (w and g optional).
    #[arg(long, required_unless_present = "scenario", conflicts_with = "scenario")]
    pub input: Option<PathBuf>,
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Override the scenario seed.
    #[arg(long, requires = "scenario")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Quadrature order.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub n: usize,
    #[arg(long, default_value = "chebyshev")]
    pub basis: Family,
    /// Basis domain as MIN,MAX; defaults to the sample range.
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    /// Relative Gram eigenvalue floor; 0 turns rank deficiency into an error.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct JointArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated subset of value,probability,density,pure_squared.
    #[arg(long, default_value = "value,probability")]
    pub kinds: String,
    /// Density matrix: unit, identity or spectral:<path>.
    #[arg(long, default_value = "unit")]
    pub rho: String,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    /// Directory of scenario files to use instead of the built-in catalog.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Input(PathBuf),
    Scenario { name: String, seed: Option<u64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhoSource {
    PureUnit,
    Identity,
    Spectral(PathBuf),
}

impl RhoSource {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "unit" | "pure_unit" => Ok(RhoSource::PureUnit),
            "identity" => Ok(RhoSource::Identity),
            other => match other.strip_prefix("spectral:") {
                Some(path) if !path.is_empty() => Ok(RhoSource::Spectral(PathBuf::from(path))),
                _ => Err(Error::Config(format!(
                    "--rho expects unit, identity or spectral:<path>, got `{other}`"
                ))),
            },
        }
    }

    fn label(&self) -> String {
        match self {
            RhoSource::PureUnit => "unit".into(),
            RhoSource::Identity => "identity".into(),
            RhoSource::Spectral(p) => format!("spectral:{}", p.display()),
        }
    }
}

/// Everything one `quadrature` or `joint` invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub pipeline: PipelineConfig,
    pub kinds: Vec<JointKind>,
    pub rho: RhoSource,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
}

fn parse_domain(s: &str) -> Result<DomainMap> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("--domain expects MIN,MAX, got `{s}`")))?;
    match nums.as_slice() {
        [lo, hi] => DomainMap::new(*lo, *hi),
        _ => Err(Error::Config(format!("--domain expects MIN,MAX, got `{s}`"))),
    }
}

pub fn parse_kinds(s: &str) -> Result<Vec<JointKind>> {
    let mut kinds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let k: JointKind = part.parse()?;
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    Ok(kinds)
}

impl RunConfig {
    pub fn from_run_args(args: &RunArgs) -> Result<Self> {
        let source = match (&args.source.input, &args.source.scenario) {
            (Some(p), _) => Source::Input(p.clone()),
            (None, Some(s)) => Source::Scenario {
                name: s.clone(),
                seed: args.source.seed,
            },
            (None, None) => return Err(Error::Config("one of --input or --scenario is required".into())),
        };
        if args.n < 1 {
            return Err(Error::Config("--n must be at least 1".into()));
        }
        Ok(Self {
            source,
            pipeline: PipelineConfig {
                order: args.n,
                family: args.basis,
                domain: args.domain.as_deref().map(parse_domain).transpose()?,
                solver: SolverOptions {
                    epsilon: args.epsilon,
                },
            },
            kinds: Vec::new(),
            rho: RhoSource::PureUnit,
            format: args.format,
            output: args.output.clone(),
        })
    }

    pub fn from_joint_args(args: &JointArgs) -> Result<Self> {
        let mut cfg = Self::from_run_args(&args.run)?;
        cfg.kinds = parse_kinds(&args.kinds)?;
        if cfg.kinds.is_empty() {
            return Err(Error::Config(
                "--kinds must name at least one correlation kind".into(),
            ));
        }
        cfg.rho = RhoSource::parse(&args.rho)?;
        Ok(cfg)
    }
}

fn resolve_scenario(name: &str) -> Result<ScenarioSpec> {
    if let Some(spec) = datagen::builtin(name) {
        return spec;
    }
    let path = Path::new(name);
    if path.exists() {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read scenario file {}: {e}", path.display())))?;
        return ScenarioSpec::parse(&text);
    }
    Err(Error::Input(format!(
        "unknown scenario `{name}` (built-in: {})",
        datagen::builtin_names().join(", ")
    )))
}

/// Loaded samples with a description of where they came from.
pub struct LoadedSamples {
    pub samples: SampleSet,
    pub source: String,
    pub seed: Option<u64>,
}

pub fn load_samples(source: &Source) -> Result<LoadedSamples> {
    match source {
        Source::Input(path) => {
            let file = fs::File::open(path)
                .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
            let samples = read_samples(std::io::BufReader::new(file)).map_err(|e| match e {
                Error::Input(m) => Error::Input(format!("{}: {m}", path.display())),
                other => other,
            })?;
            Ok(LoadedSamples {
                samples,
                source: path.display().to_string(),
                seed: None,
            })
        }
        Source::Scenario { name, seed } => {
            let mut spec = resolve_scenario(name)?;
            if let Some(s) = seed {
                spec.seed = *s;
            }
            Ok(LoadedSamples {
                samples: datagen::generate(&spec)?,
                source: format!("scenario:{}", spec.name),
                seed: Some(spec.seed),
            })
        }
    }
}

fn relative(residual: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        residual / scale
    } else {
        residual
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn base_report(loaded: &LoadedSamples, analysis: &Analysis, cfg: &RunConfig) -> Result<Report> {
    let grams = &analysis.grams;
    let qf = &analysis.quad_f;
    let mut residuals = BTreeMap::new();
    let (w0, w1) = qf.sum_rule_residuals();
    residuals.insert(
        "orthonormality_f".into(),
        qf.solution.orthonormality_residual(&grams.gram),
    );
    residuals.insert(
        "eigen_f".into(),
        qf.solution.eigen_residual(&grams.a_f, &grams.gram),
    );
    residuals.insert("weight_sum_f".into(), relative(w0, grams.total_measure));
    residuals.insert(
        "first_moment_f".into(),
        relative(w1, grams.total_measure * max_abs(&qf.nodes)),
    );
    if let (Some(qg), Some(a_g)) = (&analysis.quad_g, &grams.a_g) {
        let (g0, g1) = qg.sum_rule_residuals();
        residuals.insert(
            "orthonormality_g".into(),
            qg.solution.orthonormality_residual(&grams.gram),
        );
        residuals.insert("eigen_g".into(), qg.solution.eigen_residual(a_g, &grams.gram));
        residuals.insert("weight_sum_g".into(), relative(g0, grams.total_measure));
        residuals.insert(
            "first_moment_g".into(),
            relative(g1, grams.total_measure * max_abs(&qg.nodes)),
        );
        let direct = lebesgue_quadrature(grams, Process::G, &cfg.pipeline.solver)?;
        let diff = direct
            .nodes
            .iter()
            .zip(&qg.nodes)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        residuals.insert("two_route_g".into(), relative(diff, max_abs(&direct.nodes)));
        if let Some(s) = &analysis.projection {
            residuals.insert("projection_orthogonality".into(), s.orthogonality_residual());
        }
    }
    let domain = grams.basis.domain();
    Ok(Report {
        meta: Meta {
            n: cfg.pipeline.order,
            effective_rank: qf.solution.effective_rank,
            basis: grams.basis.family(),
            domain: [domain.x_min(), domain.x_max()],
            total_measure: grams.total_measure,
            integral_f: grams.integral_f,
            integral_g: grams.integral_g,
            epsilon: cfg.pipeline.solver.epsilon,
            samples: loaded.samples.len(),
            source: loaded.source.clone(),
            seed: loaded.seed,
            rho: None,
            residuals,
        },
        quadrature_f: QuadratureReport::from_quadrature(qf),
        quadrature_g: analysis.quad_g.as_ref().map(QuadratureReport::from_quadrature),
        joint: Vec::new(),
    })
}

pub fn cmd_quadrature(cfg: &RunConfig) -> Result<Report> {
    let loaded = load_samples(&cfg.source)?;
    let analysis = analyze(&loaded.samples, &cfg.pipeline)?;
    base_report(&loaded, &analysis, cfg)
}

fn load_density(rho: &RhoSource, analysis: &Analysis) -> Result<DensityMatrix> {
    let n = analysis.quad_f.order();
    let density = match rho {
        RhoSource::PureUnit => DensityMatrix::pure_unit(&analysis.quad_f),
        RhoSource::Identity => DensityMatrix::identity(n)?,
        RhoSource::Spectral(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Input(format!("cannot read density file {}: {e}", path.display())))?;
            parse_spectral_density(&text)?
        }
    };
    if density.order() != n {
        return Err(Error::Dimension(format!(
            "density matrix has order {}, quadrature has {n}",
            density.order()
        )));
    }
    Ok(density)
}

/// Requested joint matrices for an analysis that has both processes.
pub fn joint_matrices(
    analysis: &Analysis,
    kinds: &[JointKind],
    rho: &DensityMatrix,
) -> Result<Vec<JointDistributionMatrix>> {
    let s = analysis.projection.as_ref().ok_or(Error::MissingProcess("g"))?;
    let qg = analysis.quad_g.as_ref().ok_or(Error::MissingProcess("g"))?;
    kinds
        .iter()
        .map(|k| match k {
            JointKind::Value => value_correlation(&analysis.quad_f, qg, s),
            JointKind::Probability => Ok(probability_correlation(s)),
            JointKind::Density => density_matrix_correlation(s, rho),
            JointKind::PureSquared => pure_squared_correlation(s, rho),
        })
        .collect()
}

pub fn cmd_joint(cfg: &RunConfig) -> Result<Report> {
    if cfg.kinds.is_empty() {
        return Err(Error::Config("no correlation kinds requested".into()));
    }
    let loaded = load_samples(&cfg.source)?;
    if !loaded.samples.has_g() {
        return Err(Error::MissingProcess("g"));
    }
    let analysis = analyze(&loaded.samples, &cfg.pipeline)?;
    let rho = load_density(&cfg.rho, &analysis)?;
    let mut report = base_report(&loaded, &analysis, cfg)?;
    report.meta.rho = Some(cfg.rho.label());
    let s = analysis.projection.as_ref().expect("g present");
    if cfg.kinds.contains(&JointKind::PureSquared) {
        if let Ok(p) = pureness_estimate(s, &rho) {
            report.meta.residuals.insert("pureness".into(), p);
        }
    }
    report.joint = joint_matrices(&analysis, &cfg.kinds, &rho)?
        .iter()
        .map(JointReport::from_joint)
        .collect();
    Ok(report)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Conditioning { .. } => 3,
        Error::Dimension(_) => 4,
        _ => 2,
    }
}

fn emit(report: &Report, cfg: &RunConfig) -> std::io::Result<()> {
    let text = match cfg.format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
    };
    write_text(&text, cfg.output.as_deref())
}

fn write_text(text: &str, path: Option<&Path>) -> std::io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn finish(result: Result<Report>, cfg: &RunConfig) -> i32 {
    match result {
        Ok(report) => match emit(&report, cfg) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: cannot write output: {e}");
                2
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Quadrature(args) => match RunConfig::from_run_args(&args) {
            Ok(cfg) => finish(cmd_quadrature(&cfg), &cfg),
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Command::Joint(args) => match RunConfig::from_joint_args(&args) {
            Ok(cfg) => finish(cmd_joint(&cfg), &cfg),
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Command::Selftest(args) => {
            let stdout = std::io::stdout();
            cmd_selftest(args.fixtures.as_deref(), &mut stdout.lock())
        }
        Command::Scenarios => {
            for name in datagen::builtin_names() {
                match datagen::builtin(name) {
                    Some(Ok(spec)) => println!("{name}\t{} samples, seed {}", spec.samples, spec.seed),
                    _ => println!("{name}\t(invalid)"),
                }
            }
            0
        }
        Command::Generate(args) => {
            let loaded = load_samples(&Source::Scenario {
                name: args.scenario,
                seed: args.seed,
            });
            match loaded {
                Ok(l) => match write_text(&write_samples(&l.samples), args.output.as_deref()) {
                    Ok(()) => 0,
                    Err(e) => {
                        eprintln!("error: cannot write output: {e}");
                        2
                    }
                },
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// selftest

const SELFTEST_TOL: f64 = 1e-8;
const SELFTEST_ENTRY_TOL: f64 = 1e-10;
const ORACLE_CASES: usize = 50;

type Outcome = std::result::Result<(), String>;

fn within(label: &str, got: f64, want: f64, tol: f64) -> Outcome {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!(
            "{label}: got {got:e}, expected {want:e} (tolerance {tol:e})"
        ))
    }
}

fn matrices_within(label: &str, a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Outcome {
    let d = (a - b).amax();
    if d <= tol {
        Ok(())
    } else {
        Err(format!("{label}: max entry difference {d:e} exceeds {tol:e}"))
    }
}

/// A seeded density matrix with random positive spectrum and orthonormal eigenvectors.
fn random_density(n: usize, seed: u64) -> DensityMatrix {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, n, |_, _| r.random::<f64>() - 0.5);
    let q = (&m + m.transpose()).symmetric_eigen().eigenvectors;
    let lam: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 2.0).collect();
    DensityMatrix::from_spectral(&lam, &q).expect("orthonormal by construction")
}

fn fixture_checks(name: &str, samples: &SampleSet) -> Vec<(String, Outcome)> {
    let mut out = Vec::new();
    let order = DEFAULT_ORDER.min(samples.len());
    let cfg = PipelineConfig {
        order,
        ..PipelineConfig::default()
    };
    let analysis = match analyze(samples, &cfg) {
        Ok(a) => a,
        Err(e) => {
            out.push((format!("{name}: pipeline"), Err(e.to_string())));
            return out;
        }
    };
    let total = analysis.grams.total_measure;
    let qf = &analysis.quad_f;
    let n = qf.order();
    let (w0, _) = qf.sum_rule_residuals();
    out.push((
        format!("{name}: quadrature weights sum to <1>"),
        within("sum w", w0, 0.0, SELFTEST_TOL * total),
    ));

    let basis = BasisSpec::new(cfg.family, 2 * order, analysis.grams.basis.domain().to_owned());
    let path = basis
        .and_then(|b| moments_from_samples(samples, &b, order))
        .and_then(|m| grams_from_moments(&m, order))
        .map_err(|e| e.to_string())
        .and_then(|routed| {
            let g = &analysis.grams;
            matrices_within("G", &routed.gram, &g.gram, SELFTEST_ENTRY_TOL * g.gram.amax())?;
            matrices_within("A_f", &routed.a_f, &g.a_f, SELFTEST_ENTRY_TOL * g.a_f.amax())
        });
    out.push((format!("{name}: moment route matches sample sums"), path));

    let (Some(qg), Some(s)) = (&analysis.quad_g, &analysis.projection) else {
        return out;
    };
    let v = value_correlation(qf, qg, s).expect("consistent");
    let sum_rules = within("sum V", v.total(), total, SELFTEST_TOL * total).and_then(|()| {
        within(
            "marginals of V",
            v.marginal_residual().unwrap_or(f64::NAN),
            0.0,
            SELFTEST_TOL * total,
        )
    });
    out.push((format!("{name}: value-correlation sum rules"), sum_rules));

    let p = probability_correlation(s);
    let prob = within("sum P", p.total(), n as f64, SELFTEST_TOL * n as f64).and_then(|()| {
        within(
            "marginals of P",
            p.marginal_residual().unwrap_or(f64::NAN),
            0.0,
            SELFTEST_TOL,
        )
    });
    out.push((format!("{name}: probability-correlation normalization"), prob));

    let rho = random_density(n, 0x5eed);
    let spur = density_matrix_correlation(s, &rho)
        .map_err(|e| e.to_string())
        .and_then(|w| within("sum W", w.total(), rho.spur, SELFTEST_TOL * rho.spur.max(1.0)));
    out.push((format!("{name}: density correlation sums to Spur"), spur));

    let unit = DensityMatrix::pure_unit(qf);
    let specials = DensityMatrix::from_matrix(unit.matrix.clone())
        .and_then(|explicit| density_matrix_correlation(s, &explicit))
        .map_err(|e| e.to_string())
        .and_then(|w| matrices_within("|1><1| vs V", &w.matrix, &v.matrix, SELFTEST_ENTRY_TOL * total))
        .and_then(|()| {
            let ident = DensityMatrix::from_matrix(DMatrix::identity(n, n)).map_err(|e| e.to_string())?;
            let w = density_matrix_correlation(s, &ident).map_err(|e| e.to_string())?;
            matrices_within("identity vs P", &w.matrix, &p.matrix, SELFTEST_ENTRY_TOL)
        });
    out.push((format!("{name}: density specializations"), specials));

    let factor = pure_squared_correlation(s, &unit)
        .map_err(|e| e.to_string())
        .and_then(|w| {
            let outer = DMatrix::from_fn(n, n, |i, j| qf.weights[i] * qg.weights[j]);
            matrices_within(
                "W vs w_f w_g",
                &w.matrix,
                &outer,
                SELFTEST_ENTRY_TOL * total * total,
            )?;
            within("sum W", w.total(), total * total, SELFTEST_TOL * total * total)
        })
        .and_then(|()| {
            let pure = pureness_estimate(s, &unit).map_err(|e| e.to_string())?;
            within("pureness", pure, 0.0, SELFTEST_TOL)
        });
    out.push((format!("{name}: pure-state factorization"), factor));

    let direct = lebesgue_quadrature(&analysis.grams, Process::G, &cfg.solver);
    let two_route = direct.map_err(|e| e.to_string()).and_then(|d| {
        let scale = max_abs(&d.nodes);
        d.nodes
            .iter()
            .zip(&qg.nodes)
            .try_for_each(|(a, b)| within("g node", *b, *a, SELFTEST_TOL * scale))
    });
    out.push((
        format!("{name}: f-eigenbasis route matches direct solve"),
        two_route,
    ));
    out
}

fn close_entry(a: f64, b: f64) -> bool {
    (a - b).abs() <= SELFTEST_ENTRY_TOL * b.abs().max(1.0)
}

/// Compares the pipeline against the naive reference on random small measures.
pub fn oracle_check(cases: usize, seed: u64) -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let atoms = r.random_range(3..=5usize);
        let n = r.random_range(1..=3usize.min(atoms));
        // Atoms spaced at least 0.2 apart on [-1, 1].
        let mut x: Vec<f64> = Vec::with_capacity(atoms);
        while x.len() < atoms {
            let c = r.random_range(-1.0..1.0);
            if x.iter().all(|&v: &f64| (v - c).abs() >= 0.2) {
                x.push(c);
            }
        }
        let w: Vec<f64> = (0..atoms).map(|_| r.random_range(0.2..1.5)).collect();
        let f: Vec<f64> = (0..atoms).map(|_| r.random_range(-2.0..2.0)).collect();
        let g: Vec<f64> = (0..atoms).map(|_| r.random_range(-2.0..2.0)).collect();
        let fail = |what: &str| Err(format!("oracle case {case} (atoms={atoms}, n={n}): {what}"));

        let Some(reference) = oracle::joint(&x, &w, &f, &g, n) else {
            return fail("reference Cholesky failed");
        };
        let samples = SampleSet::new(x, w, f, Some(g)).map_err(|e| e.to_string())?;
        let cfg = PipelineConfig {
            order: n,
            ..PipelineConfig::default()
        };
        let a = analyze(&samples, &cfg).map_err(|e| e.to_string())?;
        let (qg, s) = (a.quad_g.as_ref().unwrap(), a.projection.as_ref().unwrap());
        let pairs = [
            (&a.quad_f.nodes, &reference.f.nodes),
            (&a.quad_f.weights, &reference.f.weights),
            (&qg.nodes, &reference.g.nodes),
            (&qg.weights, &reference.g.weights),
        ];
        for (got, want) in pairs {
            if got.len() != want.len() || got.iter().zip(want.iter()).any(|(a, b)| !close_entry(*a, *b)) {
                return fail("quadrature nodes or weights differ");
            }
        }
        let mixed =
            DensityMatrix::from_matrix(DensityMatrix::pure_unit(&a.quad_f).matrix + DMatrix::identity(n, n))
                .map_err(|e| e.to_string())?;
        let ours = [
            (
                "value",
                value_correlation(&a.quad_f, qg, s)
                    .map_err(|e| e.to_string())?
                    .matrix,
            ),
            ("probability", probability_correlation(s).matrix),
            (
                "density",
                density_matrix_correlation(s, &mixed)
                    .map_err(|e| e.to_string())?
                    .matrix,
            ),
            (
                "pure_squared",
                pure_squared_correlation(s, &mixed)
                    .map_err(|e| e.to_string())?
                    .matrix,
            ),
        ];
        let theirs = [
            &reference.value,
            &reference.probability,
            &reference.density_mixed,
            &reference.pure_squared_mixed,
        ];
        for ((kind, m), want) in ours.iter().zip(theirs) {
            for i in 0..n {
                for j in 0..n {
                    if !close_entry(m[(i, j)], want[i][j]) {
                        return fail(&format!(
                            "{kind}[{i}][{j}] = {} vs reference {}",
                            m[(i, j)],
                            want[i][j]
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Three atoms cannot carry four independent polynomials; with no regularization budget
/// the solver has to refuse.
fn expected_conditioning_failure() -> Outcome {
    let samples = SampleSet::new(
        vec![-1.0, 0.1, 1.0],
        vec![1.0, 1.0, 1.0],
        vec![0.0, 1.0, -1.0],
        None,
    )
    .map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        order: 4,
        solver: SolverOptions { epsilon: 0.0 },
        ..PipelineConfig::default()
    };
    let basis = cfg.basis_for(&samples).map_err(|e| e.to_string())?;
    let grams = accumulate_grams(&samples, &basis, 4).map_err(|e| e.to_string())?;
    match lebesgue_quadrature(&grams, Process::F, &cfg.solver) {
        Err(Error::Conditioning { effective_rank, .. }) => {
            if effective_rank == 3 {
                Ok(())
            } else {
                Err(format!(
                    "conditioning error reported effective rank {effective_rank}, expected 3"
                ))
            }
        }
        Err(e) => Err(format!("expected a conditioning error, got: {e}")),
        Ok(_) => Err("rank-deficient fixture solved without error at epsilon = 0".into()),
    }
}

fn load_fixtures(dir: Option<&Path>) -> std::result::Result<Vec<(String, String)>, String> {
    match dir {
        None => Ok(datagen::builtin_names()
            .into_iter()
            .map(|n| {
                (
                    n.to_string(),
                    datagen::builtin_text(n).unwrap_or_default().to_string(),
                )
            })
            .collect()),
        Some(d) => {
            let entries =
                fs::read_dir(d).map_err(|e| format!("cannot read fixture directory {}: {e}", d.display()))?;
            let mut paths: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "scn"))
                .collect();
            paths.sort();
            paths
                .into_iter()
                .map(|p| {
                    let name = p
                        .file_stem()
                        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                    fs::read_to_string(&p)
                        .map(|t| (name.clone(), t))
                        .map_err(|e| format!("fixture `{name}`: {e}"))
                })
                .collect()
        }
    }
}

/// Runs the invariant suite, printing one line per identity. Returns the exit code.
pub fn cmd_selftest<W: Write>(fixtures: Option<&Path>, out: &mut W) -> i32 {
    let fixtures = match load_fixtures(fixtures) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(out, "FAIL {e}");
            return 1;
        }
    };
    let mut results: Vec<(String, Outcome)> = Vec::new();
    for (name, text) in &fixtures {
        let samples = ScenarioSpec::parse(text).and_then(|spec| datagen::generate(&spec));
        match samples {
            Ok(s) => results.extend(fixture_checks(name, &s)),
            Err(e) => {
                let _ = writeln!(out, "FAIL fixture `{name}`: {e}");
                return 1;
            }
        }
    }
    results.push((
        format!("reference oracle agreement ({ORACLE_CASES} random measures, n <= 3)"),
        oracle_check(ORACLE_CASES, 0x0bac1e),
    ));
    results.push((
        "expected failure: epsilon = 0 on a rank-deficient 3-atom set, n = 4".into(),
        expected_conditioning_failure(),
    ));

    let mut first_failure = None;
    for (name, outcome) in &results {
        match outcome {
            Ok(()) => {
                let _ = writeln!(out, "PASS {name}");
            }
            Err(e) => {
                let _ = writeln!(out, "FAIL {name}: {e}");
                first_failure.get_or_insert(name.clone());
            }
        }
    }
    match first_failure {
        None => {
            let _ = writeln!(out, "all {} identities hold", results.len());
            0
        }
        Some(name) => {
            let _ = writeln!(out, "first failing identity: {name}");
            1
        }
    }
}
