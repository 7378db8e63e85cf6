//! Command dispatch behind the `caplab` binary.
//!
//! Every command reads a JSON config (see [`crate::config`]), prints a short
//! summary and writes its tables into the output directory. A check that
//! runs and finds that a property does not hold is a success; only errors
//! produce exit status 1, with a JSON error record on stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use crate::comonotone::BoundedFn;
use crate::config::{load_config, ConfigError, Format, LoadedConfig, LoadedModel};
use crate::ellsberg::{build_pprime, verify_pprime, verify_product_fubini, SortedUrn};
use crate::independence::{
    exp_independent, fubini_independent_chain, mm_independent, peng_check, relative_gap,
    Convention, IndependenceError, IndependenceKind, IndependenceReport, DEFAULT_TOLERANCE,
    DEFAULT_TRIALS,
};
use crate::measure::{MeasureError, RandomVariable};
use crate::report::{
    curve_rows, curves_csv, exact_csv, independence_csv, line_chart_svg, num, samples_csv,
    write_atomic, Csv, CurveRow, Series,
};
use crate::wlln::{exact_lower_prob, mc_simulate, SimulationReport, WllnError};

#[derive(Debug, Parser)]
#[command(
    name = "caplab",
    version,
    about = "Capacities, independence checks and weak-law experiments on ambiguous urns"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: config `output.dir`, else `caplab-out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed override for every random component.
    #[arg(long, global = true, env = "CAPLAB_SEED")]
    pub seed: Option<u64>,
    /// Relative tolerance for equality checks.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate the config.
    Validate,
    /// Upper and lower Choquet integrals of each urn's variable and functions.
    Choquet,
    /// Upper and lower envelopes of each urn's variable and functions.
    Envelope,
    /// Alternation and monotonicity class of each urn's upper capacity.
    Classify,
    /// Dominating probability of each urn and its checks.
    Pprime,
    /// One independence check on every model (or one model).
    CheckIndependence {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        model: Option<String>,
    },
    /// Threshold-by-threshold product Fubini verification.
    ProductFubini {
        #[arg(long)]
        model: Option<String>,
    },
    /// Exact lower probabilities of the configured urn sequences.
    WllnExact,
    /// Monte Carlo runs of the configured scenarios.
    WllnMc,
    /// Frequency curves merged with exact values, as CSV and SVG.
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Mm,
    Exp,
    Fubini,
    Peng,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Independence(#[from] IndependenceError),
    #[error(transparent)]
    Wlln(#[from] WllnError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(e) => e.kind(),
            CliError::Measure(_) => "measure",
            CliError::Independence(IndependenceError::EnumerationCap { .. }) => "enumeration-cap",
            CliError::Independence(_) => "independence",
            CliError::Wlln(WllnError::EnumerationCap { .. }) => "enumeration-cap",
            CliError::Wlln(_) => "wlln",
            CliError::Io { .. } => "io",
        }
    }

    /// One-line JSON error record.
    pub fn record(&self) -> String {
        let mut rec = json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Config(ConfigError::Violations(v)) = self {
            rec["violations"] = serde_json::to_value(v).expect("serializable");
        }
        rec.to_string()
    }
}

struct Context<'a> {
    cfg: LoadedConfig,
    out_dir: PathBuf,
    seed: Option<u64>,
    tol: f64,
    format: Format,
    stdout: &'a mut (dyn Write + Send),
}

impl Context<'_> {
    fn say(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.stdout, "{}", line.as_ref());
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        write_atomic(&path, contents.as_bytes()).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.say(format!("wrote {}", path.display()));
        Ok(())
    }

    fn write_csv(&mut self, name: &str, csv: Csv) -> Result<(), CliError> {
        if self.format.csv() {
            self.write(name, csv.as_str())?;
        }
        Ok(())
    }

    fn models(&self, only: Option<&str>) -> Result<Vec<(String, LoadedModel)>, CliError> {
        match only {
            Some(name) => match self.cfg.models.get(name) {
                Some(m) => Ok(vec![(name.to_string(), m.clone())]),
                None => Err(CliError::Usage(format!("unknown model {name:?}"))),
            },
            None => Ok(self
                .cfg
                .models
                .iter()
                .map(|(k, m)| (k.clone(), m.clone()))
                .collect()),
        }
    }

    fn trials(&self) -> usize {
        self.cfg.raw.output.trials.unwrap_or(DEFAULT_TRIALS)
    }

    fn check_seed(&self) -> u64 {
        self.seed.or(self.cfg.raw.output.seed).unwrap_or(0)
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn main_with<I, T>(
    args: I,
    stdout: &mut (dyn Write + Send),
    stderr: &mut (dyn Write + Send),
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim_end().to_string());
            let _ = writeln!(stderr, "{}", err.record());
            return 1;
        }
    };
    match run(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.record());
            1
        }
    }
}

/// Runs a parsed command.
pub fn run(cli: Cli, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            pool.install(|| dispatch(cli, stdout))
        }
        None => dispatch(cli, stdout),
    }
}

fn dispatch(cli: Cli, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let Some(config) = cli.config.as_deref() else {
        return Err(CliError::Usage("--config <path> is required".into()));
    };
    let cfg = load_config(config)?;
    let tol = cli
        .tolerance
        .or(cfg.raw.output.tolerance)
        .unwrap_or(DEFAULT_TOLERANCE);
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(CliError::Usage(format!("invalid tolerance {tol}")));
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.raw.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("caplab-out"));
    let format = cli.format.or(cfg.raw.output.format).unwrap_or_default();
    let mut ctx = Context {
        cfg,
        out_dir,
        seed: cli.seed,
        tol,
        format,
        stdout,
    };
    match cli.command {
        Command::Validate => validate(&mut ctx, config),
        Command::Choquet => choquet(&mut ctx),
        Command::Envelope => envelope(&mut ctx),
        Command::Classify => classify(&mut ctx),
        Command::Pprime => pprime(&mut ctx),
        Command::CheckIndependence { kind, model } => {
            check_independence(&mut ctx, kind, model.as_deref())
        }
        Command::ProductFubini { model } => product_fubini(&mut ctx, model.as_deref()),
        Command::WllnExact => wlln_exact(&mut ctx).map(|_| ()),
        Command::WllnMc => wlln_mc(&mut ctx).map(|_| ()),
        Command::Report => report(&mut ctx),
    }
}

fn validate(ctx: &mut Context<'_>, path: &Path) -> Result<(), CliError> {
    let c = &ctx.cfg;
    let line = format!(
        "{}: ok ({} spaces, {} urns, {} phis, {} models, {} scenarios, {} exact sequences)",
        path.display(),
        c.spaces.len(),
        c.urns.len(),
        c.raw.phis.len(),
        c.models.len(),
        c.raw.wlln.scenarios.len(),
        c.raw.wlln.exact.len()
    );
    ctx.say(line);
    Ok(())
}

/// `(name, φ(X))` for the identity and every function tabulated on the urn.
fn urn_functions(ctx: &Context<'_>, urn_name: &str) -> Vec<(String, RandomVariable)> {
    let urn = &ctx.cfg.urns[urn_name];
    let idx = urn.range_index();
    let mut out = vec![("X".to_string(), urn.variable().clone())];
    for (name, phi) in &ctx.cfg.raw.phis {
        if phi.urn.as_deref() == Some(urn_name) {
            let values = idx.iter().map(|&k| phi.values[k]).collect();
            out.push((
                name.clone(),
                RandomVariable::new(urn.space(), values).expect("validated"),
            ));
        }
    }
    out
}

fn choquet(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let mut csv = Csv::new(&["urn", "phi", "upper_choquet", "lower_choquet"]);
    let names: Vec<String> = ctx.cfg.urns.keys().cloned().collect();
    for name in names {
        let credal = ctx.cfg.urns[&name].credal().clone();
        for (phi, x) in urn_functions(ctx, &name) {
            let (up, lo) = (credal.upper_choquet(&x), credal.lower_choquet(&x));
            ctx.say(format!("{name} {phi}: upper {up}, lower {lo}"));
            csv.row(&[name.clone(), phi, num(up), num(lo)]);
        }
    }
    ctx.write_csv("choquet.csv", csv)
}

fn envelope(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let mut csv = Csv::new(&["urn", "phi", "upper_envelope", "lower_envelope"]);
    let names: Vec<String> = ctx.cfg.urns.keys().cloned().collect();
    for name in names {
        let credal = ctx.cfg.urns[&name].credal().clone();
        for (phi, x) in urn_functions(ctx, &name) {
            let (up, lo) = (credal.upper_envelope(&x), credal.lower_envelope(&x));
            ctx.say(format!("{name} {phi}: upper {up}, lower {lo}"));
            csv.row(&[name.clone(), phi, num(up), num(lo)]);
        }
    }
    ctx.write_csv("envelope.csv", csv)
}

fn classify(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let mut csv = Csv::new(&[
        "urn",
        "two_alternating",
        "totally_monotone",
        "totally_alternating",
    ]);
    let names: Vec<String> = ctx.cfg.urns.keys().cloned().collect();
    for name in names {
        let c = ctx.cfg.urns[&name].credal().upper_capacity()?.classify()?;
        ctx.say(format!(
            "{name}: 2-alternating {}, totally monotone {}, totally alternating {}",
            c.two_alternating, c.totally_monotone, c.totally_alternating
        ));
        csv.row(&[
            name,
            c.two_alternating.to_string(),
            c.totally_monotone.to_string(),
            c.totally_alternating.to_string(),
        ]);
    }
    ctx.write_csv("classify.csv", csv)
}

fn pprime(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let mut csv = Csv::new(&[
        "urn",
        "atom",
        "value",
        "pprime",
        "is_prob",
        "in_core",
        "survival_match",
    ]);
    let names: Vec<String> = ctx.cfg.urns.keys().cloned().collect();
    for name in names {
        let urn = ctx.cfg.urns[&name].clone();
        let sorted = SortedUrn::new(urn.clone());
        let p = build_pprime(&sorted);
        let v = verify_pprime(&sorted, &p, 1e-12)?;
        ctx.say(format!(
            "{name}: P' = {:?}; probability {}, in core {}, survival match {}",
            p.probs(),
            v.is_prob,
            v.in_core,
            v.survival_match
        ));
        for (atom, label) in urn.space().labels().iter().enumerate() {
            csv.row(&[
                name.clone(),
                label.clone(),
                num(urn.variable().value(atom)),
                num(p.prob(atom)),
                v.is_prob.to_string(),
                v.in_core.to_string(),
                v.survival_match.to_string(),
            ]);
        }
    }
    ctx.write_csv("pprime.csv", csv)
}

fn identity_phis(m: &LoadedModel) -> Vec<BoundedFn> {
    m.phis.clone().unwrap_or_else(|| {
        (0..m.model.len())
            .map(|i| {
                BoundedFn::new(&m.model.range_axis(i), m.model.ranges()[i].clone())
                    .expect("finite values")
            })
            .collect()
    })
}

fn check_independence(
    ctx: &mut Context<'_>,
    kind: KindArg,
    only: Option<&str>,
) -> Result<(), CliError> {
    for (name, m) in ctx.models(only)? {
        let reports: Vec<IndependenceReport> = match kind {
            KindArg::Mm => {
                let mut out = Vec::new();
                for i in 0..m.model.len() {
                    for j in i + 1..m.model.len() {
                        out.push(mm_independent(&m.model, i, j, ctx.tol)?);
                    }
                }
                out
            }
            KindArg::Exp => {
                vec![exp_independent(
                    &m.model,
                    ctx.trials(),
                    ctx.check_seed(),
                    ctx.tol,
                )?]
            }
            KindArg::Fubini => vec![fubini_independent_chain(
                &m.model,
                &identity_phis(&m),
                Convention::Greater,
                ctx.tol,
            )?],
            KindArg::Peng => match &m.peng_phi {
                Some(phi) => {
                    let p = peng_check(&m.model, phi, ctx.tol)?;
                    vec![IndependenceReport {
                        kind: IndependenceKind::Peng,
                        holds: p.equal,
                        max_gap: relative_gap(p.lhs, p.rhs),
                        lhs: p.lhs,
                        rhs: p.rhs,
                        witness: (!p.equal).then(|| "iterated envelope differs from joint".into()),
                    }]
                }
                None if only.is_some() => {
                    return Err(CliError::Usage(format!("model {name:?} has no peng_phi")))
                }
                None => continue,
            },
        };
        for r in &reports {
            ctx.say(format!(
                "{name} {}: holds {} (lhs {}, rhs {}, max gap {}){}",
                r.kind.name(),
                r.holds,
                r.lhs,
                r.rhs,
                r.max_gap,
                r.witness
                    .as_ref()
                    .map(|w| format!(", witness {w}"))
                    .unwrap_or_default()
            ));
        }
        let file = format!("independence-{}-{name}.csv", kind_name(kind));
        ctx.write_csv(&file, independence_csv(&reports))?;
    }
    Ok(())
}

fn kind_name(kind: KindArg) -> &'static str {
    match kind {
        KindArg::Mm => "mm",
        KindArg::Exp => "exp",
        KindArg::Fubini => "fubini",
        KindArg::Peng => "peng",
    }
}

fn product_fubini(ctx: &mut Context<'_>, only: Option<&str>) -> Result<(), CliError> {
    for (name, m) in ctx.models(only)? {
        if !m.model.is_product() {
            if only.is_some() {
                return Err(IndependenceError::NotProductLaw.into());
            }
            continue;
        }
        let r = verify_product_fubini(&m.model, &identity_phis(&m), ctx.tol)?;
        ctx.say(format!("{name}: holds {} (max gap {})", r.holds, r.max_gap));
        let mut csv = Csv::new(&["alpha", "joint", "iterated", "pprime_route", "gap"]);
        for row in &r.rows {
            csv.row(&[
                num(row.alpha),
                num(row.joint),
                num(row.iterated),
                num(row.pprime_route),
                num(row.gap),
            ]);
        }
        ctx.write_csv(&format!("product-fubini-{name}.csv"), csv)?;
    }
    Ok(())
}

fn exact_rows(ctx: &Context<'_>) -> Result<Vec<CurveRow>, CliError> {
    let mut rows = Vec::new();
    for e in &ctx.cfg.raw.wlln.exact {
        let urn = &ctx.cfg.urns[&e.urn];
        for &n in &e.n_list {
            rows.push(CurveRow {
                scenario: e.name.clone(),
                n,
                frequency: None,
                exact_lower_prob: Some(exact_lower_prob(urn, n, e.epsilon)?),
            });
        }
    }
    Ok(rows)
}

fn wlln_exact(ctx: &mut Context<'_>) -> Result<Vec<CurveRow>, CliError> {
    let rows = exact_rows(ctx)?;
    for r in &rows {
        ctx.say(format!(
            "{} n={}: lower probability {}",
            r.scenario,
            r.n,
            r.exact_lower_prob.unwrap_or(f64::NAN)
        ));
    }
    ctx.write_csv("wlln-exact.csv", exact_csv(&rows))?;
    Ok(rows)
}

fn simulate_all(ctx: &Context<'_>) -> Result<Vec<SimulationReport>, CliError> {
    ctx.cfg
        .raw
        .wlln
        .scenarios
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if let Some(seed) = ctx.seed {
                s.seed = seed;
            }
            Ok(mc_simulate(&s)?)
        })
        .collect()
}

fn series_of(rows: &[CurveRow], reports: &[SimulationReport]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for r in reports {
        out.push(Series {
            label: format!("{} ({})", r.scenario, r.strategy.name()),
            points: rows
                .iter()
                .filter(|c| c.scenario == r.scenario)
                .filter_map(|c| c.frequency.map(|f| (c.n as f64, f)))
                .collect(),
        });
    }
    let mut exact_names: Vec<&str> = rows
        .iter()
        .filter(|c| c.exact_lower_prob.is_some())
        .map(|c| c.scenario.as_str())
        .collect();
    exact_names.dedup();
    for name in exact_names {
        out.push(Series {
            label: format!("{name} (exact)"),
            points: rows
                .iter()
                .filter(|c| c.scenario == name)
                .filter_map(|c| c.exact_lower_prob.map(|v| (c.n as f64, v)))
                .collect(),
        });
    }
    out
}

fn wlln_mc(ctx: &mut Context<'_>) -> Result<Vec<SimulationReport>, CliError> {
    let reports = simulate_all(ctx)?;
    let rows = curve_rows(&reports);
    for r in &rows {
        ctx.say(format!(
            "{} n={}: frequency {}",
            r.scenario,
            r.n,
            r.frequency.unwrap_or(f64::NAN)
        ));
    }
    ctx.write_csv("wlln-samples.csv", samples_csv(&reports))?;
    ctx.write_csv("wlln-curves.csv", curves_csv(&rows, false))?;
    if ctx.format.svg() {
        let svg = line_chart_svg(
            "Frequency of the band",
            "n",
            "frequency",
            &series_of(&rows, &reports),
        );
        ctx.write("wlln-curves.svg", &svg)?;
    }
    Ok(reports)
}

fn report(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let reports = simulate_all(ctx)?;
    let mut rows = curve_rows(&reports);
    for e in exact_rows(ctx)? {
        match rows
            .iter_mut()
            .find(|r| r.scenario == e.scenario && r.n == e.n)
        {
            Some(r) => r.exact_lower_prob = e.exact_lower_prob,
            None => rows.push(e),
        }
    }
    ctx.say(format!("{} curve rows", rows.len()));
    ctx.write_csv("report-curves.csv", curves_csv(&rows, true))?;
    if ctx.format.svg() {
        let svg = line_chart_svg(
            "Band frequency and exact lower probability",
            "n",
            "probability",
            &series_of(&rows, &reports),
        );
        ctx.write("report.svg", &svg)?;
    }
    Ok(())
}
