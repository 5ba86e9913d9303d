//! Command-line front end.
//!
//! Every subcommand produces one [`Table`]; the table goes to stdout or to
//! `--output`, and its [`RunManifest`] goes to stderr or next to the output
//! file as `<output>.manifest.json`.

pub mod output;
pub mod verify;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    certify_with_engine, closed_form_chain, double_violation_region,
    max_chsh3_under_double_violation, pairwise_constraints, sweep, tradeoff_curve, uniform_grid,
    GridAxis, Objective, RegionReport, SweepSpec,
};
use crate::mc::{estimate_chsh, EstimateStatus};
use crate::scenario::{chsh_value, closed_form_chsh, default_config, ScenarioConfig};
use output::{Format, RunManifest, Table, Value};

pub const SEED_ENV: &str = "SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DEFAULT_SHOTS: u64 = 1_000_000;
const DEFAULT_PRECISION: usize = 10;
const DEFAULT_STEPS: usize = 101;

/// Resolution bounds `(min, max, default)`.
const PAIR12_RESOLUTION: (f64, f64, f64) = (1e-5, 0.01, 0.001);
const PAIR3D_RESOLUTION: (f64, f64, f64) = (0.005, 0.05, 0.01);
const TRIPLE_RESOLUTION: (f64, f64, f64) = (0.0025, 0.005, 0.005);

#[derive(Debug, Parser)]
#[command(
    name = "seqchsh",
    version,
    about = "CHSH nonlocality shared by sequential unsharp observers on a singlet"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Significant digits for numbers (printf %g style).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..=17))]
    pub precision: Option<u64>,
    /// TOML file whose keys mirror the long flag names; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the table here and the manifest to `<output>.manifest.json`.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the acceptance table; exits 1 if any row fails.
    Verify(VerifyArgs),
    /// CHSH value of one or all Bobs.
    Chsh(ChshArgs),
    /// Violation regions of a pair of Bobs or the triple-violation bound.
    Region(RegionArgs),
    /// Optimal pointer quality/precision curve and the first Bob's CHSH.
    Tradeoff(TradeoffArgs),
    /// Monte Carlo CHSH estimates with standard errors.
    Montecarlo(MonteCarloArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify(_) => "verify",
            Command::Chsh(_) => "chsh",
            Command::Region(_) => "region",
            Command::Tradeoff(_) => "tradeoff",
            Command::Montecarlo(_) => "montecarlo",
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Fewer Monte Carlo seeds and shots.
    #[arg(long)]
    pub quick: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Closed,
    Mc,
}

impl MethodArg {
    fn as_str(self) -> &'static str {
        match self {
            MethodArg::Exact => "exact",
            MethodArg::Closed => "closed",
            MethodArg::Mc => "mc",
        }
    }
}

#[derive(Debug, Args)]
pub struct ChshArgs {
    /// Comma-separated sharpness values in (0, 1], one per Bob.
    #[arg(long, value_parser = parse_lambdas)]
    pub lambdas: Option<Lambdas>,
    /// 1-based Bob index; all Bobs when omitted.
    #[arg(long)]
    pub bob: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Trajectories for `--method mc`.
    #[arg(long)]
    pub shots: Option<u64>,
    /// Seed for `--method mc`; the SEED environment variable applies when absent.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Pair of Bobs `i,j` that must both violate while the remaining one does not.
    #[arg(long, value_parser = parse_pair, conflicts_with = "triple")]
    pub pair: Option<(usize, usize)>,
    /// Maximize the third Bob's CHSH subject to the first two violating.
    #[arg(long)]
    pub triple: bool,
    /// Grid step. Pair 1,2: [1e-5, 0.01]; pairs with Bob 3: [0.005, 0.05]; triple: [0.0025, 0.005].
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Also emit every feasible grid cell.
    #[arg(long)]
    pub cells: bool,
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    /// Number of evenly spaced sharpness values on [0, 1].
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[arg(long, value_parser = parse_lambdas)]
    pub lambdas: Option<Lambdas>,
    #[arg(long)]
    pub bob: Option<usize>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lambdas(pub Vec<f64>);

/// Parses `0.75,1` into sharpness values in (0, 1].
pub fn parse_lambdas(s: &str) -> Result<Lambdas, String> {
    let values = s
        .split(',')
        .map(|t| {
            let t = t.trim();
            let v: f64 = t
                .parse()
                .map_err(|_| format!("'{t}' is not a number"))?;
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("sharpness {t} outside (0, 1]"));
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Lambdas(values))
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let parsed: Vec<usize> = parts
        .iter()
        .map(|p| p.parse().map_err(|_| format!("'{p}' is not a Bob index")))
        .collect::<Result<_, _>>()?;
    match parsed[..] {
        [i, j] if (1..=3).contains(&i) && (1..=3).contains(&j) && i < j => Ok((i, j)),
        _ => Err(format!("expected i,j with 1 <= i < j <= 3, got '{s}'")),
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Keys from the config file, with a subcommand table overriding top-level keys.
struct FileConfig {
    top: toml::Table,
    section: toml::Table,
}

impl FileConfig {
    fn empty() -> Self {
        Self {
            top: toml::Table::new(),
            section: toml::Table::new(),
        }
    }

    fn load(path: &Path, command: &str) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut top: toml::Table = text
            .parse()
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let section = match top.remove(command) {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(CliError::Usage(format!("config key '{command}' must be a table"))),
            None => toml::Table::new(),
        };
        Ok(Self { top, section })
    }

    fn get(&self, key: &str) -> Option<&toml::Value> {
        self.section.get(key).or_else(|| self.top.get(key))
    }

    fn bad(key: &str, want: &str) -> CliError {
        CliError::Usage(format!("config key '{key}' must be {want}"))
    }

    fn u64(&self, key: &str) -> CliResult<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.as_integer()
                    .and_then(|i| u64::try_from(i).ok())
                    .ok_or_else(|| Self::bad(key, "a non-negative integer"))
            })
            .transpose()
    }

    fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.as_float()
                    .or_else(|| v.as_integer().map(|i| i as f64))
                    .ok_or_else(|| Self::bad(key, "a number"))
            })
            .transpose()
    }

    fn bool(&self, key: &str) -> CliResult<Option<bool>> {
        self.get(key)
            .map(|v| v.as_bool().ok_or_else(|| Self::bad(key, "a boolean")))
            .transpose()
    }

    fn str(&self, key: &str) -> CliResult<Option<String>> {
        self.get(key)
            .map(|v| match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                toml::Value::Array(items) => items
                    .iter()
                    .map(|x| match x {
                        toml::Value::Integer(i) => Ok(i.to_string()),
                        toml::Value::Float(f) => Ok(f.to_string()),
                        _ => Err(Self::bad(key, "a list of numbers")),
                    })
                    .collect::<CliResult<Vec<_>>>()
                    .map(|v| v.join(",")),
                _ => Err(Self::bad(key, "a string or list")),
            })
            .transpose()
    }

    fn lambdas(&self) -> CliResult<Option<Lambdas>> {
        self.str("lambdas")?
            .map(|s| parse_lambdas(&s).map_err(|e| CliError::Usage(format!("config lambdas: {e}"))))
            .transpose()
    }

    fn value_enum<T: ValueEnum>(&self, key: &str) -> CliResult<Option<T>> {
        self.str(key)?
            .map(|s| T::from_str(&s, false).map_err(|_| Self::bad(key, "a known variant")))
            .transpose()
    }
}

/// Parameters after merging flags, environment and config file.
struct Resolved {
    format: Format,
    precision: usize,
    params: BTreeMap<String, String>,
}

impl Resolved {
    fn set(&mut self, key: &str, value: impl ToString) {
        self.params.insert(key.to_owned(), value.to_string());
    }
}

fn lambdas_text(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn resolve_seed(flag: Option<u64>, file: &FileConfig, r: &mut Resolved) -> CliResult<u64> {
    let env = match std::env::var(SEED_ENV) {
        Ok(s) => Some(s.trim().parse::<u64>().map_err(|_| {
            CliError::Usage(format!("{SEED_ENV}='{s}' is not a non-negative integer"))
        })?),
        Err(_) => None,
    };
    let (seed, source) = match (flag, env, file.u64("seed")?) {
        (Some(s), _, _) => (s, "flag"),
        (None, Some(s), _) => (s, "env"),
        (None, None, Some(s)) => (s, "config"),
        (None, None, None) => (0, "default"),
    };
    if let Some(e) = env {
        r.set("seed_env", e);
    }
    r.set("seed", seed);
    r.set("seed_source", source);
    Ok(seed)
}

fn required_lambdas(flag: Option<Lambdas>, file: &FileConfig) -> CliResult<Vec<f64>> {
    match flag {
        Some(l) => Ok(l.0),
        None => file
            .lambdas()?
            .map(|l| l.0)
            .ok_or_else(|| CliError::Usage("--lambdas is required".into())),
    }
}

fn requested_bobs(cfg: &ScenarioConfig, bob: Option<usize>) -> CliResult<Vec<usize>> {
    match bob {
        Some(b) => {
            cfg.check_bob(b)?;
            Ok(vec![b])
        }
        None => Ok((1..=cfg.n_bobs()).collect()),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Failure(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let command = cli.command.name();
    let file = match &cli.config {
        Some(path) => FileConfig::load(path, command)?,
        None => FileConfig::empty(),
    };
    let format = match cli.format {
        Some(f) => f,
        None => file.value_enum("format")?.unwrap_or(Format::Csv),
    };
    let precision = match cli.precision {
        Some(p) => p as usize,
        None => match file.u64("precision")? {
            Some(p) if (1..=17).contains(&p) => p as usize,
            Some(p) => return Err(CliError::Usage(format!("precision {p} outside [1, 17]"))),
            None => DEFAULT_PRECISION,
        },
    };
    let mut r = Resolved {
        format,
        precision,
        params: BTreeMap::new(),
    };
    r.set("format", format.as_str());
    r.set("precision", precision);
    if let Some(path) = &cli.config {
        r.set("config", path.display());
    }

    let (table, code) = match cli.command {
        Command::Verify(a) => cmd_verify(a, &file, &mut r)?,
        Command::Chsh(a) => (cmd_chsh(a, &file, &mut r, stderr)?, EXIT_OK),
        Command::Region(a) => (cmd_region(a, &file, &mut r)?, EXIT_OK),
        Command::Tradeoff(a) => (cmd_tradeoff(a, &file, &mut r)?, EXIT_OK),
        Command::Montecarlo(a) => (cmd_montecarlo(a, &file, &mut r, stderr)?, EXIT_OK),
    };

    let content = table.render(r.format, r.precision);
    let manifest = RunManifest::new(command, r.params, &content);
    match &cli.output {
        Some(path) => {
            std::fs::write(path, &content)?;
            let mut mpath = path.as_os_str().to_owned();
            mpath.push(".manifest.json");
            let f = std::fs::File::create(PathBuf::from(mpath))?;
            manifest.write_json(std::io::BufWriter::new(f))?;
        }
        None => {
            stdout.write_all(content.as_bytes())?;
            manifest.write_json(&mut *stderr)?;
        }
    }
    Ok(code)
}

fn cmd_verify(a: VerifyArgs, file: &FileConfig, r: &mut Resolved) -> CliResult<(Table, i32)> {
    let quick = a.quick || file.bool("quick")?.unwrap_or(false);
    let opts = if quick {
        verify::VerifyOptions::quick()
    } else {
        verify::VerifyOptions::default()
    };
    r.set("quick", quick);
    r.set("mc_seeds", opts.mc_seeds);
    r.set("mc_shots", opts.mc_shots);
    let rows = verify::run(opts).map_err(|e| CliError::Failure(e.to_string()))?;
    let mut t = Table::new(&["id", "claim", "measured", "target", "tolerance", "status"]);
    let mut all = true;
    for row in rows {
        all &= row.pass;
        t.push(vec![
            row.id.into(),
            row.claim.into(),
            row.measured.into(),
            row.target.into(),
            row.tolerance.into(),
            (if row.pass { "PASS" } else { "FAIL" }).into(),
        ]);
    }
    Ok((t, if all { EXIT_OK } else { EXIT_FAILURE }))
}

fn cmd_chsh(
    a: ChshArgs,
    file: &FileConfig,
    r: &mut Resolved,
    stderr: &mut dyn Write,
) -> CliResult<Table> {
    let lambdas = required_lambdas(a.lambdas, file)?;
    let bob = match a.bob {
        Some(b) => Some(b),
        None => file.u64("bob")?.map(|b| b as usize),
    };
    let method = match a.method {
        Some(m) => m,
        None => file.value_enum("method")?.unwrap_or(MethodArg::Exact),
    };
    let cfg = default_config(&lambdas)?;
    let bobs = requested_bobs(&cfg, bob)?;
    r.set("lambdas", lambdas_text(&lambdas));
    r.set("bob", bob.map_or("all".to_owned(), |b| b.to_string()));
    r.set("method", method.as_str());

    let mut t = Table::new(&["bob", "lambda_vector", "chsh", "method", "stderr"]);
    match method {
        MethodArg::Exact | MethodArg::Closed => {
            for b in bobs {
                let v = if method == MethodArg::Exact {
                    chsh_value(&cfg, b)?.chsh_value
                } else {
                    closed_form_chsh(&lambdas, b)?
                };
                t.push(vec![
                    b.into(),
                    Value::NumList(lambdas.clone()),
                    v.into(),
                    method.as_str().into(),
                    Value::Null,
                ]);
            }
        }
        MethodArg::Mc => {
            let shots = shots_param(a.shots, file, r)?;
            let seed = resolve_seed(a.seed, file, r)?;
            for b in bobs {
                let e = estimate_chsh(&cfg, b, shots, seed)?;
                warn_low_shots(&e.status, shots, stderr)?;
                t.push(vec![
                    b.into(),
                    Value::NumList(lambdas.clone()),
                    e.estimate.into(),
                    method.as_str().into(),
                    e.standard_error.into(),
                ]);
            }
        }
    }
    Ok(t)
}

fn shots_param(flag: Option<u64>, file: &FileConfig, r: &mut Resolved) -> CliResult<u64> {
    let shots = match flag {
        Some(s) => s,
        None => file.u64("shots")?.unwrap_or(DEFAULT_SHOTS),
    };
    if shots == 0 {
        return Err(CliError::Usage("--shots must be positive".into()));
    }
    r.set("shots", shots);
    Ok(shots)
}

fn warn_low_shots(status: &EstimateStatus, shots: u64, stderr: &mut dyn Write) -> CliResult<()> {
    if *status == EstimateStatus::LowShots {
        writeln!(stderr, "warning: {shots} shots; the standard error is unreliable")?;
    }
    Ok(())
}

fn cmd_montecarlo(
    a: MonteCarloArgs,
    file: &FileConfig,
    r: &mut Resolved,
    stderr: &mut dyn Write,
) -> CliResult<Table> {
    let lambdas = required_lambdas(a.lambdas, file)?;
    let bob = match a.bob {
        Some(b) => Some(b),
        None => file.u64("bob")?.map(|b| b as usize),
    };
    let cfg = default_config(&lambdas)?;
    let bobs = requested_bobs(&cfg, bob)?;
    r.set("lambdas", lambdas_text(&lambdas));
    r.set("bob", bob.map_or("all".to_owned(), |b| b.to_string()));
    let shots = shots_param(a.shots, file, r)?;
    let seed = resolve_seed(a.seed, file, r)?;

    let mut t = Table::new(&[
        "bob",
        "lambda_vector",
        "shots",
        "seed",
        "estimate",
        "stderr",
        "exact",
        "z_score",
        "correlators",
        "status",
    ]);
    for b in bobs {
        let e = estimate_chsh(&cfg, b, shots, seed)?;
        warn_low_shots(&e.status, shots, stderr)?;
        let exact = chsh_value(&cfg, b)?.chsh_value;
        let z = (e.estimate - exact) / e.standard_error;
        let status = match e.status {
            EstimateStatus::Ok => "ok",
            EstimateStatus::LowShots => "low_shots",
        };
        t.push(vec![
            b.into(),
            Value::NumList(lambdas.clone()),
            shots.into(),
            seed.into(),
            e.estimate.into(),
            e.standard_error.into(),
            exact.into(),
            z.into(),
            Value::NumList(e.correlators.iter().flatten().copied().collect()),
            status.into(),
        ]);
    }
    Ok(t)
}

fn cmd_tradeoff(a: TradeoffArgs, file: &FileConfig, r: &mut Resolved) -> CliResult<Table> {
    let steps = match a.steps {
        Some(s) => s,
        None => file.u64("steps")?.map_or(DEFAULT_STEPS, |s| s as usize),
    };
    r.set("steps", steps);
    let grid = uniform_grid(steps)?;
    let mut t = Table::new(&["lambda", "quality_f", "precision_g", "f2_plus_g2", "chsh1"]);
    for row in tradeoff_curve(&grid)? {
        t.push(vec![
            row.lambda.into(),
            row.quality_f.into(),
            row.precision_g.into(),
            (row.quality_f.powi(2) + row.precision_g.powi(2)).into(),
            row.chsh1.into(),
        ]);
    }
    Ok(t)
}

fn check_bounds(resolution: f64, (lo, hi, _): (f64, f64, f64)) -> CliResult<()> {
    if resolution.is_finite() && resolution >= lo && resolution <= hi {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "resolution {resolution} outside [{lo}, {hi}]"
        )))
    }
}

const REGION_COLUMNS: [&str; 5] = ["record", "lambda_vector", "chsh_vector", "value", "note"];

fn region_row(record: &str, lambdas: Vec<f64>, chsh: Vec<f64>, value: Value, note: String) -> Vec<Value> {
    vec![
        record.into(),
        Value::NumList(lambdas),
        Value::NumList(chsh),
        value,
        note.into(),
    ]
}

fn cmd_region(a: RegionArgs, file: &FileConfig, r: &mut Resolved) -> CliResult<Table> {
    let pair = match a.pair {
        Some(p) => Some(p),
        None => file
            .str("pair")?
            .map(|s| parse_pair(&s).map_err(CliError::Usage))
            .transpose()?,
    };
    let triple = a.triple || file.bool("triple")?.unwrap_or(false);
    let resolution = match a.resolution {
        Some(x) => Some(x),
        None => file.f64("resolution")?,
    };
    let cells = a.cells || file.bool("cells")?.unwrap_or(false);
    r.set("cells", cells);
    match (pair, triple) {
        (Some(_), true) => Err(CliError::Usage("--pair and --triple are exclusive".into())),
        (None, false) => Err(CliError::Usage("one of --pair or --triple is required".into())),
        (None, true) => {
            let res = resolution.unwrap_or(TRIPLE_RESOLUTION.2);
            check_bounds(res, TRIPLE_RESOLUTION)?;
            r.set("triple", true);
            r.set("resolution", res);
            region_triple(res, cells)
        }
        (Some((1, 2)), false) => {
            let res = resolution.unwrap_or(PAIR12_RESOLUTION.2);
            check_bounds(res, PAIR12_RESOLUTION)?;
            r.set("pair", "1,2");
            r.set("resolution", res);
            region_pair12(res, cells)
        }
        (Some(p), false) => {
            let res = resolution.unwrap_or(PAIR3D_RESOLUTION.2);
            check_bounds(res, PAIR3D_RESOLUTION)?;
            r.set("pair", format!("{},{}", p.0, p.1));
            r.set("resolution", res);
            region_pair3d(p, res, cells)
        }
    }
}

fn push_cells(t: &mut Table, report: &RegionReport) {
    for c in &report.cells {
        t.push(region_row("cell", c.lambdas.clone(), c.chsh.clone(), Value::Null, String::new()));
    }
}

/// Two-Bob chain with a sharp second Bob; a third Bob can always respect the
/// classical bound by being unsharp enough, so this is the (1, 2) region.
fn region_pair12(res: f64, cells: bool) -> CliResult<Table> {
    let report = double_violation_region(res)?;
    let constraints = pairwise_constraints((1, 2));
    let cert = certify_with_engine(&report, &constraints[..2])?;
    let mut t = Table::new(&REGION_COLUMNS);
    let (lo_edge, hi_edge) = crate::scenario::violation_window_bob1();
    match report.axis_bounds(0) {
        Some((lo, hi)) => t.push(region_row(
            "interval",
            vec![lo, hi],
            vec![],
            Value::Int(report.cells.len() as i64),
            format!("lambda1 grid interval with Bob2 sharp; value = feasible cells of {}", report.evaluated),
        )),
        None => t.push(region_row("interval", vec![], vec![], Value::Int(0), "EMPTY".into())),
    }
    for (record, edge, note) in [
        ("analytic_lower", lo_edge, "Bob1 at the classical bound"),
        ("analytic_upper", hi_edge, "Bob2 at the classical bound"),
    ] {
        let l = vec![edge, 1.0];
        t.push(region_row(record, l.clone(), closed_form_chain(&l), edge.into(), note.into()));
    }
    if let (Some(c), Some(v)) = (&report.extremal, report.extremal_value) {
        t.push(region_row(
            "extremal",
            c.lambdas.clone(),
            c.chsh.clone(),
            v.into(),
            "maximizes min(CHSH1, CHSH2)".into(),
        ));
    }
    t.push(certificate_row(&cert));
    if cells {
        push_cells(&mut t, &report);
    }
    Ok(t)
}

fn certificate_row(cert: &crate::analysis::EngineCertificate) -> Vec<Value> {
    region_row(
        "engine_check",
        vec![],
        vec![],
        cert.max_deviation.into(),
        format!(
            "{} cells re-evaluated by the density-matrix engine; {}; value = max deviation",
            cert.checked,
            if cert.all_feasible { "all feasible" } else { "SOME INFEASIBLE" }
        ),
    )
}

fn region_pair3d(pair: (usize, usize), res: f64, cells: bool) -> CliResult<Table> {
    let constraints = pairwise_constraints(pair);
    let report = sweep(&SweepSpec {
        axes: vec![GridAxis::unit(res)?; 3],
        constraints: constraints.clone(),
        objective: Objective::MinChsh(vec![pair.0, pair.1]),
    })?;
    let third = 6 - pair.0 - pair.1;
    let mut t = Table::new(&REGION_COLUMNS);
    if report.is_empty() {
        t.push(region_row(
            "region",
            vec![],
            vec![],
            Value::Int(0),
            format!("EMPTY: no grid cell of {} has Bob{} and Bob{} violating", report.evaluated, pair.0, pair.1),
        ));
        return Ok(t);
    }
    for axis in 0..3 {
        let (lo, hi) = report.axis_bounds(axis).expect("nonempty");
        t.push(region_row(
            &format!("bounds_lambda{}", axis + 1),
            vec![lo, hi],
            vec![],
            Value::Int(report.cells.len() as i64),
            format!(
                "Bob{} and Bob{} violate, Bob{third} does not; value = feasible cells of {}",
                pair.0, pair.1, report.evaluated
            ),
        ));
    }
    let witness = report.extremal.clone().expect("nonempty");
    t.push(region_row(
        "extremal",
        witness.lambdas.clone(),
        witness.chsh.clone(),
        report.extremal_value.into(),
        format!("maximizes min(CHSH{}, CHSH{})", pair.0, pair.1),
    ));
    let single = RegionReport {
        cells: vec![witness],
        ..report.clone()
    };
    t.push(certificate_row(&certify_with_engine(&single, &constraints)?));
    if cells {
        push_cells(&mut t, &report);
    }
    Ok(t)
}

fn region_triple(res: f64, cells: bool) -> CliResult<Table> {
    let rep = max_chsh3_under_double_violation(res)?;
    let mut t = Table::new(&REGION_COLUMNS);
    let grid = rep.region.extremal.clone().expect("nonempty region");
    t.push(region_row(
        "grid_max",
        grid.lambdas.clone(),
        grid.chsh.clone(),
        rep.region.extremal_value.into(),
        format!("max CHSH3 over {} grid cells with Bob1 and Bob2 violating", rep.region.cells.len()),
    ));
    let bp = rep.boundary_point.to_vec();
    t.push(region_row(
        "analytic_boundary",
        bp.clone(),
        closed_form_chain(&bp),
        rep.boundary_closed_form.into(),
        format!(
            "Bob1 and Bob2 at the classical bound, Bob3 sharp; engine value {}",
            output::fmt_g(rep.boundary_engine, 10)
        ),
    ));
    let ip = rep.inner_point.to_vec();
    t.push(region_row(
        "inner_point",
        ip.clone(),
        closed_form_chain(&ip),
        rep.inner_engine.into(),
        "one grid step inside the double-violation set (engine value)".into(),
    ));
    t.push(region_row(
        "supremum",
        bp.clone(),
        closed_form_chain(&bp),
        rep.supremum.into(),
        format!("sup CHSH3 under double violation; margin to 2 = {}", output::fmt_g(rep.margin, 10)),
    ));
    let verdict = if rep.triple_violation_possible() {
        "FEASIBLE: some grid cell has all three Bobs violating"
    } else {
        "INFEASIBLE (consistent with the analytic bound): no triple violation"
    };
    t.push(region_row("triple_violation", vec![], vec![], rep.margin.into(), verdict.into()));
    if cells {
        push_cells(&mut t, &rep.region);
    }
    Ok(t)
}
