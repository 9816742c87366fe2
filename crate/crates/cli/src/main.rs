use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use adapted_ot::error::Error;
use adapted_ot::experiments::{
    default_reward_panel, make_limit, run_convergence, Family, FamilySpec,
};
use adapted_ot::format::sig12;
use adapted_ot::io::{read_scenario_file, scenario_json, LoadedScenario};
use adapted_ot::process::{validate, MetricBlock, MetricSpec, DEFAULT_TOL};
use adapted_ot::stopping::{enumerate_stopping_values, snell_value, RewardFile};
use adapted_ot::topologies::{martingale_check, prediction_process};

mod distance;
mod table;

use table::Table;

#[derive(Parser, Debug)]
#[command(name = "adapted-ot", version, about = "Adapted Wasserstein distances between scenario trees")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Transport exponent (p >= 1). Overrides the file's metric block.
    #[arg(short = 'p', global = true)]
    p: Option<f64>,
    /// Ground metric on states.
    #[arg(long, global = true, value_enum)]
    ground: Option<GroundArg>,
    /// Use min(1, rho) as ground distance.
    #[arg(long, global = true)]
    bounded: bool,
    /// Consistency tolerance for masses and martingale checks.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Write data here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum GroundArg {
    Euclidean,
    Absolute,
    Table,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// All distances between two scenario files.
    Distance {
        a: PathBuf,
        b: PathBuf,
        /// Write the bicausal linear program in LP format.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
        /// Write the nested-distance value table as CSV.
        #[arg(long)]
        value_table: Option<PathBuf>,
    },
    /// Optimal stopping value and rule.
    Stop {
        file: PathBuf,
        reward: PathBuf,
        /// Check against exhaustive enumeration of stopping rules.
        #[arg(long)]
        oracle: bool,
    },
    /// Convergence study of a process family against its limit.
    Converge {
        /// JSON study description; flags override its fields.
        spec: Option<PathBuf>,
        #[arg(long)]
        family: Option<String>,
        /// Number of family members, n = 0..steps [default: 8].
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        ratio: Option<f64>,
        /// Horizon of binomial_perturb.
        #[arg(long)]
        horizon: Option<usize>,
        /// Print the limit process as a scenario file instead.
        #[arg(long)]
        limit: bool,
    },
    /// Tree invariants and the martingale property of the prediction process.
    Validate { file: PathBuf },
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::DimensionMismatch { .. } | Error::HorizonMismatch { .. } => 3,
            Error::Solver(_) | Error::NotCausal(_) | Error::InfeasibleMarginals { .. } => 4,
            Error::InstanceTooLarge { .. } => 5,
            _ => 2,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Schedule length of `converge`; `ε_7 = 1e-7` clears the adapted threshold.
const DEFAULT_STEPS: usize = 8;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("ADAPTED_OT_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring ADAPTED_OT_THREADS={n}"),
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let g = &cli.global;
    if let Some(p) = g.p {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Failure::new(2, format!("-p {p}: p must be >= 1")));
        }
    }
    match cli.command {
        Command::Distance {
            ref a,
            ref b,
            ref dump_lp,
            ref value_table,
        } => {
            let (la, ma) = load(a)?;
            let (lb, mb) = load(b)?;
            // The first file's metric block wins; flags override it.
            let m = resolve_block(g, ma.or(mb))?;
            distance::run(g, &la.process, &lb.process, &m, dump_lp.as_deref(), value_table.as_deref())
        }
        Command::Stop {
            ref file,
            ref reward,
            oracle,
        } => cmd_stop(g, file, reward, oracle),
        Command::Converge {
            ref spec,
            ref family,
            steps,
            eps0,
            ratio,
            horizon,
            limit,
        } => {
            let mut study = match spec {
                Some(path) => StudyFile::read(path)?,
                None => StudyFile::default(),
            };
            study.family = family.clone().or(study.family);
            study.steps = steps.or(study.steps);
            study.eps0 = eps0.or(study.eps0);
            study.ratio = ratio.or(study.ratio);
            study.horizon = horizon.or(study.horizon);
            cmd_converge(g, study, limit)
        }
        Command::Validate { ref file } => cmd_validate(g, file),
    }
}

fn note_scale(path: &Path, s: &LoadedScenario) {
    if (s.scale - 1.0).abs() > DEFAULT_TOL {
        eprintln!(
            "note: {}: weights normalized by {}",
            path.display(),
            sig12(s.scale)
        );
    }
}

/// Loads a scenario file and keeps its raw metric block.
fn load(path: &Path) -> Result<(LoadedScenario, Option<MetricBlock>), Failure> {
    let file = read_scenario_file(path)?;
    let loaded = file.load()?;
    note_scale(path, &loaded);
    Ok((loaded, file.metric))
}

fn resolve_block(g: &Global, file: Option<MetricBlock>) -> Result<MetricSpec, Failure> {
    let mut block = file.unwrap_or_default();
    if let Some(p) = g.p {
        block.p = Some(p);
    }
    if let Some(ground) = g.ground {
        block.ground = Some(
            match ground {
                GroundArg::Euclidean => "euclidean",
                GroundArg::Absolute => "absolute",
                GroundArg::Table => "table",
            }
            .to_string(),
        );
    }
    if g.bounded {
        block.bounded = Some(true);
    }
    Ok(block.to_spec()?)
}

/// Pretty JSON with every float rounded to 12 significant digits.
fn json_text(value: serde_json::Value) -> String {
    fn round(v: serde_json::Value) -> serde_json::Value {
        use serde_json::Value;
        match v {
            Value::Number(n) if n.is_f64() => {
                let x = n.as_f64().expect("f64 number");
                serde_json::from_str(&sig12(x)).unwrap_or(Value::Null)
            }
            Value::Array(items) => Value::Array(items.into_iter().map(round).collect()),
            Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round(v))).collect()),
            other => other,
        }
    }
    serde_json::to_string_pretty(&round(value)).expect("serializable") + "\n"
}

/// Writes `text` to `--output` or stdout.
fn emit(g: &Global, text: &str) -> CmdResult {
    match &g.output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::new(2, format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::new(2, format!("cannot write stdout: {e}")))
        }
    }
}

fn cmd_stop(g: &Global, file: &Path, reward: &Path, oracle: bool) -> CmdResult {
    let (scenario, _) = load(file)?;
    let proc = &scenario.process;
    let text = fs::read_to_string(reward)
        .map_err(|e| Failure::new(2, format!("cannot read {}: {e}", reward.display())))?;
    let reward = RewardFile::parse(&text)?;
    let l = reward.evaluate(proc)?;
    let (value, rule) = snell_value(proc, &l)?;
    let enumerated = if oracle {
        Some(enumerate_stopping_values(proc, &l)?)
    } else {
        None
    };

    let first = l.convention.first();
    let mut nodes = Table::new(["node", "t", "prefix", "reward", "stop"]);
    for (id, node) in proc.nodes().iter().enumerate() {
        if node.depth < first {
            continue;
        }
        let prefix: Vec<String> = proc
            .prefix(id)
            .iter()
            .map(|x| {
                let c: Vec<String> = x.coords().iter().map(|&v| sig12(v)).collect();
                c.join(" ")
            })
            .collect();
        nodes.row([
            id.to_string(),
            node.depth.to_string(),
            format!("[{}]", prefix.join("; ")),
            sig12(l.value(id)),
            rule.stops_at(id).to_string(),
        ]);
    }

    let out = match g.format.unwrap_or(Format::Table) {
        Format::Json => {
            let rule_json: Vec<_> = proc
                .nodes()
                .iter()
                .enumerate()
                .filter(|(_, n)| n.depth >= first)
                .map(|(id, n)| {
                    serde_json::json!({
                        "node": id,
                        "t": n.depth,
                        "prefix": proc.prefix(id).iter().map(|x| x.coords().to_vec()).collect::<Vec<_>>(),
                        "reward": l.value(id),
                        "stop": rule.stops_at(id),
                    })
                })
                .collect();
            let mut obj = serde_json::json!({
                "value": value,
                "convention": l.convention,
                "maximize": l.maximize,
                "rule": rule_json,
            });
            if let Some(e) = enumerated {
                obj["oracle"] = serde_json::json!({"value": e, "delta": (value - e).abs()});
            }
            json_text(obj)
        }
        Format::Csv => {
            let mut s = format!("value,{}\n", sig12(value));
            if let Some(e) = enumerated {
                s += &format!("oracle,{}\ndelta,{}\n", sig12(e), sig12((value - e).abs()));
            }
            s + "\n" + &nodes.to_csv()
        }
        Format::Table => {
            let mut s = format!("value   {}\n", sig12(value));
            if let Some(e) = enumerated {
                s += &format!("oracle  {}\ndelta   {}\n", sig12(e), sig12((value - e).abs()));
            }
            s + "\n" + &nodes.render()
        }
    };
    emit(g, &out)?;
    if let Some(e) = enumerated {
        if (value - e).abs() > 1e-12 {
            return Err(Failure::new(
                6,
                format!("Snell value {} differs from enumeration {}", sig12(value), sig12(e)),
            ));
        }
    }
    Ok(())
}

/// Study description accepted by `converge`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyFile {
    family: Option<String>,
    steps: Option<usize>,
    eps0: Option<f64>,
    ratio: Option<f64>,
    horizon: Option<usize>,
    /// Scenario-file pattern with `{n}` for a custom family.
    pattern: Option<String>,
    /// Limit scenario file of a custom family.
    limit: Option<PathBuf>,
    metric: Option<MetricBlock>,
}

impl StudyFile {
    fn read(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::new(2, format!("cannot read {}: {e}", path.display())))?;
        let mut s: StudyFile = serde_json::from_str(&text)
            .map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?;
        // Relative scenario paths are relative to the study file.
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &s.pattern {
            if Path::new(p).is_relative() {
                s.pattern = Some(base.join(p).to_string_lossy().into_owned());
            }
        }
        if let Some(l) = &s.limit {
            if l.is_relative() {
                s.limit = Some(base.join(l));
            }
        }
        Ok(s)
    }
}

fn cmd_converge(g: &Global, study: StudyFile, emit_limit: bool) -> CmdResult {
    let name = study.family.as_deref().unwrap_or("epsilon_reveal");
    let family = match name {
        "custom" => Family::Custom {
            pattern: study
                .pattern
                .clone()
                .ok_or_else(|| Failure::new(2, "custom family needs `pattern`"))?,
            limit: study
                .limit
                .clone()
                .ok_or_else(|| Failure::new(2, "custom family needs `limit`"))?,
        },
        "binomial_perturb" => Family::BinomialPerturb {
            horizon: study.horizon.unwrap_or(3),
        },
        other => Family::from_name(other)?,
    };
    let mut spec = FamilySpec::new(family);
    if let Some(e) = study.eps0 {
        spec.eps0 = e;
    }
    if let Some(r) = study.ratio {
        spec.ratio = r;
    }
    spec.metric = resolve_block(g, study.metric)?;
    spec.validate()?;

    if emit_limit {
        return emit(g, &(scenario_json(&make_limit(&spec)?) + "\n"));
    }

    let limit = make_limit(&spec)?;
    let panel = default_reward_panel(limit.horizon());
    let report = run_convergence(&spec, study.steps.unwrap_or(DEFAULT_STEPS), &panel)?;
    let out = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => report.to_csv(),
        Format::Json => json_text(serde_json::to_value(&report).expect("serializable")),
        Format::Table => {
            let mut t = Table::new(std::iter::once("n".to_string()).chain(report.columns.clone()));
            for row in &report.rows {
                t.row(std::iter::once(row.n.to_string()).chain(row.values.iter().map(|&v| sig12(v))));
            }
            t.render()
        }
    };
    emit(g, &out)?;
    eprintln!("classification: {}", report.classification.label());
    if !report.violations.is_empty() {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        return Err(Failure::new(
            6,
            format!("{} invariant violations", report.violations.len()),
        ));
    }
    Ok(())
}

fn cmd_validate(g: &Global, file: &Path) -> CmdResult {
    let raw_file = read_scenario_file(file)?;
    let raw = raw_file.raw_process()?;
    let tree = validate(&raw, g.tol);
    // The prediction process needs a sound tree.
    let martingale = if tree.is_empty() {
        martingale_check(&prediction_process(&raw), g.tol)
    } else {
        Vec::new()
    };
    let ok = tree.is_empty() && martingale.is_empty();
    let out = match g.format.unwrap_or(Format::Table) {
        Format::Json => {
            let obj = serde_json::json!({
                "ok": ok,
                "horizon": raw.horizon(),
                "nodes": raw.nodes().len(),
                "violations": tree,
                "martingale": martingale,
            });
            json_text(obj)
        }
        Format::Csv => {
            let mut t = Table::new(["check", "detail"]);
            for v in &tree {
                t.row(["tree".to_string(), v.to_string()]);
            }
            for v in &martingale {
                t.row(["martingale".to_string(), format!("{v:?}")]);
            }
            t.to_csv()
        }
        Format::Table => {
            if ok {
                "OK\n".to_string()
            } else {
                let mut s = String::new();
                for v in &tree {
                    s += &format!("{v}\n");
                }
                for v in &martingale {
                    s += &format!(
                        "node {} (t = {}): martingale gap {}\n",
                        v.node,
                        v.depth,
                        sig12(v.gap)
                    );
                }
                s
            }
        }
    };
    emit(g, &out)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::new(
            6,
            format!(
                "{}: {} tree violations, {} martingale violations",
                file.display(),
                tree.len(),
                martingale.len()
            ),
        ))
    }
}
