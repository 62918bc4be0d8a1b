//! Batch front end: JSON run configurations in, JSON (or CSV) result
//! documents out.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::bounds::{self, BoundResult, Direction, Sharpness};
use crate::dist::{Distribution, Family, TailMonotonicity};
use crate::error::Error;
use crate::oracle::{self, CornerSpec, RaConfig, SampleFunctional, TailSpec};
use crate::sharing::{self, to_f64, SharingProblem};
use crate::simplex::SearchConfig;

pub const SCHEMA_VERSION: u32 = 1;
pub const OUTPUT_DIR_ENV: &str = "ROBUSTRISK_OUTPUT_DIR";
/// Largest bound-oracle gap accepted as certification.
pub const TAU_SHARP: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Bound,
    Ird,
    Qdiff,
    Share,
    Sharpness,
    Compare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Bound => "bound",
            Command::Ird => "ird",
            Command::Qdiff => "qdiff",
            Command::Share => "share",
            Command::Sharpness => "sharpness",
            Command::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionSel {
    Sup,
    Inf,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    /// `s=0.05:0.95:0.05`
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = || CliError::Validation(format!("sweep '{text}' must look like s=start:stop:step"));
        let (param, range) = text.split_once('=').ok_or_else(bad)?;
        let nums: Vec<f64> = range.split(':').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let [start, stop, step] = nums[..] else { return Err(bad()) };
        let sw = Sweep { param: param.trim().to_string(), start, stop, step };
        sw.points()?;
        Ok(sw)
    }

    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if self.param != "s" && self.param != "r" {
            return Err(CliError::Validation(format!("sweep parameter must be r or s, got '{}'", self.param)));
        }
        if !(self.step > 0.0) || !(self.stop >= self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::Validation("sweep needs start <= stop and step > 0".into()));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(CliError::Validation("sweep has too many points".into()));
        }
        // rounding keeps 0.05 + 2*0.05 printing as 0.15
        Ok((0..count).map(|k| ((self.start + k as f64 * self.step) * 1e12).round() / 1e12).collect())
    }
}

fn one() -> u32 {
    SCHEMA_VERSION
}

fn yes() -> bool {
    true
}

fn tau_default() -> f64 {
    TAU_SHARP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "one")]
    pub schema_version: u32,
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub marginals: Vec<Value>,
    #[serde(default)]
    pub direction: Option<DirectionSel>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub r1: Option<f64>,
    #[serde(default)]
    pub s1: Option<f64>,
    #[serde(default)]
    pub r2: Option<f64>,
    #[serde(default)]
    pub s2: Option<f64>,
    #[serde(default)]
    pub total: Option<Vec<f64>>,
    /// CSV file with the total sample in its first column.
    #[serde(default)]
    pub total_csv: Option<PathBuf>,
    #[serde(default)]
    pub betas: Option<Vec<f64>>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub m_param: Option<f64>,
    #[serde(default = "yes")]
    pub use_oracle: bool,
    #[serde(default)]
    pub oracle: RaConfig,
    #[serde(default)]
    pub exhaustive_m: Option<usize>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default = "tau_default")]
    pub tau_sharp: f64,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{0}")]
    Compute(#[from] Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 1,
            CliError::Compute(_) | CliError::Io(_) => 2,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse_error",
            CliError::Validation(_) => "validation_error",
            CliError::Compute(e) => e.code(),
            CliError::Io(_) => "io_error",
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Parse and validate a run configuration. Defaults are applied; the
/// command-specific completeness checks need `command` to be set, either in
/// the text or by the caller through `parse_config_for`.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| CliError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(invalid(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", cfg.schema_version)));
    }
    if cfg.command.is_some() {
        validate(&cfg)?;
    }
    Ok(cfg)
}

pub fn parse_config_for(text: &str, command: Command) -> Result<RunConfig, CliError> {
    let mut cfg = parse_config(text)?;
    match cfg.command {
        Some(c) if c != command => {
            return Err(invalid(format!("config is for '{}', not '{}'", c.name(), command.name())));
        }
        Some(_) => {}
        None => {
            cfg.command = Some(command);
            validate(&cfg)?;
        }
    }
    Ok(cfg)
}

fn require(v: Option<f64>, name: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| invalid(format!("{name} required")))
}

/// Builds the marginal list, expanding `repeat`.
pub fn parse_marginals(specs: &[Value]) -> Result<Vec<Distribution>, CliError> {
    let mut out = Vec::new();
    for (idx, spec) in specs.iter().enumerate() {
        let field = |msg: String| invalid(format!("marginals[{idx}]: {msg}"));
        let Value::Object(map) = spec else { return Err(field("expected an object".into())) };
        let mut rest: Map<String, Value> = map.clone();
        let repeat = match rest.remove("repeat") {
            None => 1,
            Some(v) => v.as_u64().filter(|&k| k >= 1).ok_or_else(|| field("repeat must be a positive integer".into()))? as usize,
        };
        let tail: Option<TailMonotonicity> = rest
            .remove("tail")
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| field(format!("tail: {e}")))?;
        let continuous = match rest.remove("continuous") {
            None => None,
            Some(Value::Bool(b)) => Some(b),
            Some(_) => return Err(field("continuous must be a boolean".into())),
        };
        let d = if rest.get("family").and_then(Value::as_str) == Some("empirical") {
            rest.remove("family");
            let values = rest.remove("values").ok_or_else(|| field("empirical needs values".into()))?;
            if let Some(k) = rest.keys().next() {
                return Err(field(format!("unknown field '{k}'")));
            }
            let values: Vec<f64> = serde_json::from_value(values).map_err(|e| field(format!("values: {e}")))?;
            Distribution::empirical(values).map_err(|e| field(e.to_string()))?
        } else {
            let fam: Family = serde_json::from_value(Value::Object(rest.clone())).map_err(|e| field(e.to_string()))?;
            let known = serde_json::to_value(fam).expect("family serialises");
            if let Some(k) = rest.keys().find(|k| known.get(k.as_str()).is_none()) {
                return Err(field(format!("unknown field '{k}'")));
            }
            Distribution::parametric(fam).map_err(|e| field(e.to_string()))?
        };
        let mut d = match tail {
            Some(t) => d.with_tail(t),
            None => d,
        };
        if let Some(c) = continuous {
            d = d.with_continuous(c);
        }
        out.extend(std::iter::repeat_n(d, repeat));
    }
    Ok(out)
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let cmd = cfg.command.ok_or_else(|| invalid("command required"))?;
    cfg.search.validate().map_err(|e| invalid(format!("search: {e}")))?;
    cfg.oracle.validate().map_err(|e| invalid(format!("oracle: {e}")))?;
    if !(cfg.tau_sharp >= 0.0) {
        return Err(invalid("tau_sharp must be nonnegative"));
    }
    if cmd != Command::Share {
        if cfg.marginals.is_empty() {
            return Err(invalid("marginals required"));
        }
        parse_marginals(&cfg.marginals)?;
    }
    if cfg.output.format == Format::Csv && !matches!(cmd, Command::Compare | Command::Share) {
        return Err(invalid("csv output is available for compare and share only"));
    }
    match cmd {
        Command::Bound | Command::Sharpness => {
            require(cfg.r, "r")?;
            require(cfg.s, "s")?;
        }
        Command::Ird => {
            for (v, n) in [(cfg.r1, "r1"), (cfg.s1, "s1"), (cfg.r2, "r2"), (cfg.s2, "s2")] {
                require(v, n)?;
            }
        }
        Command::Qdiff => {
            require(cfg.r, "r")?;
            require(cfg.s, "s")?;
        }
        Command::Compare => {
            let sweep = cfg.sweep.as_ref();
            if sweep.map(|s| s.param.as_str()) != Some("r") {
                require(cfg.r, "r")?;
            }
            if sweep.map(|s| s.param.as_str()) != Some("s") {
                require(cfg.s, "s")?;
            }
            if let Some(s) = sweep {
                s.points()?;
            }
        }
        Command::Share => {
            if cfg.total.is_none() == cfg.total_csv.is_none() {
                return Err(invalid("exactly one of total or total_csv required"));
            }
            let betas = cfg.betas.as_ref().ok_or_else(|| invalid("betas required"))?;
            if betas.is_empty() || betas.iter().any(|&b| !(b > 0.0)) {
                return Err(invalid("beta_i > 0 required"));
            }
            let beta: f64 = betas.iter().sum();
            if !(beta > 0.0 && beta < 1.0) {
                return Err(invalid("beta in (0,1)"));
            }
        }
    }
    Ok(())
}

fn read_total_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Io(e.to_string()))?;
        let Some(cell) = rec.get(0) else { continue };
        match cell.trim().parse::<f64>() {
            Ok(v) => out.push(v),
            // a header row is tolerated
            Err(_) if i == 0 => {}
            Err(_) => return Err(invalid(format!("total_csv row {}: '{cell}' is not a number", i + 1))),
        }
    }
    Ok(out)
}

fn sharpness_str(s: Sharpness) -> &'static str {
    match s {
        Sharpness::CertifiedByCondition => "certified_by_condition",
        Sharpness::CertifiedByOracle => "certified_by_oracle",
        Sharpness::Unknown => "unknown",
    }
}

fn bound_json(b: &BoundResult, oracle: Option<f64>) -> Value {
    let mut v = serde_json::to_value(b).expect("bound result serialises");
    v["sharp"] = json!(sharpness_str(b.sharp));
    v["oracle_value"] = json!(oracle);
    v
}

fn ra_dir(ms: &[Distribution], r: f64, s: f64, dir: Direction, cfg: &RaConfig) -> crate::Result<f64> {
    Ok(match dir {
        Direction::Sup => oracle::ra_sup_rvar(ms, r, s, cfg)?.0,
        Direction::Inf => oracle::ra_inf_rvar(ms, r, s, cfg)?.0,
    })
}

fn rvar_bound(ms: &[Distribution], r: f64, s: f64, dir: Direction, cfg: &RunConfig) -> crate::Result<Value> {
    let mut b = match dir {
        Direction::Sup => bounds::upper_bound_rvar(ms, r, s, &cfg.search)?,
        Direction::Inf => bounds::lower_bound_rvar(ms, r, s, &cfg.search)?,
    };
    let oracle = if cfg.use_oracle { Some(ra_dir(ms, r, s, dir, &cfg.oracle)?) } else { None };
    if let Some(o) = oracle {
        b.certify_with_oracle(o, cfg.tau_sharp);
    }
    Ok(bound_json(&b, oracle))
}

fn directions(sel: DirectionSel) -> Vec<(&'static str, Direction)> {
    match sel {
        DirectionSel::Sup => vec![("sup", Direction::Sup)],
        DirectionSel::Inf => vec![("inf", Direction::Inf)],
        DirectionSel::Both => vec![("sup", Direction::Sup), ("inf", Direction::Inf)],
    }
}

fn run_bound(cfg: &mut RunConfig, ms: &[Distribution]) -> Result<Value, CliError> {
    let (r, s) = (cfg.r.unwrap(), cfg.s.unwrap());
    let sel = *cfg.direction.get_or_insert(DirectionSel::Both);
    let mut out = Map::new();
    for (name, dir) in directions(sel) {
        out.insert(name.into(), rvar_bound(ms, r, s, dir, cfg)?);
    }
    Ok(Value::Object(out))
}

fn run_ird(cfg: &mut RunConfig, ms: &[Distribution]) -> Result<Value, CliError> {
    let (r1, s1, r2, s2) = (cfg.r1.unwrap(), cfg.s1.unwrap(), cfg.r2.unwrap(), cfg.s2.unwrap());
    let mut b = bounds::ird_sup(ms, r1, s1, r2, s2, &cfg.search)?;
    let mut oracle = None;
    // the corner construction needs non-degenerate outer blocks
    if cfg.use_oracle && s1 > 0.0 && r2 < 1.0 {
        let spec = CornerSpec {
            lower: TailSpec::RaOptimized { window: Some((r1, s1)) },
            upper: TailSpec::RaOptimized { window: Some((r2, s2)) },
        };
        let c = oracle::corner_coupling(ms, s1, r2, spec, &cfg.oracle)?;
        let v = c.evaluate(&SampleFunctional::Ird { r1, s1, r2, s2 });
        b.certify_with_oracle(v, cfg.tau_sharp);
        oracle = Some(v);
    }
    Ok(json!({ "sup": bound_json(&b, oracle) }))
}

/// Exhaustive size when every marginal is a small empirical law of a common
/// size, unless set explicitly.
fn resolve_exhaustive_m(cfg: &mut RunConfig, ms: &[Distribution]) -> Option<usize> {
    if cfg.exhaustive_m.is_none() {
        let sizes: Vec<usize> = ms.iter().filter_map(|d| d.sample().map(<[f64]>::len)).collect();
        if sizes.len() == ms.len() && ms.len() <= 3 && sizes.windows(2).all(|w| w[0] == w[1]) && sizes[0] <= 8 {
            cfg.exhaustive_m = Some(sizes[0]);
        }
    }
    cfg.exhaustive_m
}

fn run_qdiff(cfg: &mut RunConfig, ms: &[Distribution]) -> Result<Value, CliError> {
    let (r, s) = (cfg.r.unwrap(), cfg.s.unwrap());
    let mut b = bounds::quantile_diff_sup(ms, r, s, &cfg.search)?;
    let mut oracle = None;
    if cfg.use_oracle {
        if let Some(m) = resolve_exhaustive_m(cfg, ms) {
            let f = SampleFunctional::QuantileDiff { r, s };
            let v = oracle::exhaustive_extreme(ms, &f, Direction::Sup, m)?.0;
            b.certify_with_oracle(v, cfg.tau_sharp);
            oracle = Some(v);
        }
    }
    Ok(json!({ "sup": bound_json(&b, oracle) }))
}

fn run_sharpness(cfg: &mut RunConfig, ms: &[Distribution]) -> Result<Value, CliError> {
    let (r, s) = (cfg.r.unwrap(), cfg.s.unwrap());
    let sel = *cfg.direction.get_or_insert(DirectionSel::Both);
    let exhaustive = resolve_exhaustive_m(cfg, ms);
    let mut out = Map::new();
    for (name, dir) in directions(sel) {
        let mut b = match dir {
            Direction::Sup => bounds::upper_bound_rvar(ms, r, s, &cfg.search)?,
            Direction::Inf => bounds::lower_bound_rvar(ms, r, s, &cfg.search)?,
        };
        let (method, v) = match exhaustive {
            Some(m) => ("exhaustive", oracle::exhaustive_extreme(ms, &SampleFunctional::Rvar { r, s }, dir, m)?.0),
            None => ("rearrangement", ra_dir(ms, r, s, dir, &cfg.oracle)?),
        };
        b.certify_with_oracle(v, cfg.tau_sharp);
        let mut doc = bound_json(&b, Some(v));
        doc["oracle_method"] = json!(method);
        out.insert(name.into(), doc);
    }
    Ok(Value::Object(out))
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub r: f64,
    pub s: f64,
    pub new_upper: f64,
    pub bllw_upper: f64,
    pub oracle_sup: Option<f64>,
    pub new_lower: f64,
    pub bllw_lower: f64,
    pub oracle_inf: Option<f64>,
}

fn compare_point(ms: &[Distribution], r: f64, s: f64, cfg: &RunConfig) -> crate::Result<CompareRow> {
    let (oracle_sup, oracle_inf) = if cfg.use_oracle {
        (Some(ra_dir(ms, r, s, Direction::Sup, &cfg.oracle)?), Some(ra_dir(ms, r, s, Direction::Inf, &cfg.oracle)?))
    } else {
        (None, None)
    };
    Ok(CompareRow {
        r,
        s,
        new_upper: bounds::upper_bound_rvar(ms, r, s, &cfg.search)?.value,
        bllw_upper: bounds::bllw_upper(ms, r, s, &cfg.search)?.value,
        oracle_sup,
        new_lower: bounds::lower_bound_rvar(ms, r, s, &cfg.search)?.value,
        bllw_lower: bounds::bllw_lower(ms, r, s, &cfg.search)?.value,
        oracle_inf,
    })
}

fn run_compare(cfg: &mut RunConfig, ms: &[Distribution], jobs: Option<usize>) -> Result<(Value, Vec<CompareRow>), CliError> {
    let windows: Vec<(f64, f64)> = match &cfg.sweep {
        None => vec![(cfg.r.unwrap(), cfg.s.unwrap())],
        Some(sw) => {
            let pts = sw.points()?;
            if sw.param == "s" {
                pts.into_iter().map(|s| (cfg.r.unwrap(), s)).collect()
            } else {
                pts.into_iter().map(|r| (r, cfg.s.unwrap())).collect()
            }
        }
    };
    let (kept, skipped): (Vec<_>, Vec<_>) =
        windows.into_iter().partition(|&(r, s)| r >= 0.0 && s > 0.0 && r + s <= 1.0 + 1e-12);
    let snapshot = cfg.clone();
    let work = || kept.par_iter().map(|&(r, s)| compare_point(ms, r, s.min(1.0 - r), &snapshot)).collect::<Vec<_>>();
    let rows: Vec<crate::Result<CompareRow>> = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?
            .install(work),
        None => work(),
    };
    let rows = rows.into_iter().collect::<crate::Result<Vec<_>>>()?;
    let doc = json!({
        "rows": rows,
        "skipped_windows": skipped.iter().map(|(r, s)| json!({"r": r, "s": s})).collect::<Vec<_>>(),
    });
    Ok((doc, rows))
}

fn run_share(cfg: &mut RunConfig) -> Result<(Value, Option<sharing::Allocation>), CliError> {
    let total = match (&cfg.total, &cfg.total_csv) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => read_total_csv(p)?,
        _ => unreachable!("validated"),
    };
    let betas = cfg.betas.clone().unwrap();
    let p = SharingProblem::new(total, &betas)?;
    let t = *cfg.t.get_or_insert(sharing::default_t(&p));
    let inf = sharing::inf_convolution_exact(&p);
    let alloc = sharing::optimal_allocation(&p, Some(t))?;
    let exposure = sharing::evaluate_allocation_exact(&p, &alloc)?;
    let dep = sharing::verify_dependence(&p, &alloc)?;
    let dual = sharing::dual_sup(&p)?;
    let mut doc = json!({
        "m": p.m(),
        "betas": p.betas(),
        "beta": p.beta(),
        "t": t,
        "inf_convolution": to_f64(&inf),
        "exposure": to_f64(&exposure),
        "gap": to_f64(&(&exposure - &inf)),
        "exact_equality": exposure == inf,
        "dependence": dep,
        "dual_sup": {
            "value": to_f64(&dual.value),
            "identity_value": to_f64(&dual.identity_value),
            "achieved": to_f64(&dual.achieved),
            "identity_exact": dual.value == dual.identity_value,
        },
    });
    if let Some(mu) = cfg.m_param {
        let seq = sharing::allocation_sequence(&p, mu)?;
        doc["sequence"] = json!({
            "m_param": mu,
            "a_m": to_f64(&seq.a_m),
            "exposure": to_f64(&seq.exposure),
            "predicted": to_f64(&seq.predicted),
            "matches_prediction": seq.exposure == seq.predicted,
        });
    }
    Ok((doc, Some(alloc)))
}

/// Runs a validated configuration and returns the result document (and the
/// CSV body, for csv output).
pub fn execute(mut cfg: RunConfig, jobs: Option<usize>) -> Result<(Value, Option<String>), CliError> {
    let start = Instant::now();
    let cmd = cfg.command.ok_or_else(|| invalid("command required"))?;
    validate(&cfg)?;
    let ms = if cmd == Command::Share { Vec::new() } else { parse_marginals(&cfg.marginals)? };
    let mut csv_body = None;
    let results = match cmd {
        Command::Bound => run_bound(&mut cfg, &ms)?,
        Command::Ird => run_ird(&mut cfg, &ms)?,
        Command::Qdiff => run_qdiff(&mut cfg, &ms)?,
        Command::Sharpness => run_sharpness(&mut cfg, &ms)?,
        Command::Compare => {
            let (doc, rows) = run_compare(&mut cfg, &ms, jobs)?;
            if cfg.output.format == Format::Csv {
                let mut w = csv::Writer::from_writer(Vec::new());
                for row in &rows {
                    w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
                }
                csv_body = Some(String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).unwrap());
            }
            doc
        }
        Command::Share => {
            let (doc, alloc) = run_share(&mut cfg)?;
            if cfg.output.format == Format::Csv {
                let mut buf = Vec::new();
                alloc.expect("allocation").write_csv(&mut buf)?;
                csv_body = Some(String::from_utf8(buf).unwrap());
            }
            doc
        }
    };
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cmd.name(),
        "config": cfg,
        "seeds": { "search": cfg.search.seed, "oracle": cfg.oracle.seed },
        "tolerances": { "tau_opt": cfg.search.tau_opt, "oracle_tol": cfg.oracle.tol, "tau_sharp": cfg.tau_sharp },
        "results": results,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    Ok((doc, csv_body))
}

#[derive(Parser, Debug)]
#[command(name = "robustrisk", version, about = "Bounds on risk aggregation under dependence uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Result path; defaults to $ROBUSTRISK_OUTPUT_DIR/<command>.json or stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Sub {
    /// Upper/lower bounds on the RVaR of the sum
    Bound(CommonArgs),
    /// Sup of an inter-RVaR difference
    Ird(CommonArgs),
    /// Sup of a quantile difference
    Qdiff(CommonArgs),
    /// Risk sharing with averaged-quantile agents
    Share(CommonArgs),
    /// Bound versus oracle
    Sharpness(CommonArgs),
    /// Bound comparison table, optionally over a sweep
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// e.g. s=0.05:0.95:0.05
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn output_path(cfg: &RunConfig, cli_out: Option<PathBuf>, cmd: Command) -> Option<PathBuf> {
    let ext = if cfg.output.format == Format::Csv { "csv" } else { "json" };
    cli_out
        .or_else(|| cfg.output.path.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(|d| PathBuf::from(d).join(format!("{}.{ext}", cmd.name()))))
}

fn run_sub(sub: Sub) -> Result<(), CliError> {
    let (cmd, common, sweep, jobs) = match sub {
        Sub::Bound(c) => (Command::Bound, c, None, None),
        Sub::Ird(c) => (Command::Ird, c, None, None),
        Sub::Qdiff(c) => (Command::Qdiff, c, None, None),
        Sub::Share(c) => (Command::Share, c, None, None),
        Sub::Sharpness(c) => (Command::Sharpness, c, None, None),
        Sub::Compare { common, sweep, jobs } => (Command::Compare, common, sweep, jobs),
    };
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| invalid(format!("cannot read {}: {e}", common.config.display())))?;
    let mut cfg = if let Some(sw) = &sweep {
        // the flag may supply the swept parameter, so attach it before validating
        let mut raw = parse_config(&text)?;
        raw.sweep = Some(Sweep::parse(sw)?);
        let patched = serde_json::to_string(&raw).expect("config serialises");
        parse_config_for(&patched, cmd)?
    } else {
        parse_config_for(&text, cmd)?
    };
    if jobs == Some(0) {
        return Err(invalid("--jobs must be positive"));
    }
    let out = output_path(&cfg, common.output, cmd);
    if let Some(p) = &out {
        cfg.output.path = Some(p.clone());
    }
    let (doc, csv_body) = execute(cfg, jobs)?;
    let body = csv_body.unwrap_or_else(|| serde_json::to_string_pretty(&doc).expect("json") + "\n");
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(&p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

/// Entry point shared by the binary and tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_sub(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let err = json!({ "error": e.code(), "message": e.to_string() });
            eprintln!("{err}");
            e.exit_code()
        }
    }
}
