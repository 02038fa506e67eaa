//! `gm-score`: command-line front door for the scoring library.
//!
//! Subcommands: `score` (closed-form learning coefficient from a tree and a
//! count table), `rlct` (exact threshold/multiplicity of a monomial set),
//! `polytope` (pair-edge polytope structure checks), and `validate` (Monte
//! Carlo slope against the closed form).
//!
//! Exit codes: 0 success (including regime C with unknown multiplicity),
//! 1 input error, 2 structurally unsupported regime. All randomness flows
//! from `--seed`; identical flags produce identical output bytes.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use gm_score_core::laplace::{validate_tree, LaplaceError, PriorSpec, ValidationConfig};
use gm_score_core::newton::{
    gamma_q_structure_check, monomial_rlct, pair_edge_polytope, Degeneracy, ExponentSet,
    NewtonError, RlctOutcome,
};
use gm_score_core::pattern::{make_fiber_data, CountTable, TolPolicy};
use gm_score_core::score::{full_score, ScoreError, ScoreReport};
use gm_score_core::tree::RootedTree;
use gm_score_core::{parse_ratio, ratio, ratio_string, BigRational};
use num_traits::{Signed, ToPrimitive};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "gm-score",
    version,
    about = "Singular BIC scores for general Markov models on binary trees"
)]
struct RunConfig {
    #[command(subcommand)]
    cmd: Cmd,
    /// Write the primary report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report rendering.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for every stochastic step (EM restarts, Monte Carlo).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Chat on stderr about intermediate progress.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Score a count table on a tree: λ, multiplicity, regime, components.
    Score {
        /// Tree JSON: {"root": ..., "leaves": [...], "edges": [[pa,ch],...]}.
        #[arg(long, value_name = "PATH")]
        tree: PathBuf,
        /// CSV of `pattern,count` rows (counts may be fractions).
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Covariance zero threshold (rational "p/q" or decimal). Default:
        /// picked from the data (exact tables vs integer samples).
        #[arg(long, value_name = "TOL")]
        tol: Option<String>,
    },
    /// Exact threshold and multiplicity of a monomial ideal.
    Rlct {
        /// CSV of integer exponent rows, one ideal generator per line; the
        /// threshold computed is that of the sum of their squares.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Prior exponents h_1,...,h_d (rationals > -1), default all zero.
        #[arg(long, value_name = "H1,H2,...")]
        weights: Option<String>,
    },
    /// Structure checks for the pair-edge polytope of a trivalent tree.
    Polytope {
        #[arg(long, value_name = "PATH")]
        tree: PathBuf,
    },
    /// Monte Carlo slope check of the closed-form score at a fiber point.
    Validate {
        #[arg(long, value_name = "PATH")]
        tree: PathBuf,
        /// Parameter point JSON: {"root_p1": r, "edges": [{"child": name,
        /// "p1_given_0": r, "p1_given_1": r}, ...]} with rational entries.
        #[arg(long, value_name = "PATH")]
        theta: PathBuf,
        /// Sample-size grid lo:hi:factor, e.g. 128:32768:2.
        #[arg(long, value_name = "LO:HI:FACTOR", default_value = "128:32768:2")]
        grid: String,
        /// Monte Carlo draws per grid point (minimum 10000).
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        /// Prior on the cube: "uniform" or "beta:a,b" with a,b >= 1.
        #[arg(long, default_value = "uniform")]
        prior: String,
        /// Accept the regression slope within this distance of -λ.
        #[arg(long, default_value_t = 0.2)]
        slope_tol: f64,
        /// Drop this many smallest grid points before regressing.
        #[arg(long, default_value_t = 2)]
        drop: usize,
    },
}

/// Failures carrying their exit code: 1 for bad input, 2 for cases the
/// closed forms do not cover.
#[derive(Debug)]
enum Failure {
    Input(String),
    Unsupported(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Unsupported(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Unsupported(m) => m,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<ScoreError> for Failure {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::UnsupportedRegime(_) => Failure::Unsupported(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<NewtonError> for Failure {
    fn from(e: NewtonError) -> Self {
        match e {
            NewtonError::NotTrivalent | NewtonError::ThreeLeafExcluded => {
                Failure::Unsupported(e.to_string())
            }
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<LaplaceError> for Failure {
    fn from(e: LaplaceError) -> Self {
        match e {
            LaplaceError::Score(inner) => inner.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cfg = match RunConfig::try_parse() {
        Ok(cfg) => cfg,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cfg: RunConfig) -> Result<(), Failure> {
    match &cfg.cmd {
        Cmd::Score { tree, data, tol } => cmd_score(&cfg, tree, data, tol.as_deref()),
        Cmd::Rlct { data, weights } => cmd_rlct(&cfg, data, weights.as_deref()),
        Cmd::Polytope { tree } => cmd_polytope(&cfg, tree),
        Cmd::Validate {
            tree,
            theta,
            grid,
            samples,
            prior,
            slope_tol,
            drop,
        } => cmd_validate(&cfg, tree, theta, grid, *samples, prior, *slope_tol, *drop),
    }
}

fn read_to_string(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_tree(path: &Path) -> Result<RootedTree, Failure> {
    let text = read_to_string(path)?;
    RootedTree::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Writes the report to `--out` if given, else stdout.
fn emit(cfg: &RunConfig, text: &str) -> Result<(), Failure> {
    match &cfg.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Rational from "p/q", an integer, or a decimal like "0.25".
fn parse_rational_str(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some(r) = parse_ratio(s) {
        return Some(r);
    }
    let (int_part, frac_part) = s.split_once('.')?;
    if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: num_bigint::BigInt = digits.parse().ok()?;
    let den = num_bigint::BigInt::from(10u32).pow(frac_part.len() as u32);
    Some(BigRational::new(num, den))
}

/// Rational from a JSON value: strings are parsed exactly, numbers take
/// their exact binary value.
fn rational_from_json(v: &serde_json::Value) -> Option<BigRational> {
    match v {
        serde_json::Value::String(s) => parse_rational_str(s),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(BigRational::from_integer(i.into()))
            } else {
                BigRational::from_float(n.as_f64()?)
            }
        }
        _ => None,
    }
}

fn cmd_score(
    cfg: &RunConfig,
    tree_path: &Path,
    data_path: &Path,
    tol: Option<&str>,
) -> Result<(), Failure> {
    let tree = load_tree(tree_path)?;
    let text = read_to_string(data_path)?;
    let table = CountTable::parse_csv(&text, tree.n_leaves())
        .map_err(|e| Failure::Input(format!("{}: {e}", data_path.display())))?;
    let policy = match tol {
        Some(s) => {
            let t = parse_rational_str(s)
                .filter(|t| !t.is_negative())
                .ok_or_else(|| Failure::Input(format!("bad --tol value: {s}")))?;
            Some(TolPolicy::Explicit(t))
        }
        None => None,
    };
    let report = full_score(&tree, &table, policy.as_ref(), cfg.seed)?;
    if cfg.verbose {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    let rendered = match cfg.format {
        Format::Json => json_text(&report.to_json()),
        Format::Csv => score_csv(&report),
    };
    emit(cfg, &rendered)
}

fn score_csv(report: &ScoreReport) -> String {
    let mut s = String::from("key,value\n");
    s.push_str(&format!("lambda,{}\n", ratio_string(&report.lambda)));
    s.push_str(&format!(
        "multiplicity,{}\n",
        report
            .multiplicity
            .map_or_else(|| "unknown".into(), |m| m.to_string())
    ));
    s.push_str(&format!("regime,{}\n", report.regime.tag()));
    s.push_str(&format!("l1,{}\nl2,{}\nl3,{}\n", report.l1, report.l2, report.l3));
    if let Some(ll) = report.max_loglik {
        s.push_str(&format!("max_loglik,{ll}\n"));
    }
    s
}

fn cmd_rlct(cfg: &RunConfig, data_path: &Path, weights: Option<&str>) -> Result<(), Failure> {
    let text = read_to_string(data_path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let mut points: Vec<Vec<BigRational>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Failure::Input(format!("exponent row {}: {e}", idx + 1)))?;
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            let value: i64 = field
                .parse()
                .map_err(|_| Failure::Input(format!("row {}: bad integer {field:?}", idx + 1)))?;
            if value < 0 {
                return Err(Failure::Input(format!(
                    "row {}: exponents must be nonnegative, got {value}",
                    idx + 1
                )));
            }
            // Generator x^u contributes x^{2u} to the sum of squares.
            let doubled = value
                .checked_mul(2)
                .ok_or_else(|| Failure::Input(format!("row {}: exponent too large", idx + 1)))?;
            row.push(ratio(doubled, 1));
        }
        points.push(row);
    }
    let dim = points.first().map(Vec::len).unwrap_or(0);
    if points.is_empty() || dim == 0 {
        return Err(Failure::Input(format!(
            "{}: no exponent rows",
            data_path.display()
        )));
    }
    let mut set = ExponentSet::new(dim, points).map_err(Failure::from)?;
    if let Some(spec) = weights {
        let h: Option<Vec<BigRational>> = spec.split(',').map(parse_rational_str).collect();
        let h = h.ok_or_else(|| Failure::Input(format!("bad --weights list: {spec}")))?;
        set = set.with_prior(h).map_err(Failure::from)?;
    }
    let outcome = monomial_rlct(&set)?;
    let value = match outcome {
        RlctOutcome::Pole(pair) => serde_json::json!({
            "schema_version": 1,
            "pole": true,
            "threshold": ratio_string(&pair.threshold),
            "threshold_float": pair.threshold.to_f64(),
            "multiplicity": pair.multiplicity,
        }),
        RlctOutcome::NoPole { dim } => serde_json::json!({
            "schema_version": 1,
            "pole": false,
            "threshold": "inf",
            "multiplicity": dim as u64,
        }),
    };
    let rendered = match cfg.format {
        Format::Json => json_text(&value),
        Format::Csv => format!(
            "threshold,multiplicity\n{},{}\n",
            value["threshold"].as_str().unwrap_or("inf"),
            value["multiplicity"]
        ),
    };
    emit(cfg, &rendered)
}

fn cmd_polytope(cfg: &RunConfig, tree_path: &Path) -> Result<(), Failure> {
    let tree = load_tree(tree_path)?;
    let (vertices, report) = pair_edge_polytope(&tree)?;
    let mut gamma_checks = Vec::new();
    let none = Degeneracy::none(&tree);
    let all = Degeneracy::all_inner(&tree);
    for (label, delta) in [("none", &none), ("all-inner", &all)] {
        let g = gamma_q_structure_check(&tree, delta)?;
        gamma_checks.push(serde_json::json!({
            "delta": label,
            "points_checked": g.points_checked,
            "terminal_sum_ok": g.terminal_sum_ok,
            "linear_map_ok": g.linear_map_ok,
            "halfspaces_ok": g.halfspaces_ok,
            "barycenter_ok": g.barycenter_ok,
            "pass": g.all_ok(),
        }));
    }
    let gamma_pass = gamma_checks
        .iter()
        .all(|g| g["pass"].as_bool().unwrap_or(false));
    let value = serde_json::json!({
        "schema_version": 1,
        "n_leaves": tree.n_leaves(),
        "vertices": vertices.len(),
        "ambient_dim": report.ambient_dim,
        "affine_dim": report.affine_dim,
        "expected_dim": report.expected_dim,
        "on_equation": report.on_equation,
        "claimed_facets": report.claimed_count,
        "claims_valid": report.claims_valid,
        "claims_supporting": report.claims_supporting,
        "hull_facets": report.hull_facets,
        "hull_matches_claims": report.hull_matches_claims,
        "gamma_checks": gamma_checks,
        "pass": report.all_ok() && gamma_pass,
    });
    let rendered = match cfg.format {
        Format::Json => json_text(&value),
        Format::Csv => {
            let mut s = String::from("key,value\n");
            for key in [
                "n_leaves",
                "vertices",
                "affine_dim",
                "expected_dim",
                "claimed_facets",
                "pass",
            ] {
                s.push_str(&format!("{key},{}\n", value[key]));
            }
            if let Some(f) = report.hull_facets {
                s.push_str(&format!("hull_facets,{f}\n"));
            }
            s
        }
    };
    emit(cfg, &rendered)
}

/// Parses "lo:hi:factor" into a geometric grid lo, lo·f, ... ≤ hi.
fn parse_grid(spec: &str) -> Result<Vec<u64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Failure::Input(format!("bad --grid {spec:?}, expected LO:HI:FACTOR"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: u64 = parts[0].parse().map_err(|_| bad())?;
    let hi: u64 = parts[1].parse().map_err(|_| bad())?;
    let factor: u64 = parts[2].parse().map_err(|_| bad())?;
    if lo == 0 || hi < lo || factor < 2 {
        return Err(bad());
    }
    let mut grid = Vec::new();
    let mut n = lo;
    loop {
        grid.push(n);
        match n.checked_mul(factor) {
            Some(next) if next <= hi => n = next,
            _ => break,
        }
    }
    Ok(grid)
}

fn parse_prior(spec: &str) -> Result<PriorSpec, Failure> {
    let s = spec.trim();
    if s.eq_ignore_ascii_case("uniform") {
        return Ok(PriorSpec::Uniform);
    }
    if let Some(rest) = s.strip_prefix("beta:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            if let (Ok(alpha), Ok(beta)) = (parts[0].trim().parse(), parts[1].trim().parse()) {
                return Ok(PriorSpec::Beta { alpha, beta });
            }
        }
    }
    Err(Failure::Input(format!(
        "bad --prior {spec:?}, expected \"uniform\" or \"beta:a,b\""
    )))
}

/// Parses the θ JSON document against the tree's edge set.
fn parse_theta(
    text: &str,
    tree: &RootedTree,
) -> Result<gm_score_core::moments::ThetaPoint, Failure> {
    let doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Failure::Input(format!("theta JSON: {e}")))?;
    let root_p1 = doc
        .get("root_p1")
        .and_then(rational_from_json)
        .ok_or_else(|| Failure::Input("theta JSON needs a rational \"root_p1\"".into()))?;
    let entries = doc
        .get("edges")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Failure::Input("theta JSON needs an \"edges\" array".into()))?;
    let mut edges: Vec<Option<(BigRational, BigRational)>> = vec![None; tree.n_edges()];
    for entry in entries {
        let child = entry
            .get("child")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Failure::Input("theta edge needs a \"child\" name".into()))?;
        let node = tree
            .node_by_name(child)
            .ok_or_else(|| Failure::Input(format!("theta edge child {child:?} not in tree")))?;
        let edge = tree
            .parent_edge(node)
            .ok_or_else(|| Failure::Input(format!("{child:?} is the root, not an edge child")))?;
        let p0 = entry
            .get("p1_given_0")
            .and_then(rational_from_json)
            .ok_or_else(|| Failure::Input(format!("edge {child:?}: bad p1_given_0")))?;
        let p1 = entry
            .get("p1_given_1")
            .and_then(rational_from_json)
            .ok_or_else(|| Failure::Input(format!("edge {child:?}: bad p1_given_1")))?;
        if edges[edge].replace((p0, p1)).is_some() {
            return Err(Failure::Input(format!("edge {child:?} given twice")));
        }
    }
    let edges: Option<Vec<(BigRational, BigRational)>> = edges.into_iter().collect();
    let edges = edges.ok_or_else(|| Failure::Input("theta JSON must cover every edge".into()))?;
    let theta = gm_score_core::moments::ThetaPoint { root_p1, edges };
    theta
        .validate(tree)
        .map_err(|e| Failure::Input(format!("theta: {e}")))?;
    Ok(theta)
}

#[allow(clippy::too_many_arguments)]
fn cmd_validate(
    cfg: &RunConfig,
    tree_path: &Path,
    theta_path: &Path,
    grid_spec: &str,
    samples: usize,
    prior_spec: &str,
    slope_tol: f64,
    drop: usize,
) -> Result<(), Failure> {
    let tree = load_tree(tree_path)?;
    let theta = parse_theta(&read_to_string(theta_path)?, &tree)?;
    let grid = parse_grid(grid_spec)?;
    let prior = parse_prior(prior_spec)?;
    let samples = if samples < 10_000 {
        eprintln!("warning: samples below minimum, raising {samples} to 10000");
        10_000
    } else {
        samples
    };
    let config = ValidationConfig::new(grid, samples, cfg.seed, prior).map_err(Failure::from)?;
    if !(slope_tol.is_finite() && slope_tol > 0.0) {
        return Err(Failure::Input(format!("bad --slope-tol {slope_tol}")));
    }
    let table = make_fiber_data(&theta, &tree, &ratio(1_000_000, 1));
    if cfg.verbose {
        eprintln!(
            "validating over {} grid points, {samples} samples each",
            config.grid.len()
        );
    }
    let report = validate_tree(&tree, &table, &theta, &config, slope_tol, drop)?;
    let rows_json: Vec<serde_json::Value> = report
        .rows
        .iter()
        .map(|r| serde_json::json!({"n": r.n, "log_i": r.log_i, "stderr": r.stderr}))
        .collect();
    let verdict = serde_json::json!({
        "schema_version": 1,
        "slope": report.regression.slope,
        "slope_se": report.regression.stderr,
        "intercept": report.regression.intercept,
        "expected_lambda": report.expected_lambda,
        "slope_tolerance": report.slope_tolerance,
        "verdict": if report.verdict { "pass" } else { "fail" },
        "points_used": report.regression.points.len(),
        "rows": rows_json,
    });
    match cfg.format {
        Format::Json => emit(cfg, &json_text(&verdict)),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["N", "logI", "stderr"]).expect("csv");
            for r in &report.rows {
                w.write_record([r.n.to_string(), r.log_i.to_string(), r.stderr.to_string()])
                    .expect("csv");
            }
            let bytes = w.into_inner().expect("csv buffer");
            let text = String::from_utf8(bytes).expect("csv is utf8");
            emit(cfg, &text)?;
            // The verdict always goes somewhere machine-readable: stdout
            // when the CSV went to a file, stderr otherwise.
            let line = serde_json::to_string(&verdict).expect("verdict serializes");
            if cfg.out.is_some() {
                println!("{line}");
            } else {
                eprintln!("{line}");
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        RunConfig::command().debug_assert();
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("128:1024:2").unwrap(), vec![128, 256, 512, 1024]);
        assert_eq!(parse_grid("100:1000:3").unwrap(), vec![100, 300, 900]);
        assert!(parse_grid("0:10:2").is_err());
        assert!(parse_grid("10:5:2").is_err());
        assert!(parse_grid("1:10:1").is_err());
        assert!(parse_grid("1:10").is_err());
    }

    #[test]
    fn prior_parsing() {
        assert_eq!(parse_prior("uniform").unwrap(), PriorSpec::Uniform);
        assert_eq!(
            parse_prior("beta:2,3.5").unwrap(),
            PriorSpec::Beta {
                alpha: 2.0,
                beta: 3.5
            }
        );
        assert!(parse_prior("beta:2").is_err());
        assert!(parse_prior("gamma:1,1").is_err());
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational_str("3/4").unwrap(), ratio(3, 4));
        assert_eq!(parse_rational_str("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_rational_str("2").unwrap(), ratio(2, 1));
        assert!(parse_rational_str("x").is_none());
    }
}
