//! `dendrodim`: construct, verify and measure closed subgroups of iterated
//! wreath products acting on regular rooted trees.
//!
//! Exit codes: 0 success, 1 a verification failed, 2 malformed or infeasible
//! input, 3 a resource cap was hit.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use serde_json::{json, Map, Value};

use dendrodim::dimension::{
    analyze, functional_identity_check, lemma32_check, regular_branch_horizon, AnalysisOptions, DimensionReport,
};
use dendrodim::directed::{
    a_group, b_has_order_dividing_q, density_profile_of, directed_group, generators_commute, DirectedSpec,
    DEFAULT_POINT_CAP,
};
use dendrodim::layers::{
    check_properties, lemma51_exhaustive, terminating_length, verify_sequence, DefiningSequence, ExpansionMode,
    ExpansionSpec,
};
use dendrodim::permgroup::{OrderSequence, TruncatedGroup};
use dendrodim::Error;

#[derive(Parser, Debug)]
#[command(name = "dendrodim", version, about = "Hausdorff dimension of groups acting on rooted trees")]
struct Cli {
    /// Omit the timestamp header so repeated runs are byte-identical.
    #[arg(long, global = true)]
    no_header: bool,

    /// Memory cap in bytes for stored permutations (sets DENDRODIM_MEM_CAP).
    #[arg(long, global = true, value_name = "BYTES")]
    mem_cap: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    /// Self-similar, super strongly fractal and level-transitive.
    Ss,
    /// Weakly regular branch.
    Wrb,
    /// Regular branch.
    Rb,
    /// Self-similar branch, through a lambda-shift.
    Sb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ExpansionArg {
    Terminating,
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Lemma51,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dimension report for a sequence of quotient orders |G/St(n)|.
    Dim {
        /// Orders for n = 1, 2, ..., comma separated; `p^e` is accepted.
        #[arg(long, value_delimiter = ',', conflicts_with = "spec")]
        orders: Vec<String>,
        /// Orders file ({"m", "orders", "ambient"}) or a defining sequence.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Tree degree.
        #[arg(long)]
        m: Option<usize>,
        /// |H| for the ambient group W_H; defaults to m.
        #[arg(long)]
        ambient: Option<String>,
        /// Bound on |s_n| beyond the horizon, as a fraction.
        #[arg(long)]
        cap: Option<String>,
        /// Interval precision in bits, for irrational values.
        #[arg(long)]
        precision: Option<u32>,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
    },
    /// Builds a group of prescribed dimension and reports on it.
    Construct {
        #[arg(long)]
        q: u64,
        /// Target dimension as a fraction `a/b`.
        #[arg(long)]
        gamma: String,
        #[arg(long, value_enum)]
        variant: VariantArg,
        /// Number of digits realized.
        #[arg(long)]
        horizon: Option<usize>,
        /// Shift schedule for `sb`, comma separated; defaults to 1, 2, 3, ...
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<usize>,
        #[arg(long, value_enum, default_value = "terminating")]
        expansion: ExpansionArg,
        /// Also write the defining sequence JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Checks every invariant of a spec file, or runs a named suite.
    Verify {
        #[arg(required_unless_present = "suite")]
        file: Option<PathBuf>,
        #[arg(long, value_enum, conflicts_with = "file")]
        suite: Option<Suite>,
        #[arg(long, default_value_t = 3)]
        q: u64,
    },
    /// Density profile of the directed zero-dimensional groups G_n.
    Directed {
        #[arg(long, default_value_t = 5)]
        q: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Reads {"q", "n", "depth"} instead of the flags above.
        #[arg(long, conflicts_with_all = ["q", "n", "depth"])]
        spec: Option<PathBuf>,
        #[arg(long)]
        allow_q7: bool,
        /// Largest number of leaves handled.
        #[arg(long, default_value_t = DEFAULT_POINT_CAP)]
        point_cap: usize,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn verification(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::MemoryCap { .. } | Error::ResourceCap(_) => 3,
            Error::ChainStep { .. } | Error::InvarianceViolation { .. } | Error::Membership(_) | Error::NotNormalizing(_) => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<String, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(cap) = cli.mem_cap {
        std::env::set_var("DENDRODIM_MEM_CAP", cap.to_string());
    }
    let header = !cli.no_header;
    let result = match cli.command {
        Command::Dim { orders, spec, m, ambient, cap, precision, format } => {
            cmd_dim(&orders, spec, m, ambient, cap, precision, format, header)
        }
        Command::Construct { q, gamma, variant, horizon, lambda, expansion, out, format } => {
            cmd_construct(q, &gamma, variant, horizon, &lambda, expansion, out, format, header)
        }
        Command::Verify { file, suite, q } => cmd_verify(file, suite, q, header),
        Command::Directed { q, n, depth, spec, allow_q7, point_cap, format } => {
            cmd_directed(q, n, depth, spec, allow_q7, point_cap, format, header)
        }
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("dendrodim: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn tsv_header(header: bool, command: &str) -> String {
    if header {
        format!("# dendrodim {} {command} generated_unix={}\n", env!("CARGO_PKG_VERSION"), timestamp())
    } else {
        String::new()
    }
}

fn json_output(header: bool, command: &str, mut body: Map<String, Value>) -> String {
    body.insert("format_version".into(), json!(1));
    body.insert("command".into(), json!(command));
    if header {
        body.insert(
            "header".into(),
            json!({ "tool": "dendrodim", "version": env!("CARGO_PKG_VERSION"), "generated_unix": timestamp() }),
        );
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(body)).expect("JSON value serializes");
    s.push('\n');
    s
}

/// `a/b` or an integer; anything else, floats included, is rejected.
fn parse_fraction(text: &str) -> Result<Ratio<u64>, Failure> {
    let bad = || Failure::input(format!("{text:?} is not a fraction a/b (floats are rejected)"));
    let (a, b) = match text.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (text.trim(), "1"),
    };
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|c| c.is_ascii_digit());
    if !all_digits(a) || !all_digits(b) {
        return Err(bad());
    }
    let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    if b == 0 {
        return Err(Failure::input(format!("{text:?} has a zero denominator")));
    }
    Ok(Ratio::new(a, b))
}

fn parse_big_fraction(text: &str) -> Result<BigRational, Failure> {
    let r = parse_fraction(text)?;
    Ok(BigRational::new((*r.numer()).into(), (*r.denom()).into()))
}

/// A decimal integer or `base^exp`.
fn parse_order(text: &str) -> Result<BigUint, Failure> {
    let t = text.trim();
    let bad = || Failure::input(format!("{t:?} is not an order (decimal or base^exp)"));
    match t.split_once('^') {
        Some((b, e)) => {
            let b: BigUint = b.trim().parse().map_err(|_| bad())?;
            let e: u32 = e.trim().parse().map_err(|_| bad())?;
            Ok(b.pow(e))
        }
        None => t.parse().map_err(|_| bad()),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn parse_json(text: &str, path: &Path) -> Result<Value, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::input(format!("{} is not JSON: {e}", path.display())))
}

/// `|G_S / St(n)| = p^(sum_{k<n} log_p |S_k|)` for `n = 1..=N+1`.
fn sequence_orders(seq: &DefiningSequence) -> OrderSequence {
    let p = BigUint::from(seq.ring().p());
    let mut acc = 0u32;
    let orders = seq
        .layers
        .iter()
        .map(|l| {
            acc += l.log_p_size() as u32;
            p.pow(acc)
        })
        .collect();
    OrderSequence { m: seq.q as usize, orders }
}

#[allow(clippy::too_many_arguments)]
fn cmd_dim(
    orders: &[String],
    spec: Option<PathBuf>,
    m: Option<usize>,
    ambient: Option<String>,
    cap: Option<String>,
    precision: Option<u32>,
    format: Format,
    header: bool,
) -> CmdResult {
    let (seq, file_ambient) = match &spec {
        Some(path) => {
            let text = read_file(path)?;
            let v = parse_json(&text, path)?;
            if v.get("variant").is_some() {
                let seq = DefiningSequence::from_json(&text)?;
                (sequence_orders(&seq), Some(BigUint::from(seq.q)))
            } else {
                let m = v
                    .get("m")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Failure::input("orders file needs an integer \"m\""))?;
                let list = v
                    .get("orders")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Failure::input("orders file needs an \"orders\" array"))?;
                let orders = list
                    .iter()
                    .map(|x| match x {
                        Value::String(s) => parse_order(s),
                        Value::Number(n) => parse_order(&n.to_string()),
                        _ => Err(Failure::input("orders must be strings or integers")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let amb = match v.get("ambient") {
                    Some(Value::String(s)) => Some(parse_order(s)?),
                    Some(Value::Number(n)) => Some(parse_order(&n.to_string())?),
                    _ => None,
                };
                (OrderSequence { m: m as usize, orders }, amb)
            }
        }
        None => {
            if orders.is_empty() {
                return Err(Failure::input("give --orders or --spec"));
            }
            let m = m.ok_or_else(|| Failure::input("--orders needs --m"))?;
            let orders = orders.iter().map(|s| parse_order(s)).collect::<Result<Vec<_>, _>>()?;
            (OrderSequence { m, orders }, None)
        }
    };
    let seq = match (m, &spec) {
        (Some(m), Some(_)) if m != seq.m => {
            return Err(Failure::input(format!("--m {m} disagrees with the file (m = {})", seq.m)))
        }
        _ => seq,
    };
    let ambient = match ambient {
        Some(a) => parse_order(&a)?,
        None => file_ambient.unwrap_or_else(|| BigUint::from(seq.m)),
    };
    let opts = AnalysisOptions { precision_bits: precision, cap: cap.as_deref().map(parse_big_fraction).transpose()? };
    let report = analyze(&seq, &ambient, &opts)?;
    Ok(match format {
        Format::Tsv => {
            let mut out = tsv_header(header, "dim");
            out.push_str(&report.to_tsv());
            out.push_str(&summary_lines(&report));
            out
        }
        Format::Json => {
            let mut body = Map::new();
            body.insert("report".into(), report.to_json());
            body.insert(
                "regular_branch_horizon".into(),
                json!(regular_branch_horizon(&report).map(|c| c.start)),
            );
            json_output(header, "dim", body)
        }
    })
}

fn summary_lines(report: &DimensionReport) -> String {
    let mut out = format!("# estimate\t{}\n", report.estimate);
    if let Some(t) = &report.tail_bound {
        out.push_str(&format!("# tail_bound\t{t}\n"));
    }
    if let Some((a, b)) = &report.bracket {
        out.push_str(&format!("# bracket\t{a}\t{b}\n"));
    }
    out.push_str(&format!("# sign\t{:?}\n", report.sign));
    if let Some(c) = regular_branch_horizon(report) {
        out.push_str(&format!("# regular_branch_horizon\t{}\t{c}\n", c.start));
    }
    out
}

fn default_horizon(q: u64) -> usize {
    match q {
        2 => 6,
        3 => 4,
        4 | 5 => 3,
        _ => 2,
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_construct(
    q: u64,
    gamma_text: &str,
    variant: VariantArg,
    horizon: Option<usize>,
    lambda: &[usize],
    expansion: ExpansionArg,
    out: Option<PathBuf>,
    format: Format,
    header: bool,
) -> CmdResult {
    let gamma = parse_fraction(gamma_text)?;
    if gamma > Ratio::one() {
        return Err(Failure::input(format!("gamma = {gamma} lies outside [0, 1]")));
    }
    let ring = dendrodim::zmod::Ring::new(q)?;
    let n = horizon.unwrap_or_else(|| default_horizon(q));
    if n == 0 {
        return Err(Failure::input("the horizon must be at least 1"));
    }
    let mode = match expansion {
        ExpansionArg::Terminating => ExpansionMode::Terminating,
        ExpansionArg::Infinite => ExpansionMode::Infinite,
    };
    let one_minus = Ratio::one() - gamma;
    let p = ring.p();
    let mut branching_level = None;
    let seq = match variant {
        VariantArg::Ss => {
            let digits = ExpansionSpec::from_gamma(q, gamma, n, mode)?.digits;
            DefiningSequence::lemma52(q, &digits)?
        }
        VariantArg::Wrb => {
            if gamma.is_zero() {
                return Err(Failure::input("weakly regular branch requires gamma in (0, 1]; gamma = 0 is excluded"));
            }
            if mode == ExpansionMode::Infinite {
                log::info!("wrb: rewriting the expansion of 1 - gamma into its terminating form");
            }
            let digits = ExpansionSpec::from_gamma(q, gamma, n, ExpansionMode::Terminating)?.digits;
            let k = digits.iter().position(|&d| d != q - 1).ok_or_else(|| {
                Failure::input(format!(
                    "weakly regular branch needs a digit mu_k != q - 1; none occurs within horizon {n}, raise --horizon"
                ))
            })?;
            branching_level = Some(k + 1);
            DefiningSequence::lemma52(q, &digits)?
        }
        VariantArg::Rb => {
            if gamma.is_zero() {
                return Err(Failure::input("regular branch requires gamma in Z[1/p] and (0, 1]; gamma = 0 is excluded"));
            }
            if mode == ExpansionMode::Infinite {
                return Err(Failure::input("regular branch requires the finite expansion of 1 - gamma"));
            }
            let len = terminating_length(q, one_minus).ok_or_else(|| {
                Failure::input(format!(
                    "regular branch requires gamma in Z[1/{p}] and (0, 1]; {gamma} has no finite base-{q} expansion"
                ))
            })?;
            if len > n {
                return Err(Failure::input(format!(
                    "the finite expansion of 1 - gamma has {len} digits; --horizon {n} is too short"
                )));
            }
            let digits = ExpansionSpec::from_gamma(q, gamma, n, ExpansionMode::Terminating)?.digits;
            DefiningSequence::lemma52(q, &digits)?
        }
        VariantArg::Sb => {
            let digits = ExpansionSpec::from_gamma(q, gamma, n, mode)?.digits;
            let schedule: Vec<usize> = if lambda.is_empty() { (1..=n).collect() } else { lambda.to_vec() };
            DefiningSequence::lambda_shift(q, &digits, &schedule, n)?
        }
    };
    if let Err(v) = verify_sequence(&seq) {
        return Err(Failure::verification(format!("construction failed verification: {v}")));
    }
    let orders = sequence_orders(&seq);
    let cap = match variant {
        VariantArg::Sb => None,
        _ => Some(BigRational::from_integer((q - 1).into())),
    };
    let report = analyze(&orders, &BigUint::from(q), &AnalysisOptions { precision_bits: None, cap })?;
    let horizon_cert = regular_branch_horizon(&report);
    if variant == VariantArg::Rb && horizon_cert.is_none() {
        return Err(Failure::verification("regular branch: s_n does not vanish at the horizon"));
    }
    let seq_json = seq.to_json();
    if let Some(path) = &out {
        fs::write(path, format!("{seq_json}\n"))
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    }
    if format == Format::Tsv {
        let mut s = tsv_header(header, "construct");
        s.push_str(&report.to_tsv());
        s.push_str(&summary_lines(&report));
        return Ok(s);
    }
    let target = seq.target_digits().unwrap_or_default();
    let realized: Vec<String> = seq.realized_s().iter().map(|r| format!("{}/{}", r.numer(), r.denom())).collect();
    let mut body = Map::new();
    body.insert("q".into(), json!(q));
    body.insert("gamma".into(), json!(format!("{}/{}", gamma.numer(), gamma.denom())));
    body.insert("variant".into(), json!(format!("{variant:?}").to_lowercase()));
    body.insert("horizon".into(), json!(n));
    body.insert("target_s".into(), json!(target));
    body.insert("realized_s".into(), json!(realized));
    body.insert("estimate".into(), report.estimate.to_json(20));
    body.insert("regular_branch_horizon".into(), json!(horizon_cert.map(|c| c.start)));
    if let Some(k) = branching_level {
        body.insert("branching_level".into(), json!(k));
    }
    body.insert("properties".into(), serde_json::to_value(check_properties(&seq)).expect("report serializes"));
    body.insert("report".into(), report.to_json());
    body.insert("sequence".into(), serde_json::from_str(&seq_json).expect("sequence JSON parses"));
    Ok(json_output(header, "construct", body))
}

/// Largest number of leaves on which the group oracle is run during `verify`.
const ORACLE_POINTS: usize = 1024;

fn cmd_verify(file: Option<PathBuf>, suite: Option<Suite>, q: u64, header: bool) -> CmdResult {
    let mut out = tsv_header(header, "verify");
    out.push_str("invariant\tresult\n");
    if let Some(Suite::Lemma51) = suite {
        if q > 5 {
            return Err(Failure { code: 3, message: format!("exhaustive enumeration at q = {q} is out of budget") });
        }
        let (count, bad) = lemma51_exhaustive(q)?;
        if let Some(b) = bad {
            return Err(Failure::verification(format!(
                "lemma51 fails: |N : [N, W]| != q for the invariant module with rows {:?}",
                b.rows()
            )));
        }
        out.push_str(&format!("lemma51 q={q} ({count} modules)\tpass\n"));
        return Ok(out);
    }
    let path = file.expect("clap requires a file without --suite");
    let text = read_file(&path)?;
    let v = parse_json(&text, &path)?;
    if v.get("variant").is_some() {
        let seq = DefiningSequence::from_json(&text)?;
        verify_defining_sequence(&seq, &mut out)?;
    } else if v.get("depth").is_some() {
        let spec = DirectedSpec::from_json(&text)?;
        verify_directed(&spec, &mut out)?;
    } else {
        return Err(Failure::input(format!("{}: neither a defining sequence nor a directed spec", path.display())));
    }
    Ok(out)
}

fn verify_defining_sequence(seq: &DefiningSequence, out: &mut String) -> Result<(), Failure> {
    if let Err(v) = verify_sequence(seq) {
        return Err(Failure::verification(format!("verification failed: {v}")));
    }
    out.push_str("sequence invariants\tpass\n");
    let orders = sequence_orders(seq);
    let q = seq.q as usize;
    let mut checked = 0;
    for n in 1..=seq.layers.len() {
        if q.checked_pow(n as u32).is_none_or(|pts| pts > ORACLE_POINTS) {
            break;
        }
        let g = TruncatedGroup::generate(&seq.portraits_below(n), n)?;
        if g.order() != &orders.orders[n - 1] {
            return Err(Failure::verification(format!(
                "verification failed: oracle equivalence fails at level {n} ({} vs {})",
                g.order(),
                orders.orders[n - 1]
            )));
        }
        checked = n;
    }
    out.push_str(&format!("oracle equivalence n<={checked}\tpass\n"));
    let report = analyze(&orders, &BigUint::from(seq.q), &AnalysisOptions::default())?;
    if !lemma32_check(&report) {
        return Err(Failure::verification("verification failed: order identity (r_n recursion)"));
    }
    out.push_str("order identity\tpass\n");
    let fi = functional_identity_check(&report)?;
    if !fi.deviation.exact().is_some_and(Zero::is_zero) {
        return Err(Failure::verification(format!("verification failed: functional identity, deviation {}", fi.deviation)));
    }
    out.push_str("functional identity\tpass\n");
    Ok(())
}

fn verify_directed(spec: &DirectedSpec, out: &mut String) -> Result<(), Failure> {
    for d in 2..=spec.depth {
        if !b_has_order_dividing_q(spec.q, spec.n, d)? {
            return Err(Failure::verification(format!("verification failed: b_n^q = 1 fails at depth {d}")));
        }
    }
    out.push_str("b_n^q = 1\tpass\n");
    let a = a_group(spec, DEFAULT_POINT_CAP)?;
    if !generators_commute(&a) {
        return Err(Failure::verification("verification failed: A_n abelian"));
    }
    out.push_str("A_n abelian\tpass\n");
    let g = directed_group(spec, DEFAULT_POINT_CAP)?;
    if let Some(j) = (1..=spec.depth).find(|&j| !g.is_transitive_on_level(j)) {
        return Err(Failure::verification(format!("verification failed: level-transitivity fails at level {j}")));
    }
    out.push_str("level-transitivity\tpass\n");
    let depths: Vec<usize> = (1..=spec.depth).collect();
    let profile = density_profile_of(spec, &g, &depths)?;
    if let Some(b) = profile.layer_bounds.iter().find(|b| !b.holds) {
        return Err(Failure::verification(format!("verification failed: layer index bound at k = {}", b.k)));
    }
    out.push_str("layer index bounds\tpass\n");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_directed(
    q: usize,
    n: usize,
    depth: usize,
    spec_path: Option<PathBuf>,
    allow_q7: bool,
    point_cap: usize,
    format: Format,
    header: bool,
) -> CmdResult {
    let spec = match &spec_path {
        Some(path) => DirectedSpec::from_json(&read_file(path)?)?,
        None => DirectedSpec { q, n, depth },
    };
    match spec.q {
        5 => {}
        7 if allow_q7 => {}
        7 => return Err(Failure::input("q = 7 needs --allow-q7")),
        other => return Err(Failure::input(format!("q = {other} unsupported: q >= 5 is required, and only 5 or 7"))),
    }
    let spec = DirectedSpec::from_json(&spec.to_json())?;
    // the two chains are independent
    let (g, a) = std::thread::scope(|s| {
        let g = s.spawn(|| directed_group(&spec, point_cap));
        let a = s.spawn(|| a_group(&spec, point_cap));
        (g.join().expect("worker panicked"), a.join().expect("worker panicked"))
    });
    let (g, a) = (g?, a?);
    let depths: Vec<usize> = (1..=spec.depth).collect();
    let profile = density_profile_of(&spec, &g, &depths)?;
    let abelian = generators_commute(&a);
    let transitive = (1..=spec.depth).all(|j| g.is_transitive_on_level(j));
    let first_increase = profile.first_increase();
    let log_order = profile.rows.last().map(|r| r.log_order).unwrap_or_default();
    match format {
        Format::Tsv => {
            let mut s = tsv_header(header, "directed");
            s.push_str(&profile.to_tsv());
            s.push_str(&format!("# order\t{}^{}\n", spec.q, log_order));
            s.push_str(&format!("# A_n order\t{}\n", a.order()));
            s.push_str(&format!("# A_n abelian\t{abelian}\n"));
            s.push_str(&format!("# level-transitive\t{transitive}\n"));
            match first_increase {
                None => s.push_str("# density non-increasing\ttrue\n"),
                Some(d) => s.push_str(&format!("# density non-increasing\tfalse (first increase at depth {d})\n")),
            }
            Ok(s)
        }
        Format::Json => {
            let rows: Vec<Value> = profile
                .rows
                .iter()
                .map(|r| {
                    json!({
                        "depth": r.depth,
                        "log_order": format!("{}/{}", r.log_order.numer(), r.log_order.denom()),
                        "ambient_log": r.ambient_log,
                        "density": format!("{}/{}", r.density.numer(), r.density.denom()),
                    })
                })
                .collect();
            let mut body = Map::new();
            body.insert("spec".into(), serde_json::to_value(spec).expect("spec serializes"));
            body.insert("rows".into(), Value::Array(rows));
            body.insert("order".into(), json!(g.order().to_string()));
            body.insert("a_order".into(), json!(a.order().to_string()));
            body.insert("a_abelian".into(), json!(abelian));
            body.insert("level_transitive".into(), json!(transitive));
            body.insert("density_non_increasing".into(), json!(first_increase.is_none()));
            body.insert("first_increase".into(), json!(first_increase));
            Ok(json_output(header, "directed", body))
        }
    }
}
