use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rodtopo::intlin::{determinant_divisor, format_vector, hermite_normal_form, smith_normal_form, IntMatrix};
use rodtopo::modelmap::{build_model_map, residual_convergence, verify_tension, GridSpec, ModelMapOptions};
use rodtopo::plumbing::{doc_decomposition, verify_plumbing_relations, Piece};
use rodtopo::roddiagram::{
    asymptotic_end, classify_corner, horizon_topologies, int_from_json, int_to_json, vector_to_json, CornerClass,
    RodDiagram, Shape,
};
use rodtopo::topology::{classify, compactify, end_fundamental_group, fillin_path, fundamental_group};
use rodtopo::IntVector;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "rodtopo", version, about = "Rod diagram topology and model-map checks")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a rod diagram.
    Validate { input: PathBuf },
    /// Hermite normal form of a matrix, or of a diagram's structure columns.
    Hnf { input: PathBuf },
    /// Smith normal form of a matrix, or of a diagram's structure columns.
    Snf { input: PathBuf },
    /// Determinant divisors; all orders unless `--k` is given.
    Detk {
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Corners, horizon and end topology, fundamental groups.
    Analyze { input: PathBuf },
    /// Split the domain of outer communication into pieces.
    Decompose { input: PathBuf },
    /// Fundamental group of the total space.
    Pi1 { input: PathBuf },
    /// Unimodular chain between two structures, from `{"v": [..], "w": [..]}`.
    Fillin { input: PathBuf },
    /// Fill horizons and the end to get a closed diagram.
    Compactify { input: PathBuf },
    /// Place a closed diagram in the classification chart.
    Classify {
        input: PathBuf,
        #[arg(long)]
        spin: bool,
    },
    /// Build the model map and check its tension.
    ModelVerify {
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        grid_h: f64,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = 5)]
        rays: usize,
        /// Excision radius around the axis, in multiples of the grid spacing.
        #[arg(long, default_value_t = 3.0)]
        excision: f64,
        /// Dump the sampled tension field as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

enum Failure {
    /// Exit 2.
    Usage(String),
    /// Exit 1.
    Invalid(String),
}

struct Report {
    json: Value,
    text: String,
    ok: bool,
}

impl Report {
    fn ok(json: Value, text: String) -> Self {
        Report { json, text, ok: true }
    }
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: invalid JSON: {e}", path.display())))
}

fn read_diagram(path: &Path) -> Result<RodDiagram, Failure> {
    let value = read_json(path)?;
    RodDiagram::from_json(&value).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn int_vector(v: &Value) -> Option<IntVector> {
    v.as_array()?.iter().map(int_from_json).collect()
}

fn int_vectors(v: &Value) -> Option<Vec<IntVector>> {
    v.as_array()?.iter().map(int_vector).collect()
}

/// `{"rows": ..}`, `{"columns": ..}` or a diagram, whose structures become columns.
fn read_matrix(path: &Path) -> Result<IntMatrix, Failure> {
    let value = read_json(path)?;
    let bad = |what: &str| Failure::Invalid(format!("{}: `{what}` must be a list of integer vectors", path.display()));
    if let Some(rows) = value.get("rows") {
        let rows = int_vectors(rows).ok_or_else(|| bad("rows"))?;
        return IntMatrix::from_rows(&rows).map_err(invalid);
    }
    if let Some(cols) = value.get("columns") {
        let cols = int_vectors(cols).ok_or_else(|| bad("columns"))?;
        return IntMatrix::from_columns(&cols).map_err(invalid);
    }
    let d = RodDiagram::from_json(&value).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    Ok(d.structure_matrix())
}

fn matrix_json(m: &IntMatrix) -> Value {
    Value::Array(m.row_vectors().iter().map(|r| vector_to_json(r)).collect())
}

fn validate(path: &Path) -> Result<Report, Failure> {
    let d = read_diagram(path)?;
    let json = json!({
        "valid": true,
        "n": d.n(),
        "shape": d.shape().as_str(),
        "rods": d.len(),
        "corners": d.corners().len(),
        "horizons": d.horizons().len(),
        "diagram": d.to_json(),
    });
    Ok(Report::ok(json, format!("valid\n{d}")))
}

fn hnf(path: &Path) -> Result<Report, Failure> {
    let a = read_matrix(path)?;
    let f = hermite_normal_form(&a);
    let pivots: Vec<Value> = f.pivots.iter().map(|&(r, c)| json!([r, c])).collect();
    let json = json!({
        "h": matrix_json(&f.h),
        "h_columns": f.h.columns().iter().map(|c| vector_to_json(c)).collect::<Vec<_>>(),
        "q": matrix_json(&f.q),
        "pivots": pivots,
    });
    let text = format!("H =\n{}Q =\n{}pivots {:?}", f.h, f.q, f.pivots);
    Ok(Report::ok(json, text))
}

fn snf(path: &Path) -> Result<Report, Failure> {
    let a = read_matrix(path)?;
    let f = smith_normal_form(&a);
    let divisors: Vec<Value> = f.divisors.iter().map(int_to_json).collect();
    let json = json!({
        "s": matrix_json(&f.s),
        "u": matrix_json(&f.u),
        "v": matrix_json(&f.v),
        "divisors": divisors,
        "rank": f.rank(),
    });
    let shown: Vec<String> = f.divisors.iter().map(ToString::to_string).collect();
    let text = format!("S =\n{}U =\n{}V =\n{}divisors [{}]", f.s, f.u, f.v, shown.join(", "));
    Ok(Report::ok(json, text))
}

fn detk(path: &Path, k: Option<usize>) -> Result<Report, Failure> {
    let a = read_matrix(path)?;
    let orders: Vec<usize> = match k {
        Some(k) => vec![k],
        None => (1..=a.rows().min(a.cols())).collect(),
    };
    let mut values = Vec::new();
    let mut text = String::new();
    for k in orders {
        let d = determinant_divisor(&a, k).map_err(invalid)?;
        let _ = writeln!(text, "Det_{k} = {d}");
        values.push(json!({ "k": k, "det": int_to_json(&d) }));
    }
    Ok(Report::ok(json!({ "divisors": values }), text.trim_end().to_string()))
}

fn analyze(path: &Path) -> Result<Report, Failure> {
    let d = read_diagram(path)?;
    let mut text = format!("{d}\n");
    let mut corners = Vec::new();
    let mut all_admissible = true;
    for c in d.corners() {
        let v = d.structure(c.left).expect("axis");
        let w = d.structure(c.right).expect("axis");
        let (class, det) = classify_corner(v, w).map_err(invalid)?;
        let admissible = class == CornerClass::Admissible;
        all_admissible &= admissible;
        let _ = writeln!(
            text,
            "corner {}|{}: {} {}  Det_2 = {det}  {}",
            c.left,
            c.right,
            format_vector(v),
            format_vector(w),
            if admissible { "admissible" } else { "inadmissible" }
        );
        corners.push(json!({ "rods": [c.left, c.right], "det2": int_to_json(&det), "admissible": admissible }));
    }
    if corners.is_empty() {
        text.push_str("no corners\n");
    }
    let mut json = json!({
        "n": d.n(),
        "shape": d.shape().as_str(),
        "corners": corners,
        "corners_admissible": all_admissible,
    });
    if d.shape() == Shape::HalfPlane {
        let horizons = horizon_topologies(&d).map_err(invalid)?;
        for (i, cs) in &horizons {
            let _ = writeln!(text, "horizon {i}: {cs}");
        }
        json["horizons"] =
            Value::Array(horizons.iter().map(|(i, cs)| json!({ "rod": i, "topology": cs.to_json() })).collect());
        let end = asymptotic_end(&d).map_err(invalid)?;
        let end_group = end_fundamental_group(&d).map_err(invalid)?;
        let _ = writeln!(text, "end: {end}  π₁ = {end_group}");
        json["end"] = json!({ "topology": end.to_json(), "pi1": end_group.to_json() });
    }
    let g = fundamental_group(&d).map_err(invalid)?;
    let _ = write!(text, "π₁ = {g}{}", if g.is_trivial() { " (simply connected)" } else { "" });
    json["pi1"] = g.to_json();
    json["simply_connected"] = json!(g.is_trivial());
    Ok(Report { json, text, ok: all_admissible })
}

fn decompose(path: &Path) -> Result<Report, Failure> {
    let d = read_diagram(path)?;
    let dec = doc_decomposition(&d).map_err(invalid)?;
    let mut json = dec.to_json();
    let mut text = dec.to_string();
    let mut ok = true;
    let mut reports = Vec::new();
    for p in &dec.pieces {
        if let Piece::Plumbing { rods, plumbing } = p {
            let rep = verify_plumbing_relations(&plumbing.bundles, &plumbing.vectors, plumbing.n).map_err(invalid)?;
            ok &= rep.is_valid();
            if let Some(fail) = rep.first_failure() {
                let _ = write!(text, "\nrelation failure on rods {rods:?}: {}", fail.detail);
            }
            reports.push(json!({ "rods": rods, "relations": rep.to_json() }));
        }
    }
    json["relations"] = Value::Array(reports);
    Ok(Report { json, text, ok })
}

fn pi1(path: &Path) -> Result<Report, Failure> {
    let d = read_diagram(path)?;
    let g = fundamental_group(&d).map_err(invalid)?;
    let json = json!({ "pi1": g.to_json(), "simply_connected": g.is_trivial() });
    Ok(Report::ok(json, format!("π₁ = {g}")))
}

fn fillin(path: &Path) -> Result<Report, Failure> {
    let value = read_json(path)?;
    let get = |key: &str| {
        value
            .get(key)
            .and_then(int_vector)
            .ok_or_else(|| Failure::Invalid(format!("{}: `{key}` must be an integer vector", path.display())))
    };
    let (v, w) = (get("v")?, get("w")?);
    let chain = fillin_path(&v, &w).map_err(invalid)?;
    let shown: Vec<String> = chain.iter().map(|c| format_vector(c)).collect();
    let json = json!({ "path": chain.iter().map(|c| vector_to_json(c)).collect::<Vec<_>>() });
    Ok(Report::ok(json, shown.join(" -> ")))
}

fn compactify_cmd(path: &Path) -> Result<Report, Failure> {
    let d = read_diagram(path)?;
    let plan = compactify(&d).map_err(invalid)?;
    Ok(Report::ok(plan.to_json(), plan.to_string()))
}

fn classify_cmd(path: &Path, spin: bool) -> Result<Report, Failure> {
    let d = read_diagram(path)?;
    let (closed, plan) = match d.shape() {
        Shape::Disk => (d, None),
        Shape::HalfPlane => {
            let plan = compactify(&d).map_err(invalid)?;
            (plan.diagram.clone(), Some(plan))
        }
    };
    let c = classify(&closed, spin).map_err(invalid)?;
    let mut json = c.to_json();
    if let Some(plan) = &plan {
        json["compactified"] = plan.diagram.to_json();
    }
    Ok(Report::ok(json, c.to_string()))
}

fn model_verify(
    path: &Path,
    grid_h: f64,
    epsilon: f64,
    rays: usize,
    excision: f64,
    csv: Option<&Path>,
) -> Result<Report, Failure> {
    if !(grid_h > 0.0 && epsilon > 0.0 && epsilon < std::f64::consts::FRAC_PI_2 && excision > 0.0 && rays > 0) {
        return Err(Failure::Usage("grid-h, excision and rays must be positive and epsilon in (0, π/2)".into()));
    }
    let d = read_diagram(path)?;
    let options = ModelMapOptions { epsilon, ..ModelMapOptions::default() };
    let map = build_model_map(&d, &options).map_err(invalid)?;
    let grid = GridSpec { h: grid_h, excision_factor: excision, rays, ..GridSpec::default() };
    let report = verify_tension(&map, &grid);
    let probes: Vec<(f64, f64)> = map
        .probe_heights()
        .iter()
        .filter(|&&z| map.endpoints().iter().all(|&e| 1f64.hypot(z - e) > 1.0))
        .map(|&z| (1.0, z))
        .collect();
    let convergence = residual_convergence(&map, &probes, 2.0 * grid_h, 3);
    if let Some(csv) = csv {
        fs::write(csv, report.to_csv()).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", csv.display())))?;
    }
    let mut json = report.to_json();
    json["convergence"] = json!({ "h": convergence.hs, "rms_tau": convergence.rms, "orders": convergence.orders });
    let mut text = format!(
        "points {}  sup|τ| {:.4e}  sup|τ^F| {:.4e}  sup|τ^ω| {:.4e}\n",
        report.points, report.sup_tau, report.sup_tau_f, report.sup_tau_omega
    );
    for a in &report.annuli {
        let _ = writeln!(
            text,
            "annulus [{}, {}): sup {:.4e} -> {:.4e}  ratio {:.4}  {}",
            a.inner,
            a.outer,
            a.sup_h,
            a.sup_half,
            a.ratio,
            pass(a.passed)
        );
    }
    let axis_worst = report.axis.iter().map(|p| p.slope).fold(f64::INFINITY, f64::min);
    let _ = writeln!(
        text,
        "axis probes {}: worst slope {axis_worst:.3}  {}",
        report.axis.len(),
        pass(report.axis_passed())
    );
    let dec = &report.decay;
    let _ = writeln!(
        text,
        "decay over r in [{:.1}, {:.1}]: slope {:.3} ± {:.3}{}  {}",
        dec.r_min,
        dec.r_max,
        dec.pooled_slope,
        2.0 * dec.pooled_stderr,
        if dec.harmonic { " (harmonic)" } else { "" },
        pass(dec.passed)
    );
    let orders: Vec<String> = convergence.orders.iter().map(|o| format!("{o:.3}")).collect();
    let _ = write!(text, "residual order [{}]\n{}", orders.join(", "), pass(report.passed()));
    Ok(Report { json, text, ok: report.passed() })
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    match &cli.command {
        Command::Validate { input } => validate(input),
        Command::Hnf { input } => hnf(input),
        Command::Snf { input } => snf(input),
        Command::Detk { input, k } => detk(input, *k),
        Command::Analyze { input } => analyze(input),
        Command::Decompose { input } => decompose(input),
        Command::Pi1 { input } => pi1(input),
        Command::Fillin { input } => fillin(input),
        Command::Compactify { input } => compactify_cmd(input),
        Command::Classify { input, spin } => classify_cmd(input, *spin),
        Command::ModelVerify { input, grid_h, epsilon, rays, excision, csv } => {
            model_verify(input, *grid_h, *epsilon, *rays, *excision, csv.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let body = match cli.format {
        Format::Json => serde_json::to_string_pretty(&report.json).expect("serializable") + "\n",
        Format::Text => report.text.trim_end().to_string() + "\n",
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = fs::write(path, body) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{body}"),
    }
    if report.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
