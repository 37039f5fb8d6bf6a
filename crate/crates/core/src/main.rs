use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fderiv::derivative::{BandwidthChoice, BandwidthRule, DerivativeEstimator};
use fderiv::fpca::{self, ComponentRule};
use fderiv::function_space::{inner_product, Curve, Grid};
use fderiv::ingest::{self, fmt_f64, Report};
use fderiv::regression::{self, KernelFamily, KernelSpec, RegressionFit};
use fderiv::simulate::{self, FunctionalConfig, ProcessSpec};
use fderiv::smallball::{self, SmallBallParams};
use fderiv::{derivative, Error, Result, Sample};

#[derive(Parser)]
#[command(
    name = "fderiv",
    version,
    about = "Functional regression derivatives from sampled curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean, eigenfunctions and scores of a curve sample.
    Fpca(FpcaArgs),
    /// Nadaraya-Watson estimate of the regression functional.
    Fit(FitArgs),
    /// Derivative coefficients along the leading eigenfunctions.
    Derive(DeriveArgs),
    /// Generate curves and responses with known ground truth.
    Simulate(SimulateArgs),
    /// Small-ball probabilities against their analytic law.
    Smallball(SmallballArgs),
    /// Growth-rate pipeline on height records.
    GrowthDemo(GrowthArgs),
}

#[derive(Args)]
struct FpcaArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = fpca::DEFAULT_FVE)]
    fve: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long, default_value = "quadratic")]
    kernel: KernelFamily,
    /// `auto` for cross-validation or a positive number.
    #[arg(long, default_value = "auto")]
    bandwidth: String,
    /// `mean`, `all`, or a 1-based curve index.
    #[arg(long, default_value = "mean")]
    at: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    /// Number of eigen-directions; chosen by `--fve` when omitted.
    #[arg(long)]
    components: Option<usize>,
    #[arg(long, default_value_t = fpca::DEFAULT_FVE)]
    fve: f64,
    #[arg(long, default_value = "auto")]
    h1: String,
    #[arg(long, default_value = "auto")]
    h2: String,
    #[arg(long, default_value = "quadratic")]
    kernel: KernelFamily,
    /// `all`, `mean`, or a 1-based curve index.
    #[arg(long, default_value = "all")]
    at: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Eigenvalue preset, e.g. `expdecay-b2-beta1` or `poly-a2`.
    #[arg(long)]
    preset: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Functional as inline JSON or a path to a JSON file.
    #[arg(long)]
    functional: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of grid points.
    #[arg(long, default_value_t = 101)]
    m: usize,
    /// Number of terms in the expansion.
    #[arg(long = "k-true", default_value_t = 20)]
    k_true: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SmallballArgs {
    #[arg(long = "B", default_value_t = 2.0)]
    decay: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long = "u-grid", value_delimiter = ',', default_value = "0.5,0.3,0.2,0.1")]
    u_grid: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    mc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of eigenvalues in the truncated process.
    #[arg(long = "J", default_value_t = 25)]
    j: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GrowthArgs {
    #[arg(long)]
    heights: PathBuf,
    #[arg(long)]
    ages: PathBuf,
    /// Last age used for the growth-rate predictor.
    #[arg(long, default_value_t = 10.0)]
    cutoff: f64,
    /// Age whose height is the response; defaults to the last age.
    #[arg(long = "response-age")]
    response_age: Option<f64>,
    #[arg(long, default_value_t = fpca::DEFAULT_FVE)]
    fve: f64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_auto(s: &str, what: &str) -> Result<Option<f64>> {
    if s == "auto" {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Some(v)),
        _ => Err(Error::InvalidArgument(format!(
            "{what} must be 'auto' or a positive number, got '{s}'"
        ))),
    }
}

enum At {
    Mean,
    All,
    Index(usize),
}

fn parse_at(s: &str, n: usize) -> Result<At> {
    match s {
        "mean" => Ok(At::Mean),
        "all" => Ok(At::All),
        _ => match s.parse::<usize>() {
            Ok(i) if (1..=n).contains(&i) => Ok(At::Index(i - 1)),
            _ => Err(Error::InvalidArgument(format!(
                "--at must be 'mean', 'all' or an index in 1..={n}, got '{s}'"
            ))),
        },
    }
}

/// Evaluation points as `(label, curve)`.
fn eval_points(at: &At, sample: &Sample, mean: &Curve) -> Vec<(String, Curve)> {
    match at {
        At::Mean => vec![("mean".into(), mean.clone())],
        At::Index(i) => vec![(sample.label(*i), sample.curves()[*i].clone())],
        At::All => {
            let mut v: Vec<_> = (0..sample.len())
                .map(|i| (sample.label(i), sample.curves()[i].clone()))
                .collect();
            v.push(("mean".into(), mean.clone()));
            v
        }
    }
}

fn run_fpca(a: FpcaArgs) -> Result<()> {
    let sample = ingest::load_curves_csv(&a.input)?;
    let eig = fpca::fit(&sample, ComponentRule::Fve(a.fve))?;
    let report = Report {
        score_ids: (0..sample.len()).map(|i| sample.label(i)).collect(),
        eigen: Some(eig),
        time_range: sample.time_range(),
        config: json!({"command": "fpca", "input": a.input, "fve": a.fve}),
        ..Report::default()
    };
    ingest::export_report(&report, &a.out)
}

fn run_fit(a: FitArgs) -> Result<()> {
    let sample = ingest::load_curves_csv(&a.input)?;
    let y = ingest::load_responses(&a.responses, &sample)?;
    let kernel = KernelSpec::new(a.kernel, 1.0)?;
    let (h, cv) = match parse_auto(&a.bandwidth, "--bandwidth")? {
        Some(h) => (h, false),
        None => {
            let cands = regression::default_candidates(&sample)?;
            (regression::cv_bandwidth(&sample, &y, &kernel, &cands)?, true)
        }
    };
    let mean = fpca::mean_function(&sample)?;
    let at = parse_at(&a.at, sample.len())?;
    let points = eval_points(&at, &sample, &mean);
    let fit = RegressionFit::new(sample, y, kernel, h)?;
    let estimates = points
        .iter()
        .map(|(id, x)| regression::nw_estimate(&fit, x).map(|v| json!({"id": id, "estimate": v})))
        .collect::<Result<Vec<_>>>()?;
    let mut extra = serde_json::Map::new();
    extra.insert("bandwidth".into(), h.into());
    extra.insert("bandwidth_from_cv".into(), cv.into());
    extra.insert("estimates".into(), estimates.into());
    let report = Report {
        time_range: fit.sample.time_range(),
        config: json!({"command": "fit", "input": a.input, "responses": a.responses,
                       "kernel": kernel, "bandwidth": a.bandwidth, "at": a.at}),
        extra,
        ..Report::default()
    };
    ingest::export_report(&report, &a.out)
}

fn bandwidth_rule(h1: &str, h2: &str) -> Result<BandwidthRule> {
    let mut rule = BandwidthRule::default();
    if let Some(h) = parse_auto(h1, "--h1")? {
        rule.h1 = BandwidthChoice::Fixed(h);
    }
    if let Some(h) = parse_auto(h2, "--h2")? {
        rule.h2 = BandwidthChoice::Fixed(h);
    }
    Ok(rule)
}

fn run_derive(a: DeriveArgs) -> Result<()> {
    let sample = ingest::load_curves_csv(&a.input)?;
    let y = ingest::load_responses(&a.responses, &sample)?;
    let rule_k = a.components.map_or(ComponentRule::Fve(a.fve), ComponentRule::Fixed);
    let eig = fpca::fit(&sample, rule_k)?;
    let kernel = KernelSpec::new(a.kernel, 1.0)?;
    let rule = bandwidth_rule(&a.h1, &a.h2)?;
    let est = DerivativeEstimator::new(&sample, &y, &eig, kernel, rule)?;
    let at = parse_at(&a.at, sample.len())?;
    let k = eig.components();
    let gammas = eval_points(&at, &sample, &eig.mean)
        .into_iter()
        .map(|(id, x)| est.gradient_at(&x, k).map(|e| (id, e)))
        .collect::<Result<Vec<_>>>()?;
    let mut extra = serde_json::Map::new();
    extra.insert("h1_at_mean".into(), est.h1_at(&eig.mean)?.into());
    let report = Report {
        score_ids: (0..sample.len()).map(|i| sample.label(i)).collect(),
        time_range: sample.time_range(),
        config: json!({"command": "derive", "input": a.input, "responses": a.responses,
                       "components": k, "h1": a.h1, "h2": a.h2, "kernel": kernel, "at": a.at}),
        eigen: Some(eig.clone()),
        gammas,
        extra,
    };
    ingest::export_report(&report, &a.out)
}

fn read_functional(arg: &str) -> Result<FunctionalConfig> {
    if arg.trim_start().starts_with('{') {
        return FunctionalConfig::from_json(arg);
    }
    let text = fs::read_to_string(arg).map_err(|e| Error::Io {
        path: PathBuf::from(arg),
        source: e,
    })?;
    FunctionalConfig::from_json(&text)
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let grid = Grid::uniform(a.m)?;
    let spec = ProcessSpec::from_preset(&a.preset, &grid, a.k_true)?;
    let config = read_functional(&a.functional)?;
    let f = config.build(&spec)?;
    let sample = simulate::sample_process(&spec, a.n, a.seed)?;
    let y = simulate::gen_response(&sample, &f, a.sigma, a.seed)?;
    create_dir(&a.out)?;
    ingest::write_curves_csv(&sample, a.out.join("curves.csv"))?;
    let ids: Vec<String> = (0..sample.len()).map(|i| sample.label(i)).collect();
    ingest::write_responses_csv(&ids, &y, a.out.join("responses.csv"))?;
    let gamma_mean = (0..spec.k_true())
        .map(|j| simulate::true_gamma(&f, &spec.mean, &spec, j))
        .collect::<Result<Vec<_>>>()?;
    let truth = json!({
        "config": {"command": "simulate", "preset": a.preset, "n": a.n, "sigma": a.sigma,
                   "functional": config, "seed": a.seed, "m": a.m, "k_true": a.k_true},
        "eigenvalues": spec.eigenvalues,
        "true_gamma_at_mean": gamma_mean,
        "g_at_mean": f.evaluate(&spec.mean)?,
    });
    ingest::write_json(&a.out.join("summary.json"), &truth)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run_smallball(a: SmallballArgs) -> Result<()> {
    let p = SmallBallParams::new(a.decay, a.beta, a.b)?;
    if a.j == 0 || a.mc == 0 {
        return Err(Error::InvalidArgument("--J and --mc must be positive".into()));
    }
    let theta: Vec<f64> = (1..=a.j).map(|j| (-a.decay * (j as f64).powf(a.beta)).exp()).collect();
    let log_pi = a
        .u_grid
        .iter()
        .map(|&u| smallball::log_pi_u(u, &p))
        .collect::<Result<Vec<_>>>()?;
    let probs = smallball::mc_small_ball_many(&theta, a.mc, &a.u_grid, a.seed);
    create_dir(&a.out)?;
    let mut text = String::from("u,log_pi,p_mc,log_ratio\n");
    let mut rows = Vec::new();
    for ((u, lp), pm) in a.u_grid.iter().zip(&log_pi).zip(&probs) {
        let ratio = if *pm > 0.0 { pm.ln() / lp } else { f64::NAN };
        text += &format!("{},{},{},{}\n", fmt_f64(*u), fmt_f64(*lp), fmt_f64(*pm), fmt_f64(ratio));
        rows.push(json!({"u": u, "log_pi": lp, "p_mc": pm, "log_ratio": if ratio.is_finite() { json!(ratio) } else { json!(null) }}));
    }
    let path = a.out.join("smallball.csv");
    fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
    let summary = json!({
        "config": {"command": "smallball", "B": a.decay, "beta": a.beta, "b": a.b,
                   "u_grid": a.u_grid, "mc": a.mc, "seed": a.seed, "J": a.j},
        "results": rows,
    });
    ingest::write_json(&a.out.join("summary.json"), &summary)
}

fn run_growth(a: GrowthArgs) -> Result<()> {
    let table = ingest::load_growth_table(&a.heights, &a.ages)?;
    let last = *table.ages().last().unwrap();
    let response_age = a.response_age.unwrap_or(last);
    let col = table
        .ages()
        .iter()
        .position(|&s| s == response_age)
        .ok_or_else(|| Error::InvalidArgument(format!("no heights recorded at age {response_age}")))?;
    if response_age <= a.cutoff {
        return Err(Error::InvalidArgument(format!(
            "response age {response_age} must exceed the predictor cutoff {}",
            a.cutoff
        )));
    }
    let y: Vec<f64> = table.heights().iter().map(|r| r[col]).collect();
    let predictor = table.select_ages(|s| s <= a.cutoff)?;
    let rates = ingest::growth_rates(&predictor)?;
    let eig = fpca::fit(&rates, ComponentRule::Fve(a.fve))?;
    let k = eig.components();
    let est = DerivativeEstimator::new(&rates, &y, &eig, KernelSpec::default(), BandwidthRule::default())?;
    let gammas = eval_points(&At::All, &rates, &eig.mean)
        .into_iter()
        .map(|(id, x)| est.gradient_at(&x, k).map(|e| (id, e)))
        .collect::<Result<Vec<_>>>()?;

    // Inner product of each generating function with its steepest direction
    // against the coefficient-space value.
    let mut identity_err: f64 = 0.0;
    for (_, e) in gammas.iter().filter(|(_, e)| e.is_complete()) {
        let g = derivative::derivative_generating_function(e, k)?;
        let Ok(dir) = derivative::steepest_direction(e) else {
            continue;
        };
        let z = dir
            .iter()
            .zip(&e.eigenfunctions)
            .fold(Curve::zeros(Arc::clone(g.grid())), |acc, (c, psi)| {
                acc.add(&psi.scale(*c)).unwrap()
            });
        let lhs = inner_product(&g, &z)?;
        let rhs = derivative::directional_derivative(e, &dir)?;
        identity_err = identity_err.max((lhs - rhs).abs());
    }

    create_dir(&a.out)?;
    ingest::write_curves_csv(&rates, a.out.join("rates.csv"))?;
    let shares: Vec<f64> = eig.eigenvalues.iter().map(|t| t / eig.total_variance).collect();
    let mut extra = serde_json::Map::new();
    extra.insert("h1_at_mean".into(), est.h1_at(&eig.mean)?.into());
    extra.insert("variance_shares".into(), json!(shares));
    extra.insert("dgf_identity_max_error".into(), identity_err.into());
    extra.insert("rate_ages".into(), json!(ingest::midpoints(predictor.ages())));
    let report = Report {
        score_ids: rates.ids().map(<[String]>::to_vec).unwrap_or_default(),
        time_range: rates.time_range(),
        config: json!({"command": "growth-demo", "heights": a.heights, "ages": a.ages,
                       "cutoff": a.cutoff, "response_age": response_age, "fve": a.fve}),
        eigen: Some(eig.clone()),
        gammas,
        extra,
    };
    ingest::export_report(&report, &a.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fpca(a) => run_fpca(a),
        Command::Fit(a) => run_fit(a),
        Command::Derive(a) => run_derive(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Smallball(a) => run_smallball(a),
        Command::GrowthDemo(a) => run_growth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
