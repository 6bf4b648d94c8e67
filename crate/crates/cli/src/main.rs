//! `apf`: command-line workflows for the shift/scale Cramér–von Mises test.
//!
//! Every command writes JSON (to `-o` or stdout). Failures exit nonzero with
//! `{"error": {"kind", "message"}}` on stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apf_core::limit::{calibrate_threshold, sample_limit_many, LimitGrid, DEFAULT_K, DEFAULT_M};
use apf_core::statistic::{cvm_simple, cvm_statistic};
use apf_core::testkit::{apf_check, power_study, run_test, size_study};
use apf_core::{
    estimate::fit_mle, simulate::sample_dataset, AltIntensity, ApfError, BaseIntensityModel, Dataset, FitOptions,
    FitSettings, ParamBox, ShiftScaleParams, ThresholdTable,
};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

/// Directory searched for `<model_id>.json` tabulated models when `--model`
/// is not a built-in.
const REGISTRY_ENV: &str = "APF_MODEL_REGISTRY";

#[derive(Parser)]
#[command(name = "apf", version, about = "Parameter-free goodness-of-fit test for shift/scale Poisson intensities")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArg {
    /// Built-in model id (gauss2, logistic5, gumbel3), a registry id or a
    /// path to a tabulated model file.
    #[arg(long)]
    model: String,
}

#[derive(Args, Clone)]
struct FitArgs {
    /// Search box for α as `min,max`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    alpha_range: Option<[f64; 2]>,
    /// Search box for β as `min,max`.
    #[arg(long, value_parser = parse_pair)]
    beta_range: Option<[f64; 2]>,
    /// Coarse grid points per axis.
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args, Clone)]
struct OutArg {
    /// Output file; stdout when absent.
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset of `n` trajectories.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, value_parser = parse_theta, allow_hyphen_values = true)]
        theta: ShiftScaleParams,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Maximum-likelihood estimate of (α, β).
    Fit {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Statistic at a given θ, or at the MLE when `--theta` is absent.
    Stat {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_theta, allow_hyphen_values = true)]
        theta: Option<ShiftScaleParams>,
        /// Fully specified hypothesis statistic at `--theta`.
        #[arg(long, requires = "theta")]
        simple: bool,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Tabulate thresholds of the limit distribution.
    Calibrate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long = "M", default_value_t = DEFAULT_M)]
        m: usize,
        #[arg(long = "K", default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Fit, evaluate the statistic and decide at level `eps`.
    Test {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Rejection rate on fresh null datasets.
    StudySize {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, value_parser = parse_theta, allow_hyphen_values = true)]
        theta: ShiftScaleParams,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Rejection rate on datasets drawn from a tabulated alternative.
    StudyPower {
        #[command(flatten)]
        model: ModelArg,
        /// `{"id", "grid": [[t, λ], ..], "total_mass"}`.
        #[arg(long)]
        alt: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Compare statistic distributions across θ and against the limit.
    ApfCheck {
        #[command(flatten)]
        model: ModelArg,
        /// Repeat for each parameter point.
        #[arg(long = "theta", value_parser = parse_theta, allow_hyphen_values = true, required = true)]
        thetas: Vec<ShiftScaleParams>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Limit draws to compare against.
        #[arg(long = "M", default_value_t = DEFAULT_M)]
        m: usize,
        #[arg(long = "K", default_value_t = DEFAULT_K)]
        k: usize,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Raw draws of the limit variable.
    LimitSample {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long = "M")]
        m: usize,
        #[arg(long = "K", default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got {s:?}"));
    }
    let a = parts[0].parse::<f64>().map_err(|e| e.to_string())?;
    let b = parts[1].parse::<f64>().map_err(|e| e.to_string())?;
    Ok([a, b])
}

fn parse_theta(s: &str) -> std::result::Result<ShiftScaleParams, String> {
    let [a, b] = parse_pair(s)?;
    ShiftScaleParams::new(a, b).map_err(|e| e.to_string())
}

fn resolve_model(id: &str) -> apf_core::Result<BaseIntensityModel> {
    if let Some(m) = BaseIntensityModel::builtin(id) {
        return Ok(m);
    }
    let direct = Path::new(id);
    if direct.extension().is_some_and(|e| e == "json") && direct.exists() {
        return BaseIntensityModel::load(direct);
    }
    if let Some(dir) = std::env::var_os(REGISTRY_ENV) {
        let path = Path::new(&dir).join(format!("{id}.json"));
        if path.exists() {
            return BaseIntensityModel::load(&path);
        }
    }
    Err(ApfError::UnknownModel(id.to_string()))
}

impl FitArgs {
    fn settings(&self) -> apf_core::Result<FitSettings> {
        let d = ParamBox::default();
        let [a0, a1] = self.alpha_range.unwrap_or([d.alpha_min, d.alpha_max]);
        let [b0, b1] = self.beta_range.unwrap_or([d.beta_min, d.beta_max]);
        let mut options = FitOptions::default();
        if let Some(g) = self.grid_size {
            options.grid_size = g;
        }
        if let Some(m) = self.max_iter {
            options.max_iter = m;
        }
        Ok(FitSettings { theta_box: ParamBox::new(a0, a1, b0, b1)?, options })
    }
}

fn emit(out: &OutArg, text: &str) -> apf_core::Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => writeln!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn run(command: Command) -> apf_core::Result<()> {
    match command {
        Command::Simulate { model, theta, n, seed, out } => {
            let m = resolve_model(&model.model)?;
            let data = sample_dataset(&m, &theta, n, seed)?;
            emit(&out, &data.to_json())
        }
        Command::Fit { model, data, fit, out } => {
            let m = resolve_model(&model.model)?;
            let settings = fit.settings()?;
            let d = Dataset::load(&data)?;
            let result = fit_mle(&m, &d, &settings.theta_box, &settings.options)?;
            let config = json!({"command": "fit", "model_id": m.model_id(), "data": data, "n": d.n(), "fit": settings});
            emit(&out, &pretty(&json!({"config": config, "result": result})))
        }
        Command::Stat { model, data, theta, simple, fit, out } => {
            let m = resolve_model(&model.model)?;
            let settings = fit.settings()?;
            let d = Dataset::load(&data)?;
            let value = match (theta, simple) {
                (Some(t), true) => cvm_simple(&d, &m, &t),
                (Some(t), false) => cvm_statistic(&m, &d, &t),
                (None, _) => {
                    let f = fit_mle(&m, &d, &settings.theta_box, &settings.options)?;
                    cvm_statistic(&m, &d, &f.theta_hat)
                }
            };
            let config = json!({
                "command": "stat", "model_id": m.model_id(), "data": data, "n": d.n(),
                "theta": theta, "simple": simple, "fit": settings,
            });
            emit(&out, &pretty(&json!({"config": config, "result": value})))
        }
        Command::Calibrate { model, eps, m, k, seed, out } => {
            let mdl = resolve_model(&model.model)?;
            let table = calibrate_threshold(&mdl, &eps, m, k, seed)?;
            emit(&out, &table.to_json())
        }
        Command::Test { model, data, table, eps, fit, out } => {
            let m = resolve_model(&model.model)?;
            let settings = fit.settings()?;
            let d = Dataset::load(&data)?;
            let t = ThresholdTable::load(&table)?;
            let report = run_test(&m, &d, eps, &t, &settings)?;
            let config = json!({
                "command": "test", "model_id": m.model_id(), "data": data, "table": table,
                "epsilon": eps, "n": d.n(), "fit": settings,
            });
            emit(&out, &pretty(&json!({"config": config, "result": report})))
        }
        Command::StudySize { model, theta, n, replicates, eps, table, seed, fit, out } => {
            let m = resolve_model(&model.model)?;
            let t = ThresholdTable::load(&table)?;
            let r = size_study(&m, &theta, n, replicates, eps, seed, &t, &fit.settings()?)?;
            emit(&out, &r.to_json())
        }
        Command::StudyPower { model, alt, n, replicates, eps, table, seed, fit, out } => {
            let m = resolve_model(&model.model)?;
            let a = AltIntensity::load(&alt)?;
            let t = ThresholdTable::load(&table)?;
            let r = power_study(&m, &a, n, replicates, eps, seed, &t, &fit.settings()?)?;
            emit(&out, &r.to_json())
        }
        Command::ApfCheck { model, thetas, n, replicates, seed, m, k, fit, out } => {
            let mdl = resolve_model(&model.model)?;
            let settings = fit.settings()?;
            let grid = LimitGrid::new(&mdl, k)?;
            let limit_seed = apf_core::rng::child_seed(seed, u64::MAX);
            let draws: Vec<f64> = sample_limit_many(&grid, m, limit_seed).into_iter().map(|d| d.delta0).collect();
            let report = apf_check(&mdl, &thetas, n, replicates, seed, &settings, &draws)?;
            let config = json!({
                "command": "apf-check", "model_id": mdl.model_id(), "thetas": thetas, "n": n,
                "replicates": replicates, "seed": seed, "M": m, "K": k, "limit_seed": limit_seed, "fit": settings,
            });
            emit(&out, &pretty(&json!({"config": config, "result": report})))
        }
        Command::LimitSample { model, m, k, seed, out } => {
            let mdl = resolve_model(&model.model)?;
            if m == 0 {
                return Err(ApfError::InvalidParams("M must be at least 1".into()));
            }
            let grid = LimitGrid::new(&mdl, k)?;
            let draws: Vec<f64> = sample_limit_many(&grid, m, seed).into_iter().map(|d| d.delta0).collect();
            let config = json!({"command": "limit-sample", "model_id": mdl.model_id(), "M": m, "K": k, "seed": seed});
            emit(&out, &serde_json::to_string(&json!({"config": config, "draws": draws})).expect("draws serialize"))
        }
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({"error": {"kind": kind, "message": message}}));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("Usage", e.to_string().trim(), 2),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return fail("Usage", "--threads must be at least 1", 2);
        }
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return fail("InvalidConfig", &e.to_string(), 1),
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}
