//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Runs without the libtest harness so the criteria execute in order
//! and share the expensive limit draws.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use apf_core::estimate::{fisher_star, fit_mle};
use apf_core::limit::{sample_limit_many, sample_limit_simple, threshold_table_from_draws, LimitDraw, LimitGrid};
use apf_core::rng;
use apf_core::simulate::{sample_dataset, Dataset, Trajectory};
use apf_core::statistic::cvm_statistic;
use apf_core::testkit::{apf_check, power_study, size_study, AltIntensity, FitSettings};
use apf_core::{BaseIntensityModel, ShiftScaleParams, ThresholdTable};
use rand::Rng;
use rayon::prelude::*;

const SEED: u64 = 20_240_611;
const LIMIT_DRAWS: usize = 100_000;
const CELLS: usize = 8192;

struct Shared {
    model: BaseIntensityModel,
    draws: Vec<LimitDraw>,
    table: ThresholdTable,
    settings: FitSettings,
}

impl Shared {
    fn delta0(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.delta0).collect()
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn theta(a: f64, b: f64) -> ShiftScaleParams {
    ShiftScaleParams::new(a, b).unwrap()
}

fn gauss_fisher() -> [[f64; 2]; 2] {
    let root = (2.0 * std::f64::consts::PI).sqrt();
    [[2.0 * root, 0.0], [0.0, 6.0 * root]]
}

fn fisher_matrix(_: &Shared) -> Outcome {
    let got = fisher_star(&BaseIntensityModel::gauss2()).unwrap().matrix;
    let want = gauss_fisher();
    let diag_err = (0..2).map(|i| (got[i][i] / want[i][i] - 1.0).abs()).fold(0.0, f64::max);
    let off_err = got[0][1].abs() / want[0][0];
    let dets: Vec<(String, f64)> = BaseIntensityModel::builtin_ids()
        .iter()
        .map(|id| (id.to_string(), fisher_star(&BaseIntensityModel::builtin(id).unwrap()).map_or(f64::NAN, |f| f.det)))
        .collect();
    let pass = diag_err < 1e-6 && off_err < 1e-6 && dets.iter().all(|d| d.1 > 0.0);
    outcome(pass, format!("max rel err {diag_err:.2e}, off-diagonal {off_err:.2e}, det {dets:?}"))
}

fn mle_covariance(s: &Shared) -> Outcome {
    let th0 = theta(2.0, 1.5);
    let (n, reps) = (2000usize, 500u64);
    let scale = (n as f64 / th0.beta).sqrt();
    let z: Vec<[f64; 2]> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let d = sample_dataset(&s.model, &th0, n, rng::child_seed(SEED ^ 2, r)).unwrap();
            let f = fit_mle(&s.model, &d, &s.settings.theta_box, &s.settings.options).unwrap().theta_hat;
            [scale * (f.alpha - th0.alpha), scale * (f.beta - th0.beta)]
        })
        .collect();
    let m = reps as f64;
    let mean = [z.iter().map(|v| v[0]).sum::<f64>() / m, z.iter().map(|v| v[1]).sum::<f64>() / m];
    let mut cov = [[0.0; 2]; 2];
    for v in &z {
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]) / (m - 1.0);
            }
        }
    }
    let target = common::inv2(gauss_fisher());
    let frob = |a: [[f64; 2]; 2]| a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let diff =
        [[cov[0][0] - target[0][0], cov[0][1] - target[0][1]], [cov[1][0] - target[1][0], cov[1][1] - target[1][1]]];
    let rel = frob(diff) / frob(target);
    outcome(rel < 0.15, format!("relative Frobenius distance {rel:.4} (cov {cov:?} vs {target:?})"))
}

fn coupling(s: &Shared) -> Outcome {
    let target = common::inv2(gauss_fisher());
    let mut lines = Vec::new();
    let mut pass = true;
    let mut check = |name: &str, x: Vec<f64>, want: f64| {
        let (m, se) = common::mean_se(&x);
        let ok = (m - want).abs() <= 3.0 * se;
        pass &= ok;
        lines.push(format!("{name} {m:.5}±{se:.5} vs {want:.5}"));
    };
    check("E[W ζ1]", s.draws.iter().map(|d| d.w_end * d.zeta[0]).collect(), 0.0);
    check("E[W ζ2]", s.draws.iter().map(|d| d.w_end * d.zeta[1]).collect(), 1.0 / 3.0);
    check("E[ζ1ζ1]", s.draws.iter().map(|d| d.zeta[0] * d.zeta[0]).collect(), target[0][0]);
    check("E[ζ1ζ2]", s.draws.iter().map(|d| d.zeta[0] * d.zeta[1]).collect(), target[0][1]);
    check("E[ζ2ζ2]", s.draws.iter().map(|d| d.zeta[1] * d.zeta[1]).collect(), target[1][1]);
    outcome(pass, lines.join(", "))
}

fn simple_limit(_: &Shared) -> Outcome {
    let draws: Vec<f64> =
        (0..LIMIT_DRAWS as u64).map(|i| sample_limit_simple(4096, &mut rng::substream(SEED ^ 4, i)).unwrap()).collect();
    let (m, _) = common::mean_se(&draws);
    let v = common::variance(&draws);
    let pass = (m - 0.5).abs() <= 0.005 && (v - 1.0 / 3.0).abs() <= 0.01;
    outcome(pass, format!("mean {m:.5}, variance {v:.5}"))
}

fn apf_property(s: &Shared) -> Outcome {
    let thetas = [theta(2.0, 1.5), theta(-1.0, 0.7), theta(0.0, 3.0)];
    let report = apf_check(&s.model, &thetas, 1000, 2000, SEED ^ 5, &s.settings, &s.delta0()).unwrap();
    let min_p = report.pairwise.iter().map(|p| p.ks.p_value).fold(1.0, f64::min);
    let max_d = report.versus_limit.iter().map(|k| k.statistic).fold(0.0, f64::max);
    let pairs: Vec<String> = report
        .pairwise
        .iter()
        .map(|p| format!("({},{}) D={:.4} p={:.3}", p.i, p.j, p.ks.statistic, p.ks.p_value))
        .collect();
    let limit: Vec<String> = report.versus_limit.iter().map(|k| format!("{:.4}", k.statistic)).collect();
    outcome(
        min_p > 0.01 && max_d < 0.05,
        format!(
            "pairwise [{}]; vs limit D [{}]; means {:?}; boundary hits {:?}",
            pairs.join(", "),
            limit.join(", "),
            report.means,
            report.boundary_hits
        ),
    )
}

fn size(s: &Shared) -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for th in [theta(2.0, 1.5), theta(-1.0, 0.7)] {
        let r = size_study(&s.model, &th, 500, 2000, 0.05, SEED ^ 6, &s.table, &s.settings).unwrap();
        pass &= (0.035..=0.065).contains(&r.rejection_rate);
        lines.push(format!(
            "θ0=({}, {}) rate {:.4} wilson [{:.4}, {:.4}] boundary {}",
            th.alpha, th.beta, r.rejection_rate, r.wilson_interval[0], r.wilson_interval[1], r.boundary_hits
        ));
    }
    outcome(pass, format!("c_0.05 = {:.4}; {}", s.table.threshold(0.05).unwrap(), lines.join("; ")))
}

fn exactness(_: &Shared) -> Outcome {
    let models = [BaseIntensityModel::gauss2(), BaseIntensityModel::logistic5(), BaseIntensityModel::gumbel3()];
    let mut r = rng::substream(SEED ^ 7, 0);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let model = &models[k % 3];
        let th = theta(r.random_range(-3.0..3.0), r.random_range(0.3..3.0));
        let n = r.random_range(1..=3usize);
        let mut trajectories = vec![Vec::new(); n];
        for _ in 0..r.random_range(0..=5usize) {
            let t = th.alpha + th.beta * r.random_range(-4.0..4.0);
            trajectories[r.random_range(0..n)].push(t);
        }
        let data =
            Dataset::new(trajectories.into_iter().map(Trajectory::from_unsorted).collect(), model.model_id(), None, 0)
                .unwrap();
        let exact = cvm_statistic(model, &data, &th).delta;
        let quad = common::quadrature_statistic(model, &data, &th);
        worst = worst.max((exact - quad).abs() / quad.abs());
    }
    outcome(worst < 1e-6, format!("max relative difference {worst:.3e} over 100 datasets"))
}

fn determinism(s: &Shared) -> Outcome {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let study =
                size_study(&s.model, &theta(-1.0, 0.7), 200, 200, 0.05, SEED ^ 8, &s.table, &s.settings).unwrap();
            let grid = LimitGrid::new(&s.model, 1024).unwrap();
            let draws: Vec<f64> = sample_limit_many(&grid, 2000, SEED ^ 8).into_iter().map(|d| d.delta0).collect();
            let table = threshold_table_from_draws("gauss2", &draws, &[0.05, 0.1], 1024, SEED ^ 8).unwrap();
            let apf = apf_check(&s.model, &[theta(2.0, 1.5), theta(0.0, 3.0)], 50, 1000, SEED ^ 8, &s.settings, &draws)
                .unwrap();
            let data = sample_dataset(&s.model, &theta(2.0, 1.5), 300, SEED ^ 8).unwrap();
            [study.to_json(), table.to_json(), serde_json::to_string(&apf).unwrap(), data.to_json()]
        })
    };
    let one = run(1);
    let four = run(4);
    let same = one == four;
    outcome(same, format!("size study, table, apf check and dataset identical at 1 and 4 threads: {same}"))
}

fn power(s: &Shared) -> Outcome {
    let alt = AltIntensity::from_fn("bimodal", common::bimodal, -10.0, 16.0, 2601).unwrap();
    let r500 = power_study(&s.model, &alt, 500, 500, 0.05, SEED ^ 9, &s.table, &s.settings).unwrap();
    let r1000 = power_study(&s.model, &alt, 1000, 500, 0.05, SEED ^ 9, &s.table, &s.settings).unwrap();
    let (a, b) = (r500.rejection_rate, r1000.rejection_rate);
    outcome(a > 0.5 && b >= a, format!("rate n=500 {a:.4}, n=1000 {b:.4}"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let model = BaseIntensityModel::gauss2();
    let grid = LimitGrid::new(&model, CELLS).unwrap();
    let draws = sample_limit_many(&grid, LIMIT_DRAWS, SEED);
    let d0: Vec<f64> = draws.iter().map(|d| d.delta0).collect();
    let table = threshold_table_from_draws("gauss2", &d0, &[0.01, 0.05, 0.1], CELLS, SEED).unwrap();
    let shared = Shared { model, draws, table, settings: FitSettings::default() };
    println!("limit draws ready ({:.1}s)", start.elapsed().as_secs_f64());

    type Check = fn(&Shared) -> Outcome;
    let criteria: [(&str, Check); 9] = [
        ("1 fisher matrix", fisher_matrix),
        ("2 mle covariance", mle_covariance),
        ("3 coupling identity", coupling),
        ("4 simple limit moments", simple_limit),
        ("5 parameter-free law", apf_property),
        ("6 size", size),
        ("7 exact statistic", exactness),
        ("8 determinism", determinism),
        ("9 power", power),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let o = f(&shared);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {name}: {} [{:.1}s]", o.detail, t.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
