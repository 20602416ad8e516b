use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, MethodChoice, Tolerances};
use super::pipeline::{d1_points, noisy, sample_seed, Experiment};
use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::forward::{
    default_fit_order, default_s_grid, extract_f_reference_with_order, transfer_matrix_d1, FreeWaves,
};
use crate::lattice::{Direction, LatticePoint};
use crate::phaseless::{sample_a, sample_pair, PhaselessSample};
use crate::recover::{
    distance_to_pi_z, limiting_argument, recover_prop24_fixed_point, recover_prop25, recover_thm21, Recovery,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergeRow {
    pub s: f64,
    pub f: Option<Complex64>,
    pub error: Option<f64>,
    pub abs_det: f64,
    pub rejected: bool,
    pub method: &'static str,
    pub slope_so_far: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionReport {
    pub omega: Vec<f64>,
    pub reference: Option<Complex64>,
    pub reference_error: Option<f64>,
    pub rows: Vec<ConvergeRow>,
    pub slope: Option<f64>,
    pub max_error: Option<f64>,
    pub passed: bool,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergeReport {
    pub name: String,
    pub dim: usize,
    pub energy: f64,
    pub free_waves: String,
    pub tolerances: Tolerances,
    pub directions: Vec<DirectionReport>,
    pub passing: usize,
    pub required: usize,
    pub passed: bool,
}

/// Directions of the experiment: the explicit list followed by seeded random
/// directions that pass the exceptional-set screen.
pub fn experiment_directions(
    cfg: &ExperimentConfig,
    k: &[f64],
    free: &FreeWaves,
    screen: f64,
) -> Result<Vec<Direction>> {
    let mut out: Vec<Direction> = cfg
        .directions
        .list
        .iter()
        .map(|w| Direction::new(w.clone()))
        .collect::<Result<_>>()?;
    let want = cfg.directions.count.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x00d1_ec71_0a5e_ed00);
    let zeta = cfg.zeta_point();
    let mut found = 0;
    let mut tries = 0;
    while found < want {
        tries += 1;
        if tries > 1000 * want.max(1) {
            return Err(Error::Config(format!(
                "only {found} of {want} random directions pass the screen {screen}"
            )));
        }
        let w = Direction::random(cfg.dim, &mut rng);
        if distance_to_pi_z(limiting_argument(k, &w, &zeta, free)?) >= screen {
            out.push(w);
            found += 1;
        }
    }
    Ok(out)
}

fn finish(
    mut rows: Vec<ConvergeRow>,
    window: Option<[f64; 2]>,
    max_error: Option<f64>,
) -> (Vec<ConvergeRow>, Option<f64>, Option<f64>, bool, Option<String>) {
    let mut xs = vec![];
    let mut ys = vec![];
    for r in rows.iter_mut() {
        if let Some(e) = r.error {
            if e > 0.0 {
                xs.push(r.s);
                ys.push(e);
            }
        }
        r.slope_so_far = if xs.len() >= 2 {
            loglog_slope(&xs, &ys).ok().map(|f| f.slope)
        } else {
            None
        };
    }
    let slope = rows.last().and_then(|r| r.slope_so_far);
    let worst = rows
        .iter()
        .filter_map(|r| r.error)
        .fold(None, |m: Option<f64>, e| Some(m.map_or(e, |v| v.max(e))));
    let mut failure = None;
    if rows.iter().any(|r| r.rejected) {
        failure = Some("near-singular determinant at some s".to_string());
    }
    if let Some([lo, hi]) = window {
        match slope {
            Some(v) if (lo..=hi).contains(&v) => {}
            Some(v) => failure = Some(format!("slope {v:.3} outside [{lo}, {hi}]")),
            None => failure = Some("no slope could be fitted".to_string()),
        }
    }
    if let Some(m) = max_error {
        match worst {
            Some(w) if w <= m => {}
            Some(w) => failure = Some(format!("max error {w:e} above {m:e}")),
            None => failure = Some("no accepted recovery".to_string()),
        }
    }
    let passed = failure.is_none();
    (rows, slope, worst, passed, failure)
}

fn direction_run(cfg: &ExperimentConfig, exp: &Experiment, index: usize, omega: &Direction) -> DirectionReport {
    let (free, tol) = (&exp.free, &exp.tolerances);
    let failed = |msg: String| DirectionReport {
        omega: omega.components().to_vec(),
        reference: None,
        reference_error: None,
        rows: vec![],
        slope: None,
        max_error: None,
        passed: false,
        failure: Some(msg),
    };
    let local = match exp.isolated() {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let grid = cfg.reference.s_grid.clone().unwrap_or_else(|| default_s_grid(cfg.dim));
    let order = cfg.reference.order.unwrap_or_else(|| default_fit_order(cfg.dim));
    let reference = match extract_f_reference_with_order(&local, free, omega, &grid, order) {
        Ok(r) => r,
        Err(e) => return failed(format!("reference extraction: {e}")),
    };
    let zeta = cfg.zeta_point();
    let mut rows = vec![];
    for (j, s) in cfg.s_grid.values().into_iter().enumerate() {
        let seed = sample_seed(cfg.seed, (index * 1000 + j) as u64 * 2);
        let run = || -> Result<Recovery> {
            let (ax, ay) = sample_pair(&local, s, omega, &zeta)?;
            let ax = noisy(ax, cfg.noise, seed)?;
            let ay = noisy(ay, cfg.noise, seed + 1)?;
            Recovery::classify(recover_thm21(&ax, &ay, free, tol.delta_min))
        };
        match run() {
            Ok(Recovery::Accepted(r)) => rows.push(ConvergeRow {
                s,
                f: Some(r.f_plus),
                error: Some((r.f_plus - reference.f_plus).norm()),
                abs_det: r.abs_det,
                rejected: false,
                method: r.method.name(),
                slope_so_far: None,
            }),
            Ok(Recovery::Rejected { abs_det, .. }) => rows.push(ConvergeRow {
                s,
                f: None,
                error: None,
                abs_det,
                rejected: true,
                method: "thm21",
                slope_so_far: None,
            }),
            Err(e) => return failed(format!("s = {s}: {e}")),
        }
    }
    let (rows, slope, max_error, passed, failure) = finish(rows, cfg.expect.slope_window, cfg.expect.max_error);
    DirectionReport {
        omega: omega.components().to_vec(),
        reference: Some(reference.f_plus),
        reference_error: Some(reference.error_estimate),
        rows,
        slope,
        max_error,
        passed,
        failure,
    }
}

fn run_d1(cfg: &ExperimentConfig, exp: &Experiment) -> Result<DirectionReport> {
    let sol = &exp.solution;
    let (s21, _) = transfer_matrix_d1(sol.potential(), sol.incident())?;
    let k = sol.incident().k()[0];
    let mut rows = vec![];
    for (j, s) in cfg.s_grid.values().into_iter().enumerate() {
        let pts = d1_points(cfg.method, k, s, sol)?;
        let smp: Vec<PhaselessSample> = pts
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                noisy(
                    sample_a(sol, &LatticePoint::new(vec![x]))?,
                    cfg.noise,
                    sample_seed(cfg.seed, (3 * j + i) as u64),
                )
            })
            .collect::<Result<_>>()?;
        let r = match cfg.method {
            MethodChoice::Prop24 => recover_prop24_fixed_point(&smp[0], &smp[1], 500, 1e-13)?.result,
            _ => recover_prop25(&smp[0], &smp[1], &smp[2])?,
        };
        rows.push(ConvergeRow {
            s,
            f: Some(r.f_plus),
            error: Some((r.f_plus - s21).norm()),
            abs_det: r.abs_det,
            rejected: false,
            method: r.method.name(),
            slope_so_far: None,
        });
    }
    let (rows, slope, max_error, passed, failure) = finish(rows, cfg.expect.slope_window, cfg.expect.max_error);
    Ok(DirectionReport {
        omega: vec![-1.0],
        reference: Some(s21),
        reference_error: Some(0.0),
        rows,
        slope,
        max_error,
        passed,
        failure,
    })
}

/// Forward solve, phaseless sampling, recovery and error fit for every
/// configured direction. Failures of single directions are recorded in the
/// report; only setup failures are returned as errors.
pub fn run_converge(cfg: &ExperimentConfig) -> Result<ConvergeReport> {
    let exp = Experiment::setup(cfg)?;
    let directions = if cfg.dim == 1 {
        vec![run_d1(cfg, &exp)?]
    } else {
        let k = exp.solution.incident().k();
        let omegas = experiment_directions(cfg, k, &exp.free, exp.tolerances.screen_delta)?;
        omegas
            .par_iter()
            .enumerate()
            .map(|(i, w)| direction_run(cfg, &exp, i, w))
            .collect()
    };
    let passing = directions.iter().filter(|d| d.passed).count();
    let required = cfg.expect.min_passing.unwrap_or(directions.len());
    Ok(ConvergeReport {
        name: cfg.name.clone(),
        dim: cfg.dim,
        energy: cfg.energy,
        free_waves: exp.free.describe(),
        tolerances: exp.tolerances.clone(),
        passed: passing >= required,
        directions,
        passing,
        required,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per (ω, s): omega..., s, re_f, im_f, re_ref, im_ref, error,
/// abs_D, rejected, method, slope_so_far.
pub fn write_converge_csv<W: Write>(out: W, report: &ConvergeReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..report.dim).map(|i| format!("omega_{i}")).collect();
    header.extend(
        [
            "s",
            "re_f",
            "im_f",
            "re_ref",
            "im_ref",
            "error",
            "abs_D",
            "rejected",
            "method",
            "slope_so_far",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for d in &report.directions {
        for r in &d.rows {
            let mut rec: Vec<String> = d.omega.iter().map(|v| v.to_string()).collect();
            rec.push(r.s.to_string());
            rec.push(opt(r.f.map(|f| f.re)));
            rec.push(opt(r.f.map(|f| f.im)));
            rec.push(opt(d.reference.map(|f| f.re)));
            rec.push(opt(d.reference.map(|f| f.im)));
            rec.push(opt(r.error));
            rec.push(r.abs_det.to_string());
            rec.push(r.rejected.to_string());
            rec.push(r.method.to_string());
            rec.push(opt(r.slope_so_far));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Human-readable summary, one line per direction.
pub fn converge_table(report: &ConvergeReport) -> String {
    let mut s = format!(
        "{} (d = {}, E = {}): {} of {} directions pass (need {})\n",
        report.name,
        report.dim,
        report.energy,
        report.passing,
        report.directions.len(),
        report.required
    );
    for d in &report.directions {
        let omega: Vec<String> = d.omega.iter().map(|v| format!("{v:+.4}")).collect();
        s.push_str(&format!(
            "  omega [{}]  slope {:>8}  max error {:>10}  {}\n",
            omega.join(", "),
            d.slope.map_or("-".into(), |v| format!("{v:.3}")),
            d.max_error.map_or("-".into(), |v| format!("{v:.2e}")),
            match &d.failure {
                None => "PASS".to_string(),
                Some(f) => format!("FAIL ({f})"),
            }
        ));
    }
    s
}
