use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::config::{ExperimentConfig, MethodChoice, Tolerances};
use super::converge::experiment_directions;
use crate::error::{Error, Result};
use crate::forward::{solve_forward, FreeWaves, IncidentWave, ScatteringSolution};
use crate::green::{GreenConfig, GreenEvaluator};
use crate::lattice::{Direction, LatticePoint};
use crate::phaseless::{add_noise, sample_a, sample_pair, PhaselessSample};
use crate::recover::{
    choose_prop24_pair, choose_prop25_triple, det_d, distance_to_pi_z, limiting_argument, recover_prop24_fixed_point,
    recover_prop25, recover_thm21, Recovery,
};

/// The forward problem of an experiment, solved once.
pub struct Experiment {
    pub free: FreeWaves,
    pub solution: ScatteringSolution,
    pub tolerances: Tolerances,
}

impl Experiment {
    pub fn setup(cfg: &ExperimentConfig) -> Result<Experiment> {
        cfg.validate()?;
        let tolerances = cfg.tolerances.with_env()?;
        let energy = cfg.energy()?;
        let free = FreeWaves::resolve(energy)?;
        let v = cfg.potential()?;
        if !v.is_real() {
            eprintln!("{}", super::config::COMPLEX_POTENTIAL_WARNING);
        }
        let dir = Direction::new(cfg.incident.clone())?;
        if cfg.dim == 1 && dir.components()[0] < 0.0 {
            return Err(Error::Config(
                "d = 1 experiments use the wave incident from the left (incident = [1])".into(),
            ));
        }
        let incident = IncidentWave::along(&dir, &free)?;
        let green = Arc::new(GreenEvaluator::new(
            energy,
            0.0,
            GreenConfig {
                verify: tolerances.verify,
                tol: tolerances.green_tol,
            },
        )?);
        let solution = solve_forward(&v, &incident, green)?;
        Ok(Experiment {
            free,
            solution,
            tolerances,
        })
    }

    /// A copy of the solution with its own far-field Green cache, so that
    /// cached values depend only on the requests of one worker.
    pub fn isolated(&self) -> Result<ScatteringSolution> {
        let g = self.solution.green();
        self.solution
            .with_green(Arc::new(GreenEvaluator::new(*g.energy(), g.eps(), g.config().clone())?))
    }
}

pub(crate) fn sample_seed(base: u64, index: u64) -> u64 {
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(index)
}

pub(crate) fn noisy(sample: PhaselessSample, eta: f64, seed: u64) -> Result<PhaselessSample> {
    if eta > 0.0 {
        add_noise(&sample, eta, seed)
    } else {
        Ok(sample)
    }
}

/// Left end of the one-dimensional measurement geometry at distance s.
pub(crate) fn d1_start(sol: &ScatteringSolution, s: f64) -> i64 {
    let lo = sol.potential().support_box().map_or(0, |b| b.lo[0]).min(0);
    lo - s.round().max(1.0) as i64
}

/// Measurement points of one d = 1 recovery at distance s.
pub(crate) fn d1_points(method: MethodChoice, k: f64, s: f64, sol: &ScatteringSolution) -> Result<Vec<i64>> {
    let x1 = d1_start(sol, s);
    Ok(match method {
        MethodChoice::Prop24 => {
            let (x, y) = choose_prop24_pair(k, x1, 12, 0.05)?;
            vec![x, y]
        }
        _ => choose_prop25_triple(k, x1, 10)?.to_vec(),
    })
}

/// Phaseless samples of the experiment in recovery order: pairs for d ≥ 2
/// (per direction and s), pairs or triples for d = 1 (per s).
pub fn generate_samples(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Vec<PhaselessSample>> {
    let sol = &exp.solution;
    let mut out = vec![];
    if cfg.dim == 1 {
        let k = sol.incident().k()[0];
        for (j, s) in cfg.s_grid.values().into_iter().enumerate() {
            for (i, x) in d1_points(cfg.method, k, s, sol)?.into_iter().enumerate() {
                let mut smp = sample_a(sol, &LatticePoint::new(vec![x]))?;
                smp.s = Some(s);
                out.push(noisy(smp, cfg.noise, sample_seed(cfg.seed, (3 * j + i) as u64))?);
            }
        }
        return Ok(out);
    }
    let omegas = experiment_directions(cfg, sol.incident().k(), &exp.free, exp.tolerances.screen_delta)?;
    let zeta = cfg.zeta_point();
    for (i, w) in omegas.iter().enumerate() {
        let local = exp.isolated()?;
        for (j, s) in cfg.s_grid.values().into_iter().enumerate() {
            let seed = sample_seed(cfg.seed, (i * 1000 + j) as u64 * 2);
            let (ax, ay) = sample_pair(&local, s, w, &zeta)?;
            out.push(noisy(ax, cfg.noise, seed)?);
            out.push(noisy(ay, cfg.noise, seed + 1)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveredRow {
    pub omega: Vec<f64>,
    pub s: Option<f64>,
    pub f: Option<Complex64>,
    pub abs_det: f64,
    pub rejected: bool,
    pub method: &'static str,
}

/// Recovers f⁺ from consecutive groups of samples. Directions within
/// `screen_delta` of the exceptional set and determinants below δ_min are
/// reported as rejected.
pub fn recover_samples(
    samples: &[PhaselessSample],
    free: &FreeWaves,
    method: MethodChoice,
    tol: &Tolerances,
) -> Result<Vec<RecoveredRow>> {
    let dim = free.energy().dim();
    if samples.iter().any(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: samples.iter().map(|s| s.dim()).find(|&d| d != dim).unwrap_or(dim),
        });
    }
    let group = match (dim, method) {
        (1, MethodChoice::Prop24) => 2,
        (1, _) => 3,
        _ => 2,
    };
    if !samples.len().is_multiple_of(group) {
        return Err(Error::InvalidArgument(format!(
            "{} samples do not split into groups of {group}",
            samples.len()
        )));
    }
    let mut rows = vec![];
    for g in samples.chunks(group) {
        let omega = g[0].omega.as_ref().map(|w| w.components().to_vec()).unwrap_or_else(|| {
            if dim == 1 {
                vec![-1.0]
            } else {
                vec![]
            }
        });
        let row = |f: Option<Complex64>, abs_det: f64, rejected: bool, method: &'static str| RecoveredRow {
            omega: omega.clone(),
            s: g[0].s,
            f,
            abs_det,
            rejected,
            method,
        };
        if dim == 1 {
            let r = if group == 2 {
                recover_prop24_fixed_point(&g[0], &g[1], 500, 1e-13)?.result
            } else {
                recover_prop25(&g[0], &g[1], &g[2])?
            };
            rows.push(row(Some(r.f_plus), r.abs_det, false, r.method.name()));
            continue;
        }
        if let (Some(w), Some(z)) = (&g[0].omega, &g[0].zeta) {
            if distance_to_pi_z(limiting_argument(&g[0].k, w, z, free)?) < tol.screen_delta {
                let (d, _) = det_d(&g[0].x, &g[1].x, &g[0].k, free)?;
                rows.push(row(None, d.norm(), true, "thm21"));
                continue;
            }
        }
        match Recovery::classify(recover_thm21(&g[0], &g[1], free, tol.delta_min))? {
            Recovery::Accepted(r) => rows.push(row(Some(r.f_plus), r.abs_det, false, r.method.name())),
            Recovery::Rejected { abs_det, .. } => rows.push(row(None, abs_det, true, "thm21")),
        }
    }
    Ok(rows)
}

/// omega..., s, re_f, im_f, abs_D, rejected_flag, method.
pub fn write_recovered_csv<W: Write>(out: W, dim: usize, rows: &[RecoveredRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..dim).map(|i| format!("omega_{i}")).collect();
    header.extend(["s", "re_f", "im_f", "abs_D", "rejected_flag", "method"].map(String::from));
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let mut rec: Vec<String> = if r.omega.len() == dim {
            r.omega.iter().map(|v| v.to_string()).collect()
        } else {
            vec![String::new(); dim]
        };
        rec.push(opt(r.s));
        rec.push(opt(r.f.map(|f| f.re)));
        rec.push(opt(r.f.map(|f| f.im)));
        rec.push(r.abs_det.to_string());
        rec.push(u8::from(r.rejected).to_string());
        rec.push(r.method.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
