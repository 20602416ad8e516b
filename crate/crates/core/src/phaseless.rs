//! Phaseless near-field data a(x, k) = |x|^{(d-1)/2}(|ψ⁺(x, k)|² - 1).

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ScatteringSolution;
use crate::lattice::{measurement_points, Direction, LatticePoint};

/// Anything that can report the intensity |ψ⁺|² at lattice points. This is
/// the only access the sampling layer has to the field.
pub trait IntensitySource {
    fn dim(&self) -> usize;
    fn incident_k(&self) -> &[f64];
    fn inside_support(&self, x: &LatticePoint) -> bool;
    fn intensities(&self, xs: &[LatticePoint]) -> Result<Vec<f64>>;
}

impl IntensitySource for ScatteringSolution {
    fn dim(&self) -> usize {
        ScatteringSolution::dim(self)
    }

    fn incident_k(&self) -> &[f64] {
        self.incident().k()
    }

    fn inside_support(&self, x: &LatticePoint) -> bool {
        self.potential().in_support_box(x)
    }

    fn intensities(&self, xs: &[LatticePoint]) -> Result<Vec<f64>> {
        Ok(self.evaluate_psi_many(xs)?.iter().map(|p| p.norm_sqr()).collect())
    }
}

/// A constant phase factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GlobalPhase {
    /// i^n, applied exactly by swapping components.
    Quarter(u8),
    Angle(f64),
}

impl GlobalPhase {
    pub fn apply(&self, z: Complex64) -> Complex64 {
        match *self {
            GlobalPhase::Quarter(n) => match n % 4 {
                0 => z,
                1 => Complex64::new(-z.im, z.re),
                2 => Complex64::new(-z.re, -z.im),
                _ => Complex64::new(z.im, -z.re),
            },
            GlobalPhase::Angle(t) => Complex64::from_polar(1.0, t) * z,
        }
    }
}

/// A solution whose field is multiplied by a constant phase before the
/// intensity is taken.
pub struct PhaseRotated<'a> {
    pub solution: &'a ScatteringSolution,
    pub phase: GlobalPhase,
}

impl IntensitySource for PhaseRotated<'_> {
    fn dim(&self) -> usize {
        self.solution.dim()
    }

    fn incident_k(&self) -> &[f64] {
        self.solution.incident().k()
    }

    fn inside_support(&self, x: &LatticePoint) -> bool {
        self.solution.potential().in_support_box(x)
    }

    fn intensities(&self, xs: &[LatticePoint]) -> Result<Vec<f64>> {
        Ok(self
            .solution
            .evaluate_psi_many(xs)?
            .iter()
            .map(|p| self.phase.apply(*p).norm_sqr())
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaselessSample {
    pub x: LatticePoint,
    pub a: f64,
    pub k: Vec<f64>,
    pub s: Option<f64>,
    pub omega: Option<Direction>,
    pub zeta: Option<LatticePoint>,
    pub eta: f64,
    pub seed: Option<u64>,
}

impl PhaselessSample {
    pub fn dim(&self) -> usize {
        self.x.dim()
    }
}

/// |x|^{(d-1)/2}.
pub fn radial_weight(x: &LatticePoint) -> f64 {
    let n2 = x.norm_sq() as f64;
    match x.dim() {
        1 => 1.0,
        2 => n2.sqrt().sqrt(),
        3 => n2.sqrt(),
        d => n2.powf(0.25 * (d as f64 - 1.0)),
    }
}

fn bare(x: &LatticePoint, intensity: f64, k: &[f64]) -> PhaselessSample {
    PhaselessSample {
        x: x.clone(),
        a: radial_weight(x) * (intensity - 1.0),
        k: k.to_vec(),
        s: None,
        omega: None,
        zeta: None,
        eta: 0.0,
        seed: None,
    }
}

pub fn sample_many(src: &dyn IntensitySource, xs: &[LatticePoint]) -> Result<Vec<PhaselessSample>> {
    for x in xs {
        if x.dim() != src.dim() {
            return Err(Error::DimensionMismatch {
                expected: src.dim(),
                found: x.dim(),
            });
        }
        if x.is_origin() {
            return Err(Error::ZeroPoint);
        }
    }
    let i = src.intensities(xs)?;
    Ok(xs.iter().zip(i).map(|(x, v)| bare(x, v, src.incident_k())).collect())
}

pub fn sample_a(src: &dyn IntensitySource, x: &LatticePoint) -> Result<PhaselessSample> {
    Ok(sample_many(src, std::slice::from_ref(x))?.remove(0))
}

/// Samples at x = Int(sω) and y = x + ζ, both outside the support box.
pub fn sample_pair(
    src: &dyn IntensitySource,
    s: f64,
    omega: &Direction,
    zeta: &LatticePoint,
) -> Result<(PhaselessSample, PhaselessSample)> {
    let (x, y) = measurement_points(s, omega, zeta)?;
    for p in [&x, &y] {
        if src.inside_support(p) {
            return Err(Error::InsideSupport {
                point: p.coords().to_vec(),
            });
        }
    }
    let mut v = sample_many(src, &[x, y])?;
    for smp in &mut v {
        smp.s = Some(s);
        smp.omega = Some(omega.clone());
        smp.zeta = Some(zeta.clone());
    }
    let b = v.pop().expect("two samples");
    let a = v.pop().expect("two samples");
    Ok((a, b))
}

/// a ← a(1 + ηu) with u uniform on [-1, 1] drawn from a ChaCha stream.
pub fn add_noise(sample: &PhaselessSample, eta: f64, seed: u64) -> Result<PhaselessSample> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be non-negative, got {eta}"
        )));
    }
    let mut out = sample.clone();
    out.eta = eta;
    out.seed = Some(seed);
    if eta > 0.0 {
        let u: f64 = ChaCha8Rng::seed_from_u64(seed).random_range(-1.0..=1.0);
        out.a = sample.a * (1.0 + eta * u);
    }
    Ok(out)
}

/// Header for samples in `dim` dimensions.
pub fn csv_header(dim: usize) -> Vec<String> {
    let mut h = vec!["s".to_string()];
    for name in ["omega", "zeta", "x"] {
        h.extend((0..dim).map(|i| format!("{name}_{i}")));
    }
    h.extend(["a", "eta", "seed"].map(String::from));
    h
}

pub fn write_samples_csv<W: Write>(out: W, samples: &[PhaselessSample]) -> Result<()> {
    let dim = samples.first().map(|s| s.dim()).unwrap_or(1);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(dim))?;
    for smp in samples {
        if smp.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: smp.dim(),
            });
        }
        let mut rec = vec![smp.s.map(|v| v.to_string()).unwrap_or_default()];
        match &smp.omega {
            Some(o) => rec.extend(o.components().iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), dim)),
        }
        match &smp.zeta {
            Some(z) => rec.extend(z.coords().iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), dim)),
        }
        rec.extend(smp.x.coords().iter().map(|v| v.to_string()));
        rec.push(smp.a.to_string());
        rec.push(smp.eta.to_string());
        rec.push(smp.seed.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<Option<T>> {
    let raw = rec.get(i).unwrap_or("");
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse()
        .map(Some)
        .map_err(|_| Error::Io(format!("cannot parse field {i}: {raw:?}")))
}

fn required<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    field(rec, i)?.ok_or_else(|| Error::Io(format!("missing field {i}")))
}

/// Reads samples written by [`write_samples_csv`]; the schema carries no
/// wave vector, so it is supplied by the caller.
pub fn read_samples_csv<R: Read>(input: R, k: &[f64]) -> Result<Vec<PhaselessSample>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let dim = (header.len().saturating_sub(4)) / 3;
    if header != csv_header(dim) {
        return Err(Error::Io(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let s = field(&rec, 0)?;
        let omega: Vec<Option<f64>> = (0..dim).map(|i| field(&rec, 1 + i)).collect::<Result<_>>()?;
        let zeta: Vec<Option<i64>> = (0..dim).map(|i| field(&rec, 1 + dim + i)).collect::<Result<_>>()?;
        let x: Vec<i64> = (0..dim)
            .map(|i| required(&rec, 1 + 2 * dim + i))
            .collect::<Result<_>>()?;
        let omega = match omega.into_iter().collect::<Option<Vec<f64>>>() {
            Some(v) => Some(Direction::from_unit(v)?),
            None => None,
        };
        out.push(PhaselessSample {
            x: LatticePoint::new(x),
            a: required(&rec, 1 + 3 * dim)?,
            k: k.to_vec(),
            s,
            omega,
            zeta: zeta.into_iter().collect::<Option<Vec<i64>>>().map(LatticePoint::new),
            eta: required(&rec, 2 + 3 * dim)?,
            seed: field(&rec, 3 + 3 * dim)?,
        });
    }
    Ok(out)
}
