//! Reluctivity models ν(B²), linear and tabulated-BH, with the exact
//! derivative dν/dB² needed by the Newton linearization.
//!
//! Tabulated curves are interpolated in the variable B² by a monotone
//! (Fritsch-Carlson) cubic, so the returned derivative is the derivative of
//! the interpolant itself. Outside the table the reluctivity is extended by
//! its boundary values, which keeps Newton steps bounded deep in saturation.

use crate::error::{Error, Result};
use crate::mesh::RegionTag;
/// Vacuum permeability, exact SI definition used throughout.
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;
/// Vacuum reluctivity 1/μ0.
pub const NU_0: f64 = 1.0 / MU_0;

#[derive(Debug, Clone)]
pub enum MaterialModel {
    Linear { mu_r: f64 },
    BhTable(BhTable),
}

impl MaterialModel {
    pub fn linear(mu_r: f64) -> MaterialModel {
        MaterialModel::Linear { mu_r }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, MaterialModel::Linear { .. })
    }

    /// Reluctivity ν in m/H at the given squared flux density (T²).
    pub fn nu(&self, b_squared: f64) -> f64 {
        match self {
            MaterialModel::Linear { mu_r } => NU_0 / mu_r,
            MaterialModel::BhTable(t) => t.eval(b_squared).0,
        }
    }

    /// Derivative dν/dB² of the implemented interpolant; zero for linear
    /// models and outside the table range.
    pub fn dnu_db2(&self, b_squared: f64) -> f64 {
        match self {
            MaterialModel::Linear { .. } => 0.0,
            MaterialModel::BhTable(t) => t.eval(b_squared).1,
        }
    }
}

/// Air and iron reluctivity models of one problem.
#[derive(Debug, Clone)]
pub struct MaterialMap {
    pub air: MaterialModel,
    pub iron: MaterialModel,
}

impl MaterialMap {
    pub fn new(air: MaterialModel, iron: MaterialModel) -> MaterialMap {
        MaterialMap { air, iron }
    }

    /// Vacuum air with the given iron model.
    pub fn vacuum_air(iron: MaterialModel) -> MaterialMap {
        MaterialMap {
            air: MaterialModel::linear(1.0),
            iron,
        }
    }

    pub fn for_tag(&self, tag: RegionTag) -> &MaterialModel {
        match tag {
            RegionTag::Iron => &self.iron,
            _ => &self.air,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.air.is_linear() && self.iron.is_linear()
    }
}

/// Monotone cubic interpolant of ν over B², built from (B, H) samples.
#[derive(Debug, Clone)]
pub struct BhTable {
    /// Knots in B² (first knot at 0).
    x: Vec<f64>,
    /// ν at the knots.
    y: Vec<f64>,
    /// Interpolant slopes dν/dB² at the knots.
    d: Vec<f64>,
}

impl BhTable {
    /// Builds the interpolant from strictly increasing (B, H) samples.
    /// ν(B→0) uses the initial slope H₁/B₁ of the table.
    pub fn from_samples(samples: &[(f64, f64)]) -> Result<BhTable> {
        if samples.len() < 2 {
            return Err(Error::Material("BH table needs at least 2 samples".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) || !(w[1].1 > w[0].1) {
                return Err(Error::Material(format!(
                    "BH table must be strictly increasing, got ({}, {}) after ({}, {})",
                    w[1].0, w[1].1, w[0].0, w[0].1
                )));
            }
        }
        if samples[0].0 <= 0.0 || samples[0].1 <= 0.0 {
            return Err(Error::Material("BH samples must have B > 0, H > 0".into()));
        }

        let mut x = Vec::with_capacity(samples.len() + 1);
        let mut y = Vec::with_capacity(samples.len() + 1);
        // B -> 0 limit from the table's initial slope.
        x.push(0.0);
        y.push(samples[0].1 / samples[0].0);
        for &(b, h) in samples {
            x.push(b * b);
            y.push(h / b);
        }
        let d = pchip_slopes(&x, &y);
        Ok(BhTable { x, y, d })
    }

    /// Parses CSV with header `B_T,H_A_per_m`.
    pub fn from_csv_str(text: &str) -> Result<BhTable> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Material("empty BH CSV".into()))?;
        if header.trim() != "B_T,H_A_per_m" {
            return Err(Error::Material(format!(
                "BH CSV header must be 'B_T,H_A_per_m', got '{header}'"
            )));
        }
        let mut samples = Vec::new();
        for (i, l) in lines.enumerate() {
            let mut it = l.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::Material(format!("bad BH CSV row {}: '{l}'", i + 2)))
            };
            let b = parse(it.next())?;
            let h = parse(it.next())?;
            samples.push((b, h));
        }
        BhTable::from_samples(&samples)
    }

    pub fn load_csv(path: &std::path::Path) -> Result<BhTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BhTable::from_csv_str(&text)
    }

    /// (ν, dν/dB²) at the given B²; constant extension outside the knots.
    fn eval(&self, b2: f64) -> (f64, f64) {
        let x = &self.x;
        if b2 <= x[0] {
            return (self.y[0], 0.0);
        }
        if b2 >= *x.last().unwrap() {
            return (*self.y.last().unwrap(), 0.0);
        }
        let k = match x.binary_search_by(|v| v.partial_cmp(&b2).unwrap()) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        let h = x[k + 1] - x[k];
        let t = (b2 - x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k], self.d[k + 1]);
        // Cubic Hermite basis.
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * t2 - 6.0 * t;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = -6.0 * t2 + 6.0 * t;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let dv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
        (v, dv)
    }
}

/// Fritsch-Carlson monotone slopes for a cubic Hermite interpolant.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut delta = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        delta.push((y[k + 1] - y[k]) / (x[k + 1] - x[k]));
    }
    let mut d = vec![0.0; n];
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] <= 0.0 {
            d[k] = 0.0;
        } else {
            // Weighted harmonic mean keeps the interpolant monotone.
            let w1 = 2.0 * (x[k + 1] - x[k]) + (x[k] - x[k - 1]);
            let w2 = (x[k + 1] - x[k]) + 2.0 * (x[k] - x[k - 1]);
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    // Clamp endpoint slopes (Fritsch-Carlson boundary treatment).
    for (k, edge) in [(0usize, 0usize), (n - 1, n - 2)] {
        if d[k] * delta[edge] <= 0.0 {
            d[k] = 0.0;
        } else if delta[edge].abs() < 1e-300 || d[k].abs() > 3.0 * delta[edge].abs() {
            d[k] = 3.0 * delta[edge];
        }
    }
    d
}
