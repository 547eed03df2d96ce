use std::path::Path;

use crate::error::{Error, Result};

use super::{Osc, SpectralIntegrator};

/// Algebraic tail exponent `p` of a density `~ A l^{-p}`; `se == 0` when given
/// explicitly rather than fitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailExponent {
    pub exponent: f64,
    pub se: f64,
}

/// Tabulated one-sided spectral density with an algebraic tail, normalized
/// to unit total mass at construction.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    freqs: Vec<f64>,
    raw: Vec<f64>,
    values: Vec<f64>,
    tail: TailExponent,
}

impl SpectralDensity {
    /// `frequencies` must be positive and strictly increasing. With
    /// `tail_exponent = None` the exponent is fitted on the last fifth of the
    /// table (at least five points) in log-log coordinates.
    pub fn new(frequencies: Vec<f64>, density: Vec<f64>, tail_exponent: Option<f64>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if frequencies.len() != density.len() || frequencies.len() < 2 {
            return bad("spectral table needs at least two (frequency, density) rows".into());
        }
        if frequencies[0] <= 0.0 || frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return bad("frequencies must be positive and strictly increasing".into());
        }
        if density.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return bad("density values must be finite and nonnegative".into());
        }
        if *density.last().unwrap() <= 0.0 {
            return bad("last density value must be positive to carry the tail".into());
        }
        let tail = match tail_exponent {
            Some(p) if p > 1.0 => TailExponent { exponent: p, se: 0.0 },
            Some(p) => return bad(format!("tail exponent {p} must exceed 1")),
            None => fit_tail(&frequencies, &density)?,
        };
        let mut table = SpectralDensity { freqs: frequencies, raw: density.clone(), values: density, tail };
        let mass = {
            let dens = |l: f64| table.density(l);
            let integ = SpectralIntegrator {
                density: &dens,
                breaks: &table.freqs,
                tail_start: table.tail_start(),
                tail_amplitude: table.tail_amplitude(),
                tail_exponent: table.tail.exponent,
            };
            integ.integral(0, Osc::One, 0.0)?.ok_or_else(|| Error::InvalidParameter("density mass diverges".into()))?
        };
        for v in &mut table.values {
            *v /= mass;
        }
        Ok(table)
    }

    /// Two-column CSV `frequency,density`; a non-numeric first row is a header.
    pub fn from_csv_path<P: AsRef<Path>>(path: P, tail_exponent: Option<f64>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, tail_exponent)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R, tail_exponent: Option<f64>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut f = Vec::new();
        let mut d = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::InvalidParameter(format!("row {i}: expected 2 columns, got {}", rec.len())));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    f.push(a);
                    d.push(b);
                }
                _ if i == 0 => continue,
                _ => return Err(Error::InvalidParameter(format!("row {i}: not numeric"))),
            }
        }
        Self::new(f, d, tail_exponent)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    /// Values as supplied, before normalization.
    pub fn raw_values(&self) -> &[f64] {
        &self.raw
    }

    pub fn tail(&self) -> TailExponent {
        self.tail
    }

    pub fn tail_start(&self) -> f64 {
        *self.freqs.last().unwrap()
    }

    pub fn tail_amplitude(&self) -> f64 {
        self.values.last().unwrap() * self.tail_start().powf(self.tail.exponent)
    }

    /// Normalized density: constant below the first node, log-log
    /// interpolation between nodes (linear where a value is zero), algebraic
    /// beyond the last node.
    pub fn density(&self, l: f64) -> f64 {
        let n = self.freqs.len();
        if l <= self.freqs[0] {
            return self.values[0];
        }
        if l >= self.freqs[n - 1] {
            return self.tail_amplitude() * l.powf(-self.tail.exponent);
        }
        let j = self.freqs.partition_point(|&x| x <= l) - 1;
        let (x0, x1) = (self.freqs[j], self.freqs[j + 1]);
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        if y0 > 0.0 && y1 > 0.0 {
            let w = (l / x0).ln() / (x1 / x0).ln();
            (y0.ln() + w * (y1 / y0).ln()).exp()
        } else {
            y0 + (y1 - y0) * (l - x0) / (x1 - x0)
        }
    }
}

fn fit_tail(f: &[f64], d: &[f64]) -> Result<TailExponent> {
    let n = f.len();
    let k = (n / 5).max(5).min(n);
    let pts: Vec<(f64, f64)> =
        f[n - k..].iter().zip(&d[n - k..]).filter(|(_, v)| **v > 0.0).map(|(x, v)| (x.ln(), v.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::InvalidParameter("too few positive tail points to fit an exponent".into()));
    }
    let (slope, se) = crate::stats::ols_slope(&pts);
    let p = -slope;
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("fitted tail exponent {p:.3} gives infinite mass")));
    }
    Ok(TailExponent { exponent: p, se })
}
