use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, WeightedIndex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{stream_rng, GridField};
use crate::covmodels::{CovKind, CovarianceModel1D, StationaryCovariance};
use crate::error::{Error, Result};

/// Eigenvalues below `-PSD_TOL * max` reject an embedding; the rest are clipped at 0.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SamplingMethod {
    /// Exact representation or circulant embedding, spectral superposition
    /// for models whose covariance is only available by quadrature.
    #[default]
    Auto,
    Circulant,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerOptions {
    pub method: SamplingMethod,
    /// Fall back to spectral superposition when no embedding up to
    /// `max_padding` times the minimal size is PSD.
    pub allow_fallback: bool,
    pub max_padding: usize,
    pub spectral_terms: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions { method: SamplingMethod::Auto, allow_fallback: true, max_padding: 16, spectral_terms: 10_000 }
    }
}

/// Circulant embedding of `r(|i - j| delta)` on a circle of `m` points.
pub struct Circulant1D {
    m: usize,
    delta: f64,
    /// `sqrt(max(eig, 0) / m)`.
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    /// Smallest eigenvalue relative to the largest, before clipping.
    pub min_relative_eigenvalue: f64,
}

impl std::fmt::Debug for Circulant1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Circulant1D").field("m", &self.m).field("delta", &self.delta).finish()
    }
}

impl Circulant1D {
    /// Smallest power-of-two circle, from `2 (n - 1)` up to `max_padding`
    /// times that, whose embedding is PSD.
    pub fn new<C: StationaryCovariance + ?Sized>(cov: &C, delta: f64, n: usize, max_padding: usize) -> Result<Self> {
        Self::with_min_size(cov, delta, n, 0, max_padding)
    }

    /// As [`Circulant1D::new`], with the circle at least `min_size` long.
    pub fn with_min_size<C: StationaryCovariance + ?Sized>(
        cov: &C,
        delta: f64,
        n: usize,
        min_size: usize,
        max_padding: usize,
    ) -> Result<Self> {
        if n < 2 || !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("need n >= 2 and delta > 0, got n={n}, delta={delta}")));
        }
        let m0 = (2 * (n - 1)).next_power_of_two();
        let mut m = m0.max(min_size.next_power_of_two());
        let mut worst = f64::NEG_INFINITY;
        while m <= m0 * max_padding.max(1) || m == m0.max(min_size.next_power_of_two()) {
            let mut c = vec![Complex64::new(0.0, 0.0); m];
            for (k, ck) in c.iter_mut().enumerate().take(m / 2 + 1) {
                *ck = Complex64::new(cov.eval(k.min(m - k) as f64 * delta)?.r, 0.0);
            }
            for k in m / 2 + 1..m {
                c[k] = c[m - k];
            }
            let fft = FftPlanner::new().plan_fft_forward(m);
            fft.process(&mut c);
            let max = c.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            let min = c.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            let rel = min / max;
            worst = rel;
            if rel >= -PSD_TOL {
                let scale = c.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
                return Ok(Circulant1D { m, delta, scale, fft, min_relative_eigenvalue: rel });
            }
            m *= 2;
        }
        Err(Error::EmbeddingNotPSD { min_eigenvalue: worst })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    /// Two independent stationary paths on the whole circle. Any window of at
    /// most `m / 2 + 1` consecutive points (cyclically) has the target law.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut z: Vec<Complex64> = self
            .scale
            .iter()
            .map(|&s| Complex64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        self.fft.process(&mut z);
        (z.iter().map(|v| v.re).collect(), z.iter().map(|v| v.im).collect())
    }
}

/// Law of the (one-sided) spectral frequency, for superposition sampling.
#[derive(Debug, Clone)]
pub enum FrequencyLaw {
    /// `|N(0, 1/l^2)|`
    Gaussian { scale: f64 },
    /// Component `k` with probability `w_k`, then `|N(0, sd_k^2)|`.
    Mixture { index: WeightedIndex<f64>, sd: Vec<f64> },
    /// `|t_{2 nu}| / sqrt(2 nu)`, whose density is proportional to `(1 + l^2)^{-nu - 1/2}`.
    Student { dist: StudentT<f64>, nu: f64 },
    /// Inverse CDF on a tabulated grid.
    Table { grid: Vec<f64>, cdf: Vec<f64> },
}

impl FrequencyLaw {
    fn for_model(model: &CovarianceModel1D) -> Result<Self> {
        Ok(match model.kind() {
            CovKind::GaussianExp { scale } => FrequencyLaw::Gaussian { scale: *scale },
            CovKind::ScaleMixture { base, decay } => {
                let (w, sd): (Vec<f64>, Vec<f64>) = (0..400)
                    .map(|k| ((k as f64 + 1.0).powf(-decay) * base.powi(-2 * k), base.powi(k)))
                    .take_while(|(w, _)| *w > 1e-300)
                    .unzip();
                let index = WeightedIndex::new(&w).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                FrequencyLaw::Mixture { index, sd }
            }
            CovKind::MaternLike { nu } => FrequencyLaw::Student {
                dist: StudentT::new(2.0 * nu).map_err(|e| Error::InvalidParameter(e.to_string()))?,
                nu: *nu,
            },
            CovKind::SpectralTable(t) => {
                let top = t.tail_start().max(*t.frequencies().last().unwrap_or(&1.0)) * 100.0;
                let n = 20_000;
                let grid: Vec<f64> = (0..=n).map(|i| top * (i as f64 / n as f64).powi(3)).collect();
                let mut cdf = vec![0.0; grid.len()];
                for i in 1..grid.len() {
                    let h = grid[i] - grid[i - 1];
                    cdf[i] = cdf[i - 1] + 0.5 * h * (t.density(grid[i]) + t.density(grid[i - 1]));
                }
                let total = *cdf.last().unwrap();
                cdf.iter_mut().for_each(|c| *c /= total);
                FrequencyLaw::Table { grid, cdf }
            }
            CovKind::SineCosine { .. } => unreachable!("sine-cosine is sampled exactly"),
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FrequencyLaw::Gaussian { scale } => (rng.sample::<f64, _>(StandardNormal) / scale).abs(),
            FrequencyLaw::Mixture { index, sd } => (sd[index.sample(rng)] * rng.sample::<f64, _>(StandardNormal)).abs(),
            FrequencyLaw::Student { dist, nu } => dist.sample(rng).abs() / (2.0 * nu).sqrt(),
            FrequencyLaw::Table { grid, cdf } => {
                let p: f64 = rng.gen();
                let i = cdf.partition_point(|&c| c < p).clamp(1, grid.len() - 1);
                let f = (p - cdf[i - 1]) / (cdf[i] - cdf[i - 1]).max(1e-300);
                grid[i - 1] + f.clamp(0.0, 1.0) * (grid[i] - grid[i - 1])
            }
        }
    }
}

/// A reusable sampler of one process on a uniform grid of `n` points.
#[derive(Debug)]
pub enum ProcessSampler1D {
    /// `xi_1 sin(w t) + xi_2 cos(w t)`
    SineCosine {
        w: f64,
        delta: f64,
        n: usize,
    },
    Circulant {
        embedding: Circulant1D,
        n: usize,
    },
    /// `sqrt(2 / M) sum_m cos(l_m t + phi_m)` with `l_m` from the spectral measure.
    Spectral {
        law: Box<FrequencyLaw>,
        terms: usize,
        delta: f64,
        n: usize,
    },
}

impl ProcessSampler1D {
    pub fn new(model: &CovarianceModel1D, delta: f64, n: usize, opts: &SamplerOptions) -> Result<Self> {
        Self::with_min_size(model, delta, n, 0, opts)
    }

    /// As [`ProcessSampler1D::new`], asking circulant embeddings for a circle
    /// of at least `min_size` points so that one draw covers many windows.
    pub fn with_min_size(
        model: &CovarianceModel1D,
        delta: f64,
        n: usize,
        min_size: usize,
        opts: &SamplerOptions,
    ) -> Result<Self> {
        if n < 2 || !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("need n >= 2 and delta > 0, got n={n}, delta={delta}")));
        }
        if let CovKind::SineCosine { w } = model.kind() {
            if opts.method == SamplingMethod::Auto {
                return Ok(ProcessSampler1D::SineCosine { w: *w, delta, n });
            }
        }
        let spectral_kind = matches!(model.kind(), CovKind::MaternLike { .. } | CovKind::SpectralTable(_));
        let spectral = |opts: &SamplerOptions| -> Result<Self> {
            if opts.spectral_terms < 10_000 {
                return Err(Error::InvalidParameter("spectral superposition needs at least 10^4 terms".into()));
            }
            let law = match model.kind() {
                // two atoms at +-w: the superposition degenerates to random phases
                CovKind::SineCosine { w } => {
                    return Ok(ProcessSampler1D::Spectral {
                        law: Box::new(FrequencyLaw::Table { grid: vec![*w, *w], cdf: vec![0.0, 1.0] }),
                        terms: opts.spectral_terms,
                        delta,
                        n,
                    })
                }
                _ => FrequencyLaw::for_model(model)?,
            };
            Ok(ProcessSampler1D::Spectral { law: Box::new(law), terms: opts.spectral_terms, delta, n })
        };
        match opts.method {
            SamplingMethod::Spectral => spectral(opts),
            SamplingMethod::Auto if spectral_kind => spectral(opts),
            _ => match Circulant1D::with_min_size(model, delta, n, min_size, opts.max_padding) {
                Ok(embedding) => Ok(ProcessSampler1D::Circulant { embedding, n }),
                Err(Error::EmbeddingNotPSD { .. }) if opts.allow_fallback => spectral(opts),
                Err(e) => Err(e),
            },
        }
    }

    pub fn n_points(&self) -> usize {
        match self {
            ProcessSampler1D::SineCosine { n, .. }
            | ProcessSampler1D::Circulant { n, .. }
            | ProcessSampler1D::Spectral { n, .. } => *n,
        }
    }

    /// Number of independent-in-law windows one call of [`Self::sample_windows`] yields.
    pub fn windows_per_draw(&self) -> usize {
        match self {
            ProcessSampler1D::Circulant { embedding, n } => 2 * (embedding.m / (n - 1)).max(1),
            _ => 1,
        }
    }

    /// Windows of `n` points, each exactly distributed. Circulant draws tile
    /// both halves of the complex sample; consecutive windows share an
    /// endpoint and are dependent.
    pub fn sample_windows<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        match self {
            ProcessSampler1D::SineCosine { w, delta, n } => {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                vec![(0..*n)
                    .map(|i| {
                        let (s, c) = (w * i as f64 * delta).sin_cos();
                        a * s + b * c
                    })
                    .collect()]
            }
            ProcessSampler1D::Circulant { embedding, n } => {
                let (re, im) = embedding.sample_pair(rng);
                let m = embedding.m;
                let step = n - 1;
                let per = (m / step).max(1);
                let mut out = Vec::with_capacity(2 * per);
                for path in [&re, &im] {
                    for w in 0..per {
                        out.push((0..*n).map(|i| path[(w * step + i) % m]).collect());
                    }
                }
                out
            }
            ProcessSampler1D::Spectral { law, terms, delta, n } => {
                let amp = (2.0 / *terms as f64).sqrt();
                let mut x = vec![0.0; *n];
                for _ in 0..*terms {
                    let l = law.sample(rng) * delta;
                    let phi = rng.gen::<f64>() * std::f64::consts::TAU;
                    // cos(l i + phi) by the angle-addition recurrence, reseeded every 256 steps
                    let (sl, cl) = l.sin_cos();
                    let (mut s, mut c) = phi.sin_cos();
                    for (i, xi) in x.iter_mut().enumerate() {
                        if i % 256 == 0 {
                            (s, c) = (l * i as f64 + phi).sin_cos();
                        }
                        *xi += amp * c;
                        (s, c) = (s * cl + c * sl, c * cl - s * sl);
                    }
                }
                vec![x]
            }
        }
    }
}

/// One exact sample of the process on `n_points` equispaced points of `[0, T]`.
pub fn sample_process_1d(
    model: &CovarianceModel1D,
    t_len: f64,
    n_points: usize,
    seed: u64,
    opts: &SamplerOptions,
) -> Result<GridField> {
    if !(t_len > 0.0) || !t_len.is_finite() {
        return Err(Error::InvalidParameter(format!("interval length must be positive, got {t_len}")));
    }
    let delta = t_len / (n_points.max(2) - 1) as f64;
    let sampler = ProcessSampler1D::new(model, delta, n_points, opts)?;
    let mut rng = stream_rng(seed, 0);
    let path = sampler.sample_windows(&mut rng).swap_remove(0);
    GridField::new(vec![n_points], delta, vec![path])
}
