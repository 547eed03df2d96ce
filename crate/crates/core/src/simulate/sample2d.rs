use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::sample1d::{SamplerOptions, SamplingMethod, PSD_TOL};
use super::{stream_rng, GridField};
use crate::error::{Error, Result};
use crate::field::{IsotropicFieldModel, RadialProfile};
use crate::kacrice::Rect;

/// Largest torus (in points) a 2D circulant embedding may use.
const MAX_TORUS: usize = 1 << 24;

/// Eigenvalues of the one-axis factors below this fraction of the largest are
/// dropped; they are at rounding level.
const RANK_TOL: f64 = 1e-14;

/// Sampler of one scalar isotropic layer on an `nx x ny` grid.
pub enum LayerSampler {
    /// Separable profiles: `X = L_y Z L_x^T` with low-rank square roots of the
    /// one-axis Toeplitz covariances.
    Kronecker {
        lx: DMatrix<f64>,
        ly: DMatrix<f64>,
    },
    Circulant {
        mx: usize,
        my: usize,
        nx: usize,
        ny: usize,
        scale: Vec<f64>,
        fx: Arc<dyn Fft<f64>>,
        fy: Arc<dyn Fft<f64>>,
    },
    /// `sqrt(2 / M) sum_m cos(<w_m, x> + phi_m)`.
    Spectral {
        profile: RadialProfile,
        terms: usize,
        nx: usize,
        ny: usize,
        delta: f64,
    },
}

impl std::fmt::Debug for LayerSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerSampler::Kronecker { lx, ly } => write!(f, "Kronecker(rank {} x {})", lx.ncols(), ly.ncols()),
            LayerSampler::Circulant { mx, my, .. } => write!(f, "Circulant({mx} x {my})"),
            LayerSampler::Spectral { terms, .. } => write!(f, "Spectral({terms} terms)"),
        }
    }
}

fn axis_factor(n: usize, delta: f64, r: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let cov = DMatrix::from_fn(n, n, |i, j| r((i as f64 - j as f64).abs() * delta));
    let eig = SymmetricEigen::new(cov);
    let max = eig.eigenvalues.max();
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > RANK_TOL * max).collect();
    DMatrix::from_fn(n, keep.len(), |i, c| eig.eigenvectors[(i, keep[c])] * eig.eigenvalues[keep[c]].sqrt())
}

fn fft_2d(data: &mut [Complex64], mx: usize, my: usize, fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
    for row in data.chunks_mut(mx) {
        fx.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); my];
    for i in 0..mx {
        for (j, c) in col.iter_mut().enumerate() {
            *c = data[j * mx + i];
        }
        fy.process(&mut col);
        for (j, c) in col.iter().enumerate() {
            data[j * mx + i] = *c;
        }
    }
}

impl LayerSampler {
    pub fn new(profile: &RadialProfile, nx: usize, ny: usize, delta: f64, opts: &SamplerOptions) -> Result<Self> {
        profile.validate()?;
        if nx < 2 || ny < 2 || !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("need a grid of at least 2 x 2 points, got {nx} x {ny}")));
        }
        let spectral = || {
            if opts.spectral_terms < 10_000 {
                return Err(Error::InvalidParameter("spectral superposition needs at least 10^4 terms".into()));
            }
            Ok(LayerSampler::Spectral { profile: *profile, terms: opts.spectral_terms, nx, ny, delta })
        };
        match (opts.method, profile) {
            (SamplingMethod::Spectral, _) => spectral(),
            (SamplingMethod::Auto, RadialProfile::GaussianExp { .. }) => {
                let r = |h: f64| profile.derivs(h * h)[0];
                Ok(LayerSampler::Kronecker { lx: axis_factor(nx, delta, r), ly: axis_factor(ny, delta, r) })
            }
            _ => match Self::circulant(profile, nx, ny, delta, opts.max_padding) {
                Err(Error::EmbeddingNotPSD { .. }) if opts.allow_fallback => spectral(),
                other => other,
            },
        }
    }

    fn circulant(profile: &RadialProfile, nx: usize, ny: usize, delta: f64, max_padding: usize) -> Result<Self> {
        let (mx0, my0) = ((2 * (nx - 1)).next_power_of_two(), (2 * (ny - 1)).next_power_of_two());
        let mut worst = f64::NEG_INFINITY;
        let mut pad = 1;
        while pad <= max_padding.max(1) && mx0 * my0 * pad * pad <= MAX_TORUS {
            let (mx, my) = (mx0 * pad, my0 * pad);
            let mut c = vec![Complex64::new(0.0, 0.0); mx * my];
            for l in 0..my {
                let hy = l.min(my - l) as f64 * delta;
                for k in 0..mx {
                    let hx = k.min(mx - k) as f64 * delta;
                    c[l * mx + k] = Complex64::new(profile.derivs(hx * hx + hy * hy)[0], 0.0);
                }
            }
            let mut planner = FftPlanner::new();
            let (fx, fy) = (planner.plan_fft_forward(mx), planner.plan_fft_forward(my));
            fft_2d(&mut c, mx, my, &fx, &fy);
            let max = c.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            let min = c.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            worst = min / max;
            if worst >= -PSD_TOL {
                let n = (mx * my) as f64;
                let scale = c.iter().map(|z| (z.re.max(0.0) / n).sqrt()).collect();
                return Ok(LayerSampler::Circulant { mx, my, nx, ny, scale, fx, fy });
            }
            pad *= 2;
        }
        Err(Error::EmbeddingNotPSD { min_eigenvalue: worst })
    }

    /// Two independent layers, row by row.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        match self {
            LayerSampler::Kronecker { .. } | LayerSampler::Spectral { .. } => (self.sample_one(rng), self.sample_one(rng)),
            LayerSampler::Circulant { mx, my, nx, ny, scale, fx, fy } => {
                let mut z: Vec<Complex64> = scale
                    .iter()
                    .map(|&s| Complex64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                fft_2d(&mut z, *mx, *my, fx, fy);
                let mut a = Vec::with_capacity(nx * ny);
                let mut b = Vec::with_capacity(nx * ny);
                for j in 0..*ny {
                    for i in 0..*nx {
                        a.push(z[j * mx + i].re);
                        b.push(z[j * mx + i].im);
                    }
                }
                (a, b)
            }
        }
    }

    fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            LayerSampler::Kronecker { lx, ly } => {
                let z = DMatrix::from_fn(ly.ncols(), lx.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
                let m = ly * z * lx.transpose();
                let (ny, nx) = m.shape();
                let mut out = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        out.push(m[(j, i)]);
                    }
                }
                out
            }
            LayerSampler::Spectral { profile, terms, nx, ny, delta } => {
                let amp = (2.0 / *terms as f64).sqrt();
                let mut out = vec![0.0; nx * ny];
                let (mut cx, mut sx) = (vec![0.0; *nx], vec![0.0; *nx]);
                for _ in 0..*terms {
                    let w = spectral_frequency(profile, rng);
                    let phi = rng.gen::<f64>() * std::f64::consts::TAU;
                    for i in 0..*nx {
                        (sx[i], cx[i]) = (w[0] * i as f64 * delta + phi).sin_cos();
                    }
                    for j in 0..*ny {
                        let (sy, cy) = (w[1] * j as f64 * delta).sin_cos();
                        let row = &mut out[j * nx..(j + 1) * nx];
                        for i in 0..*nx {
                            row[i] += amp * (cx[i] * cy - sx[i] * sy);
                        }
                    }
                }
                out
            }
            LayerSampler::Circulant { .. } => self.sample_pair(rng).0,
        }
    }
}

/// A frequency of the spectral measure of `rho(|h|^2)` on the plane.
/// Both profiles are Gaussian scale mixtures: `rho(s) = E exp(-G s)`, and
/// given `G` the frequency is `N(0, 2 G I)`.
fn spectral_frequency<R: Rng + ?Sized>(profile: &RadialProfile, rng: &mut R) -> [f64; 2] {
    let g = match *profile {
        RadialProfile::GaussianExp { scale } => 0.5 / (scale * scale),
        RadialProfile::Cauchy { scale, beta } => Gamma::new(beta, 1.0 / (scale * scale)).expect("validated profile").sample(rng),
    };
    let s = (2.0 * g).sqrt();
    [s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal)]
}

/// Samplers for all coordinates of a field; coordinates sharing a profile
/// share a sampler, so circulant draws use both halves.
#[derive(Debug)]
pub struct FieldSampler2D {
    samplers: Vec<LayerSampler>,
    assignment: Vec<usize>,
    pub nx: usize,
    pub ny: usize,
    pub delta: f64,
}

impl FieldSampler2D {
    /// Grid of `resolution` intervals along the width, same spacing along the height.
    pub fn new(field: &IsotropicFieldModel, rect: &Rect, resolution: usize, opts: &SamplerOptions) -> Result<Self> {
        if field.dim() != 2 && field.dim() != 1 {
            return Err(Error::InvalidParameter(format!("planar sampling needs 1 or 2 coordinates, got {}", field.dim())));
        }
        Self::for_profiles(&field.coords, rect, resolution, opts)
    }

    pub fn for_profiles(profiles: &[RadialProfile], rect: &Rect, resolution: usize, opts: &SamplerOptions) -> Result<Self> {
        if resolution < 1 || !(rect.width > 0.0) || !(rect.height > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need resolution >= 1 and a nondegenerate rectangle, got {resolution}, {rect:?}"
            )));
        }
        let delta = rect.width / resolution as f64;
        let (nx, ny) = (resolution + 1, (rect.height / delta).round() as usize + 1);
        let mut distinct: Vec<RadialProfile> = Vec::new();
        let mut assignment = Vec::new();
        for p in profiles {
            match distinct.iter().position(|q| q == p) {
                Some(k) => assignment.push(k),
                None => {
                    distinct.push(*p);
                    assignment.push(distinct.len() - 1);
                }
            }
        }
        let samplers = distinct.iter().map(|p| LayerSampler::new(p, nx, ny.max(2), delta, opts)).collect::<Result<Vec<_>>>()?;
        Ok(FieldSampler2D { samplers, assignment, nx, ny: ny.max(2), delta })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GridField> {
        let mut spare: Vec<Option<Vec<f64>>> = vec![None; self.samplers.len()];
        let mut layers = Vec::with_capacity(self.assignment.len());
        for &k in &self.assignment {
            let layer = match spare[k].take() {
                Some(l) => l,
                None => {
                    let (a, b) = self.samplers[k].sample_pair(rng);
                    spare[k] = Some(b);
                    a
                }
            };
            layers.push(layer);
        }
        GridField::new(vec![self.nx, self.ny], self.delta, layers)
    }
}

/// One sample of an isotropic field on `rect`, `resolution` intervals along the width.
pub fn sample_field_2d(
    field: &IsotropicFieldModel,
    rect: &Rect,
    resolution: usize,
    seed: u64,
    opts: &SamplerOptions,
) -> Result<GridField> {
    let sampler = FieldSampler2D::new(field, rect, resolution, opts)?;
    sampler.sample(&mut stream_rng(seed, 0))
}
