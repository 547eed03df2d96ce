use serde::Serialize;

use super::GridField;
use crate::error::{Error, Result};

#[inline]
fn above(x: f64, u: f64) -> bool {
    // values equal to the level count as above it
    x >= u
}

/// Sign changes of `x - u` between consecutive points `x[0], x[s], x[2s], ...`.
pub fn count_crossings_strided(values: &[f64], u: f64, stride: usize) -> usize {
    let stride = stride.max(1);
    let mut it = values.iter().step_by(stride);
    let Some(&first) = it.next() else { return 0 };
    let mut prev = above(first, u);
    let mut n = 0;
    for &x in it {
        let cur = above(x, u);
        n += (cur != prev) as usize;
        prev = cur;
    }
    n
}

/// Number of crossings of `u` by a sampled path (first layer of a 1D grid).
///
/// Counts sign changes of `X - u` between adjacent grid points, so pairs of
/// crossings closer than the spacing are missed; the bias is `O(delta)`.
pub fn count_crossings(path: &GridField, u: f64) -> usize {
    count_crossings_strided(&path.layers[0], u, 1)
}

/// Secant estimates of the crossing positions.
pub fn crossing_locations(path: &GridField, u: f64) -> Vec<f64> {
    let x = &path.layers[0];
    let h = path.spacing;
    x.windows(2)
        .enumerate()
        .filter(|(_, w)| above(w[0], u) != above(w[1], u))
        .map(|(i, w)| h * (i as f64 + (u - w[0]) / (w[1] - w[0])))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootCount {
    pub count: usize,
    /// Root positions in domain units.
    pub roots: Vec<[f64; 2]>,
    /// Cells whose Newton polish stalled from every start.
    pub stalled_cells: Vec<(usize, usize)>,
}

impl RootCount {
    pub fn stall_error(&self) -> Option<Error> {
        (!self.stalled_cells.is_empty()).then(|| Error::NewtonStall { cells: self.stalled_cells.len() })
    }
}

/// Bilinear interpolant of two components on the unit cell.
struct Bilinear {
    // f_k(s, t) = a + b s + c t + d s t
    coef: [[f64; 4]; 2],
}

impl Bilinear {
    fn new(corners: [[f64; 4]; 2]) -> Self {
        // corners ordered (0,0), (1,0), (0,1), (1,1)
        let coef = corners.map(|[v00, v10, v01, v11]| [v00, v10 - v00, v01 - v00, v11 - v10 - v01 + v00]);
        Bilinear { coef }
    }

    fn eval(&self, s: f64, t: f64) -> [f64; 2] {
        self.coef.map(|[a, b, c, d]| a + b * s + c * t + d * s * t)
    }

    fn jac(&self, s: f64, t: f64) -> [[f64; 2]; 2] {
        self.coef.map(|[_, b, c, d]| [b + d * t, c + d * s])
    }
}

enum Polish {
    Root(f64, f64),
    /// Converged outside the cell, or left it for good.
    Elsewhere,
    Stalled,
}

fn damped_newton(f: &Bilinear, s0: f64, t0: f64, tol: f64) -> Polish {
    let (mut s, mut t) = (s0, t0);
    let norm = |v: [f64; 2]| v[0].hypot(v[1]);
    let mut fv = f.eval(s, t);
    for _ in 0..60 {
        if norm(fv) <= tol {
            let eps = 1e-9;
            return if (-eps..=1.0 + eps).contains(&s) && (-eps..=1.0 + eps).contains(&t) {
                Polish::Root(s, t)
            } else {
                Polish::Elsewhere
            };
        }
        if !(-1.0..=2.0).contains(&s) || !(-1.0..=2.0).contains(&t) {
            return Polish::Elsewhere;
        }
        let j = f.jac(s, t);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return Polish::Stalled;
        }
        let ds = (fv[0] * j[1][1] - fv[1] * j[0][1]) / det;
        let dt = (fv[1] * j[0][0] - fv[0] * j[1][0]) / det;
        let mut lambda = 1.0;
        loop {
            let (sn, tn) = (s - lambda * ds, t - lambda * dt);
            let fnew = f.eval(sn, tn);
            if norm(fnew) < norm(fv) || lambda < 1e-6 {
                (s, t, fv) = (sn, tn, fnew);
                break;
            }
            lambda *= 0.5;
        }
    }
    if norm(fv) <= tol * 1e3 {
        Polish::Elsewhere
    } else {
        Polish::Stalled
    }
}

const STARTS: [(f64, f64); 5] = [(0.5, 0.5), (0.2, 0.2), (0.8, 0.2), (0.2, 0.8), (0.8, 0.8)];

/// Roots of `X - u` for a two-layer planar field.
///
/// Cells where both components change sign are polished by damped Newton on
/// the bilinear interpolant from several starts; roots closer than half a
/// grid spacing are merged.
pub fn count_roots_2d(field: &GridField, u: &[f64]) -> Result<RootCount> {
    if field.shape.len() != 2 || field.layers.len() < 2 || u.len() < 2 {
        return Err(Error::InvalidParameter("root counting needs a planar field with two layers and a 2-vector level".into()));
    }
    let (nx, ny, h) = (field.nx(), field.ny(), field.spacing);
    let scale = field.layers[..2].iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(u[0].abs()).max(u[1].abs()).max(1.0);
    let tol = 1e-12 * scale;
    let mut roots: Vec<[f64; 2]> = Vec::new();
    let mut stalled = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let mut corners = [[0.0; 4]; 2];
            let mut candidate = true;
            for (k, c) in corners.iter_mut().enumerate() {
                let l = &field.layers[k];
                *c = [l[j * nx + i] - u[k], l[j * nx + i + 1] - u[k], l[(j + 1) * nx + i] - u[k], l[(j + 1) * nx + i + 1] - u[k]];
                let pos = c.iter().filter(|&&v| above(v, 0.0)).count();
                candidate &= pos > 0 && pos < 4;
            }
            if !candidate {
                continue;
            }
            let f = Bilinear::new(corners);
            let mut local: Vec<(f64, f64)> = Vec::new();
            let mut resolved = false;
            for &(s0, t0) in &STARTS {
                match damped_newton(&f, s0, t0, tol) {
                    Polish::Root(s, t) => {
                        resolved = true;
                        if local.iter().all(|&(a, b)| (a - s).hypot(b - t) > 1e-6) {
                            local.push((s, t));
                        }
                    }
                    Polish::Elsewhere => resolved = true,
                    Polish::Stalled => {}
                }
            }
            if !resolved {
                stalled.push((i, j));
            }
            for (s, t) in local {
                let p = [h * (i as f64 + s.clamp(0.0, 1.0)), h * (j as f64 + t.clamp(0.0, 1.0))];
                let dup = roots.iter().rev().take(4 * nx).any(|q| (q[0] - p[0]).hypot(q[1] - p[1]) < 0.5 * h);
                if !dup {
                    roots.push(p);
                }
            }
        }
    }
    Ok(RootCount { count: roots.len(), roots, stalled_cells: stalled })
}

/// Length of `{X = u}` for the first layer of a planar field, by marching
/// squares with linear interpolation along cell edges. Saddle cells are
/// resolved by the sign of the mean of the four corners.
pub fn contour_length(field: &GridField, u: f64) -> Result<f64> {
    if field.shape.len() != 2 {
        return Err(Error::InvalidParameter("contour length needs a planar field".into()));
    }
    let (nx, ny, h) = (field.nx(), field.ny(), field.spacing);
    let x = &field.layers[0];
    let mut total = 0.0;
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            // counter-clockwise from the lower-left corner
            let v = [x[j * nx + i], x[j * nx + i + 1], x[(j + 1) * nx + i + 1], x[(j + 1) * nx + i]];
            let sgn = v.map(|a| above(a, u));
            let npos = sgn.iter().filter(|&&b| b).count();
            if npos == 0 || npos == 4 {
                continue;
            }
            let pos = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            // crossing point on edge e joining corners e and e + 1
            let edge = |e: usize| -> Option<(f64, f64)> {
                let (a, b) = (e, (e + 1) % 4);
                (sgn[a] != sgn[b]).then(|| {
                    let t = (u - v[a]) / (v[b] - v[a]);
                    (pos[a].0 + t * (pos[b].0 - pos[a].0), pos[a].1 + t * (pos[b].1 - pos[a].1))
                })
            };
            let seg = |p: (f64, f64), q: (f64, f64)| h * (p.0 - q.0).hypot(p.1 - q.1);
            let pts: Vec<(f64, f64)> = (0..4).filter_map(edge).collect();
            if pts.len() == 2 {
                total += seg(pts[0], pts[1]);
            } else {
                // saddle: cut off the corners whose sign differs from the centre
                let centre = above(0.25 * v.iter().sum::<f64>(), u);
                for c in 0..4 {
                    if sgn[c] != centre {
                        let (e_in, e_out) = ((c + 3) % 4, c);
                        total += seg(edge(e_in).unwrap(), edge(e_out).unwrap());
                    }
                }
            }
        }
    }
    Ok(total)
}
