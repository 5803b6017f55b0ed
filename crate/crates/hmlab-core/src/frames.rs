//! Orthonormal frames adapted to the approximate tangent plane P(x, r).
//!
//! The raw vectors vhat^i = (e^i, d_{x_i} phi_r) span P'(x, r) and
//! what^j = (-grad phi_r^j, e^j) span the orthogonal complement. Gram-Schmidt
//! in the fixed order i = 1..d then j = d+1..n yields the orthonormal basis
//! (v, w); the isometry R_{x,r} maps the coordinate basis onto it.

use crate::error::{Error, Result};
use crate::geometry::{smoothed_jet, LipschitzGraph, Mollifier, SmoothedJet};
use nalgebra::{DMatrix, DVector};

/// Orthonormal frame at (x, r): columns of `q_matrix` are v^1..v^d, w^{d+1}..w^n.
#[derive(Debug, Clone)]
pub struct Frame {
    pub d: usize,
    pub n: usize,
    /// Base point Phi_r(x).
    pub base: Vec<f64>,
    pub v: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub raw_v: Vec<DVector<f64>>,
    pub raw_w: Vec<DVector<f64>>,
}

impl Frame {
    /// Change-of-basis matrix Q with Q e^i = v^i, Q e^j = w^j (columns).
    pub fn q_matrix(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.n, self.n);
        for (c, v) in self.v.iter().chain(self.w.iter()).enumerate() {
            q.set_column(c, v);
        }
        q
    }

    /// Apply the isometry R_{x,r} to u in R^n.
    pub fn apply_isometry(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (c, basis) in self.v.iter().chain(self.w.iter()).enumerate() {
            for k in 0..self.n {
                out[k] += u[c] * basis[k];
            }
        }
        out
    }

    /// Largest deviation of Gram(v, w) from the identity.
    pub fn gram_defect(&self) -> f64 {
        let all: Vec<&DVector<f64>> = self.v.iter().chain(self.w.iter()).collect();
        let mut worst: f64 = 0.0;
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let g = a.dot(b);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// Raw (non-orthonormal) frame vectors from a jet.
pub fn raw_vectors(jet: &SmoothedJet) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let (d, n) = (jet.d, jet.n);
    let nd = n - d;
    let mut raw_v = Vec::with_capacity(d);
    for i in 0..d {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for j in 0..nd {
            v[d + j] = jet.grad_x[i][j];
        }
        raw_v.push(v);
    }
    let mut raw_w = Vec::with_capacity(nd);
    for j in 0..nd {
        let mut w = DVector::zeros(n);
        for i in 0..d {
            w[i] = -jet.grad_x[i][j];
        }
        w[d + j] = 1.0;
        raw_w.push(w);
    }
    (raw_v, raw_w)
}

/// Gram-Schmidt in the paper's order, no pivoting. Signs come out of the
/// construction itself (the intermediate vectors keep <v~^i, e^i> = 1).
pub fn orthonormal_frame(jet: &SmoothedJet) -> Result<Frame> {
    let (raw_v, raw_w) = raw_vectors(jet);
    let v = gram_schmidt(&raw_v)?;
    let w = gram_schmidt(&raw_w)?;
    Ok(Frame {
        d: jet.d,
        n: jet.n,
        base: jet.point.clone(),
        v,
        w,
        raw_v,
        raw_w,
    })
}

fn gram_schmidt(raw: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(raw.len());
    for r in raw {
        let mut t = r.clone();
        for prev in &out {
            let c = r.dot(prev);
            t -= prev * c;
        }
        let norm = t.norm();
        // the e^i / e^j blocks force |t| >= 1; anything smaller is a jet bug
        if norm < 1.0 - 1e-6 {
            return Err(Error::DegenerateFrame { norm });
        }
        out.push(t / norm);
    }
    Ok(out)
}

/// Frame at (x, r) straight from the graph and mollifier.
pub fn frame_field(
    g: &LipschitzGraph,
    m: &Mollifier,
    x: &[f64],
    r: f64,
) -> Result<Frame> {
    orthonormal_frame(&smoothed_jet(g, m, x, r)?)
}

/// Derivatives of the frame field in the d+1 directions (x_1..x_d, r),
/// by Richardson-extrapolated central differences with step kappa * r.
#[derive(Debug, Clone)]
pub struct FrameDerivatives {
    /// dv[k][i] = derivative of v^i in direction k (k < d: x_k, k = d: r).
    pub dv: Vec<Vec<DVector<f64>>>,
    /// dw[k][j] = derivative of w^j in direction k.
    pub dw: Vec<Vec<DVector<f64>>>,
    pub step: f64,
    /// Worst relative disagreement between the h and h/2 difference quotients.
    pub richardson_defect: f64,
}

impl FrameDerivatives {
    /// sup_i |grad_{x,r} v^i| and sup_j |grad_{x,r} w^j| stacked as a single norm.
    pub fn max_norm(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let nv = self.dv.first().map_or(0, |row| row.len());
        for i in 0..nv {
            let s: f64 = self.dv.iter().map(|row| row[i].norm_squared()).sum();
            worst = worst.max(s.sqrt());
        }
        let nw = self.dw.first().map_or(0, |row| row.len());
        for j in 0..nw {
            let s: f64 = self.dw.iter().map(|row| row[j].norm_squared()).sum();
            worst = worst.max(s.sqrt());
        }
        worst
    }
}

pub const FD_KAPPA_DEFAULT: f64 = 1e-3;
pub const RICHARDSON_TOL_DEFAULT: f64 = 1e-4;

pub fn frame_derivatives(
    g: &LipschitzGraph,
    m: &Mollifier,
    x: &[f64],
    r: f64,
    kappa: f64,
    richardson: bool,
) -> Result<FrameDerivatives> {
    let d = g.d;
    let h = kappa * r;
    let mut dv = Vec::with_capacity(d + 1);
    let mut dw = Vec::with_capacity(d + 1);
    let mut defect: f64 = 0.0;

    let frame_at = |x: &[f64], r: f64| -> Result<Frame> { frame_field(g, m, x, r) };
    for k in 0..=d {
        let shift = |delta: f64| -> (Vec<f64>, f64) {
            let mut xs = x.to_vec();
            let mut rs = r;
            if k < d {
                xs[k] += delta;
            } else {
                rs += delta;
            }
            (xs, rs)
        };
        let diff = |delta: f64| -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
            let (xp, rp) = shift(delta);
            let (xm, rm) = shift(-delta);
            let fp = frame_at(&xp, rp)?;
            let fm = frame_at(&xm, rm)?;
            let dvk: Vec<DVector<f64>> = fp
                .v
                .iter()
                .zip(&fm.v)
                .map(|(a, b)| (a - b) / (2.0 * delta))
                .collect();
            let dwk: Vec<DVector<f64>> = fp
                .w
                .iter()
                .zip(&fm.w)
                .map(|(a, b)| (a - b) / (2.0 * delta))
                .collect();
            Ok((dvk, dwk))
        };
        let (dv_h, dw_h) = diff(h)?;
        if richardson {
            let (dv_h2, dw_h2) = diff(0.5 * h)?;
            // Richardson extrapolation: (4 D(h/2) - D(h)) / 3
            let mut dvk = Vec::with_capacity(dv_h.len());
            for (a, b) in dv_h.iter().zip(&dv_h2) {
                let scale = b.norm().max(1.0);
                defect = defect.max((a - b).norm() / scale);
                dvk.push((b * 4.0 - a) / 3.0);
            }
            let mut dwk = Vec::with_capacity(dw_h.len());
            for (a, b) in dw_h.iter().zip(&dw_h2) {
                let scale = b.norm().max(1.0);
                defect = defect.max((a - b).norm() / scale);
                dwk.push((b * 4.0 - a) / 3.0);
            }
            dv.push(dvk);
            dw.push(dwk);
        } else {
            dv.push(dv_h);
            dw.push(dw_h);
        }
    }
    if richardson && defect > RICHARDSON_TOL_DEFAULT {
        return Err(Error::RichardsonDisagreement {
            disagreement: defect,
            tolerance: RICHARDSON_TOL_DEFAULT,
        });
    }
    Ok(FrameDerivatives { dv, dw, step: h, richardson_defect: defect })
}
