//! Lipschitz graphs, their mollified parameterizations, and jets.
//!
//! A graph is the set Gamma = {(x, phi(x))} in R^n with phi: R^d -> R^{n-d}
//! drawn from a closed, declarative family. The mollifier eta produces the
//! smoothed functions phi_r = phi * eta_r whose derivatives feed the frame and
//! change-of-variables modules.

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, integrate_adaptive, tensor_gl};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Closed family of graph functions. Stored declaratively so experiments are
/// reproducible from config alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    /// phi = 0: the flat plane R^d.
    Zero,
    /// phi(x) = slope * x, slope is an (n-d) x d matrix given row-major.
    Affine { slope: Vec<Vec<f64>> },
    /// Single-frequency sinusoid in one input/output coordinate pair:
    /// phi^{out_axis}(x) = amplitude * sin(frequency * x_{in_axis} + phase).
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        in_axis: usize,
        #[serde(default)]
        out_axis: usize,
    },
    /// Finite random Fourier series with modes drawn deterministically from a
    /// seed; amplitudes are normalized so the Lipschitz bound equals `c0`.
    RandomFourier {
        seed: u64,
        modes: usize,
        max_frequency: f64,
        c0: f64,
    },
    /// Corner graph phi_1(x) = slope * |x| (d = 1 only).
    Corner { slope: f64 },
}

#[derive(Debug, Clone)]
struct FourierMode {
    // per output coordinate j: amplitude[j], wave vector k (shared), phase[j]
    amp: Vec<f64>,
    k: Vec<f64>,
    phase: Vec<f64>,
}

/// A d-dimensional Lipschitz graph in R^n together with its declared
/// Lipschitz bound `c0`.
#[derive(Debug, Clone)]
pub struct LipschitzGraph {
    pub d: usize,
    pub n: usize,
    pub c0: f64,
    pub family: GraphFamily,
    fourier: Vec<FourierMode>,
}

impl LipschitzGraph {
    pub fn new(d: usize, n: usize, family: GraphFamily) -> Result<Self> {
        if d == 0 || d >= n {
            return Err(Error::InvalidInput(format!("need 1 <= d < n, got d={d}, n={n}")));
        }
        let m = n - d;
        let mut fourier = Vec::new();
        let c0 = match &family {
            GraphFamily::Zero => 0.0,
            GraphFamily::Affine { slope } => {
                if slope.len() != m || slope.iter().any(|row| row.len() != d) {
                    return Err(Error::InvalidInput(format!(
                        "affine slope must be {m} x {d}"
                    )));
                }
                let a = nalgebra::DMatrix::from_fn(m, d, |j, i| slope[j][i]);
                a.svd(false, false).singular_values.max()
            }
            GraphFamily::Sinusoid {
                amplitude,
                frequency,
                in_axis,
                out_axis,
                ..
            } => {
                if *in_axis >= d || *out_axis >= m {
                    return Err(Error::InvalidInput("sinusoid axis out of range".into()));
                }
                amplitude.abs() * frequency.abs()
            }
            GraphFamily::RandomFourier {
                seed,
                modes,
                max_frequency,
                c0,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut raw = Vec::with_capacity(*modes);
                for _ in 0..*modes {
                    let k: Vec<f64> = (0..d)
                        .map(|_| rng.random_range(-max_frequency..*max_frequency))
                        .collect();
                    let amp: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let phase: Vec<f64> =
                        (0..m).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
                    raw.push(FourierMode { amp, k, phase });
                }
                // Normalize so sum_m |amp_m| * |k_m| = c0 (a valid Lipschitz bound).
                let total: f64 = raw
                    .iter()
                    .map(|md| {
                        let ka = md.k.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let aa = md.amp.iter().map(|v| v * v).sum::<f64>().sqrt();
                        ka * aa
                    })
                    .sum();
                let scale = if total > 0.0 { c0 / total } else { 0.0 };
                for md in &mut raw {
                    for a in &mut md.amp {
                        *a *= scale;
                    }
                }
                fourier = raw;
                *c0
            }
            GraphFamily::Corner { slope } => {
                if d != 1 {
                    return Err(Error::InvalidInput("corner graphs require d = 1".into()));
                }
                slope.abs()
            }
        };
        Ok(Self { d, n, c0, family, fourier })
    }

    /// phi(x), written into `out` (length n - d).
    pub fn phi(&self, x: &[f64], out: &mut [f64]) {
        let m = self.n - self.d;
        out[..m].fill(0.0);
        match &self.family {
            GraphFamily::Zero => {}
            GraphFamily::Affine { slope } => {
                for (j, o) in out.iter_mut().enumerate().take(m) {
                    *o = slope[j].iter().zip(x).map(|(s, xi)| s * xi).sum();
                }
            }
            GraphFamily::Sinusoid { amplitude, frequency, phase, in_axis, out_axis } => {
                out[*out_axis] = amplitude * (frequency * x[*in_axis] + phase).sin();
            }
            GraphFamily::RandomFourier { .. } => {
                for md in &self.fourier {
                    let arg: f64 = md.k.iter().zip(x).map(|(k, xi)| k * xi).sum();
                    for j in 0..m {
                        out[j] += md.amp[j] * (arg + md.phase[j]).sin();
                    }
                }
            }
            GraphFamily::Corner { slope } => {
                out[0] = slope * x[0].abs();
            }
        }
    }

    /// Jacobian of phi: out[j*d + i] = d phi^j / d x_i.
    pub fn grad_phi(&self, x: &[f64], out: &mut [f64]) {
        let (d, m) = (self.d, self.n - self.d);
        out[..d * m].fill(0.0);
        match &self.family {
            GraphFamily::Zero => {}
            GraphFamily::Affine { slope } => {
                for j in 0..m {
                    for i in 0..d {
                        out[j * d + i] = slope[j][i];
                    }
                }
            }
            GraphFamily::Sinusoid { amplitude, frequency, phase, in_axis, out_axis } => {
                out[*out_axis * d + *in_axis] =
                    amplitude * frequency * (frequency * x[*in_axis] + phase).cos();
            }
            GraphFamily::RandomFourier { .. } => {
                for md in &self.fourier {
                    let arg: f64 = md.k.iter().zip(x).map(|(k, xi)| k * xi).sum();
                    for j in 0..m {
                        let c = md.amp[j] * (arg + md.phase[j]).cos();
                        for i in 0..d {
                            out[j * d + i] += c * md.k[i];
                        }
                    }
                }
            }
            GraphFamily::Corner { slope } => {
                out[0] = slope * x[0].signum(); // signum(0) = 0 by f64 convention; callers exclude the kink
            }
        }
    }

    /// Parameters where phi fails to be differentiable (corner tips).
    pub fn kink_params(&self) -> Vec<f64> {
        match &self.family {
            GraphFamily::Corner { .. } => vec![0.0],
            _ => Vec::new(),
        }
    }

    pub fn is_differentiable_at(&self, x: &[f64]) -> bool {
        self.kink_params().iter().all(|k| (x[0] - k).abs() > 1e-14) || self.kink_params().is_empty()
    }

    /// The standard parameterization Phi(x) = (x, phi(x)).
    pub fn eval_graph(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n];
        p[..self.d].copy_from_slice(x);
        let (head, tail) = p.split_at_mut(self.d);
        let _ = head;
        self.phi(x, tail);
        p
    }

    /// Area-formula density sqrt(det(I + (Dphi)^T Dphi)), in [1, (1+c0^2)^{d/2}].
    pub fn surface_density(&self, x: &[f64]) -> Result<f64> {
        if !self.is_differentiable_at(x) {
            return Err(Error::NonDifferentiable { x: x.to_vec() });
        }
        let (d, m) = (self.d, self.n - self.d);
        let mut g = vec![0.0; d * m];
        self.grad_phi(x, &mut g);
        let jac = nalgebra::DMatrix::from_fn(m, d, |j, i| g[j * d + i]);
        let gram = nalgebra::DMatrix::<f64>::identity(d, d) + jac.transpose() * jac;
        Ok(gram.determinant().sqrt())
    }

    /// dist(X, Gamma) by coarse parameter scan plus local polish.
    ///
    /// The scan window is centered at the vertical projection of X and sized
    /// by the |t|-component, which localizes the nearest point on a Lipschitz
    /// graph with small constant.
    pub fn euclidean_distance(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.n);
        let d = self.d;
        let xv: Vec<f64> = point[..d].to_vec();
        let mut buf = vec![0.0; self.n - d];
        let mut dist2 = |u: &[f64]| -> f64 {
            self.phi(u, &mut buf);
            let mut s = 0.0;
            for i in 0..d {
                s += (point[i] - u[i]) * (point[i] - u[i]);
            }
            for j in 0..self.n - d {
                s += (point[d + j] - buf[j]) * (point[d + j] - buf[j]);
            }
            s
        };
        let d0 = dist2(&xv).sqrt();
        if d0 == 0.0 {
            return 0.0;
        }
        let window = 4.0 * d0 * (1.0 + self.c0);
        if d == 1 {
            let mut f = |u: f64| dist2(&[u]);
            let mut best = (xv[0], d0 * d0);
            // coarse scan
            let nscan = 65;
            let mut values = Vec::with_capacity(nscan);
            for k in 0..nscan {
                let u = xv[0] - window + 2.0 * window * (k as f64) / (nscan - 1) as f64;
                let v = f(u);
                values.push((u, v));
                if v < best.1 {
                    best = (u, v);
                }
            }
            // golden-section polish around every local minimum of the scan
            let gr = 0.5 * (5.0f64.sqrt() - 1.0);
            for k in 1..nscan - 1 {
                if values[k].1 <= values[k - 1].1 && values[k].1 <= values[k + 1].1 {
                    let (mut a, mut b) = (values[k - 1].0, values[k + 1].0);
                    let (mut c1, mut c2) = (b - gr * (b - a), a + gr * (b - a));
                    let (mut f1, mut f2) = (f(c1), f(c2));
                    for _ in 0..80 {
                        if f1 < f2 {
                            b = c2;
                            c2 = c1;
                            f2 = f1;
                            c1 = b - gr * (b - a);
                            f1 = f(c1);
                        } else {
                            a = c1;
                            c1 = c2;
                            f1 = f2;
                            c2 = a + gr * (b - a);
                            f2 = f(c2);
                        }
                        if (b - a).abs() < 1e-13 * (1.0 + window) {
                            break;
                        }
                    }
                    let u = 0.5 * (a + b);
                    let v = f(u);
                    if v < best.1 {
                        best = (u, v);
                    }
                }
            }
            best.1.sqrt()
        } else {
            // d = 2: coarse grid scan + Nelder-Mead polish from the best cells
            let nscan = 17;
            let mut pts: Vec<(Vec<f64>, f64)> = Vec::new();
            for a in 0..nscan {
                for b in 0..nscan {
                    let u = vec![
                        xv[0] - window + 2.0 * window * (a as f64) / (nscan - 1) as f64,
                        xv[1] - window + 2.0 * window * (b as f64) / (nscan - 1) as f64,
                    ];
                    let v = dist2(&u);
                    pts.push((u, v));
                }
            }
            pts.sort_by(|p, q| p.1.total_cmp(&q.1));
            let mut best = pts[0].1;
            for start in pts.iter().take(3) {
                let res = crate::opt::nelder_mead(
                    |u| dist2(u),
                    &start.0,
                    0.25 * window / (nscan as f64),
                    400,
                    1e-26,
                );
                if res.value < best {
                    best = res.value;
                }
            }
            best.sqrt()
        }
    }

    /// Max sampled difference quotient |phi(x)-phi(y)| / |x-y| over a random cloud.
    pub fn sampled_lipschitz_quotient(&self, samples: usize, span: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.n - self.d;
        let mut fx = vec![0.0; m];
        let mut fy = vec![0.0; m];
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x: Vec<f64> = (0..self.d).map(|_| rng.random_range(-span..span)).collect();
            let y: Vec<f64> = (0..self.d).map(|_| rng.random_range(-span..span)).collect();
            let dx: f64 = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dx < 1e-12 {
                continue;
            }
            self.phi(&x, &mut fx);
            self.phi(&y, &mut fy);
            let df: f64 = fx
                .iter()
                .zip(&fy)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(df / dx);
        }
        worst
    }
}

/// The smooth radial bump eta(x) = c exp(-1/(1-|x|^2)) on |x| < 1, normalized
/// to unit integral, together with the convolution quadrature settings.
#[derive(Debug, Clone)]
pub struct Mollifier {
    pub d: usize,
    pub quad_order: usize,
    /// When set, every jet is recomputed on a refined rule and the difference
    /// must stay below this tolerance.
    pub jet_check_tol: Option<f64>,
    norm: f64,
}

fn bump_raw(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// d/dr2 of the unnormalized bump.
fn bump_raw_dr2(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        let s = 1.0 - r2;
        -(-1.0 / s).exp() / (s * s)
    }
}

impl Mollifier {
    pub fn new(d: usize, quad_order: usize) -> Self {
        use std::sync::OnceLock;
        static NORM1: OnceLock<f64> = OnceLock::new();
        static NORM2: OnceLock<f64> = OnceLock::new();
        let norm = match d {
            1 => *NORM1.get_or_init(|| {
                let mut f = |x: f64| bump_raw(x * x);
                let (v, _) = integrate_adaptive(&mut f, -1.0, 1.0, 1e-13, 400);
                1.0 / v
            }),
            2 => *NORM2.get_or_init(|| {
                let mut f = |r: f64| r * bump_raw(r * r);
                let (v, _) = integrate_adaptive(&mut f, 0.0, 1.0, 1e-13, 400);
                1.0 / (std::f64::consts::TAU * v)
            }),
            _ => panic!("mollifier implemented for d <= 2"),
        };
        Self { d, quad_order, jet_check_tol: None, norm }
    }

    pub fn with_jet_check(mut self, tol: f64) -> Self {
        self.jet_check_tol = Some(tol);
        self
    }

    /// eta(u).
    pub fn eta(&self, u: &[f64]) -> f64 {
        let r2: f64 = u.iter().map(|v| v * v).sum();
        self.norm * bump_raw(r2)
    }

    /// grad eta(u), written into `out`.
    pub fn grad_eta(&self, u: &[f64], out: &mut [f64]) {
        let r2: f64 = u.iter().map(|v| v * v).sum();
        let g = 2.0 * self.norm * bump_raw_dr2(r2);
        for (o, v) in out.iter_mut().zip(u) {
            *o = g * v;
        }
    }

    /// eta_hat(u) = -d eta(u) - u . grad eta(u); the kernel of r d_r eta_r.
    pub fn eta_hat(&self, u: &[f64]) -> f64 {
        let mut g = vec![0.0; self.d];
        self.grad_eta(u, &mut g);
        let dot: f64 = g.iter().zip(u).map(|(a, b)| a * b).sum();
        -(self.d as f64) * self.eta(u) - dot
    }

    /// eta_tilde(u) = -u eta(u); the vector kernel with div eta_tilde_r = d_r eta_r.
    pub fn eta_tilde(&self, u: &[f64], out: &mut [f64]) {
        let e = self.eta(u);
        for (o, v) in out.iter_mut().zip(u) {
            *o = -v * e;
        }
    }

    /// Recompute the integral of eta on a rule unrelated to the construction.
    pub fn recheck_unit_integral(&self) -> f64 {
        match self.d {
            1 => {
                let (nodes, weights) = gauss_legendre(96);
                nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, w)| w * self.eta(&[*x]))
                    .sum()
            }
            _ => {
                let mut acc = 0.0;
                tensor_gl(2, &[0.0, 0.0], &[1.0, 1.0], 96, &mut |p, w| {
                    acc += w * self.eta(p);
                });
                acc
            }
        }
    }
}

/// First- and second-order data of the smoothed parameterization at (x, r):
/// the point Phi_r(x), the rows d_{x_i} phi_r, the radial derivative
/// d_r phi_r, and the mixed second derivatives.
#[derive(Debug, Clone)]
pub struct SmoothedJet {
    pub d: usize,
    pub n: usize,
    pub x: Vec<f64>,
    pub r: f64,
    /// Phi_r(x) in R^n.
    pub point: Vec<f64>,
    /// grad_x[i][j] = d_{x_i} phi_r^j, i < d, j < n-d.
    pub grad_x: Vec<Vec<f64>>,
    /// d_r phi_r in R^{n-d}.
    pub d_r: Vec<f64>,
    /// hess[k][i][j] = d_k d_{x_i} phi_r^j with k < d a x-derivative and k = d
    /// the r-derivative.
    pub hess: Vec<Vec<Vec<f64>>>,
    /// Estimated quadrature error (populated when the mollifier checks jets).
    pub quad_error: f64,
}

impl SmoothedJet {
    /// |d_r phi_r| + r |grad_{x,r} grad_x phi_r|, the quantity controlled by C*c0.
    pub fn radial_smoothness(&self) -> f64 {
        let dr: f64 = self.d_r.iter().map(|v| v * v).sum::<f64>().sqrt();
        dr + self.r * self.hess_norm()
    }

    /// Frobenius norm of the full second-derivative tensor.
    pub fn hess_norm(&self) -> f64 {
        self.hess
            .iter()
            .flat_map(|a| a.iter().flat_map(|b| b.iter()))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Convolution nodes for one axis, split at corner kinks so every panel is smooth.
fn conv_panels_1d(g: &LipschitzGraph, x: f64, r: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![-1.0, 1.0];
    for k in g.kink_params() {
        let u = (x - k) / r;
        if u > -1.0 + 1e-12 && u < 1.0 - 1e-12 {
            cuts.push(u);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Compute the full jet of phi_r at (x, r) by Gauss-Legendre convolution
/// against eta, grad eta, and eta_hat.
pub fn smoothed_jet(g: &LipschitzGraph, m: &Mollifier, x: &[f64], r: f64) -> Result<SmoothedJet> {
    assert!(r > 0.0, "smoothed_jet requires r > 0");
    assert_eq!(m.d, g.d, "mollifier dimension must match the graph");
    let jet = jet_with_order(g, m, x, r, m.quad_order);
    if let Some(tol) = m.jet_check_tol {
        let fine = jet_with_order(g, m, x, r, m.quad_order + m.quad_order / 2 + 4);
        let err = jet_difference(&jet, &fine);
        if err > tol {
            return Err(Error::QuadratureNonConvergence { estimated: err, tolerance: tol });
        }
        let mut jet = jet;
        jet.quad_error = err;
        return Ok(jet);
    }
    Ok(jet)
}

fn jet_difference(a: &SmoothedJet, b: &SmoothedJet) -> f64 {
    let mut worst: f64 = 0.0;
    for (p, q) in a.point.iter().zip(&b.point) {
        worst = worst.max((p - q).abs());
    }
    for (ra, rb) in a.grad_x.iter().zip(&b.grad_x) {
        for (p, q) in ra.iter().zip(rb) {
            worst = worst.max((p - q).abs());
        }
    }
    for (p, q) in a.d_r.iter().zip(&b.d_r) {
        worst = worst.max((p - q).abs());
    }
    for (ha, hb) in a.hess.iter().zip(&b.hess) {
        for (ra, rb) in ha.iter().zip(hb) {
            for (p, q) in ra.iter().zip(rb) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    worst
}

fn jet_with_order(
    g: &LipschitzGraph,
    m: &Mollifier,
    x: &[f64],
    r: f64,
    order: usize,
) -> SmoothedJet {
    let (d, n) = (g.d, g.n);
    let nd = n - d;
    // reference values at x for cancellation-free kernels with zero mean
    let mut phi0 = vec![0.0; nd];
    g.phi(x, &mut phi0);
    let smooth_ref = g.is_differentiable_at(x);
    let mut grad0 = vec![0.0; nd * d];
    if smooth_ref {
        g.grad_phi(x, &mut grad0);
    }

    let mut phi_r = vec![0.0; nd];
    let mut grad = vec![vec![0.0; nd]; d];
    let mut d_r = vec![0.0; nd];
    let mut hess = vec![vec![vec![0.0; nd]; d]; d + 1];

    let mut phi_buf = vec![0.0; nd];
    let mut gphi_buf = vec![0.0; nd * d];
    let mut geta = vec![0.0; d];
    let mut point = vec![0.0; d];

    // Discrete mass of eta on the same node set; dividing by it makes the
    // rule reproduce affine functions exactly.
    let mut eta_mass = 0.0;

    let mut absorb = |u: &[f64], w: f64,
                      eta_mass: &mut f64,
                      phi_r: &mut [f64],
                      grad: &mut [Vec<f64>],
                      d_r: &mut [f64],
                      hess: &mut [Vec<Vec<f64>>],
                      point: &mut [f64],
                      phi_buf: &mut [f64],
                      gphi_buf: &mut [f64],
                      geta: &mut [f64]| {
        for i in 0..d {
            point[i] = x[i] - r * u[i];
        }
        g.phi(point, phi_buf);
        g.grad_phi(point, gphi_buf);
        let eta = m.eta(u);
        let ehat = m.eta_hat(u);
        m.grad_eta(u, geta);
        *eta_mass += w * eta;
        for j in 0..nd {
            let dphi = phi_buf[j] - phi0[j];
            phi_r[j] += w * (eta * dphi + eta * phi0[j]);
            d_r[j] += w * ehat * dphi / r;
        }
        for i in 0..d {
            for j in 0..nd {
                let gval = gphi_buf[j * d + i];
                let dg = gval - grad0[j * d + i];
                grad[i][j] += w * eta * gval;
                // x-derivatives of d_{x_i} phi_r: kernel (d_k eta)/r with zero mean
                for k in 0..d {
                    hess[k][i][j] += w * geta[k] * dg / r;
                }
                // r-derivative of d_{x_i} phi_r: kernel eta_hat / r with zero mean
                hess[d][i][j] += w * ehat * dg / r;
            }
        }
    };

    match d {
        1 => {
            let (nodes, weights) = gauss_legendre(order);
            for (a, b) in conv_panels_1d(g, x[0], r) {
                let c = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (t, w) in nodes.iter().zip(&weights) {
                    let u = [mid + c * t];
                    absorb(
                        &u, w * c, &mut eta_mass, &mut phi_r, &mut grad, &mut d_r, &mut hess,
                        &mut point, &mut phi_buf, &mut gphi_buf, &mut geta,
                    );
                }
            }
        }
        2 => {
            let (nodes, weights) = gauss_legendre(order);
            for (t0, w0) in nodes.iter().zip(&weights) {
                for (t1, w1) in nodes.iter().zip(&weights) {
                    let u = [*t0, *t1];
                    absorb(
                        &u, w0 * w1, &mut eta_mass, &mut phi_r, &mut grad, &mut d_r, &mut hess,
                        &mut point, &mut phi_buf, &mut gphi_buf, &mut geta,
                    );
                }
            }
        }
        _ => panic!("smoothed_jet implemented for d <= 2"),
    }

    for v in phi_r.iter_mut() {
        *v /= eta_mass;
    }
    for row in grad.iter_mut() {
        for v in row.iter_mut() {
            *v /= eta_mass;
        }
    }
    let mut pt = vec![0.0; n];
    pt[..d].copy_from_slice(x);
    pt[d..].copy_from_slice(&phi_r);
    SmoothedJet {
        d,
        n,
        x: x.to_vec(),
        r,
        point: pt,
        grad_x: grad,
        d_r,
        hess,
        quad_error: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat13() -> LipschitzGraph {
        LipschitzGraph::new(1, 3, GraphFamily::Zero).unwrap()
    }

    #[test]
    fn eval_graph_flat_affine_sinusoid() {
        let g = flat13();
        assert_eq!(g.eval_graph(&[0.5]), vec![0.5, 0.0, 0.0]);

        let a = LipschitzGraph::new(1, 3, GraphFamily::Affine { slope: vec![vec![0.1], vec![0.0]] })
            .unwrap();
        let p = a.eval_graph(&[2.0]);
        assert!((p[0] - 2.0).abs() < 1e-15 && (p[1] - 0.2).abs() < 1e-15 && p[2].abs() < 1e-15);

        let s = LipschitzGraph::new(
            1,
            3,
            GraphFamily::Sinusoid { amplitude: 0.05, frequency: 1.0, phase: 0.0, in_axis: 0, out_axis: 0 },
        )
        .unwrap();
        let p = s.eval_graph(&[std::f64::consts::FRAC_PI_2]);
        assert!((p[1] - 0.05).abs() < 1e-15 && p[2].abs() < 1e-15);
    }

    #[test]
    fn mollifier_unit_integral_and_support() {
        for d in [1usize, 2] {
            let m = Mollifier::new(d, 48);
            assert!((m.recheck_unit_integral() - 1.0).abs() < 1e-8, "d={d}");
            let edge = vec![1.0 / (d as f64).sqrt(); d];
            assert_eq!(m.eta(&edge), 0.0);
            let u = vec![0.3; d];
            let neg: Vec<f64> = u.iter().map(|v| -v).collect();
            assert_eq!(m.eta(&u), m.eta(&neg));
        }
    }

    #[test]
    fn jet_of_flat_graph_vanishes() {
        let g = flat13();
        let m = Mollifier::new(1, 48);
        let jet = smoothed_jet(&g, &m, &[0.3], 0.7).unwrap();
        assert!(jet.grad_x[0].iter().all(|v| v.abs() < 1e-14));
        assert!(jet.d_r.iter().all(|v| v.abs() < 1e-14));
        assert!(jet.hess_norm() < 1e-14);
    }

    #[test]
    fn jet_of_affine_graph_is_exact() {
        let g = LipschitzGraph::new(
            1,
            3,
            GraphFamily::Affine { slope: vec![vec![0.07], vec![-0.02]] },
        )
        .unwrap();
        let m = Mollifier::new(1, 48);
        for (x, r) in [(0.0, 0.5), (3.0, 0.01), (-2.0, 4.0)] {
            let jet = smoothed_jet(&g, &m, &[x], r).unwrap();
            assert!((jet.grad_x[0][0] - 0.07).abs() < 1e-10);
            assert!((jet.grad_x[0][1] + 0.02).abs() < 1e-10);
            assert!(jet.d_r.iter().all(|v| v.abs() < 1e-10));
            assert!(jet.hess_norm() < 1e-10);
            // mollification preserves affine functions: Phi_r = Phi
            let p = g.eval_graph(&[x]);
            for (a, b) in jet.point.iter().zip(&p) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    /// Independent dense-midpoint convolution oracle for the sinusoid jet.
    #[test]
    fn jet_matches_dense_midpoint_oracle() {
        let g = LipschitzGraph::new(
            1,
            3,
            GraphFamily::Sinusoid { amplitude: 0.05, frequency: 1.0, phase: 0.0, in_axis: 0, out_axis: 0 },
        )
        .unwrap();
        let m = Mollifier::new(1, 48);
        let (x, r) = (0.0, 0.5);
        let jet = smoothed_jet(&g, &m, &[x], r).unwrap();

        // midpoint rule with N panels for phi_r, d_x phi_r, d_r phi_r, d_r d_x phi_r, d_x d_x phi_r
        let nq = 200_000;
        let mut phi_r = 0.0;
        let mut dx = 0.0;
        let mut dr = 0.0;
        let mut dxx = 0.0;
        let mut drx = 0.0;
        for k in 0..nq {
            let u = -1.0 + 2.0 * (k as f64 + 0.5) / nq as f64;
            let w = 2.0 / nq as f64;
            let phi = 0.05 * (x - r * u).sin();
            let dphi = 0.05 * (x - r * u).cos();
            let eta = m.eta(&[u]);
            let mut ge = [0.0];
            m.grad_eta(&[u], &mut ge);
            let ehat = m.eta_hat(&[u]);
            phi_r += w * eta * phi;
            dx += w * eta * dphi;
            dr += w * ehat * phi / r;
            dxx += w * ge[0] * dphi / r;
            drx += w * ehat * dphi / r;
        }
        assert!((jet.point[1] - phi_r).abs() < 1e-8);
        assert!((jet.grad_x[0][0] - dx).abs() < 1e-8);
        assert!((jet.d_r[0] - dr).abs() < 1e-8);
        assert!((jet.hess[0][0][0] - dxx).abs() < 1e-8);
        assert!((jet.hess[1][0][0] - drx).abs() < 1e-8);
    }

    #[test]
    fn smoothing_error_bounded_by_c0_r() {
        // |Phi_r(x) - Phi(x)| <= c0 r over the family
        let graphs = [
            LipschitzGraph::new(1, 3, GraphFamily::Sinusoid { amplitude: 0.1, frequency: 2.0, phase: 0.3, in_axis: 0, out_axis: 1 }).unwrap(),
            LipschitzGraph::new(1, 3, GraphFamily::RandomFourier { seed: 5, modes: 6, max_frequency: 3.0, c0: 0.2 }).unwrap(),
            LipschitzGraph::new(1, 2, GraphFamily::Corner { slope: 0.15 }).unwrap(),
        ];
        let m = Mollifier::new(1, 48);
        for g in &graphs {
            let mut phi = vec![0.0; g.n - g.d];
            for &x in &[-1.3, 0.0, 0.4, 2.2] {
                for &r in &[0.05, 0.4, 1.9] {
                    let jet = smoothed_jet(g, &m, &[x], r).unwrap();
                    g.phi(&[x], &mut phi);
                    let diff: f64 = jet.point[g.d..]
                        .iter()
                        .zip(&phi)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    assert!(diff <= g.c0 * r * (1.0 + 1e-9), "graph {:?} x={x} r={r}", g.family);
                }
            }
        }
    }

    #[test]
    fn radial_smoothness_bounded() {
        // Lemma-style bound: |d_r phi_r| + r |hess| <= C c0 with a stable C
        let m = Mollifier::new(1, 48);
        let g = LipschitzGraph::new(1, 3, GraphFamily::RandomFourier { seed: 11, modes: 8, max_frequency: 4.0, c0: 0.1 }).unwrap();
        let mut worst: f64 = 0.0;
        for &x in &[-0.9, 0.1, 1.7] {
            for &r in &[0.01, 0.1, 1.0, 10.0] {
                let jet = smoothed_jet(&g, &m, &[x], r).unwrap();
                worst = worst.max(jet.radial_smoothness() / g.c0);
            }
        }
        assert!(worst < 10.0, "C measured {worst}");
    }

    #[test]
    fn corner_distance_matches_grid_oracle() {
        let g = LipschitzGraph::new(1, 3, GraphFamily::Corner { slope: 0.2 }).unwrap();
        let x = [0.0, 1.0, 0.0];
        let dist = g.euclidean_distance(&x);
        // brute-force grid over the parameter
        let mut best = f64::INFINITY;
        let nf = 4_000_000;
        for k in 0..=nf {
            let u = -2.0 + 4.0 * (k as f64) / nf as f64;
            let dy = 0.2 * u.abs() - 1.0;
            best = best.min((u * u + dy * dy).sqrt());
        }
        assert!((dist - best).abs() < 1e-6, "dist={dist} oracle={best}");
    }

    #[test]
    fn distance_flat_and_affine() {
        let g = flat13();
        assert!((g.euclidean_distance(&[0.0, 0.3, 0.4]) - 0.5).abs() < 1e-10);
        let a = LipschitzGraph::new(1, 2, GraphFamily::Affine { slope: vec![vec![0.5]] }).unwrap();
        // point on the normal line at distance l from (1, 0.5)
        let l = 0.7;
        let nrm = [-0.5 / 1.25f64.sqrt(), 1.0 / 1.25f64.sqrt()];
        let p = [1.0 + l * nrm[0], 0.5 + l * nrm[1]];
        assert!((a.euclidean_distance(&p) - l).abs() < 1e-9);
    }

    #[test]
    fn distance_is_upper_envelope() {
        let g = LipschitzGraph::new(1, 3, GraphFamily::Sinusoid { amplitude: 0.08, frequency: 1.7, phase: 0.2, in_axis: 0, out_axis: 0 }).unwrap();
        let p = [0.3, 0.5, -0.2];
        let dist = g.euclidean_distance(&p);
        for k in 0..200 {
            let u = -3.0 + 6.0 * (k as f64) / 199.0;
            let q = g.eval_graph(&[u]);
            let dd: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(dist <= dd + 1e-12);
        }
    }

    #[test]
    fn surface_density_values() {
        let g = flat13();
        assert!((g.surface_density(&[0.2]).unwrap() - 1.0).abs() < 1e-15);
        let a = LipschitzGraph::new(1, 2, GraphFamily::Affine { slope: vec![vec![0.3]] }).unwrap();
        assert!((a.surface_density(&[0.0]).unwrap() - (1.0f64 + 0.09).sqrt()).abs() < 1e-14);
        // d = 2 oracle: direct 2x2 determinant
        let b = LipschitzGraph::new(2, 3, GraphFamily::Affine { slope: vec![vec![0.1, 0.2]] }).unwrap();
        let jac = nalgebra::DMatrix::from_row_slice(1, 2, &[0.1, 0.2]);
        let gram = nalgebra::DMatrix::<f64>::identity(2, 2) + jac.transpose() * jac;
        let oracle = gram.determinant().sqrt();
        assert!((b.surface_density(&[0.4, -0.1]).unwrap() - oracle).abs() < 1e-12);
        // corner kink errors out
        let c = LipschitzGraph::new(1, 2, GraphFamily::Corner { slope: 0.2 }).unwrap();
        assert!(c.surface_density(&[0.0]).is_err());
    }

    #[test]
    fn sampled_lipschitz_respects_declared_bound() {
        let graphs = [
            LipschitzGraph::new(1, 3, GraphFamily::Sinusoid { amplitude: 0.05, frequency: 3.0, phase: 0.0, in_axis: 0, out_axis: 0 }).unwrap(),
            LipschitzGraph::new(2, 4, GraphFamily::RandomFourier { seed: 42, modes: 5, max_frequency: 2.0, c0: 0.2 }).unwrap(),
            LipschitzGraph::new(1, 2, GraphFamily::Corner { slope: 0.1 }).unwrap(),
        ];
        for g in &graphs {
            let q = g.sampled_lipschitz_quotient(4000, 5.0, 3);
            assert!(q <= g.c0 * (1.0 + 1e-9), "family {:?}: {q} vs {}", g.family, g.c0);
        }
    }
}
