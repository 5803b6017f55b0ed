//! Quadrature building blocks shared by the geometry and distance modules.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Nodes are roots of the Legendre polynomial P_n, found by Newton iteration
/// from the Chebyshev initial guess; weights are 2 / ((1-x^2) P_n'(x)^2).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return hit.clone();
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = (n as f64) * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    cache
        .lock()
        .unwrap()
        .insert(n, (nodes.clone(), weights.clone()));
    (nodes, weights)
}

/// Integrate f over [a, b] with an n-point Gauss-Legendre rule.
pub fn integrate_gl<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        acc += w * f(mid + c * x);
    }
    acc * c
}

/// Adaptive quadrature built on a fixed Gauss rule: the panel with the worst
/// |GL16 - GL8| discrepancy is bisected until the summed estimate drops below
/// the relative tolerance or the panel budget runs out.
///
/// Returns (value, error estimate).
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_panels: usize,
) -> (f64, f64) {
    fn panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64, f64) {
        let coarse = integrate_gl(&mut *f, a, b, 8);
        let fine = integrate_gl(&mut *f, a, b, 16);
        (a, b, fine, (fine - coarse).abs())
    }
    let mut panels = vec![panel(f, a, b)];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs().max(1e-300) || panels.len() >= max_panels {
            return (total, err);
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        panels.push(panel(f, pa, mid));
        panels.push(panel(f, mid, pb));
    }
}

/// Tensor-product Gauss-Legendre over the cube [-1,1]^dim, mapped by `scale`
/// and `center` per axis. Calls `f(point, weight)` for every node.
pub fn tensor_gl<F: FnMut(&[f64], f64)>(
    dim: usize,
    center: &[f64],
    half_width: &[f64],
    n: usize,
    f: &mut F,
) {
    let (nodes, weights) = gauss_legendre(n);
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    loop {
        let mut w = 1.0;
        for k in 0..dim {
            point[k] = center[k] + half_width[k] * nodes[idx[k]];
            w *= weights[idx[k]] * half_width[k];
        }
        f(&point, w);
        // advance the multi-index
        let mut k = 0;
        loop {
            if k == dim {
                return;
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // degree 2n-1 exactness
        let v = integrate_gl(|x| x * x * x * x * x * x, -1.0, 1.0, 4);
        assert!((v - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn gl_arbitrary_interval() {
        let v = integrate_gl(|x| x.sin(), 0.0, std::f64::consts::PI, 24);
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let mut f = |x: f64| 1.0 / (1e-4 + x * x);
        let (v, _e) = integrate_adaptive(&mut f, -1.0, 1.0, 1e-12, 400);
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!((v - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn tensor_gl_matches_product() {
        let mut acc = 0.0;
        tensor_gl(2, &[0.0, 0.0], &[1.0, 2.0], 12, &mut |p, w| {
            acc += w * (p[0].cos() * p[1].sin().powi(2));
        });
        let exact = integrate_gl(|x| x.cos(), -1.0, 1.0, 12)
            * integrate_gl(|y| y.sin().powi(2), -2.0, 2.0, 12);
        assert!((acc - exact).abs() < 1e-12);
    }
}
