//! Shared numerical kernels: quadrature, finite differences, periodic
//! splines, and bracketed root finding.

use crate::error::{Error, Result};

/// Composite Simpson weights for a uniform grid of `n` points and spacing
/// `dx`. For an even point count the last interval block is handled with
/// the 3/8 rule so the scheme stays fourth order.
pub fn simpson_weights(n: usize, dx: f64) -> Vec<f64> {
    assert!(n >= 4, "simpson_weights needs at least 4 points");
    let mut w = vec![0.0; n];
    let simpson_end = if n % 2 == 1 { n - 1 } else { n - 4 };
    // 1 4 2 4 ... 4 1 over [0, simpson_end]
    if simpson_end >= 2 {
        w[0] += dx / 3.0;
        w[simpson_end] += dx / 3.0;
        for k in 1..simpson_end {
            w[k] += if k % 2 == 1 { 4.0 * dx / 3.0 } else { 2.0 * dx / 3.0 };
        }
    }
    if n % 2 == 0 {
        // 3/8 rule over the final three intervals.
        let c = 3.0 * dx / 8.0;
        w[n - 4] += c;
        w[n - 3] += 3.0 * c;
        w[n - 2] += 3.0 * c;
        w[n - 1] += c;
    }
    w
}

/// Integrate sampled values on a uniform grid with Simpson weights.
pub fn simpson_integrate(values: &[f64], dx: f64) -> f64 {
    let w = simpson_weights(values.len(), dx);
    values.iter().zip(w.iter()).map(|(v, w)| v * w).sum()
}

fn simpson_rule(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fa, fm, fb)
}

struct AdaptiveSimpson<'a, F> {
    f: &'a mut F,
    abs_tol: f64,
    max_depth: usize,
    evals: usize,
}

impl<F: FnMut(f64) -> f64> AdaptiveSimpson<'_, F> {
    fn recurse(
        &mut self,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        self.evals += 2;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol || (b - a).abs() < 1e-14 {
            return Ok(left + right + err / 15.0);
        }
        if depth >= self.max_depth {
            return Err(Error::Quadrature(format!(
                "adaptive Simpson hit depth {} on [{a}, {b}]",
                self.max_depth
            )));
        }
        let l = self.recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
        let r = self.recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
        Ok(l + r)
    }
}

/// Adaptive Simpson quadrature of `f` over [a, b].
///
/// The tolerance is `abs_tol + rel_tol * |I|` with |I| estimated from a
/// first coarse pass over `seed_panels` panels (smooth periodic integrands
/// need a few panels so structure is not missed by symmetry).
pub fn adaptive_simpson(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    seed_panels: usize,
) -> Result<f64> {
    let panels = seed_panels.max(4);
    let h = (b - a) / panels as f64;
    let mut coarse = 0.0;
    let mut cells = Vec::with_capacity(panels);
    for k in 0..panels {
        let x0 = a + k as f64 * h;
        let x1 = if k + 1 == panels { b } else { a + (k + 1) as f64 * h };
        let (s, fa, fm, fb) = simpson_rule(&mut f, x0, x1);
        coarse += s;
        cells.push((x0, x1, fa, fm, fb, s));
    }
    let tol = abs_tol + rel_tol * coarse.abs();
    let mut adaptive = AdaptiveSimpson {
        f: &mut f,
        abs_tol: tol,
        max_depth: 48,
        evals: 0,
    };
    let per_cell = adaptive.abs_tol / panels as f64;
    let mut total = 0.0;
    for (x0, x1, fa, fm, fb, s) in cells {
        total += adaptive.recurse(x0, x1, fa, fm, fb, s, per_cell, 0)?;
    }
    Ok(total)
}

/// Central difference first derivative with one Richardson level
/// (fourth-order accurate).
pub fn deriv1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Central difference second derivative with one Richardson level.
pub fn deriv2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Mixed second partial d^2 f / dx dy with one Richardson level.
pub fn deriv2_mixed(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Find a root of `f` inside [lo, hi] by bisection. The bracket must have
/// a sign change. Converges to `tol` in x.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::InvalidInput(format!(
            "bisect: no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || hi - lo < tol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Accumulate a continuously unwrapped angle sequence from wrapped samples.
/// Successive samples must differ by less than pi for the branch choice
/// to be unambiguous.
pub fn unwrap_angles(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut offset = 0.0;
    for (k, &w) in wrapped.iter().enumerate() {
        if k > 0 {
            let prev = out[k - 1] - offset;
            let mut d = w - prev;
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
                offset -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
                offset += 2.0 * std::f64::consts::PI;
            }
        }
        out.push(w + offset);
    }
    out
}

/// Periodic cubic spline through n knots at uniform parameter values
/// s_k = k/n on [0, 1). C2-continuous including across the seam.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    values: Vec<f64>,
    second: Vec<f64>,
    h: f64,
}

impl PeriodicSpline {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 3 {
            return Err(Error::InvalidInput(
                "periodic spline needs at least 3 knots".into(),
            ));
        }
        let h = 1.0 / n as f64;
        // Solve the cyclic tridiagonal system for the second derivatives m:
        //   (h/6) m_{k-1} + (2h/3) m_k + (h/6) m_{k+1} = (y_{k+1} - 2y_k + y_{k-1}) / h
        let a = h / 6.0;
        let b = 2.0 * h / 3.0;
        let mut rhs = vec![0.0; n];
        for k in 0..n {
            let prev = values[(k + n - 1) % n];
            let next = values[(k + 1) % n];
            rhs[k] = (next - 2.0 * values[k] + prev) / h;
        }
        let second = solve_cyclic_tridiag(a, b, a, &rhs)?;
        Ok(Self { values, second, h })
    }

    fn locate(&self, s: f64) -> (usize, usize, f64) {
        let n = self.values.len();
        let s = s.rem_euclid(1.0);
        let mut k = (s / self.h).floor() as usize;
        if k >= n {
            k = n - 1;
        }
        let t = s - k as f64 * self.h;
        (k, (k + 1) % n, t)
    }

    pub fn eval(&self, s: f64) -> f64 {
        let (k0, k1, t) = self.locate(s);
        let h = self.h;
        let u = h - t;
        self.second[k0] * u * u * u / (6.0 * h)
            + self.second[k1] * t * t * t / (6.0 * h)
            + (self.values[k0] / h - self.second[k0] * h / 6.0) * u
            + (self.values[k1] / h - self.second[k1] * h / 6.0) * t
    }

    pub fn deriv(&self, s: f64) -> f64 {
        let (k0, k1, t) = self.locate(s);
        let h = self.h;
        let u = h - t;
        -self.second[k0] * u * u / (2.0 * h)
            + self.second[k1] * t * t / (2.0 * h)
            - (self.values[k0] / h - self.second[k0] * h / 6.0)
            + (self.values[k1] / h - self.second[k1] * h / 6.0)
    }
}

/// Solve a cyclic tridiagonal system with constant bands via the
/// Sherman-Morrison correction of the Thomas algorithm.
fn solve_cyclic_tridiag(lower: f64, diag: f64, upper: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    if n < 3 {
        return Err(Error::InvalidInput("cyclic system needs n >= 3".into()));
    }
    let gamma = -diag;
    let mut dmod = vec![diag; n];
    dmod[0] = diag - gamma;
    dmod[n - 1] = diag - lower * upper / gamma;

    let solve = |d: &[f64], r: &[f64]| -> Result<Vec<f64>> {
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut beta = d[0];
        if beta == 0.0 {
            return Err(Error::InvalidInput("singular tridiagonal system".into()));
        }
        x[0] = r[0] / beta;
        for k in 1..n {
            c[k] = upper / beta;
            beta = d[k] - lower * c[k];
            if beta == 0.0 {
                return Err(Error::InvalidInput("singular tridiagonal system".into()));
            }
            x[k] = (r[k] - lower * x[k - 1]) / beta;
        }
        for k in (0..n - 1).rev() {
            x[k] -= c[k + 1] * x[k + 1];
        }
        Ok(x)
    };

    let x = solve(&dmod, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = lower;
    let z = solve(&dmod, &u)?;
    // v = (1, 0, ..., 0, upper/gamma)
    let vx = x[0] + upper / gamma * x[n - 1];
    let vz = 1.0 + z[0] + upper / gamma * z[n - 1];
    let factor = vx / vz;
    Ok(x.iter().zip(z.iter()).map(|(xi, zi)| xi - factor * zi).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn simpson_weights_integrate_cubics_exactly() {
        for n in [5usize, 6, 9, 12] {
            let dx = 1.0 / (n - 1) as f64;
            let xs: Vec<f64> = (0..n).map(|k| k as f64 * dx).collect();
            let vals: Vec<f64> = xs.iter().map(|x| x * x * x - 2.0 * x + 1.0).collect();
            let exact = 0.25 - 1.0 + 1.0;
            assert_abs_diff_eq!(simpson_integrate(&vals, dx), exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn adaptive_simpson_matches_closed_forms() {
        let v = adaptive_simpson(|x| x.sin(), 0.0, PI, 1e-12, 1e-14, 8).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-11);
        let v = adaptive_simpson(|x| (-x).exp(), 0.0, 5.0, 1e-12, 1e-14, 8).unwrap();
        assert_abs_diff_eq!(v, 1.0 - (-5.0f64).exp(), epsilon = 1e-11);
    }

    #[test]
    fn richardson_derivatives() {
        let f = |x: f64| x.sin() * x.exp();
        let df = |x: f64| x.exp() * (x.sin() + x.cos());
        assert_abs_diff_eq!(deriv1(f, 0.7, 1e-3), df(0.7), epsilon = 1e-11);
        let d2 = |x: f64| 2.0 * x.exp() * x.cos();
        assert_abs_diff_eq!(deriv2(f, 0.7, 1e-3), d2(0.7), epsilon = 1e-8);
    }

    #[test]
    fn mixed_partial() {
        let f = |x: f64, y: f64| (x * y).sin() + x * x * y;
        // d2f/dxdy = cos(xy) - xy sin(xy) + 2x
        let exact = |x: f64, y: f64| (x * y).cos() - x * y * (x * y).sin() + 2.0 * x;
        assert_abs_diff_eq!(deriv2_mixed(f, 0.4, 1.1, 1e-3), exact(0.4, 1.1), epsilon = 1e-9);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert_abs_diff_eq!(r, 2.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn unwrap_accumulates_across_branch() {
        let wrapped: Vec<f64> = (0..100)
            .map(|k| {
                let theta = 0.3 * k as f64;
                theta.sin().atan2(theta.cos())
            })
            .collect();
        let un = unwrap_angles(&wrapped);
        for (k, u) in un.iter().enumerate() {
            assert_abs_diff_eq!(*u, 0.3 * k as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn periodic_spline_reproduces_smooth_periodic_function() {
        let n = 64;
        let values: Vec<f64> = (0..n)
            .map(|k| (2.0 * PI * k as f64 / n as f64).sin())
            .collect();
        let sp = PeriodicSpline::new(values).unwrap();
        for j in 0..200 {
            let s = j as f64 / 200.0;
            assert_abs_diff_eq!(sp.eval(s), (2.0 * PI * s).sin(), epsilon = 1e-5);
            assert_abs_diff_eq!(sp.deriv(s), 2.0 * PI * (2.0 * PI * s).cos(), epsilon = 1e-3);
        }
        // C1 across the seam
        assert_abs_diff_eq!(sp.deriv(0.0), sp.deriv(1.0 - 1e-12), epsilon = 1e-6);
    }
}
