//! Restarted GMRES for real-linear operators `x ↦ A₁x + A₂x̄`.
//!
//! Such operators are not complex-linear, so the iteration runs on the real
//! embedding `ℂᴺ ≅ ℝ²ᴺ`: vectors keep complex storage but every inner product is
//! `Re⟨x, y⟩` and every Krylov coefficient is real.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// An operator that is additive over real scalar combinations.
pub trait RealLinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64], out: &mut [Complex64]);
}

impl<F> RealLinearOperator for (usize, F)
where
    F: Fn(&[Complex64], &mut [Complex64]) + Sync,
{
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        (self.1)(x, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KrylovConfig {
    /// Relative residual target `‖op(x) − b‖ ≤ tol·‖b‖`.
    pub tol: f64,
    pub restart: usize,
    /// Cap on the total number of inner iterations.
    pub max_iter: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            tol: 1e-6,
            restart: 30,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovSolution {
    pub x: Vec<Complex64>,
    /// Final relative residual.
    pub residual: f64,
    pub iterations: usize,
    /// True relative residual at the start of each restart cycle and at exit.
    pub residual_history: Vec<f64>,
}

fn rdot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn rnorm(a: &[Complex64]) -> f64 {
    rdot(a, a).sqrt()
}

fn residual(op: &dyn RealLinearOperator, x: &[Complex64], rhs: &[Complex64], r: &mut [Complex64]) {
    op.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
}

/// Solves `op(x) = rhs`, starting from `x0` (zero when absent).
pub fn solve_real_linear(
    op: &dyn RealLinearOperator,
    rhs: &[Complex64],
    x0: Option<&[Complex64]>,
    cfg: &KrylovConfig,
) -> Result<KrylovSolution> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::GridMismatch(format!(
            "operator dimension {n} vs right-hand side length {}",
            rhs.len()
        )));
    }
    if !(cfg.tol > 0.0) || cfg.restart == 0 {
        return Err(Error::Invalid(format!(
            "solver needs tol > 0 and restart > 0, got tol={} restart={}",
            cfg.tol, cfg.restart
        )));
    }
    if let Some(index) = rhs.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite {
            what: "solver right-hand side",
            index,
        });
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut x = match x0 {
        Some(g) if g.len() == n => g.to_vec(),
        Some(g) => {
            return Err(Error::GridMismatch(format!(
                "initial guess length {} vs dimension {n}",
                g.len()
            )))
        }
        None => vec![zero; n],
    };
    let bnorm = rnorm(rhs);
    if bnorm == 0.0 {
        return Ok(KrylovSolution {
            x: vec![zero; n],
            residual: 0.0,
            iterations: 0,
            residual_history: vec![0.0],
        });
    }

    let m = cfg.restart;
    let mut r = vec![zero; n];
    let mut w = vec![zero; n];
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0f64; m]; m + 1];
    let mut cs = vec![0.0f64; m];
    let mut sn = vec![0.0f64; m];
    let mut g = vec![0.0f64; m + 1];
    let mut iterations = 0;
    let mut history = Vec::new();

    residual(op, &x, rhs, &mut r);
    let mut rel = rnorm(&r) / bnorm;
    history.push(rel);

    while rel > cfg.tol && iterations < cfg.max_iter {
        let beta = rnorm(&r);
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;

        let mut k = 0;
        while k < m && iterations < cfg.max_iter {
            op.apply(&basis[k], &mut w);
            for (j, vj) in basis.iter().enumerate() {
                let hjk = rdot(&w, vj);
                h[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= vi * hjk;
                }
            }
            let hnext = rnorm(&w);
            h[k + 1][k] = hnext;

            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];

            iterations += 1;
            k += 1;
            let estimate = g[k].abs() / bnorm;
            if estimate <= cfg.tol || hnext <= f64::EPSILON * bnorm {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }

        // Back substitution on the k×k upper triangle.
        let mut y = vec![0.0f64; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += vi * *yj;
            }
        }

        residual(op, &x, rhs, &mut r);
        let new_rel = rnorm(&r) / bnorm;
        history.push(new_rel);
        if new_rel >= rel && k == 0 {
            break;
        }
        rel = new_rel;
    }

    if rel <= cfg.tol {
        Ok(KrylovSolution {
            x,
            residual: rel,
            iterations,
            residual_history: history,
        })
    } else {
        Err(Error::NotConverged {
            iterations,
            residual: rel,
        })
    }
}
