use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Trigonometric,
    Adjacent,
    Custom,
}

/// Current patterns as the columns of an `L × K` matrix. Every column sums
/// to zero and the columns are orthonormal in the Euclidean inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentPatternBasis {
    kind: PatternKind,
    patterns: DMatrix<f64>,
}

const TOL: f64 = 1e-10;

impl CurrentPatternBasis {
    /// `cos(nθ_ℓ)`, `sin(nθ_ℓ)` for `n = 1, 2, …` with `θ_ℓ = 2πℓ/L`, ordered
    /// cos, sin by frequency; `L − 1` patterns with the lone `cos(Lθ/2)` last
    /// when `L` is even.
    pub fn trigonometric(electrodes: usize) -> Result<Self> {
        if electrodes < 3 {
            return Err(Error::Invalid(format!("need at least 3 electrodes, got {electrodes}")));
        }
        let l = electrodes;
        let theta = |e: usize| std::f64::consts::TAU * e as f64 / l as f64;
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(l - 1);
        for n in 1..=l / 2 {
            cols.push((0..l).map(|e| (n as f64 * theta(e)).cos()).collect());
            if 2 * n != l {
                cols.push((0..l).map(|e| (n as f64 * theta(e)).sin()).collect());
            }
        }
        for c in &mut cols {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            c.iter_mut().for_each(|v| *v /= norm);
        }
        let patterns = DMatrix::from_fn(l, cols.len(), |r, c| cols[c][r]);
        Ok(CurrentPatternBasis {
            kind: PatternKind::Trigonometric,
            patterns,
        })
    }

    /// Adjacent drive `e_ℓ − e_{ℓ+1}` for `ℓ = 0..L−2`, Gram-Schmidt
    /// orthonormalised in that order.
    pub fn adjacent(electrodes: usize) -> Result<Self> {
        if electrodes < 3 {
            return Err(Error::Invalid(format!("need at least 3 electrodes, got {electrodes}")));
        }
        let l = electrodes;
        let raw = DMatrix::from_fn(l, l - 1, |r, c| {
            if r == c {
                1.0
            } else if r == c + 1 {
                -1.0
            } else {
                0.0
            }
        });
        let patterns = gram_schmidt(&raw)?;
        Ok(CurrentPatternBasis {
            kind: PatternKind::Adjacent,
            patterns,
        })
    }

    /// Arbitrary patterns; they are mean-subtracted and orthonormalised.
    pub fn custom(raw: DMatrix<f64>) -> Result<Self> {
        if raw.nrows() < 3 || raw.ncols() == 0 || raw.ncols() >= raw.nrows() {
            return Err(Error::Invalid(format!(
                "custom patterns must be L x K with 0 < K < L, got {} x {}",
                raw.nrows(),
                raw.ncols()
            )));
        }
        let mut centred = raw;
        for mut col in centred.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        Ok(CurrentPatternBasis {
            kind: PatternKind::Custom,
            patterns: gram_schmidt(&centred)?,
        })
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn electrodes(&self) -> usize {
        self.patterns.nrows()
    }

    pub fn len(&self) -> usize {
        self.patterns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.ncols() == 0
    }

    pub fn patterns(&self) -> &DMatrix<f64> {
        &self.patterns
    }

    /// Maximum deviation from orthonormality and from zero column sums.
    pub fn defect(&self) -> f64 {
        let g = self.patterns.transpose() * &self.patterns;
        let ortho = (g - DMatrix::identity(self.len(), self.len())).abs().max();
        let sums = self
            .patterns
            .column_iter()
            .map(|c| c.sum().abs())
            .fold(0.0, f64::max);
        ortho.max(sums)
    }
}

fn gram_schmidt(raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = raw.clone();
    for j in 0..out.ncols() {
        // Two passes keep the columns orthogonal to round-off.
        for _ in 0..2 {
            for i in 0..j {
                let proj = out.column(i).dot(&out.column(j));
                let qi = out.column(i).clone_owned();
                out.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = out.column(j).norm();
        if norm < TOL * raw.column(j).norm().max(1.0) {
            return Err(Error::Invalid(format!("pattern {j} is linearly dependent on earlier ones")));
        }
        out.column_mut(j).scale_mut(1.0 / norm);
    }
    Ok(out)
}
