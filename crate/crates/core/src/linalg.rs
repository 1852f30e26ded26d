//! Dense complex linear-algebra helpers shared by the precoders and metrics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `exp(j·phase)`.
#[inline]
pub fn phasor(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut p = phase.rem_euclid(TAU);
    if p > PI {
        p -= TAU;
    }
    p
}

/// Numerical rank with threshold `ε · σ_max · max(rows, cols)`.
pub fn numerical_rank(m: &CMatrix) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let tol = f64::EPSILON * smax * m.nrows().max(m.ncols()) as f64;
    sv.iter().filter(|&&s| s > tol).count()
}

pub fn ensure_full_column_rank(m: &CMatrix) -> Result<()> {
    let rank = numerical_rank(m);
    if rank < m.ncols() {
        return Err(Error::RankDeficient {
            rank,
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Solves `a · x = b` for square `a`; a singular LU factor maps to a rank error.
pub fn solve(a: CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = a.ncols();
    a.lu().solve(b).ok_or(Error::RankDeficient {
        rank: n.saturating_sub(1),
        cols: n,
    })
}

/// `a + alpha·I` for square `a`.
pub fn add_diagonal(mut a: CMatrix, alpha: f64) -> CMatrix {
    for i in 0..a.nrows().min(a.ncols()) {
        a[(i, i)] += alpha;
    }
    a
}

/// Unit-norm copy of `v`; a zero vector is reported as degenerate.
pub fn normalized(v: &CVector) -> Result<CVector> {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::DegenerateChannel);
    }
    Ok(v.unscale(n))
}

/// Rotates `v` by a unit-modulus scalar so that its first nonzero element is
/// real and positive. Two vectors equal up to a unit-modulus factor map to
/// the same aligned vector.
pub fn phase_aligned(v: &CVector) -> CVector {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    match v.iter().find(|z| z.norm() > 1e-8 * scale) {
        Some(z) => v * (z.conj() / z.norm()),
        None => v.clone(),
    }
}

/// Relative distance `‖a − b‖ / ‖b‖` after phase-aligning both vectors.
pub fn aligned_relative_error(a: &CVector, b: &CVector) -> f64 {
    let a = phase_aligned(a);
    let b = phase_aligned(b);
    (a - &b).norm() / b.norm()
}

/// Copies the listed rows of `m` into a new matrix.
pub fn select_rows(m: &CMatrix, rows: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

pub fn select_entries(v: &CVector, rows: &[usize]) -> CVector {
    CVector::from_fn(rows.len(), |i, _| v[rows[i]])
}

/// Builds a matrix from equally long column vectors; zero columns allowed.
pub fn from_columns(rows: usize, cols: &[CVector]) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}
