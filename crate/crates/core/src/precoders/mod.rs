//! Precoding vector constructions.
//!
//! Steering-based weights ([`far_field_weights`], [`near_field_weights`]),
//! CSI-based precoders ([`mrt`], [`zf`], [`rzf`]) and the subspace
//! projections ([`orthogonalize`], [`orthogonalize_regularized`]) that turn
//! any base vector into an interference-suppressing one. [`build_precoder`]
//! composes them according to a declarative [`PrecoderSpec`].

mod build;
mod spec;

pub use build::{build_precoder, build_precoding_matrix, ClusterView, InfoAccess, NoiseReference};
pub use spec::{BaseVector, InfoSet, PrecoderEntry, PrecoderSpec, Regularization, Scope, Suppression};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Point3};
use crate::linalg::{self, phasor, CMatrix, CVector};

/// Relative norm below which an orthogonalized vector counts as fully suppressed.
pub const SUPPRESSION_FLOOR: f64 = 1e-12;

/// `M × K` channel matrix; column `k` is the channel towards user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(CMatrix);

impl ChannelMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Dimension("channel matrix must be at least 1x1".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("channel matrix has non-finite entries".into()));
        }
        Ok(ChannelMatrix(entries))
    }

    pub fn from_columns(cols: &[CVector]) -> Result<Self> {
        let rows = cols.first().map_or(0, |c| c.len());
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::Dimension("channel columns differ in length".into()));
        }
        ChannelMatrix::new(linalg::from_columns(rows, cols))
    }

    pub fn num_antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.0.ncols()
    }

    pub fn column(&self, k: usize) -> CVector {
        self.0.column(k).into_owned()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// `M × K` precoding matrix whose columns all have unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix(CMatrix);

impl PrecodingMatrix {
    /// Normalizes every column; zero columns are rejected.
    pub fn from_unnormalized(mut w: CMatrix) -> Result<Self> {
        for mut col in w.column_iter_mut() {
            let n = col.norm();
            if n == 0.0 || !n.is_finite() {
                return Err(Error::DegenerateChannel);
            }
            col.unscale_mut(n);
        }
        Ok(PrecodingMatrix(w))
    }

    pub fn from_columns(cols: &[CVector]) -> Result<Self> {
        let rows = cols.first().map_or(0, |c| c.len());
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::Dimension("precoder columns differ in length".into()));
        }
        PrecodingMatrix::from_unnormalized(linalg::from_columns(rows, cols))
    }

    pub fn column(&self, k: usize) -> CVector {
        self.0.column(k).into_owned()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn num_users(&self) -> usize {
        self.0.ncols()
    }
}

/// Plane-wave steering weights towards angle `theta` (radians from
/// broadside), with phases referenced to `reference_antenna`. Unit norm.
pub fn far_field_weights(geometry: &ArrayGeometry, theta: f64, reference_antenna: usize) -> Result<CVector> {
    if !(theta.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!("steering angle {theta} outside (-π/2, π/2)")));
    }
    let positions = geometry.antenna_positions();
    let reference = positions
        .get(reference_antenna)
        .ok_or_else(|| Error::Domain(format!("reference antenna {reference_antenna} out of range")))?;
    let k = -2.0 * std::f64::consts::PI * theta.sin() / geometry.wavelength();
    let w = CVector::from_iterator(
        positions.len(),
        positions.iter().map(|p| phasor(k * p.distance(reference))),
    );
    linalg::normalized(&w)
}

/// Beamfocusing weights `exp(−j2πd_i/λ)` towards `ue` over `antenna_subset`,
/// normalized to unit norm.
pub fn near_field_weights(geometry: &ArrayGeometry, ue: &Point3, antenna_subset: &[usize]) -> Result<CVector> {
    let w = near_field_phases(geometry, ue, antenna_subset)?;
    linalg::normalized(&w)
}

/// Unit-magnitude near-field phases (before normalization).
pub(crate) fn near_field_phases(geometry: &ArrayGeometry, ue: &Point3, antenna_subset: &[usize]) -> Result<CVector> {
    let positions = geometry.antenna_positions();
    let mut w = CVector::zeros(antenna_subset.len());
    for (slot, &i) in antenna_subset.iter().enumerate() {
        let p = positions
            .get(i)
            .ok_or_else(|| Error::Domain(format!("antenna {i} out of range")))?;
        let d = p.distance(ue);
        if d == 0.0 {
            return Err(Error::Singularity { antenna: i });
        }
        w[slot] = phasor(-2.0 * std::f64::consts::PI * d / geometry.wavelength());
    }
    Ok(w)
}

/// Maximum ratio transmission: `h / ‖h‖`.
pub fn mrt(h: &CVector) -> Result<CVector> {
    linalg::normalized(h)
}

/// Zero-forcing matrix `H (HᴴH)⁻¹` before column normalization, so that
/// `Hᴴ W = I`.
pub fn zf_unnormalized(h: &ChannelMatrix) -> Result<CMatrix> {
    let m = h.as_matrix();
    if m.ncols() > m.nrows() {
        return Err(Error::RankDeficient {
            rank: m.nrows(),
            cols: m.ncols(),
        });
    }
    linalg::ensure_full_column_rank(m)?;
    let gram = m.adjoint() * m;
    let inv = linalg::solve(gram, &CMatrix::identity(m.ncols(), m.ncols()))?;
    Ok(m * inv)
}

pub fn zf(h: &ChannelMatrix) -> Result<PrecodingMatrix> {
    PrecodingMatrix::from_unnormalized(zf_unnormalized(h)?)
}

/// Regularized zero-forcing `H (HᴴH + αI)⁻¹` before column normalization.
pub fn rzf_unnormalized(h: &ChannelMatrix, alpha: f64) -> Result<CMatrix> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("regularization must be finite and ≥ 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return zf_unnormalized(h);
    }
    let m = h.as_matrix();
    let gram = linalg::add_diagonal(m.adjoint() * m, alpha);
    let inv = linalg::solve(gram, &CMatrix::identity(m.ncols(), m.ncols()))?;
    Ok(m * inv)
}

pub fn rzf(h: &ChannelMatrix, alpha: f64) -> Result<PrecodingMatrix> {
    PrecodingMatrix::from_unnormalized(rzf_unnormalized(h, alpha)?)
}

/// Projects `w` onto the orthogonal complement of `span(V)`:
/// `w − V(VᴴV)⁻¹Vᴴw`.
///
/// `V` must have full column rank. A result whose norm falls below
/// [`SUPPRESSION_FLOOR`] relative to `‖w‖` is reported as
/// [`Error::FullySuppressed`].
pub fn orthogonalize(w: &CVector, v: &CMatrix) -> Result<CVector> {
    check_shapes(w, v)?;
    let wn = w.norm();
    if wn == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    if v.ncols() == 0 {
        return Ok(w.clone());
    }
    linalg::ensure_full_column_rank(v)?;
    let vh = v.adjoint();
    let coeffs = linalg::solve(&vh * v, &(&vh * CMatrix::from_column_slice(w.len(), 1, w.as_slice())))?;
    let out = w - v * coeffs.column(0);
    if out.norm() < SUPPRESSION_FLOOR * wn {
        return Err(Error::FullySuppressed);
    }
    Ok(out)
}

/// `w − V(VᴴV + αI)⁻¹Vᴴw` for `α > 0`; defined for any rank of `V`.
pub fn orthogonalize_regularized(w: &CVector, v: &CMatrix, alpha: f64) -> Result<CVector> {
    check_shapes(w, v)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("regularization must be finite and > 0, got {alpha}")));
    }
    if v.ncols() == 0 {
        return Ok(w.clone());
    }
    let vh = v.adjoint();
    let gram = linalg::add_diagonal(&vh * v, alpha);
    let coeffs = linalg::solve(gram, &(&vh * CMatrix::from_column_slice(w.len(), 1, w.as_slice())))?;
    Ok(w - v * coeffs.column(0))
}

fn check_shapes(w: &CVector, v: &CMatrix) -> Result<()> {
    if v.ncols() > 0 && v.nrows() != w.len() {
        return Err(Error::Dimension(format!(
            "suppression matrix has {} rows, vector has {}",
            v.nrows(),
            w.len()
        )));
    }
    Ok(())
}
