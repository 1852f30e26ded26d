//! SINR evaluation, channel-estimation error injection and distribution
//! statistics.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::precoders::{ChannelMatrix, PrecodingMatrix};

/// Linear-scale value to decibels.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One channel use: true channel, precoders and receiver noise variance.
/// Symbols have unit power.
#[derive(Debug, Clone, Copy)]
pub struct LinkRealization<'a> {
    pub channel: &'a ChannelMatrix,
    pub precoders: &'a PrecodingMatrix,
    pub noise_variance: f64,
}

impl<'a> LinkRealization<'a> {
    pub fn new(channel: &'a ChannelMatrix, precoders: &'a PrecodingMatrix, noise_variance: f64) -> Result<Self> {
        let (h, w) = (channel.as_matrix(), precoders.as_matrix());
        if h.shape() != w.shape() {
            return Err(Error::Dimension(format!(
                "channel is {}x{}, precoders are {}x{}",
                h.nrows(),
                h.ncols(),
                w.nrows(),
                w.ncols()
            )));
        }
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(Error::Domain(format!("noise variance must be > 0, got {noise_variance}")));
        }
        Ok(LinkRealization {
            channel,
            precoders,
            noise_variance,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sinr {
    pub linear: f64,
    pub db: f64,
}

impl Sinr {
    fn from_linear(linear: f64) -> Self {
        Sinr {
            linear,
            db: to_db(linear),
        }
    }
}

pub fn sinr(link: &LinkRealization<'_>, k: usize) -> Result<Sinr> {
    sinr_from_parts(link.channel.as_matrix(), link.precoders.as_matrix(), k, link.noise_variance)
}

/// SINR of user `k` for raw matrices: column `l` of `w` carries user `l`'s
/// stream and column `k` of `h` is user `k`'s channel.
pub fn sinr_from_parts(h: &CMatrix, w: &CMatrix, k: usize, noise_variance: f64) -> Result<Sinr> {
    if k >= h.ncols() || w.ncols() != h.ncols() || w.nrows() != h.nrows() {
        return Err(Error::Dimension(format!("user {k} with channel {:?} / precoders {:?}", h.shape(), w.shape())));
    }
    let hk = h.column(k);
    let gains = w.adjoint() * hk;
    // gains[l] = w_lᴴ h_k = conj(h_kᴴ w_l); magnitudes agree.
    let signal = gains[k].norm_sqr();
    let interference: f64 = gains
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != k)
        .map(|(_, g)| g.norm_sqr())
        .sum();
    Ok(Sinr::from_linear(signal / (interference + noise_variance)))
}

/// SINR of every user.
pub fn sinr_all(link: &LinkRealization<'_>) -> Vec<Sinr> {
    (0..link.channel.num_users())
        .map(|k| sinr(link, k).expect("shapes checked at construction"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelErrorModel {
    /// Per-entry error variance `σ_E²`.
    pub variance: f64,
    pub rng_seed: u64,
}

/// Adds i.i.d. `CN(0, σ_E²)` errors to every entry of `h`. Returns the
/// estimate and the realized NMSE `Σ|E|² / Σ|H|²`.
pub fn inject_channel_error(h: &ChannelMatrix, model: &ChannelErrorModel) -> Result<(ChannelMatrix, f64)> {
    if !(model.variance >= 0.0) || !model.variance.is_finite() {
        return Err(Error::Domain(format!("error variance must be ≥ 0, got {}", model.variance)));
    }
    if model.variance == 0.0 {
        return Ok((h.clone(), 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
    let scale = (model.variance / 2.0).sqrt();
    let m = h.as_matrix();
    let err = CMatrix::from_fn(m.nrows(), m.ncols(), |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re * scale, im * scale)
    });
    let power: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    let err_power: f64 = err.iter().map(|z| z.norm_sqr()).sum();
    let estimate = ChannelMatrix::new(m + err)?;
    Ok((estimate, err_power / power))
}

/// Empirical quantile at probability `q` (linear interpolation between
/// order statistics, index `(n − 1)·q`).
pub fn quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoData);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("quantile probability {q} outside [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// SINR level met by a `coverage` fraction of the samples, i.e. the
/// `1 − coverage` quantile.
pub fn guaranteed_sinr(samples_db: &[f64], coverage: f64) -> Result<f64> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::Domain(format!("coverage {coverage} outside (0, 1)")));
    }
    quantile(samples_db, 1.0 - coverage)
}

/// Step-function support of the empirical CDF: sorted samples paired with
/// `i/N`.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::NoData);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect())
}

/// Evaluates a step CDF from [`empirical_cdf`] at `x`.
pub fn cdf_at(cdf: &[(f64, f64)], x: f64) -> f64 {
    let idx = cdf.partition_point(|&(v, _)| v <= x);
    if idx == 0 {
        0.0
    } else {
        cdf[idx - 1].1
    }
}
