//! Shared inputs for the benchmarks.

use dmimo::geometry::{los_channel, place_ues, ArrayGeometry, LosChannelParams, Point3};
use dmimo::linalg::CMatrix;
use dmimo::precoders::ChannelMatrix;
use dmimo::scenarios::default_ue_region;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `rows × cols` matrix of i.i.d. `CN(0, 1)` entries.
pub fn gaussian_channel(rows: usize, cols: usize, seed: u64) -> ChannelMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let m = CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re * scale, im * scale)
    });
    ChannelMatrix::new(m).expect("finite entries")
}

/// `k` users dropped in the default region and their LoS channels on the default testbed.
pub fn los_drop(k: usize, seed: u64) -> (ArrayGeometry, Vec<Point3>, ChannelMatrix) {
    let geometry = ArrayGeometry::default_testbed();
    let params = LosChannelParams::new(geometry.wavelength(), Default::default());
    let drop = place_ues(&default_ue_region(), k, 0.10, seed).expect("feasible drop");
    let cols: Vec<_> = drop
        .positions
        .iter()
        .map(|p| los_channel(&geometry, p, &params).expect("users away from antennas"))
        .collect();
    let h = ChannelMatrix::from_columns(&cols).expect("non-empty");
    (geometry, drop.positions, h)
}
