//! Shared generators for unit tests.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::C64;
use crate::measure::{SpectralMeasure, DEFAULT_TOL};
use crate::model::{tilde_spectrum, SpectralDatum};

/// Random datum with `n` separated atoms; about half have `Σ w/s² = 1`.
pub fn random_datum(rng: &mut ChaCha8Rng, n: usize) -> SpectralDatum {
    datum_with_gap(rng, n, 1e-3)
}

/// Like [`random_datum`] with atoms at least `0.3` apart, for checks whose
/// margins shrink with clustering.
pub fn separated_datum(rng: &mut ChaCha8Rng, n: usize) -> SpectralDatum {
    assert!(n <= 6);
    datum_with_gap(rng, n, 0.3)
}

fn datum_with_gap(rng: &mut ChaCha8Rng, n: usize, gap: f64) -> SpectralDatum {
    loop {
        let mut s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
        s.sort_by(f64::total_cmp);
        if s.windows(2).any(|w| w[1] - w[0] < gap) {
            continue;
        }
        let w: Vec<f64> = s.iter().map(|x| rng.gen_range(0.1..1.0) * x * x).collect();
        let inv2: f64 = w.iter().zip(&s).map(|(w, x)| w / (x * x)).sum();
        let target = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.2..0.99) };
        let raw = s.iter().zip(&w).map(|(x, w)| (*x, w * target / inv2)).collect();
        let rho = SpectralMeasure::new(raw, DEFAULT_TOL).unwrap();
        let tilde = tilde_spectrum(&rho).unwrap();
        let psi = (0..n).map(|_| C64::from_polar(1.0, rng.gen_range(-PI..PI))).collect();
        let pt = (0..tilde.positive_count()).map(|_| C64::from_polar(1.0, rng.gen_range(-PI..PI))).collect();
        return SpectralDatum::new(rho, psi, pt).unwrap();
    }
}
