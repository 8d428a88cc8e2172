//! Finite atomic spectral measures on (0, ∞).
//!
//! A [`SpectralMeasure`] is validated once and immutable afterwards. Continuous
//! densities enter only through [`SpectralMeasure::midpoint`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-12;
/// Relative tolerance for deciding `Σ w/s² = 1`.
pub const INV2_TOL: f64 = 1e-10;
/// Log-log growth rate of the inverse fourth moment in the atom count above
/// which a refinement ladder is flagged as divergent.
pub const DIVERGENCE_EXPONENT: f64 = 0.5;
pub const UNIMODULAR_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("measure has no atoms")]
    Empty,
    #[error("support point {s} at index {index} is not strictly positive")]
    NonPositiveSupport { index: usize, s: f64 },
    #[error("weight {w} at index {index} is not strictly positive")]
    NonPositiveWeight { index: usize, w: f64 },
    #[error("support point {s} appears more than once")]
    DuplicateAtom { s: f64 },
    #[error("normalization violated: sum w/s^2 = {inv2}")]
    NormalizationViolated { inv2: f64 },
    #[error("tolerance {0} must be finite and nonnegative")]
    InvalidTolerance(f64),
    #[error("phase at index {index} has modulus {modulus}, expected 1")]
    NotUnimodular { index: usize, modulus: f64 },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),
}

impl MeasureError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Empty => "Empty",
            Self::NonPositiveSupport { .. } => "NonPositiveSupport",
            Self::NonPositiveWeight { .. } => "NonPositiveWeight",
            Self::DuplicateAtom { .. } => "DuplicateAtom",
            Self::NormalizationViolated { .. } => "NormalizationViolated",
            Self::InvalidTolerance(_) => "InvalidTolerance",
            Self::NotUnimodular { .. } => "NotUnimodular",
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::InvalidDiscretization(_) => "InvalidDiscretization",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub s: f64,
    pub w: f64,
}

#[derive(Deserialize)]
struct RawMeasure {
    atoms: Vec<Atom>,
    #[serde(default = "default_tol")]
    tol: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl TryFrom<RawMeasure> for SpectralMeasure {
    type Error = MeasureError;
    fn try_from(raw: RawMeasure) -> Result<Self, Self::Error> {
        SpectralMeasure::new(raw.atoms.iter().map(|a| (a.s, a.w)).collect(), raw.tol)
    }
}

/// Atomic measure `Σ w_j δ_{s_j}` with strictly increasing support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    TrivialKernel,
    NontrivialKernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelVerdict {
    pub inv2: f64,
    pub inv4: f64,
    pub verdict: KernelKind,
}

/// Inverse moments along a refinement ladder of discretizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTrend {
    pub atom_counts: Vec<usize>,
    pub inv2: Vec<f64>,
    pub inv4: Vec<f64>,
    /// d log(inv4) / d log(atom count) over the last ladder step.
    pub growth_exponent: f64,
    pub inv2_is_one: bool,
    pub divergent: bool,
}

impl SpectralMeasure {
    /// Validate raw `(s, w)` pairs; the result is sorted by support point.
    pub fn new(raw: Vec<(f64, f64)>, tol: f64) -> Result<Self, MeasureError> {
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(MeasureError::InvalidTolerance(tol));
        }
        if raw.is_empty() {
            return Err(MeasureError::Empty);
        }
        for (index, &(s, w)) in raw.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(MeasureError::NonPositiveSupport { index, s });
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(MeasureError::NonPositiveWeight { index, w });
            }
        }
        let mut atoms: Vec<Atom> = raw.into_iter().map(|(s, w)| Atom { s, w }).collect();
        atoms.sort_by(|a, b| a.s.total_cmp(&b.s));
        for pair in atoms.windows(2) {
            if pair[1].s - pair[0].s <= tol * pair[1].s {
                return Err(MeasureError::DuplicateAtom { s: pair[1].s });
            }
        }
        let inv2 = moment(&atoms, 2);
        if inv2 > 1.0 + tol {
            return Err(MeasureError::NormalizationViolated { inv2 });
        }
        Ok(Self { atoms, tol })
    }

    /// Midpoint discretization of `density` on `[a, b]` with `n` atoms; `a` may be 0.
    pub fn midpoint(a: f64, b: f64, n: usize, density: impl Fn(f64) -> f64, tol: f64) -> Result<Self, MeasureError> {
        if !(a >= 0.0 && b > a) {
            return Err(MeasureError::InvalidDiscretization(format!("interval [{a}, {b}] must satisfy 0 <= a < b")));
        }
        if n == 0 {
            return Err(MeasureError::InvalidDiscretization("zero atoms".into()));
        }
        let h = (b - a) / n as f64;
        let raw = (0..n)
            .map(|k| {
                let s = a + (k as f64 + 0.5) * h;
                (s, density(s) * h)
            })
            .collect();
        Self::new(raw, tol)
    }

    /// Same support, weights rescaled so that `Σ w/s²` equals `target`.
    pub fn with_inv2(&self, target: f64) -> Result<Self, MeasureError> {
        let factor = target / self.inverse_moment(2);
        Self::new(self.atoms.iter().map(|a| (a.s, a.w * factor)).collect(), self.tol)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn supports(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.s).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.w).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    pub fn max_support(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.s)
    }

    /// `∫ s^{-p} dρ`.
    pub fn inverse_moment(&self, p: u32) -> f64 {
        moment(&self.atoms, p)
    }

    /// True when `Σ w/s² = 1` within [`INV2_TOL`].
    pub fn inv2_is_one(&self) -> bool {
        (self.inverse_moment(2) - 1.0).abs() <= INV2_TOL
    }

    pub fn classify_kernel(&self) -> KernelVerdict {
        // inv4 is a finite sum for atomic data, so the kernel is never trivial.
        KernelVerdict {
            inv2: self.inverse_moment(2),
            inv4: self.inverse_moment(4),
            verdict: KernelKind::NontrivialKernel,
        }
    }

    /// Pushforward of ρ under the phase map `s_j ↦ arg(phase_j)`.
    ///
    /// Angles live in (−π, π]; atoms whose angles agree within `tol`
    /// (measured on the circle) are merged.
    pub fn pushforward_unimodular(&self, phase: &[Complex64], tol: f64) -> Result<Vec<(f64, f64)>, MeasureError> {
        check_unimodular(phase, self.len())?;
        let pts = phase.iter().zip(&self.atoms).map(|(z, a)| (z.arg(), a.w)).collect();
        Ok(merge_angles(pts, tol))
    }
}

/// Sort `(angle, weight)` pairs on (−π, π] and merge angles within `tol` on the circle.
pub fn merge_angles(mut pts: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (angle, w) in pts {
        match merged.last_mut() {
            Some(last) if angle - last.0 <= tol => last.1 += w,
            _ => merged.push((angle, w)),
        }
    }
    if merged.len() > 1 {
        let first = merged[0];
        let last = merged[merged.len() - 1];
        if first.0 + 2.0 * PI - last.0 <= tol {
            merged.remove(0);
            let n = merged.len();
            merged[n - 1].1 += first.1;
        }
    }
    merged
}

fn moment(atoms: &[Atom], p: u32) -> f64 {
    atoms.iter().map(|a| a.w / a.s.powi(p as i32)).sum()
}

pub fn validate_measure(raw: Vec<(f64, f64)>, tol: f64) -> Result<SpectralMeasure, MeasureError> {
    SpectralMeasure::new(raw, tol)
}

/// Check `|z_j| = 1` within [`UNIMODULAR_TOL`] and the expected length.
pub fn check_unimodular(phase: &[Complex64], expected: usize) -> Result<(), MeasureError> {
    if phase.len() != expected {
        return Err(MeasureError::LengthMismatch { expected, actual: phase.len() });
    }
    for (index, z) in phase.iter().enumerate() {
        let modulus = z.norm();
        if !((modulus - 1.0).abs() <= UNIMODULAR_TOL) {
            return Err(MeasureError::NotUnimodular { index, modulus });
        }
    }
    Ok(())
}

/// Inverse-moment trend along a ladder ordered by increasing atom count.
///
/// The ladder is divergent when every level has `Σ w/s² = 1`, the fourth
/// inverse moment grows strictly, and its growth exponent on the last step
/// exceeds [`DIVERGENCE_EXPONENT`].
pub fn kernel_trend(ladder: &[SpectralMeasure]) -> KernelTrend {
    let atom_counts: Vec<usize> = ladder.iter().map(SpectralMeasure::len).collect();
    let inv2: Vec<f64> = ladder.iter().map(|m| m.inverse_moment(2)).collect();
    let inv4: Vec<f64> = ladder.iter().map(|m| m.inverse_moment(4)).collect();
    let growth_exponent = match ladder.len() {
        0 | 1 => 0.0,
        k => {
            let (n0, n1) = (atom_counts[k - 2] as f64, atom_counts[k - 1] as f64);
            if n1 > n0 {
                (inv4[k - 1] / inv4[k - 2]).ln() / (n1 / n0).ln()
            } else {
                0.0
            }
        }
    };
    let inv2_is_one = !ladder.is_empty() && ladder.iter().all(SpectralMeasure::inv2_is_one);
    let increasing = inv4.windows(2).all(|w| w[1] > w[0]);
    let divergent = inv2_is_one && ladder.len() >= 2 && increasing && growth_exponent > DIVERGENCE_EXPONENT;
    KernelTrend { atom_counts, inv2, inv4, growth_exponent, inv2_is_one, divergent }
}
