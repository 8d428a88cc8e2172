//! Surjectivity diagnostics: defect-index case of Σ*, the unitary
//! `W = Ψ̃(M̃)Ψ(M)`, Cesàro probes of its spectral type, and gauge changes of
//! the phase pair.
//!
//! Every finite unitary matrix has pure point spectrum, so the spectral-type
//! verdicts here are trend heuristics over the recorded ladder.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix, CVector, C64};
use crate::measure::{kernel_trend, merge_angles, KernelTrend, SpectralMeasure, UNIMODULAR_TOL};
use crate::model::{build_model, ModelError, ModelOperators, SpectralDatum};

pub const UNITARITY_TOL: f64 = 1e-10;
/// Log-log Cesàro slope at or below which a probe looks absolutely continuous.
pub const AC_SLOPE: f64 = -0.75;
/// Log-log Cesàro slope at or above which a probe looks pure point.
pub const PP_SLOPE: f64 = -0.25;
/// Irrational mixing constant for the commuting Hermitian parts of a unitary.
const MIX: f64 = 0.618_033_988_749_894_8;
/// Eigenphases closer than this are merged in the reported distribution.
pub const PHASE_MERGE_TOL: f64 = 1e-9;

pub const PROBE_NOTE: &str = "A finite unitary matrix has pure point spectrum. The verdict hint \
describes the Cesàro trend over the recorded ladder only and cannot decide whether asymptotic \
stability of the model contraction is equivalent to singular spectrum of W.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("W is not unitary: residual {residual}")]
    NotUnitary { residual: f64 },
    #[error("gauge phase at s = {s} has modulus {modulus}, expected 1")]
    NotUnimodular { s: f64, modulus: f64 },
    #[error("gauge phase at the zero atom of rho_tilde is {value}, expected 1")]
    ZeroAtomPhase { value: C64 },
    #[error("probe vector is zero")]
    ZeroProbe,
    #[error("probe vector has length {actual}, expected {expected}")]
    ProbeLength { expected: usize, actual: usize },
    #[error("ladder must be nonempty with positive entries")]
    InvalidLadder,
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl DiagnosticsError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::NotUnitary { .. } => "NotUnitary",
            Self::NotUnimodular { .. } => "NotUnimodular",
            Self::ZeroAtomPhase { .. } => "ZeroAtomPhase",
            Self::ZeroProbe => "ZeroProbe",
            Self::ProbeLength { .. } => "ProbeLength",
            Self::InvalidLadder => "InvalidLadder",
            Self::Model(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefectCase {
    /// `Σ w/s² = 1` and `∫ s^{-4} dρ = ∞`: Σ is an isometry, defect indices (1,0).
    #[serde(rename = "Case_1_0")]
    Case1_0,
    /// `Σ w/s² = 1` and `∫ s^{-4} dρ < ∞`: defect indices (1,1).
    #[serde(rename = "Case_1_1_a")]
    Case1_1a,
    /// `Σ w/s² < 1`: defect indices (1,1).
    #[serde(rename = "Case_1_1_b")]
    Case1_1b,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectClassification {
    pub inv2: f64,
    pub inv4: f64,
    pub case: DefectCase,
}

/// Defect case of a single atomic measure; `Case1_0` never occurs here because
/// the fourth inverse moment is a finite sum.
pub fn classify_defect(rho: &SpectralMeasure) -> DefectClassification {
    let case = if rho.inv2_is_one() { DefectCase::Case1_1a } else { DefectCase::Case1_1b };
    DefectClassification { inv2: rho.inverse_moment(2), inv4: rho.inverse_moment(4), case }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectTrend {
    pub levels: Vec<DefectClassification>,
    pub trend: KernelTrend,
    /// `Case1_0` when the ladder is flagged divergent, else the case of the finest level.
    pub case: DefectCase,
}

/// Defect case along a refinement ladder ordered by increasing atom count.
pub fn classify_defect_ladder(ladder: &[SpectralMeasure]) -> Result<DefectTrend, DiagnosticsError> {
    let finest = ladder.last().ok_or(DiagnosticsError::InvalidLadder)?;
    let levels: Vec<_> = ladder.iter().map(classify_defect).collect();
    let trend = kernel_trend(ladder);
    let case = if trend.divergent { DefectCase::Case1_0 } else { classify_defect(finest).case };
    Ok(DefectTrend { levels, trend, case })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryW {
    /// `W` in frame coordinates.
    pub matrix: CMatrix,
    /// `‖W*W − I‖` in Frobenius norm.
    pub unitarity_residual: f64,
}

pub fn build_w(datum: &SpectralDatum) -> Result<UnitaryW, DiagnosticsError> {
    let model = build_model(datum)?;
    w_from_model(&model)
}

pub fn w_from_model(model: &ModelOperators) -> Result<UnitaryW, DiagnosticsError> {
    let matrix = model.w_operator();
    let n = model.n;
    let unitarity_residual = (matrix.adjoint() * &matrix - CMatrix::identity(n, n)).norm();
    if unitarity_residual > UNITARITY_TOL {
        return Err(DiagnosticsError::NotUnitary { residual: unitarity_residual });
    }
    Ok(UnitaryW { matrix, unitarity_residual })
}

/// Eigenvalues and orthonormal eigenvectors of a unitary matrix, from the
/// Hermitian matrix `Re W + c·Im W` whose eigenvectors diagonalize both parts.
pub fn unitary_eigen(w: &CMatrix) -> (Vec<C64>, CMatrix) {
    let re = (w + w.adjoint()) * C64::new(0.5, 0.0);
    let im = (w - w.adjoint()) * C64::new(0.0, -0.5);
    let (_, vecs) = linalg::herm_eigh(&re + im * C64::new(MIX, 0.0));
    let values = (0..vecs.ncols())
        .map(|j| {
            let v = vecs.column(j);
            let z = v.dotc(&(w * v));
            z / z.norm()
        })
        .collect();
    (values, vecs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictHint {
    PurePointLike,
    AbsolutelyContinuousLike,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTypeProbe {
    /// `(arg λ, |⟨v, e_λ⟩|²/‖v‖²)`, merged within [`PHASE_MERGE_TOL`].
    pub eigenphases: Vec<(f64, f64)>,
    /// `(N, (1/N) Σ_{n<N} |⟨Wⁿv, v⟩|² / ‖v‖⁴)` over the ladder.
    pub cesaro: Vec<(usize, f64)>,
    /// Least-squares slope of log Cesàro average against log N.
    pub slope: f64,
    /// `Σ |⟨v, e_λ⟩|⁴/‖v‖⁴` over merged eigenphases, the N → ∞ limit.
    pub pure_point_limit: f64,
    pub verdict_hint: VerdictHint,
    pub note: String,
}

pub fn spectral_type_probe(w: &CMatrix, v: &CVector, ladder: &[usize]) -> Result<SpectralTypeProbe, DiagnosticsError> {
    if v.len() != w.ncols() {
        return Err(DiagnosticsError::ProbeLength { expected: w.ncols(), actual: v.len() });
    }
    let norm2 = v.norm_squared();
    if norm2 == 0.0 {
        return Err(DiagnosticsError::ZeroProbe);
    }
    if ladder.is_empty() || ladder.contains(&0) {
        return Err(DiagnosticsError::InvalidLadder);
    }
    let (values, vecs) = unitary_eigen(w);
    let pts = values.iter().enumerate().map(|(j, z)| (z.arg(), vecs.column(j).dotc(v).norm_sqr() / norm2)).collect();
    let eigenphases = merge_angles(pts, PHASE_MERGE_TOL);
    let pure_point_limit = eigenphases.iter().map(|p| p.1 * p.1).sum();

    let n_max = *ladder.iter().max().unwrap();
    let mut prefix = Vec::with_capacity(n_max + 1);
    prefix.push(0.0);
    let mut x = v.clone();
    for n in 0..n_max {
        prefix.push(prefix[n] + x.dotc(v).norm_sqr() / (norm2 * norm2));
        x = w * x;
    }
    let cesaro: Vec<(usize, f64)> = ladder.iter().map(|&n| (n, prefix[n] / n as f64)).collect();
    let slope = loglog_slope(&cesaro);
    let verdict_hint = if slope <= AC_SLOPE {
        VerdictHint::AbsolutelyContinuousLike
    } else if slope >= PP_SLOPE {
        VerdictHint::PurePointLike
    } else {
        VerdictHint::Mixed
    };
    Ok(SpectralTypeProbe { eigenphases, cesaro, slope, pure_point_limit, verdict_hint, note: PROBE_NOTE.into() })
}

fn loglog_slope(points: &[(usize, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// `(ρ, Ψ, Ψ̃) ↦ (ρ, conj(Ψ#)Ψ, Ψ#Ψ̃)`.
///
/// A zero atom of ρ̃ keeps its conventional phase, so `Ψ#(0)` must be 1.
pub fn gauge_transform(
    datum: &SpectralDatum,
    psi_sharp: impl Fn(f64) -> C64,
) -> Result<SpectralDatum, DiagnosticsError> {
    let sharp = |s: f64| {
        let z = psi_sharp(s);
        if (z.norm() - 1.0).abs() > UNIMODULAR_TOL {
            Err(DiagnosticsError::NotUnimodular { s, modulus: z.norm() })
        } else {
            Ok(z)
        }
    };
    let tilde = datum.tilde_spectrum();
    if tilde.zero_index.is_some() {
        let value = sharp(0.0)?;
        if (value - 1.0).norm() > UNIMODULAR_TOL {
            return Err(DiagnosticsError::ZeroAtomPhase { value });
        }
    }
    let psi = datum
        .rho()
        .supports()
        .into_iter()
        .zip(datum.psi())
        .map(|(s, p)| Ok(sharp(s)?.conj() * p))
        .collect::<Result<Vec<_>, DiagnosticsError>>()?;
    let psi_tilde = tilde
        .positive_supports()
        .into_iter()
        .zip(datum.psi_tilde())
        .map(|(s, p)| Ok(sharp(s)? * p))
        .collect::<Result<Vec<_>, DiagnosticsError>>()?;
    Ok(SpectralDatum::new(datum.rho().clone(), psi, psi_tilde)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub defect: DefectClassification,
    pub unitarity_residual: f64,
    /// Probe run with `v = q`.
    pub probe: SpectralTypeProbe,
}

pub fn diagnose(datum: &SpectralDatum, ladder: &[usize]) -> Result<DiagnosticReport, DiagnosticsError> {
    let model = build_model(datum)?;
    let w = w_from_model(&model)?;
    let probe = spectral_type_probe(&w.matrix, &model.q, ladder)?;
    Ok(DiagnosticReport { defect: classify_defect(datum.rho()), unitarity_residual: w.unitarity_residual, probe })
}

/// Dyadic ladder `start, 2·start, …` up to `end` inclusive.
pub fn dyadic_ladder(start: usize, end: usize) -> Vec<usize> {
    std::iter::successors(Some(start.max(1)), |&n| Some(n * 2)).take_while(|&n| n <= end).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direct_map::{forward_spectral_map, HankelSymbol};
    use crate::inverse_map::stability_report;
    use crate::linalg::ONE;
    use crate::measure::DEFAULT_TOL;
    use crate::testutil::{random_datum, separated_datum};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn measure(raw: &[(f64, f64)]) -> SpectralMeasure {
        SpectralMeasure::new(raw.to_vec(), DEFAULT_TOL).unwrap()
    }

    fn normalized_ladder(a: f64, b: f64, counts: &[usize]) -> Vec<SpectralMeasure> {
        counts
            .iter()
            .map(|&n| SpectralMeasure::midpoint(a, b, n, |s| s * s, DEFAULT_TOL).unwrap().with_inv2(1.0).unwrap())
            .collect()
    }

    #[test]
    fn defect_examples() {
        let c = classify_defect(&measure(&[(1.0, 1.0)]));
        assert_eq!((c.inv2, c.inv4, c.case), (1.0, 1.0, DefectCase::Case1_1a));
        let c = classify_defect(&measure(&[(1.0, 0.5), (2.0, 1.0)]));
        assert_eq!((c.inv2, c.case), (0.75, DefectCase::Case1_1b));
    }

    #[test]
    fn defect_ladder_near_origin_flags_isometry_case() {
        let t = classify_defect_ladder(&normalized_ladder(0.0, 1.0, &[50, 100, 200, 400])).unwrap();
        assert_eq!(t.case, DefectCase::Case1_0);
        assert!(t.levels.iter().all(|l| l.case == DefectCase::Case1_1a));
        // The normalized density is s² itself, and Σ h/s_k² ≈ (π²/2)/h.
        let h = 1.0 / 400.0;
        let approx = 0.5 * PI * PI / h;
        assert!((t.trend.inv4[3] / approx - 1.0).abs() < 0.02, "{}", t.trend.inv4[3]);
    }

    #[test]
    fn defect_ladder_away_from_origin_stays_finite() {
        // 10/9 · s² on [0.1,1] has ∫ s^{-4} dρ = 10.
        let t = classify_defect_ladder(&normalized_ladder(0.1, 1.0, &[50, 100, 200, 400])).unwrap();
        assert_eq!(t.case, DefectCase::Case1_1a);
        assert!((t.trend.inv4[3] - 10.0).abs() < 1e-3);
        assert!(!t.trend.divergent);
    }

    #[test]
    fn defect_ladder_agrees_with_kernel_trend() {
        for (a, counts) in [(0.0, [20, 40, 80]), (0.2, [20, 40, 80]), (0.0, [10, 11, 12])] {
            let ladder = normalized_ladder(a, 1.0, &counts);
            let t = classify_defect_ladder(&ladder).unwrap();
            assert_eq!(t.case == DefectCase::Case1_0, kernel_trend(&ladder).divergent);
        }
        assert_eq!(classify_defect_ladder(&[]), Err(DiagnosticsError::InvalidLadder));
    }

    #[test]
    fn w_examples() {
        let rho = measure(&[(1.0, 0.3), (2.0, 0.5)]);
        let d = SpectralDatum::from_functions(rho, |_| ONE, |_| ONE).unwrap();
        let w = build_w(&d).unwrap();
        assert!((w.matrix - CMatrix::identity(2, 2)).norm() <= 1e-12);

        let z = C64::from_polar(1.0, 0.7);
        let d = SpectralDatum::new(measure(&[(1.0, 1.0)]), vec![z], vec![]).unwrap();
        let w = build_w(&d).unwrap();
        assert!((w.matrix[(0, 0)] - z).norm() <= 1e-15);
    }

    #[test]
    fn w_of_one_plus_z() {
        let u = HankelSymbol::from_real(&[1.0, 1.0]).unwrap();
        let d = forward_spectral_map(&u, 8).unwrap();
        let w = build_w(&d).unwrap();
        assert!(w.unitarity_residual <= 1e-12);
        // The shifted symbol is 1, so Ψ̃ ≡ 1 and W = Ψ(M) = diag(−1, 1).
        let expected = CMatrix::from_diagonal(&CVector::from_vec(vec![-ONE, ONE]));
        assert!((&w.matrix - expected).norm() <= 1e-10);
        let (vals, vecs) = unitary_eigen(&w.matrix);
        assert!(vals.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
        let rebuilt = &vecs * CMatrix::from_diagonal(&CVector::from_vec(vals)) * vecs.adjoint();
        assert!((rebuilt - &w.matrix).norm() <= 1e-12);
    }

    #[test]
    fn probe_of_identity_is_pure_point() {
        let w = CMatrix::identity(5, 5);
        let v = CVector::from_element(5, ONE);
        let p = spectral_type_probe(&w, &v, &dyadic_ladder(16, 512)).unwrap();
        assert!(p.cesaro.iter().all(|c| (c.1 - 1.0).abs() <= 1e-12));
        assert_eq!(p.verdict_hint, VerdictHint::PurePointLike);
        assert_eq!(p.eigenphases.len(), 1);
        assert!((p.eigenphases[0].1 - 1.0).abs() <= 1e-12);
        assert!((p.pure_point_limit - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn probe_of_equispaced_arc_decays() {
        let n = 400;
        let theta: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) / n as f64).collect();
        let w = CMatrix::from_diagonal(&CVector::from_iterator(n, theta.iter().map(|&t| C64::from_polar(1.0, t))));
        let v = CVector::from_element(n, C64::new(1.0 / (n as f64).sqrt(), 0.0));
        let ladder = dyadic_ladder(16, 512);
        let p = spectral_type_probe(&w, &v, &ladder).unwrap();
        // ⟨Wᵏv, v⟩ = (1/n) Σ_j e^{ikθ_j} is a geometric sum in e^{ik/n}.
        for &(big_n, c) in &p.cesaro {
            let exact: f64 = (0..big_n)
                .map(|k| {
                    let ratio = C64::from_polar(1.0, k as f64 / n as f64);
                    let first = C64::from_polar(1.0, 0.5 * k as f64 / n as f64);
                    let sum = if k == 0 {
                        C64::new(n as f64, 0.0)
                    } else {
                        first * (ONE - ratio.powu(n as u32)) / (ONE - ratio)
                    };
                    (sum / n as f64).norm_sqr()
                })
                .sum::<f64>()
                / big_n as f64;
            assert!((c - exact).abs() <= 1e-10 * exact.max(1e-3), "N={big_n}: {c} vs {exact}");
        }
        assert_eq!(p.verdict_hint, VerdictHint::AbsolutelyContinuousLike, "slope {}", p.slope);
    }

    #[test]
    fn probe_of_rotating_counterexample_decays() {
        let rho = SpectralMeasure::midpoint(1.0, 2.0, 400, |_| 1.0, DEFAULT_TOL).unwrap().with_inv2(1.0).unwrap();
        let d = SpectralDatum::from_functions(rho, |s| C64::from_polar(1.0, s), |_| ONE).unwrap();
        let r = diagnose(&d, &dyadic_ladder(16, 512)).unwrap();
        assert!(r.unitarity_residual <= 1e-10);
        assert_eq!(r.defect.case, DefectCase::Case1_1a);
        assert_eq!(r.probe.verdict_hint, VerdictHint::AbsolutelyContinuousLike, "slope {}", r.probe.slope);
        assert!(r.probe.note.contains("pure point"));
    }

    #[test]
    fn probe_rejects_bad_input() {
        let w = CMatrix::identity(2, 2);
        assert_eq!(spectral_type_probe(&w, &CVector::zeros(2), &[4]), Err(DiagnosticsError::ZeroProbe));
        assert_eq!(spectral_type_probe(&w, &CVector::from_element(2, ONE), &[]), Err(DiagnosticsError::InvalidLadder));
        assert!(matches!(
            spectral_type_probe(&w, &CVector::from_element(3, ONE), &[4]),
            Err(DiagnosticsError::ProbeLength { .. })
        ));
    }

    #[test]
    fn gauge_examples() {
        let u = HankelSymbol::from_real(&[1.0, 1.0]).unwrap();
        let d = forward_spectral_map(&u, 8).unwrap();
        assert_eq!(gauge_transform(&d, |_| ONE).unwrap(), d);

        let g = gauge_transform(&d, |s| C64::from_polar(1.0, s * s)).unwrap();
        assert_eq!(g.rho(), d.rho());
        let back = gauge_transform(&g, |s| C64::from_polar(1.0, -s * s)).unwrap();
        for (a, b) in back.psi().iter().zip(d.psi()).chain(back.psi_tilde().iter().zip(d.psi_tilde())) {
            assert!((a - b).norm() <= 1e-15);
        }
        let before = stability_report(&d, 500, 1).unwrap();
        let after = stability_report(&g, 500, 1).unwrap();
        assert_eq!(before.verdict, crate::inverse_map::StabilityVerdict::Stable);
        assert_eq!(after.verdict, before.verdict);

        assert!(matches!(gauge_transform(&d, |_| C64::new(2.0, 0.0)), Err(DiagnosticsError::NotUnimodular { .. })));
        assert!(matches!(gauge_transform(&d, |_| -ONE), Err(DiagnosticsError::ZeroAtomPhase { .. })));
    }

    #[test]
    fn dyadic_ladder_examples() {
        assert_eq!(dyadic_ladder(16, 512), vec![16, 32, 64, 128, 256, 512]);
        assert_eq!(dyadic_ladder(1, 1), vec![1]);
    }

    fn same_distribution(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| {
                let d = (x.0 - y.0).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d) <= 1e-9 && (x.1 - y.1).abs() <= 1e-10
            })
    }

    proptest! {
        #[test]
        fn w_is_unitary(seed in any::<u64>(), n in 1usize..8) {
            let d = random_datum(&mut ChaCha8Rng::seed_from_u64(seed), n);
            prop_assert!(build_w(&d).unwrap().unitarity_residual <= 1e-10);
        }

        #[test]
        fn constant_tilde_phase_pushes_rho_forward(seed in any::<u64>(), n in 1usize..7, angle in -3.0f64..3.0) {
            let d = separated_datum(&mut ChaCha8Rng::seed_from_u64(seed), n);
            let c = if d.tilde_spectrum().zero_index.is_some() { ONE } else { C64::from_polar(1.0, angle) };
            let d = SpectralDatum::new(d.rho().clone(), d.psi().to_vec(), vec![c; d.psi_tilde().len()]).unwrap();
            let model = build_model(&d).unwrap();
            let w = w_from_model(&model).unwrap();
            let p = spectral_type_probe(&w.matrix, &model.one, &[1]).unwrap();
            let rotated: Vec<C64> = d.psi().iter().map(|z| z * c).collect();
            let mass = d.rho().total_mass();
            let expected: Vec<(f64, f64)> = d.rho().pushforward_unimodular(&rotated, PHASE_MERGE_TOL).unwrap()
                .into_iter().map(|(t, w)| (t, w / mass)).collect();
            prop_assert!(same_distribution(&p.eigenphases, &expected), "{:?} vs {:?}", p.eigenphases, expected);
        }

        #[test]
        fn constant_phase_pushes_rho_tilde_forward(seed in any::<u64>(), n in 1usize..7, angle in -3.0f64..3.0) {
            let d = separated_datum(&mut ChaCha8Rng::seed_from_u64(seed), n);
            let c = C64::from_polar(1.0, angle);
            let d = SpectralDatum::new(d.rho().clone(), vec![c; n], d.psi_tilde().to_vec()).unwrap();
            let model = build_model(&d).unwrap();
            let w = w_from_model(&model).unwrap();
            let p = spectral_type_probe(&w.matrix, &model.one, &[1]).unwrap();
            let mass = d.rho().total_mass();
            let pts = model.psi_tilde_full.iter().zip(&model.tilde.weights)
                .map(|(z, w)| ((z * c).arg(), w / mass)).collect();
            let expected = merge_angles(pts, PHASE_MERGE_TOL);
            prop_assert!(same_distribution(&p.eigenphases, &expected), "{:?} vs {:?}", p.eigenphases, expected);
        }

        #[test]
        fn gauge_flow_preserves_stability(seed in any::<u64>(), n in 1usize..6, t in -5.0f64..5.0) {
            let d = separated_datum(&mut ChaCha8Rng::seed_from_u64(seed), n);
            let g = gauge_transform(&d, |s| C64::from_polar(1.0, t * s * s)).unwrap();
            let a = stability_report(&d, 300, 1).unwrap();
            let b = stability_report(&g, 300, 1).unwrap();
            prop_assert_eq!(a.verdict, b.verdict);
            let back = gauge_transform(&g, |s| C64::from_polar(1.0, -t * s * s)).unwrap();
            for (x, y) in back.psi().iter().zip(d.psi()).chain(back.psi_tilde().iter().zip(d.psi_tilde())) {
                prop_assert!((x - y).norm() <= 1e-14);
            }
        }
    }
}
