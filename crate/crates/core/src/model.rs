//! Finite model of an abstract spectral datum (ρ, Ψ, Ψ̃) on L²(ρ).
//!
//! # Coordinates
//!
//! The public [`WeightedSpace`] works with plain function values `f(s_j)` and the
//! weighted inner product `Σ w_j f_j conj(g_j)`. All matrices in [`ModelOperators`]
//! act instead on *frame coordinates* `φ_j = √w_j f_j`, where the same inner
//! product is the standard one. In that frame `𝟙` is the vector `√w`, `M`
//! stays diagonal and `M̃² = M² − √w √wᵀ` is a real symmetric matrix.
//! Use [`WeightedSpace::to_frame`] and [`WeightedSpace::from_frame`] to move
//! between the two.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex_json;
use crate::linalg::{self, CMatrix, CVector, C64, ONE};
use crate::measure::{check_unimodular, MeasureError, SpectralMeasure};

/// Relative size of a negative eigenvalue of `M² − 𝟙⊗𝟙` tolerated before
/// clamping is refused.
pub const PSD_CLAMP_TOL: f64 = 1e-8;
/// Value used for Ψ̃ at a zero atom of ρ̃.
pub const PSI_TILDE_AT_ZERO: C64 = ONE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("M^2 - 1(x)1 has eigenvalue {eigenvalue}, below the clamping threshold {threshold}")]
    NotPSD { eigenvalue: f64, threshold: f64 },
    #[error("psi_tilde has {actual} samples but rho_tilde has {expected} positive atoms")]
    MissingPsiTildeSample { expected: usize, actual: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

impl ModelError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Measure(e) => e.kind(),
            Self::NotPSD { .. } => "NotPSD",
            Self::MissingPsiTildeSample { .. } => "MissingPsiTildeSample",
            Self::DimensionMismatch { .. } => "DimensionMismatch",
        }
    }
}

/// L²(ρ) realized as ℂⁿ with weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSpace {
    weights: Vec<f64>,
}

impl WeightedSpace {
    pub fn new(rho: &SpectralMeasure) -> Self {
        Self { weights: rho.weights() }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn inner(&self, f: &CVector, g: &CVector) -> C64 {
        f.iter().zip(g.iter()).zip(&self.weights).map(|((a, b), w)| a * b.conj() * *w).sum()
    }

    pub fn norm(&self, f: &CVector) -> f64 {
        self.inner(f, f).re.max(0.0).sqrt()
    }

    pub fn one(&self) -> CVector {
        CVector::from_element(self.dim(), ONE)
    }

    pub fn to_frame(&self, f: &CVector) -> CVector {
        CVector::from_iterator(self.dim(), f.iter().zip(&self.weights).map(|(x, w)| x * w.sqrt()))
    }

    pub fn from_frame(&self, phi: &CVector) -> CVector {
        CVector::from_iterator(self.dim(), phi.iter().zip(&self.weights).map(|(x, w)| x / w.sqrt()))
    }
}

pub fn build_weighted_space(rho: &SpectralMeasure) -> WeightedSpace {
    WeightedSpace::new(rho)
}

/// Eigendecomposition of `M̃` in frame coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeSpectrum {
    /// `s̃_j ≥ 0`, ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors (columns), real.
    pub vectors: DMatrix<f64>,
    /// `|⟨𝟙, ṽ_j⟩|²`.
    pub weights: Vec<f64>,
    /// Index of the zero atom, present exactly when `Σ w/s² = 1`.
    pub zero_index: Option<usize>,
}

impl TildeSpectrum {
    pub fn positive_indices(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&j| Some(j) != self.zero_index).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.values.len() - usize::from(self.zero_index.is_some())
    }

    pub fn positive_supports(&self) -> Vec<f64> {
        self.positive_indices().iter().map(|&j| self.values[j]).collect()
    }

    /// Atoms of ρ̃ as `(s̃, weight)`, including the zero atom if present.
    pub fn rho_tilde(&self) -> Vec<(f64, f64)> {
        self.values.iter().copied().zip(self.weights.iter().copied()).collect()
    }
}

/// Spectrum of `M̃ = (M² − 𝟙⊗𝟙)^{1/2}` together with the measure ρ̃.
pub fn tilde_spectrum(rho: &SpectralMeasure) -> Result<TildeSpectrum, ModelError> {
    let n = rho.len();
    let s = rho.supports();
    let e = DVector::from_iterator(n, rho.weights().into_iter().map(f64::sqrt));
    let m2 = DMatrix::from_diagonal(&DVector::from_iterator(n, s.iter().map(|x| x * x)));
    let (mut lambda, vectors) = linalg::sym_eigh(m2 - &e * e.transpose());
    let threshold = -PSD_CLAMP_TOL * rho.max_support().powi(2);
    if lambda[0] < threshold {
        return Err(ModelError::NotPSD { eigenvalue: lambda[0], threshold });
    }
    let zero_index = if rho.inv2_is_one() {
        lambda[0] = 0.0;
        Some(0)
    } else {
        None
    };
    let values = lambda.iter().map(|l| l.max(0.0).sqrt()).collect();
    let overlaps = vectors.transpose() * &e;
    let weights = overlaps.iter().map(|x| x * x).collect();
    Ok(TildeSpectrum { values, vectors, weights, zero_index })
}

#[derive(Deserialize)]
struct RawDatum {
    measure: SpectralMeasure,
    #[serde(with = "complex_json::vec")]
    psi: Vec<C64>,
    #[serde(with = "complex_json::vec")]
    psi_tilde: Vec<C64>,
}

impl TryFrom<RawDatum> for SpectralDatum {
    type Error = ModelError;
    fn try_from(raw: RawDatum) -> Result<Self, Self::Error> {
        SpectralDatum::new(raw.measure, raw.psi, raw.psi_tilde)
    }
}

/// Abstract spectral datum: ρ, Ψ sampled on supp ρ, Ψ̃ sampled on the strictly
/// positive atoms of ρ̃ in ascending order. Ψ̃ at a zero atom is
/// [`PSI_TILDE_AT_ZERO`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDatum")]
pub struct SpectralDatum {
    measure: SpectralMeasure,
    #[serde(with = "complex_json::vec")]
    psi: Vec<C64>,
    #[serde(with = "complex_json::vec")]
    psi_tilde: Vec<C64>,
}

impl SpectralDatum {
    pub fn new(rho: SpectralMeasure, psi: Vec<C64>, psi_tilde: Vec<C64>) -> Result<Self, ModelError> {
        check_unimodular(&psi, rho.len())?;
        let tilde = tilde_spectrum(&rho)?;
        if psi_tilde.len() != tilde.positive_count() {
            return Err(ModelError::MissingPsiTildeSample {
                expected: tilde.positive_count(),
                actual: psi_tilde.len(),
            });
        }
        check_unimodular(&psi_tilde, psi_tilde.len())?;
        Ok(Self { measure: rho, psi, psi_tilde })
    }

    /// Sample closed-form phase functions on supp ρ and on the computed
    /// positive atoms of ρ̃.
    pub fn from_functions(
        rho: SpectralMeasure,
        psi: impl Fn(f64) -> C64,
        psi_tilde: impl Fn(f64) -> C64,
    ) -> Result<Self, ModelError> {
        let tilde = tilde_spectrum(&rho)?;
        let psi_vals = rho.supports().into_iter().map(&psi).collect();
        let tilde_vals = tilde.positive_supports().into_iter().map(&psi_tilde).collect();
        Self::new(rho, psi_vals, tilde_vals)
    }

    pub fn rho(&self) -> &SpectralMeasure {
        &self.measure
    }

    pub fn psi(&self) -> &[C64] {
        &self.psi
    }

    pub fn psi_tilde(&self) -> &[C64] {
        &self.psi_tilde
    }

    pub fn tilde_spectrum(&self) -> TildeSpectrum {
        tilde_spectrum(&self.measure).expect("validated datum")
    }
}

/// Model operators of a datum, all in frame coordinates.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    pub n: usize,
    pub s: Vec<f64>,
    pub weights: Vec<f64>,
    pub mtilde: DMatrix<f64>,
    pub tilde: TildeSpectrum,
    pub psi: Vec<C64>,
    /// Ψ̃ on every eigenvector of `M̃`, with the zero-atom convention applied.
    pub psi_tilde_full: Vec<C64>,
    /// The constant function `𝟙`.
    pub one: CVector,
    /// `q = conj(Ψ(s))/s`.
    pub q: CVector,
    pub sigma0_star: DMatrix<f64>,
    pub sigma_star: CMatrix,
    /// `𝓗 f = B·conj(f)`.
    pub h_kernel: CMatrix,
    /// `𝓗̃ f = B̃·conj(f)`.
    pub htilde_kernel: CMatrix,
}

pub fn build_model(datum: &SpectralDatum) -> Result<ModelOperators, ModelError> {
    let rho = datum.rho();
    let n = rho.len();
    let s = rho.supports();
    let weights = rho.weights();
    let tilde = tilde_spectrum(rho)?;
    let mut psi_tilde_full = vec![PSI_TILDE_AT_ZERO; n];
    for (k, j) in tilde.positive_indices().into_iter().enumerate() {
        psi_tilde_full[j] = datum.psi_tilde()[k];
    }
    let y = &tilde.vectors;
    let y_c = linalg::complexify(y);
    let mtilde = y * DMatrix::from_diagonal(&DVector::from_vec(tilde.values.clone())) * y.transpose();
    let m_inv = DMatrix::from_diagonal(&DVector::from_iterator(n, s.iter().map(|x| 1.0 / x)));
    let sigma0_star = &mtilde * &m_inv;

    let phase_tilde_mod = CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        psi_tilde_full.iter().zip(&tilde.values).map(|(p, v)| p * *v),
    ));
    // Ψ̃(M̃)M̃ = Y diag(Ψ̃ s̃) Yᵀ
    let htilde_kernel = &y_c * phase_tilde_mod * y_c.transpose();
    let psi_diag = CMatrix::from_diagonal(&CVector::from_vec(datum.psi().to_vec()));
    let sigma_star = &htilde_kernel * linalg::complexify(&m_inv) * psi_diag;
    let h_kernel =
        CMatrix::from_diagonal(&CVector::from_iterator(n, datum.psi().iter().zip(&s).map(|(p, x)| p.conj() * *x)));
    let one = CVector::from_iterator(n, weights.iter().map(|w| C64::new(w.sqrt(), 0.0)));
    let q = CVector::from_iterator(
        n,
        datum.psi().iter().zip(&s).zip(&weights).map(|((p, x), w)| p.conj() * (w.sqrt() / x)),
    );
    Ok(ModelOperators {
        n,
        s,
        weights,
        mtilde,
        tilde,
        psi: datum.psi().to_vec(),
        psi_tilde_full,
        one,
        q,
        sigma0_star,
        sigma_star,
        h_kernel,
        htilde_kernel,
    })
}

/// `f ↦ B·conj(f)`.
pub fn apply_antilinear(kernel: &CMatrix, f: &CVector) -> Result<CVector, ModelError> {
    if kernel.ncols() != f.len() {
        return Err(ModelError::DimensionMismatch { expected: kernel.ncols(), actual: f.len() });
    }
    Ok(kernel * f.conjugate())
}

/// Linear operator `A₁A₂` for anti-linear `A_i f = B_i·conj(f)`: `B₁·conj(B₂)`.
pub fn compose_antilinear(b1: &CMatrix, b2: &CMatrix) -> CMatrix {
    b1 * b2.conjugate()
}

/// Action of an anti-linear `f ↦ B₁·conj(f)` after a linear `L`: kernel `B₁·conj(L)`.
pub fn antilinear_after_linear(b1: &CMatrix, l: &CMatrix) -> CMatrix {
    b1 * l.conjugate()
}

/// Action of a linear `L` after an anti-linear `f ↦ B·conj(f)`: kernel `L·B`.
pub fn linear_after_antilinear(l: &CMatrix, b: &CMatrix) -> CMatrix {
    l * b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionCheck {
    pub norm: f64,
    pub lambda_max: f64,
}

/// Norm and top eigenvalue of `𝔖₀ = M^{-1/2} M̃ M^{-1/2}`.
pub fn strict_contraction_check(model: &ModelOperators) -> ContractionCheck {
    let half = DMatrix::from_diagonal(&DVector::from_iterator(model.n, model.s.iter().map(|x| x.powf(-0.5))));
    let s0 = &half * &model.mtilde * &half;
    let s0 = (&s0 + s0.transpose()) * 0.5;
    let (vals, _) = linalg::sym_eigh(s0.clone());
    ContractionCheck { norm: linalg::op_norm_real(&s0), lambda_max: *vals.last().unwrap() }
}

/// Smallest singular values of the normalized Krylov Gram matrices of `𝟙`
/// under `M²` and `M̃²`.
pub fn cyclicity_gram(model: &ModelOperators) -> (f64, f64) {
    let n = model.n;
    let m2 = DMatrix::from_diagonal(&DVector::from_iterator(n, model.s.iter().map(|x| x * x)));
    let mt2 = &model.mtilde * &model.mtilde;
    let one = model.one.map(|z| z.re);
    (krylov_gram_min_singval(&m2, &one), krylov_gram_min_singval(&mt2, &one))
}

fn krylov_gram_min_singval(a: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let n = v.len();
    let scale = linalg::op_norm_real(a).max(f64::MIN_POSITIVE);
    let mut cols = Vec::with_capacity(n);
    let mut x = v.clone();
    for _ in 0..n {
        cols.push(x.normalize());
        x = a * &x / scale;
    }
    let k = DMatrix::from_columns(&cols);
    let gram = k.transpose() * k;
    nalgebra::SVD::new(gram, false, false).singular_values.min()
}

impl ModelOperators {
    /// `Σ = (Σ*)^*`.
    pub fn sigma(&self) -> CMatrix {
        self.sigma_star.adjoint()
    }

    pub fn mtilde_complex(&self) -> CMatrix {
        linalg::complexify(&self.mtilde)
    }

    pub fn m_squared(&self) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(self.n, self.s.iter().map(|x| C64::new(x * x, 0.0))))
    }

    /// `W = Ψ̃(M̃)Ψ(M)`.
    pub fn w_operator(&self) -> CMatrix {
        let y = linalg::complexify(&self.tilde.vectors);
        let d = CMatrix::from_diagonal(&CVector::from_vec(self.psi_tilde_full.clone()));
        let psi = CMatrix::from_diagonal(&CVector::from_vec(self.psi.clone()));
        &y * d * y.transpose() * psi
    }

    /// `⟨·, q⟩ q` as a matrix.
    pub fn q_projector(&self) -> CMatrix {
        &self.q * self.q.adjoint()
    }

    pub fn one_projector(&self) -> CMatrix {
        &self.one * self.one.adjoint()
    }

    /// Spectral radius of `Σ*`, computed on the similar matrix `M^{-1/2} Σ* M^{1/2}`.
    pub fn spectral_radius(&self) -> f64 {
        let half = |p: f64| {
            CMatrix::from_diagonal(&CVector::from_iterator(self.n, self.s.iter().map(|x| C64::new(x.powf(p), 0.0))))
        };
        linalg::spectral_radius(&(half(-0.5) * &self.sigma_star * half(0.5)))
    }

    /// `‖(Σ*)^k 𝟙‖` for `k = 0..=k_max` by repeated application.
    pub fn decay_curve(&self, k_max: usize) -> Vec<f64> {
        let mut x = self.one.clone();
        let mut out = Vec::with_capacity(k_max + 1);
        out.push(x.norm());
        for _ in 0..k_max {
            x = &self.sigma_star * x;
            out.push(x.norm());
        }
        out
    }
}
