//! Forward spectral problem: symbol `u` → datum `(ρ, Ψ_u, Ψ̃_u)`.
//!
//! The anti-linear `H_u` is realized as `Γ·conj(·)` on the first `N` Fourier
//! modes and the truncated operator `H̃_u` as `Γ̃·conj(·)`. The rank comes from
//! the singular values of `Γ` and the range basis from the eigenvectors of
//! `ΓΓ*`. `H̃_u` is compressed to the range of `H_u`, which it leaves invariant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex_json;
use crate::linalg::{self, CMatrix, CVector, C64, ZERO};
use crate::measure::{SpectralMeasure, INV2_TOL};
use crate::model::{ModelError, SpectralDatum};

pub const TRIM_TOL: f64 = 1e-14;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
pub const DEFAULT_GAP_TOL: f64 = 1e-8;
pub const CYCLICITY_TOL: f64 = 1e-10;
pub const REAL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DirectMapError {
    #[error("symbol has no nonzero coefficient")]
    ZeroSymbol,
    #[error("coefficient {index} is not finite")]
    NonFiniteCoefficient { index: usize },
    #[error("truncation {n} is smaller than degree + 1 = {needed}")]
    TruncationTooSmall { n: usize, needed: usize },
    #[error("spectrum is not simple (min singular gap {gap:e}, min tilde gap {gap_tilde:e})")]
    NotSimple { gap: f64, gap_tilde: f64 },
    #[error("u is numerically not cyclic: component {component:e} below threshold")]
    CyclicityLost { component: f64 },
    #[error("symbol is not real: max |Im| = {max_imag:e}")]
    NotSelfAdjoint { max_imag: f64 },
    #[error("forward map found {forward} positive tilde atoms, model found {model}")]
    TildeCountMismatch { forward: usize, model: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl DirectMapError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::ZeroSymbol => "ZeroSymbol",
            Self::NonFiniteCoefficient { .. } => "NonFiniteCoefficient",
            Self::TruncationTooSmall { .. } => "TruncationTooSmall",
            Self::NotSimple { .. } => "NotSimple",
            Self::CyclicityLost { .. } => "CyclicityLost",
            Self::NotSelfAdjoint { .. } => "NotSelfAdjoint",
            Self::TildeCountMismatch { .. } => "TildeCountMismatch",
            Self::Model(e) => e.kind(),
        }
    }
}

#[derive(Deserialize)]
struct RawSymbol {
    #[serde(with = "complex_json::vec")]
    coeffs: Vec<C64>,
}

impl TryFrom<RawSymbol> for HankelSymbol {
    type Error = DirectMapError;
    fn try_from(raw: RawSymbol) -> Result<Self, Self::Error> {
        HankelSymbol::new(raw.coeffs)
    }
}

/// Fourier coefficients `û_0..û_K` of a polynomial symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSymbol")]
pub struct HankelSymbol {
    #[serde(with = "complex_json::vec")]
    coeffs: Vec<C64>,
}

impl HankelSymbol {
    /// Trailing coefficients below [`TRIM_TOL`] are dropped.
    pub fn new(mut coeffs: Vec<C64>) -> Result<Self, DirectMapError> {
        if let Some(index) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(DirectMapError::NonFiniteCoefficient { index });
        }
        while coeffs.last().is_some_and(|c| c.norm() < TRIM_TOL) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(DirectMapError::ZeroSymbol);
        }
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self, DirectMapError> {
        Self::new(coeffs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    /// First `n` coefficients, zero padded.
    pub fn padded(&self, n: usize) -> CVector {
        CVector::from_iterator(n, (0..n).map(|k| self.coeff(k)))
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }
}

/// Truncations above this size use a randomized range finder instead of a dense SVD.
pub const DENSE_LIMIT: usize = 160;
/// Initial sketch width of the randomized range finder.
const SKETCH_START: usize = 16;
const CERTIFY_PROBES: usize = 4;

/// Truncated Hankel operators of a symbol and the numerical range of `H_u`.
///
/// `Γ` and `Γ̃` are never stored; on large truncations they are applied as
/// Hankel matrix-vector products and compressed to the range.
#[derive(Debug, Clone)]
pub struct HankelMatrices {
    pub n: usize,
    /// Zero-padded coefficients of length `n`.
    pub u: CVector,
    /// Orthonormal columns `v_1..v_r` spanning Ran H_u, ordered like `singvals`.
    pub range_basis: CMatrix,
    /// `s_1 > … > s_r`.
    pub singvals: Vec<f64>,
    /// `V*Γ conj(V)`: for `f = Vx`, `H_u f = V·(B conj(x))`.
    pub range_h: CMatrix,
    /// `V*Γ̃ conj(V)`, the compression of `H̃_u`, which leaves Ran H_u invariant.
    pub range_htilde: CMatrix,
}

/// `(Γ_shift X)_{jc} = Σ_k û_{j+k+shift} X_{kc}` on the first `n` modes.
fn hankel_apply(u: &HankelSymbol, n: usize, shift: usize, x: &CMatrix) -> CMatrix {
    let coeffs = u.coeffs();
    let mut out = CMatrix::zeros(n, x.ncols());
    for c in 0..x.ncols() {
        let col = x.column(c);
        for j in 0..n {
            let start = j + shift;
            if start >= coeffs.len() {
                break;
            }
            let len = (coeffs.len() - start).min(n);
            let mut acc = ZERO;
            for k in 0..len {
                acc += coeffs[start + k] * col[k];
            }
            out[(j, c)] = acc;
        }
    }
    out
}

fn dense_hankel(u: &HankelSymbol, n: usize, shift: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |j, k| u.coeff(j + k + shift))
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(n, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn orthonormalize(y: CMatrix) -> CMatrix {
    let q = y.qr().q();
    // Second pass restores orthogonality lost to nearly dependent columns.
    q.clone().qr().q()
}

/// Orthonormal basis capturing Ran Γ by a randomized range finder with one
/// power step. The sketch widens until it holds directions below the rank
/// threshold and random probes of `(I − QQ*)Γ` certify the capture.
pub(crate) fn sketched_range_basis(u: &HankelSymbol, n: usize, rank_tol: f64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut width = SKETCH_START.min(n);
    loop {
        let omega = random_block(&mut rng, n, width);
        let y = hankel_apply(u, n, 0, &omega);
        let q = orthonormalize(y);
        // ΓΓ* = Γ conj(Γ conj(·)).
        let z = hankel_apply(u, n, 0, &hankel_apply(u, n, 0, &q.conjugate()).conjugate());
        let q = orthonormalize(z);
        if width == n {
            return q;
        }
        let b = q.adjoint() * hankel_apply(u, n, 0, &q.conjugate());
        let sv = linalg::singular_values(&b);
        let top = sv[0];
        let exhausted = sv.iter().any(|&x| x <= rank_tol * top);
        if exhausted {
            let probes = random_block(&mut rng, n, CERTIFY_PROBES);
            let gp = hankel_apply(u, n, 0, &probes);
            let resid = &gp - &q * (q.adjoint() * &gp);
            if resid.norm() <= 1e-2 * rank_tol * top * probes.norm() {
                return q;
            }
        }
        width = (2 * width).min(n);
    }
}

pub fn hankel_matrices(u: &HankelSymbol, n: usize, rank_tol: f64) -> Result<HankelMatrices, DirectMapError> {
    let needed = u.degree() + 1;
    if n < needed {
        return Err(DirectMapError::TruncationTooSmall { n, needed });
    }
    // Γ = Q B Qᵀ with B = Q*Γ conj(Q) whenever Ran Γ ⊂ Ran Q, since Γ = Γᵀ.
    let (q, b, bt) = if n <= DENSE_LIMIT {
        (None, dense_hankel(u, n, 0), dense_hankel(u, n, 1))
    } else {
        let q = sketched_range_basis(u, n, rank_tol);
        let qc = q.conjugate();
        let b = q.adjoint() * hankel_apply(u, n, 0, &qc);
        let bt = q.adjoint() * hankel_apply(u, n, 1, &qc);
        (Some(q), b, bt)
    };
    let sv = linalg::singular_values(&b);
    let r = sv.iter().take_while(|&&x| x > rank_tol * sv[0]).count();
    let (all, vectors) = linalg::left_singular(&b);
    let left = vectors.columns(0, r).into_owned();
    let range_h = left.adjoint() * &b * left.conjugate();
    let range_htilde = left.adjoint() * &bt * left.conjugate();
    let range_basis = match q {
        Some(q) => q * left,
        None => left,
    };
    Ok(HankelMatrices { n, u: u.padded(n), range_basis, singvals: all[..r].to_vec(), range_h, range_htilde })
}

impl HankelMatrices {
    pub fn rank(&self) -> usize {
        self.singvals.len()
    }

    pub fn kernel_dim(&self) -> usize {
        self.n - self.rank()
    }

    pub fn op_norm(&self) -> f64 {
        self.singvals.first().copied().unwrap_or(0.0)
    }

    fn symbol(&self) -> HankelSymbol {
        HankelSymbol::new(self.u.iter().copied().collect()).expect("validated at construction")
    }

    /// Dense `Γ`, entries `û_{j+k}`.
    pub fn gamma(&self) -> CMatrix {
        dense_hankel(&self.symbol(), self.n, 0)
    }

    /// Dense `Γ̃`, entries `û_{j+k+1}`.
    pub fn gamma_tilde(&self) -> CMatrix {
        dense_hankel(&self.symbol(), self.n, 1)
    }

    /// `‖Γ̃Γ̃* − (ΓΓ* − uu*)‖ / ‖Γ‖²` on the truncation.
    ///
    /// Exact as matrices when the truncation contains the whole symbol.
    pub fn rank_one_residual(&self) -> f64 {
        let g = self.gamma();
        let gt = self.gamma_tilde();
        let lhs = &gt * gt.adjoint();
        let rhs = &g * g.adjoint() - &self.u * self.u.adjoint();
        linalg::op_norm(&(lhs - rhs)) / self.op_norm().powi(2)
    }

    /// Coordinates of `u` in the range basis.
    pub fn u_in_range(&self) -> CVector {
        self.range_basis.adjoint() * &self.u
    }

    /// Norm of the projection of `z⁰` onto Ran H_u.
    pub fn one_in_range(&self) -> f64 {
        self.range_basis.row(0).norm()
    }

    /// `H_u²` in range coordinates.
    pub fn h_squared(&self) -> CMatrix {
        &self.range_h * self.range_h.conjugate()
    }

    /// `H̃_u²` in range coordinates.
    pub fn htilde_squared(&self) -> CMatrix {
        &self.range_htilde * self.range_htilde.conjugate()
    }
}

/// Spectral decomposition of an anti-linear symmetric `f ↦ B conj(f)` against a vector.
struct AntilinearSpectrum {
    /// Descending singular values.
    values: Vec<f64>,
    /// `⟨x, v_j⟩`.
    components: Vec<C64>,
    /// `⟨B conj(e_j), e_j⟩ / (s_j |⟨x,v_j⟩|²)` for the eigencomponent `e_j`.
    ratios: Vec<Option<C64>>,
}

fn antilinear_spectrum(b: &CMatrix, x: &CVector, zero_tol: f64) -> AntilinearSpectrum {
    let (values, vectors) = linalg::left_singular(b);
    let components: Vec<C64> = (0..values.len()).map(|j| vectors.column(j).dotc(x)).collect();
    let ratios = (0..values.len())
        .map(|j| {
            if values[j] <= zero_tol || components[j].norm() == 0.0 {
                return None;
            }
            let e: CVector = vectors.column(j) * components[j];
            let image = b * e.conjugate();
            Some(linalg::inner(&image, &e) / (values[j] * components[j].norm_sqr()))
        })
        .collect();
    AntilinearSpectrum { values, components, ratios }
}

fn min_relative_gap(desc: &[f64]) -> f64 {
    let top = desc.first().copied().unwrap_or(0.0);
    if desc.len() < 2 || top == 0.0 {
        return f64::INFINITY;
    }
    desc.windows(2).map(|w| (w[0] - w[1]) / top).fold(f64::INFINITY, f64::min)
}

/// Normalized Krylov Gram determinant `det G / Π G_kk` of `x` under `A`.
fn krylov_gram_det(a: &CMatrix, x: &CVector) -> f64 {
    let n = x.len();
    if n == 0 {
        return 1.0;
    }
    let scale = linalg::op_norm(a).max(f64::MIN_POSITIVE);
    let mut cols = Vec::with_capacity(n);
    let mut v = x.clone();
    for _ in 0..n {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        cols.push(v.unscale(norm));
        v = a * v / C64::new(scale, 0.0);
    }
    let k = CMatrix::from_columns(&cols);
    (k.adjoint() * k).determinant().re.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplicityReport {
    /// Normalized Krylov Gram determinant of `u` under `H_u²`.
    pub gram_det_h: f64,
    /// Same for `H̃_u²` on the range.
    pub gram_det_htilde: f64,
    pub is_simple: bool,
    pub min_singval_gap: f64,
    pub min_singval_gap_tilde: f64,
    /// `min_j |⟨u, v_j⟩| / ‖u‖` over both eigenbases.
    pub min_cyclic_component: f64,
    pub rank: usize,
}

/// Simplicity requires pairwise distinct singular values of `H_u` and of the
/// compressed `H̃_u` (relative gap above [`DEFAULT_GAP_TOL`]) and `u` having a
/// nonzero component along every eigenvector. Gram determinants are reported
/// for reference only.
pub fn simplicity_check(u: &HankelSymbol, n: usize) -> Result<SimplicityReport, DirectMapError> {
    let hm = hankel_matrices(u, n, DEFAULT_RANK_TOL)?;
    Ok(simplicity_of(&hm, u))
}

fn simplicity_of(hm: &HankelMatrices, u: &HankelSymbol) -> SimplicityReport {
    let a = hm.u_in_range();
    let zero_tol = DEFAULT_RANK_TOL * hm.op_norm();
    let sp = antilinear_spectrum(&hm.range_h, &a, zero_tol);
    let sp_t = antilinear_spectrum(&hm.range_htilde, &a, zero_tol);
    let unorm = u.l2_norm();
    let min_cyclic_component =
        sp.components.iter().chain(sp_t.components.iter()).map(|c| c.norm() / unorm).fold(f64::INFINITY, f64::min);
    let min_singval_gap = min_relative_gap(&hm.singvals);
    let min_singval_gap_tilde = min_relative_gap(&sp_t.values);
    let is_simple = min_singval_gap > DEFAULT_GAP_TOL
        && min_singval_gap_tilde > DEFAULT_GAP_TOL
        && min_cyclic_component > CYCLICITY_TOL;
    SimplicityReport {
        gram_det_h: krylov_gram_det(&hm.h_squared(), &a),
        gram_det_htilde: krylov_gram_det(&hm.htilde_squared(), &a),
        is_simple,
        min_singval_gap,
        min_singval_gap_tilde,
        min_cyclic_component,
        rank: hm.rank(),
    }
}

/// Forward map output with per-atom conditioning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardReport {
    pub datum: SpectralDatum,
    /// `‖u‖ / (|⟨u,v_j⟩| · relgap_j)` per atom of ρ, ascending in s.
    pub phase_condition: Vec<f64>,
    /// Same for the positive atoms of ρ̃.
    pub phase_condition_tilde: Vec<f64>,
    /// Largest deviation of an extracted phase ratio from unit modulus.
    pub max_modulus_defect: f64,
    pub simplicity: SimplicityReport,
}

fn per_atom_condition(desc: &[f64], comps: &[C64], unorm: f64) -> Vec<f64> {
    let top = desc.first().copied().unwrap_or(1.0);
    (0..desc.len())
        .map(|j| {
            let lo = if j + 1 < desc.len() { desc[j] - desc[j + 1] } else { f64::INFINITY };
            let hi = if j > 0 { desc[j - 1] - desc[j] } else { f64::INFINITY };
            let gap = (lo.min(hi) / top).min(1.0);
            unorm / (comps[j].norm() * gap)
        })
        .collect()
}

fn unit(z: C64) -> C64 {
    z / z.norm()
}

pub fn forward_spectral_map_report(u: &HankelSymbol, n: usize) -> Result<ForwardReport, DirectMapError> {
    let hm = hankel_matrices(u, n, DEFAULT_RANK_TOL)?;
    let simplicity = simplicity_of(&hm, u);
    if simplicity.min_singval_gap <= DEFAULT_GAP_TOL || simplicity.min_singval_gap_tilde <= DEFAULT_GAP_TOL {
        return Err(DirectMapError::NotSimple {
            gap: simplicity.min_singval_gap,
            gap_tilde: simplicity.min_singval_gap_tilde,
        });
    }
    if simplicity.min_cyclic_component <= CYCLICITY_TOL {
        return Err(DirectMapError::CyclicityLost { component: simplicity.min_cyclic_component });
    }
    let r = hm.rank();
    let unorm = u.l2_norm();
    let zero_tol = DEFAULT_RANK_TOL * hm.op_norm();

    let a = hm.u_in_range();
    let sp = antilinear_spectrum(&hm.range_h, &a, zero_tol);
    let sp_t = antilinear_spectrum(&hm.range_htilde, &a, zero_tol);

    let mut max_modulus_defect = 0.0_f64;
    let mut atoms = Vec::with_capacity(r);
    let mut psi = Vec::with_capacity(r);
    for j in (0..r).rev() {
        // H_u e_j = conj(Ψ_j) s_j conj-component, so the ratio is conj(Ψ_j).
        let ratio = sp.ratios[j].expect("positive singular value on the range");
        max_modulus_defect = max_modulus_defect.max((ratio.norm() - 1.0).abs());
        atoms.push((sp.values[j], sp.components[j].norm_sqr()));
        psi.push(unit(ratio).conj());
    }
    let mut psi_tilde = Vec::new();
    let mut tilde_comps = Vec::new();
    let mut tilde_vals = Vec::new();
    for j in (0..r).rev() {
        if let Some(ratio) = sp_t.ratios[j] {
            // H̃_u ẽ_j = Ψ̃_j s̃_j ẽ_j-component, no conjugation.
            max_modulus_defect = max_modulus_defect.max((ratio.norm() - 1.0).abs());
            psi_tilde.push(unit(ratio));
            tilde_comps.push(sp_t.components[j]);
            tilde_vals.push(sp_t.values[j]);
        }
    }
    // Extracted weights carry rounding, so Σ w/s² may exceed 1 by up to INV2_TOL.
    let rho = SpectralMeasure::new(atoms, INV2_TOL).map_err(ModelError::from)?;
    let model_count = crate::model::tilde_spectrum(&rho)?.positive_count();
    if model_count != psi_tilde.len() {
        return Err(DirectMapError::TildeCountMismatch { forward: psi_tilde.len(), model: model_count });
    }
    let datum = SpectralDatum::new(rho, psi, psi_tilde)?;

    let desc_comps: Vec<C64> = sp.components.clone();
    let mut phase_condition = per_atom_condition(&sp.values, &desc_comps, unorm);
    phase_condition.reverse();
    tilde_vals.reverse();
    tilde_comps.reverse();
    let mut phase_condition_tilde = per_atom_condition(&tilde_vals, &tilde_comps, unorm);
    phase_condition_tilde.reverse();
    Ok(ForwardReport { datum, phase_condition, phase_condition_tilde, max_modulus_defect, simplicity })
}

/// `(ρ, Ψ_u, Ψ̃_u)` of a simple symbol, computed on the first `n` modes.
pub fn forward_spectral_map(u: &HankelSymbol, n: usize) -> Result<SpectralDatum, DirectMapError> {
    forward_spectral_map_report(u, n).map(|r| r.datum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseSource {
    /// Ψ, Ψ̃ taken from the forward map (simple symbols).
    Datum,
    /// Signs of the eigenvalues of Γ, Γ̃ (non-simple symbols).
    EigenSigns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfAdjointReport {
    pub gamma_norm: f64,
    /// `‖Γ − Φ|Γ|‖ / ‖Γ‖`.
    pub residual_gamma: f64,
    /// `‖Γ̃ − Φ̃|Γ̃|‖ / ‖Γ‖`.
    pub residual_gamma_tilde: f64,
    pub phase_source: PhaseSource,
    /// No singular value of Γ carries eigenvalues of both signs.
    pub gamma_phase_is_function: bool,
    pub gamma_tilde_phase_is_function: bool,
    /// Largest distance of a datum phase from `±1`.
    pub max_phase_deviation: f64,
}

struct RealSpectrum {
    values: Vec<f64>,
    vectors: nalgebra::DMatrix<f64>,
}

impl RealSpectrum {
    fn new(m: nalgebra::DMatrix<f64>) -> Self {
        let (values, vectors) = linalg::sym_eigh(m);
        Self { values, vectors }
    }

    /// Clusters of numerically equal `|λ|` contain a single sign.
    fn sign_is_function(&self, zero_tol: f64, scale: f64) -> bool {
        let mut mods: Vec<(f64, f64)> =
            self.values.iter().filter(|l| l.abs() > zero_tol).map(|&l| (l.abs(), l.signum())).collect();
        mods.sort_by(|a, b| a.0.total_cmp(&b.0));
        mods.windows(2).all(|w| w[1].0 - w[0].0 > DEFAULT_GAP_TOL * scale || w[0].1 == w[1].1)
    }

    /// `‖T − Φ|T|‖` with `Φ = Σ phase(|λ_i|) v_i v_iᵀ` and `Φ(0) = 0`.
    fn polar_residual(&self, t: &CMatrix, zero_tol: f64, phase: impl Fn(usize, f64) -> C64) -> f64 {
        let n = self.values.len();
        let mut phi = CMatrix::zeros(n, n);
        let mut modulus = CMatrix::zeros(n, n);
        for (i, &l) in self.values.iter().enumerate() {
            let v = linalg::complexify_vec(&self.vectors.column(i).into_owned());
            let p = &v * v.transpose();
            modulus += &p * C64::new(l.abs(), 0.0);
            if l.abs() > zero_tol {
                phi += p * phase(i, l);
            }
        }
        linalg::op_norm(&(t - phi * modulus))
    }
}

fn lookup_phase(supports: &[f64], phases: &[C64], s: f64) -> Option<C64> {
    supports.iter().position(|&x| (x - s).abs() <= DEFAULT_GAP_TOL * x.max(s)).map(|j| phases[j])
}

/// Polar decompositions `Γ = Ψ(|Γ|)|Γ|`, `Γ̃ = Ψ̃(|Γ̃|)|Γ̃|` for a real symbol,
/// with `Ψ(0) = Ψ̃(0) = 0`.
///
/// For simple symbols the phases come from [`forward_spectral_map`]. Otherwise
/// the eigenvalue signs are used and the report records whether they define a
/// function of the modulus.
pub fn selfadjoint_checks(u: &HankelSymbol, n: usize) -> Result<SelfAdjointReport, DirectMapError> {
    let max_imag = u.max_imag();
    if max_imag > REAL_TOL * u.l2_norm() {
        return Err(DirectMapError::NotSelfAdjoint { max_imag });
    }
    let hm = hankel_matrices(u, n, DEFAULT_RANK_TOL)?;
    let norm = hm.op_norm();
    let zero_tol = DEFAULT_RANK_TOL * norm;
    let gamma = hm.gamma();
    let gamma_tilde = hm.gamma_tilde();
    let eig = RealSpectrum::new(gamma.map(|z| z.re));
    let eig_t = RealSpectrum::new(gamma_tilde.map(|z| z.re));
    let sign = |_: usize, l: f64| C64::new(l.signum(), 0.0);

    let (phase_source, residual_gamma, residual_gamma_tilde, max_phase_deviation) = match forward_spectral_map(u, n) {
        Ok(datum) => {
            let sup = datum.rho().supports();
            let sup_t = datum.tilde_spectrum().positive_supports();
            // An unmatched singular value gets phase 0 and shows up in the residual.
            let r =
                eig.polar_residual(&gamma, zero_tol, |_, l| lookup_phase(&sup, datum.psi(), l.abs()).unwrap_or(ZERO));
            let rt = eig_t.polar_residual(&gamma_tilde, zero_tol, |_, l| {
                lookup_phase(&sup_t, datum.psi_tilde(), l.abs()).unwrap_or(ZERO)
            });
            let dev = datum
                .psi()
                .iter()
                .chain(datum.psi_tilde())
                .map(|z| (z - C64::new(z.re.signum(), 0.0)).norm())
                .fold(0.0, f64::max);
            (PhaseSource::Datum, r, rt, dev)
        }
        Err(DirectMapError::NotSimple { .. } | DirectMapError::CyclicityLost { .. }) => (
            PhaseSource::EigenSigns,
            eig.polar_residual(&gamma, zero_tol, sign),
            eig_t.polar_residual(&gamma_tilde, zero_tol, sign),
            0.0,
        ),
        Err(e) => return Err(e),
    };
    Ok(SelfAdjointReport {
        gamma_norm: norm,
        residual_gamma: residual_gamma / norm,
        residual_gamma_tilde: residual_gamma_tilde / norm,
        phase_source,
        gamma_phase_is_function: eig.sign_is_function(zero_tol, norm),
        gamma_tilde_phase_is_function: eig_t.sign_is_function(zero_tol, norm),
        max_phase_deviation,
    })
}
