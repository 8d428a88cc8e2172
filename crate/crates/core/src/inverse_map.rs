//! Inverse spectral problem: datum → symbol via `û_k = ⟨(Σ*)^k 𝟙, q⟩`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::direct_map::{forward_spectral_map, DirectMapError, HankelSymbol};
use crate::linalg::{CMatrix, CVector, C64};
use crate::model::{build_model, ModelError, ModelOperators, SpectralDatum};

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
/// Auto order needs `ρ(Σ*) < 1 − AUTO_RADIUS_MARGIN`.
pub const AUTO_RADIUS_MARGIN: f64 = 1e-6;
/// Stability margin `ε_sr`.
pub const STABLE_RADIUS_MARGIN: f64 = 1e-8;
pub const RESOLVENT_MARGIN: f64 = 1e-9;
pub const MAX_AUTO_ORDER: usize = 200_000;
/// Terminal ratio `‖(Σ*)^k 𝟙‖/‖𝟙‖` above which a decay curve counts as a plateau.
pub const PLATEAU_RATIO: f64 = 0.1;
pub const TELESCOPING_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InverseMapError {
    #[error("spectral radius {radius} too close to 1 for automatic order; pass an explicit order")]
    SpectralRadiusNearOne { radius: f64 },
    #[error("automatic order exceeded {cap} terms")]
    OrderCapReached { cap: usize },
    #[error("|z| = {modulus} outside the admissible disk")]
    OutsideDisk { modulus: f64 },
    #[error("linear solve (I - zΣ*)x = 1 failed")]
    SolveFailed,
    #[error("datum is not stable: spectral radius {radius}")]
    NotStable { radius: f64 },
    #[error("round trip changed atom counts: {expected} -> {actual}")]
    AtomCountMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Direct(#[from] DirectMapError),
}

impl InverseMapError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SpectralRadiusNearOne { .. } => "SpectralRadiusNearOne",
            Self::OrderCapReached { .. } => "OrderCapReached",
            Self::OutsideDisk { .. } => "OutsideDisk",
            Self::SolveFailed => "SolveFailed",
            Self::NotStable { .. } => "NotStable",
            Self::AtomCountMismatch { .. } => "AtomCountMismatch",
            Self::Model(e) => e.kind(),
            Self::Direct(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    /// Coefficients `û_0..û_K`.
    Fixed(usize),
    /// Smallest `K` with `‖(Σ*)^{K+1}𝟙‖·‖q‖` below the tail tolerance.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub symbol: HankelSymbol,
    /// Untrimmed `û_0..û_K`.
    #[serde(with = "crate::complex_json::vec")]
    pub coeffs: Vec<C64>,
    /// `‖(Σ*)^{K+1}𝟙‖·‖q‖`, an upper bound for every `|û_k|` with `k > K`.
    pub tail_bound: f64,
    pub spectral_radius: f64,
}

pub fn recover_symbol(datum: &SpectralDatum, order: Order) -> Result<HankelSymbol, InverseMapError> {
    recover_symbol_with(datum, order, DEFAULT_TAIL_TOL).map(|r| r.symbol)
}

pub fn recover_symbol_with(datum: &SpectralDatum, order: Order, tail_tol: f64) -> Result<Recovery, InverseMapError> {
    let model = build_model(datum)?;
    recover_from_model(&model, order, tail_tol)
}

pub fn recover_from_model(model: &ModelOperators, order: Order, tail_tol: f64) -> Result<Recovery, InverseMapError> {
    let spectral_radius = model.spectral_radius();
    let qnorm = model.q.norm();
    let cap = match order {
        Order::Fixed(k) => k,
        Order::Auto => {
            if spectral_radius >= 1.0 - AUTO_RADIUS_MARGIN {
                return Err(InverseMapError::SpectralRadiusNearOne { radius: spectral_radius });
            }
            MAX_AUTO_ORDER
        }
    };
    let mut x = model.one.clone();
    let mut coeffs = Vec::new();
    loop {
        coeffs.push(model.q.dotc(&x));
        x = &model.sigma_star * x;
        let tail_bound = x.norm() * qnorm;
        let k = coeffs.len() - 1;
        let done = match order {
            Order::Fixed(_) => k >= cap,
            Order::Auto => tail_bound <= tail_tol,
        };
        if done {
            let symbol = HankelSymbol::new(coeffs.clone())?;
            return Ok(Recovery { symbol, coeffs, tail_bound, spectral_radius });
        }
        if k >= cap {
            return Err(InverseMapError::OrderCapReached { cap });
        }
    }
}

/// `u(z) = ⟨(I − zΣ*)^{-1}𝟙, q⟩`.
pub fn recover_symbol_resolvent(datum: &SpectralDatum, z: C64) -> Result<C64, InverseMapError> {
    if z.norm() > 1.0 - RESOLVENT_MARGIN {
        return Err(InverseMapError::OutsideDisk { modulus: z.norm() });
    }
    let model = build_model(datum)?;
    let a = CMatrix::identity(model.n, model.n) - &model.sigma_star * z;
    let x = a.lu().solve(&model.one).ok_or(InverseMapError::SolveFailed)?;
    Ok(model.q.dotc(&x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityVerdict {
    Stable,
    NotStable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauStats {
    /// First `k` with `‖(Σ*)^k 𝟙‖ ≤ ‖𝟙‖/2`.
    pub half_decay_k: Option<usize>,
    /// `‖(Σ*)^{k_max} 𝟙‖ / ‖𝟙‖`.
    pub terminal_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `‖(Σ*)^k 𝟙‖` for `k = 0..=k_max`.
    pub decay_curve: Vec<f64>,
    pub spectral_radius: f64,
    /// Per probe, `max_n |‖f‖² − ‖(Σ*)^n f‖² − Σ_{k<n}|⟨f, Σ^k q⟩|²|` for unit `f`.
    pub isometry_defect: Vec<f64>,
    pub verdict: StabilityVerdict,
    /// `‖(Σ*)^{k_max}𝟙‖·‖q‖`, bounding `|û_k|` for `k ≥ k_max`.
    pub tail_bound: f64,
    pub plateau: PlateauStats,
}

impl StabilityReport {
    pub fn max_isometry_defect(&self) -> f64 {
        self.isometry_defect.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub k_max: usize,
    /// Number of probe vectors; the first is `𝟙/‖𝟙‖`, the rest are random.
    pub probes: usize,
    pub seed: u64,
    pub radius_margin: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { k_max: 2000, probes: 4, seed: 0, radius_margin: STABLE_RADIUS_MARGIN }
    }
}

/// Finite matrices: a radius below `1 − ε_sr` proves stability only once the
/// computed curve has also decayed below [`PLATEAU_RATIO`]; otherwise the
/// run is reported as `Inconclusive` along with the plateau statistics.
pub fn classify(spectral_radius: f64, terminal_ratio: f64, radius_margin: f64) -> StabilityVerdict {
    let radius_ok = spectral_radius < 1.0 - radius_margin;
    let decayed = terminal_ratio <= PLATEAU_RATIO;
    match (radius_ok, decayed) {
        (true, true) => StabilityVerdict::Stable,
        (false, false) => StabilityVerdict::NotStable,
        _ => StabilityVerdict::Inconclusive,
    }
}

pub fn stability_report(
    datum: &SpectralDatum,
    k_max: usize,
    probes: usize,
) -> Result<StabilityReport, InverseMapError> {
    stability_report_with(datum, StabilityOptions { k_max, probes, ..Default::default() })
}

pub fn stability_report_with(
    datum: &SpectralDatum,
    opts: StabilityOptions,
) -> Result<StabilityReport, InverseMapError> {
    let model = build_model(datum)?;
    Ok(stability_from_model(&model, opts))
}

pub fn stability_from_model(model: &ModelOperators, opts: StabilityOptions) -> StabilityReport {
    let decay_curve = model.decay_curve(opts.k_max);
    let spectral_radius = model.spectral_radius();
    let one_norm = decay_curve[0];
    let terminal_ratio = decay_curve[opts.k_max] / one_norm;
    let half_decay_k = decay_curve.iter().position(|&x| x <= 0.5 * one_norm);

    let mut probes = Vec::with_capacity(opts.probes);
    if opts.probes > 0 {
        probes.push(model.one.unscale(one_norm));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while probes.len() < opts.probes {
        let v = CVector::from_iterator(
            model.n,
            (0..model.n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
        );
        let norm = v.norm();
        if norm > 0.0 {
            probes.push(v.unscale(norm));
        }
    }
    let sigma = model.sigma();
    let mut shifted_q = Vec::with_capacity(opts.k_max);
    let mut y = model.q.clone();
    for _ in 0..opts.k_max {
        let next = &sigma * &y;
        shifted_q.push(y);
        y = next;
    }
    let isometry_defect = probes.par_iter().map(|f| telescoping_defect(model, f, &shifted_q)).collect();

    StabilityReport {
        decay_curve: decay_curve.clone(),
        spectral_radius,
        isometry_defect,
        verdict: classify(spectral_radius, terminal_ratio, opts.radius_margin),
        tail_bound: decay_curve[opts.k_max] * model.q.norm(),
        plateau: PlateauStats { half_decay_k, terminal_ratio },
    }
}

fn telescoping_defect(model: &ModelOperators, f: &CVector, shifted_q: &[CVector]) -> f64 {
    let f2 = f.norm_squared();
    let mut x = f.clone();
    let mut sum = 0.0;
    let mut worst = 0.0_f64;
    for sq in shifted_q {
        sum += sq.dotc(f).norm_sqr();
        x = &model.sigma_star * x;
        worst = worst.max((f2 - x.norm_squared() - sum).abs());
    }
    worst
}

/// Plateau statistics over a refinement ladder of data, in parallel.
pub fn plateau_ladder(data: &[SpectralDatum], k_max: usize) -> Result<Vec<PlateauPoint>, InverseMapError> {
    data.par_iter()
        .map(|d| {
            let model = build_model(d)?;
            let curve = model.decay_curve(k_max);
            Ok(PlateauPoint {
                atoms: d.rho().len(),
                spectral_radius: model.spectral_radius(),
                plateau: PlateauStats {
                    half_decay_k: curve.iter().position(|&x| x <= 0.5 * curve[0]),
                    terminal_ratio: curve[k_max] / curve[0],
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauPoint {
    pub atoms: usize,
    pub spectral_radius: f64,
    pub plateau: PlateauStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DatumError {
    pub supports: f64,
    pub weights: f64,
    pub psi: f64,
    pub psi_tilde: f64,
}

impl DatumError {
    pub fn max(&self) -> f64 {
        self.supports.max(self.weights).max(self.psi).max(self.psi_tilde)
    }
}

/// Componentwise distance between two data with matching atom counts.
pub fn datum_distance(a: &SpectralDatum, b: &SpectralDatum) -> Result<DatumError, InverseMapError> {
    if a.rho().len() != b.rho().len() || a.psi_tilde().len() != b.psi_tilde().len() {
        return Err(InverseMapError::AtomCountMismatch { expected: a.rho().len(), actual: b.rho().len() });
    }
    let sup = |xs: &mut dyn Iterator<Item = f64>| xs.fold(0.0, f64::max);
    let ra = a.rho().atoms();
    let rb = b.rho().atoms();
    Ok(DatumError {
        supports: sup(&mut ra.iter().zip(rb).map(|(x, y)| (x.s - y.s).abs())),
        weights: sup(&mut ra.iter().zip(rb).map(|(x, y)| (x.w - y.w).abs())),
        psi: sup(&mut a.psi().iter().zip(b.psi()).map(|(x, y)| (x - y).norm())),
        psi_tilde: sup(&mut a.psi_tilde().iter().zip(b.psi_tilde()).map(|(x, y)| (x - y).norm())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub symbol: HankelSymbol,
    pub datum: SpectralDatum,
    pub error: DatumError,
    pub order: usize,
    pub truncation: usize,
}

impl RoundTrip {
    pub fn max_error(&self) -> f64 {
        self.error.max()
    }
}

/// Inverse map with automatic order, then the forward map on `max(N, K+1)` modes.
pub fn roundtrip(datum: &SpectralDatum, n: usize) -> Result<RoundTrip, InverseMapError> {
    let model = build_model(datum)?;
    let radius = model.spectral_radius();
    if radius >= 1.0 - STABLE_RADIUS_MARGIN {
        return Err(InverseMapError::NotStable { radius });
    }
    let rec = recover_from_model(&model, Order::Auto, DEFAULT_TAIL_TOL)?;
    let order = rec.symbol.degree();
    let truncation = n.max(order + 1);
    let back = forward_spectral_map(&rec.symbol, truncation)?;
    let error = datum_distance(datum, &back)?;
    Ok(RoundTrip { symbol: rec.symbol, datum: back, error, order, truncation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolRoundTrip {
    /// Forward image of the input symbol.
    pub datum: SpectralDatum,
    pub roundtrip: RoundTrip,
    /// `max_k |û_k − û_k^{recovered}|`.
    pub coeff_error: f64,
}

impl SymbolRoundTrip {
    pub fn max_error(&self) -> f64 {
        self.roundtrip.max_error().max(self.coeff_error)
    }
}

/// Forward map on `max(N, deg + 1)` modes, then [`roundtrip`].
pub fn symbol_roundtrip(u: &HankelSymbol, n: usize) -> Result<SymbolRoundTrip, InverseMapError> {
    let datum = forward_spectral_map(u, n.max(u.degree() + 1))?;
    let roundtrip = roundtrip(&datum, n)?;
    let len = u.coeffs().len().max(roundtrip.symbol.coeffs().len());
    let coeff_error = (0..len).map(|k| (u.coeff(k) - roundtrip.symbol.coeff(k)).norm()).fold(0.0, f64::max);
    Ok(SymbolRoundTrip { datum, roundtrip, coeff_error })
}
