//! The cubic Szegő equation `i∂ₜu = P(|u|²u)`: exact phase rotation on
//! spectral data, an explicit Galerkin integrator on Fourier coefficients,
//! conservation checks and the time average of `|û₀(t)|²`.

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{gauge_transform, DiagnosticsError};
use crate::direct_map::{forward_spectral_map, DirectMapError, HankelSymbol};
use crate::inverse_map::{recover_symbol_with, stability_report, InverseMapError, Order, StabilityVerdict};
use crate::linalg::{self, CMatrix, C64, ZERO};
use crate::model::SpectralDatum;

pub const MAX_STEP_NORM: f64 = 0.1;
pub const MODES_PER_DEGREE: usize = 4;
pub const DEFAULT_DT: f64 = 1e-3;
/// Power-iteration horizon for the stability check before comparing flows.
pub const COMPARE_K_MAX: usize = 2000;
const TIME_GL_ORDER: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SzegoError {
    #[error("step dt = {dt} with ‖u0‖² = {norm_sq} exceeds dt·‖u0‖² ≤ {MAX_STEP_NORM}")]
    StepUnstable { dt: f64, norm_sq: f64 },
    #[error("{modes} modes do not resolve degree {degree}; need at least {MODES_PER_DEGREE} per degree")]
    TooFewModes { modes: usize, degree: usize },
    #[error("time {0} must be finite and nonnegative")]
    InvalidTime(f64),
    #[error("averaging window T = {0} must be positive")]
    InvalidWindow(f64),
    #[error("flow-side datum is {0:?}, refusing to compare against an undefined symbol")]
    NotStable(StabilityVerdict),
    #[error(transparent)]
    Direct(#[from] DirectMapError),
    #[error(transparent)]
    Inverse(#[from] InverseMapError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

impl SzegoError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::StepUnstable { .. } => "StepUnstable",
            Self::TooFewModes { .. } => "TooFewModes",
            Self::InvalidTime(_) => "InvalidTime",
            Self::InvalidWindow(_) => "InvalidWindow",
            Self::NotStable(_) => "NotStable",
            Self::Direct(e) => e.kind(),
            Self::Inverse(e) => e.kind(),
            Self::Diagnostics(e) => e.kind(),
        }
    }
}

/// Spectral datum at time `t`, stored as the initial datum and `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub datum0: SpectralDatum,
    pub t: f64,
}

impl FlowState {
    pub fn new(datum0: SpectralDatum) -> Self {
        Self { datum0, t: 0.0 }
    }

    /// Advance by `dt`; phases compose by adding times.
    pub fn advanced(&self, dt: f64) -> Self {
        Self { datum0: self.datum0.clone(), t: self.t + dt }
    }

    pub fn datum(&self) -> Result<SpectralDatum, SzegoError> {
        flow_spectral(&self.datum0, self.t)
    }
}

/// `(ρ, Ψ, Ψ̃) ↦ (ρ, e^{−its²}Ψ, e^{its̃²}Ψ̃)`.
pub fn flow_spectral(datum0: &SpectralDatum, t: f64) -> Result<SpectralDatum, SzegoError> {
    if !t.is_finite() {
        return Err(SzegoError::InvalidTime(t));
    }
    Ok(gauge_transform(datum0, |s| C64::from_polar(1.0, t * s * s))?)
}

/// `û₀(t) = Σ e^{−its²} Ψ₀(s) w / s`.
pub fn hat_u0_of_t(datum0: &SpectralDatum, t: f64) -> C64 {
    datum0.rho().atoms().iter().zip(datum0.psi()).map(|(a, p)| C64::from_polar(a.w / a.s, -t * a.s * a.s) * p).sum()
}

/// Coefficients `k < N` of `P(|u|²u)`, by two O(N²) convolutions.
pub fn cubic_term(modes: &[C64]) -> Vec<C64> {
    let n = modes.len();
    if n == 0 {
        return Vec::new();
    }
    // corr[m + n − 1] = Σ_{a − b = m} û_a conj(û_b)
    let mut corr = vec![ZERO; 2 * n - 1];
    for (a, ua) in modes.iter().enumerate() {
        for (b, ub) in modes.iter().enumerate() {
            corr[a + n - 1 - b] += ua * ub.conj();
        }
    }
    (0..n).map(|k| (0..n).map(|c| corr[k + n - 1 - c] * modes[c]).sum()).collect()
}

/// `−i·P(|u|²u)` truncated to the first `N` modes.
pub fn szego_rhs(modes: &[C64]) -> Vec<C64> {
    cubic_term(modes).into_iter().map(|c| C64::new(c.im, -c.re)).collect()
}

fn rk4_step(u: &[C64], dt: f64) -> Vec<C64> {
    let axpy = |k: &[C64], h: f64| -> Vec<C64> { u.iter().zip(k).map(|(x, y)| x + y * h).collect() };
    let k1 = szego_rhs(u);
    let k2 = szego_rhs(&axpy(&k1, 0.5 * dt));
    let k3 = szego_rhs(&axpy(&k2, 0.5 * dt));
    let k4 = szego_rhs(&axpy(&k3, dt));
    (0..u.len()).map(|i| u[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    pub l2_norm: f64,
    /// Singular values of the truncated `N×N` Hankel matrix, descending.
    pub singular_values: Vec<f64>,
}

impl Invariants {
    pub fn of(modes: &[C64]) -> Self {
        let mut singular_values = linalg::singular_values(&truncated_hankel(modes));
        singular_values.sort_by(|a, b| b.total_cmp(a));
        Self { l2_norm: l2(modes), singular_values }
    }
}

fn l2(modes: &[C64]) -> f64 {
    modes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `γ_{j+k} = û_{j+k}` for `j + k < N`, zero beyond.
pub fn truncated_hankel(modes: &[C64]) -> CMatrix {
    let n = modes.len();
    CMatrix::from_fn(n, n, |j, k| if j + k < n { modes[j + k] } else { ZERO })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinState {
    #[serde(with = "crate::complex_json::vec")]
    pub modes: Vec<C64>,
    pub t: f64,
    pub dt: f64,
    /// Invariants of the initial state.
    pub conserved: Invariants,
}

fn check_galerkin(u0: &HankelSymbol, n_modes: usize, dt: f64, t_end: f64) -> Result<(), SzegoError> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(SzegoError::InvalidTime(t_end));
    }
    let degree = u0.degree();
    if n_modes == 0 || n_modes < MODES_PER_DEGREE * degree {
        return Err(SzegoError::TooFewModes { modes: n_modes, degree });
    }
    let norm_sq: f64 = u0.coeffs().iter().map(|c| c.norm_sqr()).sum();
    if !(dt > 0.0 && dt * norm_sq <= MAX_STEP_NORM) {
        return Err(SzegoError::StepUnstable { dt, norm_sq });
    }
    Ok(())
}

/// Fixed-step fourth-order Runge–Kutta from 0 to `t_end`, keeping `samples + 1`
/// evenly spaced snapshots including both ends. Each sample interval uses
/// equal steps no longer than `dt`, so sample times are hit exactly.
pub fn integrate_trajectory(
    u0: &HankelSymbol,
    t_end: f64,
    n_modes: usize,
    dt: f64,
    samples: usize,
) -> Result<Vec<GalerkinState>, SzegoError> {
    check_galerkin(u0, n_modes, dt, t_end)?;
    let samples = samples.max(1);
    let mut u: Vec<C64> = u0.padded(n_modes).iter().copied().collect();
    let conserved = Invariants::of(&u);
    let snapshot = |u: &[C64], t: f64| GalerkinState { modes: u.to_vec(), t, dt, conserved: conserved.clone() };
    let mut out = vec![snapshot(&u, 0.0)];
    let mut t = 0.0;
    for j in 1..=samples {
        let target = t_end * j as f64 / samples as f64;
        let span = target - t;
        let steps = (span / dt - 1e-9).ceil().max(0.0) as usize;
        if steps > 0 {
            let h = span / steps as f64;
            for _ in 0..steps {
                u = rk4_step(&u, h);
            }
        }
        t = target;
        out.push(snapshot(&u, t));
    }
    Ok(out)
}

pub fn integrate_direct(u0: &HankelSymbol, t_end: f64, n_modes: usize, dt: f64) -> Result<GalerkinState, SzegoError> {
    Ok(integrate_trajectory(u0, t_end, n_modes, dt, 1)?.pop().expect("endpoint snapshot"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub samples: usize,
    /// `max_t max_j |σ_j(t) − σ_j(0)|`.
    pub singular_value_drift: f64,
    /// `max_t |‖u(t)‖ − ‖u(0)‖|`.
    pub l2_drift: f64,
    /// `max_t |‖Γ_t‖ − ‖Γ_0‖|` for the truncated Hankel matrix.
    pub op_norm_drift: f64,
}

pub fn conservation_checks(trajectory: &[GalerkinState]) -> ConservationReport {
    let mut report =
        ConservationReport { samples: trajectory.len(), singular_value_drift: 0.0, l2_drift: 0.0, op_norm_drift: 0.0 };
    for state in trajectory {
        let now = Invariants::of(&state.modes);
        let start = &state.conserved;
        let sv = now.singular_values.iter().zip(&start.singular_values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let op = (now.singular_values[0] - start.singular_values[0]).abs();
        report.singular_value_drift = report.singular_value_drift.max(sv);
        report.op_norm_drift = report.op_norm_drift.max(op);
        report.l2_drift = report.l2_drift.max((now.l2_norm - start.l2_norm).abs());
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowComparison {
    pub t: f64,
    #[serde(with = "crate::complex_json::vec")]
    pub spectral: Vec<C64>,
    #[serde(with = "crate::complex_json::vec")]
    pub galerkin: Vec<C64>,
    /// `max_k |û_k^{spectral}(t) − û_k^{galerkin}(t)|`.
    pub max_error: f64,
    /// Bound on the spectral-side coefficients beyond the compared range.
    pub spectral_tail_bound: f64,
}

/// Map `u0` forward, rotate phases, recover `N` coefficients and compare
/// with the Galerkin integrator.
pub fn compare_flows(u0: &HankelSymbol, t: f64, n_modes: usize, dt: f64) -> Result<FlowComparison, SzegoError> {
    check_galerkin(u0, n_modes, dt, t)?;
    let datum0 = forward_spectral_map(u0, u0.degree() + 1)?;
    let datum_t = flow_spectral(&datum0, t)?;
    let verdict = stability_report(&datum_t, COMPARE_K_MAX, 1)?.verdict;
    if verdict != StabilityVerdict::Stable {
        return Err(SzegoError::NotStable(verdict));
    }
    let recovery = recover_symbol_with(&datum_t, Order::Fixed(n_modes - 1), 0.0)?;
    let galerkin = integrate_direct(u0, t, n_modes, dt)?.modes;
    let max_error = recovery.coeffs.iter().zip(&galerkin).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(FlowComparison { t, spectral: recovery.coeffs, galerkin, max_error, spectral_tail_bound: recovery.tail_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMethod {
    Spectral,
    Galerkin,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HatU0Sample {
    pub t: f64,
    #[serde(with = "crate::complex_json::one")]
    pub value: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub method: FlowMethod,
    pub t_end: f64,
    pub modes: usize,
    pub dt: f64,
    /// Spectral-side `û₀(t)` at the sample times.
    pub spectral_hat_u0: Vec<HatU0Sample>,
    pub trajectory: Vec<GalerkinState>,
    pub conservation: Option<ConservationReport>,
    pub comparison: Option<FlowComparison>,
}

/// Run the requested methods on `samples + 1` evenly spaced times in `[0, t_end]`.
pub fn flow_experiment(
    u0: &HankelSymbol,
    t_end: f64,
    n_modes: usize,
    dt: f64,
    samples: usize,
    method: FlowMethod,
) -> Result<FlowReport, SzegoError> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(SzegoError::InvalidTime(t_end));
    }
    let samples = samples.max(1);
    let spectral = matches!(method, FlowMethod::Spectral | FlowMethod::Both);
    let galerkin = matches!(method, FlowMethod::Galerkin | FlowMethod::Both);
    let spectral_hat_u0 = if spectral {
        let datum0 = forward_spectral_map(u0, u0.degree() + 1)?;
        (0..=samples)
            .map(|j| {
                let t = t_end * j as f64 / samples as f64;
                HatU0Sample { t, value: hat_u0_of_t(&datum0, t) }
            })
            .collect()
    } else {
        Vec::new()
    };
    let trajectory = if galerkin { integrate_trajectory(u0, t_end, n_modes, dt, samples)? } else { Vec::new() };
    let conservation = galerkin.then(|| conservation_checks(&trajectory));
    let comparison = if method == FlowMethod::Both { Some(compare_flows(u0, t_end, n_modes, dt)?) } else { None };
    Ok(FlowReport { method, t_end, modes: n_modes, dt, spectral_hat_u0, trajectory, conservation, comparison })
}

/// Atoms `(s², Ψ₀(s) w / s)` of the pushforward of `Ψ₀/s · dρ` under `s ↦ s²`.
pub fn ap_measure(datum0: &SpectralDatum) -> Vec<(f64, C64)> {
    datum0.rho().atoms().iter().zip(datum0.psi()).map(|(a, p)| (a.s * a.s, p * (a.w / a.s))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAverage {
    pub window: f64,
    /// `Σ_j Σ_k a_j conj(a_k) sinc(T(λ_j − λ_k))`.
    pub sinc_sum: f64,
    /// `(1/2T)∫_{−T}^{T} |Σ a_j e^{−itλ_j}|² dt` by composite Gauss–Legendre.
    pub quadrature: f64,
    /// Change in the quadrature when the panel count is doubled.
    pub quadrature_error: f64,
    /// `Σ|a_j|²`, the large-window limit for distinct atoms.
    pub atomic_limit: f64,
    /// `(Σ|a_j|)²`, the value at `T = 0`.
    pub total_mass_sq: f64,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

pub fn ap_time_average(atoms: &[(f64, C64)], window: f64) -> Result<TimeAverage, SzegoError> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(SzegoError::InvalidWindow(window));
    }
    let mut sinc_sum = 0.0;
    for (lj, aj) in atoms {
        for (lk, ak) in atoms {
            sinc_sum += (aj * ak.conj()).re * sinc(window * (lj - lk));
        }
    }
    let lo = atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
    let hi = atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo).max(0.0);
    let signal = |t: f64| atoms.iter().map(|(l, a)| a * C64::from_polar(1.0, -t * l)).sum::<C64>().norm_sqr();
    let rule = GaussLegendre::new(TIME_GL_ORDER).expect("order at least 2");
    let composite = |panels: usize| {
        let h = 2.0 * window / panels as f64;
        (0..panels).map(|p| rule.integrate(-window + p as f64 * h, -window + (p + 1) as f64 * h, signal)).sum::<f64>()
            / (2.0 * window)
    };
    let panels = ((window * spread / std::f64::consts::PI).ceil() as usize).max(4);
    let coarse = composite(panels);
    let quadrature = composite(2 * panels);
    Ok(TimeAverage {
        window,
        sinc_sum,
        quadrature,
        quadrature_error: (quadrature - coarse).abs(),
        atomic_limit: atoms.iter().map(|a| a.1.norm_sqr()).sum(),
        total_mass_sq: atoms.iter().map(|a| a.1.norm()).sum::<f64>().powi(2),
    })
}
