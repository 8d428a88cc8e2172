//! Rank-one perturbation analytics: the perturbation determinant, Cauchy
//! transforms of ρ on the `x = s²` scale, the integral representation of
//! `I − Σ₀*`, the density κ and the two-projection arc experiment.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::unitary_eigen;
use crate::inverse_map::{plateau_ladder, InverseMapError, PlateauPoint};
use crate::linalg::{self, C64, ONE};
use crate::measure::{MeasureError, SpectralMeasure, DEFAULT_TOL};
use crate::model::{tilde_spectrum, ModelError, SpectralDatum};

pub const CAUCHY_MIN_DISTANCE: f64 = 1e-12;
/// Imaginary offsets for boundary values, as multiples of the distance from
/// `x0` to the nearer endpoint of `[a², b²]`, capped at `b² − a²`.
pub const ETA_LADDER: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
/// Relative change between the last two extrapolants above which a boundary
/// value is rejected.
pub const BOUNDARY_TOL: f64 = 1e-6;
pub const DEFAULT_TAIL_TOL: f64 = 1e-9;
const GL_ORDER: usize = 20;
const MAX_DEPTH: usize = 48;
/// Arc samples used for the coverage fraction.
pub const ARC_SAMPLES: usize = 501;
/// Coverage radius as a fraction of the arc half-angle.
pub const COVERAGE_FRACTION: f64 = 1.0 / 50.0;
/// Relative inflation of the arc for the containment check.
pub const ARC_INFLATION: f64 = 0.05;
/// Slack allowed when checking that coverage is non-decreasing.
pub const COVERAGE_SLACK: f64 = 0.02;
/// Eigenphases this close to ±π are treated as the fixed point −1.
const MINUS_ONE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbationError {
    #[error("interval [{a}, {b}] must satisfy 0 < a < b")]
    InvalidInterval { a: f64, b: f64 },
    #[error("density is not strictly positive: w({s}) = {value}")]
    NonPositiveDensity { s: f64, value: f64 },
    #[error("normalization target {0} must lie in (0, 1]")]
    InvalidTarget(f64),
    #[error("z is within {distance} of the support")]
    TooCloseToSpectrum { distance: f64 },
    #[error("adaptive quadrature did not converge (error estimate {estimate})")]
    QuadratureNotConverged { estimate: f64 },
    #[error("boundary value did not settle: change {estimate} between extrapolants")]
    BoundaryLimitUnstable { estimate: f64 },
    #[error("split point {s0} outside the open interval ({a}, {b})")]
    SplitOutsideInterval { s0: f64, a: f64, b: f64 },
    #[error("t = {0} must be positive")]
    NonPositiveT(f64),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Inverse(#[from] InverseMapError),
}

impl PerturbationError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidInterval { .. } => "InvalidInterval",
            Self::NonPositiveDensity { .. } => "NonPositiveDensity",
            Self::InvalidTarget(_) => "InvalidTarget",
            Self::TooCloseToSpectrum { .. } => "TooCloseToSpectrum",
            Self::QuadratureNotConverged { .. } => "QuadratureNotConverged",
            Self::BoundaryLimitUnstable { .. } => "BoundaryLimitUnstable",
            Self::SplitOutsideInterval { .. } => "SplitOutsideInterval",
            Self::NonPositiveT(_) => "NonPositiveT",
            Self::Measure(e) => e.kind(),
            Self::Model(e) => e.kind(),
            Self::Inverse(e) => e.kind(),
        }
    }
}

/// Conversions between the `s` scale (spectrum of `M`) and the `x = s²`
/// scale (spectrum of `M²`).
pub struct SquaredScale;

impl SquaredScale {
    pub fn x_of(s: f64) -> f64 {
        s * s
    }

    pub fn s_of(x: f64) -> f64 {
        x.sqrt()
    }

    /// Density of the pushforward of `w(s) ds` under `s ↦ s²`, at `x`.
    pub fn density_at(w: impl Fn(f64) -> f64, x: f64) -> f64 {
        let s = x.sqrt();
        w(s) / (2.0 * s)
    }

    /// Indicator of the spectral subspace of `M²` below `s0²`, equivalently of `M` below `s0`.
    pub fn below(values_s: &[f64], s0: f64) -> Vec<bool> {
        let x0 = Self::x_of(s0);
        values_s.iter().map(|&s| Self::x_of(s) < x0).collect()
    }
}

/// Absolutely continuous measure `scale · w(s) ds` on `[a, b]`.
#[derive(Clone)]
pub struct DensityMeasure {
    a: f64,
    b: f64,
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
    scale: f64,
    atom_count: usize,
    inv2_target: Option<f64>,
}

impl fmt::Debug for DensityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityMeasure")
            .field("interval", &(self.a, self.b))
            .field("label", &self.label)
            .field("scale", &self.scale)
            .field("atom_count", &self.atom_count)
            .field("inv2_target", &self.inv2_target)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    pub label: String,
    pub interval: (f64, f64),
    pub scale: f64,
    pub inv2: f64,
}

const POSITIVITY_SAMPLES: usize = 257;

impl DensityMeasure {
    pub fn new(
        a: f64,
        b: f64,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        label: impl Into<String>,
    ) -> Result<Self, PerturbationError> {
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(PerturbationError::InvalidInterval { a, b });
        }
        for k in 0..POSITIVITY_SAMPLES {
            let s = a + (b - a) * k as f64 / (POSITIVITY_SAMPLES - 1) as f64;
            let value = density(s);
            if !(value.is_finite() && value > 0.0) {
                return Err(PerturbationError::NonPositiveDensity { s, value });
            }
        }
        Ok(Self {
            a,
            b,
            density: Arc::new(density),
            label: label.into(),
            scale: 1.0,
            atom_count: 400,
            inv2_target: None,
        })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self, PerturbationError> {
        Self::new(a, b, |_| 1.0, "uniform")
    }

    /// Rescale so that `∫ w/s² ds = target`; discretizations then hit the target exactly.
    pub fn scaled_to_inv2(mut self, target: f64) -> Result<Self, PerturbationError> {
        if !(target > 0.0 && target <= 1.0) {
            return Err(PerturbationError::InvalidTarget(target));
        }
        self.scale = 1.0;
        self.scale = target / self.inv2();
        self.inv2_target = Some(target);
        Ok(self)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self.inv2_target = None;
        self
    }

    pub fn with_atom_count(mut self, n: usize) -> Self {
        self.atom_count = n;
        self
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    /// Scaled density `scale · w(s)`.
    pub fn weight(&self, s: f64) -> f64 {
        self.scale * (self.density)(s)
    }

    /// Density on the `x = s²` scale.
    pub fn squared_density(&self, x: f64) -> f64 {
        SquaredScale::density_at(|s| self.weight(s), x)
    }

    /// `∫ w(s)/s² ds` by composite Gauss–Legendre.
    pub fn inv2(&self) -> f64 {
        let rule = gl_rule();
        let panels = 16;
        let h = (self.b - self.a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = self.a + k as f64 * h;
                rule.integrate(lo, lo + h, |s| self.weight(s) / (s * s))
            })
            .sum()
    }

    pub fn summary(&self) -> DensitySummary {
        DensitySummary { label: self.label.clone(), interval: (self.a, self.b), scale: self.scale, inv2: self.inv2() }
    }

    pub fn discretize(&self) -> Result<SpectralMeasure, PerturbationError> {
        self.discretize_n(self.atom_count)
    }

    /// Midpoint discretization with `n` atoms.
    pub fn discretize_n(&self, n: usize) -> Result<SpectralMeasure, PerturbationError> {
        let rho = SpectralMeasure::midpoint(self.a, self.b, n, |s| self.weight(s), DEFAULT_TOL)?;
        Ok(match self.inv2_target {
            Some(t) => rho.with_inv2(t)?,
            None => rho,
        })
    }
}

fn gl_rule() -> GaussLegendre {
    GaussLegendre::new(GL_ORDER).expect("order at least 2")
}

/// `Δ(−t²) = 1 − Σ w/(s² + t²)`.
pub fn perturbation_determinant(rho: &SpectralMeasure, t: f64) -> f64 {
    let t2 = t * t;
    (1.0 - rho.inverse_moment(2)) + t2 * rho.atoms().iter().map(|a| a.w / (a.s * a.s * (a.s * a.s + t2))).sum::<f64>()
}

/// `t²/Δ(−t²)`, finite at `t = 0` when `Σ w/s² = 1`.
fn determinant_ratio(rho: &SpectralMeasure, t: f64) -> f64 {
    let t2 = t * t;
    let defect = (1.0 - rho.inverse_moment(2)).max(0.0);
    1.0 / (defect / t2 + rho.atoms().iter().map(|a| a.w / (a.s * a.s * (a.s * a.s + t2))).sum::<f64>())
}

trait Quadrand: Clone {
    fn add_scaled(&mut self, other: &Self, c: f64);
    fn scaled(&self, c: f64) -> Self;
    fn distance(&self, other: &Self) -> f64;
}

impl Quadrand for C64 {
    fn add_scaled(&mut self, other: &Self, c: f64) {
        *self += other * c;
    }
    fn scaled(&self, c: f64) -> Self {
        self * c
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
}

impl Quadrand for DMatrix<f64> {
    fn add_scaled(&mut self, other: &Self, c: f64) {
        *self += other * c;
    }
    fn scaled(&self, c: f64) -> Self {
        self * c
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).amax()
    }
}

struct Adaptive<'a, V, F> {
    rule: &'a GaussLegendre,
    f: &'a F,
    tol: f64,
    nodes: usize,
    _v: std::marker::PhantomData<V>,
}

impl<'a, V: Quadrand, F: Fn(f64) -> V> Adaptive<'a, V, F> {
    fn new(rule: &'a GaussLegendre, f: &'a F, tol: f64) -> Self {
        Self { rule, f, tol, nodes: 0, _v: std::marker::PhantomData }
    }

    fn panel(&mut self, a: f64, b: f64) -> V {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut it = self.rule.iter();
        let (x0, w0) = it.next().expect("nonempty rule");
        let mut acc = (self.f)(mid + half * x0).scaled(*w0);
        for (x, w) in it {
            acc.add_scaled(&(self.f)(mid + half * x), *w);
        }
        self.nodes += self.rule.degree();
        acc.scaled(half)
    }

    fn integrate(&mut self, a: f64, b: f64) -> Result<V, PerturbationError> {
        let whole = self.panel(a, b);
        self.refine(a, b, whole, MAX_DEPTH)
    }

    fn refine(&mut self, a: f64, b: f64, whole: V, depth: usize) -> Result<V, PerturbationError> {
        let m = 0.5 * (a + b);
        let left = self.panel(a, m);
        let right = self.panel(m, b);
        let mut refined = left.clone();
        refined.add_scaled(&right, 1.0);
        let estimate = whole.distance(&refined);
        if estimate <= self.tol {
            return Ok(refined);
        }
        if depth == 0 {
            return Err(PerturbationError::QuadratureNotConverged { estimate });
        }
        let mut l = self.refine(a, m, left, depth - 1)?;
        let r = self.refine(m, b, right, depth - 1)?;
        l.add_scaled(&r, 1.0);
        Ok(l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Local absolute tolerance per panel, relative to the largest entry scale.
    pub panel_tol: f64,
    /// Bound on the neglected tail `∫_T^∞`.
    pub tail_tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { panel_tol: 1e-13, tail_tol: DEFAULT_TAIL_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectIntegral {
    /// `(2/π)∫₀^T t²/Δ(−t²) ⟨·,a_t⟩ b_t dt` in frame coordinates.
    pub quadrature: DMatrix<f64>,
    /// `I − M̃M⁻¹` in frame coordinates.
    pub direct: DMatrix<f64>,
    pub max_entry_error: f64,
    /// Trace norm of `quadrature − direct`.
    pub trace_norm_error: f64,
    pub trace_norm_direct: f64,
    pub trace_norm_quadrature: f64,
    pub cutoff: f64,
    /// Entrywise bound on the neglected tail.
    pub tail_bound: f64,
    pub nodes: usize,
}

/// Integral representation of `I − Σ₀*` against its direct construction.
///
/// With `a_t(s) = s⁻¹(s² + t²)⁻¹` and `b_t(s) = (s² + t²)⁻¹` the frame
/// coordinates of `⟨·,a_t⟩b_t` are `√w_i b_t(s_i) · a_t(s_j) √w_j`. The range
/// `[0, T]` is split into geometric panels and `T` is raised until the tail
/// bound `(2/π) max √(w_i w_j)/s_j / (Δ(−T²) T)` is below the tail tolerance.
pub fn sigma0_defect_integral(
    rho: &SpectralMeasure,
    opts: QuadratureOptions,
) -> Result<DefectIntegral, PerturbationError> {
    let n = rho.len();
    let s = rho.supports();
    let sw: Vec<f64> = rho.weights().iter().map(|w| w.sqrt()).collect();
    let sw_max = sw.iter().copied().fold(0.0, f64::max);
    let inv_s_max = s.iter().map(|x| 1.0 / x).fold(0.0, f64::max);
    let tail_at = |t: f64| 2.0 / PI * sw_max * sw_max * inv_s_max / (perturbation_determinant(rho, t) * t);
    let mut cutoff = rho.max_support().max(1.0);
    while tail_at(cutoff) > opts.tail_tol {
        cutoff *= 2.0;
    }
    let integrand = |t: f64| {
        let t2 = t * t;
        let factor = 2.0 / PI * determinant_ratio(rho, t);
        let left = DVector::from_iterator(n, (0..n).map(|i| sw[i] / (s[i] * s[i] + t2)));
        let right = DVector::from_iterator(n, (0..n).map(|j| sw[j] / (s[j] * (s[j] * s[j] + t2))));
        left * right.transpose() * factor
    };
    let scale = sw_max * sw_max * inv_s_max / s[0].powi(2).max(f64::MIN_POSITIVE);
    let rule = gl_rule();
    let mut quad = Adaptive::new(&rule, &integrand, opts.panel_tol * scale.max(1.0));
    let mut lo = 0.0;
    let mut hi = s[0];
    let mut quadrature = DMatrix::zeros(n, n);
    loop {
        let top = hi.min(cutoff);
        quadrature += quad.integrate(lo, top)?;
        if top >= cutoff {
            break;
        }
        lo = top;
        hi = 2.0 * top;
    }
    let direct = defect_direct(rho)?;
    let diff = &quadrature - &direct;
    Ok(DefectIntegral {
        max_entry_error: diff.amax(),
        trace_norm_error: linalg::trace_norm_real(&diff),
        trace_norm_direct: linalg::trace_norm_real(&direct),
        trace_norm_quadrature: linalg::trace_norm_real(&quadrature),
        quadrature,
        direct,
        cutoff,
        tail_bound: tail_at(cutoff),
        nodes: quad.nodes,
    })
}

/// `I − Σ₀* = I − M̃M⁻¹` in frame coordinates.
pub fn defect_direct(rho: &SpectralMeasure) -> Result<DMatrix<f64>, PerturbationError> {
    let n = rho.len();
    let tilde = tilde_spectrum(rho)?;
    let y = &tilde.vectors;
    let mtilde = y * DMatrix::from_diagonal(&DVector::from_vec(tilde.values.clone())) * y.transpose();
    let m_inv = DMatrix::from_diagonal(&DVector::from_iterator(n, rho.supports().iter().map(|x| 1.0 / x)));
    Ok(DMatrix::identity(n, n) - mtilde * m_inv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyPair {
    #[serde(with = "crate::complex_json::one")]
    pub t0: C64,
    #[serde(with = "crate::complex_json::one")]
    pub t1: C64,
}

pub trait CauchyTransform {
    /// `T₀(z) = ∫ dρ(s)/(s² − z)`.
    fn t0(&self, z: C64) -> Result<C64, PerturbationError>;
}

impl CauchyTransform for SpectralMeasure {
    fn t0(&self, z: C64) -> Result<C64, PerturbationError> {
        let distance = self.atoms().iter().map(|a| (a.s * a.s - z).norm()).fold(f64::INFINITY, f64::min);
        if distance <= CAUCHY_MIN_DISTANCE {
            return Err(PerturbationError::TooCloseToSpectrum { distance });
        }
        Ok(self.atoms().iter().map(|a| a.w / (a.s * a.s - z)).sum())
    }
}

impl CauchyTransform for DensityMeasure {
    /// On `[a², b²]` with density `g`, the value `g(Re z)` is subtracted and
    /// integrated in closed form, so the remaining integrand stays bounded as
    /// `Im z → 0`.
    fn t0(&self, z: C64) -> Result<C64, PerturbationError> {
        let (xa, xb) = (SquaredScale::x_of(self.a), SquaredScale::x_of(self.b));
        let x0 = z.re;
        let distance = if x0 < xa {
            (z - xa).norm()
        } else if x0 > xb {
            (z - xb).norm()
        } else {
            z.im.abs()
        };
        if distance <= CAUCHY_MIN_DISTANCE {
            return Err(PerturbationError::TooCloseToSpectrum { distance });
        }
        let rule = gl_rule();
        let inside = x0 > xa && x0 < xb;
        let g0 = if inside { self.squared_density(x0) } else { 0.0 };
        let f = |x: f64| C64::new(self.squared_density(x) - g0, 0.0) / (x - z);
        let tol = 1e-14 * self.squared_density(xa).max(self.squared_density(xb)).max(g0);
        let mut quad = Adaptive::new(&rule, &f, tol);
        let mut value =
            if inside { quad.integrate(xa, x0)? + quad.integrate(x0, xb)? } else { quad.integrate(xa, xb)? };
        if inside {
            value += (C64::new(xb, 0.0) - z).ln() * g0 - (C64::new(xa, 0.0) - z).ln() * g0;
        }
        Ok(value)
    }
}

/// `T₀` and `T₁ = T₀/(1 − T₀)`.
pub fn cauchy_transforms<M: CauchyTransform + ?Sized>(measure: &M, z: C64) -> Result<CauchyPair, PerturbationError> {
    let t0 = measure.t0(z)?;
    Ok(CauchyPair { t0, t1: t0 / (ONE - t0) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValue {
    #[serde(with = "crate::complex_json::one")]
    pub value: C64,
    /// `(η, T₀(x + iη))` along the ladder.
    pub ladder: Vec<(f64, [f64; 2])>,
    /// Change between the last two Richardson extrapolants.
    pub error_estimate: f64,
    /// Observed convergence order in η.
    pub observed_rate: f64,
}

/// `T₀(x + i0)` from the η ladder with first-order Richardson extrapolation.
pub fn boundary_value(dm: &DensityMeasure, x: f64) -> Result<BoundaryValue, PerturbationError> {
    let (xa, xb) = (SquaredScale::x_of(dm.a), SquaredScale::x_of(dm.b));
    let width = if x > xa && x < xb { (xb - xa).min(x - xa).min(xb - x) } else { xb - xa };
    let etas: Vec<f64> = ETA_LADDER.iter().map(|c| c * width).collect();
    let values = etas.iter().map(|&eta| dm.t0(C64::new(x, eta))).collect::<Result<Vec<_>, _>>()?;
    let extrap: Vec<C64> = values
        .windows(2)
        .zip(etas.windows(2))
        .map(|(v, e)| {
            let r = e[0] / e[1];
            (v[1] * r - v[0]) / (r - 1.0)
        })
        .collect();
    let k = extrap.len();
    let value = extrap[k - 1];
    let error_estimate = (extrap[k - 1] - extrap[k - 2]).norm();
    let d1 = (values[1] - values[0]).norm();
    let d2 = (values[2] - values[1]).norm();
    let observed_rate = if d1 > 0.0 && d2 > 0.0 { (d1 / d2).log10() } else { f64::INFINITY };
    if error_estimate > BOUNDARY_TOL * value.norm().max(1.0) {
        return Err(PerturbationError::BoundaryLimitUnstable { estimate: error_estimate });
    }
    Ok(BoundaryValue {
        value,
        ladder: etas.iter().zip(&values).map(|(e, v)| (*e, [v.re, v.im])).collect(),
        error_estimate,
        observed_rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub s0: f64,
    /// `x0 = s0²`.
    pub x0: f64,
    /// Density of ρ on the `x` scale at `x0`.
    pub f0_prime: f64,
    pub boundary: BoundaryValue,
    /// Density of the measure of `T₁`: `Im T₀(x0+i0)/(π|1 − T₀(x0+i0)|²)`.
    pub f1_prime: f64,
    /// `π² F₀′ F₁′`.
    pub kappa: f64,
    pub t1_density_positive: bool,
    /// Hölder continuity of the derived densities is assumed, not verified.
    pub holder_verified: bool,
}

pub fn kappa(dm: &DensityMeasure, s0: f64) -> Result<KappaReport, PerturbationError> {
    if !(s0 > dm.a && s0 < dm.b) {
        return Err(PerturbationError::SplitOutsideInterval { s0, a: dm.a, b: dm.b });
    }
    let x0 = SquaredScale::x_of(s0);
    let f0_prime = dm.squared_density(x0);
    let boundary = boundary_value(dm, x0)?;
    let t0 = boundary.value;
    let f1_prime = t0.im / (PI * (ONE - t0).norm_sqr());
    Ok(KappaReport {
        s0,
        x0,
        f0_prime,
        f1_prime,
        kappa: PI * PI * f0_prime * f1_prime,
        t1_density_positive: f1_prime > 0.0,
        boundary,
        holder_verified: false,
    })
}

/// Half-angle of the arc `{1 − 2σ² + 2iσ√(1−σ²) : |σ| ≤ √κ}`.
pub fn arc_half_angle(kappa: f64) -> f64 {
    2.0 * kappa.clamp(0.0, 1.0).sqrt().asin()
}

pub fn arc_point(sigma: f64) -> C64 {
    C64::new(1.0 - 2.0 * sigma * sigma, 2.0 * sigma * (1.0 - sigma * sigma).max(0.0).sqrt())
}

/// `λ± = 1 − 2κ ± 2i√(κ(1−κ))`.
pub fn arc_endpoints(kappa: f64) -> [C64; 2] {
    let k = kappa.clamp(0.0, 1.0);
    let im = 2.0 * (k * (1.0 - k)).sqrt();
    [C64::new(1.0 - 2.0 * k, -im), C64::new(1.0 - 2.0 * k, im)]
}

/// Datum with `Ψ = Ψ̃ = sign(· − s0)` on a discretization of `dm`.
pub fn sign_datum(rho: SpectralMeasure, s0: f64) -> Result<SpectralDatum, PerturbationError> {
    let sign = move |s: f64| if s < s0 { -ONE } else { ONE };
    Ok(SpectralDatum::from_functions(rho, sign, sign)?)
}

/// `(I − 2Q)(I − 2P)` with `P`, `Q` the spectral projections of `M²`, `M̃²` below `s0²`.
pub fn two_projection_product(rho: &SpectralMeasure, s0: f64) -> Result<DMatrix<f64>, PerturbationError> {
    let n = rho.len();
    let tilde = tilde_spectrum(rho)?;
    let reflect = |below: Vec<bool>| DVector::from_iterator(n, below.into_iter().map(|b| if b { -1.0 } else { 1.0 }));
    let p = DMatrix::from_diagonal(&reflect(SquaredScale::below(&rho.supports(), s0)));
    let y = &tilde.vectors;
    let q = y * DMatrix::from_diagonal(&reflect(SquaredScale::below(&tilde.values, s0))) * y.transpose();
    Ok(q * p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcLevel {
    pub atoms: usize,
    /// Eigenphases of the product in (−π, π], ascending.
    pub eigenphases: Vec<f64>,
    /// Fraction of arc samples within the coverage radius of an eigenphase.
    pub coverage: f64,
    /// Fraction of eigenphases other than −1 inside the inflated arc.
    pub inside_fraction: f64,
    /// Largest |phase| among eigenphases other than −1.
    pub max_phase: f64,
    /// `|max_phase − φ_max| / φ_max`.
    pub endpoint_error: f64,
    /// `max_λ min_μ |conj(λ) − μ|` over the computed eigenvalues.
    pub conjugation_defect: f64,
    pub stability: PlateauPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoProjectionReport {
    pub density: DensitySummary,
    pub s0: f64,
    pub kappa: KappaReport,
    pub phi_max: f64,
    #[serde(with = "crate::complex_json::vec")]
    pub endpoints: Vec<C64>,
    pub levels: Vec<ArcLevel>,
    pub coverage_nondecreasing: bool,
    pub stability_k_max: usize,
}

pub fn halmos_arc_experiment(
    dm: &DensityMeasure,
    s0: f64,
    refinements: &[usize],
    stability_k_max: usize,
) -> Result<TwoProjectionReport, PerturbationError> {
    let kappa = kappa(dm, s0)?;
    let phi_max = arc_half_angle(kappa.kappa);
    let levels = refinements
        .par_iter()
        .map(|&n| arc_level(dm, s0, n, phi_max, stability_k_max))
        .collect::<Result<Vec<_>, _>>()?;
    let coverage_nondecreasing = levels.windows(2).all(|w| w[1].coverage >= w[0].coverage - COVERAGE_SLACK);
    Ok(TwoProjectionReport {
        density: dm.summary(),
        s0,
        endpoints: arc_endpoints(kappa.kappa).to_vec(),
        kappa,
        phi_max,
        levels,
        coverage_nondecreasing,
        stability_k_max,
    })
}

fn arc_level(
    dm: &DensityMeasure,
    s0: f64,
    n: usize,
    phi_max: f64,
    k_max: usize,
) -> Result<ArcLevel, PerturbationError> {
    let rho = dm.discretize_n(n)?;
    let u = two_projection_product(&rho, s0)?;
    let eigenvalues = unitary_eigen(&linalg::complexify(&u)).0;
    let mut eigenphases: Vec<f64> = eigenvalues.iter().map(|z| z.arg()).collect();
    eigenphases.sort_by(f64::total_cmp);
    let interior: Vec<f64> = eigenphases.iter().copied().filter(|p| p.abs() < PI - MINUS_ONE_TOL).collect();
    let radius = COVERAGE_FRACTION * phi_max;
    let covered = (0..ARC_SAMPLES)
        .filter(|&k| {
            let phi = -phi_max + 2.0 * phi_max * k as f64 / (ARC_SAMPLES - 1) as f64;
            interior.iter().any(|p| (p - phi).abs() <= radius)
        })
        .count();
    let inflated = (1.0 + ARC_INFLATION) * phi_max;
    let inside = interior.iter().filter(|p| p.abs() <= inflated).count();
    let max_phase = interior.iter().map(|p| p.abs()).fold(0.0, f64::max);
    let conjugation_defect = eigenvalues
        .iter()
        .map(|l| eigenvalues.iter().map(|m| (l.conj() - m).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let datum = sign_datum(rho, s0)?;
    let stability = plateau_ladder(std::slice::from_ref(&datum), k_max)?.remove(0);
    Ok(ArcLevel {
        atoms: n,
        coverage: covered as f64 / ARC_SAMPLES as f64,
        inside_fraction: if interior.is_empty() { 1.0 } else { inside as f64 / interior.len() as f64 },
        endpoint_error: if phi_max > 0.0 { (max_phase - phi_max).abs() / phi_max } else { max_phase },
        max_phase,
        conjugation_defect,
        eigenphases,
        stability,
    })
}
