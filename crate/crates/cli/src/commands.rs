//! Subcommand implementations: read inputs, call the library, collect plot data.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use hankel_core::diagnostics::{diagnose, dyadic_ladder};
use hankel_core::direct_map::{forward_spectral_map_report, HankelSymbol, DEFAULT_GAP_TOL, DEFAULT_RANK_TOL};
use hankel_core::inverse_map::{
    recover_symbol_with, roundtrip, stability_report_with, symbol_roundtrip, Order, StabilityOptions, DEFAULT_TAIL_TOL,
    STABLE_RADIUS_MARGIN,
};
use hankel_core::measure::{Atom, SpectralMeasure, DEFAULT_TOL};
use hankel_core::perturbation::{halmos_arc_experiment, kappa, DensityMeasure, BOUNDARY_TOL};
use hankel_core::szego_flow::{ap_measure, ap_time_average, flow_experiment, FlowMethod};
use hankel_core::{SpectralDatum, C64};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::output::{render, CliError, LibraryResult, PlotData, Provenance};

/// Output of a successful subcommand.
pub struct Outcome {
    pub json: String,
    pub plot: PlotData,
}

/// Per-run state shared with the error path.
pub struct Context {
    pub seed: u64,
    pub provenance: Option<Provenance>,
}

impl Context {
    fn finish<T: serde::Serialize>(&mut self, provenance: Provenance, result: &T, plot: PlotData) -> Outcome {
        let json = render(&provenance, result);
        self.provenance = Some(provenance);
        Outcome { json, plot }
    }
}

#[derive(Deserialize)]
struct MeasureInput {
    atoms: Vec<Atom>,
    tol: Option<f64>,
}

impl MeasureInput {
    fn build(self) -> Result<SpectralMeasure, CliError> {
        SpectralMeasure::new(self.atoms.iter().map(|a| (a.s, a.w)).collect(), self.tol.unwrap_or(DEFAULT_TOL)).lib()
    }
}

#[derive(Deserialize)]
struct DatumInput {
    measure: MeasureInput,
    #[serde(with = "hankel_core::complex_json::vec")]
    psi: Vec<C64>,
    #[serde(with = "hankel_core::complex_json::vec", default)]
    psi_tilde: Vec<C64>,
}

#[derive(Deserialize)]
struct SymbolInput {
    #[serde(with = "hankel_core::complex_json::vec")]
    coeffs: Vec<C64>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<(Vec<u8>, T), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::MalformedJson { path: path.to_path_buf(), message: e.to_string() })?;
    Ok((bytes, value))
}

/// A bare input, or the `result.<field>` of an envelope written by another command.
fn read_input<T: DeserializeOwned>(path: &Path, field: &str) -> Result<(Vec<u8>, T), CliError> {
    let (bytes, mut value): (_, serde_json::Value) = read_json(path)?;
    if let Some(inner) = value.pointer_mut(&format!("/result/{field}")) {
        value = inner.take();
    }
    let parsed = serde_json::from_value(value)
        .map_err(|e| CliError::MalformedJson { path: path.to_path_buf(), message: e.to_string() })?;
    Ok((bytes, parsed))
}

fn read_datum(path: &Path) -> Result<(Vec<u8>, SpectralDatum), CliError> {
    let (bytes, raw): (_, DatumInput) = read_input(path, "datum")?;
    let rho = raw.measure.build()?;
    Ok((bytes, SpectralDatum::new(rho, raw.psi, raw.psi_tilde).lib()?))
}

fn read_symbol(path: &Path) -> Result<(Vec<u8>, HankelSymbol), CliError> {
    let (bytes, raw): (_, SymbolInput) = read_input(path, "symbol")?;
    Ok((bytes, HankelSymbol::new(raw.coeffs).lib()?))
}

fn positive(name: &'static str, value: f64) -> Result<f64, CliError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(CliError::InvalidArgument { name, message: format!("{value} must be positive and finite") })
    }
}

fn coefficient_plot(plot: &mut PlotData, coeffs: &[C64]) {
    for (k, c) in coeffs.iter().enumerate() {
        plot.push("re", k as f64, c.re);
        plot.push("im", k as f64, c.im);
    }
}

#[derive(Args, Debug)]
pub struct DirectArgs {
    /// Symbol JSON: `{"coeffs": [{"re": .., "im": ..}, ..]}`.
    #[arg(long)]
    pub u: PathBuf,
    /// Truncation size; defaults to degree + 1.
    #[arg(long)]
    pub n: Option<usize>,
}

pub fn direct(args: &DirectArgs, ctx: &mut Context) -> Result<Outcome, CliError> {
    let (bytes, u) = read_symbol(&args.u)?;
    let n = args.n.unwrap_or(u.degree() + 1);
    let prov = Provenance::new("direct", &bytes, ctx.seed).tol("rank", DEFAULT_RANK_TOL).tol("gap", DEFAULT_GAP_TOL);
    ctx.provenance = Some(prov.clone());
    let report = forward_spectral_map_report(&u, n).lib()?;
    let mut plot = PlotData::default();
    for a in report.datum.rho().atoms() {
        plot.push("rho", a.s, a.w);
    }
    Ok(ctx.finish(prov, &report, plot))
}

#[derive(Args, Debug)]
pub struct InverseArgs {
    /// Datum JSON: `{"measure": {"atoms": [{"s": .., "w": ..}]}, "psi": [..], "psi_tilde": [..]}`.
    #[arg(long)]
    pub datum: PathBuf,
    /// `auto` or the highest coefficient index `K`.
    #[arg(long, default_value = "auto")]
    pub order: String,
    #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
    pub tail_tol: f64,
}

pub fn inverse(args: &InverseArgs, ctx: &mut Context) -> Result<Outcome, CliError> {
    let (bytes, datum) = read_datum(&args.datum)?;
    let tail = positive("--tail-tol", args.tail_tol)?;
    let order = match args.order.as_str() {
        "auto" => Order::Auto,
        k => Order::Fixed(k.parse().map_err(|_| CliError::InvalidArgument {
            name: "--order",
            message: format!("{k} is neither `auto` nor a nonnegative integer"),
        })?),
    };
    let prov = Provenance::new("inverse", &bytes, ctx.seed).tol("tail", tail);
    ctx.provenance = Some(prov.clone());
    let recovery = recover_symbol_with(&datum, order, tail).lib()?;
    let mut plot = PlotData::default();
    coefficient_plot(&mut plot, &recovery.coeffs);
    Ok(ctx.finish(prov, &recovery, plot))
}

#[derive(Args, Debug)]
pub struct RoundtripArgs {
    /// Symbol JSON; forward, inverse and forward again.
    #[arg(long, conflicts_with = "datum", required_unless_present = "datum")]
    pub u: Option<PathBuf>,
    /// Datum JSON; inverse then forward.
    #[arg(long)]
    pub datum: Option<PathBuf>,
    /// Minimum truncation for the forward map.
    #[arg(long, default_value_t = 0)]
    pub n: usize,
}

#[derive(serde::Serialize)]
struct RoundtripResult<T: serde::Serialize> {
    max_error: f64,
    #[serde(flatten)]
    detail: T,
}

pub fn roundtrip_cmd(args: &RoundtripArgs, ctx: &mut Context) -> Result<Outcome, CliError> {
    let mut plot = PlotData::default();
    if let Some(path) = &args.u {
        let (bytes, u) = read_symbol(path)?;
        let prov = Provenance::new("roundtrip", &bytes, ctx.seed)
            .tol("tail", DEFAULT_TAIL_TOL)
            .tol("radius_margin", STABLE_RADIUS_MARGIN);
        ctx.provenance = Some(prov.clone());
        let rt = symbol_roundtrip(&u, args.n).lib()?;
        coefficient_plot(&mut plot, rt.roundtrip.symbol.coeffs());
        let result = RoundtripResult { max_error: rt.max_error(), detail: rt };
        return Ok(ctx.finish(prov, &result, plot));
    }
    let path = args.datum.as_ref().expect("clap enforces one input");
    let (bytes, datum) = read_datum(path)?;
    let prov = Provenance::new("roundtrip", &bytes, ctx.seed)
        .tol("tail", DEFAULT_TAIL_TOL)
        .tol("radius_margin", STABLE_RADIUS_MARGIN);
    ctx.provenance = Some(prov.clone());
    let rt = roundtrip(&datum, args.n).lib()?;
    coefficient_plot(&mut plot, rt.symbol.coeffs());
    let result = RoundtripResult { max_error: rt.max_error(), detail: rt };
    Ok(ctx.finish(prov, &result, plot))
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[arg(long)]
    pub datum: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub k_max: usize,
    #[arg(long, default_value_t = 4)]
    pub probes: usize,
    #[arg(long, default_value_t = STABLE_RADIUS_MARGIN)]
    pub radius_margin: f64,
}

pub fn stability(args: &StabilityArgs, ctx: &mut Context) -> Result<Outcome, CliError> {
    let (bytes, datum) = read_datum(&args.datum)?;
    let margin = positive("--radius-margin", args.radius_margin)?;
    let prov = Provenance::new("stability", &bytes, ctx.seed).tol("radius_margin", margin);
    ctx.provenance = Some(prov.clone());
    let opts =
        StabilityOptions { k_max: args.k_max, probes: args.probes.max(1), seed: ctx.seed, radius_margin: margin };
    let report = stability_report_with(&datum, opts).lib()?;
    let mut plot = PlotData::default();
    for (k, v) in report.decay_curve.iter().enumerate() {
        plot.push("decay", k as f64, *v);
    }
    Ok(ctx.finish(prov, &report, plot))
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub datum: PathBuf,
    /// First Cesàro length of the dyadic ladder.
    #[arg(long, default_value_t = 8)]
    pub ladder_start: usize,
    /// Last Cesàro length of the dyadic ladder.
    #[arg(long, default_value_t = 1024)]
    pub ladder_end: usize,
}

pub fn diagnose_cmd(args: &DiagnoseArgs, ctx: &mut Context) -> Result<Outcome, CliError> {
    let (bytes, datum) = read_datum(&args.datum)?;
    let prov = Provenance::new("diagnose", &bytes, ctx.seed);
    ctx.provenance = Some(prov.clone());
    let report = diagnose(&datum, &dyadic_ladder(args.ladder_start, args.ladder_end)).lib()?;
    let mut plot = PlotData::default();
    for (n, v) in &report.probe.cesaro {
        plot.push("cesaro", *n as f64, *v);
    }
    for (phi, mass) in &report.probe.eigenphases {
        plot.push("eigenphase_mass", *phi, *mass);
    }
    Ok(ctx.finish(prov, &report, plot))
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DensityKind {
    /// `w(s) = 1`.
    Uniform,
    /// `w(s) = s`.
    Linear,
}

#[derive(Args, Debug)]
pub struct DensityArgs {
    #[arg(long, value_enum, default_value = "uniform")]
    pub density: DensityKind,
    /// Support interval `a,b` with `0 < a < b`.
    #[arg(long, default_value = "1,2")]
    pub interval: String,
    /// `auto` rescales to `Σ w/s² = --inv2`; a number multiplies the density.
    #[arg(long, default_value = "auto")]
    pub scale: String,
    #[arg(long, default_value_t = 0.9)]
    pub inv2: f64,
    #[arg(long, default_value_t = 1.5)]
    pub s0: f64,
}

impl DensityArgs {
    fn canonical(&self) -> String {
        format!("{:?};{};{};{};{}", self.density, self.interval, self.scale, self.inv2, self.s0)
    }

    fn build(&self) -> Result<DensityMeasure, CliError> {
        let ends = parse_list::<f64>("--interval", &self.interval)?;
        let [a, b] = ends[..] else {
            return Err(CliError::InvalidArgument { name: "--interval", message: "expected `a,b`".into() });
        };
        let dm = match self.density {
            DensityKind::Uniform => DensityMeasure::uniform(a, b),
            DensityKind::Linear => DensityMeasure::new(a, b, |s| s, "linear"),
        }
        .lib()?;
        match self.scale.as_str() {
            "auto" => dm.scaled_to_inv2(self.inv2).lib(),
            x => Ok(dm.with_scale(positive("--scale", x.parse().unwrap_or(f64::NAN))?)),
        }
    }
}

fn parse_list<T: std::str::FromStr>(name: &'static str, text: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim().parse().map_err(|_| CliError::InvalidArgument { name, message: format!("cannot parse `{t}`") })
        })
        .collect()
}

#[derive(Args, Debug)]
pub struct KappaArgs {
    #[command(flatten)]
    pub density: DensityArgs,
}

pub fn kappa_cmd(args: &KappaArgs, ctx: &mut Context) -> Result<Outcome, CliError> {
    let prov = Provenance::new("kappa", args.density.canonical().as_bytes(), ctx.seed).tol("boundary", BOUNDARY_TOL);
    ctx.provenance = Some(prov.clone());
    let dm = args.density.build()?;
    let report = kappa(&dm, args.density.s0).lib()?;
    let mut plot = PlotData::default();
    for (eta, v) in &report.boundary.ladder {
        plot.push("re_t0", *eta, v[0]);
        plot.push("im_t0", *eta, v[1]);
    }
    Ok(ctx.finish(prov, &report, plot))
}

#[derive(Args, Debug)]
pub struct ArcArgs {
    #[command(flatten)]
    pub density: DensityArgs,
    /// Atom counts of the discretizations.
    #[arg(long, default_value = "200,400,800")]
    pub refinements: String,
    /// Power-iteration horizon for the plateau statistics.
    #[arg(long, default_value_t = 2000)]
    pub k_max: usize,
}

pub fn arc_experiment(args: &ArcArgs, ctx: &mut Context) -> Result<Outcome, CliError> {
    let config = format!("{};{};{}", args.density.canonical(), args.refinements, args.k_max);
    let prov = Provenance::new("arc-experiment", config.as_bytes(), ctx.seed).tol("boundary", BOUNDARY_TOL);
    ctx.provenance = Some(prov.clone());
    let dm = args.density.build()?;
    let refinements = parse_list::<usize>("--refinements", &args.refinements)?;
    let report = halmos_arc_experiment(&dm, args.density.s0, &refinements, args.k_max).lib()?;
    let mut plot = PlotData::default();
    for level in &report.levels {
        for phi in &level.eigenphases {
            plot.push("eigenphase", level.atoms as f64, *phi);
        }
        plot.push("coverage", level.atoms as f64, level.coverage);
    }
    Ok(ctx.finish(prov, &report, plot))
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Spectral,
    Galerkin,
    Both,
}

impl From<MethodArg> for FlowMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Spectral => FlowMethod::Spectral,
            MethodArg::Galerkin => FlowMethod::Galerkin,
            MethodArg::Both => FlowMethod::Both,
        }
    }
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    /// Initial symbol JSON.
    #[arg(long)]
    pub u0: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, value_enum, default_value = "both")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 32)]
    pub modes: usize,
    #[arg(long, default_value_t = hankel_core::szego_flow::DEFAULT_DT)]
    pub dt: f64,
    /// Number of sample intervals in `[0, t]`.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
}

pub fn flow(args: &FlowArgs, ctx: &mut Context) -> Result<Outcome, CliError> {
    let (bytes, u0) = read_symbol(&args.u0)?;
    let prov = Provenance::new("flow", &bytes, ctx.seed).tol("dt", args.dt);
    ctx.provenance = Some(prov.clone());
    let report = flow_experiment(&u0, args.t, args.modes, args.dt, args.samples, args.method.into()).lib()?;
    let mut plot = PlotData::default();
    for s in &report.spectral_hat_u0 {
        plot.push("spectral_re", s.t, s.value.re);
        plot.push("spectral_im", s.t, s.value.im);
    }
    for g in &report.trajectory {
        plot.push("galerkin_re", g.t, g.modes[0].re);
        plot.push("galerkin_im", g.t, g.modes[0].im);
    }
    Ok(ctx.finish(prov, &report, plot))
}

#[derive(Args, Debug)]
pub struct ApArgs {
    /// Datum JSON whose pushforward is averaged.
    #[arg(long, conflicts_with = "uniform_atoms", required_unless_present = "uniform_atoms")]
    pub datum: Option<PathBuf>,
    /// Use the midpoint discretization of the uniform density on `[1, 2]`
    /// with this many atoms, `Σ w/s² = 1` and `Ψ = 1`.
    #[arg(long)]
    pub uniform_atoms: Option<usize>,
    /// Averaging windows `T`.
    #[arg(long, default_value = "10,100,1000")]
    pub windows: String,
}

pub fn apcheck(args: &ApArgs, ctx: &mut Context) -> Result<Outcome, CliError> {
    let (input, datum) = match (&args.datum, args.uniform_atoms) {
        (Some(path), _) => read_datum(path)?,
        (None, Some(n)) => {
            let rho = SpectralMeasure::midpoint(1.0, 2.0, n, |_| 1.0, DEFAULT_TOL).lib()?.with_inv2(1.0).lib()?;
            let one = C64::new(1.0, 0.0);
            (format!("uniform:{n}").into_bytes(), SpectralDatum::from_functions(rho, |_| one, |_| one).lib()?)
        }
        (None, None) => unreachable!("clap enforces one input"),
    };
    let mut config = input;
    config.extend_from_slice(args.windows.as_bytes());
    let prov = Provenance::new("apcheck", &config, ctx.seed);
    ctx.provenance = Some(prov.clone());
    let atoms = ap_measure(&datum);
    let averages = parse_list::<f64>("--windows", &args.windows)?
        .into_iter()
        .map(|t| ap_time_average(&atoms, t).lib())
        .collect::<Result<Vec<_>, _>>()?;
    let mut plot = PlotData::default();
    for a in &averages {
        plot.push("sinc_sum", a.window, a.sinc_sum);
        plot.push("quadrature", a.window, a.quadrature);
    }
    Ok(ctx.finish(prov, &averages, plot))
}
