//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hankel_core::diagnostics::dyadic_ladder;
use hankel_core::direct_map::{
    forward_spectral_map, hankel_matrices, selfadjoint_checks, simplicity_check, DEFAULT_RANK_TOL,
};
use hankel_core::inverse_map::{
    plateau_ladder, recover_symbol_with, roundtrip, stability_report_with, symbol_roundtrip, Order, StabilityOptions,
    StabilityVerdict,
};
use hankel_core::linalg::{self, CMatrix};
use hankel_core::measure::DEFAULT_TOL;
use hankel_core::model::{
    antilinear_after_linear, build_model, compose_antilinear, linear_after_antilinear, tilde_spectrum,
};
use hankel_core::perturbation::{halmos_arc_experiment, sigma0_defect_integral, DensityMeasure, QuadratureOptions};
use hankel_core::szego_flow::{
    ap_measure, ap_time_average, compare_flows, conservation_checks, hat_u0_of_t, integrate_trajectory,
};
use hankel_core::{HankelSymbol, SpectralDatum, SpectralMeasure, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONE: C64 = C64::new(1.0, 0.0);

/// Named sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    parts: Vec<(String, bool)>,
}

impl Checks {
    fn expect(&mut self, ok: bool, label: impl Into<String>) {
        self.parts.push((label.into(), ok));
    }

    /// `value ≤ tol`, reported with the measured value.
    fn at_most(&mut self, name: &str, value: f64, tol: f64) {
        self.expect(value <= tol, format!("{name}={value:.3e} (<= {tol:e})"));
    }

    fn at_least(&mut self, name: &str, value: f64, tol: f64) {
        self.expect(value >= tol, format!("{name}={value:.4} (>= {tol})"));
    }
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    run: fn(&mut Checks),
}

fn run_criterion(c: &Criterion) -> bool {
    let start = Instant::now();
    let mut checks = Checks::default();
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| (c.run)(&mut checks)));
    let elapsed = start.elapsed();
    if let Err(payload) = outcome {
        let msg = payload
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        checks.expect(false, format!("aborted: {msg}"));
    }
    if let Some(budget) = c.budget {
        checks.expect(elapsed <= budget, format!("runtime {:.1}s (< {}s)", elapsed.as_secs_f64(), budget.as_secs()));
    }
    let pass = checks.parts.iter().all(|p| p.1);
    let failing: Vec<&str> = checks.parts.iter().filter(|p| !p.1).map(|p| p.0.as_str()).collect();
    let shown: Vec<&str> = if pass { checks.parts.iter().map(|p| p.0.as_str()).collect() } else { failing };
    println!(
        "{} [{}] {} ({:.1}s): {}",
        if pass { "PASS" } else { "FAIL" },
        c.id,
        c.name,
        elapsed.as_secs_f64(),
        shown.join("; ")
    );
    pass
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "exact model identities", budget: secs(10), run: exact_identities },
        Criterion { id: 2, name: "round trips", budget: secs(30), run: round_trips },
        Criterion { id: 3, name: "tridiagonal H_u^2 of z^(N-1)+z^N", budget: None, run: tridiagonal_fixture },
        Criterion { id: 4, name: "datum of 1+z", budget: None, run: one_plus_z_fixture },
        Criterion { id: 5, name: "self-adjoint dichotomy", budget: None, run: selfadjoint_dichotomy },
        Criterion { id: 6, name: "defect integral representation", budget: secs(60), run: defect_integral },
        Criterion { id: 7, name: "Szego flow cross-validation", budget: secs(120), run: szego_cross_validation },
        Criterion { id: 8, name: "stability contrast", budget: secs(300), run: stability_contrast },
        Criterion { id: 9, name: "two-projection arc", budget: None, run: two_projection_arc },
        Criterion { id: 10, name: "almost-periodicity probe", budget: None, run: almost_periodicity },
    ];
    let failed = criteria.iter().map(run_criterion).filter(|pass| !pass).count();
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Atoms at least `gap` apart in `[0.2, 3]`; about half the data have `Σ w/s² = 1`.
fn random_datum(rng: &mut ChaCha8Rng, n: usize, gap: f64, phase: impl Fn(&mut ChaCha8Rng) -> C64) -> SpectralDatum {
    loop {
        let mut s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
        s.sort_by(f64::total_cmp);
        if s.windows(2).any(|w| w[1] - w[0] < gap) {
            continue;
        }
        let w: Vec<f64> = s.iter().map(|x| rng.gen_range(0.1..1.0) * x * x).collect();
        let inv2: f64 = w.iter().zip(&s).map(|(w, x)| w / (x * x)).sum();
        let target = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.2..0.99) };
        let rho = SpectralMeasure::new(s.iter().zip(&w).map(|(x, w)| (*x, w * target / inv2)).collect(), DEFAULT_TOL)
            .expect("valid measure");
        let count = tilde_spectrum(&rho).expect("tilde spectrum").positive_count();
        let psi = (0..n).map(|_| phase(rng)).collect();
        let psi_tilde = (0..count).map(|_| phase(rng)).collect();
        return SpectralDatum::new(rho, psi, psi_tilde).expect("valid datum");
    }
}

fn unit_phase(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(1.0, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
}

fn sign_phase(rng: &mut ChaCha8Rng) -> C64 {
    if rng.gen_bool(0.5) {
        ONE
    } else {
        -ONE
    }
}

/// Random simple symbol of degree at most 6 with coefficients in the unit box.
fn random_simple_symbol(rng: &mut ChaCha8Rng, real: bool) -> HankelSymbol {
    loop {
        let len = rng.gen_range(1..=7);
        let coeffs = (0..len)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), if real { 0.0 } else { rng.gen_range(-1.0..1.0) }))
            .collect();
        let Ok(u) = HankelSymbol::new(coeffs) else {
            continue;
        };
        if simplicity_check(&u, u.degree() + 1).is_ok_and(|r| r.is_simple) {
            return u;
        }
    }
}

fn exact_identities(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut sigma, mut intertwine, mut square, mut mtilde, mut telescoping) =
        (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let d = random_datum(&mut rng, n, 1e-3, unit_phase);
        let m = build_model(&d).expect("model");
        let id = CMatrix::identity(n, n);
        sigma = sigma.max((m.sigma() * &m.sigma_star - (&id - m.q_projector())).norm() / id.norm());
        let sh = linear_after_antilinear(&m.sigma_star, &m.h_kernel);
        let hs = antilinear_after_linear(&m.h_kernel, &m.sigma());
        intertwine = intertwine
            .max(linalg::relative_distance(&sh, &m.htilde_kernel))
            .max(linalg::relative_distance(&hs, &m.htilde_kernel));
        let h2 = compose_antilinear(&m.h_kernel, &m.h_kernel);
        let ht2 = compose_antilinear(&m.htilde_kernel, &m.htilde_kernel);
        square = square.max((&ht2 - (&h2 - m.one_projector())).norm() / h2.norm());
        let mt = m.mtilde_complex();
        let m2 = m.m_squared();
        mtilde = mtilde.max((&mt * &mt - (&m2 - m.one_projector())).norm() / m2.norm());
        let opts = StabilityOptions { k_max: 50, probes: 4, seed: 7, ..Default::default() };
        telescoping = telescoping.max(stability_report_with(&d, opts).expect("report").max_isometry_defect());
    }
    c.at_most("SS*=I-qq*", sigma, 1e-10);
    c.at_most("H~=S*H=HS", intertwine, 1e-10);
    c.at_most("H~^2=H^2-<.,1>1", square, 1e-10);
    c.at_most("M~^2=M^2-1x1", mtilde, 1e-10);
    c.at_most("telescoping n<=50", telescoping, 1e-10);
}

fn round_trips(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_symbol = 0.0_f64;
    let mut failures = 0;
    for _ in 0..100 {
        let u = random_simple_symbol(&mut rng, false);
        match symbol_roundtrip(&u, u.degree() + 1) {
            Ok(rt) => worst_symbol = worst_symbol.max(rt.max_error()),
            Err(_) => failures += 1,
        }
    }
    c.at_most("symbol->datum->symbol->datum", worst_symbol, 1e-7);
    c.expect(failures == 0, format!("symbol round-trip errors={failures}"));

    let mut worst_datum = 0.0_f64;
    let mut failures = 0;
    let mut accepted = 0;
    while accepted < 100 {
        let n = rng.gen_range(1..=5);
        let d = random_datum(&mut rng, n, 1e-3, unit_phase);
        let report = stability_report_with(&d, StabilityOptions { probes: 1, ..Default::default() }).expect("report");
        if report.verdict != StabilityVerdict::Stable || report.spectral_radius >= 0.99 {
            continue;
        }
        accepted += 1;
        match roundtrip(&d, n) {
            Ok(rt) => worst_datum = worst_datum.max(rt.max_error()),
            Err(_) => failures += 1,
        }
    }
    c.at_most("datum->symbol->datum", worst_datum, 1e-7);
    c.expect(failures == 0, format!("datum round-trip errors={failures}"));
}

/// `H_u² = Γ conj(Γ)` on the first `N + 1` modes, rounded to integers if exact.
fn dense_h_squared(u: &HankelSymbol) -> Option<Vec<Vec<i64>>> {
    let n = u.degree() + 1;
    let hm = hankel_matrices(u, n, DEFAULT_RANK_TOL).ok()?;
    let g = hm.gamma();
    let h2 = &g * g.conjugate();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let z = h2[(i, j)];
                    (z.im == 0.0 && z.re == z.re.round()).then_some(z.re as i64)
                })
                .collect()
        })
        .collect()
}

/// `2` on the diagonal except a final `1`, `1` next to it, `0` elsewhere.
fn expected_tridiagonal(size: usize) -> Vec<Vec<i64>> {
    (0..size)
        .map(|i| {
            (0..size)
                .map(|j| match i.abs_diff(j) {
                    0 if i + 1 == size => 1,
                    0 => 2,
                    1 => 1,
                    _ => 0,
                })
                .collect()
        })
        .collect()
}

fn tridiagonal_fixture(c: &mut Checks) {
    let listed = vec![vec![2, 1, 0, 0], vec![1, 2, 1, 0], vec![0, 1, 2, 1], vec![0, 0, 1, 1]];
    for big_n in [3usize, 4] {
        let mut coeffs = vec![C64::new(0.0, 0.0); big_n + 1];
        coeffs[big_n - 1] = ONE;
        coeffs[big_n] = ONE;
        let u = HankelSymbol::new(coeffs).expect("symbol");
        let got = dense_h_squared(&u);
        let want = expected_tridiagonal(big_n + 1);
        c.expect(got.as_ref() == Some(&want), format!("N={big_n}: {}x{} integer tridiagonal", big_n + 1, big_n + 1));
        if big_n == 3 {
            c.expect(got.as_ref() == Some(&listed), "N=3 rows (2,1),(1,2,1),(1,2,1),(1,1)");
        }
    }
}

fn one_plus_z_fixture(c: &mut Checks) {
    let u = HankelSymbol::new(vec![ONE, ONE]).expect("symbol");
    let d = forward_spectral_map(&u, 2).expect("forward map");
    // Γ = [[1, 1], [1, 0]] has eigenvalues (1 ± √5)/2 with eigenvectors (λ, 1).
    let root5 = 5.0_f64.sqrt();
    let eig = [(1.0 - root5) / 2.0, (1.0 + root5) / 2.0];
    let oracle: Vec<(f64, f64, f64)> =
        eig.iter().map(|&l| (l.abs(), (l + 1.0).powi(2) / (l * l + 1.0), l.signum())).collect();
    let atoms = d.rho().atoms();
    c.expect(atoms.len() == 2, format!("atoms={}", atoms.len()));
    let s_err = atoms.iter().zip(&oracle).map(|(a, o)| (a.s - o.0).abs()).fold(0.0, f64::max);
    let w_err = atoms.iter().zip(&oracle).map(|(a, o)| (a.w - o.1).abs()).fold(0.0, f64::max);
    let psi_err = d.psi().iter().zip(&oracle).map(|(p, o)| (p - C64::new(o.2, 0.0)).norm()).fold(0.0, f64::max);
    c.at_most("singular values vs (sqrt5+-1)/2", s_err, 1e-12);
    c.at_most("weights vs 2x2 oracle", w_err, 1e-12);
    c.at_most("Psi vs (-1, +1)", psi_err, 1e-12);
    c.at_most("|sum w/s^2 - 1|", (d.rho().inverse_moment(2) - 1.0).abs(), 1e-12);
}

fn selfadjoint_dichotomy(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut phase_dev, mut residual) = (0.0_f64, 0.0_f64);
    for _ in 0..50 {
        let u = random_simple_symbol(&mut rng, true);
        let r = selfadjoint_checks(&u, u.degree() + 1).expect("self-adjoint checks");
        phase_dev = phase_dev.max(r.max_phase_deviation);
        residual = residual.max(r.residual_gamma).max(r.residual_gamma_tilde);
    }
    c.at_most("real symbol: max |Psi - (+-1)|", phase_dev, 1e-8);
    c.at_most("polar residuals", residual, 1e-10);

    let mut imag = 0.0_f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=6);
        let d = random_datum(&mut rng, n, 1e-3, sign_phase);
        let rec = recover_symbol_with(&d, Order::Fixed(40), 0.0).expect("recovery");
        imag = imag.max(rec.coeffs.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
    }
    c.at_most("+-1 phases: max |Im u_k|", imag, 1e-10);
}

fn defect_integral(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut entry, mut trace) = (0.0_f64, 0.0_f64);
    for k in 0..5 {
        let n = rng.gen_range(2..=10);
        let raw: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(1.0..2.0), rng.gen_range(0.1..1.0))).collect();
        let inv2: f64 = raw.iter().map(|(s, w)| w / (s * s)).sum();
        let target = if k % 2 == 0 { 1.0 } else { rng.gen_range(0.3..0.95) };
        let rho = SpectralMeasure::new(raw.iter().map(|&(s, w)| (s, w * target / inv2)).collect(), DEFAULT_TOL)
            .expect("measure");
        let r = sigma0_defect_integral(&rho, QuadratureOptions::default()).expect("quadrature");
        entry = entry.max(r.max_entry_error);
        trace = trace.max(r.trace_norm_error);
    }
    c.at_most("entrywise", entry, 1e-6);
    c.at_most("trace norm", trace, 1e-5);
}

fn szego_cross_validation(c: &mut Checks) {
    const MODES: usize = 32;
    const DT: f64 = 1e-3;
    let z = |k: usize| {
        let mut v = vec![C64::new(0.0, 0.0); k + 1];
        v[k] = ONE;
        v
    };
    let cases: [(&str, Vec<C64>); 4] = [
        ("1", vec![ONE]),
        ("z", z(1)),
        ("1+z", vec![ONE, ONE]),
        ("z^3+z^4", {
            let mut v = z(4);
            v[3] = ONE;
            v
        }),
    ];
    for (name, coeffs) in cases {
        let u0 = HankelSymbol::new(coeffs).expect("symbol");
        let trajectory = integrate_trajectory(&u0, 1.0, MODES, DT, 10).expect("trajectory");
        let cons = conservation_checks(&trajectory);
        let galerkin = &trajectory.last().expect("endpoint").modes;
        c.at_most(&format!("{name}: singular value drift"), cons.singular_value_drift, 1e-6);
        c.at_most(&format!("{name}: L2 drift"), cons.l2_drift, 1e-8);
        match forward_spectral_map(&u0, u0.degree() + 1) {
            Ok(datum0) => {
                match compare_flows(&u0, 1.0, MODES, DT) {
                    Ok(cmp) => c.at_most(&format!("{name}: spectral vs Galerkin"), cmp.max_error, 1e-5),
                    Err(e) => c.expect(false, format!("{name}: comparison failed: {e}")),
                }
                let u0_hat = hat_u0_of_t(&datum0, 1.0);
                c.at_most(&format!("{name}: u_0(t) closed form"), (u0_hat - galerkin[0]).norm(), 1e-6);
            }
            Err(_) => {
                // z is not simple; its flow is e^{-it}z.
                let exact = |k: usize| {
                    if k == 1 {
                        C64::from_polar(1.0, -1.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                };
                let err = galerkin.iter().enumerate().map(|(k, a)| (a - exact(k)).norm()).fold(0.0, f64::max);
                c.at_most(&format!("{name} (not simple): Galerkin vs e^(-it)z"), err, 1e-5);
                c.at_most(&format!("{name}: u_0(t) closed form"), galerkin[0].norm(), 1e-6);
            }
        }
    }
}

fn lebesgue_data(n: usize) -> (SpectralDatum, SpectralDatum) {
    let rho = SpectralMeasure::midpoint(1.0, 2.0, n, |_| 1.0, DEFAULT_TOL)
        .and_then(|r| r.with_inv2(1.0))
        .expect("discretized measure");
    let ones = SpectralDatum::from_functions(rho.clone(), |_| ONE, |_| ONE).expect("datum");
    let twisted = SpectralDatum::from_functions(rho, |s| C64::from_polar(1.0, s), |_| ONE).expect("datum");
    (ones, twisted)
}

fn stability_contrast(c: &mut Checks) {
    const K: usize = 2000;
    let ladder = dyadic_ladder(100, 800);
    let (ones, twisted): (Vec<_>, Vec<_>) = ladder.iter().map(|&n| lebesgue_data(n)).unzip();
    let ratios = |data: &[SpectralDatum]| -> Vec<f64> {
        plateau_ladder(data, K).expect("plateau ladder").iter().map(|p| p.plateau.terminal_ratio).collect()
    };
    let r_ones = ratios(&ones);
    let r_twisted = ratios(&twisted);
    let at_400 = ladder.iter().position(|&n| n == 400).expect("400 atoms on the ladder");
    let fmt = |r: &[f64]| r.iter().map(|x| format!("{x:.7}")).collect::<Vec<_>>().join(",");
    c.at_most("(1,1) ratio at 400", r_ones[at_400], 0.05);
    c.expect(r_ones.windows(2).all(|w| w[1] < w[0]), format!("(1,1) decreasing over {ladder:?}: [{}]", fmt(&r_ones)));
    c.at_least("(e^is,1) ratio at 400", r_twisted[at_400], 0.1);
    c.expect(
        r_twisted.windows(2).all(|w| w[1] >= w[0]),
        format!("(e^is,1) non-decreasing over {ladder:?}: [{}]", fmt(&r_twisted)),
    );
}

fn two_projection_arc(c: &mut Checks) {
    let dm = DensityMeasure::uniform(1.0, 2.0).and_then(|d| d.scaled_to_inv2(0.9)).expect("density");
    let report = halmos_arc_experiment(&dm, 1.5, &[200, 400, 800], 2000).expect("arc experiment");
    let inside = report.levels.iter().map(|l| l.inside_fraction).fold(1.0, f64::min);
    let coverage: Vec<f64> = report.levels.iter().map(|l| l.coverage).collect();
    let last = report.levels.last().expect("finest level");
    c.expect(inside == 1.0, format!("inside inflated arc: min fraction {inside:.4}"));
    c.expect(coverage.windows(2).all(|w| w[1] >= w[0]), format!("coverage non-decreasing: {coverage:.3?}"));
    c.at_most(
        &format!("endpoint error at 800 (max phase {:.4} vs {:.4})", last.max_phase, report.phi_max),
        last.endpoint_error,
        0.05,
    );
    c.at_least("plateau at 800", last.stability.plateau.terminal_ratio, 0.1);
}

fn almost_periodicity(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut agreement = 0.0_f64;
    for _ in 0..20 {
        let n = rng.gen_range(1..=6);
        let atoms: Vec<(f64, C64)> =
            (0..n).map(|_| (rng.gen_range(0.5..4.0), unit_phase(&mut rng) * rng.gen_range(0.1..1.0))).collect();
        for t in [0.5, 10.0, 100.0] {
            let r = ap_time_average(&atoms, t).expect("time average");
            agreement = agreement.max((r.sinc_sum - r.quadrature).abs());
        }
    }
    c.at_most("atomic: |sinc sum - quadrature|", agreement, 1e-8);

    let rho = SpectralMeasure::midpoint(1.0, 2.0, 200, |_| 1.0, DEFAULT_TOL)
        .and_then(|r| r.with_inv2(1.0))
        .expect("discretized measure");
    let datum = SpectralDatum::from_functions(rho, |_| ONE, |_| ONE).expect("datum");
    let atoms = ap_measure(&datum);
    let windows = [1.0, 10.0, 100.0, 1000.0];
    let averages: Vec<_> = windows.iter().map(|&t| ap_time_average(&atoms, t).expect("time average")).collect();
    let diffuse_agreement = averages.iter().map(|a| (a.sinc_sum - a.quadrature).abs()).fold(0.0, f64::max);
    let values: Vec<f64> = averages.iter().map(|a| a.sinc_sum).collect();
    let last = averages.last().expect("largest window");
    c.at_most("200 atoms: |sinc sum - quadrature|", diffuse_agreement, 1e-8);
    c.at_most("200 atoms: average at T=1e3 / (sum|a|)^2", last.sinc_sum / last.total_mass_sq, 0.05);
    c.expect(values.windows(2).all(|w| w[1] < w[0]), format!("decreasing over T={windows:?}: {values:.5?}"));
}
