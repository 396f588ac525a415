//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

use std::num::NonZeroUsize;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use imagtime::analysis::{
    decompose, fit_exponential_rate, fit_power_slope, min_eigenvalue_a, project_p_eta, project_p_w,
    r_of_u, ErrorWindow,
};
use imagtime::flow::{
    compute_ground_state, gradient_step, integrate_cngf, perturbed_soliton,
    random_symmetric_perturbation, run_flow, FlowConfig, GroundStateRef, InitialData,
};
use imagtime::grid::{inner, l2_sq, laplacian, Grid, StateVector};
use imagtime::soliton::h1_error_vs_exact;
use imagtime::SchemeKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || {
        format!("runtime {took:?} exceeds {limit:?}")
    })
}

fn sci(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn reference(h: f64, k: usize) -> Result<GroundStateRef, String> {
    let grid = Grid::new(h, k).map_err(|e| e.to_string())?;
    compute_ground_state(&grid, 0.5, 1e-13).map_err(|e| e.to_string())
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// 1. One linearly implicit step leaves the discrete ground state in place.
fn ground_state_preservation() -> Outcome {
    let start = Instant::now();
    let r = reference(0.1, 400)?;
    ensure(r.residual <= 1e-13, || {
        format!("reference residual {:e}", r.residual)
    })?;
    let mut worst: f64 = 0.0;
    for tau in [0.05, 0.3, 1.0] {
        let next = e(gradient_step(&r.state, tau, SchemeKind::LinearlyImplicit))?;
        let d = e(r.distance(&next))?;
        worst = worst.max(d);
        ensure(d <= 1e-11, || format!("tau={tau}: distance {d:e} > 1e-11"))?;
    }
    within_time(start, Duration::from_secs(5))?;
    Ok(format!(
        "max H1_h distance {worst:.2e} over tau in {{0.05, 0.3, 1}}"
    ))
}

fn linimp_run(tau: f64, r: &GroundStateRef) -> Result<imagtime::FlowTrace, String> {
    let config = FlowConfig {
        scheme: SchemeKind::LinearlyImplicit,
        tau,
        max_iters: NonZeroUsize::new(100_000).unwrap(),
        tol_residual: 1e-12,
        init: InitialData::Perturbed { eps: 0.05 },
        ..FlowConfig::default()
    };
    let psi0 = e(config.init.build(&r.grid))?;
    e(run_flow(&psi0, &config, Some(r)))
}

fn reached(trace: &imagtime::FlowTrace, level: f64) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|rec| rec.err_ref.is_some_and(|x| x <= level))
        .map(|rec| rec.n)
}

/// 2. Exponential convergence of the linearly implicit flow.
fn exponential_convergence() -> Outcome {
    let start = Instant::now();
    let r = reference(0.1, 400)?;
    let trace = linimp_run(0.1, &r)?;
    let n = reached(&trace, 1e-10).ok_or("err_ref never reached 1e-10")?;
    ensure(n <= 5000, || format!("reached 1e-10 only at n = {n}"))?;
    let fit = e(fit_exponential_rate(&trace, 0.1, ErrorWindow::default()))?;
    ensure(fit.r_squared >= 0.99, || format!("R^2 = {}", fit.r_squared))?;
    ensure(fit.rate > 0.0, || format!("rate = {}", fit.rate))?;
    within_time(start, Duration::from_secs(10))?;
    Ok(format!(
        "err 1e-10 at n = {n}, rate {:.5}, R^2 {:.6}, {} points",
        fit.rate, fit.r_squared, fit.points_used
    ))
}

/// 3. The fitted rate per unit time does not depend on τ.
fn rate_stability() -> Outcome {
    let r = reference(0.1, 400)?;
    let mut rates = Vec::new();
    for tau in [0.05, 0.1, 0.2] {
        let trace = linimp_run(tau, &r)?;
        let n = reached(&trace, 1e-10).ok_or(format!("tau={tau}: never reached 1e-10"))?;
        ensure(n <= 5000, || {
            format!("tau={tau}: reached 1e-10 only at n = {n}")
        })?;
        let fit = e(fit_exponential_rate(&trace, tau, ErrorWindow::default()))?;
        ensure(fit.r_squared >= 0.99 && fit.rate > 0.0, || {
            format!("tau={tau}: rate {} R^2 {}", fit.rate, fit.r_squared)
        })?;
        rates.push(fit.rate);
    }
    for i in 0..rates.len() {
        for j in i + 1..rates.len() {
            let rel = (rates[i] - rates[j]).abs() / rates[i].min(rates[j]);
            ensure(rel <= 0.3, || format!("rates {rates:?} differ by {rel:.3}"))?;
        }
    }
    Ok(format!("rates {:.5?} for tau = 0.05, 0.1, 0.2", rates))
}

/// 4. First-order spatial convergence towards the continuous soliton.
fn spatial_order() -> Outcome {
    let start = Instant::now();
    let mut pairs = Vec::new();
    for h in [0.4, 0.2, 0.1, 0.05] {
        let grid = e(Grid::with_extent(h, 40.0))?;
        let r = e(compute_ground_state(&grid, 0.5, 1e-13))?;
        pairs.push((h, h1_error_vs_exact(&r.state)));
    }
    let fit = e(fit_power_slope(&pairs))?;
    ensure((0.8..=1.3).contains(&fit.rate), || {
        format!("slope {} from {pairs:?}", fit.rate)
    })?;
    within_time(start, Duration::from_secs(60))?;
    Ok(format!(
        "slope {:.4} (errors {})",
        fit.rate,
        sci(&pairs.iter().map(|p| p.1).collect::<Vec<_>>())
    ))
}

/// 5. Domain cutoff error decays until it hits the O(h) floor.
fn cutoff_error() -> Outcome {
    let mut errs = Vec::new();
    for extent in [5.0, 10.0, 20.0, 40.0] {
        let grid = e(Grid::with_extent(0.1, extent))?;
        let r = e(compute_ground_state(&grid, 0.5, 1e-13))?;
        errs.push(h1_error_vs_exact(&r.state));
    }
    ensure(errs.windows(2).all(|w| w[1] < w[0]), || {
        format!("not monotone: {errs:?}")
    })?;
    let rel = (errs[2] - errs[3]).abs() / errs[3];
    ensure(rel <= 0.01, || {
        format!("Kh 20 -> 40 relative change {rel:e}")
    })?;
    Ok(format!(
        "errors {}, Kh 20 -> 40 change {rel:.2e}",
        sci(&errs)
    ))
}

fn limit_of(scheme: SchemeKind, tau: f64, r: &GroundStateRef) -> Result<StateVector, String> {
    let config = FlowConfig {
        scheme,
        tau,
        max_iters: NonZeroUsize::new(200_000).unwrap(),
        tol_residual: 1e-14,
        init: InitialData::Perturbed { eps: 0.05 },
        record_every: NonZeroUsize::new(1_000).unwrap(),
        stagnation_tol: Some(1e-14),
        track_exact_error: false,
    };
    let psi0 = e(config.init.build(&r.grid))?;
    let trace = e(run_flow(&psi0, &config, None))?;
    ensure(trace.converged, || {
        format!("{scheme} tau={tau}: no stagnation")
    })?;
    Ok(trace.final_state)
}

/// 6. Semi-explicit and fully implicit schemes stall at O(τ) modified solitons.
fn modified_solitons() -> Outcome {
    let r = reference(0.1, 400)?;
    let taus = [0.01, 0.02, 0.04];
    let mut linimp = Vec::new();
    for tau in taus {
        let limit = limit_of(SchemeKind::LinearlyImplicit, tau, &r)?;
        linimp.push(e(r.distance(&limit))?);
    }
    let mut summary = Vec::new();
    for scheme in [SchemeKind::SemiExplicit, SchemeKind::FullyImplicit] {
        let mut pairs = Vec::new();
        for (i, tau) in taus.iter().enumerate() {
            let limit = limit_of(scheme, *tau, &r)?;
            let d = e(r.distance(&limit))?;
            ensure(d > 100.0 * linimp[i], || {
                format!(
                    "{scheme} tau={tau}: distance {d:e} vs linimp {:e}",
                    linimp[i]
                )
            })?;
            pairs.push((*tau, d));
        }
        let fit = e(fit_power_slope(&pairs))?;
        ensure((0.8..=1.2).contains(&fit.rate), || {
            format!("{scheme}: slope {} from {pairs:?}", fit.rate)
        })?;
        summary.push(format!("{scheme} slope {:.4}", fit.rate));
    }
    Ok(format!(
        "{}; linimp limits {}",
        summary.join(", "),
        sci(&linimp)
    ))
}

/// 7. Coercivity of the linearized operator, uniformly in h.
fn coercivity() -> Outcome {
    let start = Instant::now();
    let mut eigs = Vec::new();
    let mut lambda_fine = f64::NAN;
    for h in [0.2, 0.1, 0.05] {
        let grid = e(Grid::with_extent(h, 40.0))?;
        let r = e(compute_ground_state(&grid, 0.5, 1e-13))?;
        let m = e(min_eigenvalue_a(&r))?;
        ensure(m > 0.0, || format!("h={h}: min eigenvalue {m}"))?;
        eigs.push(m);
        lambda_fine = r.lambda_h;
    }
    let (lo, hi) = eigs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    ensure((hi - lo) / lo <= 0.2, || {
        format!("eigenvalues {eigs:?} spread too wide")
    })?;
    ensure((lambda_fine - 0.125).abs() <= 0.01, || {
        format!("lambda_h(0.05) = {lambda_fine}")
    })?;
    within_time(start, Duration::from_secs(60))?;
    Ok(format!(
        "min eig {eigs:.5?}, lambda_h(0.05) = {lambda_fine:.6}"
    ))
}

/// 8. The discrete flow is a first-order approximation of the continuous one.
fn continuous_flow_consistency() -> Outcome {
    let grid = e(Grid::new(0.1, 400))?;
    let psi0 = e(perturbed_soliton(&grid, 0.05))?;
    let t_final = 5.0;
    let exact = e(integrate_cngf(&psi0, 1e-3, t_final))?;
    let mut disc = Vec::new();
    for tau in [0.02, 0.01] {
        let steps = (t_final / tau).round() as usize;
        let mut psi = psi0.clone();
        for _ in 0..steps {
            psi = e(gradient_step(&psi, tau, SchemeKind::LinearlyImplicit))?;
        }
        disc.push(l2_sq(&e(psi.sub(&exact))?).sqrt());
    }
    let ratio = disc[0] / disc[1];
    ensure((1.6..=2.4).contains(&ratio), || {
        format!("ratio {ratio} from {disc:?}")
    })?;
    Ok(format!("discrepancies {}, ratio {ratio:.4}", sci(&disc)))
}

fn random_symmetric(grid: Grid, rng: &mut ChaCha8Rng) -> StateVector {
    let k = grid.k();
    let half: Vec<f64> = (0..=k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let values = (0..grid.len())
        .map(|i| half[grid.lattice(i).unsigned_abs()])
        .collect();
    StateVector::new(grid, values).unwrap()
}

fn random_vector(grid: Grid, rng: &mut ChaCha8Rng) -> StateVector {
    StateVector::new(
        grid,
        (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// 9. Structural invariants.
fn invariant_suite() -> Outcome {
    let start = Instant::now();
    let grid = e(Grid::new(0.1, 400))?;
    let r = reference(0.1, 400)?;

    // normalization and symmetry along 10⁴ iterations
    let mut psi = e(random_symmetric_perturbation(&grid, 0.02, 11))?;
    let mut worst_norm: f64 = 0.0;
    for _ in 0..10_000 {
        psi = e(gradient_step(&psi, 0.1, SchemeKind::LinearlyImplicit))?;
        worst_norm = worst_norm.max((l2_sq(&psi) - 1.0).abs());
    }
    ensure(worst_norm <= 1e-14, || {
        format!("|N_h - 1| reached {worst_norm:e}")
    })?;
    let asym = psi.asymmetry();
    ensure(asym <= 1e-12, || {
        format!("asymmetry {asym:e} after 1e4 iterations")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..50 {
        let a = random_vector(grid, &mut rng);
        let b = random_vector(grid, &mut rng);
        let lab = e(inner(&laplacian(&a), &b))?;
        let alb = e(inner(&a, &laplacian(&b)))?;
        ensure(
            (lab - alb).abs() <= 1e-12 * lab.abs().max(alb.abs()).max(1.0),
            || format!("Laplacian not self-adjoint: {lab} vs {alb}"),
        )?;
        let neg = -e(inner(&laplacian(&a), &a))?;
        ensure(neg >= 0.0, || format!("-<Δa, a> = {neg}"))?;

        let s = random_symmetric(grid, &mut rng);
        let pe = e(project_p_eta(&s, &r))?;
        let pw = e(project_p_w(&s, &r))?;
        let pe2 = e(project_p_eta(&pe, &r))?;
        let pw2 = e(project_p_w(&pw, &r))?;
        let scale = s.max_abs();
        ensure(e(pe2.sub(&pe))?.max_abs() <= 1e-13 * scale, || {
            "P_eta not idempotent".into()
        })?;
        ensure(e(pw2.sub(&pw))?.max_abs() <= 1e-13 * scale, || {
            "P_W not idempotent".into()
        })?;
        ensure(
            e(project_p_eta(&pw, &r))?.max_abs() <= 1e-13 * scale,
            || "P_eta P_W != 0".into(),
        )?;
        ensure(
            e(e(pe.add_scaled(1.0, &pw))?.sub(&s))?.max_abs() <= 1e-13 * scale,
            || "P_eta + P_W != I".into(),
        )?;

        let d = e(decompose(&s, &r))?;
        let back = e(d.reconstruct(&r))?;
        ensure(e(back.sub(&s))?.max_abs() <= 1e-13 * scale, || {
            "decompose round trip".into()
        })?;
        let overlap = e(inner(&d.u, &r.state))?.abs();
        ensure(overlap <= 1e-13 * l2_sq(&d.u).sqrt(), || {
            format!("<u, eta> = {overlap:e}")
        })?;

        let u = d.u.scaled(0.1 / l2_sq(&d.u).sqrt());
        let ru = e(r_of_u(&u))?;
        let on_sphere = e(u.add_scaled(1.0 + ru, &r.state))?;
        let n = l2_sq(&on_sphere);
        ensure((n - 1.0).abs() <= 1e-13, || {
            format!("r(u) reconstruction N_h = {n}")
        })?;
    }
    within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "max |N_h-1| {worst_norm:.1e}, asymmetry {asym:.1e} after 1e4 steps"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("ground-state preservation", ground_state_preservation),
        ("exponential convergence", exponential_convergence),
        ("rate stability in tau", rate_stability),
        ("spatial order O(h)", spatial_order),
        ("cutoff error saturation", cutoff_error),
        ("modified solitons O(tau)", modified_solitons),
        ("coercivity uniform in h", coercivity),
        ("continuous-flow consistency", continuous_flow_consistency),
        ("invariant suite", invariant_suite),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match run() {
            Ok(detail) => println!(
                "PASS criterion {}: {name} ({detail}) [{:.2?}]",
                i + 1,
                start.elapsed()
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "FAIL criterion {}: {name}: {why} [{:.2?}]",
                    i + 1,
                    start.elapsed()
                );
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
