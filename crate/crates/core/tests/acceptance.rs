//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//! Run with `cargo test -p catlink-core --test acceptance`.

use std::f64::consts::{E, FRAC_1_SQRT_2, PI};
use std::time::{Duration, Instant};

use catlink_core::channel::{fit_param_state, propagate_analytic, propagate_discrete, to_density_matrix};
use catlink_core::detection::{
    backaction_entanglement, backaction_state, complementarity_demo, contrast, entanglement_zero_crossing,
    interference_intensity, interference_intensity_fock, parity_coincidence, tradeoff_product,
};
use catlink_core::device::{purify_pair, qubit_outcome_probability, qubit_update, DeviceOutcome};
use catlink_core::preparation::{entangled_cat_state, local_cutoffs, prepare_entangled_cats};
use catlink_core::qubit::{ensemble, entanglement_of_formation, mean_steps, purification_step, DEFAULT_MAX_STEPS};
use catlink_core::{default_cutoff, ChannelSpec, ParamState, C64};

// Tolerances and budgets.
const PREP_REL_TOL: f64 = 0.01;
const PREP_TIME: Duration = Duration::from_secs(10);
const FIDELITY_TOL: f64 = 1e-6;
const FAMILY_TOL: f64 = 1e-6;
const PARAM_TOL: f64 = 1e-8;
const TABLE_EPS: f64 = 1e-5;
const TABLE_TRIALS: usize = 10_000;
const TABLE_SE: f64 = 2.0;
const TABLE_TIME: Duration = Duration::from_secs(60);
const TABLE: [(f64, f64); 9] = [
    (0.9, 5.0),
    (0.8, 7.0),
    (0.7, 10.0),
    (0.6, 14.0),
    (0.5, 23.0),
    (0.4, 37.0),
    (0.3, 66.0),
    (0.2, 154.0),
    (0.1, 609.0),
];
const MARTINGALE_TOL: f64 = 1e-14;
const ABSORPTION_WALKS: usize = 100_000;
const ABSORPTION_SIGMA: f64 = 3.0;
const DEVICE_ALPHA: f64 = 2.5;
const VISIBILITY_TOL: f64 = 1e-10;
const INTENSITY_TOL: f64 = 1e-6;
const CROSSING_BRACKET: (f64, f64) = (0.5, 1.5);
const SLOPE_TARGET: f64 = 2.0;
const SLOPE_TOL: f64 = 0.1;
const MI_TOL: f64 = 1e-3;
const SEED: u64 = 20_240_601;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

type Check = fn() -> (bool, String);

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, n: usize, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "criterion {n:>2} {:<4} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
}

fn criterion_1() -> (bool, String) {
    let alpha = c(2.0);
    let (t, r, beta) = (c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2));
    let start = Instant::now();
    let result = prepare_entangled_cats(alpha, beta, t, r, &local_cutoffs(alpha, beta).unwrap()).unwrap();
    let elapsed = start.elapsed();
    let target = (1.0 + (-16.0f64).exp()) / (8.0 * E);
    let rel = (result.probability - target).abs() / target;
    (
        rel < PREP_REL_TOL && elapsed < PREP_TIME,
        format!(
            "p = {:.10}, target {:.10}, rel. dev. {rel:.2e}, {:.2} s",
            result.probability,
            target,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> (bool, String) {
    let h = c(FRAC_1_SQRT_2);
    let mut worst: f64 = 1.0;
    for alpha in [1.0, 2.0] {
        let a = c(alpha);
        let cutoffs = local_cutoffs(a, h).unwrap();
        let state = prepare_entangled_cats(a, h, h, h, &cutoffs).unwrap().state.unwrap();
        let target = entangled_cat_state(a, cutoffs.cutoff(0)).unwrap();
        worst = worst.min(state.fidelity(&target).unwrap());
    }
    (
        worst >= 1.0 - FIDELITY_TOL,
        format!("min fidelity 1 - {:.2e}", 1.0 - worst),
    )
}

fn criterion_3() -> (bool, String) {
    let mut worst_residual: f64 = 0.0;
    let mut worst_param: f64 = 0.0;
    for alpha in [1.0, 2.0] {
        let cutoff = default_cutoff(c(alpha));
        let ps = ParamState::pure(c(alpha));
        let rho = to_density_matrix(&ps, cutoff).unwrap();
        for t in [0.8, 0.95] {
            for x in [0.05, 1.0] {
                for steps in [1, 4, 16] {
                    let spec = ChannelSpec::new(t, t, 1.0, x, steps).unwrap();
                    let fit = fit_param_state(&propagate_discrete(&rho, &spec).unwrap(), ps.base_alpha).unwrap();
                    let exact = propagate_analytic(&ps, &spec);
                    worst_residual = worst_residual.max(fit.residual);
                    let d = (fit.state.r - exact.r)
                        .abs()
                        .max((fit.state.alpha0 - exact.alpha0).norm())
                        .max((fit.state.alpha1 - exact.alpha1).norm());
                    worst_param = worst_param.max(d);
                }
            }
        }
    }
    (
        worst_residual < FAMILY_TOL && worst_param < PARAM_TOL,
        format!("max fit residual {worst_residual:.2e}, max parameter deviation {worst_param:.2e}"),
    )
}

fn criterion_4() -> (bool, String) {
    // the table lists rounded means: accept when mean +- 2 SE meets [v - 1/2, v + 1/2]
    let start = Instant::now();
    let mut ok = true;
    let mut cells = Vec::new();
    for (r, v) in TABLE {
        let s = mean_steps(r, TABLE_EPS, TABLE_TRIALS, SEED).unwrap();
        let lo = s.mean - TABLE_SE * s.stderr;
        let hi = s.mean + TABLE_SE * s.stderr;
        let hit = hi >= v - 0.5 && lo <= v + 0.5 && s.unconverged == 0;
        ok &= hit;
        cells.push(format!(
            "{r}:{:.2}+-{:.2}/{v}{}",
            s.mean,
            s.stderr,
            if hit { "" } else { "!" }
        ));
    }
    let elapsed = start.elapsed();
    (
        ok && elapsed < TABLE_TIME,
        format!("{} ({:.1} s)", cells.join(" "), elapsed.as_secs_f64()),
    )
}

fn criterion_5() -> (bool, String) {
    let grid: Vec<f64> = (0..50).map(|i| -0.98 + 1.96 * i as f64 / 49.0).collect();
    let mut worst: f64 = 0.0;
    for &r in &grid {
        for &big_r in &grid {
            let (rp, pp) = purification_step(big_r, r, true).unwrap();
            let (rm, pm) = purification_step(big_r, r, false).unwrap();
            worst = worst.max((pp * rp + pm * rm - big_r).abs());
        }
    }
    let mut ok = worst <= MARTINGALE_TOL;
    let mut cells = Vec::new();
    for r in [0.2, 0.5, 0.8] {
        let stats = ensemble(r, TABLE_EPS, ABSORPTION_WALKS, SEED + 1, DEFAULT_MAX_STEPS).unwrap();
        let p = (1.0 + r) / 2.0;
        let sigma = (p * (1.0 - p) / ABSORPTION_WALKS as f64).sqrt();
        let z = (stats.plus_fraction - p) / sigma;
        ok &= z.abs() <= ABSORPTION_SIGMA && stats.unconverged == 0;
        cells.push(format!("r={r}: {:.4} vs {p} ({z:+.2} sigma)", stats.plus_fraction));
    }
    (ok, format!("martingale max err {worst:.1e}; {}", cells.join(", ")))
}

fn criterion_6() -> (bool, String) {
    let alpha = c(DEVICE_ALPHA);
    let cutoff = default_cutoff(alpha);
    let tol = f64::max(1e-4, 10.0 * (-4.0 * DEVICE_ALPHA * DEVICE_ALPHA).exp());
    let mut worst_r: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    for big_r in [0.3, 0.7] {
        for r in [0.3, 0.7] {
            let signal = ParamState::pure(alpha).with_r(big_r).unwrap();
            for o in DeviceOutcome::all() {
                let res = purify_pair(&signal, r, &o, alpha, cutoff).unwrap();
                worst_r = worst_r.max((res.fit.state.r - qubit_update(big_r, r, &o)).abs());
                worst_p = worst_p.max((res.probability - qubit_outcome_probability(big_r, r, &o)).abs());
            }
        }
    }
    (
        worst_r < tol && worst_p < tol,
        format!("max |dR'| {worst_r:.2e}, max |dp| {worst_p:.2e}, tolerance {tol:.0e}"),
    )
}

fn criterion_7() -> (bool, String) {
    let mut worst_vis: f64 = 0.0;
    for alpha in [1.0, 2.0] {
        for r in [-0.8, -0.3, 0.3, 0.8] {
            let ps = ParamState::pure(c(alpha)).with_r(r).unwrap();
            let m = parity_coincidence(&ps, default_cutoff(c(alpha))).unwrap();
            for g in [0.3, 0.6, 1.0] {
                worst_vis = worst_vis.max((contrast(&ps, c(g)).0 - m.abs()).abs());
            }
        }
    }
    let mut worst_int: f64 = 0.0;
    for r in [-0.5, 0.0, 0.5, 1.0] {
        let ps = ParamState::pure(c(1.2)).with_r(r).unwrap();
        for k in 0..8 {
            let d = k as f64 * PI / 4.0;
            let fock = interference_intensity_fock(&ps, c(0.6), d, default_cutoff(c(1.2))).unwrap();
            worst_int = worst_int.max((fock - interference_intensity(&ps, c(0.6), d)).abs());
        }
    }
    (
        worst_vis < VISIBILITY_TOL && worst_int < INTENSITY_TOL,
        format!("max |V - |M|| {worst_vis:.2e}, max |I_fock - I| {worst_int:.2e}"),
    )
}

fn criterion_8() -> (bool, String) {
    // Fock-level curve at large separation against the closed form
    let alpha = c(3.0);
    let ps = ParamState::pure(alpha);
    let mut worst: f64 = 0.0;
    for g in [0.25, 0.5, 1.0, 1.5] {
        let (_, mix) = backaction_state(&ps, c(g), default_cutoff(alpha)).unwrap();
        worst = worst.max((entanglement_of_formation(&mix) - backaction_entanglement(1.0, c(g))).abs());
    }
    let crossing = entanglement_zero_crossing(1.0, 0.0, 10.0);
    let below = (1..=400)
        .map(|k| k as f64 * 0.01)
        .find(|&g| backaction_entanglement(1.0, c(g)) < 1e-3);
    let pass = matches!(crossing, Some(g) if (CROSSING_BRACKET.0..=CROSSING_BRACKET.1).contains(&g));
    let detail = match crossing {
        Some(g) => format!("zero crossing at |g| = {g:.4}"),
        None => format!(
            "no zero crossing: C(2|g|^2) = (1 + e^(-4|g|^2))/2 > 1/2 for all |g|, so E(|g|) > 0; \
             E(1) = {:.2e}, E < 1e-3 from |g| = {}, Fock vs closed form {worst:.1e}",
            backaction_entanglement(1.0, c(1.0)),
            below.map_or("never".into(), |g| format!("{g:.2}"))
        ),
    };
    (pass, detail)
}

fn criterion_9() -> (bool, String) {
    let n = 16;
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let g = 0.05 * 4f64.powf(i as f64 / (n - 1) as f64);
            (g.ln(), tradeoff_product(c(g), 0.5).unwrap().ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (
        (slope - SLOPE_TARGET).abs() <= SLOPE_TOL,
        format!("log-log slope {slope:.4}"),
    )
}

fn criterion_10() -> (bool, String) {
    let alpha = c(3.0);
    let report = complementarity_demo(alpha, default_cutoff(alpha)).unwrap();
    (
        (report.loss_only - 1.0).abs() <= MI_TOL && report.both < MI_TOL,
        format!(
            "MI bits: none {:.4}, loss {:.6}, dephasing {:.4}, both {:.2e}",
            report.none, report.loss_only, report.dephasing_only, report.both
        ),
    )
}

fn main() {
    let mut report = Report { failures: 0 };
    let criteria: [(&str, Check); 10] = [
        ("preparation probability", criterion_1),
        ("output-state fidelity", criterion_2),
        ("channel equivalence", criterion_3),
        ("purification table", criterion_4),
        ("martingale and absorption", criterion_5),
        ("Fock/qubit purification agreement", criterion_6),
        ("detection identity", criterion_7),
        ("back-action zero crossing", criterion_8),
        ("trade-off scaling", criterion_9),
        ("complementarity", criterion_10),
    ];
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (pass, detail) = run();
        report.record(i + 1, name, pass, detail);
    }
    println!("acceptance: {} of 10 criteria pass", 10 - report.failures);
    if report.failures > 0 {
        std::process::exit(1);
    }
}
