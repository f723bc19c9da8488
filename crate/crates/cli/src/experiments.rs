//! The named experiments. Each reads its parameters through [`Params`], runs
//! the library and returns one table.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use catlink_core::channel::{
    fit_param_state, propagate_analytic, propagate_discrete, short_line_purity, to_density_matrix,
};
use catlink_core::detection::{
    backaction_entanglement, complementarity_demo, cosh_sinh_weights, interference_pattern, probe_cutoff,
    state_deviation, ProbeState,
};
use catlink_core::device::{feedback_ensemble, feedback_loop, qubit_picture_holds};
use catlink_core::fock::coherent_state;
use catlink_core::preparation::{
    entangled_cat_state, local_cutoffs, p_max, preparation_probability, prepare_entangled_cats,
};
use catlink_core::qubit::{bell_mixture_from_purity, ensemble, entanglement_of_formation, run_walk, PurityWalk};
use catlink_core::{default_cutoff, ChannelSpec, Level, ModeSpec, ParamState, Tolerances, C64};

use crate::config::Params;
use crate::output::{Cell, Table};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Prepare,
    Transmit,
    PurifyWalk,
    PurifyFock,
    MeanSteps,
    EofCurve,
    BackactionCurve,
    Interference,
    Complementarity,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Prepare,
        Experiment::Transmit,
        Experiment::PurifyWalk,
        Experiment::PurifyFock,
        Experiment::MeanSteps,
        Experiment::EofCurve,
        Experiment::BackactionCurve,
        Experiment::Interference,
        Experiment::Complementarity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Prepare => "prepare",
            Experiment::Transmit => "transmit",
            Experiment::PurifyWalk => "purify-walk",
            Experiment::PurifyFock => "purify-fock",
            Experiment::MeanSteps => "mean-steps",
            Experiment::EofCurve => "eof-curve",
            Experiment::BackactionCurve => "backaction-curve",
            Experiment::Interference => "interference",
            Experiment::Complementarity => "complementarity",
        }
    }

    /// Parameters the experiment reads.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Experiment::Prepare => &["alpha", "beta", "t", "cutoff"],
            Experiment::Transmit => &["alpha", "t0", "t1", "l_over_l", "steps", "fock", "cutoff"],
            Experiment::PurifyWalk => &["r", "epsilon", "max_steps", "seed"],
            Experiment::PurifyFock => &["alpha", "r", "signal_r", "epsilon", "max_steps", "seed", "level"],
            Experiment::MeanSteps => &["r", "epsilon", "trials", "max_steps", "seed", "level", "alpha"],
            Experiment::EofCurve => &["r"],
            Experiment::BackactionCurve => &["r", "gamma"],
            Experiment::Interference => &["alpha", "r", "gamma", "dphi", "fock", "cutoff"],
            Experiment::Complementarity => &["alpha", "cutoff"],
        }
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::config("experiment", format!("unknown experiment `{s}`")))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub struct Outcome {
    pub table: Table,
    /// False when some walk hit its step budget.
    pub converged: bool,
}

impl Outcome {
    fn done(table: Table) -> Self {
        Outcome { table, converged: true }
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn warn(msg: impl fmt::Display) {
    eprintln!("warning: {msg}");
}

fn warn_truncation(alpha: f64, cutoff: usize) -> Result<(), CliError> {
    let leak = coherent_state(c(alpha), cutoff)?.leakage();
    let tol = Tolerances::default().leak;
    if leak > tol {
        warn(format_args!(
            "cutoff {cutoff} under-truncates alpha={alpha}: top-level weight {leak:.2e} > {tol:.0e} (recommended {})",
            default_cutoff(c(alpha))
        ));
    }
    Ok(())
}

fn warn_qubit_picture(alpha: f64) {
    if !qubit_picture_holds(c(alpha)) {
        warn(format_args!(
            "alpha={alpha}: e^(-|alpha|^2) = {:.2e}, coherent components overlap and the qubit picture is inaccurate",
            (-alpha * alpha).exp()
        ));
    }
}

fn cutoff_for(p: &Params, alpha: f64) -> Result<usize, CliError> {
    let cutoff = p.opt_usize("cutoff", 1)?.unwrap_or_else(|| default_cutoff(c(alpha)));
    warn_truncation(alpha, cutoff)?;
    Ok(cutoff)
}

fn level(p: &Params) -> Result<Level, CliError> {
    Ok(match p.choice("level", "fock", &["fock", "qubit"])?.as_str() {
        "fock" => Level::Fock,
        _ => Level::Qubit,
    })
}

fn flag(p: &Params, key: &'static str) -> Result<bool, CliError> {
    Ok(p.choice(key, "false", &["true", "false"])? == "true")
}

pub fn run(exp: Experiment, p: &Params) -> Result<Outcome, CliError> {
    let out = match exp {
        Experiment::Prepare => prepare(p),
        Experiment::Transmit => transmit(p),
        Experiment::PurifyWalk => purify_walk(p),
        Experiment::PurifyFock => purify_fock(p),
        Experiment::MeanSteps => mean_steps(p),
        Experiment::EofCurve => eof_curve(p),
        Experiment::BackactionCurve => backaction_curve(p),
        Experiment::Interference => interference(p),
        Experiment::Complementarity => complementarity(p),
    }?;
    if !out.converged {
        warn("some walks reached max_steps before converging");
    }
    Ok(out)
}

fn prepare(p: &Params) -> Result<Outcome, CliError> {
    let alphas = p.grid_in("alpha", "2", 0.0, 8.0)?;
    let beta = p.f64_in("beta", &FRAC_1_SQRT_2.to_string(), 0.0, 8.0)?;
    let t = p.f64_in("t", &FRAC_1_SQRT_2.to_string(), 0.0, 1.0)?;
    let cutoff = p.opt_usize("cutoff", 1)?;
    let refl = (1.0 - t * t).sqrt();
    let mut table = Table::new(&["alpha", "probability", "closed_form", "p_max", "fidelity", "leakage"]);
    for alpha in alphas {
        let mut modes = local_cutoffs(c(alpha), c(beta))?;
        if let Some(n) = cutoff {
            let mut cs = modes.cutoffs().to_vec();
            cs[0] = n;
            cs[1] = n;
            modes = ModeSpec::new(cs)?;
        }
        warn_truncation(alpha, modes.cutoff(0))?;
        warn_truncation(beta, modes.cutoff(4))?;
        let res = prepare_entangled_cats(c(alpha), c(beta), c(t), c(refl), &modes)?;
        let (fidelity, leakage) = match &res.state {
            Some(state) => (
                state.fidelity(&entangled_cat_state(c(alpha), modes.cutoff(0))?)?,
                state.leakage(),
            ),
            None => (f64::NAN, f64::NAN),
        };
        table.push(vec![
            alpha.into(),
            res.probability.into(),
            preparation_probability(c(alpha), c(beta), c(t), c(refl)).into(),
            p_max(c(alpha)).into(),
            fidelity.into(),
            leakage.into(),
        ]);
    }
    Ok(Outcome::done(table))
}

fn transmit(p: &Params) -> Result<Outcome, CliError> {
    let alpha = p.f64_in("alpha", "2", 0.0, 8.0)?;
    let t0 = p.f64("t0", "0.95")?;
    let t1 = p.f64("t1", "0.95")?;
    let lengths = p.grid_in("l_over_l", "0:1:0.05", 0.0, f64::MAX)?;
    let steps = p.usize("steps", "8", 1)?;
    let fock = flag(p, "fock")?;
    let cutoff = if fock { Some(cutoff_for(p, alpha)?) } else { None };
    let ps = ParamState::pure(c(alpha));
    let mut columns = vec!["l_over_l", "r", "alpha0", "alpha1", "short_line_r"];
    if fock {
        columns.extend(["fock_r", "fock_alpha0", "fock_alpha1", "fock_residual"]);
    }
    let mut table = Table::new(&columns);
    for l in lengths {
        let spec = ChannelSpec::new(t0, t1, 1.0, l, steps)?;
        let out = propagate_analytic(&ps, &spec);
        let mut row: Vec<Cell> = vec![
            l.into(),
            out.r.into(),
            out.alpha0.re.into(),
            out.alpha1.re.into(),
            short_line_purity(c(alpha), &spec).into(),
        ];
        if let Some(n) = cutoff {
            let rho = propagate_discrete(&to_density_matrix(&ps, n)?, &spec)?;
            let fit = fit_param_state(&rho, ps.base_alpha)?;
            row.extend([
                fit.state.r.into(),
                fit.state.alpha0.re.into(),
                fit.state.alpha1.re.into(),
                fit.residual.into(),
            ]);
        }
        table.push(row);
    }
    Ok(Outcome::done(table))
}

fn trajectory(walk: &PurityWalk) -> Outcome {
    let mut table = Table::new(&["n", "r_n", "sign", "p"]);
    table.push(vec![0usize.into(), walk.initial.into(), 0i64.into(), 1.0.into()]);
    for (i, s) in walk.steps.iter().enumerate() {
        let sign: i64 = if s.same_outcome { 1 } else { -1 };
        table.push(vec![(i + 1).into(), s.purity.into(), sign.into(), s.probability.into()]);
    }
    Outcome {
        table,
        converged: walk.converged,
    }
}

fn purify_walk(p: &Params) -> Result<Outcome, CliError> {
    let r = p.f64_in("r", "0.5", -1.0, 1.0)?;
    let eps = p.f64_in("epsilon", "1e-5", f64::MIN_POSITIVE, 0.5)?;
    let max_steps = p.usize("max_steps", "1000000", 1)?;
    let seed = p.u64("seed", "1")?;
    Ok(trajectory(&run_walk(r, eps, max_steps, seed)?))
}

fn purify_fock(p: &Params) -> Result<Outcome, CliError> {
    let alpha = p.f64_in("alpha", "3", 0.0, 8.0)?;
    let r = p.f64_in("r", "0.5", -1.0, 1.0)?;
    let signal_r = p.f64_in("signal_r", &r.to_string(), -1.0, 1.0)?;
    let eps = p.f64_in("epsilon", "1e-5", f64::MIN_POSITIVE, 0.5)?;
    let max_steps = p.usize("max_steps", "1000000", 1)?;
    let seed = p.u64("seed", "1")?;
    let level = level(p)?;
    warn_qubit_picture(alpha);
    Ok(trajectory(&feedback_loop(
        signal_r,
        r,
        eps,
        c(alpha),
        seed,
        level,
        max_steps,
    )?))
}

fn mean_steps(p: &Params) -> Result<Outcome, CliError> {
    let rs = p.grid_in("r", "0.9:0.1:-0.1", -1.0, 1.0)?;
    let eps = p.f64_in("epsilon", "1e-5", f64::MIN_POSITIVE, 0.5)?;
    let trials = p.usize("trials", "10000", 1)?;
    let max_steps = p.usize("max_steps", "1000000", 1)?;
    let seed = p.u64("seed", "1")?;
    let level = p.choice("level", "qubit", &["qubit", "fock"])?;
    let alpha = if level == "fock" {
        let a = p.f64_in("alpha", "3", 0.0, 8.0)?;
        warn_qubit_picture(a);
        Some(a)
    } else {
        None
    };
    let mut table = Table::new(&["r", "nbar", "stderr", "trials", "unconverged", "plus_fraction"]);
    let mut converged = true;
    for r in rs {
        let s = match alpha {
            None => ensemble(r, eps, trials, seed, max_steps)?,
            Some(a) => feedback_ensemble(r, r, eps, c(a), trials, seed, Level::Fock, max_steps)?,
        };
        converged &= s.unconverged == 0;
        table.push(vec![
            r.into(),
            s.mean.into(),
            s.stderr.into(),
            s.trials.into(),
            s.unconverged.into(),
            s.plus_fraction.into(),
        ]);
    }
    Ok(Outcome { table, converged })
}

fn eof_curve(p: &Params) -> Result<Outcome, CliError> {
    let rs = p.grid_in("r", "0:1:0.01", -1.0, 1.0)?;
    let mut table = Table::new(&["r", "e"]);
    for r in rs {
        let e = entanglement_of_formation(&bell_mixture_from_purity(r)?);
        table.push(vec![r.into(), e.into()]);
    }
    Ok(Outcome::done(table))
}

fn backaction_curve(p: &Params) -> Result<Outcome, CliError> {
    let r = p.f64_in("r", "1", -1.0, 1.0)?;
    let gammas = p.grid_in("gamma", "0:2:0.02", 0.0, 8.0)?;
    let mut table = Table::new(&["gamma", "c", "e", "state_deviation"]);
    for g in gammas {
        let (cw, _) = cosh_sinh_weights(2.0 * g * g);
        table.push(vec![
            g.into(),
            cw.into(),
            backaction_entanglement(r, c(g)).into(),
            state_deviation(c(g)).into(),
        ]);
    }
    Ok(Outcome::done(table))
}

fn interference(p: &Params) -> Result<Outcome, CliError> {
    let alpha = p.f64_in("alpha", "2", 0.0, 8.0)?;
    let r = p.f64_in("r", "1", -1.0, 1.0)?;
    let gamma = p.f64_in("gamma", "0.6", 0.0, 8.0)?;
    let dphis = p.grid("dphi", "0:2pi:0.02pi")?;
    let fock = flag(p, "fock")?;
    let ps = ParamState::pure(c(alpha)).with_r(r)?;
    let pattern = interference_pattern(&ps, c(gamma), &dphis);
    let probe = if fock {
        let n = cutoff_for(p, alpha)?;
        warn_truncation(gamma, probe_cutoff(c(gamma)))?;
        Some(ProbeState::new(&ps, c(gamma), n, probe_cutoff(c(gamma)))?)
    } else {
        None
    };
    let mut columns = vec!["dphi", "intensity", "contrast", "sign_of_r"];
    if fock {
        columns.push("intensity_fock");
    }
    let mut table = Table::new(&columns);
    for (d, i) in pattern.samples {
        let mut row: Vec<Cell> = vec![
            d.into(),
            i.into(),
            pattern.contrast.into(),
            (pattern.sign_of_r as i64).into(),
        ];
        if let Some(probe) = &probe {
            row.push(probe.intensity(d)?.into());
        }
        table.push(row);
    }
    Ok(Outcome::done(table))
}

fn complementarity(p: &Params) -> Result<Outcome, CliError> {
    let alpha = p.f64_in("alpha", "3", 0.0, 8.0)?;
    let cutoff = cutoff_for(p, alpha)?;
    warn_qubit_picture(alpha);
    let rep = complementarity_demo(c(alpha), cutoff)?;
    let mut table = Table::new(&["case", "loss", "dephasing", "mutual_information"]);
    for (case, loss, deph, mi) in [
        ("none", 0i64, 0i64, rep.none),
        ("loss_only", 1, 0, rep.loss_only),
        ("dephasing_only", 0, 1, rep.dephasing_only),
        ("both", 1, 1, rep.both),
    ] {
        table.push(vec![case.into(), loss.into(), deph.into(), mi.into()]);
    }
    if rep.leakage > Tolerances::default().leak {
        warn(format_args!("weight {:.2e} outside the qubit span", rep.leakage));
    }
    Ok(Outcome::done(table))
}
