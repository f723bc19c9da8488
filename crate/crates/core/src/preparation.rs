//! Heralded preparation of the entangled coherent state
//! `(|a,-a> + |-a,a>) / sqrt(2(1 + e^{-4|a|^2}))`.
//!
//! Two schemes are simulated mode by mode:
//!
//! * local heralding: a single photon split over modes 2 and 3 drives cross-Kerr
//!   couplers on the signal modes 0 and 1; modes 2 and 3 are then mixed with
//!   coherent references in modes 4 and 5 and counted;
//! * third party: coherent probes in modes 2 and 3 pass the couplers and are
//!   recombined on an inverse balanced splitter, where one photon in mode 2 and
//!   none in mode 3 herald success.
//!
//! Ancillas are projected as soon as their last gate has acted.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{param, Error, Result};
use crate::fock::{default_cutoff, BeamSplitter, LabeledState, ModeSpec, PureState, PHOTON_MODE_CUTOFF};

/// Photon counts registered on the ancilla detectors, keyed by mode label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Heralds {
    pub counts: Vec<(usize, usize)>,
}

impl Heralds {
    /// One photon behind modes 2 and 3, none behind the references 4 and 5.
    pub fn local() -> Self {
        Heralds {
            counts: vec![(2, 1), (3, 1), (4, 0), (5, 0)],
        }
    }

    /// One photon in mode 2 and none in mode 3 behind the recombining splitter.
    pub fn third_party() -> Self {
        Heralds {
            counts: vec![(2, 1), (3, 0)],
        }
    }

    pub fn count(&self, mode: usize) -> Result<usize> {
        self.counts
            .iter()
            .find(|(m, _)| *m == mode)
            .map(|(_, n)| *n)
            .ok_or_else(|| param("heralds", format!("no count for mode {mode}")))
    }
}

/// Outcome of a heralded preparation attempt.
#[derive(Clone, Debug)]
pub struct PrepResult {
    /// Normalized two-mode signal state, `None` on a zero-probability herald.
    pub state: Option<PureState>,
    pub probability: f64,
    pub heralds: Heralds,
}

/// `|<0|beta><1|beta>|`-type amplitudes of the reference state.
fn vacuum_and_one(beta: C64) -> C64 {
    let g = (-beta.norm_sqr() / 2.0).exp();
    C64::new(g, 0.0) * (beta * g)
}

/// Six-mode cutoffs `[c(a), c(a), 2, 2, c(b), c(b)]` for the local scheme.
pub fn local_cutoffs(alpha: C64, beta: C64) -> Result<ModeSpec> {
    let (ca, cb) = (default_cutoff(alpha), default_cutoff(beta));
    ModeSpec::new(vec![ca, ca, PHOTON_MODE_CUTOFF, PHOTON_MODE_CUTOFF, cb, cb])
}

/// Four-mode cutoffs `[c(a), c(a), c(b), c(b)]` for the third-party scheme.
pub fn third_party_cutoffs(alpha: C64, beta: C64) -> Result<ModeSpec> {
    let (ca, cb) = (default_cutoff(alpha), default_cutoff(beta));
    ModeSpec::new(vec![ca, ca, cb, cb])
}

fn check_signal(signal: &PureState, cutoffs: &ModeSpec) -> Result<()> {
    let m = signal.modes();
    if m.num_modes() != 2 || m.cutoff(0) != cutoffs.cutoff(0) || m.cutoff(1) != cutoffs.cutoff(1) {
        return Err(Error::Dimension(
            "signal must be a two-mode state matching the cutoffs of modes 0 and 1".into(),
        ));
    }
    Ok(())
}

/// Runs the local heralding circuit on an arbitrary two-mode signal and returns
/// the unnormalized conditional signal state.
pub fn local_herald_circuit(
    signal: &PureState,
    beta: C64,
    t: C64,
    r: C64,
    cutoffs: &ModeSpec,
    heralds: &Heralds,
) -> Result<PureState> {
    if cutoffs.num_modes() != 6 {
        return Err(Error::Dimension("local scheme needs six mode cutoffs".into()));
    }
    check_signal(signal, cutoffs)?;
    let split = BeamSplitter::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(-FRAC_1_SQRT_2, 0.0))?;
    let unit = BeamSplitter::new(t, r)?;
    let one = PureState::fock(ModeSpec::single(cutoffs.cutoff(2))?, &[1])?;
    let vac = PureState::fock(ModeSpec::single(cutoffs.cutoff(3))?, &[0])?;
    let ref4 = PureState::coherent(beta, cutoffs.cutoff(4))?;
    let ref5 = PureState::coherent(beta, cutoffs.cutoff(5))?;

    let reg = LabeledState::new(signal.clone(), vec![0, 1])?
        .append(2, &one)?
        .append(3, &vac)?
        .beam_splitter(2, 3, &split)?
        .cross_kerr(0, 2)?
        .cross_kerr(1, 3)?
        .append(4, &ref4)?
        .beam_splitter(2, 4, &unit)?
        .project_fock(4, heralds.count(4)?)?
        .project_fock(2, heralds.count(2)?)?
        .append(5, &ref5)?
        .beam_splitter(3, 5, &unit)?
        .project_fock(5, heralds.count(5)?)?
        .project_fock(3, heralds.count(3)?)?;
    reg.ordered(&[0, 1])
}

/// Runs the third-party circuit on an arbitrary two-mode signal.
pub fn third_party_circuit(signal: &PureState, beta: C64, cutoffs: &ModeSpec, heralds: &Heralds) -> Result<PureState> {
    let reg = third_party_pre_herald(signal, beta, cutoffs)?
        .project_fock(3, heralds.count(3)?)?
        .project_fock(2, heralds.count(2)?)?;
    reg.ordered(&[0, 1])
}

/// The four-mode state just before the third party counts photons.
pub fn third_party_pre_herald(signal: &PureState, beta: C64, cutoffs: &ModeSpec) -> Result<LabeledState> {
    if cutoffs.num_modes() != 4 {
        return Err(Error::Dimension("third-party scheme needs four mode cutoffs".into()));
    }
    check_signal(signal, cutoffs)?;
    // inverse of the balanced splitter U(1/sqrt2, -1/sqrt2)
    let recombine = BeamSplitter::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0))?;
    let probe2 = PureState::coherent(beta, cutoffs.cutoff(2))?;
    let probe3 = PureState::coherent(beta, cutoffs.cutoff(3))?;
    LabeledState::new(signal.clone(), vec![0, 1])?
        .append(2, &probe2)?
        .cross_kerr(0, 2)?
        .append(3, &probe3)?
        .cross_kerr(1, 3)?
        .beam_splitter(2, 3, &recombine)
}

fn finish(out: PureState, heralds: Heralds) -> Result<PrepResult> {
    let probability = out.norm_sqr();
    let state = if probability > 0.0 {
        Some(out.normalized()?)
    } else {
        None
    };
    Ok(PrepResult {
        state,
        probability,
        heralds,
    })
}

fn product_signal(alpha: C64, cutoffs: &ModeSpec) -> Result<PureState> {
    PureState::coherent(alpha, cutoffs.cutoff(0))?.tensor(&PureState::coherent(alpha, cutoffs.cutoff(1))?)
}

/// Local heralded preparation from `|a>_0 |a>_1` with the canonical heralds.
pub fn prepare_entangled_cats(alpha: C64, beta: C64, t: C64, r: C64, cutoffs: &ModeSpec) -> Result<PrepResult> {
    prepare_with_heralds(alpha, beta, t, r, cutoffs, Heralds::local())
}

pub fn prepare_with_heralds(
    alpha: C64,
    beta: C64,
    t: C64,
    r: C64,
    cutoffs: &ModeSpec,
    heralds: Heralds,
) -> Result<PrepResult> {
    let signal = product_signal(alpha, cutoffs)?;
    let out = local_herald_circuit(&signal, beta, t, r, cutoffs, &heralds)?;
    finish(out, heralds)
}

/// Third-party preparation from `|a>_0 |a>_1` with the canonical heralds.
pub fn third_party_prepare(alpha: C64, beta: C64, cutoffs: &ModeSpec) -> Result<PrepResult> {
    let signal = product_signal(alpha, cutoffs)?;
    let heralds = Heralds::third_party();
    let out = third_party_circuit(&signal, beta, cutoffs, &heralds)?;
    finish(out, heralds)
}

/// The conditional operator of a circuit, column by column, on the two-mode
/// signal basis `signal`.
fn operator_by_columns(signal: &ModeSpec, run: impl Fn(&PureState) -> Result<PureState>) -> Result<DMatrix<C64>> {
    if signal.num_modes() != 2 {
        return Err(Error::Dimension("signal register must have two modes".into()));
    }
    let d = signal.total_dim();
    let mut m = DMatrix::zeros(d, d);
    for col in 0..d {
        let occ = [signal.digit(col, 0), signal.digit(col, 1)];
        let out = run(&PureState::fock(signal.clone(), &occ)?)?;
        for (row, a) in out.amplitudes().iter().enumerate() {
            m[(row, col)] = *a;
        }
    }
    Ok(m)
}

/// Numerically contracted local conditional operator on the signal modes.
pub fn conditional_operator_matrix(signal: &ModeSpec, beta: C64, t: C64, r: C64) -> Result<DMatrix<C64>> {
    let cb = default_cutoff(beta);
    let cutoffs = ModeSpec::new(vec![
        signal.cutoff(0),
        signal.cutoff(1),
        PHOTON_MODE_CUTOFF,
        PHOTON_MODE_CUTOFF,
        cb,
        cb,
    ])?;
    let heralds = Heralds::local();
    operator_by_columns(signal, |s| local_herald_circuit(s, beta, t, r, &cutoffs, &heralds))
}

/// Numerically contracted third-party conditional operator on the signal modes.
pub fn third_party_operator_matrix(signal: &ModeSpec, beta: C64) -> Result<DMatrix<C64>> {
    let cb = default_cutoff(beta);
    let cutoffs = ModeSpec::new(vec![signal.cutoff(0), signal.cutoff(1), cb, cb])?;
    let heralds = Heralds::third_party();
    operator_by_columns(signal, |s| third_party_circuit(s, beta, &cutoffs, &heralds))
}

fn parity_sum_diagonal(signal: &ModeSpec, prefactor: C64) -> DMatrix<C64> {
    let d = signal.total_dim();
    DMatrix::from_fn(d, d, |i, j| {
        if i != j {
            return C64::new(0.0, 0.0);
        }
        let sign = |n: usize| if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        prefactor * (sign(signal.digit(i, 0)) + sign(signal.digit(i, 1)))
    })
}

/// `T R <0|b><1|b> / sqrt2 [(-1)^{n_0} + (-1)^{n_1}]`.
pub fn closed_form_operator(signal: &ModeSpec, beta: C64, t: C64, r: C64) -> DMatrix<C64> {
    parity_sum_diagonal(signal, t * r * vacuum_and_one(beta) * FRAC_1_SQRT_2)
}

/// `<0|b><1|b> / sqrt2 [(-1)^{n_0} + (-1)^{n_1}]`.
pub fn third_party_closed_form(signal: &ModeSpec, beta: C64) -> DMatrix<C64> {
    parity_sum_diagonal(signal, vacuum_and_one(beta) * FRAC_1_SQRT_2)
}

/// Success probability `|T R <0|b><1|b>|^2 (1 + e^{-4|a|^2})` of the local scheme.
pub fn preparation_probability(alpha: C64, beta: C64, t: C64, r: C64) -> f64 {
    (t * r * vacuum_and_one(beta)).norm_sqr() * (1.0 + (-4.0 * alpha.norm_sqr()).exp())
}

/// `(1 + e^{-4|a|^2}) / (8e)`, the optimum over `|T|^2` and `|b|^2`.
pub fn p_max(alpha: C64) -> f64 {
    (1.0 + (-4.0 * alpha.norm_sqr()).exp()) / (8.0 * std::f64::consts::E)
}

/// Success probability `2 |<0|b><1|b>|^2 (1 + e^{-4|a|^2})` of the third-party scheme.
pub fn third_party_probability(alpha: C64, beta: C64) -> f64 {
    2.0 * vacuum_and_one(beta).norm_sqr() * (1.0 + (-4.0 * alpha.norm_sqr()).exp())
}

/// The target state `(|a,-a> + |-a,a>) / sqrt(2(1 + e^{-4|a|^2}))` built directly.
pub fn entangled_cat_state(alpha: C64, cutoff: usize) -> Result<PureState> {
    let plus = PureState::coherent(alpha, cutoff)?;
    let minus = PureState::coherent(-alpha, cutoff)?;
    let a = plus.tensor(&minus)?;
    let b = minus.tensor(&plus)?;
    let norm = 1.0 / (2.0 * (1.0 + (-4.0 * alpha.norm_sqr()).exp())).sqrt();
    let amps = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x + y) * norm)
        .collect();
    PureState::from_amplitudes(a.modes().clone(), amps)
}

/// Joint distribution of every herald pattern of the local scheme, with counts
/// on modes 2, 3 up to their cutoff and on modes 4, 5 up to theirs.
pub fn herald_distribution(alpha: C64, beta: C64, t: C64, r: C64, cutoffs: &ModeSpec) -> Result<Vec<(Heralds, f64)>> {
    if cutoffs.num_modes() != 6 {
        return Err(Error::Dimension("local scheme needs six mode cutoffs".into()));
    }
    let split = BeamSplitter::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(-FRAC_1_SQRT_2, 0.0))?;
    let unit = BeamSplitter::new(t, r)?;
    let reg = LabeledState::new(product_signal(alpha, cutoffs)?, vec![0, 1])?
        .append(2, &PureState::fock(ModeSpec::single(cutoffs.cutoff(2))?, &[1])?)?
        .append(3, &PureState::fock(ModeSpec::single(cutoffs.cutoff(3))?, &[0])?)?
        .beam_splitter(2, 3, &split)?
        .cross_kerr(0, 2)?
        .cross_kerr(1, 3)?
        .append(4, &PureState::coherent(beta, cutoffs.cutoff(4))?)?
        .append(5, &PureState::coherent(beta, cutoffs.cutoff(5))?)?
        .beam_splitter(2, 4, &unit)?
        .beam_splitter(3, 5, &unit)?;
    let state = reg.ordered(&[2, 3, 4, 5, 0, 1])?;
    let modes = state.modes();
    let signal_dim = modes.dim(4) * modes.dim(5);
    let mut out = Vec::new();
    for (block, chunk) in state.amplitudes().chunks(signal_dim).enumerate() {
        let idx = block * signal_dim;
        let counts = (0..4).map(|m| (m + 2, modes.digit(idx, m))).collect();
        let p = chunk.iter().map(|a| a.norm_sqr()).sum();
        out.push((Heralds { counts }, p));
    }
    Ok(out)
}
