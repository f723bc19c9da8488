//! Fock-level purification hardware.
//!
//! Each party owns a Mach-Zehnder interferometer (modes 4, 6) fed with one
//! photon, two cross-Kerr couplers (signal mode with 6, fresh mode 2 with 4)
//! and a discrimination unit that mixes the fresh mode with a reference `|a>`
//! (mode 8) and watches mode 8 with an ON/OFF detector.
//!
//! All conditional operators on the signal are functions of the photon-number
//! parity only, so every map here is a Schur multiplier indexed by parities.
//! That makes the Fock-basis and even/odd cat-basis descriptions identical.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{fit_param_state, to_density_matrix, Fit, ParamState};
use crate::error::{param, Error, Result};
use crate::fock::{coherent_amplitudes, default_cutoff, BeamSplitter, LabeledState, ModeSpec, PureState};
use crate::preparation::third_party_closed_form;
use crate::qubit::{summarize, walk_rng, walk_with, PurityWalk, StepStats, WalkStep};

/// ON/OFF clicks of both devices: `j` from the interferometer, `k` from the
/// discrimination unit; index 0 is Claire, 1 is Denis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DeviceOutcome {
    pub j0: u8,
    pub k0: u8,
    pub j1: u8,
    pub k1: u8,
}

impl DeviceOutcome {
    pub fn new(j0: u8, k0: u8, j1: u8, k1: u8) -> Result<Self> {
        if [j0, k0, j1, k1].iter().any(|&b| b > 1) {
            return Err(param("outcome", "clicks are 0 or 1"));
        }
        Ok(DeviceOutcome { j0, k0, j1, k1 })
    }

    /// All sixteen outcomes in lexicographic order of `(j0, k0, j1, k1)`.
    pub fn all() -> impl Iterator<Item = DeviceOutcome> {
        (0u8..16).map(|b| DeviceOutcome {
            j0: (b >> 3) & 1,
            k0: (b >> 2) & 1,
            j1: (b >> 1) & 1,
            k1: b & 1,
        })
    }

    /// `j0 + j1` even: the purity grows toward `+1`.
    pub fn is_even(&self) -> bool {
        (self.j0 + self.j1).is_multiple_of(2)
    }

    pub fn sign(&self) -> f64 {
        if self.is_even() {
            1.0
        } else {
            -1.0
        }
    }
}

/// How the fresh mode is read out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Discrimination {
    /// Projection onto `<(-1)^k a|`.
    Projective,
    /// Reference pulse, balanced splitter and ON/OFF detector.
    #[default]
    OnOff,
}

/// `e^{-|a|^2}` above which the two coherent components are too close for the
/// qubit picture.
pub const QUBIT_PICTURE_OVERLAP: f64 = 1e-2;

pub fn qubit_picture_holds(alpha: C64) -> bool {
    (-alpha.norm_sqr()).exp() <= QUBIT_PICTURE_OVERLAP
}

fn check_bit(name: &'static str, b: u8) -> Result<()> {
    if b > 1 {
        return Err(param(name, "must be 0 or 1"));
    }
    Ok(())
}

fn check_sign(sign: i8) -> Result<f64> {
    match sign {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => Err(param("sign", "must be +1 or -1")),
    }
}

fn mach_zehnder() -> Result<(BeamSplitter, BeamSplitter)> {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    Ok((BeamSplitter::new(h, -h)?, BeamSplitter::new(h, h)?))
}

/// Amplitudes `[via mode 4, via mode 6]` of the photon reaching the detector
/// pattern `<j|_4 <1-j|_6`.
pub fn photon_paths(j: u8) -> Result<[C64; 2]> {
    check_bit("j", j)?;
    let (split, merge) = mach_zehnder()?;
    let modes = ModeSpec::new(vec![1, 1])?;
    let input = LabeledState::new(PureState::fock(modes.clone(), &[1, 0])?, vec![4, 6])?.beam_splitter(4, 6, &split)?;
    let j = j as usize;
    let mut out = [C64::new(0.0, 0.0); 2];
    for (slot, occ) in out.iter_mut().zip([[1usize, 0], [0, 1]]) {
        let amp = input.state().amplitude(&occ)?;
        let path = LabeledState::new(PureState::fock(modes.clone(), &occ)?, vec![4, 6])?.beam_splitter(6, 4, &merge)?;
        *slot = amp * path.state().amplitude(&[j, 1 - j])?;
    }
    Ok(out)
}

/// `Y0(sign a | j, k)` contracted from the circuit `U64 K24 K06 U46` with the
/// fresh mode projected onto `<(-1)^k a|`. Diagonal, `(cutoff+1)^2`.
pub fn conditional_single_mode_op(sign: i8, j: u8, k: u8, alpha: C64, cutoff: usize) -> Result<DMatrix<C64>> {
    let s = check_sign(sign)?;
    check_bit("j", j)?;
    check_bit("k", k)?;
    let (split, merge) = mach_zehnder()?;
    let c2 = default_cutoff(alpha);
    let fresh = PureState::coherent(alpha * s, c2)?;
    let reference = coherent_amplitudes(if k == 0 { alpha } else { -alpha }, c2);
    let photon = PureState::fock(ModeSpec::single(1)?, &[1])?;
    let empty = PureState::fock(ModeSpec::single(1)?, &[0])?;
    let signal = ModeSpec::single(cutoff)?;
    let mut op = DMatrix::zeros(cutoff + 1, cutoff + 1);
    for n in 0..=cutoff {
        let out = LabeledState::new(PureState::fock(signal.clone(), &[n])?, vec![0])?
            .append(2, &fresh)?
            .append(4, &photon)?
            .append(6, &empty)?
            .beam_splitter(4, 6, &split)?
            .cross_kerr(0, 6)?
            .cross_kerr(2, 4)?
            .beam_splitter(6, 4, &merge)?
            .project_fock(4, j as usize)?
            .project_fock(6, 1 - j as usize)?
            .project_onto(2, &reference)?;
        for (m, a) in out.state().amplitudes().iter().enumerate() {
            op[(m, n)] = *a;
        }
    }
    Ok(op)
}

fn diag_by_parity(cutoff: usize, f: impl Fn(usize) -> f64) -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_fn(cutoff + 1, |n, _| C64::new(f(n), 0.0)))
}

fn pm(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `(1/2) (-1)^{k(n+j)} e^{-|a|^2} [e^{+-|a|^2} (-1)^{n+j} + e^{-+|a|^2}]`.
pub fn conditional_op_closed_form(sign: i8, j: u8, k: u8, alpha: C64, cutoff: usize) -> Result<DMatrix<C64>> {
    let s = check_sign(sign)?;
    check_bit("j", j)?;
    check_bit("k", k)?;
    let a2 = alpha.norm_sqr();
    let (j, k) = (j as usize, k as usize);
    Ok(diag_by_parity(cutoff, |n| {
        0.5 * pm(k * (n + j)) * (-a2).exp() * ((s * a2).exp() * pm(n + j) + (-s * a2).exp())
    }))
}

/// `(1/2) (-1)^{k(n+j)} (-+1)^{n+j}`, valid for `e^{-|a|^2} << 1`.
pub fn conditional_op_large_alpha(sign: i8, j: u8, k: u8, cutoff: usize) -> Result<DMatrix<C64>> {
    let s = check_sign(sign)?;
    check_bit("j", j)?;
    check_bit("k", k)?;
    let (j, k) = (j as usize, k as usize);
    Ok(diag_by_parity(cutoff, |n| {
        let base = if s > 0.0 { pm(n + j) } else { 1.0 };
        0.5 * pm(k * (n + j)) * base
    }))
}

fn coherent_overlap(b: C64, a: C64) -> C64 {
    // <b|a>
    (-(a.norm_sqr() + b.norm_sqr()) / 2.0 + b.conj() * a).exp()
}

/// `Tr(E_k |x a><x' a|)` for the fresh mode, `x, x' = +-1`.
pub fn discrimination_kernel(x: i8, x2: i8, k: u8, alpha: C64, disc: Discrimination) -> Result<C64> {
    let (x, x2) = (check_sign(x)?, check_sign(x2)?);
    check_bit("k", k)?;
    Ok(match disc {
        Discrimination::Projective => {
            let target = if k == 0 { alpha } else { -alpha };
            coherent_overlap(target, alpha * x) * coherent_overlap(target, alpha * x2).conj()
        }
        Discrimination::OnOff => {
            // (x a, a) -> ((x+1) a/sqrt2, (1-x) a/sqrt2) on (2, 8)
            let u = |y: f64| alpha * ((y + 1.0) * FRAC_1_SQRT_2);
            let v = |y: f64| alpha * ((1.0 - y) * FRAC_1_SQRT_2);
            let kept = coherent_overlap(u(x2), u(x));
            let dark = C64::new((-(v(x).norm_sqr() + v(x2).norm_sqr()) / 2.0).exp(), 0.0);
            let click = if k == 0 {
                dark
            } else {
                coherent_overlap(v(x2), v(x)) - dark
            };
            kept * click
        }
    })
}

/// The ON/OFF kernel from an explicit Fock simulation of modes 2 and 8.
pub fn discrimination_kernel_fock(x: i8, x2: i8, k: u8, alpha: C64, cutoff: usize) -> Result<C64> {
    let (x, x2) = (check_sign(x)?, check_sign(x2)?);
    check_bit("k", k)?;
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let bs = BeamSplitter::new(h, h)?;
    let reference = PureState::coherent(alpha, cutoff)?;
    let run = |y: f64| -> Result<LabeledState> {
        LabeledState::new(PureState::coherent(alpha * y, cutoff)?, vec![2])?
            .append(8, &reference)?
            .beam_splitter(2, 8, &bs)
    };
    let (ket, bra) = (run(x)?, run(x2)?);
    let counts: Vec<usize> = if k == 0 { vec![0] } else { (1..=cutoff).collect() };
    let mut acc = C64::new(0.0, 0.0);
    for n in counts {
        let a = ket.clone().project_fock(8, n)?;
        let b = bra.clone().project_fock(8, n)?;
        acc += b.state().inner(a.state())?;
    }
    Ok(acc)
}

/// Single-device Schur weights `W[x][x'][p][p']` for fresh components
/// `x, x'` (0 = `+a`, 1 = `-a`) and signal parities `p, p'` (0 = even).
type SideKernel = [[[[C64; 2]; 2]; 2]; 2];

#[allow(clippy::needless_range_loop)]
fn side_kernel(alpha: C64, j: u8, k: u8, disc: Discrimination) -> Result<SideKernel> {
    let c = photon_paths(j)?;
    let sgn = |i: usize| if i == 0 { 1.0 } else { -1.0 };
    let mut g = [[C64::new(0.0, 0.0); 2]; 2];
    for (a, row) in g.iter_mut().enumerate() {
        for (b, slot) in row.iter_mut().enumerate() {
            *slot = discrimination_kernel(sgn(a) as i8, sgn(b) as i8, k, alpha, disc)?;
        }
    }
    // path 4 flips the fresh mode, path 6 applies the signal parity
    let idx = |y: f64| usize::from(y < 0.0);
    let mut w = [[[[C64::new(0.0, 0.0); 2]; 2]; 2]; 2];
    for x in 0..2 {
        for x2 in 0..2 {
            for p in 0..2 {
                for p2 in 0..2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for (path_a, ca) in c.iter().enumerate() {
                        for (path_b, cb) in c.iter().enumerate() {
                            let (phase_a, ya) = if path_a == 0 { (1.0, -sgn(x)) } else { (sgn(p), sgn(x)) };
                            let (phase_b, yb) = if path_b == 0 {
                                (1.0, -sgn(x2))
                            } else {
                                (sgn(p2), sgn(x2))
                            };
                            acc += ca * cb.conj() * (phase_a * phase_b) * g[idx(ya)][idx(yb)];
                        }
                    }
                    w[x][x2][p][p2] = acc;
                }
            }
        }
    }
    Ok(w)
}

/// Schur weights of one purification round on the two signal modes, indexed
/// by `2 p0 + p1` for ket and bra parities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairKernel {
    pub weights: [[C64; 4]; 4],
}

impl PairKernel {
    fn at(&self, ket: (usize, usize), bra: (usize, usize)) -> C64 {
        self.weights[2 * ket.0 + ket.1][2 * bra.0 + bra.1]
    }
}

/// Parity flips `(mode 0, mode 1)` of the compensating phase plates
/// `(-1)^{k0 n0 + (1-k1) n1}`.
pub fn compensation(outcome: &DeviceOutcome) -> (bool, bool) {
    (outcome.k0 == 1, outcome.k1 == 0)
}

/// Kernel for one outcome with a fresh pair `(a, -a)` of purity `fresh_r`.
#[allow(clippy::needless_range_loop)]
pub fn pair_kernel(
    outcome: &DeviceOutcome,
    fresh_r: f64,
    alpha: C64,
    disc: Discrimination,
    compensate: bool,
) -> Result<PairKernel> {
    if !fresh_r.is_finite() || fresh_r.abs() > 1.0 {
        return Err(param("fresh_r", format!("purity {fresh_r} outside [-1, 1]")));
    }
    let w0 = side_kernel(alpha, outcome.j0, outcome.k0, disc)?;
    let w1 = side_kernel(alpha, outcome.j1, outcome.k1, disc)?;
    let norm = 1.0 / (2.0 * (1.0 + fresh_r * (-4.0 * alpha.norm_sqr()).exp()));
    // fresh components: (+a, -a) or (-a, +a) on the two fresh modes
    let pairs = [(0usize, 1usize), (1, 0)];
    let (flip0, flip1) = if compensate {
        compensation(outcome)
    } else {
        (false, false)
    };
    let phase = |flip: bool, p: usize| if flip && p == 1 { -1.0 } else { 1.0 };
    let mut weights = [[C64::new(0.0, 0.0); 4]; 4];
    for ket in 0..4 {
        for bra in 0..4 {
            let (p0, p1, q0, q1) = (ket >> 1, ket & 1, bra >> 1, bra & 1);
            let mut acc = C64::new(0.0, 0.0);
            for (a, &(x0, x1)) in pairs.iter().enumerate() {
                for (b, &(y0, y1)) in pairs.iter().enumerate() {
                    let f = if a == b { 1.0 } else { fresh_r };
                    acc += w0[x0][y0][p0][q0] * w1[x1][y1][p1][q1] * f;
                }
            }
            let ph = phase(flip0, p0) * phase(flip0, q0) * phase(flip1, p1) * phase(flip1, q1);
            weights[ket][bra] = acc * norm * ph;
        }
    }
    Ok(PairKernel { weights })
}

/// Outcome of one Fock-level round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairResult {
    pub fit: Fit,
    pub probability: f64,
}

fn parity_of(modes: &ModeSpec, idx: usize) -> (usize, usize) {
    (modes.digit(idx, 0) % 2, modes.digit(idx, 1) % 2)
}

/// Unnormalized signal state after a round with the given kernel.
pub fn apply_pair_kernel(rho: &crate::fock::DensityMatrix, kernel: &PairKernel) -> crate::fock::DensityMatrix {
    let modes = rho.modes().clone();
    rho.schur_map(|i, j| kernel.at(parity_of(&modes, i), parity_of(&modes, j)))
}

/// One purification round on Fock-truncated signal modes, with ON/OFF
/// discrimination and phase compensation, refitted to the family.
pub fn purify_pair(
    signal: &ParamState,
    fresh_r: f64,
    outcome: &DeviceOutcome,
    alpha: C64,
    cutoff: usize,
) -> Result<PairResult> {
    let rho = to_density_matrix(signal, cutoff)?;
    let kernel = pair_kernel(outcome, fresh_r, alpha, Discrimination::OnOff, true)?;
    purify_density(&rho, &kernel, signal.base_alpha)
}

fn purify_density(rho: &crate::fock::DensityMatrix, kernel: &PairKernel, base_alpha: C64) -> Result<PairResult> {
    let out = apply_pair_kernel(rho, kernel);
    let probability = out.trace();
    if probability <= 1e-300 {
        return Err(Error::ZeroProbability("device outcome has zero probability".into()));
    }
    Ok(PairResult {
        fit: fit_param_state(&out, base_alpha)?,
        probability,
    })
}

/// All sixteen outcomes of a Fock-level round; probabilities sum to one up to truncation.
pub fn purify_pair_all(
    signal: &ParamState,
    fresh_r: f64,
    alpha: C64,
    cutoff: usize,
    disc: Discrimination,
) -> Result<Vec<(DeviceOutcome, Option<PairResult>, f64)>> {
    let rho = to_density_matrix(signal, cutoff)?;
    DeviceOutcome::all()
        .map(|o| {
            let kernel = pair_kernel(&o, fresh_r, alpha, disc, true)?;
            let out = apply_pair_kernel(&rho, &kernel);
            let p = out.trace();
            let fit = if p > 1e-300 {
                Some(PairResult {
                    fit: fit_param_state(&out, signal.base_alpha)?,
                    probability: p,
                })
            } else {
                None
            };
            Ok((o, fit, p))
        })
        .collect()
}

/// Eq. for the purity after a round in the qubit picture.
pub fn qubit_update(big_r: f64, fresh_r: f64, outcome: &DeviceOutcome) -> f64 {
    let s = outcome.sign();
    (big_r + s * fresh_r) / (1.0 + s * fresh_r * big_r)
}

/// Outcome probability `(1 +- r R)/16` in the qubit picture.
pub fn qubit_outcome_probability(big_r: f64, fresh_r: f64, outcome: &DeviceOutcome) -> f64 {
    (1.0 + outcome.sign() * fresh_r * big_r) / 16.0
}

/// Cat-basis coefficients `(c_e, c_o)` of `|b> = c_e |even> + c_o |odd>`.
fn cat_coefficients(b: C64) -> (f64, f64) {
    let e = (-2.0 * b.norm_sqr()).exp();
    (((1.0 + e) / 2.0).sqrt(), ((1.0 - e) / 2.0).sqrt())
}

/// Family member in the product even/odd cat basis of each mode, index
/// `2 c0 + c1` with `c = 0` for even.
pub fn cat_density(ps: &ParamState) -> DMatrix<C64> {
    let (e0, o0) = cat_coefficients(ps.alpha0);
    let (e1, o1) = cat_coefficients(ps.alpha1);
    let u = DVector::from_vec(vec![e0 * e1, -e0 * o1, o0 * e1, -o0 * o1]).map(|x| C64::new(x, 0.0));
    let v = DVector::from_vec(vec![e0 * e1, e0 * o1, -o0 * e1, -o0 * o1]).map(|x| C64::new(x, 0.0));
    let uv = &u * v.adjoint();
    let r = C64::new(ps.r, 0.0);
    (&u * u.adjoint() + &v * v.adjoint() + (&uv + uv.adjoint()) * r) / C64::new(2.0 * (1.0 + ps.r * ps.overlap()), 0.0)
}

/// Purity of a cat-basis state read from its joint parity, with the distance
/// to the family member of that purity.
pub fn cat_fit(rho: &DMatrix<C64>, template: &ParamState) -> Result<(f64, f64)> {
    let tr = rho.trace().re;
    if tr <= 0.0 {
        return Err(Error::ZeroProbability("null cat-basis state".into()));
    }
    let m = (rho[(0, 0)].re - rho[(1, 1)].re - rho[(2, 2)].re + rho[(3, 3)].re) / tr;
    let e = template.overlap();
    let r = ((m - e) / (1.0 - m * e)).clamp(-1.0, 1.0);
    let member = cat_density(&template.with_r(r)?);
    Ok((r, (rho / C64::new(tr, 0.0) - member).norm()))
}

fn cat_apply(rho: &DMatrix<C64>, kernel: &PairKernel) -> DMatrix<C64> {
    DMatrix::from_fn(4, 4, |i, j| rho[(i, j)] * kernel.weights[i][j])
}

/// Level of description for the feedback loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    /// The Bell-diagonal recursion.
    Qubit,
    /// Exact device maps on the two-dimensional span of `|a>, |-a>` per mode.
    Fock,
}

/// Precomputed device maps for a feedback loop with fixed fresh purity.
#[derive(Clone, Debug)]
pub struct FeedbackEngine {
    template: ParamState,
    fresh_r: f64,
    kernels: Vec<(DeviceOutcome, PairKernel)>,
}

impl FeedbackEngine {
    pub fn new(fresh_r: f64, alpha: C64) -> Result<Self> {
        let kernels = DeviceOutcome::all()
            .map(|o| Ok((o, pair_kernel(&o, fresh_r, alpha, Discrimination::OnOff, true)?)))
            .collect::<Result<_>>()?;
        Ok(FeedbackEngine {
            template: ParamState::pure(alpha),
            fresh_r,
            kernels,
        })
    }

    pub fn signal(&self, r: f64) -> Result<DMatrix<C64>> {
        Ok(cat_density(&self.template.with_r(r)?))
    }

    /// Unnormalized branch states and probabilities of every outcome.
    pub fn branches(&self, rho: &DMatrix<C64>) -> Vec<(DeviceOutcome, DMatrix<C64>, f64)> {
        self.kernels
            .iter()
            .map(|(o, k)| {
                let out = cat_apply(rho, k);
                let p = out.trace().re.max(0.0);
                (*o, out, p)
            })
            .collect()
    }

    /// Samples one round from a uniform draw `u`; returns the normalized state.
    pub fn step(&self, rho: &DMatrix<C64>, u: f64) -> Result<(DMatrix<C64>, WalkStep)> {
        let branches = self.branches(rho);
        let total: f64 = branches.iter().map(|b| b.2).sum();
        let target = u * total;
        let mut acc = 0.0;
        let mut chosen = branches.len() - 1;
        for (i, b) in branches.iter().enumerate() {
            acc += b.2;
            if target < acc {
                chosen = i;
                break;
            }
        }
        let (outcome, out, p) = &branches[chosen];
        if *p <= 0.0 {
            return Err(Error::ZeroProbability(format!("outcome {outcome:?}")));
        }
        let branch_p: f64 = branches
            .iter()
            .filter(|b| b.0.is_even() == outcome.is_even())
            .map(|b| b.2)
            .sum::<f64>()
            / total;
        let next = out / C64::new(*p, 0.0);
        let (purity, _) = cat_fit(&next, &self.template)?;
        Ok((
            next,
            WalkStep {
                purity,
                same_outcome: outcome.is_even(),
                probability: branch_p,
            },
        ))
    }

    pub fn fresh_r(&self) -> f64 {
        self.fresh_r
    }
}

#[allow(clippy::too_many_arguments)]
/// One feedback loop on trial `stream`; the qubit level replays
/// [`crate::qubit::run_walk_stream`] exactly when `signal_r == fresh_r`.
pub fn feedback_loop_stream(
    signal_r: f64,
    fresh_r: f64,
    epsilon: f64,
    alpha: C64,
    seed: u64,
    stream: u64,
    level: Level,
    max_steps: usize,
) -> Result<PurityWalk> {
    let engine = match level {
        Level::Fock => Some(FeedbackEngine::new(fresh_r, alpha)?),
        Level::Qubit => None,
    };
    feedback_walk(signal_r, fresh_r, epsilon, engine.as_ref(), seed, stream, max_steps)
}

fn feedback_walk(
    signal_r: f64,
    fresh_r: f64,
    epsilon: f64,
    engine: Option<&FeedbackEngine>,
    seed: u64,
    stream: u64,
    max_steps: usize,
) -> Result<PurityWalk> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(param("epsilon", format!("{epsilon} outside (0, 1)")));
    }
    for (name, v) in [("signal_r", signal_r), ("fresh_r", fresh_r)] {
        if !v.is_finite() || v.abs() > 1.0 {
            return Err(param(name, format!("purity {v} outside [-1, 1]")));
        }
    }
    let mut rng = walk_rng(seed, stream);
    let (steps, converged) = match engine {
        None => walk_with(signal_r, epsilon, max_steps, &mut rng, |p, u| {
            crate::qubit::sample_step(p, fresh_r, u)
        })?,
        Some(engine) => {
            let mut rho = engine.signal(signal_r)?;
            walk_with(signal_r, epsilon, max_steps, &mut rng, |_, u| {
                let (next, step) = engine.step(&rho, u)?;
                rho = next;
                Ok(step)
            })?
        }
    };
    Ok(PurityWalk {
        r: fresh_r,
        initial: signal_r,
        steps,
        seed,
        stream,
        converged,
    })
}

/// Feedback loop on stream 0.
pub fn feedback_loop(
    signal_r: f64,
    fresh_r: f64,
    epsilon: f64,
    alpha: C64,
    seed: u64,
    level: Level,
    max_steps: usize,
) -> Result<PurityWalk> {
    feedback_loop_stream(signal_r, fresh_r, epsilon, alpha, seed, 0, level, max_steps)
}

#[allow(clippy::too_many_arguments)]
/// Independent feedback loops (trial `i` on stream `i`), reduced in trial order.
pub fn feedback_ensemble(
    signal_r: f64,
    fresh_r: f64,
    epsilon: f64,
    alpha: C64,
    trials: usize,
    seed: u64,
    level: Level,
    max_steps: usize,
) -> Result<StepStats> {
    if trials == 0 {
        return Err(param("trials", "at least one trial is required"));
    }
    let engine = match level {
        Level::Fock => Some(FeedbackEngine::new(fresh_r, alpha)?),
        Level::Qubit => None,
    };
    let outcomes: Vec<(usize, bool, i8)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            feedback_walk(signal_r, fresh_r, epsilon, engine.as_ref(), seed, i, max_steps)
                .map(|w| (w.len(), w.converged, w.limit_sign()))
        })
        .collect::<Result<_>>()?;
    Ok(summarize(&outcomes))
}

/// Draws one outcome of the first round for a signal of purity `signal_r`.
pub fn sample_first_outcome<R: Rng>(engine: &FeedbackEngine, signal_r: f64, rng: &mut R) -> Result<DeviceOutcome> {
    let rho = engine.signal(signal_r)?;
    let branches = engine.branches(&rho);
    let total: f64 = branches.iter().map(|b| b.2).sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (o, _, p) in &branches {
        acc += p;
        if target < acc {
            return Ok(*o);
        }
    }
    Ok(branches[branches.len() - 1].0)
}

/// Result of the third-party shortcut.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstantResult {
    pub fit: Fit,
    pub probability: f64,
}

/// Applies the third-party conditional operator to the mixed signal and then
/// `(-1)^{n1}`; the output is the pure member of the family.
pub fn instant_purify(signal: &ParamState, beta: C64, cutoff: usize) -> Result<InstantResult> {
    let rho = to_density_matrix(signal, cutoff)?;
    let y = third_party_closed_form(rho.modes(), beta);
    let diag: Vec<C64> = (0..y.nrows()).map(|i| y[(i, i)]).collect();
    let out = rho.schur_map(|i, j| diag[i] * diag[j].conj()).apply_parity(1)?;
    let probability = out.trace();
    if probability <= 1e-300 {
        return Err(Error::ZeroProbability("instant purification branch".into()));
    }
    Ok(InstantResult {
        fit: fit_param_state(&out, signal.base_alpha)?,
        probability,
    })
}

/// `|<0|b><1|b>|^2 (1 + r)(1 + E) / (1 + r E)` with `E = e^{-4|a|^2}`.
pub fn instant_probability(signal: &ParamState, beta: C64) -> f64 {
    let b2 = beta.norm_sqr();
    let c = (-2.0 * b2).exp() * b2;
    let e = signal.overlap();
    c * (1.0 + signal.r) * (1.0 + e) / (1.0 + signal.r * e)
}
