//! Qubit picture of the cat states: `|a> -> up`, `|-a> -> down`.
//!
//! Two-qubit states are written in the basis index `2 q_A + q_B` with
//! `down = 0`, `up = 1`. The Bell states are
//! `Psi+- = (|up,down> +- |down,up>)/sqrt2` and `Phi+- = (|up,up> +- |down,down>)/sqrt2`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::fock::{DensityMatrix, ModeSpec};

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The four Bell states, in the order used by [`BellMixture::weights`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bell {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

impl Bell {
    pub const ALL: [Bell; 4] = [Bell::PsiPlus, Bell::PsiMinus, Bell::PhiPlus, Bell::PhiMinus];

    /// Amplitudes over `(down down, down up, up down, up up)`.
    pub fn ket(self) -> [f64; 4] {
        match self {
            Bell::PsiPlus => [0.0, H, H, 0.0],
            Bell::PsiMinus => [0.0, -H, H, 0.0],
            Bell::PhiPlus => [H, 0.0, 0.0, H],
            Bell::PhiMinus => [-H, 0.0, 0.0, H],
        }
    }
}

/// Qubit detector reading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Down = 0,
    Up = 1,
}

/// Bell-diagonal two-qubit state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BellMixture {
    weights: [f64; 4],
}

impl BellMixture {
    /// Weights on `(Psi+, Psi-, Phi+, Phi-)`; must be non-negative and sum to one.
    pub fn new(weights: [f64; 4]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < -1e-12) {
            return Err(param("weights", "Bell weights must be non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(param("weights", format!("Bell weights sum to {sum}")));
        }
        Ok(BellMixture {
            weights: weights.map(|w| w.max(0.0)),
        })
    }

    /// `(1+r)/2 Psi+ + (1-r)/2 Psi-`.
    pub fn from_purity(r: f64) -> Result<Self> {
        check_purity("r", r)?;
        Ok(BellMixture {
            weights: [(1.0 + r) / 2.0, (1.0 - r) / 2.0, 0.0, 0.0],
        })
    }

    /// `(1+r)/2 Phi+ + (1-r)/2 Phi-`.
    pub fn phi_from_purity(r: f64) -> Result<Self> {
        check_purity("r", r)?;
        Ok(BellMixture {
            weights: [0.0, 0.0, (1.0 + r) / 2.0, (1.0 - r) / 2.0],
        })
    }

    pub fn weights(&self) -> [f64; 4] {
        self.weights
    }

    pub fn weight(&self, b: Bell) -> f64 {
        self.weights[b as usize]
    }

    /// The same weights with `Psi` and `Phi` exchanged.
    pub fn swapped(&self) -> Self {
        let w = self.weights;
        BellMixture {
            weights: [w[2], w[3], w[0], w[1]],
        }
    }

    /// Purity parameter `w+ - w-` of a mixture supported on one Bell pair,
    /// with `true` for the `Phi` pair.
    pub fn purity(&self) -> Option<(f64, bool)> {
        let w = self.weights;
        if w[2] + w[3] <= 1e-12 {
            Some((w[0] - w[1], false))
        } else if w[0] + w[1] <= 1e-12 {
            Some((w[2] - w[3], true))
        } else {
            None
        }
    }

    pub fn density_matrix(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(4, 4);
        for (b, w) in Bell::ALL.iter().zip(self.weights) {
            let k = b.ket();
            for i in 0..4 {
                for j in 0..4 {
                    m[(i, j)] += C64::new(w * k[i] * k[j], 0.0);
                }
            }
        }
        m
    }

    /// Bell-basis diagonal of a two-qubit density matrix (normalized by its trace).
    pub fn from_density(rho: &DMatrix<C64>) -> Result<Self> {
        if rho.shape() != (4, 4) {
            return Err(Error::Dimension("two-qubit state must be 4x4".into()));
        }
        let tr = rho.trace().re;
        if tr <= 0.0 {
            return Err(Error::ZeroProbability("null two-qubit state".into()));
        }
        let mut weights = [0.0; 4];
        for (slot, b) in weights.iter_mut().zip(Bell::ALL) {
            let k = b.ket();
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    acc += rho[(i, j)] * (k[i] * k[j]);
                }
            }
            *slot = (acc.re / tr).max(0.0);
        }
        let sum: f64 = weights.iter().sum();
        BellMixture::new(weights.map(|w| w / sum))
    }
}

fn check_purity(name: &'static str, r: f64) -> Result<()> {
    if !r.is_finite() || r.abs() > 1.0 {
        return Err(param(name, format!("purity {r} outside [-1, 1]")));
    }
    Ok(())
}

pub fn bell_mixture_from_purity(r: f64) -> Result<BellMixture> {
    BellMixture::from_purity(r)
}

/// `-x+ log2 x+ - x- log2 x-` with `x+- = 1/2 +- sqrt(p(1-p))`.
pub fn eof_from_p(p: f64) -> f64 {
    let p = p.clamp(0.5, 1.0);
    let s = (p * (1.0 - p)).sqrt();
    let h = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    (h(0.5 + s) + h(0.5 - s)).clamp(0.0, 1.0)
}

/// Entanglement of formation of a Bell-diagonal state.
pub fn entanglement_of_formation(mix: &BellMixture) -> f64 {
    let top = mix.weights.iter().copied().fold(0.5, f64::max);
    eof_from_p(top)
}

/// One purification round: `R' = (R +- r)/(1 +- r R)` with probability
/// `(1 +- r R)/2`, plus sign for equal detector readings.
pub fn purification_step(r_prev: f64, r: f64, same_outcome: bool) -> Result<(f64, f64)> {
    check_purity("R", r_prev)?;
    check_purity("r", r)?;
    let s = if same_outcome { 1.0 } else { -1.0 };
    let den = 1.0 + s * r * r_prev;
    if den <= 0.0 {
        return Err(Error::ZeroProbability(format!(
            "branch {} at R = {r_prev}, r = {r}",
            if same_outcome { "+" } else { "-" }
        )));
    }
    Ok((((r_prev + s * r) / den).clamp(-1.0, 1.0), den / 2.0))
}

/// Growth of the variance of `R` in one round, `r^2 (1-R^2)^2 / (1 - r^2 R^2)`.
pub fn variance_increment(r_prev: f64, r: f64) -> f64 {
    let den = 1.0 - r * r * r_prev * r_prev;
    if den <= 0.0 {
        return 0.0;
    }
    r * r * (1.0 - r_prev * r_prev).powi(2) / den
}

/// Gate of one purification unit on (signal qubit, fresh qubit), as a matrix
/// whose column `c` is the image of basis state `c`.
pub fn gate_matrix() -> DMatrix<f64> {
    let rows = [
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, -1.0],
        [0.0, 0.0, 1.0, 1.0],
        [1.0, -1.0, 0.0, 0.0],
    ];
    DMatrix::from_fn(4, 4, |i, c| rows[c][i] * H)
}

/// Exact four-qubit update: the gate acts on (signal A, fresh A) and on
/// (signal B, fresh B), then the fresh qubits are read out.
pub fn apply_gate_to_mixture(
    signal: &BellMixture,
    fresh: &BellMixture,
    outcome: (Spin, Spin),
) -> Result<(BellMixture, f64)> {
    let (rho, prob) = gate_conditional_state(&signal.density_matrix(), &fresh.density_matrix(), outcome)?;
    if prob <= 1e-300 {
        return Err(Error::ZeroProbability(format!("outcome {outcome:?}")));
    }
    Ok((BellMixture::from_density(&rho)?, prob))
}

/// Unnormalized signal state after one round with outcome `(fresh A, fresh B)`,
/// and its probability. Qubit order inside: `(sA, sB, fA, fB)`.
pub fn gate_conditional_state(
    signal: &DMatrix<C64>,
    fresh: &DMatrix<C64>,
    outcome: (Spin, Spin),
) -> Result<(DMatrix<C64>, f64)> {
    if signal.shape() != (4, 4) || fresh.shape() != (4, 4) {
        return Err(Error::Dimension("two-qubit states must be 4x4".into()));
    }
    let g = gate_matrix();
    let bit = |idx: usize, q: usize| (idx >> (3 - q)) & 1;
    // full 16x16 unitary G_{sA,fA} G_{sB,fB}
    let u = DMatrix::from_fn(16, 16, |out, inp| {
        let a = g[(2 * bit(out, 0) + bit(out, 2), 2 * bit(inp, 0) + bit(inp, 2))];
        let b = g[(2 * bit(out, 1) + bit(out, 3), 2 * bit(inp, 1) + bit(inp, 3))];
        C64::new(a * b, 0.0)
    });
    let rho = signal.kronecker(fresh);
    let out = &u * rho * u.adjoint();
    let (oa, ob) = (outcome.0 as usize, outcome.1 as usize);
    let keep = |s: usize| (s << 2) | (oa << 1) | ob;
    let cond = DMatrix::from_fn(4, 4, |i, j| out[(keep(i), keep(j))]);
    let prob = cond.trace().re;
    Ok((cond, prob))
}

/// One sampled round of the walk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkStep {
    /// Purity after the round.
    pub purity: f64,
    /// Equal detector readings (plus branch).
    pub same_outcome: bool,
    /// Probability of the branch taken.
    pub probability: f64,
}

/// A realized purification trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct PurityWalk {
    /// Purity of every fresh pulse (and of the initial signal).
    pub r: f64,
    pub initial: f64,
    pub steps: Vec<WalkStep>,
    pub seed: u64,
    pub stream: u64,
    /// `1 - |R_n| < epsilon` was reached within the step budget.
    pub converged: bool,
}

impl PurityWalk {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_purity(&self) -> f64 {
        self.steps.last().map_or(self.initial, |s| s.purity)
    }

    /// Sign of the limit, `+1` or `-1`.
    pub fn limit_sign(&self) -> i8 {
        if self.final_purity() >= 0.0 {
            1
        } else {
            -1
        }
    }

    /// Purities `R_0, R_1, ..., R_n`.
    pub fn purities(&self) -> Vec<f64> {
        std::iter::once(self.initial)
            .chain(self.steps.iter().map(|s| s.purity))
            .collect()
    }
}

/// Deterministic generator for trial `stream` of a run seeded with `seed`.
pub fn walk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(param("epsilon", format!("{epsilon} outside (0, 1)")));
    }
    Ok(())
}

/// Draws rounds until `1 - |R| < epsilon` or `max_steps` rounds were made;
/// `step(R, u)` maps the current purity and a uniform draw to the next round.
pub fn walk_with<R: Rng>(
    initial: f64,
    epsilon: f64,
    max_steps: usize,
    rng: &mut R,
    mut step: impl FnMut(f64, f64) -> Result<WalkStep>,
) -> Result<(Vec<WalkStep>, bool)> {
    let mut steps = Vec::new();
    let mut purity = initial;
    loop {
        if 1.0 - purity.abs() < epsilon {
            return Ok((steps, true));
        }
        if steps.len() >= max_steps {
            return Ok((steps, false));
        }
        let u: f64 = rng.random();
        let s = step(purity, u)?;
        purity = s.purity;
        steps.push(s);
    }
}

/// The qubit-level round: plus branch with probability `(1 + r R)/2`.
pub fn sample_step(purity: f64, r: f64, u: f64) -> Result<WalkStep> {
    let p_plus = (1.0 + r * purity) / 2.0;
    let same = u < p_plus;
    let (next, probability) = purification_step(purity, r, same)?;
    Ok(WalkStep {
        purity: next,
        same_outcome: same,
        probability,
    })
}

/// Walk on stream 0 of `seed`, starting from `R_0 = r`.
pub fn run_walk(r: f64, epsilon: f64, max_steps: usize, seed: u64) -> Result<PurityWalk> {
    run_walk_stream(r, epsilon, max_steps, seed, 0)
}

pub fn run_walk_stream(r: f64, epsilon: f64, max_steps: usize, seed: u64, stream: u64) -> Result<PurityWalk> {
    check_purity("r", r)?;
    check_epsilon(epsilon)?;
    let mut rng = walk_rng(seed, stream);
    let (steps, converged) = walk_with(r, epsilon, max_steps, &mut rng, |p, u| sample_step(p, r, u))?;
    Ok(PurityWalk {
        r,
        initial: r,
        steps,
        seed,
        stream,
        converged,
    })
}

/// Default step budget of the ensemble runners.
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

/// Ensemble statistics of the stopping time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    /// Walks that hit the step budget; they enter the mean with their budget.
    pub unconverged: usize,
    /// Fraction of walks ending with `R > 0`.
    pub plus_fraction: f64,
}

/// Runs `trials` independent walks (trial `i` on stream `i`) in parallel and
/// reduces them in trial order.
pub fn ensemble(r: f64, epsilon: f64, trials: usize, seed: u64, max_steps: usize) -> Result<StepStats> {
    if trials == 0 {
        return Err(param("trials", "at least one trial is required"));
    }
    check_purity("r", r)?;
    check_epsilon(epsilon)?;
    let outcomes: Vec<(usize, bool, i8)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_walk_stream(r, epsilon, max_steps, seed, i).map(|w| (w.len(), w.converged, w.limit_sign())))
        .collect::<Result<_>>()?;
    Ok(summarize(&outcomes))
}

pub(crate) fn summarize(outcomes: &[(usize, bool, i8)]) -> StepStats {
    let n = outcomes.len() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut unconverged = 0;
    let mut plus = 0usize;
    for &(len, converged, sign) in outcomes {
        let x = len as f64;
        sum += x;
        sum_sq += x * x;
        unconverged += usize::from(!converged);
        plus += usize::from(sign > 0);
    }
    let mean = sum / n;
    let var = if outcomes.len() > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    StepStats {
        mean,
        stderr: (var / n).sqrt(),
        trials: outcomes.len(),
        unconverged,
        plus_fraction: plus as f64 / n,
    }
}

/// Monte Carlo mean of the number of rounds until `1 - |R_n| < epsilon`.
pub fn mean_steps(r: f64, epsilon: f64, trials: usize, seed: u64) -> Result<StepStats> {
    ensemble(r, epsilon, trials, seed, DEFAULT_MAX_STEPS)
}

/// Mean and standard error of `R_n` for `n = 0..=n_steps` over walks that run
/// a fixed number of rounds without a stopping rule.
pub fn purity_moments(r: f64, n_steps: usize, trials: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    check_purity("r", r)?;
    if trials < 2 {
        return Err(param("trials", "need at least two trials for an error bar"));
    }
    let paths: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = walk_rng(seed, i);
            let mut path = Vec::with_capacity(n_steps + 1);
            let mut purity = r;
            path.push(purity);
            for _ in 0..n_steps {
                // |R| = 1 is absorbing and its minus branch has probability 0
                let u: f64 = rng.random();
                purity = sample_step(purity, r, u)?.purity;
                path.push(purity);
            }
            Ok(path)
        })
        .collect::<Result<_>>()?;
    let n = trials as f64;
    Ok((0..=n_steps)
        .map(|k| {
            let mean = paths.iter().map(|p| p[k]).sum::<f64>() / n;
            let var = paths.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        })
        .collect())
}

/// Von Neumann entropy in bits.
pub fn entropy_bits(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues()
        .into_iter()
        .filter(|&l| l > 1e-15)
        .map(|l| -l * l.log2())
        .sum()
}

/// Quantum mutual information `S(A) + S(B) - S(AB)` of a two-qubit state, in bits.
pub fn mutual_information(rho: &DMatrix<C64>) -> Result<f64> {
    let qubits = ModeSpec::new(vec![1, 1])?;
    let joint = DensityMatrix::from_matrix(qubits, rho.clone())?.normalized()?;
    let a = joint.partial_trace(&[0])?;
    let b = joint.partial_trace(&[1])?;
    Ok((entropy_bits(&a) + entropy_bits(&b) - entropy_bits(&joint)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_from_purity_examples() {
        assert_eq!(BellMixture::from_purity(1.0).unwrap().weights(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(BellMixture::from_purity(0.0).unwrap().weights(), [0.5, 0.5, 0.0, 0.0]);
        let w = BellMixture::from_purity(0.6).unwrap().weights();
        assert!((w[0] - 0.8).abs() < 1e-15 && (w[1] - 0.2).abs() < 1e-15);
        assert!(BellMixture::from_purity(1.2).is_err());
    }

    #[test]
    fn eof_examples() {
        assert_eq!(entanglement_of_formation(&BellMixture::from_purity(1.0).unwrap()), 1.0);
        assert_eq!(entanglement_of_formation(&BellMixture::new([0.25; 4]).unwrap()), 0.0);
        assert_eq!(entanglement_of_formation(&BellMixture::from_purity(0.0).unwrap()), 0.0);
        // p = 3/4: x+- = 1/2 +- sqrt(3)/4
        let s = 3f64.sqrt() / 4.0;
        let oracle = -(0.5 + s) * (0.5 + s).log2() - (0.5 - s) * (0.5 - s).log2();
        let e = entanglement_of_formation(&BellMixture::from_purity(0.5).unwrap());
        assert!((e - oracle).abs() < 1e-15);
        assert!((e - 0.3546).abs() < 1e-4);
    }

    #[test]
    fn eof_is_monotone_in_purity() {
        let es: Vec<f64> = (0..=100)
            .map(|i| entanglement_of_formation(&BellMixture::from_purity(i as f64 / 100.0).unwrap()))
            .collect();
        assert!(es.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn step_examples() {
        for r in [0.1, 0.5, 0.9] {
            assert_eq!(purification_step(1.0, r, true).unwrap().0, 1.0);
        }
        let (next, p) = purification_step(0.3, 0.0, false).unwrap();
        assert_eq!((next, p), (0.3, 0.5));
        let (next, p) = purification_step(0.5, 0.5, true).unwrap();
        assert!((next - 0.8).abs() < 1e-15 && (p - 0.625).abs() < 1e-15);
        assert!(matches!(
            purification_step(1.0, 1.0, false),
            Err(Error::ZeroProbability(_))
        ));
    }

    #[test]
    fn gate_same_outcome_gives_phi_mixture() {
        let r = 0.5;
        let mix = BellMixture::from_purity(r).unwrap();
        for outcome in [(Spin::Up, Spin::Up), (Spin::Down, Spin::Down)] {
            let (out, p) = apply_gate_to_mixture(&mix, &mix, outcome).unwrap();
            let (purity, phi) = out.purity().unwrap();
            assert!(phi);
            assert!((purity - 2.0 * r / (1.0 + r * r)).abs() < 1e-14);
            assert!((p - (1.0 + r * r) / 4.0).abs() < 1e-14);
        }
        for outcome in [(Spin::Up, Spin::Down), (Spin::Down, Spin::Up)] {
            let (out, p) = apply_gate_to_mixture(&mix, &mix, outcome).unwrap();
            let (purity, phi) = out.purity().unwrap();
            assert!(phi && purity.abs() < 1e-14);
            assert!((p - (1.0 - r * r) / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gate_on_phi_signal_returns_to_psi() {
        let (big_r, r) = (0.35, 0.6);
        let signal = BellMixture::phi_from_purity(big_r).unwrap();
        let fresh = BellMixture::from_purity(r).unwrap();
        let (out, p) = apply_gate_to_mixture(&signal, &fresh, (Spin::Up, Spin::Up)).unwrap();
        let (purity, phi) = out.purity().unwrap();
        let (expect, p_plus) = purification_step(big_r, r, true).unwrap();
        assert!(!phi);
        assert!((purity - expect).abs() < 1e-14);
        assert!((2.0 * p - p_plus).abs() < 1e-14);
    }

    #[test]
    fn averaging_over_outcomes_swaps_psi_and_phi() {
        let signal = BellMixture::new([0.5, 0.2, 0.2, 0.1]).unwrap();
        let fresh = BellMixture::from_purity(0.3).unwrap();
        let mut avg = DMatrix::<C64>::zeros(4, 4);
        for a in [Spin::Down, Spin::Up] {
            for b in [Spin::Down, Spin::Up] {
                let (rho, _) =
                    gate_conditional_state(&signal.density_matrix(), &fresh.density_matrix(), (a, b)).unwrap();
                avg += rho;
            }
        }
        let got = BellMixture::from_density(&avg).unwrap().weights();
        let want = signal.swapped().weights();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn variance_increment_matches_direct_sum() {
        for (big_r, r) in [(0.3, 0.5), (-0.7, 0.2), (0.95, 0.9)] {
            let (rp, pp) = purification_step(big_r, r, true).unwrap();
            let (rm, pm) = purification_step(big_r, r, false).unwrap();
            let direct = pp * (rp - r).powi(2) + pm * (rm - r).powi(2) - (big_r - r).powi(2);
            assert!((direct - variance_increment(big_r, r)).abs() < 1e-14);
        }
        assert_eq!(variance_increment(1.0, 0.5), 0.0);
    }

    #[test]
    fn pure_walk_stops_immediately_and_walks_replay() {
        let w = run_walk(1.0, 1e-5, 100, 9).unwrap();
        assert!(w.is_empty() && w.converged);
        let a = run_walk(0.5, 1e-5, 10_000, 1).unwrap();
        let b = run_walk(0.5, 1e-5, 10_000, 1).unwrap();
        assert_eq!(a, b);
        let c = run_walk(0.5, 1e-5, 10_000, 2).unwrap();
        assert_ne!(a.steps, c.steps);
        let capped = run_walk(0.1, 1e-12, 3, 1).unwrap();
        assert!(!capped.converged && capped.len() == 3);
    }

    #[test]
    fn ensemble_mean_purity_is_conserved() {
        let moments = purity_moments(0.5, 30, 20_000, 11).unwrap();
        for (n, (mean, se)) in moments.iter().enumerate() {
            assert!((mean - 0.5).abs() <= 3.0 * se.max(1e-12), "n = {n}: {mean} +- {se}");
        }
    }

    #[test]
    fn mutual_information_examples() {
        let bell = BellMixture::from_purity(1.0).unwrap().density_matrix();
        assert!((mutual_information(&bell).unwrap() - 2.0).abs() < 1e-12);
        let classical = BellMixture::from_purity(0.0).unwrap().density_matrix();
        assert!((mutual_information(&classical).unwrap() - 1.0).abs() < 1e-12);
        let flat = BellMixture::new([0.25; 4]).unwrap().density_matrix();
        assert!(mutual_information(&flat).unwrap() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn martingale_and_completeness(big_r in -0.99f64..0.99, r in -0.99f64..0.99) {
                let (rp, pp) = purification_step(big_r, r, true).unwrap();
                let (rm, pm) = purification_step(big_r, r, false).unwrap();
                prop_assert!((pp + pm - 1.0).abs() <= 1e-15);
                prop_assert!((pp * rp + pm * rm - big_r).abs() <= 1e-14);
                prop_assert!(rp.abs() < 1.0 && rm.abs() < 1.0);
                prop_assert!(variance_increment(big_r, r) >= 0.0);
            }

            #[test]
            fn absorption(r in -0.99f64..0.99, sign in prop::bool::ANY, same in prop::bool::ANY) {
                let start = if sign { 1.0 } else { -1.0 };
                if let Ok((next, p)) = purification_step(start, r, same) {
                    if p > 0.0 {
                        prop_assert_eq!(next.abs(), 1.0);
                    }
                }
            }

            #[test]
            fn gate_reproduces_recursion(big_r in -0.99f64..0.99, r in -0.99f64..0.99,
                                         a in prop::bool::ANY, b in prop::bool::ANY) {
                let spin = |x: bool| if x { Spin::Up } else { Spin::Down };
                let signal = BellMixture::from_purity(big_r).unwrap();
                let fresh = BellMixture::from_purity(r).unwrap();
                let (out, p) = apply_gate_to_mixture(&signal, &fresh, (spin(a), spin(b))).unwrap();
                let (expect, branch_p) = purification_step(big_r, r, a == b).unwrap();
                let (got, phi) = out.purity().unwrap();
                prop_assert!(phi);
                prop_assert!((got - expect).abs() < 1e-12);
                prop_assert!((2.0 * p - branch_p).abs() < 1e-14);
            }
        }
    }
}
