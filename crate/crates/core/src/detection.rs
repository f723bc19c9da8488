//! Purity readout: photon-parity coincidences, the two-slit probe
//! interference, its statistical accuracy and the back-action on the signal.
//!
//! The probes are coherent states `|g>` on modes 6 and 7, coupled to signal
//! modes 0 and 1 by cross-Kerr gates; a probe leaves as `|(-1)^n g>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{to_density_matrix, ParamState};
use crate::error::{param, Error, Result};
use crate::fock::{annihilation, coherent_amplitudes, default_cutoff, embed, DensityMatrix, ModeSpec, PureState};
use crate::qubit::{eof_from_p, mutual_information, walk_rng, BellMixture};

/// `C(x) = e^{-x} cosh x`, `S(x) = e^{-x} sinh x`.
pub fn cosh_sinh_weights(x: f64) -> (f64, f64) {
    let e = (-2.0 * x).exp();
    ((1.0 + e) / 2.0, (1.0 - e) / 2.0)
}

fn pm(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `p(m, n) = |<m|a0><n|a1>|^2 [1 + r (-1)^{m+n}] / (1 + r E)`.
pub fn joint_photon_probability(ps: &ParamState, m: usize, n: usize) -> f64 {
    let cm = coherent_amplitudes(ps.alpha0, m)[m].norm_sqr();
    let cn = coherent_amplitudes(ps.alpha1, n)[n].norm_sqr();
    cm * cn * (1.0 + ps.r * pm(m + n)) / (1.0 + ps.r * ps.overlap())
}

/// Probabilities of the parity events `(ee, eu, ue, uu)` from the Fock diagonal.
pub fn parity_event_probabilities(rho: &DensityMatrix) -> Result<[f64; 4]> {
    let modes = rho.modes();
    if modes.num_modes() != 2 {
        return Err(Error::Dimension("parity events need a two-mode state".into()));
    }
    let mut p = [0.0; 4];
    for (i, d) in rho.diagonal().iter().enumerate() {
        p[2 * (modes.digit(i, 0) % 2) + modes.digit(i, 1) % 2] += d;
    }
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroProbability("state has no weight".into()));
    }
    Ok(p.map(|x| x / total))
}

/// Coincidence rate `M = p(e,e) + p(u,u) - p(e,u) - p(u,e)` summed over the
/// photon-number distribution of the truncated state.
pub fn parity_coincidence(ps: &ParamState, cutoff: usize) -> Result<f64> {
    let p = parity_event_probabilities(&to_density_matrix(ps, cutoff)?)?;
    Ok(p[0] + p[3] - p[1] - p[2])
}

/// `(r + e^{-4|a|^2}) / (1 + r e^{-4|a|^2})`.
pub fn parity_coincidence_closed_form(ps: &ParamState) -> f64 {
    ps.joint_parity()
}

/// Estimates `M` from `trials` simulated parity readouts; returns
/// `(estimate, standard error)`.
pub fn sample_parity_coincidence(ps: &ParamState, cutoff: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if trials < 2 {
        return Err(param("trials", "need at least two trials"));
    }
    let p = parity_event_probabilities(&to_density_matrix(ps, cutoff)?)?;
    let mut rng = walk_rng(seed, 0);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let u: f64 = rng.random();
        // events ee, eu, ue, uu score +1, -1, -1, +1
        let mut acc = 0.0;
        let event = p.iter().position(|&q| {
            acc += q;
            u < acc
        });
        let x = match event.unwrap_or(3) {
            0 | 3 => 1.0,
            _ => -1.0,
        };
        sum += x;
        sum_sq += x * x;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    Ok((mean, (var.max(0.0) / n).sqrt()))
}

/// `<I> = 2|g|^2 (1 + M cos dphi)`.
pub fn interference_intensity(ps: &ParamState, gamma: C64, delta_phi: f64) -> f64 {
    2.0 * gamma.norm_sqr() * (1.0 + ps.joint_parity() * delta_phi.cos())
}

/// The two probe modes after the Kerr couplings, signal traced out.
#[derive(Clone, Debug)]
pub struct ProbeState {
    rho: DensityMatrix,
    a6: DMatrix<C64>,
    a7: DMatrix<C64>,
}

impl ProbeState {
    /// Builds the probe state from the signal's Fock-basis photon statistics.
    pub fn new(ps: &ParamState, gamma: C64, signal_cutoff: usize, probe_cutoff: usize) -> Result<Self> {
        let signal = to_density_matrix(ps, signal_cutoff)?;
        Self::from_signal(&signal, gamma, probe_cutoff)
    }

    /// Each signal Fock state `|n0, n1>` leaves the probes in
    /// `|(-1)^{n0} g, (-1)^{n1} g>`; tracing the signal keeps its diagonal.
    pub fn from_signal(signal: &DensityMatrix, gamma: C64, probe_cutoff: usize) -> Result<Self> {
        let p = parity_event_probabilities(signal)?;
        let modes = ModeSpec::new(vec![probe_cutoff, probe_cutoff])?;
        let plus = PureState::coherent(gamma, probe_cutoff)?;
        let minus = plus.apply_parity(0)?;
        let mut mat = DMatrix::zeros(modes.total_dim(), modes.total_dim());
        for (idx, weight) in p.iter().enumerate() {
            let k6 = if idx >> 1 == 0 { &plus } else { &minus };
            let k7 = if idx & 1 == 0 { &plus } else { &minus };
            let v = DVector::from_column_slice(k6.tensor(k7)?.amplitudes());
            mat += (&v * v.adjoint()) * C64::new(*weight, 0.0);
        }
        let a = annihilation(probe_cutoff);
        Ok(ProbeState {
            a6: embed(&modes, 0, &a)?,
            a7: embed(&modes, 1, &a)?,
            rho: DensityMatrix::from_matrix(modes, mat)?,
        })
    }

    pub fn density(&self) -> &DensityMatrix {
        &self.rho
    }

    /// `I = n6 + n7 + 2 Re(e^{-i dphi} a6^+ a7)` as a matrix.
    pub fn intensity_operator(&self, delta_phi: f64) -> DMatrix<C64> {
        let b = &self.a6 + &self.a7 * C64::from_polar(1.0, -delta_phi);
        b.adjoint() * b
    }

    pub fn intensity(&self, delta_phi: f64) -> Result<f64> {
        Ok(self.rho.expectation(&self.intensity_operator(delta_phi))?.re)
    }

    /// `<I^2> - <I>^2`.
    pub fn intensity_variance(&self, delta_phi: f64) -> Result<f64> {
        let op = self.intensity_operator(delta_phi);
        let mean = self.rho.expectation(&op)?.re;
        let second = self.rho.expectation(&(&op * &op))?.re;
        Ok(second - mean * mean)
    }
}

/// Probe cutoff with headroom for the fourth moments of the intensity.
pub fn probe_cutoff(gamma: C64) -> usize {
    default_cutoff(gamma) + 6
}

/// `<I>` from an explicit Fock construction of the probe state.
pub fn interference_intensity_fock(ps: &ParamState, gamma: C64, delta_phi: f64, cutoff: usize) -> Result<f64> {
    ProbeState::new(ps, gamma, cutoff, probe_cutoff(gamma))?.intensity(delta_phi)
}

/// Fringe visibility and the sign of `r` read off at `dphi = 0`.
pub fn visibility_from_extremes(at_zero: f64, at_pi: f64) -> (f64, i8) {
    let (hi, lo) = if at_zero >= at_pi {
        (at_zero, at_pi)
    } else {
        (at_pi, at_zero)
    };
    let v = if hi + lo > 0.0 { (hi - lo) / (hi + lo) } else { 0.0 };
    (v, if at_zero >= at_pi { 1 } else { -1 })
}

/// `(I_max - I_min) / (I_max + I_min)` from the closed-form fringes.
pub fn contrast(ps: &ParamState, gamma: C64) -> (f64, i8) {
    visibility_from_extremes(
        interference_intensity(ps, gamma, 0.0),
        interference_intensity(ps, gamma, std::f64::consts::PI),
    )
}

/// Visibility from Fock-level fringes.
pub fn contrast_fock(ps: &ParamState, gamma: C64, cutoff: usize) -> Result<(f64, i8)> {
    let probe = ProbeState::new(ps, gamma, cutoff, probe_cutoff(gamma))?;
    Ok(visibility_from_extremes(
        probe.intensity(0.0)?,
        probe.intensity(std::f64::consts::PI)?,
    ))
}

/// A sampled fringe pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct InterferencePattern {
    pub gamma: C64,
    /// `(dphi, <I>)`.
    pub samples: Vec<(f64, f64)>,
    pub contrast: f64,
    pub sign_of_r: i8,
}

pub fn interference_pattern(ps: &ParamState, gamma: C64, delta_phis: &[f64]) -> InterferencePattern {
    let samples = delta_phis
        .par_iter()
        .map(|&d| (d, interference_intensity(ps, gamma, d)))
        .collect();
    let (contrast, sign_of_r) = contrast(ps, gamma);
    InterferencePattern {
        gamma,
        samples,
        contrast,
        sign_of_r,
    }
}

/// Relative variance of the visibility, `(|M|^-2 - 1)/2 (|g|^-2 + 1 + |M|^2)`.
pub fn contrast_uncertainty(gamma: C64, m: f64) -> Result<f64> {
    let g2 = gamma.norm_sqr();
    if g2 == 0.0 {
        return Err(param("gamma", "probe amplitude must be nonzero"));
    }
    let m = m.abs();
    if m > 1.0 + 1e-12 {
        return Err(param("M", format!("|M| = {m} exceeds 1")));
    }
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((m.powi(-2) - 1.0) / 2.0 * (1.0 / g2 + 1.0 + m * m))
}

/// Propagates relative variances of the two fringe extremes into the contrast.
pub fn propagate_contrast_uncertainty(i_max: f64, i_min: f64, var_max: f64, var_min: f64) -> f64 {
    let f = 2.0 * i_max * i_min / (i_max * i_max - i_min * i_min);
    f * f * (var_max / (i_max * i_max) + var_min / (i_min * i_min))
}

/// The same relative variance from Fock-level intensity moments.
pub fn contrast_uncertainty_fock(ps: &ParamState, gamma: C64, cutoff: usize) -> Result<f64> {
    let probe = ProbeState::new(ps, gamma, cutoff, probe_cutoff(gamma))?;
    let pi = std::f64::consts::PI;
    let (i0, ipi) = (probe.intensity(0.0)?, probe.intensity(pi)?);
    let (v0, vpi) = (probe.intensity_variance(0.0)?, probe.intensity_variance(pi)?);
    let (i_max, i_min, v_max, v_min) = if i0 >= ipi {
        (i0, ipi, v0, vpi)
    } else {
        (ipi, i0, vpi, v0)
    };
    Ok(propagate_contrast_uncertainty(i_max, i_min, v_max, v_min))
}

/// `C rho + (1 - C) (-1)^{n1} rho (-1)^{n1}`.
pub fn parity_dephase(rho: &DensityMatrix, c: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&c) {
        return Err(param("C", format!("{c} outside [0, 1]")));
    }
    let flipped = rho.apply_parity(1)?;
    DensityMatrix::from_matrix(
        rho.modes().clone(),
        rho.matrix() * C64::new(c, 0.0) + flipped.matrix() * C64::new(1.0 - c, 0.0),
    )
}

/// Signal state after both probes are traced out: each mode picks up the
/// probe overlap `<(-1)^{n'} g | (-1)^n g>` computed from truncated kets.
pub fn probe_traced_signal(rho: &DensityMatrix, gamma: C64, probe_cutoff: usize) -> Result<DensityMatrix> {
    let plus = PureState::coherent(gamma, probe_cutoff)?;
    let minus = plus.apply_parity(0)?;
    let kets = [&plus, &minus];
    let mut overlap = [[C64::new(0.0, 0.0); 2]; 2];
    for (a, ka) in kets.iter().enumerate() {
        for (b, kb) in kets.iter().enumerate() {
            overlap[a][b] = kb.inner(ka)?;
        }
    }
    let modes = rho.modes().clone();
    Ok(rho.schur_map(|i, j| {
        let f = |m: usize| overlap[modes.digit(i, m) % 2][modes.digit(j, m) % 2];
        f(0) * f(1)
    }))
}

/// Projection of a two-mode Fock state onto the symmetric orthonormalization
/// of `{|a_j>, |-a_j>}` per mode: `up = (even + odd)/sqrt2`, `down = (even - odd)/sqrt2`.
#[derive(Clone, Debug)]
pub struct QubitReading {
    /// Two-qubit density matrix, index `2 q0 + q1`, `down = 0`, normalized.
    pub rho: DMatrix<C64>,
    /// Weight outside the two-qubit span.
    pub leakage: f64,
}

fn cat_pair(alpha: C64, cutoff: usize) -> Result<(DVector<C64>, DVector<C64>)> {
    let plus = DVector::from_vec(coherent_amplitudes(alpha, cutoff));
    let minus = DVector::from_vec(coherent_amplitudes(-alpha, cutoff));
    let even = &plus + &minus;
    let odd = &plus - &minus;
    if even.norm() == 0.0 || odd.norm() < 1e-12 {
        return Err(param("alpha", "cat basis needs a nonzero amplitude"));
    }
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let (e, o) = (even.normalize(), odd.normalize());
    Ok(((&e + &o) * h, (&e - &o) * h))
}

/// Qubit reading with `up = |+a_j>` on each mode.
pub fn qubit_reading(rho: &DensityMatrix, alpha0: C64, alpha1: C64) -> Result<QubitReading> {
    let modes = rho.modes();
    if modes.num_modes() != 2 {
        return Err(Error::Dimension("qubit reading needs two modes".into()));
    }
    let (up0, down0) = cat_pair(alpha0, modes.cutoff(0))?;
    let (up1, down1) = cat_pair(alpha1, modes.cutoff(1))?;
    let b0 = DMatrix::from_columns(&[down0, up0]);
    let b1 = DMatrix::from_columns(&[down1, up1]);
    let b = b0.kronecker(&b1);
    let q = b.adjoint() * rho.matrix() * &b;
    let tr_full = rho.trace();
    let tr = q.trace().re;
    if tr <= 0.0 {
        return Err(Error::ZeroProbability("no weight in the qubit span".into()));
    }
    Ok(QubitReading {
        rho: q / C64::new(tr, 0.0),
        leakage: (1.0 - tr / tr_full).max(0.0),
    })
}

/// Bell weights `C(1+-r)/2` on `Psi+-` and `S(1+-r)/2` on `Phi+-`.
pub fn backaction_mixture(r: f64, gamma: C64) -> Result<BellMixture> {
    let (c, s) = cosh_sinh_weights(2.0 * gamma.norm_sqr());
    BellMixture::new([
        c * (1.0 + r) / 2.0,
        c * (1.0 - r) / 2.0,
        s * (1.0 + r) / 2.0,
        s * (1.0 - r) / 2.0,
    ])
}

/// Entanglement of formation left after the probe, from `p = C(1+|r|)/2`.
pub fn backaction_entanglement(r: f64, gamma: C64) -> f64 {
    let (c, _) = cosh_sinh_weights(2.0 * gamma.norm_sqr());
    eof_from_p(c * (1.0 + r.abs()) / 2.0)
}

/// Post-measurement signal state at Fock level and its Bell-basis reading.
pub fn backaction_state(ps: &ParamState, gamma: C64, cutoff: usize) -> Result<(DensityMatrix, BellMixture)> {
    let rho = to_density_matrix(ps, cutoff)?;
    let after = probe_traced_signal(&rho, gamma, probe_cutoff(gamma))?;
    let reading = qubit_reading(&after, ps.alpha0, ps.alpha1)?;
    Ok((after, BellMixture::from_density(&reading.rho)?))
}

/// Smallest `|g|` on `[lo, hi]` with `C(2|g|^2)(1+r)/2 = 1/2`, by bisection;
/// `None` without a sign change.
pub fn entanglement_zero_crossing(r: f64, lo: f64, hi: f64) -> Option<f64> {
    // C(x)(1+|r|)/2 - 1/2 with C = (1 + e^{-2x})/2, arranged to avoid cancellation
    let r = r.abs();
    let f = |g: f64| ((1.0 + r) * (-4.0 * g * g).exp() - (1.0 - r)) / 4.0;
    let (mut a, mut b) = (lo, hi);
    let side = |g: f64| f(g) > 0.0;
    if side(a) == side(b) {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if side(a) != side(m) {
            b = m;
        } else {
            a = m;
        }
    }
    Some(0.5 * (a + b))
}

/// `(1 - C(2|g|^2))^2`.
pub fn state_deviation(gamma: C64) -> f64 {
    (1.0 - cosh_sinh_weights(2.0 * gamma.norm_sqr()).0).powi(2)
}

/// `4|g|^4`.
pub fn state_deviation_small(gamma: C64) -> f64 {
    4.0 * gamma.norm_sqr().powi(2)
}

/// Relative contrast variance times state deviation.
pub fn tradeoff_product(gamma: C64, m: f64) -> Result<f64> {
    Ok(contrast_uncertainty(gamma, m)? * state_deviation(gamma))
}

/// Qubit-level correlations under the two decoherence mechanisms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplementarityReport {
    /// Mutual information in bits.
    pub none: f64,
    pub loss_only: f64,
    pub dephasing_only: f64,
    pub both: f64,
    /// Largest weight outside the qubit span among the four states.
    pub leakage: f64,
}

/// Mutual information of `r = 1` and `r = 0` states with and without full
/// parity dephasing (`C = S = 1/2`), read in the qubit basis.
pub fn complementarity_demo(alpha: C64, cutoff: usize) -> Result<ComplementarityReport> {
    let pure = ParamState::pure(alpha);
    let lossy = pure.with_r(0.0)?;
    let mut leakage: f64 = 0.0;
    let mut mi = |ps: &ParamState, c: f64| -> Result<f64> {
        let rho = parity_dephase(&to_density_matrix(ps, cutoff)?, c)?;
        let reading = qubit_reading(&rho, ps.alpha0, ps.alpha1)?;
        leakage = leakage.max(reading.leakage);
        mutual_information(&reading.rho)
    };
    Ok(ComplementarityReport {
        none: mi(&pure, 1.0)?,
        loss_only: mi(&lossy, 1.0)?,
        dephasing_only: mi(&pure, 0.5)?,
        both: mi(&lossy, 0.5)?,
        leakage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::entanglement_of_formation;
    use std::f64::consts::PI;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn member(alpha: f64, r: f64) -> ParamState {
        ParamState::pure(c(alpha)).with_r(r).unwrap()
    }

    #[test]
    fn coincidence_examples() {
        let ps = member(1.5, 1.0);
        assert!((parity_coincidence(&ps, default_cutoff(c(1.5))).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(parity_coincidence_closed_form(&ps), 1.0);
        for r in [-0.6, 0.1, 0.7] {
            let m = parity_coincidence(&member(3.0, r), default_cutoff(c(3.0))).unwrap();
            assert!((m - r).abs() < (-9.0f64).exp());
        }
        let m = parity_coincidence(&member(1.0, 0.0), 30).unwrap();
        assert!((m - (-4.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn joint_probabilities_match_fock_diagonal() {
        let ps = member(1.2, 0.4);
        let cutoff = default_cutoff(c(1.2));
        let rho = to_density_matrix(&ps, cutoff).unwrap();
        let modes = rho.modes().clone();
        for (i, d) in rho.diagonal().iter().enumerate() {
            let p = joint_photon_probability(&ps, modes.digit(i, 0), modes.digit(i, 1));
            assert!((p - d).abs() < 1e-14);
        }
    }

    #[test]
    fn sampled_coincidence_brackets_exact() {
        let ps = member(1.0, 0.5);
        let (est, se) = sample_parity_coincidence(&ps, 20, 40_000, 4).unwrap();
        assert!((est - ps.joint_parity()).abs() < 3.0 * se);
    }

    #[test]
    fn intensity_examples() {
        let g = c(0.6);
        let ps = member(1.2, 0.5);
        assert!((interference_intensity(&ps, g, PI / 2.0) - 2.0 * 0.36).abs() < 1e-15);
        let pure = member(3.0, 1.0);
        assert!((interference_intensity(&pure, g, 0.0) - 4.0 * 0.36).abs() < 1e-12);
        let fock = interference_intensity_fock(&ps, g, PI, default_cutoff(c(1.2))).unwrap();
        assert!((fock - interference_intensity(&ps, g, PI)).abs() < 1e-6);
    }

    #[test]
    fn intensity_is_periodic_with_extremes_at_zero_and_pi() {
        let ps = member(1.0, -0.3);
        let g = c(0.8);
        let grid: Vec<f64> = (0..=720).map(|k| k as f64 * PI / 360.0).collect();
        let pattern = interference_pattern(&ps, g, &grid);
        assert!(pattern.samples.iter().all(|s| s.1 >= 0.0));
        let (argmax, _) = pattern
            .samples
            .iter()
            .fold((0.0, f64::MIN), |acc, s| if s.1 > acc.1 { (s.0, s.1) } else { acc });
        assert!((argmax - PI).abs() < 1e-12);
        for d in [0.3, 1.7, 4.0] {
            let a = interference_intensity(&ps, g, d);
            assert!((a - interference_intensity(&ps, g, d + 2.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn contrast_examples() {
        let g = c(0.7);
        assert_eq!(contrast(&member(4.0, 1.0), g), (1.0, 1));
        let (v, s) = contrast(&member(4.0, -0.5), g);
        assert!((v - 0.5).abs() < 1e-12 && s == -1);
        for alpha in [1.0, 2.0] {
            for r in [0.3, 0.8] {
                let ps = member(alpha, r);
                let m = parity_coincidence(&ps, default_cutoff(c(alpha))).unwrap();
                assert!((contrast(&ps, g).0 - m.abs()).abs() < 1e-10);
            }
        }
        let (vf, sf) = contrast_fock(&member(1.2, -0.4), c(0.6), default_cutoff(c(1.2))).unwrap();
        assert!((vf - member(1.2, -0.4).joint_parity().abs()).abs() < 1e-6 && sf == -1);
    }

    #[test]
    fn uncertainty_examples() {
        assert_eq!(contrast_uncertainty(c(0.5), 1.0).unwrap(), 0.0);
        assert!((contrast_uncertainty(c(1.0), 0.5).unwrap() - 3.375).abs() < 1e-12);
        assert_eq!(contrast_uncertainty(c(1.0), 0.0).unwrap(), f64::INFINITY);
        assert!(contrast_uncertainty(c(0.0), 0.5).is_err());
        let small = contrast_uncertainty(c(1e-3), 0.5).unwrap();
        let smaller = contrast_uncertainty(c(5e-4), 0.5).unwrap();
        assert!((smaller / small - 4.0).abs() < 1e-5);
        // Fock moments at alpha = 2 with r chosen so that M = 1/2
        let e = (-16.0f64).exp();
        let r = (0.5 - e) / (1.0 - 0.5 * e);
        let fock = contrast_uncertainty_fock(&member(2.0, r), c(1.0), default_cutoff(c(2.0))).unwrap();
        assert!((fock - 3.375).abs() < 1e-6, "{fock}");
    }

    #[test]
    fn backaction_examples() {
        let ps = member(1.5, 0.6);
        let cutoff = default_cutoff(c(1.5));
        let rho = to_density_matrix(&ps, cutoff).unwrap();
        let (same, _) = backaction_state(&ps, c(0.0), cutoff).unwrap();
        assert!(same.distance(&rho).unwrap() < 1e-12);

        let g = c(0.5);
        let (after, _) = backaction_state(&ps, g, cutoff).unwrap();
        let (cc, _) = cosh_sinh_weights(0.5);
        let direct = parity_dephase(&rho, cc).unwrap();
        assert!(after.distance(&direct).unwrap() < 1e-8);
        assert!((after.trace() - rho.trace()).abs() < 1e-12);

        let big = member(3.5, 0.6);
        let (_, mix) = backaction_state(&big, g, default_cutoff(c(3.5))).unwrap();
        let want = backaction_mixture(0.6, g).unwrap();
        for (a, b) in mix.weights().iter().zip(want.weights()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!((entanglement_of_formation(&want) - backaction_entanglement(0.6, g)).abs() < 1e-12);
    }

    #[test]
    fn backaction_entanglement_curve() {
        assert_eq!(backaction_entanglement(1.0, c(0.0)), 1.0);
        let es: Vec<f64> = (0..=300)
            .map(|k| backaction_entanglement(1.0, c(k as f64 * 0.01)))
            .collect();
        assert!(es.windows(2).all(|w| w[1] <= w[0]));
        assert!(es[100] < 0.01);
        // C(x) > 1/2 for every finite x
        assert_eq!(entanglement_zero_crossing(1.0, 0.0, 5.0), None);
        assert!(entanglement_zero_crossing(0.5, 0.0, 5.0).is_some());
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(state_deviation(c(0.0)), 0.0);
        let exact = (1.0 - (-0.04f64).exp()).powi(2) / 4.0;
        assert!((state_deviation(c(0.1)) / exact - 1.0).abs() < 1e-12);
        assert!((state_deviation_small(c(0.1)) - 4e-4).abs() < 1e-18);
        let ratio = state_deviation(c(1e-3)) / state_deviation_small(c(1e-3));
        assert!((ratio - 1.0).abs() < 1e-5);
        let gs = [0.05, 0.1, 0.2];
        let ys: Vec<f64> = gs.iter().map(|&g| tradeoff_product(c(g), 0.5).unwrap().ln()).collect();
        let xs: Vec<f64> = gs.iter().map(|g: &f64| g.ln()).collect();
        let slope = (ys[2] - ys[0]) / (xs[2] - xs[0]);
        assert!((slope - 2.0).abs() < 0.1, "{slope}");
    }

    #[test]
    fn complementarity_examples() {
        let report = complementarity_demo(c(3.0), default_cutoff(c(3.0))).unwrap();
        assert!((report.none - 2.0).abs() < 1e-3);
        assert!((report.loss_only - 1.0).abs() < 1e-3);
        assert!(report.both < 1e-3);
        assert!(report.leakage < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn backaction_weights_are_a_distribution(r in -1.0f64..=1.0, g in 0.0f64..4.0) {
                let w = backaction_mixture(r, c(g)).unwrap().weights();
                prop_assert!(w.iter().all(|x| *x >= 0.0));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let (cc, s) = cosh_sinh_weights(2.0 * g * g);
                prop_assert!((cc + s - 1.0).abs() < 1e-15);
            }

            #[test]
            fn visibility_is_coincidence(alpha in 0.3f64..2.5, r in -1.0f64..=1.0, g in 0.1f64..2.0) {
                let ps = member(alpha, r);
                prop_assert!((contrast(&ps, c(g)).0 - parity_coincidence_closed_form(&ps).abs()).abs() < 1e-12);
            }
        }
    }
}
