//! Lossy transmission of the two-mode cat family
//!
//! ```text
//! rho = (rho_inc + r rho_coh) / (2 [1 + r e^{-2(|a0|^2 + |a1|^2)}]),
//! rho_inc = |u><u| + |v><v|,  rho_coh = |u><v| + |v><u|,
//! u = |a0, -a1>,  v = |-a0, a1>.
//! ```
//!
//! Loss is modelled as a chain of beam splitters with vacuum in the second
//! port. On a coherent dyad it acts as `|a><b| -> <b|a>^{1-t^2} |ta><tb|`, so the
//! family is closed: amplitudes shrink by `t_j` and the coherence term picks up
//! `exp(-2 sum_j |a_j|^2 (1 - t_j^2))`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{param, Error, Result};
use crate::fock::{annihilation, BeamSplitter, DensityMatrix, ModeSpec, PureState};

/// Member of the transmitted cat family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamState {
    pub alpha0: C64,
    pub alpha1: C64,
    /// Purity parameter, `|r| <= 1`.
    pub r: f64,
    /// Amplitude of the freshly prepared state this one descends from.
    pub base_alpha: C64,
}

impl ParamState {
    pub fn new(alpha0: C64, alpha1: C64, r: f64, base_alpha: C64) -> Result<Self> {
        if !r.is_finite() || r.abs() > 1.0 + 1e-12 {
            return Err(param("r", format!("purity {r} outside [-1, 1]")));
        }
        Ok(ParamState {
            alpha0,
            alpha1,
            r: r.clamp(-1.0, 1.0),
            base_alpha,
        })
    }

    /// The freshly prepared pure state: `r = 1`, both amplitudes `alpha`.
    pub fn pure(alpha: C64) -> Self {
        ParamState {
            alpha0: alpha,
            alpha1: alpha,
            r: 1.0,
            base_alpha: alpha,
        }
    }

    pub fn with_r(self, r: f64) -> Result<Self> {
        ParamState::new(self.alpha0, self.alpha1, r, self.base_alpha)
    }

    /// `e^{-2(|a0|^2 + |a1|^2)} = <v|u>`.
    pub fn overlap(&self) -> f64 {
        (-2.0 * (self.alpha0.norm_sqr() + self.alpha1.norm_sqr())).exp()
    }

    /// Joint parity `<(-1)^{n0+n1}> = (r + E) / (1 + r E)`.
    pub fn joint_parity(&self) -> f64 {
        let e = self.overlap();
        (self.r + e) / (1.0 + self.r * e)
    }
}

/// Loss line: amplitude transmittances per characteristic length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSpec {
    pub t0: f64,
    pub t1: f64,
    /// Characteristic length `L` over which the amplitudes shrink by `t0`, `t1`.
    pub length_scale: f64,
    /// Line length `l`.
    pub length: f64,
    pub n_steps: usize,
}

impl ChannelSpec {
    pub fn new(t0: f64, t1: f64, length_scale: f64, length: f64, n_steps: usize) -> Result<Self> {
        for (name, t) in [("T0", t0), ("T1", t1)] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(param(name, format!("transmittance {t} outside (0, 1]")));
            }
        }
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(param("L", "characteristic length must be positive"));
        }
        if !(length >= 0.0 && length.is_finite()) {
            return Err(param("l", "line length must be non-negative"));
        }
        if n_steps == 0 {
            return Err(param("n_steps", "at least one step is required"));
        }
        Ok(ChannelSpec {
            t0,
            t1,
            length_scale,
            length,
            n_steps,
        })
    }

    /// Amplitude transmittances `(T0^{l/L}, T1^{l/L})` of the whole line.
    pub fn total_transmittance(&self) -> (f64, f64) {
        let x = self.length / self.length_scale;
        (self.t0.powf(x), self.t1.powf(x))
    }

    /// Per-step transmittances `T_j^{l/(L n)}`.
    pub fn step_transmittance(&self) -> (f64, f64) {
        let x = self.length / (self.length_scale * self.n_steps as f64);
        (self.t0.powf(x), self.t1.powf(x))
    }

    pub fn with_length(self, length: f64) -> Result<Self> {
        ChannelSpec::new(self.t0, self.t1, self.length_scale, length, self.n_steps)
    }
}

fn branch_kets(ps: &ParamState, cutoff: usize) -> Result<(PureState, PureState)> {
    let u = PureState::coherent(ps.alpha0, cutoff)?.tensor(&PureState::coherent(-ps.alpha1, cutoff)?)?;
    let v = PureState::coherent(-ps.alpha0, cutoff)?.tensor(&PureState::coherent(ps.alpha1, cutoff)?)?;
    Ok((u, v))
}

/// Density matrix of a family member on two modes of equal `cutoff`.
pub fn to_density_matrix(ps: &ParamState, cutoff: usize) -> Result<DensityMatrix> {
    let (u, v) = branch_kets(ps, cutoff)?;
    let u = nalgebra::DVector::from_column_slice(u.amplitudes());
    let v = nalgebra::DVector::from_column_slice(v.amplitudes());
    let uv = &u * v.adjoint();
    let r = C64::new(ps.r, 0.0);
    let norm = 2.0 * (1.0 + ps.r * ps.overlap());
    let mat = (&u * u.adjoint() + &v * v.adjoint() + (&uv + uv.adjoint()) * r) / C64::new(norm, 0.0);
    DensityMatrix::from_matrix(ModeSpec::new(vec![cutoff, cutoff])?, mat)
}

/// Kraus operators `K_m[n', n] = <n', m| U |n, 0>` of one loss element with
/// amplitude transmittance `t`, for environment occupations `m <= cutoff_env`.
pub fn loss_kraus(t: f64, cutoff: usize, cutoff_env: usize) -> Result<Vec<DMatrix<C64>>> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(param("transmittance_step", format!("{t} outside (0, 1]")));
    }
    let bs = BeamSplitter::new(C64::new(t, 0.0), C64::new((1.0 - t * t).max(0.0).sqrt(), 0.0))?;
    let d = cutoff + 1;
    let mut ops = vec![DMatrix::zeros(d, d); cutoff_env.min(cutoff) + 1];
    for n in 0..d {
        let block = bs.block(n);
        // input |n, 0>: column n of the n-photon block
        for (m, op) in ops.iter_mut().enumerate().take(n + 1) {
            op[(n - m, n)] = block[(n - m, n)];
        }
    }
    Ok(ops)
}

/// One loss element on `mode`: attach a vacuum ancilla, mix, trace it out.
pub fn loss_step(
    rho: &DensityMatrix,
    mode: usize,
    transmittance_step: f64,
    cutoff_env: usize,
) -> Result<DensityMatrix> {
    if mode >= rho.modes().num_modes() {
        return Err(Error::Dimension(format!("no mode {mode}")));
    }
    if transmittance_step == 1.0 {
        return Ok(rho.clone());
    }
    let ops = loss_kraus(transmittance_step, rho.modes().cutoff(mode), cutoff_env)?;
    rho.apply_kraus(mode, &ops)
}

/// `n_steps` alternating loss elements on modes 0 and 1.
pub fn propagate_discrete(rho: &DensityMatrix, spec: &ChannelSpec) -> Result<DensityMatrix> {
    if rho.modes().num_modes() != 2 {
        return Err(Error::Dimension("channel acts on two-mode states".into()));
    }
    let (s0, s1) = spec.step_transmittance();
    let ops0 = loss_kraus(s0, rho.modes().cutoff(0), rho.modes().cutoff(0))?;
    let ops1 = loss_kraus(s1, rho.modes().cutoff(1), rho.modes().cutoff(1))?;
    let mut out = rho.clone();
    for _ in 0..spec.n_steps {
        if s0 < 1.0 {
            out = out.apply_kraus(0, &ops0)?;
        }
        if s1 < 1.0 {
            out = out.apply_kraus(1, &ops1)?;
        }
    }
    Ok(out)
}

/// Exact transport of a family member through the line.
pub fn propagate_analytic(ps: &ParamState, spec: &ChannelSpec) -> ParamState {
    let (f0, f1) = spec.total_transmittance();
    let decay = (-2.0 * (ps.alpha0.norm_sqr() * (1.0 - f0 * f0) + ps.alpha1.norm_sqr() * (1.0 - f1 * f1))).exp();
    ParamState {
        alpha0: ps.alpha0 * f0,
        alpha1: ps.alpha1 * f1,
        r: ps.r * decay,
        base_alpha: ps.base_alpha,
    }
}

/// Short-line purity `exp[4|a|^2 (ln T0 + ln T1) l/L]` of an initially pure
/// state, with the amplitudes left at `alpha`.
pub fn short_line_purity(alpha: C64, spec: &ChannelSpec) -> f64 {
    let x = spec.length / spec.length_scale;
    (4.0 * alpha.norm_sqr() * (spec.t0.ln() + spec.t1.ln()) * x).exp()
}

/// Result of projecting a density matrix back onto the family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub state: ParamState,
    /// Frobenius distance between the input and the refitted member.
    pub residual: f64,
    /// `residual` below the threshold used for the fit.
    pub in_family: bool,
}

/// Residual above which a state is reported as outside the family.
pub const FAMILY_RESIDUAL: f64 = 1e-6;

/// `Tr(a_0^p a_1^q rho)` from the matrix elements, without forming the operator.
pub fn ladder_moment(rho: &DensityMatrix, p: usize, q: usize) -> Result<C64> {
    let modes = rho.modes();
    if modes.num_modes() != 2 {
        return Err(Error::Dimension("moments need a two-mode state".into()));
    }
    let m = rho.matrix();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..modes.total_dim() {
        let (n0, n1) = (modes.digit(j, 0), modes.digit(j, 1));
        if n0 < p || n1 < q {
            continue;
        }
        let coef: f64 = ((n0 - p + 1)..=n0)
            .chain((n1 - q + 1)..=n1)
            .map(|k| (k as f64).sqrt())
            .product();
        let i = modes.index_of(&[n0 - p, n1 - q])?;
        acc += m[(j, i)] * coef;
    }
    Ok(acc)
}

/// `<(-1)^{n0+n1}>`.
pub fn joint_parity(rho: &DensityMatrix) -> f64 {
    let modes = rho.modes();
    rho.diagonal()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let n: usize = (0..modes.num_modes()).map(|m| modes.digit(i, m)).sum();
            if n.is_multiple_of(2) {
                *p
            } else {
                -*p
            }
        })
        .sum()
}

fn aligned_sqrt(z: C64, reference: C64) -> C64 {
    let s = z.sqrt();
    if (s * reference.conj()).re < 0.0 {
        -s
    } else {
        s
    }
}

/// Fits a two-mode state to the family.
///
/// Every family member has `<a0^2> = a0^2`, `<a0 a1> = -a0 a1`, `<a1^2> = a1^2`
/// and joint parity `(r + E)/(1 + r E)`, so the parameters follow in closed form;
/// `base_alpha` fixes the overall sign, which the family cannot resolve.
pub fn fit_param_state(rho: &DensityMatrix, base_alpha: C64) -> Result<Fit> {
    fit_param_state_with(rho, base_alpha, FAMILY_RESIDUAL)
}

pub fn fit_param_state_with(rho: &DensityMatrix, base_alpha: C64, threshold: f64) -> Result<Fit> {
    let modes = rho.modes();
    if modes.num_modes() != 2 || modes.cutoff(0) != modes.cutoff(1) {
        return Err(Error::Dimension("fit needs two modes of equal cutoff".into()));
    }
    let tr = rho.trace();
    if tr <= 0.0 {
        return Err(Error::ZeroProbability("fit of a null state".into()));
    }
    let rho = rho.scaled(1.0 / tr);
    let reference = if base_alpha.norm() > 0.0 {
        base_alpha
    } else {
        C64::new(1.0, 0.0)
    };
    let m00 = ladder_moment(&rho, 2, 0)?;
    let m01 = ladder_moment(&rho, 1, 1)?;
    let m11 = ladder_moment(&rho, 0, 2)?;
    let alpha0 = aligned_sqrt(m00, reference);
    let alpha1 = if alpha0.norm() > 1e-6 {
        -m01 / alpha0
    } else {
        aligned_sqrt(m11, reference)
    };
    let e = (-2.0 * (alpha0.norm_sqr() + alpha1.norm_sqr())).exp();
    let parity = joint_parity(&rho);
    let denom = 1.0 - parity * e;
    let r = if denom.abs() > 1e-300 {
        ((parity - e) / denom).clamp(-1.0, 1.0)
    } else {
        1.0
    };
    let state = ParamState {
        alpha0,
        alpha1,
        r,
        base_alpha,
    };
    let residual = rho.distance(&to_density_matrix(&state, modes.cutoff(0))?)?;
    Ok(Fit {
        state,
        residual,
        in_family: residual < threshold,
    })
}

/// `d rho / dx = [ln T0 L_0 rho + ln T1 L_1 rho] / L`, with
/// `L_j rho = n_j rho - 2 a_j rho a_j^+ + rho n_j`.
pub fn master_equation_rhs(rho: &DensityMatrix, spec: &ChannelSpec) -> Result<DensityMatrix> {
    let modes = rho.modes();
    if modes.num_modes() != 2 {
        return Err(Error::Dimension("channel acts on two-mode states".into()));
    }
    let mut out = rho.matrix() * C64::new(0.0, 0.0);
    for (mode, t) in [(0, spec.t0), (1, spec.t1)] {
        let jump = rho.apply_local(mode, &annihilation(modes.cutoff(mode)))?;
        let anti = rho.schur_map(|i, j| C64::new((modes.digit(i, mode) + modes.digit(j, mode)) as f64, 0.0));
        let l = anti.matrix() - jump.matrix() * C64::new(2.0, 0.0);
        out += l * C64::new(t.ln() / spec.length_scale, 0.0);
    }
    DensityMatrix::from_matrix(modes.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::default_cutoff;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn sample_state(alpha: f64, r: f64) -> ParamState {
        ParamState::new(c(alpha), C64::new(0.9 * alpha, 0.2), r, c(alpha)).unwrap()
    }

    #[test]
    fn family_density_matrix_examples() {
        let pure = to_density_matrix(&ParamState::pure(c(1.2)), 25).unwrap();
        assert!((pure.eigenvalues()[0] - 1.0).abs() < 1e-9);

        let mixed = to_density_matrix(&ParamState::pure(c(1.5)).with_r(0.0).unwrap(), 25).unwrap();
        let ev = mixed.eigenvalues();
        // the branches overlap by e^{-9}, which splits the pair to (1 +- e^{-9})/2
        let split = (-9.0f64).exp() / 2.0;
        assert!((ev[0] - (0.5 + split)).abs() < 1e-9 && (ev[1] - (0.5 - split)).abs() < 1e-9);
        assert!((ev[0] - 0.5).abs() < 1e-4);
        assert!(ev[2..].iter().all(|x| x.abs() < 1e-6));

        let vac = to_density_matrix(&ParamState::pure(c(0.0)).with_r(0.5).unwrap(), 4).unwrap();
        assert!((vac.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn loss_step_examples() {
        let rho = to_density_matrix(&sample_state(1.0, 0.4), 12).unwrap();
        assert_eq!(loss_step(&rho, 0, 1.0, 12).unwrap(), rho);

        let one = PureState::coherent(c(1.0), 30).unwrap().to_density();
        let out = loss_step(&one, 0, 0.9, 30).unwrap();
        let expect = PureState::coherent(c(0.9), 30).unwrap().to_density();
        assert!(out.distance(&expect).unwrap() < 1e-8);
    }

    #[test]
    fn single_step_refits_to_updated_member() {
        let ps = sample_state(1.3, 0.8);
        let cutoff = default_cutoff(c(1.3));
        let rho = to_density_matrix(&ps, cutoff).unwrap();
        let out = loss_step(&rho, 1, 0.93, cutoff).unwrap();
        let fit = fit_param_state(&out, ps.base_alpha).unwrap();
        let spec = ChannelSpec::new(1.0, 0.93, 1.0, 1.0, 1).unwrap();
        let expect = propagate_analytic(&ps, &spec);
        assert!(fit.residual < 1e-6);
        assert!((fit.state.r - expect.r).abs() < 1e-8);
        assert!((fit.state.alpha1 - expect.alpha1).norm() < 1e-8);
    }

    /// Literal series `sum_l (t^{-2}-1)^l / l! a^l t^n rho t^n a^{+l}`.
    fn series_step(rho: &DensityMatrix, t: f64, terms: usize) -> DMatrix<C64> {
        let cutoff = rho.modes().cutoff(0);
        let a = annihilation(cutoff);
        let tn = DMatrix::from_fn(cutoff + 1, cutoff + 1, |i, j| {
            if i == j {
                c(t.powi(i as i32))
            } else {
                c(0.0)
            }
        });
        let inner = &tn * rho.matrix() * &tn;
        let mut acc = DMatrix::zeros(cutoff + 1, cutoff + 1);
        let mut al = DMatrix::identity(cutoff + 1, cutoff + 1);
        let mut fact = 1.0;
        for l in 0..terms {
            if l > 0 {
                al = &al * &a;
                fact *= l as f64;
            }
            let w = (t.powi(-2) - 1.0).powi(l as i32) / fact;
            acc += (&al * &inner * al.adjoint()) * c(w);
        }
        acc
    }

    #[test]
    fn dilation_agrees_with_kraus_series() {
        let rho = PureState::coherent(C64::new(0.8, -0.5), 20)
            .unwrap()
            .normalized()
            .unwrap()
            .to_density();
        for (t, terms) in [(0.99, 5), (0.9, 21)] {
            let dil = loss_step(&rho, 0, t, 20).unwrap();
            let ser = series_step(&rho, t, terms);
            let tol = if terms == 5 { 1e-9 } else { 1e-12 };
            assert!((dil.matrix() - ser).norm() < tol, "t = {t}");
        }
    }

    #[test]
    fn discrete_chain_is_step_independent() {
        let ps = ParamState::pure(c(1.0));
        let rho = to_density_matrix(&ps, default_cutoff(c(1.0))).unwrap();
        let one = propagate_discrete(&rho, &ChannelSpec::new(0.9, 0.9, 1.0, 1.0, 1).unwrap()).unwrap();
        let many = propagate_discrete(&rho, &ChannelSpec::new(0.9, 0.9, 1.0, 1.0, 16).unwrap()).unwrap();
        assert!(one.distance(&many).unwrap() < 1e-8);

        let same = propagate_discrete(&rho, &ChannelSpec::new(1.0, 1.0, 1.0, 1.0, 4).unwrap()).unwrap();
        assert_eq!(same, rho);
    }

    #[test]
    fn discrete_chain_matches_analytic_solution() {
        let ps = ParamState::pure(c(1.2));
        let cutoff = default_cutoff(c(1.2));
        let spec = ChannelSpec::new(0.8, 0.9, 1.0, 0.1, 3).unwrap();
        let rho = propagate_discrete(&to_density_matrix(&ps, cutoff).unwrap(), &spec).unwrap();
        let expect = to_density_matrix(&propagate_analytic(&ps, &spec), cutoff).unwrap();
        assert!(rho.distance(&expect).unwrap() < 1e-6);
    }

    #[test]
    fn analytic_examples() {
        let ps = ParamState::pure(c(1.0));
        let spec = ChannelSpec::new(0.95, 0.95, 1.0, 1.0, 1).unwrap();
        let out = propagate_analytic(&ps, &spec);
        assert!((out.alpha0 - c(0.95)).norm() < 1e-15 && (out.alpha1 - c(0.95)).norm() < 1e-15);
        assert!((out.r - (-0.39f64).exp()).abs() < 1e-12);

        let still = propagate_analytic(&ps, &spec.with_length(0.0).unwrap());
        assert_eq!(still, ps);
    }

    #[test]
    fn short_line_formula_is_first_order_accurate() {
        let alpha = c(2.0);
        let spec = ChannelSpec::new(0.9, 0.85, 1.0, 0.01, 1).unwrap();
        let exact = propagate_analytic(&ParamState::pure(alpha), &spec).r;
        let approx = short_line_purity(alpha, &spec);
        assert!((approx / exact - 1.0).abs() < 0.01);
    }

    #[test]
    fn fit_round_trips() {
        let ps = sample_state(1.1, -0.3);
        let rho = to_density_matrix(&ps, 22).unwrap();
        let fit = fit_param_state(&rho, ps.base_alpha).unwrap();
        assert!(fit.residual < 1e-8 && fit.in_family);
        assert!((fit.state.r - ps.r).abs() < 1e-8);
        assert!((fit.state.alpha0 - ps.alpha0).norm() < 1e-8);
        assert!((fit.state.alpha1 - ps.alpha1).norm() < 1e-8);

        let pure = to_density_matrix(&ParamState::pure(c(1.5)), 25).unwrap();
        assert!((fit_param_state(&pure, c(1.5)).unwrap().state.r - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fit_flags_states_outside_family() {
        let rho = PureState::fock(ModeSpec::new(vec![4, 4]).unwrap(), &[1, 2])
            .unwrap()
            .to_density();
        let fit = fit_param_state(&rho, c(1.0)).unwrap();
        assert!(!fit.in_family);
    }

    #[test]
    fn analytic_solution_solves_master_equation() {
        let ps = ParamState::pure(c(1.0));
        let cutoff = 22;
        let base = ChannelSpec::new(0.8, 0.9, 1.0, 0.0, 1).unwrap();
        let h = 1e-4;
        for x in [0.0, 0.3, 1.0] {
            let at =
                |l: f64| to_density_matrix(&propagate_analytic(&ps, &base.with_length(l).unwrap()), cutoff).unwrap();
            let lo = if x == 0.0 { 0.0 } else { x - h };
            let hi = x + h;
            let fd = (at(hi).matrix() - at(lo).matrix()) / c(hi - lo);
            let rhs = master_equation_rhs(&at(x), &base).unwrap();
            let tol = if x == 0.0 { 1e-3 } else { 1e-6 };
            assert!((fd - rhs.matrix()).norm() < tol, "x = {x}");
        }
    }

    #[test]
    fn purity_decays_faster_than_amplitude() {
        let alpha = c(2.0);
        let spec = ChannelSpec::new(0.9, 0.9, 1.0, 0.01, 1).unwrap();
        let out = propagate_analytic(&ParamState::pure(alpha), &spec);
        let ratio = (1.0 - out.r) / (1.0 - out.alpha0.norm() / alpha.norm());
        assert!(ratio > 10.0, "ratio {ratio}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn semigroup(a in 0.1f64..3.0, r in -1.0f64..1.0, t0 in 0.5f64..1.0, t1 in 0.5f64..1.0,
                         l1 in 0.0f64..2.0, l2 in 0.0f64..2.0) {
                let ps = ParamState::new(c(a), c(a), r, c(a)).unwrap();
                let spec = ChannelSpec::new(t0, t1, 1.0, l1, 1).unwrap();
                let two = propagate_analytic(&propagate_analytic(&ps, &spec), &spec.with_length(l2).unwrap());
                let one = propagate_analytic(&ps, &spec.with_length(l1 + l2).unwrap());
                prop_assert!((two.r - one.r).abs() <= 1e-12 * one.r.abs().max(1e-300));
                prop_assert!((two.alpha0 - one.alpha0).norm() < 1e-12);
                prop_assert!((two.alpha1 - one.alpha1).norm() < 1e-12);
            }

            #[test]
            fn monotone_decay(a in 0.1f64..3.0, r in 0.0f64..1.0, t in 0.5f64..0.999, l in 0.0f64..2.0, dl in 0.0f64..1.0) {
                let ps = ParamState::new(c(a), c(a), r, c(a)).unwrap();
                let spec = ChannelSpec::new(t, t, 1.0, l, 1).unwrap();
                let near = propagate_analytic(&ps, &spec);
                let far = propagate_analytic(&ps, &spec.with_length(l + dl).unwrap());
                prop_assert!(far.r <= near.r + 1e-15);
                prop_assert!(far.alpha0.norm() <= near.alpha0.norm() + 1e-15);
            }

        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn discrete_output_stays_in_family(a in 0.2f64..1.5, r in -1.0f64..1.0, t0 in 0.6f64..1.0, t1 in 0.6f64..1.0, steps in 1usize..4) {
                let ps = ParamState::new(c(a), c(a), r, c(a)).unwrap();
                let cutoff = default_cutoff(c(a));
                let spec = ChannelSpec::new(t0, t1, 1.0, 1.0, steps).unwrap();
                let rho = propagate_discrete(&to_density_matrix(&ps, cutoff).unwrap(), &spec).unwrap();
                let fit = fit_param_state(&rho, ps.base_alpha).unwrap();
                prop_assert!(fit.residual < 1e-6);
            }
        }
    }
}
