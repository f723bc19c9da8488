//! Truncated Fock-space linear algebra.
//!
//! A multimode basis state `|n_0, n_1, ..., n_{M-1}>` is stored at the flat
//! index `sum_i n_i * stride_i`, with mode 0 the most significant digit. Every
//! mode `i` holds the levels `0..=cutoff_i`.
//!
//! Only two unitaries are needed by the toolkit: the beam splitter, defined by
//! its action on the mode operators
//!
//! ```text
//! U^dag (a_j, a_k)^T U = [[T, R], [-R*, T*]] (a_j, a_k)^T,
//! ```
//!
//! and the cross-Kerr coupler `exp(i pi n_j n_k)`. The beam splitter conserves
//! the total photon number of the pair, so it is applied block by block; the
//! coupler is a diagonal sign mask.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{param, Error, Result};

/// Upper bound on the joint dimension accepted by [`ModeSpec::new`].
pub const DEFAULT_MAX_DIM: usize = 1 << 24;

/// Cutoff used for modes that never hold more than one photon pair.
pub const PHOTON_MODE_CUTOFF: usize = 2;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Numerical tolerances shared by the state checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Norm, trace and hermiticity tolerance.
    pub norm: f64,
    /// Largest acceptable probability on a mode's top Fock level.
    pub leak: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { norm: 1e-9, leak: 1e-6 }
    }
}

/// Cutoff for a mode carrying a coherent amplitude `alpha`:
/// `ceil(|alpha|^2 + 5|alpha| + 10)`, which leaves a Poisson tail below 1e-10.
pub fn default_cutoff(alpha: C64) -> usize {
    let a = alpha.norm();
    (a * a + 5.0 * a + 10.0).ceil() as usize
}

/// Per-mode Fock cutoffs of a multimode register.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModeSpec {
    cutoffs: Vec<usize>,
}

impl ModeSpec {
    pub fn new(cutoffs: Vec<usize>) -> Result<Self> {
        Self::with_budget(cutoffs, DEFAULT_MAX_DIM)
    }

    /// Like [`ModeSpec::new`] with an explicit bound on the joint dimension.
    pub fn with_budget(cutoffs: Vec<usize>, max_dim: usize) -> Result<Self> {
        let mut total: usize = 1;
        for &c in &cutoffs {
            if c < 1 {
                return Err(param("cutoff", "every mode needs a cutoff of at least 1"));
            }
            total = total.checked_mul(c + 1).filter(|&t| t <= max_dim).ok_or_else(|| {
                param(
                    "cutoffs",
                    format!("joint dimension exceeds the budget of {max_dim} amplitudes"),
                )
            })?;
        }
        Ok(ModeSpec { cutoffs })
    }

    pub fn single(cutoff: usize) -> Result<Self> {
        Self::new(vec![cutoff])
    }

    /// The zero-mode register (dimension 1), left over after projecting every mode.
    pub fn empty() -> Self {
        ModeSpec { cutoffs: Vec::new() }
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn num_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoff(&self, mode: usize) -> usize {
        self.cutoffs[mode]
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.cutoffs[mode] + 1
    }

    pub fn total_dim(&self) -> usize {
        self.cutoffs.iter().map(|c| c + 1).product()
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.cutoffs[mode + 1..].iter().map(|c| c + 1).product()
    }

    /// Occupation of `mode` at flat index `idx`.
    pub fn digit(&self, idx: usize, mode: usize) -> usize {
        (idx / self.stride(mode)) % self.dim(mode)
    }

    /// Flat index of the occupation vector `occ`.
    pub fn index_of(&self, occ: &[usize]) -> Result<usize> {
        if occ.len() != self.num_modes() {
            return Err(Error::Dimension(format!(
                "occupation has {} entries for {} modes",
                occ.len(),
                self.num_modes()
            )));
        }
        let mut idx = 0;
        for (m, (&n, &c)) in occ.iter().zip(&self.cutoffs).enumerate() {
            if n > c {
                return Err(param("occupation", format!("level {n} exceeds cutoff {c} of mode {m}")));
            }
            idx = idx * (c + 1) + n;
        }
        Ok(idx)
    }

    pub fn without(&self, mode: usize) -> ModeSpec {
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.remove(mode);
        ModeSpec { cutoffs }
    }

    pub fn concat(&self, other: &ModeSpec) -> Result<ModeSpec> {
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.extend_from_slice(&other.cutoffs);
        ModeSpec::new(cutoffs)
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes() {
            return Err(Error::Dimension(format!(
                "mode {mode} out of range for {} modes",
                self.num_modes()
            )));
        }
        Ok(())
    }

    fn check_pair(&self, j: usize, k: usize) -> Result<()> {
        self.check_mode(j)?;
        self.check_mode(k)?;
        if j == k {
            return Err(param("modes", "two-mode gate needs distinct modes"));
        }
        Ok(())
    }

    /// Index with digit `mode` removed: the flat index in `self.without(mode)`.
    fn rest_index(&self, idx: usize, mode: usize) -> usize {
        let stride = self.stride(mode);
        let hi = idx / (stride * self.dim(mode));
        hi * stride + idx % stride
    }
}

/// Beam-splitter unitary with its photon-number blocks.
///
/// `block(N)[(m, n)] = <m, N-m| U |n, N-n>` where the first entry counts
/// photons in mode `j`.
#[derive(Clone, Debug)]
pub struct BeamSplitter {
    t: C64,
    r: C64,
    blocks: Vec<DMatrix<C64>>,
}

impl BeamSplitter {
    /// Validates `|T|^2 + |R|^2 = 1` to within 1e-9.
    pub fn new(t: C64, r: C64) -> Result<Self> {
        Self::with_capacity(t, r, 0)
    }

    /// Precomputes all blocks up to `max_photons` total photons.
    pub fn with_capacity(t: C64, r: C64, max_photons: usize) -> Result<Self> {
        let defect = (t.norm_sqr() + r.norm_sqr() - 1.0).abs();
        if !defect.is_finite() || defect > Tolerances::default().norm {
            return Err(param(
                "T,R",
                format!("|T|^2 + |R|^2 = {} is not 1", t.norm_sqr() + r.norm_sqr()),
            ));
        }
        let blocks = (0..=max_photons).map(|n| photon_block(t, r, n)).collect();
        Ok(BeamSplitter { t, r, blocks })
    }

    pub fn transmittance(&self) -> C64 {
        self.t
    }

    pub fn reflectance(&self) -> C64 {
        self.r
    }

    /// The inverse splitter `U(T*, -R)`.
    pub fn inverse(&self) -> BeamSplitter {
        let t = self.t.conj();
        let r = -self.r;
        let blocks = (0..self.blocks.len()).map(|n| photon_block(t, r, n)).collect();
        BeamSplitter { t, r, blocks }
    }

    pub fn block(&self, total: usize) -> DMatrix<C64> {
        match self.blocks.get(total) {
            Some(b) => b.clone(),
            None => photon_block(self.t, self.r, total),
        }
    }

    /// Applies `U_jk` to `state`; amplitude pushed above either cutoff is lost.
    pub fn apply(&self, state: &PureState, j: usize, k: usize) -> Result<PureState> {
        let modes = &state.modes;
        modes.check_pair(j, k)?;
        let (cj, ck) = (modes.cutoff(j), modes.cutoff(k));
        let (sj, sk) = (modes.stride(j), modes.stride(k));
        let max_n = cj + ck;
        let extra: Vec<DMatrix<C64>> = (self.blocks.len()..=max_n)
            .map(|n| photon_block(self.t, self.r, n))
            .collect();
        let block = |n: usize| -> &DMatrix<C64> {
            if n < self.blocks.len() {
                &self.blocks[n]
            } else {
                &extra[n - self.blocks.len()]
            }
        };

        let mut out = vec![ZERO; state.amps.len()];
        let mut src = vec![ZERO; max_n + 1];
        for base in 0..state.amps.len() {
            if modes.digit(base, j) != 0 || modes.digit(base, k) != 0 {
                continue;
            }
            for total in 0..=max_n {
                let lo = total.saturating_sub(ck);
                let hi = total.min(cj);
                let mut any = false;
                #[allow(clippy::needless_range_loop)]
                for n in lo..=hi {
                    let a = state.amps[base + n * sj + (total - n) * sk];
                    src[n] = a;
                    any |= a != ZERO;
                }
                if !any {
                    continue;
                }
                let b = block(total);
                for m in lo..=hi {
                    let mut acc = ZERO;
                    for n in lo..=hi {
                        acc += b[(m, n)] * src[n];
                    }
                    out[base + m * sj + (total - m) * sk] = acc;
                }
            }
        }
        Ok(PureState {
            modes: modes.clone(),
            amps: out,
        })
    }
}

/// Block of `U` on the `total`-photon subspace of a mode pair.
///
/// The mode matrix factors as `diag(e^{ia}, e^{-ia}) Rot(theta) diag(e^{ib}, e^{-ib})`
/// with `cos theta = |T|`, `a + b = arg T`, `a - b = arg R`. The phase factors are
/// diagonal in the Fock basis; the rotation is `exp(theta (a_j^+ a_k - a_k^+ a_j))`,
/// obtained from the eigenvectors of the real tridiagonal `2 J_x` whose spectrum
/// is exactly `{-N, -N+2, ..., N}`. This keeps every entry accurate to a few ulps
/// even where the binomial expansion cancels catastrophically.
fn photon_block(t: C64, r: C64, total: usize) -> DMatrix<C64> {
    let n = total;
    let d = n + 1;
    let theta = r.norm().atan2(t.norm());
    let (pt, pr) = (t.arg(), r.arg());
    let (a, b) = ((pt + pr) / 2.0, (pt - pr) / 2.0);

    let jx = DMatrix::from_fn(d, d, |i, k| {
        if i == k + 1 {
            ((i * (n + 1 - i)) as f64).sqrt()
        } else if k == i + 1 {
            ((k * (n + 1 - k)) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jx.symmetric_eigen();
    // exp(theta G) = Q V diag(exp(-i theta lambda)) V^T Q^dag with Q = diag(i^m)
    let phases: Vec<C64> = eig
        .eigenvalues
        .iter()
        .map(|&l| C64::from_polar(1.0, -theta * l.round()))
        .collect();
    let v = &eig.eigenvectors;
    let i_pow = |m: usize| -> C64 {
        match m % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    };
    DMatrix::from_fn(d, d, |m, k| {
        let mut acc = ZERO;
        for (e, ph) in phases.iter().enumerate() {
            acc += ph * (v[(m, e)] * v[(k, e)]);
        }
        let side = (2.0 * m as f64 - n as f64) * a + (2.0 * k as f64 - n as f64) * b;
        acc * i_pow(m) * i_pow(k).conj() * C64::from_polar(1.0, side)
    })
}

/// Dense amplitude tensor over a truncated multimode Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    modes: ModeSpec,
    amps: Vec<C64>,
}

impl PureState {
    pub fn from_amplitudes(modes: ModeSpec, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != modes.total_dim() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for joint dimension {}",
                amps.len(),
                modes.total_dim()
            )));
        }
        Ok(PureState { modes, amps })
    }

    pub fn scalar(value: C64) -> Self {
        PureState {
            modes: ModeSpec::empty(),
            amps: vec![value],
        }
    }

    pub fn vacuum(modes: ModeSpec) -> Self {
        let mut amps = vec![ZERO; modes.total_dim()];
        amps[0] = C64::new(1.0, 0.0);
        PureState { modes, amps }
    }

    /// Number state `|occ_0, occ_1, ...>`.
    pub fn fock(modes: ModeSpec, occ: &[usize]) -> Result<Self> {
        let idx = modes.index_of(occ)?;
        let mut amps = vec![ZERO; modes.total_dim()];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(PureState { modes, amps })
    }

    /// Single-mode coherent state, truncated at `cutoff` and deliberately left
    /// unnormalized so that the truncation deficit stays visible.
    pub fn coherent(alpha: C64, cutoff: usize) -> Result<Self> {
        let modes = ModeSpec::single(cutoff)?;
        Ok(PureState {
            amps: coherent_amplitudes(alpha, cutoff),
            modes,
        })
    }

    pub fn modes(&self) -> &ModeSpec {
        &self.modes
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, occ: &[usize]) -> Result<C64> {
        Ok(self.amps[self.modes.index_of(occ)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::ZeroProbability("cannot normalize a null state".into()));
        }
        let s = 1.0 / n.sqrt();
        Ok(PureState {
            modes: self.modes.clone(),
            amps: self.amps.iter().map(|a| a * s).collect(),
        })
    }

    pub fn scaled(&self, factor: C64) -> Self {
        PureState {
            modes: self.modes.clone(),
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.modes != other.modes {
            return Err(Error::Dimension("inner product of different registers".into()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|<a|b>|^2 / (<a|a><b|b>)`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        let ov = self.inner(other)?;
        let den = self.norm_sqr() * other.norm_sqr();
        if den <= 0.0 {
            return Err(Error::ZeroProbability("fidelity with a null state".into()));
        }
        Ok(ov.norm_sqr() / den)
    }

    /// Tensor product; the modes of `other` are appended after those of `self`.
    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        let modes = self.modes.concat(&other.modes)?;
        let mut amps = Vec::with_capacity(modes.total_dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(PureState { modes, amps })
    }

    /// Largest relative weight found on the top level of any mode.
    pub fn leakage(&self) -> f64 {
        let norm = self.norm_sqr();
        if norm <= 0.0 {
            return 0.0;
        }
        (0..self.modes.num_modes())
            .map(|m| {
                let top = self.modes.cutoff(m);
                self.amps
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| self.modes.digit(*i, m) == top)
                    .map(|(_, a)| a.norm_sqr())
                    .sum::<f64>()
                    / norm
            })
            .fold(0.0, f64::max)
    }

    pub fn is_under_truncated(&self, tol: &Tolerances) -> bool {
        self.leakage() >= tol.leak
    }

    /// `<n_mode>` of the normalized state.
    pub fn mean_photon_number(&self, mode: usize) -> Result<f64> {
        self.modes.check_mode(mode)?;
        let norm = self.norm_sqr();
        if norm <= 0.0 {
            return Err(Error::ZeroProbability("photon number of a null state".into()));
        }
        let s: f64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| self.modes.digit(i, mode) as f64 * a.norm_sqr())
            .sum();
        Ok(s / norm)
    }

    pub fn apply_beam_splitter(&self, j: usize, k: usize, t: C64, r: C64) -> Result<Self> {
        BeamSplitter::new(t, r)?.apply(self, j, k)
    }

    /// `exp(i pi n_j n_k)`: flips the sign of every amplitude with `n_j n_k` odd.
    pub fn apply_cross_kerr(&self, j: usize, k: usize) -> Result<Self> {
        self.modes.check_pair(j, k)?;
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if (self.modes.digit(i, j) * self.modes.digit(i, k)) % 2 == 1 {
                    -a
                } else {
                    a
                }
            })
            .collect();
        Ok(PureState {
            modes: self.modes.clone(),
            amps,
        })
    }

    /// `(-1)^{n_mode}`.
    pub fn apply_parity(&self, mode: usize) -> Result<Self> {
        self.apply_phase(mode, |n| if n % 2 == 0 { 1.0.into() } else { (-1.0).into() })
    }

    /// Multiplies every amplitude by `phase(n_mode)`.
    pub fn apply_phase(&self, mode: usize, phase: impl Fn(usize) -> C64) -> Result<Self> {
        self.modes.check_mode(mode)?;
        let table: Vec<C64> = (0..self.modes.dim(mode)).map(phase).collect();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, &a)| a * table[self.modes.digit(i, mode)])
            .collect();
        Ok(PureState {
            modes: self.modes.clone(),
            amps,
        })
    }

    /// Unnormalized conditional state `<n|_j |self>` together with its squared norm.
    pub fn project_fock(&self, j: usize, n: usize) -> Result<(Self, f64)> {
        self.modes.check_mode(j)?;
        if n > self.modes.cutoff(j) {
            return Err(param("n", format!("level {n} above cutoff {}", self.modes.cutoff(j))));
        }
        let mut bra = vec![ZERO; self.modes.dim(j)];
        bra[n] = C64::new(1.0, 0.0);
        let out = self.project_onto(j, &bra)?;
        let w = out.norm_sqr();
        Ok((out, w))
    }

    /// Contracts mode `j` with `<phi|`, where `phi` is given by its ket amplitudes.
    pub fn project_onto(&self, j: usize, phi: &[C64]) -> Result<Self> {
        self.modes.check_mode(j)?;
        if phi.len() != self.modes.dim(j) {
            return Err(Error::Dimension(format!(
                "projector of length {} on mode of dimension {}",
                phi.len(),
                self.modes.dim(j)
            )));
        }
        let modes = self.modes.without(j);
        let mut amps = vec![ZERO; modes.total_dim()];
        for (i, &a) in self.amps.iter().enumerate() {
            let c = phi[self.modes.digit(i, j)];
            if c != ZERO && a != ZERO {
                amps[self.modes.rest_index(i, j)] += c.conj() * a;
            }
        }
        Ok(PureState { modes, amps })
    }

    /// Reorders the modes: output mode `i` is input mode `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<PureState> {
        let mut seen = perm.to_vec();
        seen.sort_unstable();
        if seen != (0..self.modes.num_modes()).collect::<Vec<_>>() {
            return Err(param("perm", "not a permutation of the modes"));
        }
        let old = &self.modes;
        let modes = ModeSpec::new(perm.iter().map(|&p| old.cutoff(p)).collect())?;
        let strides: Vec<usize> = perm.iter().map(|&p| old.stride(p)).collect();
        let mut amps = vec![ZERO; modes.total_dim()];
        for (new_idx, slot) in amps.iter_mut().enumerate() {
            let mut old_idx = 0;
            for (pos, stride) in strides.iter().enumerate() {
                old_idx += modes.digit(new_idx, pos) * stride;
            }
            *slot = self.amps[old_idx];
        }
        Ok(PureState { modes, amps })
    }

    /// Reduced density matrix on `keep` (increasing mode order), computed from
    /// the amplitudes without forming the full projector.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() {
            return Err(param("keep", "at least one mode must be kept"));
        }
        for &m in &keep {
            self.modes.check_mode(m)?;
        }
        let mut perm = keep.clone();
        perm.extend((0..self.modes.num_modes()).filter(|m| !keep.contains(m)));
        let p = self.permuted(&perm)?;
        let kept = ModeSpec::new(keep.iter().map(|&m| self.modes.cutoff(m)).collect())?;
        let dk = kept.total_dim();
        let dr = p.amps.len() / dk;
        // row-major amplitudes: a[(kept, rest)] sits at kept * dr + rest
        let a = DMatrix::from_row_slice(dk, dr, &p.amps);
        Ok(DensityMatrix {
            modes: kept,
            mat: &a * a.adjoint(),
        })
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amps);
        DensityMatrix {
            modes: self.modes.clone(),
            mat: &v * v.adjoint(),
        }
    }
}

/// A [`PureState`] whose modes are addressed by circuit labels rather than by
/// position, so gates can be written as in a circuit diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledState {
    state: PureState,
    labels: Vec<usize>,
}

impl LabeledState {
    pub fn new(state: PureState, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != state.modes.num_modes() {
            return Err(Error::Dimension(format!(
                "{} labels for {} modes",
                labels.len(),
                state.modes.num_modes()
            )));
        }
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(param("labels", "mode labels must be distinct"));
        }
        Ok(LabeledState { state, labels })
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn pos(&self, label: usize) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::Dimension(format!("no mode labelled {label}")))
    }

    /// Tensors a single-mode `ket` onto the register as mode `label`.
    pub fn append(self, label: usize, ket: &PureState) -> Result<Self> {
        if ket.modes.num_modes() != 1 {
            return Err(Error::Dimension("appended ket must be single-mode".into()));
        }
        let mut labels = self.labels;
        labels.push(label);
        LabeledState::new(self.state.tensor(ket)?, labels)
    }

    pub fn beam_splitter(self, j: usize, k: usize, bs: &BeamSplitter) -> Result<Self> {
        let (pj, pk) = (self.pos(j)?, self.pos(k)?);
        Ok(LabeledState {
            state: bs.apply(&self.state, pj, pk)?,
            labels: self.labels,
        })
    }

    pub fn cross_kerr(self, j: usize, k: usize) -> Result<Self> {
        let (pj, pk) = (self.pos(j)?, self.pos(k)?);
        Ok(LabeledState {
            state: self.state.apply_cross_kerr(pj, pk)?,
            labels: self.labels,
        })
    }

    pub fn parity(self, j: usize) -> Result<Self> {
        let pj = self.pos(j)?;
        Ok(LabeledState {
            state: self.state.apply_parity(pj)?,
            labels: self.labels,
        })
    }

    /// Projects mode `label` on `|n>` and drops it.
    pub fn project_fock(self, label: usize, n: usize) -> Result<Self> {
        let p = self.pos(label)?;
        let (state, _) = self.state.project_fock(p, n)?;
        let mut labels = self.labels;
        labels.remove(p);
        Ok(LabeledState { state, labels })
    }

    /// Contracts mode `label` with `<phi|` and drops it.
    pub fn project_onto(self, label: usize, phi: &[C64]) -> Result<Self> {
        let p = self.pos(label)?;
        let state = self.state.project_onto(p, phi)?;
        let mut labels = self.labels;
        labels.remove(p);
        Ok(LabeledState { state, labels })
    }

    /// The underlying state with its modes permuted into `order`.
    pub fn ordered(&self, order: &[usize]) -> Result<PureState> {
        if order.len() != self.labels.len() {
            return Err(Error::Dimension("order must list every label once".into()));
        }
        let perm: Vec<usize> = order.iter().map(|&l| self.pos(l)).collect::<Result<_>>()?;
        self.state.permuted(&perm)
    }
}

/// Truncated Poissonian amplitudes `exp(-|a|^2/2) a^k / sqrt(k!)`, `k = 0..=cutoff`.
pub fn coherent_amplitudes(alpha: C64, cutoff: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(c);
    for k in 1..=cutoff {
        c = c * alpha / (k as f64).sqrt();
        amps.push(c);
    }
    amps
}

/// `coherent_state` under its conventional name.
pub fn coherent_state(alpha: C64, cutoff: usize) -> Result<PureState> {
    PureState::coherent(alpha, cutoff)
}

/// Single-mode operator stored by its nonzero entries, grouped by input level.
struct SparseOp {
    by_input: Vec<Vec<(usize, C64)>>,
}

impl SparseOp {
    fn new(op: &DMatrix<C64>) -> Self {
        let by_input = (0..op.ncols())
            .map(|n| {
                (0..op.nrows())
                    .filter_map(|m| {
                        let v = op[(m, n)];
                        (v != ZERO).then_some((m, v))
                    })
                    .collect()
            })
            .collect();
        SparseOp { by_input }
    }
}

/// Hermitian, trace-class matrix over a truncated Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    modes: ModeSpec,
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_matrix(modes: ModeSpec, mat: DMatrix<C64>) -> Result<Self> {
        let d = modes.total_dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for joint dimension {d}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(DensityMatrix { modes, mat })
    }

    pub fn from_pure(state: &PureState) -> Self {
        state.to_density()
    }

    pub fn modes(&self) -> &ModeSpec {
        &self.modes
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.mat.diagonal().iter().map(|c| c.re).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DensityMatrix {
            modes: self.modes.clone(),
            mat: &self.mat * C64::new(factor, 0.0),
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= 0.0 || !t.is_finite() {
            return Err(Error::ZeroProbability("cannot normalize a null density matrix".into()));
        }
        Ok(self.scaled(1.0 / t))
    }

    /// Largest elementwise deviation from hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.mat.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, sorted in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// Hilbert-Schmidt (Frobenius) distance.
    pub fn distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.modes != other.modes {
            return Err(Error::Dimension("distance between different registers".into()));
        }
        Ok((&self.mat - &other.mat).norm())
    }

    /// Probability weight on the top level of each mode, relative to the trace.
    pub fn leakage(&self) -> f64 {
        let diag = self.diagonal();
        let tr: f64 = diag.iter().sum();
        if tr <= 0.0 {
            return 0.0;
        }
        (0..self.modes.num_modes())
            .map(|m| {
                let top = self.modes.cutoff(m);
                diag.iter()
                    .enumerate()
                    .filter(|(i, _)| self.modes.digit(*i, m) == top)
                    .map(|(_, p)| *p)
                    .sum::<f64>()
                    / tr
            })
            .fold(0.0, f64::max)
    }

    /// Reduced state on the modes in `keep` (output order is increasing mode index).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() {
            return Err(param("keep", "at least one mode must be kept"));
        }
        for &m in &keep {
            self.modes.check_mode(m)?;
        }
        let traced: Vec<usize> = (0..self.modes.num_modes()).filter(|m| !keep.contains(m)).collect();
        let kept_spec = ModeSpec::new(keep.iter().map(|&m| self.modes.cutoff(m)).collect())?;
        let traced_dims: Vec<usize> = traced.iter().map(|&m| self.modes.dim(m)).collect();
        let traced_total: usize = traced_dims.iter().product();

        let strides: Vec<usize> = (0..self.modes.num_modes()).map(|m| self.modes.stride(m)).collect();
        // flat offset contributed by each kept / traced sub-index
        let offset = |spec_modes: &[usize], dims: &[usize], mut sub: usize| -> usize {
            let mut off = 0;
            for (pos, &m) in spec_modes.iter().enumerate().rev() {
                let d = dims[pos];
                off += (sub % d) * strides[m];
                sub /= d;
            }
            off
        };
        let kept_dims: Vec<usize> = keep.iter().map(|&m| self.modes.dim(m)).collect();
        let dk = kept_spec.total_dim();
        let kept_off: Vec<usize> = (0..dk).map(|a| offset(&keep, &kept_dims, a)).collect();
        let traced_off: Vec<usize> = (0..traced_total).map(|t| offset(&traced, &traced_dims, t)).collect();

        let mut out = DMatrix::from_element(dk, dk, ZERO);
        for b in 0..dk {
            for a in 0..dk {
                let mut acc = ZERO;
                for &t in &traced_off {
                    acc += self.mat[(kept_off[a] + t, kept_off[b] + t)];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(DensityMatrix {
            modes: kept_spec,
            mat: out,
        })
    }

    fn check_local(&self, mode: usize, op: &DMatrix<C64>) -> Result<()> {
        self.modes.check_mode(mode)?;
        let dim = self.modes.dim(mode);
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::Dimension(format!(
                "{}x{} operator on mode of dimension {dim}",
                op.nrows(),
                op.ncols()
            )));
        }
        Ok(())
    }

    /// `K rho K^dag` with `K` acting on `mode`.
    pub fn apply_local(&self, mode: usize, op: &DMatrix<C64>) -> Result<Self> {
        self.apply_kraus(mode, std::slice::from_ref(op))
    }

    /// `sum_i K_i rho K_i^dag` with every `K_i` acting on `mode`.
    ///
    /// The map is assembled as a sparse superoperator on the `(n, m)` level pairs
    /// of `mode` and swept once over the matrix.
    pub fn apply_kraus(&self, mode: usize, ops: &[DMatrix<C64>]) -> Result<Self> {
        for op in ops {
            self.check_local(mode, op)?;
        }
        let dim = self.modes.dim(mode);
        let mut sup: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); dim * dim];
        for op in ops.iter().map(SparseOp::new) {
            for n in 0..dim {
                for &(np, a) in &op.by_input[n] {
                    for m in 0..dim {
                        for &(mp, b) in &op.by_input[m] {
                            sup[n * dim + m].push((np, mp, a * b.conj()));
                        }
                    }
                }
            }
        }
        for list in &mut sup {
            list.sort_by_key(|e| (e.0, e.1));
            list.dedup_by(|next, kept| {
                if next.0 == kept.0 && next.1 == kept.1 {
                    kept.2 += next.2;
                    true
                } else {
                    false
                }
            });
        }

        let d = self.mat.nrows();
        let stride = self.modes.stride(mode);
        let src = self.mat.as_slice();
        let mut out = vec![ZERO; d * d];
        // column-major storage: element (i, j) lives at j * d + i
        for j in 0..d {
            let m = (j / stride) % dim;
            let bj = j - m * stride;
            for i in 0..d {
                let v = src[j * d + i];
                if v == ZERO {
                    continue;
                }
                let n = (i / stride) % dim;
                let bi = i - n * stride;
                for &(np, mp, w) in &sup[n * dim + m] {
                    out[(bj + mp * stride) * d + bi + np * stride] += w * v;
                }
            }
        }
        Ok(DensityMatrix {
            modes: self.modes.clone(),
            mat: DMatrix::from_vec(d, d, out),
        })
    }

    /// `(-1)^{n_mode} rho (-1)^{n_mode}`.
    pub fn apply_parity(&self, mode: usize) -> Result<Self> {
        self.modes.check_mode(mode)?;
        let d = self.mat.nrows();
        let sign: Vec<f64> = (0..d)
            .map(|i| {
                if self.modes.digit(i, mode).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let mat = DMatrix::from_fn(d, d, |i, j| self.mat[(i, j)] * (sign[i] * sign[j]));
        Ok(DensityMatrix {
            modes: self.modes.clone(),
            mat,
        })
    }

    /// Elementwise product with `f(row, col)`; used for maps that are diagonal
    /// in the Fock basis (dephasing, parity-conditioned channels).
    pub fn schur_map(&self, f: impl Fn(usize, usize) -> C64) -> Self {
        let d = self.mat.nrows();
        DensityMatrix {
            modes: self.modes.clone(),
            mat: DMatrix::from_fn(d, d, |i, j| self.mat[(i, j)] * f(i, j)),
        }
    }

    /// `Tr(rho A)` for an operator on the full register.
    pub fn expectation(&self, op: &DMatrix<C64>) -> Result<C64> {
        if op.shape() != self.mat.shape() {
            return Err(Error::Dimension("operator shape differs from the state".into()));
        }
        Ok((&self.mat * op).trace())
    }
}

/// Single-mode annihilation operator truncated at `cutoff`.
pub fn annihilation(cutoff: usize) -> DMatrix<C64> {
    let d = cutoff + 1;
    DMatrix::from_fn(d, d, |m, n| {
        if n == m + 1 {
            C64::new((n as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

/// `I (x) ... (x) op (x) ... (x) I` on the full register.
pub fn embed(modes: &ModeSpec, mode: usize, op: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    modes.check_mode(mode)?;
    let d = modes.total_dim();
    let stride = modes.stride(mode);
    let dim = modes.dim(mode);
    let mut out = DMatrix::from_element(d, d, ZERO);
    for col in 0..d {
        let n = (col / stride) % dim;
        let base = col - n * stride;
        for m in 0..dim {
            let v = op[(m, n)];
            if v != ZERO {
                out[(base + m * stride, col)] = v;
            }
        }
    }
    Ok(out)
}
