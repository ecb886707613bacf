//! Truncated Fock-space simulator used as a brute-force oracle for the
//! photon-counting probabilities of the weak homodyne setup.
//!
//! States are dense complex arrays over the occupation lattice
//! `{0..=cutoff}^modes` in row-major order (first mode slowest). Nothing in
//! here depends on the closed-form expressions in [`crate::correlations`].

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::boxes::{CorrelationBox, Setting};
use crate::error::{Error, Result};

/// Default truncation tolerance on lost norm.
pub const DEFAULT_TAU_TRUNC: f64 = 1e-10;

/// Photon-number cutoff for a coherent state of mean photon number `alpha2`.
///
/// `ceil(alpha2 + 8 sqrt(alpha2 + 1) + 10)`: the Poisson tail past this point
/// is below double-precision noise.
pub fn cutoff_for(alpha2: f64) -> usize {
    (alpha2 + 8.0 * (alpha2 + 1.0).sqrt() + 10.0).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasisSpec {
    modes: Vec<String>,
    cutoff: usize,
}

impl FockBasisSpec {
    pub fn new<S: Into<String>>(modes: impl IntoIterator<Item = S>, cutoff: usize) -> Result<Self> {
        let modes: Vec<String> = modes.into_iter().map(Into::into).collect();
        if cutoff < 1 {
            return Err(Error::InvalidParameter("cutoff must be at least 1".into()));
        }
        if modes.is_empty() {
            return Err(Error::InvalidParameter("basis needs at least one mode".into()));
        }
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(Error::InvalidParameter(format!("duplicate mode label {m}")));
            }
        }
        Ok(Self { modes, cutoff })
    }

    pub fn modes(&self) -> &[String] {
        &self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Local dimension of one mode.
    pub fn levels(&self) -> usize {
        self.cutoff + 1
    }

    pub fn dim(&self) -> usize {
        self.levels().pow(self.modes.len() as u32)
    }

    pub fn mode_index(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m == label)
            .ok_or_else(|| Error::InvalidParameter(format!("mode {label} not in basis")))
    }

    fn stride(&self, mode: usize) -> usize {
        self.levels().pow((self.modes.len() - 1 - mode) as u32)
    }

    pub fn index_of(&self, occupations: &[usize]) -> Option<usize> {
        if occupations.len() != self.modes.len() {
            return None;
        }
        let mut idx = 0;
        for &n in occupations {
            if n > self.cutoff {
                return None;
            }
            idx = idx * self.levels() + n;
        }
        Some(idx)
    }

    pub fn occupations_of(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.modes.len()];
        for slot in occ.iter_mut().rev() {
            *slot = index % self.levels();
            index /= self.levels();
        }
        occ
    }
}

#[derive(Debug, Clone)]
pub struct StateVector {
    basis: FockBasisSpec,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn vacuum(basis: FockBasisSpec) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self { basis, amplitudes }
    }

    pub fn from_amplitudes(basis: FockBasisSpec, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::InvalidParameter(format!(
                "expected {} amplitudes, got {}",
                basis.dim(),
                amplitudes.len()
            )));
        }
        Ok(Self { basis, amplitudes })
    }

    /// Single-mode Fock state `|n>`.
    pub fn number_state(label: &str, n: usize, cutoff: usize) -> Result<Self> {
        let basis = FockBasisSpec::new([label], cutoff)?;
        if n > cutoff {
            return Err(Error::Truncation {
                cutoff,
                lost: 1.0,
                tolerance: 0.0,
            });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); cutoff + 1];
        amplitudes[n] = Complex64::new(1.0, 0.0);
        Ok(Self { basis, amplitudes })
    }

    pub fn basis(&self) -> &FockBasisSpec {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Complex64 {
        self.basis
            .index_of(occupations)
            .map(|i| self.amplitudes[i])
            .unwrap_or_default()
    }

    pub fn probability(&self, occupations: &[usize]) -> f64 {
        self.amplitude(occupations).norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Renames the modes in place (e.g. beamsplitter inputs to outputs).
    pub fn relabel<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Result<Self> {
        self.basis = FockBasisSpec::new(labels, self.basis.cutoff)?;
        if self.basis.dim() != self.amplitudes.len() {
            return Err(Error::InvalidParameter("relabel changed the mode count".into()));
        }
        Ok(self)
    }

    /// Tensor product; both factors must share the cutoff.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        if self.basis.cutoff != other.basis.cutoff {
            return Err(Error::InvalidParameter("tensor factors need equal cutoffs".into()));
        }
        let modes = self.basis.modes.iter().chain(other.basis.modes.iter()).cloned();
        let basis = FockBasisSpec::new(modes, self.basis.cutoff)?;
        let mut amplitudes = Vec::with_capacity(basis.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ok(StateVector { basis, amplitudes })
    }

    /// `self + scale * other` over an identical basis.
    pub fn add_scaled(&mut self, scale: Complex64, other: &StateVector) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::InvalidParameter("cannot add states over different bases".into()));
        }
        for (s, o) in self.amplitudes.iter_mut().zip(&other.amplitudes) {
            *s += scale * o;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: Complex64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.basis != other.basis {
            return Err(Error::InvalidParameter("inner product over different bases".into()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn iter_probabilities(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(i, a)| (self.basis.occupations_of(i), a.norm_sqr()))
    }
}

/// Coherent state `|alpha e^{i phi}>` truncated at `cutoff`.
///
/// Fails when more than `tau_trunc` of the norm lies beyond the cutoff.
pub fn coherent_state(
    label: &str,
    alpha: f64,
    phi: f64,
    cutoff: usize,
    tau_trunc: f64,
) -> Result<StateVector> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
    }
    let basis = FockBasisSpec::new([label], cutoff)?;
    let z = Complex64::from_polar(alpha, phi);
    let mut amplitudes = Vec::with_capacity(cutoff + 1);
    let mut amp = Complex64::new((-alpha * alpha / 2.0).exp(), 0.0);
    amplitudes.push(amp);
    for n in 1..=cutoff {
        amp = amp * z / (n as f64).sqrt();
        amplitudes.push(amp);
    }
    let state = StateVector { basis, amplitudes };
    let lost = 1.0 - state.norm_sqr();
    if lost > tau_trunc {
        return Err(Error::Truncation {
            cutoff,
            lost,
            tolerance: tau_trunc,
        });
    }
    Ok(state)
}

/// Block of the two-mode beamsplitter unitary with `photons` total quanta,
/// in the basis `|p, photons - p>` (p quanta in the first mode).
///
/// The unitary is `exp(i chi (a^dag b + a b^dag))`, which maps the annihilation
/// operators through `[[cos chi, i sin chi], [i sin chi, cos chi]]`.
fn beamsplitter_block(photons: usize, chi: f64) -> DMatrix<Complex64> {
    let dim = photons + 1;
    let mut generator = DMatrix::<f64>::zeros(dim, dim);
    for p in 0..photons {
        let v = ((p + 1) as f64).sqrt() * ((photons - p) as f64).sqrt();
        generator[(p + 1, p)] = v;
        generator[(p, p + 1)] = v;
    }
    let eig = SymmetricEigen::new(generator);
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&l| Complex64::from_polar(1.0, chi * l))
        .collect();
    let v = &eig.eigenvectors;
    DMatrix::from_fn(dim, dim, |r, c| {
        (0..dim)
            .map(|m| phases[m] * (v[(r, m)] * v[(c, m)]))
            .sum()
    })
}

/// Applies a beamsplitter of transmissivity `t` to modes `(first, second)`.
///
/// Modes keep their labels; the first input becomes the `c`-type output and
/// the second the `d`-type output. Returns a truncation error if more than
/// `tau_trunc` of the norm is pushed beyond the cutoff.
pub fn beamsplitter_apply(
    state: &StateVector,
    modes: (&str, &str),
    t: f64,
    tau_trunc: f64,
) -> Result<StateVector> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("transmissivity {t} outside [0, 1]")));
    }
    let basis = state.basis();
    let i = basis.mode_index(modes.0)?;
    let j = basis.mode_index(modes.1)?;
    if i == j {
        return Err(Error::InvalidParameter("beamsplitter needs two distinct modes".into()));
    }
    if t == 1.0 {
        return Ok(state.clone());
    }
    let chi = t.sqrt().acos();
    let cutoff = basis.cutoff();
    let levels = basis.levels();
    let (si, sj) = (basis.stride(i), basis.stride(j));

    let blocks: Vec<DMatrix<Complex64>> = (0..=2 * cutoff).map(|n| beamsplitter_block(n, chi)).collect();

    // Offsets of every configuration of the spectator modes.
    let others: Vec<usize> = (0..basis.modes().len()).filter(|&m| m != i && m != j).collect();
    let n_other = levels.pow(others.len() as u32);
    let mut out = vec![Complex64::new(0.0, 0.0); state.amplitudes.len()];
    let mut gathered = Vec::with_capacity(levels);
    for combo in 0..n_other {
        let mut base = 0;
        let mut rest = combo;
        for &m in others.iter().rev() {
            base += (rest % levels) * basis.stride(m);
            rest /= levels;
        }
        for total in 0..=2 * cutoff {
            let lo = total.saturating_sub(cutoff);
            let hi = total.min(cutoff);
            gathered.clear();
            gathered.extend((lo..=hi).map(|p| state.amplitudes[base + p * si + (total - p) * sj]));
            if gathered.iter().all(|a| a.norm_sqr() == 0.0) {
                continue;
            }
            let u = &blocks[total];
            for p in lo..=hi {
                let acc: Complex64 = (lo..=hi)
                    .zip(&gathered)
                    .map(|(q, a)| u[(p, q)] * a)
                    .sum();
                out[base + p * si + (total - p) * sj] = acc;
            }
        }
    }
    let result = StateVector {
        basis: basis.clone(),
        amplitudes: out,
    };
    let lost = state.norm_sqr() - result.norm_sqr();
    if lost > tau_trunc {
        return Err(Error::Truncation {
            cutoff,
            lost,
            tolerance: tau_trunc,
        });
    }
    Ok(result)
}

/// How the `off` setting is realized in the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffModel {
    /// Oscillator blocked and the station beamsplitter removed; outcomes use
    /// the `on` assignment rule.
    BeamsplitterRemoved,
    /// Oscillator blocked, beamsplitter kept; outcome 0 iff any photon is
    /// detected at the station.
    OscillatorBlocked,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Local-oscillator amplitude, equal at both stations.
    pub alpha: f64,
    /// Shared oscillator phase.
    pub phi: f64,
    /// Station beamsplitter transmissivity.
    pub t: f64,
    pub cutoff: usize,
    pub tau_trunc: f64,
    pub off_model: OffModel,
}

impl OracleConfig {
    /// Config for oscillator intensity `alpha2` with the heuristic cutoff.
    pub fn new(alpha2: f64, t: f64) -> Self {
        Self {
            alpha: alpha2.max(0.0).sqrt(),
            phi: 0.0,
            t,
            cutoff: cutoff_for(alpha2.max(0.0)),
            tau_trunc: DEFAULT_TAU_TRUNC,
            off_model: OffModel::BeamsplitterRemoved,
        }
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_off_model(mut self, model: OffModel) -> Self {
        self.off_model = model;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(Error::InvalidParameter(format!("T = {} outside [0, 1]", self.t)));
        }
        Ok(())
    }
}

/// Output modes in count order `(k, l, n, m)`.
pub const OUTPUT_MODES: [&str; 4] = ["c1", "d1", "c2", "d2"];

/// Four-mode output state on `(c1, d1, c2, d2)` for settings `(x, y)`.
///
/// Input: `|alpha_1>_{a1} (|0,1> + |1,0>)_{b1,b2} / sqrt 2 |alpha_2>_{a2}`, where a
/// station's oscillator amplitude is zero when its setting is `off`.
pub fn output_state(config: &OracleConfig, x: Setting, y: Setting) -> Result<StateVector> {
    config.validate()?;
    let (cutoff, tau) = (config.cutoff, config.tau_trunc);
    let amp = |s: Setting| if s == Setting::On { config.alpha } else { 0.0 };
    let osc1 = coherent_state("a1", amp(x), config.phi, cutoff, tau)?;
    let osc2 = coherent_state("a2", amp(y), config.phi, cutoff, tau)?;
    let zero1 = StateVector::number_state("b1", 0, cutoff)?;
    let one1 = StateVector::number_state("b1", 1, cutoff)?;
    let zero2 = StateVector::number_state("b2", 0, cutoff)?;
    let one2 = StateVector::number_state("b2", 1, cutoff)?;

    let station1_off_photon = osc1.tensor(&zero1)?;
    let station1_photon = osc1.tensor(&one1)?;
    let station2_off_photon = osc2.tensor(&zero2)?;
    let station2_photon = osc2.tensor(&one2)?;

    let mut psi = station1_photon.tensor(&station2_off_photon)?;
    psi.add_scaled(Complex64::new(1.0, 0.0), &station1_off_photon.tensor(&station2_photon)?)?;
    psi.scale(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));

    let uses_splitter = |s: Setting| s == Setting::On || config.off_model == OffModel::OscillatorBlocked;
    if uses_splitter(x) {
        psi = beamsplitter_apply(&psi, ("a1", "b1"), config.t, tau)?;
    }
    if uses_splitter(y) {
        psi = beamsplitter_apply(&psi, ("a2", "b2"), config.t, tau)?;
    }
    psi.relabel(OUTPUT_MODES)
}

/// `|<k,l,n,m| U1(x) U2(y) |psi>|^2` on modes `(c1, d1, c2, d2)`.
pub fn detection_probability(
    config: &OracleConfig,
    x: Setting,
    y: Setting,
    counts: (usize, usize, usize, usize),
) -> Result<f64> {
    let state = output_state(config, x, y)?;
    Ok(state.probability(&[counts.0, counts.1, counts.2, counts.3]))
}

/// Binary outcome of one station from its `(n_c, n_d)` photon counts.
pub fn station_outcome(setting: Setting, n_c: usize, n_d: usize, off_model: OffModel) -> usize {
    let any_photon_rule = setting == Setting::Off && off_model == OffModel::OscillatorBlocked;
    let zero = if any_photon_rule {
        n_c > 0 || n_d > 0
    } else {
        n_d > 0 && n_c == 0
    };
    if zero {
        0
    } else {
        1
    }
}

/// Aggregates a four-mode output state into the 2x2 outcome cell.
pub fn aggregate_cell(state: &StateVector, x: Setting, y: Setting, off_model: OffModel) -> [[f64; 2]; 2] {
    let mut cell = [[0.0; 2]; 2];
    for (occ, p) in state.iter_probabilities() {
        let a = station_outcome(x, occ[0], occ[1], off_model);
        let b = station_outcome(y, occ[2], occ[3], off_model);
        cell[a][b] += p;
    }
    cell
}

/// Correlation box computed by brute-force photon counting.
pub fn box_from_oracle(config: &OracleConfig) -> Result<CorrelationBox> {
    let mut bx = CorrelationBox::default();
    for x in Setting::BOTH {
        for y in Setting::BOTH {
            let state = output_state(config, x, y)?;
            let cell = aggregate_cell(&state, x, y, config.off_model);
            let total: f64 = cell.iter().flatten().sum();
            if (1.0 - total).abs() > config.tau_trunc {
                return Err(Error::Truncation {
                    cutoff: config.cutoff,
                    lost: 1.0 - total,
                    tolerance: config.tau_trunc,
                });
            }
            bx.set_cell(x, y, cell);
        }
    }
    Ok(bx)
}

/// Outcome of the two-copy coherence swapping computation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SwapReport {
    /// Probability of exactly one photon across the two detected modes.
    pub success_probability: f64,
    /// Worst fidelity of the heralded `(b1, b2')` state with the input form,
    /// after the best local phase correction, over both heralding outcomes.
    pub fidelity: f64,
    /// Probability that both photons remain in `(b1, b2')`.
    pub p_no_detection: f64,
    /// Probability of two photons in the detected modes.
    pub p_two_detected: f64,
    /// Sum of all branch probabilities.
    pub total_probability: f64,
}

/// Entangles `b1` and `b2'` from two copies of `(|01> + |10>)/sqrt 2` by mixing
/// `b2` and `b1'` on a balanced beamsplitter and heralding one photon.
pub fn coherence_swap_check(cutoff: usize) -> Result<SwapReport> {
    if cutoff < 1 {
        return Err(Error::InvalidParameter("cutoff must be at least 1".into()));
    }
    let tau = DEFAULT_TAU_TRUNC;
    let pair = |l1: &str, l2: &str| -> Result<StateVector> {
        let mut s = StateVector::number_state(l1, 0, cutoff)?.tensor(&StateVector::number_state(l2, 1, cutoff)?)?;
        let other = StateVector::number_state(l1, 1, cutoff)?.tensor(&StateVector::number_state(l2, 0, cutoff)?)?;
        s.add_scaled(Complex64::new(1.0, 0.0), &other)?;
        s.scale(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        Ok(s)
    };
    let psi = pair("b1", "b2")?.tensor(&pair("b1'", "b2'")?)?;
    let mixed = beamsplitter_apply(&psi, ("b2", "b1'"), 0.5, tau)?.relabel(["b1", "c1", "c2", "b2'"])?;

    let mut success = 0.0;
    let mut none = 0.0;
    let mut two = 0.0;
    let mut total = 0.0;
    for (occ, p) in mixed.iter_probabilities() {
        total += p;
        match occ[1] + occ[2] {
            0 => none += p,
            1 => success += p,
            _ => two += p,
        }
    }

    let mut fidelity: f64 = 1.0;
    for herald in [[1usize, 0usize], [0, 1]] {
        // Conditional amplitudes of (b1, b2') given the herald pattern.
        let mut cond = Vec::new();
        for n1 in 0..=cutoff {
            for n2 in 0..=cutoff {
                cond.push(((n1, n2), mixed.amplitude(&[n1, herald[0], herald[1], n2])));
            }
        }
        let norm: f64 = cond.iter().map(|(_, a)| a.norm_sqr()).sum();
        if norm == 0.0 {
            continue;
        }
        let find = |n1, n2| {
            cond.iter()
                .find(|(k, _)| *k == (n1, n2))
                .map(|(_, a)| *a)
                .unwrap_or_default()
        };
        // Overlap with (|01> + |10>)/sqrt 2 after the optimal phase on b1.
        let u = find(1, 0).norm();
        let v = find(0, 1).norm();
        let f = (u + v).powi(2) / (2.0 * norm);
        fidelity = fidelity.min(f);
    }

    Ok(SwapReport {
        success_probability: success,
        fidelity,
        p_no_detection: none,
        p_two_detected: two,
        total_probability: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = 1e-12;

    #[test]
    fn vacuum_coherent_state() {
        let s = coherent_state("a", 0.0, 1.3, 5, TAU).unwrap();
        assert_eq!(s.amplitude(&[0]), Complex64::new(1.0, 0.0));
        for n in 1..=5 {
            assert_eq!(s.amplitude(&[n]).norm_sqr(), 0.0);
        }
    }

    #[test]
    fn coherent_mean_photon_number() {
        let s = coherent_state("a", 1.0, 0.0, 20, TAU).unwrap();
        let mean: f64 = (0..=20).map(|n| n as f64 * s.probability(&[n])).sum();
        assert!((mean - 1.0).abs() < 1e-12, "mean {mean}");
    }

    #[test]
    fn coherent_amplitude_formula() {
        let (alpha, phi) = (1.7f64, 0.4f64);
        let s = coherent_state("a", alpha, phi, 30, TAU).unwrap();
        let mut fact = 1.0f64;
        for n in 0..=12usize {
            if n > 0 {
                fact *= n as f64;
            }
            let expected = Complex64::from_polar((-alpha * alpha / 2.0).exp() * alpha.powi(n as i32) / fact.sqrt(), phi * n as f64);
            assert!((s.amplitude(&[n]) - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn heuristic_cutoff_tail_for_alpha_three() {
        // Poisson(9) tail summed directly from the pmf; 45 is the heuristic value.
        assert_eq!(cutoff_for(9.0), 45);
        let lambda: f64 = 9.0;
        let mut pmf = (-lambda).exp();
        let mut tail = 0.0;
        for n in 1..400 {
            pmf *= lambda / n as f64;
            if n > 45 {
                tail += pmf;
            }
        }
        assert!(tail < 1e-12, "tail {tail}");
        let s = coherent_state("a", 3.0, 0.0, cutoff_for(9.0), TAU).unwrap();
        assert!(1.0 - s.norm_sqr() < 1e-12);
    }

    #[test]
    fn small_cutoff_is_a_truncation_error() {
        let err = coherent_state("a", 3.0, 0.0, 5, TAU).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn unit_transmissivity_is_identity() {
        let s = coherent_state("a", 1.2, 0.3, 20, 1e-9)
            .unwrap()
            .tensor(&StateVector::number_state("b", 1, 20).unwrap())
            .unwrap();
        let out = beamsplitter_apply(&s, ("a", "b"), 1.0, TAU).unwrap();
        assert_eq!(out.amplitudes(), s.amplitudes());
    }

    #[test]
    fn balanced_split_of_one_photon() {
        let s = StateVector::number_state("a", 0, 3)
            .unwrap()
            .tensor(&StateVector::number_state("b", 1, 3).unwrap())
            .unwrap();
        let out = beamsplitter_apply(&s, ("a", "b"), 0.5, TAU).unwrap();
        assert!((out.probability(&[1, 0]) - 0.5).abs() < 1e-14);
        assert!((out.probability(&[0, 1]) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn coherent_input_splits_into_coherent_outputs() {
        // |alpha>|0> -> |alpha cos chi>|i alpha sin chi>
        let (alpha, t) = (1.1f64, 0.3f64);
        let s = coherent_state("a", alpha, 0.0, 25, 1e-12)
            .unwrap()
            .tensor(&StateVector::number_state("b", 0, 25).unwrap())
            .unwrap();
        let out = beamsplitter_apply(&s, ("a", "b"), t, 1e-12).unwrap();
        let c = coherent_state("c", alpha * t.sqrt(), 0.0, 25, 1e-12).unwrap();
        let d = coherent_state("d", alpha * (1.0 - t).sqrt(), std::f64::consts::FRAC_PI_2, 25, 1e-12).unwrap();
        let expected = c.tensor(&d).unwrap().relabel(["a", "b"]).unwrap();
        let overlap = expected.inner(&out).unwrap();
        assert!((overlap.norm() - 1.0).abs() < 1e-10, "overlap {overlap}");
        assert!((overlap.re - 1.0).abs() < 1e-10, "phase convention {overlap}");
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let s = StateVector::number_state("a", 1, 2)
            .unwrap()
            .tensor(&StateVector::number_state("b", 1, 2).unwrap())
            .unwrap();
        let out = beamsplitter_apply(&s, ("a", "b"), 0.5, TAU).unwrap();
        assert!(out.probability(&[1, 1]) < 1e-15);
        assert!((out.probability(&[2, 0]) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn off_off_cell_is_perfectly_anticorrelated() {
        let cfg = OracleConfig::new(2.0, 0.1);
        assert!((detection_probability(&cfg, Setting::Off, Setting::Off, (0, 1, 0, 0)).unwrap() - 0.5).abs() < 1e-14);
        let bx = box_from_oracle(&cfg).unwrap();
        let c = bx.cell(Setting::Off, Setting::Off);
        assert!(c[0][0].abs() < 1e-14 && c[1][1].abs() < 1e-14);
        assert!((c[0][1] - 0.5).abs() < 1e-14 && (c[1][0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dark_oscillators_never_give_double_zero() {
        let bx = box_from_oracle(&OracleConfig::new(0.0, 0.4)).unwrap();
        assert!(bx.prob(0, 0, Setting::On, Setting::On).abs() < 1e-15);
    }

    #[test]
    fn off_models_agree() {
        let cfg = OracleConfig::new(1.5, 0.2).with_cutoff(24);
        let removed = box_from_oracle(&cfg).unwrap();
        let blocked = box_from_oracle(&cfg.with_off_model(OffModel::OscillatorBlocked)).unwrap();
        assert!(removed.max_abs_diff(&blocked) < 1e-12);
    }

    #[test]
    fn count_distribution_is_complete() {
        let cfg = OracleConfig::new(1.0, 0.5);
        for x in Setting::BOTH {
            for y in Setting::BOTH {
                let total: f64 = output_state(&cfg, x, y).unwrap().norm_sqr();
                assert!((total - 1.0).abs() < cfg.tau_trunc);
            }
        }
    }

    #[test]
    fn swap_branches() {
        let r = coherence_swap_check(2).unwrap();
        assert!((r.success_probability - 0.5).abs() < 1e-12);
        assert!((r.fidelity - 1.0).abs() < 1e-12);
        assert!((r.p_two_detected - 0.25).abs() < 1e-12);
        assert!((r.p_no_detection - 0.25).abs() < 1e-12);
        assert!((r.total_probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_needs_room_for_two_photons() {
        assert!(matches!(coherence_swap_check(1), Err(Error::Truncation { .. })));
    }

    #[test]
    fn basis_rejects_duplicates() {
        assert!(FockBasisSpec::new(["a", "a"], 3).is_err());
        assert!(FockBasisSpec::new(["a"], 0).is_err());
    }
}
