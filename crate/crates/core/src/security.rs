//! Key rate, guessing probability and min-entropy from Eve's optimal
//! minimal ensemble, plus the analytic ensemble table of the limit box.

use serde::Serialize;

use crate::boxes::{CorrelationBox, Setting};
use crate::correlations::{ch_value, limit_box, LimitParams};
use crate::error::{Error, Result};
use crate::polytope::{
    find_minimal_ensembles, is_no_signaling, min_pnl_ensemble, Ensemble, EnsembleMember, ExtremeBox, Tolerance,
};

use Setting::{Off, On};

/// Warning attached when the (off, off) cell is not perfectly anticorrelated.
pub const WARN_NOT_ANTICORRELATED: &str = "I_AB<1-unsupported";
/// Flag for boxes with CH <= 0: no key, no certified randomness.
pub const FLAG_NO_VIOLATION: &str = "no-violation";

#[derive(Debug, Clone, Serialize)]
pub struct SecurityReport {
    pub ch: f64,
    pub p_nl: f64,
    pub p_l: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "I_AB")]
    pub i_ab: f64,
    #[serde(rename = "I_AE")]
    pub i_ae: f64,
    #[serde(rename = "I_BE")]
    pub i_be: f64,
    pub p_guess: f64,
    #[serde(rename = "H_min")]
    pub h_min: f64,
    pub l_random: f64,
    pub violation: bool,
    /// Number of minimal ensembles, i.e. the size of Eve's input alphabet.
    pub ensemble_count: usize,
    pub warnings: Vec<String>,
    pub optimal_ensemble: Ensemble,
}

/// Mutual information in bits of a joint distribution `p[a][b]`.
pub fn mutual_information(p: &[[f64; 2]; 2]) -> f64 {
    let pa = [p[0][0] + p[0][1], p[1][0] + p[1][1]];
    let pb = [p[0][0] + p[1][0], p[0][1] + p[1][1]];
    let mut info = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            if p[a][b] > 0.0 {
                info += p[a][b] * (p[a][b] / (pa[a] * pb[b])).log2();
            }
        }
    }
    info.max(0.0)
}

fn report_from_ensemble(bx: &CorrelationBox, ensembles: &[Ensemble], tol: Tolerance) -> Result<SecurityReport> {
    let best = min_pnl_ensemble(ensembles)?.clone();
    let ch = ch_value(bx);
    let p_nl = best.p_nl().max(0.0);
    let p_l = 1.0 - p_nl;
    let p_guess = 1.0 - p_nl / 2.0;
    let h_min = -p_guess.log2() + 0.0;

    let mut warnings = Vec::new();
    let off_off = bx.cell(Off, Off);
    if off_off[0][0] + off_off[1][1] > tol.epsilon() {
        warnings.push(WARN_NOT_ANTICORRELATED.to_string());
    }
    let ns = is_no_signaling(bx, 1e-12);
    if !ns.no_signaling {
        warnings.push(format!("signaling {:.3e} absorbed by tolerance", ns.max_violation));
    }
    let violation = ch > 0.0;
    if !violation {
        warnings.push(FLAG_NO_VIOLATION.to_string());
    }

    Ok(SecurityReport {
        ch,
        p_nl,
        p_l,
        k: p_nl,
        i_ab: mutual_information(&off_off),
        i_ae: p_l,
        i_be: p_l,
        p_guess,
        h_min,
        l_random: h_min,
        violation,
        ensemble_count: ensembles.len(),
        warnings,
        optimal_ensemble: best,
    })
}

/// Full security report: runs the ensemble search and reads every quantity
/// off the ensemble with the least nonlocal weight.
pub fn key_rate(bx: &CorrelationBox, tol: Tolerance) -> Result<SecurityReport> {
    let ensembles = find_minimal_ensembles(bx, tol)?;
    report_from_ensemble(bx, &ensembles, tol)
}

/// Report from an already computed ensemble list.
pub fn key_rate_from_ensembles(bx: &CorrelationBox, ensembles: &[Ensemble], tol: Tolerance) -> Result<SecurityReport> {
    report_from_ensemble(bx, ensembles, tol)
}

pub fn guessing_probability(bx: &CorrelationBox, tol: Tolerance) -> Result<f64> {
    Ok(key_rate(bx, tol)?.p_guess)
}

/// `(H_min, l_random)` in bits per run.
pub fn randomness_rate(bx: &CorrelationBox, tol: Tolerance) -> Result<(f64, f64)> {
    let r = key_rate(bx, tol)?;
    Ok((r.h_min, r.l_random))
}

/// Ensemble key rate against twice the CH value, with the intermediate
/// identities behind `K = 2 CH`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KChCheck {
    #[serde(rename = "K")]
    pub k: f64,
    pub two_ch: f64,
    pub gap: f64,
    /// `2[P(10|on,on) + P(10|on,off) + P(01|on,off)]`, Eve's information
    /// read off the box entries.
    pub i_be_from_entries: f64,
    /// `P(00|on,off) - P(01|on,off) - P(10|on,on)`.
    pub ch_rewrite: f64,
    /// `P(00|on,off) + P(10|on,off)`, one half for the ideal family.
    pub marginal_sum: f64,
}

pub fn verify_k_equals_2ch(bx: &CorrelationBox, tol: Tolerance) -> Result<KChCheck> {
    let report = key_rate(bx, tol)?;
    let two_ch = 2.0 * ch_value(bx);
    Ok(KChCheck {
        k: report.k,
        two_ch,
        gap: report.k - two_ch,
        i_be_from_entries: 2.0 * (bx.prob(1, 0, On, On) + bx.prob(1, 0, On, Off) + bx.prob(0, 1, On, Off)),
        ch_rewrite: bx.prob(0, 0, On, Off) - bx.prob(0, 1, On, Off) - bx.prob(1, 0, On, On),
        marginal_sum: bx.prob(0, 0, On, Off) + bx.prob(1, 0, On, Off),
    })
}

/// The 24 analytic weights `p1..p24` of the limit-box ensembles at `k`
/// (index 0 holds `p1`).
pub fn analytic_weights(k: f64) -> [f64; 24] {
    let e = (-k).exp();
    let e2 = (-2.0 * k).exp();
    let ek = k.exp();
    [
        0.5 * e * (-k + ek - 1.0),
        0.5 * e2 * (ek * k + 4.0 * k - ek),
        0.5 * e2 * (-ek * k + 4.0 * k - 3.0 * ek + 2.0 * ek * ek),
        -4.0 * e2 * k + e * (k + 2.0) - 1.0,
        e * k,
        e * (1.0 - k),
        0.5 * e2 * (4.0 * k - 2.0 * ek + ek * ek),
        e2 * (ek - 4.0 * k),
        0.5 * e2 * (ek - 4.0 * k),
        e * k / 2.0,
        0.5 * e * (ek - 1.0),
        k * e2 * (4.0 - ek),
        0.5 * e2 * (ek * k - 4.0 * k + ek),
        e * (-k + ek - 1.0),
        -0.5 * e2 * (-3.0 * ek * k + 4.0 * k - 3.0 * ek + 2.0 * ek * ek),
        0.5 * e2 * (ek - ek * k + 4.0 * k),
        0.5 * e2 * (2.0 - ek) * (ek - 2.0 * k),
        e * (2.0 * k - ek + 1.0),
        e2 * (-2.0 * ek * k + 4.0 * k - ek + ek * ek),
        0.5 * e2 * (ek * k - 4.0 * k + 2.0 * ek - ek * ek),
        0.5 * e * (2.0 * k - ek + 1.0),
        4.0 * e2 * k,
        0.5 * (1.0 - (1.0 + k) * e),
        2.0 * e2 * (2.0 - ek) * k,
    ]
}

/// Members `(weight number, vertex label)` of the 27 analytic ensembles
/// `M1..M27`; `M27` is Eve's optimal choice.
pub const ANALYTIC_ENSEMBLES: [&[(usize, &str)]; 27] = [
    &[(1, "L_0100"), (1, "L_1110"), (2, "L_1100"), (3, "L_1001"), (4, "B_101"), (5, "B_011"), (6, "B_111")],
    &[(1, "L_0001"), (1, "L_1011"), (2, "L_0011"), (3, "L_0110"), (4, "B_011"), (5, "B_101"), (6, "B_111")],
    &[(2, "L_0011"), (7, "L_0100"), (3, "L_1001"), (7, "L_1110"), (4, "B_101"), (8, "B_011"), (6, "B_111")],
    &[(2, "L_1100"), (7, "L_0001"), (3, "L_0110"), (7, "L_1011"), (4, "B_011"), (8, "B_101"), (6, "B_111")],
    &[(1, "L_0110"), (9, "L_1011"), (9, "L_1110"), (10, "L_1100"), (11, "L_1001"), (5, "B_011"), (12, "B_111")],
    &[(1, "L_1001"), (9, "L_1011"), (9, "L_1110"), (10, "L_0011"), (11, "L_0110"), (5, "B_101"), (12, "B_111")],
    &[(10, "L_0001"), (11, "L_0110"), (1, "L_1001"), (13, "L_1011"), (10, "L_1100"), (9, "L_1110"), (12, "B_111")],
    &[(10, "L_0011"), (10, "L_0100"), (1, "L_0110"), (11, "L_1001"), (9, "L_1011"), (13, "L_1110"), (12, "B_111")],
    &[(1, "L_0100"), (14, "L_1001"), (1, "L_1110"), (2, "B_001"), (13, "B_011"), (15, "B_101"), (16, "B_111")],
    &[(1, "L_0001"), (14, "L_0110"), (1, "L_1011"), (2, "B_001"), (15, "B_011"), (13, "B_101"), (16, "B_111")],
    &[(1, "L_0100"), (14, "L_1001"), (15, "L_1011"), (17, "L_1110"), (18, "B_001"), (14, "B_011"), (19, "B_111")],
    &[(1, "L_0001"), (14, "L_0110"), (15, "L_1110"), (17, "L_1011"), (18, "B_001"), (14, "B_101"), (19, "B_111")],
    &[(1, "L_0100"), (20, "L_1011"), (9, "L_1110"), (21, "L_1100"), (11, "L_1001"), (5, "B_011"), (19, "B_111")],
    &[(1, "L_0001"), (20, "L_1110"), (9, "L_1011"), (21, "L_0011"), (11, "L_0110"), (5, "B_101"), (19, "B_111")],
    &[(20, "L_1011"), (21, "L_0011"), (10, "L_0100"), (11, "L_1001"), (17, "L_1110"), (14, "B_011"), (19, "B_111")],
    &[(20, "L_1110"), (21, "L_1100"), (10, "L_0001"), (11, "L_0110"), (17, "L_1011"), (14, "B_101"), (19, "B_111")],
    &[(2, "L_0001"), (7, "L_0100"), (14, "L_1001"), (1, "L_1110"), (8, "B_011"), (4, "B_101"), (22, "B_111")],
    &[(7, "L_0001"), (2, "L_0100"), (14, "L_0110"), (1, "L_1011"), (4, "B_011"), (8, "B_101"), (22, "B_111")],
    &[(2, "L_0001"), (2, "L_0100"), (1, "L_0110"), (1, "L_1001"), (8, "B_011"), (8, "B_101"), (22, "B_111")],
    &[(21, "L_0001"), (10, "L_0100"), (14, "L_1001"), (20, "L_1011"), (9, "L_1110"), (14, "B_011"), (22, "B_111")],
    &[(21, "L_0100"), (10, "L_0001"), (14, "L_0110"), (20, "L_1110"), (9, "L_1011"), (14, "B_101"), (22, "B_111")],
    &[(10, "L_0001"), (10, "L_0100"), (1, "L_0110"), (1, "L_1001"), (9, "L_1011"), (9, "L_1110"), (22, "B_111")],
    &[(23, "L_0110"), (23, "L_1001"), (2, "B_001"), (13, "B_011"), (13, "B_101"), (16, "B_111")],
    &[(23, "L_0110"), (23, "L_1001"), (13, "L_1011"), (13, "L_1110"), (5, "B_001"), (12, "B_111")],
    &[(23, "L_0110"), (7, "L_1001"), (2, "L_1100"), (5, "B_011"), (8, "B_101"), (6, "B_111")],
    &[(23, "L_1001"), (7, "L_0110"), (2, "L_0011"), (5, "B_101"), (8, "B_011"), (6, "B_111")],
    &[(10, "L_0011"), (11, "L_0110"), (11, "L_1001"), (13, "L_1011"), (10, "L_1100"), (13, "L_1110"), (24, "B_111")],
];

#[derive(Debug, Clone, Serialize)]
pub struct AnalyticEnsembleCheck {
    /// 1-based position in the table.
    pub index: usize,
    pub ensemble: Ensemble,
    pub residual: f64,
    pub weight_sum: f64,
    /// All weights strictly positive at this `k`.
    pub in_regime: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyticTable {
    pub k: f64,
    pub weights: [f64; 24],
    pub ensembles: Vec<AnalyticEnsembleCheck>,
    /// 1-based index of the ensemble with the least nonlocal weight among
    /// those in regime.
    pub optimal_index: Option<usize>,
}

impl AnalyticTable {
    pub fn out_of_regime(&self) -> Vec<usize> {
        self.ensembles.iter().filter(|e| !e.in_regime).map(|e| e.index).collect()
    }
}

/// Evaluates `p1..p24` at `k` and rebuilds all 27 analytic ensembles of
/// `limit_box(k)`. Ensembles with a nonpositive weight are kept but marked
/// out of regime.
pub fn analytic_ensembles(k: f64) -> Result<AnalyticTable> {
    if !(k > 0.0 && k < std::f64::consts::LN_2) {
        return Err(Error::InvalidParameter(format!("k must lie in (0, ln 2), got {k}")));
    }
    let source = limit_box(&LimitParams::new(k)?);
    let weights = analytic_weights(k);
    let mut ensembles = Vec::with_capacity(ANALYTIC_ENSEMBLES.len());
    for (i, spec) in ANALYTIC_ENSEMBLES.iter().enumerate() {
        let members: Vec<EnsembleMember> = spec
            .iter()
            .map(|&(p, label)| EnsembleMember {
                weight: weights[p - 1],
                extreme: label.parse::<ExtremeBox>().expect("table labels are valid"),
            })
            .collect();
        let ensemble = Ensemble::new(source, members);
        ensembles.push(AnalyticEnsembleCheck {
            index: i + 1,
            residual: ensemble.residual(),
            weight_sum: ensemble.weight_sum(),
            in_regime: ensemble.members().iter().all(|m| m.weight > 0.0),
            ensemble,
        });
    }
    let optimal_index = ensembles
        .iter()
        .filter(|e| e.in_regime)
        .min_by(|a, b| a.ensemble.p_nl().total_cmp(&b.ensemble.p_nl()))
        .map(|e| e.index);
    Ok(AnalyticTable {
        k,
        weights,
        ensembles,
        optimal_index,
    })
}
