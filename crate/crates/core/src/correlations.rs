//! Closed-form correlation boxes of the weak homodyne setup, the large
//! oscillator limit box, the CH functional and its optimization over the
//! station beamsplitter transmissivity.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::boxes::{CorrelationBox, Setting};
use crate::error::{Error, Result};

/// Oscillator intensity `alpha^2` and beamsplitter transmissivity `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementSettings {
    alpha2: f64,
    t: f64,
}

impl MeasurementSettings {
    pub fn new(alpha2: f64, t: f64) -> Result<Self> {
        if !(alpha2 >= 0.0) || !alpha2.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha^2 must be >= 0, got {alpha2}")));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("T must lie in [0, 1], got {t}")));
        }
        Ok(Self { alpha2, t })
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Beamsplitter angle `arccos(sqrt T)`, in `[0, pi/2]`.
    pub fn chi(&self) -> f64 {
        self.t.sqrt().acos()
    }
}

/// Limit `alpha^2 -> inf` with `alpha^2 T -> k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitParams {
    k: f64,
}

impl LimitParams {
    pub fn new(k: f64) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("k must be >= 0, got {k}")));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// Entries of the quantum box: `xi_*` fill the mixed-setting cells,
/// `beta_*` the (on, on) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormCells {
    pub xi_00: f64,
    pub xi_01: f64,
    pub xi_10: f64,
    pub xi_11: f64,
    pub beta_00: f64,
    pub beta_11: f64,
    pub beta: f64,
}

pub fn closed_form_cells(settings: &MeasurementSettings) -> ClosedFormCells {
    let a2 = settings.alpha2;
    let chi = settings.chi();
    let c2 = (2.0 * chi).cos();
    let c4 = (4.0 * chi).cos();
    let cos2 = chi.cos().powi(2);
    let sin2 = chi.sin().powi(2);

    let beta_00 = 0.125
        * (2.0 * c2 + 2.0)
        * (-a2 * (c2 + 1.0)).exp()
        * (-2.0 * a2 * c2 + (-a2 * sin2).exp() * (a2 * c2 - a2 - 2.0) + 2.0 * a2 + 2.0);

    // Exponents of the published expression combined pairwise so that no
    // factor overflows for large alpha^2.
    let beta_11 = 0.125
        * (4.0
            * cos2
            * ((-0.5 * a2 * (c2 + 3.0)).exp() * (a2 * c2 - a2 - 2.0)
                - 4.0 * (-a2 * (c2 + 1.0)).exp() * (a2 * c2 - a2 - 1.0))
            + 8.0
            + (-a2 * cos2).exp() * (a2 * c4 - a2 - 4.0 * c2 - 12.0)
            + (-2.0 * a2 * cos2).exp() * (2.0 * a2 * c4 - 2.0 * a2 - 4.0 * c2 - 4.0)
            + 8.0 * (-a2).exp());

    let beta = 0.5 * (1.0 - beta_00 - beta_11);

    let xi_00 = 0.5 * (-a2).exp() * ((-0.25 * a2 * (2.0 * c2 - 2.0)).exp() - 1.0);
    let xi_10 = 0.5 * cos2 * (a2 * sin2 + 1.0) * (-a2 * cos2).exp();
    let xi_11 = 0.5 * (1.0 - cos2 * (a2 * sin2 + 1.0) * (-a2 * cos2).exp());
    let xi_01 = 0.5 * ((-a2).exp() - (-a2 * cos2).exp() + 1.0);

    ClosedFormCells {
        xi_00,
        xi_01,
        xi_10,
        xi_11,
        beta_00,
        beta_11,
        beta,
    }
}

/// Quantum box for the given oscillator intensity and transmissivity.
pub fn closed_form_box(settings: &MeasurementSettings) -> CorrelationBox {
    box_from_cells(&closed_form_cells(settings))
}

/// Places the cell entries into the box table.
///
/// `(on, off)` holds `P(00)=xi_00, P(01)=xi_10, P(10)=xi_01, P(11)=xi_11`;
/// `(off, on)` is its party-swapped image.
pub fn box_from_cells(c: &ClosedFormCells) -> CorrelationBox {
    let off_off = [[0.0, 0.5], [0.5, 0.0]];
    let on_off = [[c.xi_00, c.xi_10], [c.xi_01, c.xi_11]];
    let off_on = [[c.xi_00, c.xi_01], [c.xi_10, c.xi_11]];
    let on_on = [[c.beta_00, c.beta], [c.beta, c.beta_11]];
    CorrelationBox::from_cells(off_off, off_on, on_off, on_on)
}

/// Cells of the limit box as functions of `k`.
pub fn limit_cells(k: &LimitParams) -> ClosedFormCells {
    let k = k.k;
    let e = (-k).exp();
    let e2 = (-2.0 * k).exp();
    let beta_00 = 2.0 * k * e2;
    let beta_11 = 2.0 * k * e2 - e * (k + 1.0) + 1.0;
    ClosedFormCells {
        xi_00: e / 2.0,
        xi_01: 0.5 - e / 2.0,
        xi_10: k * e / 2.0,
        xi_11: 0.5 - k * e / 2.0,
        beta_00,
        beta_11,
        beta: 0.5 * e2 * ((k + 1.0) / e - 4.0 * k),
    }
}

pub fn limit_box(k: &LimitParams) -> CorrelationBox {
    box_from_cells(&limit_cells(k))
}

/// CH value together with how far the box is from no-signaling in the
/// marginals the expression uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChEvaluation {
    pub value: f64,
    /// Spread of `P_A(0|on)` and `P_B(0|on)` across the other party's setting.
    pub marginal_spread: f64,
}

/// `CH = P(00|on,on) + P(00|on,off) + P(00|off,on) - P(00|off,off) - P_A(0|on) - P_B(0|on)`.
///
/// `P_A(0|on)` is read from the (on, off) cell and `P_B(0|on)` from the
/// (off, on) cell.
pub fn ch_evaluate(bx: &CorrelationBox) -> ChEvaluation {
    use Setting::{Off, On};
    let pa = bx.marginal_a(0, On, Off);
    let pb = bx.marginal_b(0, Off, On);
    let value = bx.prob(0, 0, On, On) + bx.prob(0, 0, On, Off) + bx.prob(0, 0, Off, On)
        - bx.prob(0, 0, Off, Off)
        - pa
        - pb;
    let spread = (pa - bx.marginal_a(0, On, On))
        .abs()
        .max((pb - bx.marginal_b(0, On, On)).abs());
    ChEvaluation {
        value,
        marginal_spread: spread,
    }
}

pub fn ch_value(bx: &CorrelationBox) -> f64 {
    ch_evaluate(bx).value
}

/// `e^{-2k} (2 - e^k) k`.
pub fn ch_limit(k: f64) -> f64 {
    (-2.0 * k).exp() * (2.0 - k.exp()) * k
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Maximizes `f` on `[lo, hi]` by golden-section search to width `tol`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Location and value of the maximum of [`ch_limit`] on `[0, ln 2]`.
pub fn ch_limit_optimum() -> (f64, f64) {
    golden_max(ch_limit, 0.0, std::f64::consts::LN_2, 1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TOptimum {
    pub alpha2: f64,
    pub t_opt: f64,
    pub ch_opt: f64,
    /// `false` when no transmissivity gives `CH > 0`.
    pub violation: bool,
}

const T_GRID_POINTS: usize = 200;
const T_TOLERANCE: f64 = 1e-10;

/// Maximizes CH over `T in (0, 1)`: a 200 point grid, then golden-section
/// refinement between the neighbours of the best grid point.
pub fn optimize_t(alpha2: f64) -> Result<TOptimum> {
    if !(alpha2 > 0.0) || !alpha2.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha^2 must be > 0, got {alpha2}")));
    }
    let ch_at = |t: f64| ch_value(&closed_form_box(&MeasurementSettings { alpha2, t }));
    let step = 1.0 / (T_GRID_POINTS + 1) as f64;
    let (best, _) = (1..=T_GRID_POINTS)
        .map(|i| (i, ch_at(i as f64 * step)))
        .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    let lo = ((best - 1) as f64 * step).max(1e-12);
    let hi = ((best + 1) as f64 * step).min(1.0 - 1e-12);
    let (t_opt, ch_opt) = golden_max(ch_at, lo, hi, T_TOLERANCE);
    Ok(TOptimum {
        alpha2,
        t_opt,
        ch_opt,
        violation: ch_opt > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub alpha2: f64,
    #[serde(rename = "T_opt")]
    pub t_opt: f64,
    #[serde(rename = "CH")]
    pub ch: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

/// Optimal CH and the implied key rate `K = 2 CH` for each grid point.
pub fn scan_alpha(alpha2_grid: &[f64]) -> Result<Vec<ScanRow>> {
    if alpha2_grid.is_empty() {
        return Err(Error::InvalidParameter("alpha^2 grid is empty".into()));
    }
    alpha2_grid
        .par_iter()
        .map(|&a2| {
            let opt = optimize_t(a2)?;
            Ok(ScanRow {
                alpha2: a2,
                t_opt: opt.t_opt,
                ch: opt.ch_opt,
                k: 2.0 * opt.ch_opt,
            })
        })
        .collect()
}

/// Writes scan rows as CSV with header `alpha2,T_opt,CH,K`.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], mut out: W) -> Result<()> {
    writeln!(out, "alpha2,T_opt,CH,K")?;
    for r in rows {
        writeln!(out, "{:?},{:?},{:?},{:?}", r.alpha2, r.t_opt, r.ch, r.k)?;
    }
    Ok(())
}
