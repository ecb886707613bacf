//! The two-input, two-output no-signaling polytope: its 24 vertices,
//! membership checks and the search for minimal ensembles (convex
//! decompositions into vertices that admit no reconstructing proper subset).

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::boxes::{flat_index, CorrelationBox, Setting};
use crate::error::{Error, Result};

/// Carathéodory bound for this polytope: dimension 8, so at most 9 vertices.
pub const MAX_ENSEMBLE_SIZE: usize = 9;

/// A vertex of the polytope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtremeBox {
    /// Deterministic `a = q x XOR r`, `b = s y XOR t`.
    Local { q: u8, r: u8, s: u8, t: u8 },
    /// Uniform over `a XOR b = x y XOR r x XOR s y XOR t`.
    Nonlocal { r: u8, s: u8, t: u8 },
}

impl ExtremeBox {
    /// All 24 vertices: the 16 local boxes in label order, then the 8 nonlocal.
    pub fn all() -> &'static [ExtremeBox; 24] {
        static ALL: OnceLock<[ExtremeBox; 24]> = OnceLock::new();
        ALL.get_or_init(|| {
            let mut v = [ExtremeBox::Nonlocal { r: 0, s: 0, t: 0 }; 24];
            for i in 0..16u8 {
                v[i as usize] = ExtremeBox::Local {
                    q: (i >> 3) & 1,
                    r: (i >> 2) & 1,
                    s: (i >> 1) & 1,
                    t: i & 1,
                };
            }
            for i in 0..8u8 {
                v[16 + i as usize] = ExtremeBox::Nonlocal {
                    r: (i >> 2) & 1,
                    s: (i >> 1) & 1,
                    t: i & 1,
                };
            }
            v
        })
    }

    /// Position in [`ExtremeBox::all`].
    pub fn index(&self) -> usize {
        match *self {
            ExtremeBox::Local { q, r, s, t } => ((q << 3) | (r << 2) | (s << 1) | t) as usize,
            ExtremeBox::Nonlocal { r, s, t } => 16 + ((r << 2) | (s << 1) | t) as usize,
        }
    }

    pub fn is_local(&self) -> bool {
        matches!(self, ExtremeBox::Local { .. })
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    pub fn table(&self) -> CorrelationBox {
        match *self {
            ExtremeBox::Local { q, r, s, t } => local_box(q, r, s, t),
            ExtremeBox::Nonlocal { r, s, t } => nonlocal_box(r, s, t),
        }
    }

    /// Outcome of Alice for setting `x` if the box is local.
    pub fn alice_outcome(&self, x: Setting) -> Option<usize> {
        match *self {
            ExtremeBox::Local { q, r, .. } => Some(((q as usize) * x.bit()) ^ r as usize),
            ExtremeBox::Nonlocal { .. } => None,
        }
    }

    /// Outcome of Bob for setting `y` if the box is local.
    pub fn bob_outcome(&self, y: Setting) -> Option<usize> {
        match *self {
            ExtremeBox::Local { s, t, .. } => Some(((s as usize) * y.bit()) ^ t as usize),
            ExtremeBox::Nonlocal { .. } => None,
        }
    }
}

impl fmt::Display for ExtremeBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ExtremeBox::Local { q, r, s, t } => write!(f, "L_{q}{r}{s}{t}"),
            ExtremeBox::Nonlocal { r, s, t } => write!(f, "B_{r}{s}{t}"),
        }
    }
}

impl FromStr for ExtremeBox {
    type Err = Error;

    fn from_str(label: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("not a vertex label: {label:?}"));
        let (kind, bits) = label.split_once('_').ok_or_else(bad)?;
        let bits: Vec<u8> = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(bad()),
            })
            .collect::<Result<_>>()?;
        match (kind, bits.as_slice()) {
            ("L", &[q, r, s, t]) => Ok(ExtremeBox::Local { q, r, s, t }),
            ("B", &[r, s, t]) => Ok(ExtremeBox::Nonlocal { r, s, t }),
            _ => Err(bad()),
        }
    }
}

impl Serialize for ExtremeBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExtremeBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn local_box(q: u8, r: u8, s: u8, t: u8) -> CorrelationBox {
    let (q, r, s, t) = (q as usize & 1, r as usize & 1, s as usize & 1, t as usize & 1);
    CorrelationBox::from_fn(|x, y, a, b| {
        if a == (q * x) ^ r && b == (s * y) ^ t {
            1.0
        } else {
            0.0
        }
    })
}

pub fn nonlocal_box(r: u8, s: u8, t: u8) -> CorrelationBox {
    let (r, s, t) = (r as usize & 1, s as usize & 1, t as usize & 1);
    CorrelationBox::from_fn(|x, y, a, b| {
        if a ^ b == (x * y) ^ (r * x) ^ (s * y) ^ t {
            0.5
        } else {
            0.0
        }
    })
}

/// Numerical tolerance `epsilon` of the decomposition criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance(f64);

impl Tolerance {
    /// Default for analytic boxes.
    pub const ANALYTIC: Tolerance = Tolerance(1e-7);

    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.1) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 0.1), got {epsilon}")));
        }
        Ok(Self(epsilon))
    }

    pub fn epsilon(&self) -> f64 {
        self.0
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::ANALYTIC
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoSignalingCheck {
    pub no_signaling: bool,
    pub max_violation: f64,
}

/// Checks that each party's marginals do not depend on the other's setting.
pub fn is_no_signaling(bx: &CorrelationBox, tol: f64) -> NoSignalingCheck {
    use Setting::{Off, On};
    let mut worst: f64 = 0.0;
    for s in Setting::BOTH {
        for o in 0..2 {
            worst = worst.max((bx.marginal_a(o, s, Off) - bx.marginal_a(o, s, On)).abs());
            worst = worst.max((bx.marginal_b(o, Off, s) - bx.marginal_b(o, On, s)).abs());
        }
    }
    NoSignalingCheck {
        no_signaling: worst <= tol,
        max_violation: worst,
    }
}

/// Least-squares weights of a decomposition and its L1 reconstruction error.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFit {
    pub weights: Vec<f64>,
    pub residual: f64,
}

impl WeightFit {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Vertex tables as 16-vectors plus their Gram matrix.
struct VertexCache {
    vectors: [[f64; 16]; 24],
    gram: [[f64; 24]; 24],
}

fn vertex_cache() -> &'static VertexCache {
    static CACHE: OnceLock<VertexCache> = OnceLock::new();
    CACHE.get_or_init(|| {
        let mut vectors = [[0.0; 16]; 24];
        for (slot, e) in vectors.iter_mut().zip(ExtremeBox::all()) {
            *slot = e.table().to_vector();
        }
        let mut gram = [[0.0; 24]; 24];
        for i in 0..24 {
            for j in 0..24 {
                gram[i][j] = (0..16).map(|n| vectors[i][n] * vectors[j][n]).sum();
            }
        }
        VertexCache { vectors, gram }
    })
}

/// Relative pivot size below which a vertex counts as linearly dependent on
/// the ones before it.
const RANK_THRESHOLD: f64 = 1e-10;

/// Least-squares fit of `target` by the vertices with the given indices.
///
/// A Cholesky factorization of the Gram matrix that skips dependent columns
/// gives the projection of `target` onto the span. For a dependent subset
/// the minimum-norm weights come from an SVD, computed only when the
/// projection already reconstructs the box to within `svd_gate`.
fn fit_indices(target: &[f64; 16], indices: &[usize], svd_gate: f64) -> WeightFit {
    const N: usize = MAX_ENSEMBLE_SIZE;
    let cache = vertex_cache();
    let k = indices.len();
    debug_assert!((1..=N).contains(&k));

    let mut rhs = [0.0; N];
    for (a, &i) in indices.iter().enumerate() {
        rhs[a] = (0..16).map(|n| cache.vectors[i][n] * target[n]).sum();
    }

    // Lower factor over the independent columns; dependent ones stay zero.
    let mut l = [[0.0; N]; N];
    let mut independent = [false; N];
    for j in 0..k {
        let gj = &cache.gram[indices[j]];
        let mut d = gj[indices[j]];
        for p in 0..j {
            d -= l[j][p] * l[j][p];
        }
        if d <= RANK_THRESHOLD * gj[indices[j]] {
            continue;
        }
        let root = d.sqrt();
        l[j][j] = root;
        independent[j] = true;
        for i in j + 1..k {
            let mut v = cache.gram[indices[i]][indices[j]];
            for p in 0..j {
                v -= l[i][p] * l[j][p];
            }
            l[i][j] = v / root;
        }
    }

    let mut z = [0.0; N];
    for i in (0..k).filter(|&i| independent[i]) {
        let mut v = rhs[i];
        for p in 0..i {
            v -= l[i][p] * z[p];
        }
        z[i] = v / l[i][i];
    }
    let mut w = [0.0; N];
    for i in (0..k).rev().filter(|&i| independent[i]) {
        let mut v = z[i];
        for p in i + 1..k {
            v -= l[p][i] * w[p];
        }
        w[i] = v / l[i][i];
    }

    let residual_of = |w: &[f64]| -> f64 {
        (0..16)
            .map(|n| {
                let recon: f64 = indices.iter().zip(w).map(|(&i, w)| w * cache.vectors[i][n]).sum();
                (target[n] - recon).abs()
            })
            .sum()
    };
    let residual = residual_of(&w[..k]);

    if independent[..k].iter().all(|&b| b) || residual >= svd_gate {
        return WeightFit {
            weights: w[..k].to_vec(),
            residual,
        };
    }
    let a = DMatrix::from_fn(16, k, |n, c| cache.vectors[indices[c]][n]);
    let b = DVector::from_column_slice(target);
    let weights: Vec<f64> = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .expect("SVD with both factors always solves")
        .iter()
        .copied()
        .collect();
    let residual = residual_of(&weights);
    WeightFit { weights, residual }
}

/// Least-squares decomposition of `bx` over `subset` (1 to 9 vertices).
pub fn solve_weights(bx: &CorrelationBox, subset: &[ExtremeBox]) -> Result<WeightFit> {
    if subset.is_empty() || subset.len() > MAX_ENSEMBLE_SIZE {
        return Err(Error::InvalidParameter(format!(
            "subset size must be 1..={MAX_ENSEMBLE_SIZE}, got {}",
            subset.len()
        )));
    }
    let indices: Vec<usize> = subset.iter().map(ExtremeBox::index).collect();
    Ok(fit_indices(&bx.to_vector(), &indices, f64::INFINITY))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub weight: f64,
    #[serde(rename = "box")]
    pub extreme: ExtremeBox,
}

/// Weighted set of vertices reconstructing a source box.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<EnsembleMember>,
    source: CorrelationBox,
    residual: f64,
}

impl Ensemble {
    pub fn new(source: CorrelationBox, members: Vec<EnsembleMember>) -> Self {
        let recon = CorrelationBox::mix(
            members
                .iter()
                .map(|m| (m.weight, m.extreme.table()))
                .collect::<Vec<_>>()
                .iter()
                .map(|(w, t)| (*w, t)),
        );
        let residual = recon.l1_distance(&source);
        Self {
            members,
            source,
            residual,
        }
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn source(&self) -> &CorrelationBox {
        &self.source
    }

    /// L1 distance between the source box and the weighted vertex sum.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn weight_sum(&self) -> f64 {
        self.members.iter().map(|m| m.weight).sum()
    }

    /// Total weight on nonlocal vertices.
    pub fn p_nl(&self) -> f64 {
        self.members
            .iter()
            .filter(|m| !m.extreme.is_local())
            .map(|m| m.weight)
            .sum::<f64>()
            + 0.0
    }

    pub fn p_l(&self) -> f64 {
        self.members
            .iter()
            .filter(|m| m.extreme.is_local())
            .map(|m| m.weight)
            .sum::<f64>()
            + 0.0
    }

    pub fn vertices(&self) -> Vec<ExtremeBox> {
        self.members.iter().map(|m| m.extreme).collect()
    }

    /// Member labels in lexicographic order.
    pub fn sorted_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.members.iter().map(|m| m.extreme.label()).collect();
        labels.sort();
        labels
    }

    pub fn weight_of(&self, extreme: ExtremeBox) -> Option<f64> {
        self.members.iter().find(|m| m.extreme == extreme).map(|m| m.weight)
    }

    pub fn reconstruct(&self) -> CorrelationBox {
        let tables: Vec<(f64, CorrelationBox)> = self
            .members
            .iter()
            .map(|m| (m.weight, m.extreme.table()))
            .collect();
        CorrelationBox::mix(tables.iter().map(|(w, t)| (*w, t)))
    }
}

impl Serialize for Ensemble {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.members.serialize(serializer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub tolerance: Tolerance,
    /// Run the final pass that drops candidates expressible as convex
    /// combinations of other candidates. Not needed for the optimal p_nl.
    pub eliminate_non_minimal: bool,
    pub max_size: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tolerance: Tolerance::ANALYTIC,
            eliminate_non_minimal: true,
            max_size: MAX_ENSEMBLE_SIZE,
        }
    }
}

impl SearchOptions {
    pub fn with_tolerance(tolerance: Tolerance) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    /// Skips the convex-combination elimination.
    pub fn fast(mut self) -> Self {
        self.eliminate_non_minimal = false;
        self
    }
}

/// Bitmasks over 24 vertices with exactly `size` bits set, in increasing order.
fn masks_of_size(size: usize) -> Vec<u32> {
    let mut out = Vec::new();
    if size == 0 {
        return out;
    }
    let limit = 1u32 << 24;
    let mut m: u32 = (1 << size) - 1;
    while m < limit {
        out.push(m);
        // Gosper's hack: next integer with the same popcount.
        let c = m & m.wrapping_neg();
        let r = m + c;
        m = (((r ^ m) >> 2) / c) | r;
    }
    out
}

fn mask_slots(mask: u32) -> ([usize; MAX_ENSEMBLE_SIZE], usize) {
    let mut slots = [0; MAX_ENSEMBLE_SIZE];
    let mut len = 0;
    for i in 0..24 {
        if mask & (1 << i) != 0 {
            slots[len] = i;
            len += 1;
        }
    }
    (slots, len)
}

fn mask_indices(mask: u32) -> Vec<usize> {
    (0..24).filter(|i| mask & (1 << i) != 0).collect()
}

/// Enumerates all minimal ensembles of `bx`.
///
/// Subsets of the 24 vertices are tried by increasing size. A subset is
/// accepted when its least-squares weights reconstruct the box to L1 error
/// below epsilon, sum to one within epsilon and all exceed epsilon. Supersets
/// of accepted subsets are skipped, since they cannot be minimal.
pub fn find_minimal_ensembles(bx: &CorrelationBox, tol: Tolerance) -> Result<Vec<Ensemble>> {
    find_minimal_ensembles_with(bx, &SearchOptions::with_tolerance(tol))
}

pub fn find_minimal_ensembles_with(bx: &CorrelationBox, opts: &SearchOptions) -> Result<Vec<Ensemble>> {
    let eps = opts.tolerance.epsilon();
    if opts.max_size == 0 || opts.max_size > MAX_ENSEMBLE_SIZE {
        return Err(Error::InvalidParameter(format!(
            "max ensemble size must be 1..={MAX_ENSEMBLE_SIZE}"
        )));
    }
    let target = bx.to_vector();
    let mut accepted: Vec<(u32, Vec<f64>)> = Vec::new();
    let mut best_residual = f64::INFINITY;

    for size in 1..=opts.max_size {
        let masks = masks_of_size(size);
        let pruned: Vec<u32> = masks
            .into_iter()
            .filter(|&m| accepted.iter().all(|(a, _)| a & !m != 0))
            .collect();
        let results: Vec<(u32, WeightFit)> = pruned
            .par_iter()
            .map(|&m| {
                let (slots, len) = mask_slots(m);
                (m, fit_indices(&target, &slots[..len], eps))
            })
            .collect();
        for (mask, fit) in results {
            best_residual = best_residual.min(fit.residual);
            let ok = fit.residual < eps
                && (1.0 - fit.weight_sum()).abs() < eps
                && fit.weights.iter().all(|&w| w > eps);
            if ok {
                accepted.push((mask, fit.weights));
            }
        }
    }

    if accepted.is_empty() {
        return Err(Error::NotInPolytope {
            best_residual,
            epsilon: eps,
        });
    }

    if opts.eliminate_non_minimal {
        accepted = eliminate_convex_combinations(accepted, eps);
    }

    let all = ExtremeBox::all();
    Ok(accepted
        .into_iter()
        .map(|(mask, weights)| {
            let members = mask_indices(mask)
                .into_iter()
                .zip(weights)
                .map(|(i, weight)| EnsembleMember {
                    weight,
                    extreme: all[i],
                })
                .collect();
            Ensemble::new(*bx, members)
        })
        .collect())
}

/// Weight vector of an accepted candidate, spread over all 24 vertices.
fn dense_weights(mask: u32, weights: &[f64]) -> [f64; 24] {
    let mut dense = [0.0; 24];
    for (i, w) in mask_indices(mask).into_iter().zip(weights) {
        dense[i] = *w;
    }
    dense
}

/// Drops candidates whose weight vector is a convex combination of other
/// candidates' weight vectors.
///
/// Only candidates supported inside the tested candidate's vertex set can
/// contribute, since all weights are positive.
fn eliminate_convex_combinations(candidates: Vec<(u32, Vec<f64>)>, eps: f64) -> Vec<(u32, Vec<f64>)> {
    let dense: Vec<[f64; 24]> = candidates.iter().map(|(m, w)| dense_weights(*m, w)).collect();
    let mut keep = vec![true; candidates.len()];
    for (c, (mask, _)) in candidates.iter().enumerate() {
        let others: Vec<usize> = (0..candidates.len())
            .filter(|&d| d != c && candidates[d].0 & !mask == 0)
            .collect();
        if others.is_empty() {
            continue;
        }
        // Solve [W; 1^T] lambda = [w_c; 1] in least squares.
        let rows = 25;
        let a = DMatrix::from_fn(rows, others.len(), |r, j| if r < 24 { dense[others[j]][r] } else { 1.0 });
        let b = DVector::from_fn(rows, |r, _| if r < 24 { dense[c][r] } else { 1.0 });
        let Ok(lambda) = a.clone().svd(true, true).solve(&b, 1e-12) else {
            continue;
        };
        let residual: f64 = (&a * &lambda - &b).iter().map(|v| v.abs()).sum();
        if residual < eps && lambda.iter().all(|&l| l > -eps) {
            keep[c] = false;
        }
    }
    candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

/// Relative gap below which two p_nl values count as tied.
const PNL_TIE: f64 = 1e-12;

/// The ensemble with the least total nonlocal weight; ties go to the
/// lexicographically smallest sorted label list.
pub fn min_pnl_ensemble(ensembles: &[Ensemble]) -> Result<&Ensemble> {
    ensembles
        .iter()
        .min_by(|a, b| {
            let (pa, pb) = (a.p_nl(), b.p_nl());
            if (pa - pb).abs() <= PNL_TIE {
                a.sorted_labels().cmp(&b.sorted_labels())
            } else {
                pa.total_cmp(&pb)
            }
        })
        .ok_or_else(|| Error::InvalidParameter("no ensembles to choose from".into()))
}

/// Flat index helper re-exported for callers building boxes by hand.
pub fn entry_index(x: Setting, y: Setting, a: usize, b: usize) -> usize {
    flat_index(x.bit(), y.bit(), a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::Setting::{Off, On};
    use crate::correlations::{ch_value, closed_form_box, MeasurementSettings};

    fn l(label: &str) -> ExtremeBox {
        label.parse().unwrap()
    }

    #[test]
    fn l0011_matches_printed_table() {
        let bx = local_box(0, 0, 1, 1);
        // Printed table, rows (y, b), columns (x, a).
        assert_eq!(bx.cell(Off, Off), [[0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(bx.cell(On, Off), [[0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(bx.cell(Off, On), [[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(bx.cell(On, On), [[1.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn b111_matches_printed_table() {
        let bx = nonlocal_box(1, 1, 1);
        assert_eq!(bx.cell(Off, Off), [[0.0, 0.5], [0.5, 0.0]]);
        assert_eq!(bx.cell(On, Off), [[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(bx.cell(Off, On), [[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(bx.cell(On, On), [[0.5, 0.0], [0.0, 0.5]]);
    }

    #[test]
    fn local_boxes_are_distinct_and_deterministic() {
        let tables: Vec<CorrelationBox> = ExtremeBox::all()[..16].iter().map(|e| e.table()).collect();
        for (i, a) in tables.iter().enumerate() {
            for x in Setting::BOTH {
                for y in Setting::BOTH {
                    let c = a.cell(x, y);
                    let flat = [c[0][0], c[0][1], c[1][0], c[1][1]];
                    assert!(flat.iter().all(|&v| v == 0.0 || v == 1.0));
                    assert_eq!(flat.iter().filter(|&&v| v == 1.0).count(), 1);
                }
            }
            for b in &tables[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn nonlocal_marginals_are_uniform() {
        for e in &ExtremeBox::all()[16..] {
            let bx = e.table();
            for x in Setting::BOTH {
                for y in Setting::BOTH {
                    for o in 0..2 {
                        assert_eq!(bx.marginal_a(o, x, y), 0.5);
                        assert_eq!(bx.marginal_b(o, x, y), 0.5);
                    }
                }
            }
        }
    }

    #[test]
    fn ch_of_b111_is_half() {
        assert_eq!(ch_value(&nonlocal_box(1, 1, 1)), 0.5);
    }

    #[test]
    fn local_boxes_respect_ch_bound() {
        for e in &ExtremeBox::all()[..16] {
            assert!(ch_value(&e.table()) <= 0.0, "{e}");
        }
    }

    #[test]
    fn labels_round_trip() {
        for e in ExtremeBox::all() {
            assert_eq!(e.label().parse::<ExtremeBox>().unwrap(), *e);
            assert_eq!(ExtremeBox::all()[e.index()], *e);
        }
        assert!("L_012".parse::<ExtremeBox>().is_err());
        assert!("B_1111".parse::<ExtremeBox>().is_err());
        assert!("X_000".parse::<ExtremeBox>().is_err());
    }

    #[test]
    fn vertices_are_well_separated() {
        let all = ExtremeBox::all();
        for i in 0..24 {
            for j in i + 1..24 {
                assert!(all[i].table().l1_distance(&all[j].table()) >= 0.5);
            }
        }
    }

    #[test]
    fn quantum_box_is_no_signaling() {
        let bx = closed_form_box(&MeasurementSettings::new(1.0, 0.2).unwrap());
        let chk = is_no_signaling(&bx, 1e-12);
        assert!(chk.no_signaling && chk.max_violation < 1e-12);
    }

    #[test]
    fn signaling_box_is_detected() {
        let mut bx = nonlocal_box(1, 1, 1);
        // Shift 0.1 of Alice's (off) mass between outcomes, only when Bob is on.
        let mut c = bx.cell(Off, On);
        c[0][0] += 0.1;
        c[1][1] -= 0.1;
        bx.set_cell(Off, On, c);
        let chk = is_no_signaling(&bx, 1e-9);
        assert!(!chk.no_signaling);
        assert!((chk.max_violation - 0.1).abs() < 1e-15);
    }

    #[test]
    fn vertices_are_no_signaling() {
        for e in ExtremeBox::all() {
            assert_eq!(is_no_signaling(&e.table(), 0.0).max_violation, 0.0);
        }
    }

    #[test]
    fn identity_decomposition() {
        let fit = solve_weights(&local_box(0, 0, 1, 1), &[l("L_0011")]).unwrap();
        assert_eq!(fit.weights.len(), 1);
        assert!((fit.weights[0] - 1.0).abs() < 1e-15);
        assert!(fit.residual < 1e-15);
    }

    #[test]
    fn two_vertex_mixture() {
        let a = local_box(0, 0, 0, 0);
        let b = local_box(0, 1, 0, 1);
        let mix = CorrelationBox::mix([(0.5, &a), (0.5, &b)]);
        let fit = solve_weights(&mix, &[l("L_0000"), l("L_0101")]).unwrap();
        assert!((fit.weights[0] - 0.5).abs() < 1e-12);
        assert!((fit.weights[1] - 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn no_fit_for_pr_box_from_one_local_vertex() {
        // w = <L,B>/<L,L> = 1.5/4, leaving an L1 gap of 3.25.
        let fit = solve_weights(&nonlocal_box(1, 1, 1), &[l("L_0000")]).unwrap();
        assert!((fit.weights[0] - 0.375).abs() < 1e-12);
        assert!((fit.residual - 3.25).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_subset_gives_min_norm_solution() {
        // The 16 local boxes span only 9 dimensions; pick 9 dependent ones.
        let subset: Vec<ExtremeBox> = ExtremeBox::all()[..9].to_vec();
        let target = CorrelationBox::mix([(0.5, &subset[0].table()), (0.5, &subset[1].table())]);
        let fit = solve_weights(&target, &subset).unwrap();
        assert!(fit.residual < 1e-10);
        assert!((fit.weight_sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn subset_size_is_checked() {
        assert!(solve_weights(&nonlocal_box(0, 0, 0), &[]).is_err());
        assert!(solve_weights(&nonlocal_box(0, 0, 0), &ExtremeBox::all()[..10]).is_err());
    }

    #[test]
    fn vertex_has_trivial_ensemble() {
        for label in ["L_0011", "B_111"] {
            let e = l(label);
            let found = find_minimal_ensembles(&e.table(), Tolerance::ANALYTIC).unwrap();
            assert_eq!(found.len(), 1);
            assert_eq!(found[0].members().len(), 1);
            assert_eq!(found[0].members()[0].extreme, e);
            assert!((found[0].members()[0].weight - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_of_two_locals_has_unique_ensemble() {
        let mix = CorrelationBox::mix([(0.3, &local_box(0, 0, 0, 0)), (0.7, &local_box(1, 1, 0, 1))]);
        let found = find_minimal_ensembles(&mix, Tolerance::ANALYTIC).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].sorted_labels(), vec!["L_0000", "L_1101"]);
    }

    #[test]
    fn signaling_box_is_outside_polytope() {
        let mut bx = local_box(0, 0, 0, 0);
        bx.set_cell(Off, On, [[0.0, 0.0], [1.0, 0.0]]);
        let err = find_minimal_ensembles(&bx, Tolerance::new(1e-3).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NotInPolytope { .. }));
    }

    #[test]
    fn min_pnl_picks_local_and_breaks_ties() {
        let src = nonlocal_box(1, 1, 1);
        let local = Ensemble::new(src, vec![EnsembleMember { weight: 1.0, extreme: l("L_0011") }]);
        let nonlocal = Ensemble::new(src, vec![EnsembleMember { weight: 1.0, extreme: l("B_111") }]);
        let other_local = Ensemble::new(src, vec![EnsembleMember { weight: 1.0, extreme: l("L_0000") }]);
        let list = vec![nonlocal.clone(), local.clone(), other_local.clone()];
        let best = min_pnl_ensemble(&list).unwrap();
        assert_eq!(best.p_nl(), 0.0);
        assert_eq!(best.sorted_labels(), vec!["L_0000"]);
        assert_eq!(min_pnl_ensemble(&[nonlocal]).unwrap().p_nl(), 1.0);
        assert!(min_pnl_ensemble(&[]).is_err());
    }

    #[test]
    fn tolerance_range() {
        assert!(Tolerance::new(0.0).is_err());
        assert!(Tolerance::new(0.2).is_err());
        assert!(Tolerance::new(1e-2).is_ok());
    }

    #[test]
    fn ensemble_json_format() {
        let e = Ensemble::new(
            nonlocal_box(1, 1, 1),
            vec![EnsembleMember { weight: 1.0, extreme: l("B_111") }],
        );
        let v: serde_json::Value = serde_json::to_value(&e).unwrap();
        assert_eq!(v, serde_json::json!([{"weight": 1.0, "box": "B_111"}]));
    }

    #[test]
    fn gosper_enumeration_counts() {
        assert_eq!(masks_of_size(1).len(), 24);
        assert_eq!(masks_of_size(3).len(), 2024);
        assert!(masks_of_size(3).iter().all(|m| m.count_ones() == 3 && *m < 1 << 24));
    }

    #[test]
    fn entry_index_matches_box_layout() {
        let bx = nonlocal_box(0, 1, 1);
        let v = bx.to_vector();
        assert_eq!(v[entry_index(On, Off, 1, 0)], bx.prob(1, 0, On, Off));
    }
}
