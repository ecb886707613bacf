//! Seeded Monte Carlo runs of the protocol: setting choice, measurement,
//! sifting and the Bell test, optionally with Eve supplying the boxes.
//!
//! Each round owns a ChaCha8 stream (the run seed plus the round index as
//! stream number) and draws the same number of variates whatever happens in
//! it, so transcripts do not depend on thread scheduling.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::boxes::{Cell, CorrelationBox, Setting};
use crate::correlations::{ch_value, closed_form_box, MeasurementSettings};
use crate::error::{Error, Result};
use crate::fock::{output_state, station_outcome, OracleConfig};
use crate::polytope::{find_minimal_ensembles, min_pnl_ensemble, Ensemble, ExtremeBox, Tolerance};

use Setting::{Off, On};

/// What Eve sends in place of the honest source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EveStrategy {
    /// Vertices drawn from the minimal ensemble with the least nonlocal weight.
    Optimal,
    /// Debug: always `B_111`.
    OnlyNonlocal,
    /// Debug: the local members of the optimal ensemble, renormalized.
    OnlyLocal,
}

/// How honest outcomes are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Draw `(a, b)` from the closed-form box.
    Analytic,
    /// Draw photon counts from the Fock oracle and apply the outcome rules.
    PhotonCounts,
}

/// Largest oscillator intensity accepted for photon-count sampling.
pub const PHOTON_COUNT_MAX_ALPHA2: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub alpha2: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub rounds: u64,
    /// Probability that a party picks `off`, independently per party.
    pub off_bias: f64,
    /// Fraction of (off, off) rounds disclosed for the Bell test.
    pub test_fraction: f64,
    pub seed: u64,
    pub eve: Option<EveStrategy>,
    pub sampling: Sampling,
}

impl ProtocolConfig {
    pub const DEFAULT_OFF_BIAS: f64 = 0.9;
    pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

    pub fn new(alpha2: f64, t: f64, rounds: u64, seed: u64) -> Self {
        Self {
            alpha2,
            t,
            rounds,
            off_bias: Self::DEFAULT_OFF_BIAS,
            test_fraction: Self::DEFAULT_TEST_FRACTION,
            seed,
            eve: None,
            sampling: Sampling::Analytic,
        }
    }

    pub fn with_eve(mut self, eve: EveStrategy) -> Self {
        self.eve = Some(eve);
        self
    }

    pub fn with_off_bias(mut self, off_bias: f64) -> Self {
        self.off_bias = off_bias;
        self
    }

    pub fn with_test_fraction(mut self, test_fraction: f64) -> Self {
        self.test_fraction = test_fraction;
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn measurement(&self) -> Result<MeasurementSettings> {
        MeasurementSettings::new(self.alpha2, self.t)
    }

    pub fn validate(&self) -> Result<()> {
        self.measurement()?;
        if self.rounds == 0 {
            return Err(Error::InvalidParameter("rounds must be at least 1".into()));
        }
        if !(self.off_bias > 0.0 && self.off_bias < 1.0) {
            return Err(Error::InvalidParameter(format!("off_bias {} outside (0, 1)", self.off_bias)));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::InvalidParameter(format!(
                "test_fraction {} outside [0, 1)",
                self.test_fraction
            )));
        }
        if self.sampling == Sampling::PhotonCounts && self.alpha2 > PHOTON_COUNT_MAX_ALPHA2 {
            return Err(Error::InvalidParameter(format!(
                "photon-count sampling supports alpha^2 <= {PHOTON_COUNT_MAX_ALPHA2}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Undisclosed (off, off) round, kept as raw key.
    Key,
    /// Disclosed for the Bell test.
    Test,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub x: Setting,
    pub y: Setting,
    pub a: u8,
    pub b: u8,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eve_vertex: Option<ExtremeBox>,
    /// Eve's guess of Alice's bit: exact for local vertices, a coin flip for
    /// nonlocal ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eve_guess: Option<u8>,
}

/// Record counts per setting pair, indexed `[x][y][a][b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CellCounts(pub [[[[u64; 2]; 2]; 2]; 2]);

impl CellCounts {
    pub fn total(&self, x: Setting, y: Setting) -> u64 {
        self.0[x.bit()][y.bit()].iter().flatten().sum()
    }

    pub fn get(&self, a: usize, b: usize, x: Setting, y: Setting) -> u64 {
        self.0[x.bit()][y.bit()][a][b]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Bell test on the disclosed rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellTest {
    /// Frequencies of the disclosed rounds.
    pub empirical_box: CorrelationBox,
    pub test_counts: CellCounts,
    pub ch_estimate: Estimate,
}

#[derive(Debug, Clone)]
pub struct Transcript {
    pub config: ProtocolConfig,
    pub records: Vec<RoundRecord>,
    pub sifted_key_a: Vec<u8>,
    pub sifted_key_b: Vec<u8>,
    /// `None` when some setting pair has no disclosed round.
    pub bell_test: Option<BellTest>,
}

impl Transcript {
    /// The Bell test, or the error naming the setting pair without records.
    pub fn bell(&self) -> Result<&BellTest> {
        match &self.bell_test {
            Some(b) => Ok(b),
            None => Err(estimate_box(self.test_records())
                .err()
                .expect("bell test is only missing when a cell is empty")),
        }
    }

    pub fn test_records(&self) -> impl Iterator<Item = &RoundRecord> {
        self.records.iter().filter(|r| r.role == Role::Test)
    }

    pub fn key_length(&self) -> usize {
        self.sifted_key_a.len()
    }

    /// Key rounds where `a XOR b != 1`.
    pub fn key_disagreements(&self) -> usize {
        self.sifted_key_a
            .iter()
            .zip(&self.sifted_key_b)
            .filter(|(a, b)| *a ^ *b != 1)
            .count()
    }
}

/// Frequency box of `records` plus the counts behind it.
pub fn estimate_box<'a>(records: impl IntoIterator<Item = &'a RoundRecord>) -> Result<(CorrelationBox, CellCounts)> {
    let mut counts = CellCounts::default();
    for r in records {
        counts.0[r.x.bit()][r.y.bit()][r.a as usize][r.b as usize] += 1;
    }
    let mut bx = CorrelationBox::default();
    for x in Setting::BOTH {
        for y in Setting::BOTH {
            let n = counts.total(x, y);
            if n == 0 {
                return Err(Error::EmptyCell {
                    x: x.name(),
                    y: y.name(),
                });
            }
            let mut cell: Cell = [[0.0; 2]; 2];
            for (a, row) in cell.iter_mut().enumerate() {
                for (b, p) in row.iter_mut().enumerate() {
                    *p = counts.get(a, b, x, y) as f64 / n as f64;
                }
            }
            bx.set_cell(x, y, cell);
        }
    }
    Ok((bx, counts))
}

/// CH from frequencies, `P(00|on,on) - P(01|on,off) - P(10|off,on) - P(00|off,off)`,
/// with the binomial standard error of independent cells.
pub fn ch_estimate(bx: &CorrelationBox, counts: &CellCounts) -> Estimate {
    let terms = [(0, 0, On, On), (0, 1, On, Off), (1, 0, Off, On), (0, 0, Off, Off)];
    let value = bx.prob(0, 0, On, On) - bx.prob(0, 1, On, Off) - bx.prob(1, 0, Off, On) - bx.prob(0, 0, Off, Off);
    let variance: f64 = terms
        .iter()
        .map(|&(a, b, x, y)| {
            let p = bx.prob(a, b, x, y);
            p * (1.0 - p) / counts.total(x, y) as f64
        })
        .sum();
    Estimate {
        value,
        std_error: variance.sqrt(),
    }
}

/// Cumulative distribution over `items`, for inverse-CDF sampling.
struct Categorical<T> {
    cumulative: Vec<f64>,
    items: Vec<T>,
}

impl<T: Copy> Categorical<T> {
    fn new(weighted: impl IntoIterator<Item = (f64, T)>) -> Self {
        let mut cumulative = Vec::new();
        let mut items = Vec::new();
        let mut acc = 0.0;
        for (w, item) in weighted {
            if w > 0.0 {
                acc += w;
                cumulative.push(acc);
                items.push(item);
            }
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        Self { cumulative, items }
    }

    fn sample(&self, u: f64) -> T {
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.items[i.min(self.items.len() - 1)]
    }
}

fn cell_sampler(cell: Cell) -> Categorical<(u8, u8)> {
    Categorical::new((0..4).map(|i| (cell[i >> 1][i & 1], ((i >> 1) as u8, (i & 1) as u8))))
}

/// Outcome sampler for each of the four setting pairs.
type Source = [[Categorical<(u8, u8)>; 2]; 2];

fn analytic_source(bx: &CorrelationBox) -> Source {
    [
        [cell_sampler(bx.cell(Off, Off)), cell_sampler(bx.cell(Off, On))],
        [cell_sampler(bx.cell(On, Off)), cell_sampler(bx.cell(On, On))],
    ]
}

fn photon_count_source(config: &ProtocolConfig) -> Result<Source> {
    let oracle = OracleConfig::new(config.alpha2, config.t);
    let pair = |x: Setting, y: Setting| -> Result<Categorical<(u8, u8)>> {
        let state = output_state(&oracle, x, y)?;
        Ok(Categorical::new(state.iter_probabilities().map(|(occ, p)| {
            let a = station_outcome(x, occ[0], occ[1], oracle.off_model) as u8;
            let b = station_outcome(y, occ[2], occ[3], oracle.off_model) as u8;
            (p, (a, b))
        })))
    };
    Ok([[pair(Off, Off)?, pair(Off, On)?], [pair(On, Off)?, pair(On, On)?]])
}

/// Eve's source: a vertex distribution plus each vertex's outcome sampler.
struct EveSource {
    vertices: Categorical<ExtremeBox>,
    tables: Vec<(ExtremeBox, Source)>,
}

impl EveSource {
    fn new(strategy: EveStrategy, ensemble: &Ensemble) -> Result<Self> {
        let members: Vec<(f64, ExtremeBox)> = match strategy {
            EveStrategy::Optimal => ensemble.members().iter().map(|m| (m.weight, m.extreme)).collect(),
            EveStrategy::OnlyNonlocal => vec![(1.0, ExtremeBox::Nonlocal { r: 1, s: 1, t: 1 })],
            EveStrategy::OnlyLocal => ensemble
                .members()
                .iter()
                .filter(|m| m.extreme.is_local())
                .map(|m| (m.weight, m.extreme))
                .collect(),
        };
        if members.is_empty() {
            return Err(Error::InvalidParameter(format!("{strategy:?} Eve has no vertices to send")));
        }
        let tables = members.iter().map(|&(_, e)| (e, analytic_source(&e.table()))).collect();
        Ok(Self {
            vertices: Categorical::new(members),
            tables,
        })
    }

    fn table(&self, e: ExtremeBox) -> &Source {
        &self.tables.iter().find(|(v, _)| *v == e).expect("sampled vertex has a table").1
    }
}

/// Eve's optimal ensemble for the honest box of `config`.
pub fn eve_ensemble(config: &ProtocolConfig) -> Result<Ensemble> {
    let bx = closed_form_box(&config.measurement()?);
    let ensembles = find_minimal_ensembles(&bx, Tolerance::ANALYTIC)?;
    Ok(min_pnl_ensemble(&ensembles)?.clone())
}

/// Simulates `config.rounds` rounds. With Eve enabled her optimal ensemble
/// is computed first.
pub fn run_protocol(config: &ProtocolConfig) -> Result<Transcript> {
    config.validate()?;
    let eve = match config.eve {
        Some(_) => Some(eve_ensemble(config)?),
        None => None,
    };
    run_protocol_with_ensemble(config, eve.as_ref())
}

/// Like [`run_protocol`] with Eve's ensemble supplied by the caller.
pub fn run_protocol_with_ensemble(config: &ProtocolConfig, ensemble: Option<&Ensemble>) -> Result<Transcript> {
    config.validate()?;
    let honest = match config.sampling {
        Sampling::Analytic => analytic_source(&closed_form_box(&config.measurement()?)),
        Sampling::PhotonCounts => photon_count_source(config)?,
    };
    let eve = match (config.eve, ensemble) {
        (Some(strategy), Some(ens)) => Some(EveSource::new(strategy, ens)?),
        (Some(_), None) => {
            return Err(Error::InvalidParameter("Eve enabled but no ensemble supplied".into()));
        }
        (None, _) => None,
    };

    let records: Vec<RoundRecord> = (0..config.rounds)
        .into_par_iter()
        .map(|i| play_round(config, i, &honest, eve.as_ref()))
        .collect();

    let bell_test = estimate_box(records.iter().filter(|r| r.role == Role::Test))
        .ok()
        .map(|(empirical_box, test_counts)| BellTest {
            ch_estimate: ch_estimate(&empirical_box, &test_counts),
            empirical_box,
            test_counts,
        });
    let (sifted_key_a, sifted_key_b) = records
        .iter()
        .filter(|r| r.role == Role::Key)
        .map(|r| (r.a, r.b))
        .unzip();
    Ok(Transcript {
        config: *config,
        records,
        sifted_key_a,
        sifted_key_b,
        bell_test,
    })
}

fn play_round(config: &ProtocolConfig, index: u64, honest: &Source, eve: Option<&EveSource>) -> RoundRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let [u_x, u_y, u_role, u_vertex, u_outcome, u_guess]: [f64; 6] = rng.gen();

    let pick = |u: f64| if u < config.off_bias { Off } else { On };
    let (x, y) = (pick(u_x), pick(u_y));
    let role = if (x, y) == (Off, Off) && u_role >= config.test_fraction {
        Role::Key
    } else {
        Role::Test
    };

    let (source, eve_vertex, eve_guess) = match eve {
        None => (honest, None, None),
        Some(eve) => {
            let v = eve.vertices.sample(u_vertex);
            let guess = match v.alice_outcome(Off) {
                Some(a) => a as u8,
                None => (u_guess < 0.5) as u8,
            };
            (eve.table(v), Some(v), Some(guess))
        }
    };
    let (a, b) = source[x.bit()][y.bit()].sample(u_outcome);
    RoundRecord {
        x,
        y,
        a,
        b,
        role,
        eve_vertex,
        eve_guess,
    }
}

/// Plug-in mutual information in bits between Alice's key bits and Eve's
/// register (the vertex she sent and her guess), with a delta-method
/// standard error.
///
/// Knowing the vertex, Eve's view is an erasure channel: a local vertex
/// fixes Alice's bit and a nonlocal one tells nothing, so the estimate
/// converges to the local weight.
pub fn eve_information(transcript: &Transcript) -> Result<Estimate> {
    use std::collections::HashMap;
    let mut joint: HashMap<(u8, ExtremeBox, u8), u64> = HashMap::new();
    let mut n = 0u64;
    for r in transcript.records.iter().filter(|r| r.role == Role::Key) {
        let (Some(v), Some(g)) = (r.eve_vertex, r.eve_guess) else {
            return Err(Error::InvalidParameter("transcript has no Eve register".into()));
        };
        *joint.entry((r.a, v, g)).or_default() += 1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidParameter("no key rounds to estimate I(A:E) from".into()));
    }
    let nf = n as f64;
    let mut pa: HashMap<u8, f64> = HashMap::new();
    let mut pe: HashMap<(ExtremeBox, u8), f64> = HashMap::new();
    for (&(a, v, g), &c) in &joint {
        *pa.entry(a).or_default() += c as f64 / nf;
        *pe.entry((v, g)).or_default() += c as f64 / nf;
    }
    let mut info = 0.0;
    let mut second = 0.0;
    for (&(a, v, g), &c) in &joint {
        let p = c as f64 / nf;
        let l = (p / (pa[&a] * pe[&(v, g)])).log2();
        info += p * l;
        second += p * l * l;
    }
    Ok(Estimate {
        value: info,
        std_error: ((second - info * info).max(0.0) / nf).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of all rounds' outcomes against `expected`,
/// one multinomial per setting pair. Outcomes of probability zero are left
/// out; observing one gives an infinite statistic.
pub fn chi_square_test(records: &[RoundRecord], expected: &CorrelationBox) -> Result<ChiSquareTest> {
    let (_, counts) = estimate_box(records)?;
    let mut statistic = 0.0;
    let mut dof = 0;
    for x in Setting::BOTH {
        for y in Setting::BOTH {
            let n = counts.total(x, y) as f64;
            let mut categories = 0;
            for a in 0..2 {
                for b in 0..2 {
                    let p = expected.prob(a, b, x, y);
                    let observed = counts.get(a, b, x, y) as f64;
                    if p > 0.0 {
                        let e = n * p;
                        statistic += (observed - e).powi(2) / e;
                        categories += 1;
                    } else if observed > 0.0 {
                        statistic = f64::INFINITY;
                    }
                }
            }
            dof += categories.max(1) - 1;
        }
    }
    let p_value = if statistic.is_finite() {
        ChiSquared::new(dof as f64)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sf(statistic)
    } else {
        0.0
    };
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value,
    })
}

/// Writes one JSON object per round.
pub fn write_jsonl<W: Write>(records: &[RoundRecord], out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<RoundRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: ProtocolConfig,
    pub rounds: usize,
    pub key_length: usize,
    pub key_disagreements: usize,
    pub test_rounds: usize,
    pub empirical_box: CorrelationBox,
    pub ch_estimate: Estimate,
    pub ch_analytic: f64,
    #[serde(rename = "I_AE", skip_serializing_if = "Option::is_none")]
    pub i_ae: Option<Estimate>,
}

/// Summary of a run; fails when the Bell test could not be estimated.
pub fn summarize(transcript: &Transcript) -> Result<Summary> {
    let cfg = transcript.config;
    let bell = transcript.bell()?;
    let i_ae = match cfg.eve {
        Some(_) => Some(eve_information(transcript)?),
        None => None,
    };
    Ok(Summary {
        config: cfg,
        rounds: transcript.records.len(),
        key_length: transcript.key_length(),
        key_disagreements: transcript.key_disagreements(),
        test_rounds: transcript.test_records().count(),
        empirical_box: bell.empirical_box,
        ch_estimate: bell.ch_estimate,
        ch_analytic: ch_value(&closed_form_box(&cfg.measurement()?)),
        i_ae,
    })
}
