//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! show.

use std::collections::BTreeSet;
use std::time::Instant;

use diqkd::correlations::{
    ch_limit_optimum, ch_value, closed_form_box, limit_box, optimize_t, scan_alpha, LimitParams, MeasurementSettings,
};
use diqkd::fock::{box_from_oracle, coherence_swap_check, OracleConfig};
use diqkd::polytope::{
    find_minimal_ensembles, is_no_signaling, local_box, min_pnl_ensemble, nonlocal_box, solve_weights, Ensemble,
    ExtremeBox, Tolerance,
};
use diqkd::protocol::{eve_ensemble, eve_information, run_protocol_with_ensemble, EveStrategy, ProtocolConfig};
use diqkd::security::{analytic_weights, key_rate_from_ensembles, ANALYTIC_ENSEMBLES};
use diqkd::{CorrelationBox, Setting};

const K_STAR: f64 = 0.260;
const K_STAR_TOL: f64 = 0.001;
const CH_STAR: f64 = 0.1086;
const CH_STAR_TOL: f64 = 0.0001;
const CH_AT_8: f64 = 0.100;
const CH_AT_8_TOL: f64 = 0.005;
const CH_AT_10_TOL: f64 = 0.004;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_ALPHA2: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
const ORACLE_T: [f64; 4] = [0.01, 0.05, 0.1, 0.3];
const EPSILON: f64 = 1e-7;
const WEIGHT_TOL: f64 = 1e-9;
const K_2CH_TOL: f64 = 1e-8;
const LIMIT_KS: [f64; 3] = [0.1, 0.26, 0.5];
const P_GUESS: f64 = 0.8914;
const P_GUESS_TOL: f64 = 0.0005;
const L_RANDOM: f64 = 0.1660;
const L_RANDOM_TOL: f64 = 0.001;
const SWAP_TOL: f64 = 1e-12;
const NS_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;
const MC_ROUNDS: u64 = 1_000_000;
const MC_SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn limit(k: f64) -> CorrelationBox {
    limit_box(&LimitParams::new(k).unwrap())
}

fn closed(alpha2: f64, t: f64) -> CorrelationBox {
    closed_form_box(&MeasurementSettings::new(alpha2, t).unwrap())
}

fn criterion_1() -> Outcome {
    let (k, ch) = ch_limit_optimum();
    let pass = (k - K_STAR).abs() <= K_STAR_TOL && (ch - CH_STAR).abs() <= CH_STAR_TOL;
    outcome(pass, format!("k* = {k:.5}, CH* = {ch:.6}"))
}

fn criterion_2() -> Outcome {
    let grid: Vec<f64> = (1..=24).map(|i| i as f64 * 0.5).collect();
    let rows = scan_alpha(&grid).unwrap();
    let at = |a2: f64| rows.iter().find(|r| r.alpha2 == a2).unwrap().ch;
    let (ch8, ch10) = (at(8.0), at(10.0));
    let ok8 = (ch8 - CH_AT_8).abs() <= CH_AT_8_TOL;
    let ok10 = (ch10 - CH_STAR).abs() <= CH_AT_10_TOL;
    outcome(
        ok8 && ok10,
        format!(
            "CH(8) = {ch8:.5} [{}], CH(10) = {ch10:.5}, off by {:.5} from {CH_STAR} (tol {CH_AT_10_TOL}) [{}]",
            if ok8 { "ok" } else { "out" },
            (ch10 - CH_STAR).abs(),
            if ok10 { "ok" } else { "out" }
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_at = (0.0, 0.0);
    for a2 in ORACLE_ALPHA2 {
        for t in ORACLE_T {
            let oracle = box_from_oracle(&OracleConfig::new(a2, t)).unwrap();
            let d = oracle.max_abs_diff(&closed(a2, t));
            if d > worst {
                worst = d;
                worst_at = (a2, t);
            }
        }
    }
    outcome(
        worst <= ORACLE_TOL,
        format!("max entry gap {worst:.2e} at alpha2={}, T={}", worst_at.0, worst_at.1),
    )
}

fn label_set(e: &Ensemble) -> BTreeSet<String> {
    e.sorted_labels().into_iter().collect()
}

fn criterion_4(found: &[Ensemble]) -> Outcome {
    let p = analytic_weights(0.26);
    let expected: Vec<BTreeSet<String>> = ANALYTIC_ENSEMBLES
        .iter()
        .map(|m| m.iter().map(|(_, l)| l.to_string()).collect())
        .collect();
    let found_sets: BTreeSet<BTreeSet<String>> = found.iter().map(label_set).collect();
    let expected_sets: BTreeSet<BTreeSet<String>> = expected.iter().cloned().collect();
    let sets_match = found.len() == 27 && expected_sets.len() == 27 && found_sets == expected_sets;

    let mut worst: f64 = 0.0;
    for e in found {
        let Some(i) = expected.iter().position(|s| *s == label_set(e)) else {
            continue;
        };
        for &(pi, label) in ANALYTIC_ENSEMBLES[i] {
            let v: ExtremeBox = label.parse().unwrap();
            worst = worst.max((e.weight_of(v).unwrap() - p[pi - 1]).abs());
        }
    }
    let best = min_pnl_ensemble(found).unwrap();
    let best_is_27 = label_set(best) == expected[26];
    let pnl_gap = (best.p_nl() - p[23]).abs();
    outcome(
        sets_match && worst <= WEIGHT_TOL && best_is_27 && pnl_gap <= WEIGHT_TOL,
        format!(
            "{} ensembles, sets match: {sets_match}, max weight gap {worst:.1e}, optimum is M27: {best_is_27}, |p_nl - p24| = {pnl_gap:.1e}",
            found.len()
        ),
    )
}

fn criterion_5(limit_026: &[Ensemble]) -> Outcome {
    let tol = Tolerance::new(EPSILON).unwrap();
    let mut family: Vec<(String, CorrelationBox)> = Vec::new();
    for a2 in ORACLE_ALPHA2 {
        for t in ORACLE_T {
            family.push((format!("alpha2={a2},T={t}"), closed(a2, t)));
        }
    }
    for k in LIMIT_KS {
        family.push((format!("k={k}"), limit(k)));
    }
    let mut failures = Vec::new();
    let mut worst_violating: f64 = 0.0;
    let mut worst_failing: f64 = 0.0;
    for (name, bx) in &family {
        let k = if name == "k=0.26" {
            key_rate_from_ensembles(bx, limit_026, tol).unwrap().k
        } else {
            let ens = find_minimal_ensembles(bx, tol).unwrap();
            key_rate_from_ensembles(bx, &ens, tol).unwrap().k
        };
        let two_ch = 2.0 * ch_value(bx);
        let gap = (k - two_ch).abs();
        if gap > K_2CH_TOL {
            worst_failing = worst_failing.max(gap);
            failures.push(format!("{name} (CH={:.4}, K={k:.4})", two_ch / 2.0));
        } else {
            worst_violating = worst_violating.max(gap);
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{}/{} boxes agree (max gap {worst_violating:.1e}); mismatched: [{}], max gap {worst_failing:.3}",
            family.len() - failures.len(),
            family.len(),
            failures.join("; ")
        ),
    )
}

fn criterion_6(limit_026: &[Ensemble]) -> Outcome {
    let r = key_rate_from_ensembles(&limit(0.26), limit_026, Tolerance::new(EPSILON).unwrap()).unwrap();
    let pass = (r.p_guess - P_GUESS).abs() <= P_GUESS_TOL && (r.l_random - L_RANDOM).abs() <= L_RANDOM_TOL;
    outcome(pass, format!("p_guess = {:.5}, l_random = {:.5}", r.p_guess, r.l_random))
}

fn criterion_7() -> Outcome {
    let r = coherence_swap_check(2).unwrap();
    let pass = (r.success_probability - 0.5).abs() <= SWAP_TOL && (r.fidelity - 1.0).abs() <= SWAP_TOL;
    outcome(
        pass,
        format!("success = {:.15}, fidelity = {:.15}", r.success_probability, r.fidelity),
    )
}

/// True when `subset` passes the acceptance test of the ensemble search.
fn reconstructs(bx: &CorrelationBox, subset: &[ExtremeBox]) -> bool {
    let fit = solve_weights(bx, subset).unwrap();
    fit.residual < EPSILON && (1.0 - fit.weight_sum()).abs() < EPSILON && fit.weights.iter().all(|&w| w > EPSILON)
}

fn criterion_8(limit_026: &[Ensemble]) -> Outcome {
    let mut notes = Vec::new();

    // No-signaling of every quantum box the toolkit produces.
    let mut quantum: Vec<CorrelationBox> = Vec::new();
    for a2 in ORACLE_ALPHA2 {
        for t in ORACLE_T {
            quantum.push(closed(a2, t));
            quantum.push(box_from_oracle(&OracleConfig::new(a2, t)).unwrap());
        }
    }
    for k in LIMIT_KS {
        quantum.push(limit(k));
    }
    let ns_worst = quantum
        .iter()
        .map(|b| is_no_signaling(b, NS_TOL).max_violation)
        .fold(0.0, f64::max);
    let ns_ok = ns_worst <= NS_TOL;
    notes.push(format!("no-signaling worst {ns_worst:.1e}"));

    // Vertex definitions, distinctness and extremality.
    let mut vertex_ok = ExtremeBox::all().len() == 24;
    for v in ExtremeBox::all() {
        let bx = v.table();
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        let want = match *v {
                            ExtremeBox::Local { q, r, s, t } => {
                                let hit = a == (q as usize * x) ^ r as usize && b == (s as usize * y) ^ t as usize;
                                if hit {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            ExtremeBox::Nonlocal { r, s, t } => {
                                let hit = a ^ b == (x * y) ^ (r as usize * x) ^ (s as usize * y) ^ t as usize;
                                if hit {
                                    0.5
                                } else {
                                    0.0
                                }
                            }
                        };
                        vertex_ok &= bx.p(a, b, x, y) == want;
                    }
                }
            }
        }
        let others: Vec<ExtremeBox> = ExtremeBox::all().iter().copied().filter(|o| o != v).collect();
        vertex_ok &= others.iter().all(|o| o.table().l1_distance(&bx) >= 0.5);
    }
    vertex_ok &= local_box(0, 0, 1, 1).cell(Setting::Off, Setting::Off) == [[0.0, 1.0], [0.0, 0.0]];
    vertex_ok &= nonlocal_box(1, 1, 1).cell(Setting::On, Setting::On) == [[0.5, 0.0], [0.0, 0.5]];
    for v in [ExtremeBox::all()[3], ExtremeBox::all()[23]] {
        let e = find_minimal_ensembles(&v.table(), Tolerance::ANALYTIC).unwrap();
        vertex_ok &= e.len() == 1 && e[0].members().len() == 1;
    }
    notes.push(format!("vertices ok: {vertex_ok}"));

    // Oscillator phase and party exchange.
    let mut sym_worst: f64 = 0.0;
    for (a2, t) in [(0.5, 0.1), (1.0, 0.05), (2.0, 0.3)] {
        let base = box_from_oracle(&OracleConfig::new(a2, t)).unwrap();
        for phi in [0.7, 2.1, -1.3] {
            let rotated = box_from_oracle(&OracleConfig::new(a2, t).with_phi(phi)).unwrap();
            sym_worst = sym_worst.max(rotated.max_abs_diff(&base));
        }
        sym_worst = sym_worst.max(base.swap_parties().max_abs_diff(&base));
    }
    for a2 in ORACLE_ALPHA2 {
        for t in ORACLE_T {
            let b = closed(a2, t);
            sym_worst = sym_worst.max(b.swap_parties().max_abs_diff(&b));
        }
    }
    let sym_ok = sym_worst <= SYMMETRY_TOL;
    notes.push(format!("phase/exchange worst {sym_worst:.1e}"));

    // Reconstruction and exhaustive proper-subset minimality.
    let opt4 = optimize_t(4.0).unwrap();
    let box4 = closed(4.0, opt4.t_opt);
    let ens4 = find_minimal_ensembles(&box4, Tolerance::ANALYTIC).unwrap();
    let mut checked = 0;
    let mut minimal_ok = true;
    for (src, list) in [(limit(0.26), limit_026), (box4, &ens4[..])] {
        for e in list {
            minimal_ok &= e.residual() < EPSILON && e.source() == &src;
            let members = e.vertices();
            let n = members.len();
            for mask in 1..(1u32 << n) - 1 {
                let subset: Vec<ExtremeBox> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| members[i]).collect();
                minimal_ok &= !reconstructs(&src, &subset);
                checked += 1;
            }
        }
    }
    notes.push(format!("{checked} proper subsets rejected: {minimal_ok}"));

    outcome(ns_ok && vertex_ok && sym_ok && minimal_ok, notes.join(", "))
}

fn criterion_9() -> Outcome {
    let opt = optimize_t(8.0).unwrap();
    let cfg = ProtocolConfig::new(8.0, opt.t_opt, MC_ROUNDS, MC_SEED);
    let analytic_ch = ch_value(&closed(8.0, opt.t_opt));

    let honest = run_protocol_with_ensemble(&cfg, None).unwrap();
    let ch = honest.bell().unwrap().ch_estimate;
    let z_ch = (ch.value - analytic_ch) / ch.std_error;
    let violations = honest.key_disagreements();

    let ens = eve_ensemble(&cfg).unwrap();
    let attacked = run_protocol_with_ensemble(&cfg.with_eve(EveStrategy::Optimal), Some(&ens)).unwrap();
    let info = eve_information(&attacked).unwrap();
    let target = 1.0 - 2.0 * analytic_ch;
    let z_info = (info.value - target) / info.std_error;

    let pass = z_ch.abs() <= 4.0 && violations == 0 && attacked.key_disagreements() == 0 && z_info.abs() <= 3.0;
    outcome(
        pass,
        format!(
            "CH = {:.4} +- {:.4} vs {analytic_ch:.4} ({z_ch:+.2} se), key violations {violations}, I(A:E) = {:.4} +- {:.4} vs {target:.4} ({z_info:+.2} se)",
            ch.value, ch.std_error, info.value, info.std_error
        ),
    )
}

fn main() {
    let start = Instant::now();
    let limit_026 = find_minimal_ensembles(&limit(0.26), Tolerance::new(EPSILON).unwrap()).unwrap();

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 CH limit optimum", Box::new(criterion_1)),
        ("2 CH(alpha^2) scan", Box::new(criterion_2)),
        ("3 oracle equivalence", Box::new(criterion_3)),
        ("4 analytic ensemble table", Box::new(|| criterion_4(&limit_026))),
        ("5 K = 2CH", Box::new(|| criterion_5(&limit_026))),
        ("6 randomness", Box::new(|| criterion_6(&limit_026))),
        ("7 coherence swapping", Box::new(criterion_7)),
        ("8 property suite", Box::new(|| criterion_8(&limit_026))),
        ("9 Monte Carlo", Box::new(criterion_9)),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        let t = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {name}: {} ({:.1?})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed()
        );
    }
    println!(
        "acceptance: {}/{} passed in {:.1?}",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
