// Certified randomness per run: guessing probability and min-entropy.
use diqkd::correlations::{limit_box, LimitParams};
use diqkd::polytope::{local_box, nonlocal_box, Tolerance};
use diqkd::security::{guessing_probability, randomness_rate};

fn main() -> diqkd::Result<()> {
    let boxes = [
        ("limit k=0.26", limit_box(&LimitParams::new(0.26)?)),
        ("L_0011", local_box(0, 0, 1, 1)),
        ("B_111", nonlocal_box(1, 1, 1)),
    ];
    for (name, bx) in boxes {
        let p_guess = guessing_probability(&bx, Tolerance::ANALYTIC)?;
        let (h_min, l_random) = randomness_rate(&bx, Tolerance::ANALYTIC)?;
        println!("{name:<14} p_guess={p_guess:.4} H_min={h_min:.4} l_random={l_random:.4}");
    }
    Ok(())
}
