// CH violation in the limit alpha^2 -> inf with alpha^2 T = k.
use diqkd::correlations::{ch_limit, ch_limit_optimum, ch_value, limit_box, LimitParams};

fn main() {
    let (k_star, ch_star) = ch_limit_optimum();
    println!("optimum: k* = {k_star:.4}, CH* = {ch_star:.4}");

    println!("{:>6} {:>10} {:>10}", "k", "CH(k)", "box CH");
    for i in 0..=14 {
        let k = i as f64 * 0.05;
        let bx = limit_box(&LimitParams::new(k).unwrap());
        println!("{k:>6.2} {:>10.6} {:>10.6}", ch_limit(k), ch_value(&bx));
    }

    // The limit box itself at the optimum.
    println!("\n{}", limit_box(&LimitParams::new(k_star).unwrap()));
}
