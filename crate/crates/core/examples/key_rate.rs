// Key rate from Eve's optimal ensemble, compared with 2 CH.
use diqkd::correlations::{closed_form_box, limit_box, optimize_t, LimitParams, MeasurementSettings};
use diqkd::polytope::Tolerance;
use diqkd::security::{key_rate, verify_k_equals_2ch};

fn main() -> diqkd::Result<()> {
    let report = key_rate(&limit_box(&LimitParams::new(0.26)?), Tolerance::ANALYTIC)?;
    println!("{}", serde_json::to_string_pretty(&report)?);

    for alpha2 in [2.0, 4.0, 8.0] {
        let opt = optimize_t(alpha2)?;
        let bx = closed_form_box(&MeasurementSettings::new(alpha2, opt.t_opt)?);
        let check = verify_k_equals_2ch(&bx, Tolerance::ANALYTIC)?;
        println!(
            "alpha2={alpha2}: T_opt={:.4} K={:.6} 2CH={:.6} gap={:.1e}",
            opt.t_opt, check.k, check.two_ch, check.gap
        );
    }
    Ok(())
}
