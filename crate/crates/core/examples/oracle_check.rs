// Closed-form boxes against brute-force photon counting in a truncated Fock space.
use diqkd::correlations::{closed_form_box, MeasurementSettings};
use diqkd::fock::{box_from_oracle, OffModel, OracleConfig};

fn main() -> diqkd::Result<()> {
    for alpha2 in [0.5, 1.0, 2.0, 4.0] {
        for t in [0.01, 0.1, 0.3] {
            let closed = closed_form_box(&MeasurementSettings::new(alpha2, t)?);
            let cfg = OracleConfig::new(alpha2, t);
            let oracle = box_from_oracle(&cfg)?;
            println!(
                "alpha2={alpha2:<4} T={t:<5} cutoff={:<3} max |closed - oracle| = {:.2e}",
                cfg.cutoff,
                closed.max_abs_diff(&oracle)
            );
        }
    }

    // Keeping the beamsplitter for "off" and counting any click as 0 gives the same box.
    let cfg = OracleConfig::new(1.0, 0.2);
    let removed = box_from_oracle(&cfg)?;
    let blocked = box_from_oracle(&cfg.with_off_model(OffModel::OscillatorBlocked))?;
    println!("off models differ by {:.2e}", removed.max_abs_diff(&blocked));
    Ok(())
}
