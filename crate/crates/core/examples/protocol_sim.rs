// One million protocol rounds, honest and with Eve playing her optimal ensemble.
use diqkd::correlations::optimize_t;
use diqkd::protocol::{eve_ensemble, eve_information, run_protocol_with_ensemble, EveStrategy, ProtocolConfig};

fn main() -> diqkd::Result<()> {
    let t_opt = optimize_t(8.0)?.t_opt;
    let config = ProtocolConfig::new(8.0, t_opt, 1_000_000, 42);

    let honest = run_protocol_with_ensemble(&config, None)?;
    let bell = honest.bell()?;
    println!(
        "honest: key {} bits, {} disagreements, CH = {:.4} +- {:.4}",
        honest.key_length(),
        honest.key_disagreements(),
        bell.ch_estimate.value,
        bell.ch_estimate.std_error
    );

    let ensemble = eve_ensemble(&config)?;
    let attacked = run_protocol_with_ensemble(&config.with_eve(EveStrategy::Optimal), Some(&ensemble))?;
    let bell = attacked.bell()?;
    let info = eve_information(&attacked)?;
    println!(
        "eve:    CH = {:.4} +- {:.4}, I(A:E) = {:.4} +- {:.4} (p_l = {:.4})",
        bell.ch_estimate.value,
        bell.ch_estimate.std_error,
        info.value,
        info.std_error,
        ensemble.p_l()
    );
    Ok(())
}
