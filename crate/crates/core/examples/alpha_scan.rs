// Optimal transmissivity and CH against oscillator intensity, as CSV.
use diqkd::correlations::{scan_alpha, write_scan_csv};

fn main() -> diqkd::Result<()> {
    let grid: Vec<f64> = (1..=24).map(|i| i as f64 * 0.5).collect();
    let rows = scan_alpha(&grid)?;
    write_scan_csv(&rows, std::io::stdout())?;

    let best = rows.iter().map(|r| r.ch).fold(f64::MIN, f64::max);
    eprintln!("largest CH on the grid: {best:.5}");
    Ok(())
}
