// All minimal decompositions of the optimal limit box into polytope vertices.
use diqkd::correlations::{limit_box, LimitParams};
use diqkd::polytope::{find_minimal_ensembles, min_pnl_ensemble, Tolerance};

fn main() -> diqkd::Result<()> {
    let bx = limit_box(&LimitParams::new(0.26)?);
    let start = std::time::Instant::now();
    let ensembles = find_minimal_ensembles(&bx, Tolerance::ANALYTIC)?;
    println!("{} minimal ensembles in {:.1?}", ensembles.len(), start.elapsed());

    for (i, e) in ensembles.iter().enumerate() {
        let members: Vec<String> = e
            .members()
            .iter()
            .map(|m| format!("{:.4} {}", m.weight, m.extreme))
            .collect();
        println!("{:>2}: p_nl={:.4}  {}", i + 1, e.p_nl(), members.join(", "));
    }

    let best = min_pnl_ensemble(&ensembles)?;
    println!("\nEve's choice: {:?}, p_nl = {:.6}", best.sorted_labels(), best.p_nl());
    Ok(())
}
