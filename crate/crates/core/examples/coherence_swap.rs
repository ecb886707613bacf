// Entangling two remote modes from two single-photon pairs with one balanced beamsplitter.
use diqkd::fock::coherence_swap_check;

fn main() {
    for cutoff in [1, 2, 3] {
        match coherence_swap_check(cutoff) {
            Ok(r) => println!(
                "cutoff {cutoff}: success {:.6}, fidelity {:.6}, no click {:.3}, two photons {:.3}",
                r.success_probability, r.fidelity, r.p_no_detection, r.p_two_detected
            ),
            Err(e) => println!("cutoff {cutoff}: {e}"),
        }
    }
}
