//! Derivative of the frame field along the base point at several orders,
//! checked against the slow-variation chain of a fitted ledger.

use hypcoords::bounds::slow::{frame_derivative_richardson, DEFAULT_FD_STEP};
use hypcoords::bounds::verify_slow_variation;
use hypcoords::certificate::{auxiliary_constants, fit_constants, Flavor};
use hypcoords::cocycle::orbit;
use hypcoords::fixtures::{henon, henon_point};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (spec, p) = (henon(), henon_point());
    let l = fit_constants(&orbit(&spec, p, 20)?, Flavor::SingularII, 1.05)?;
    let aux = auxiliary_constants(&l)?;
    println!("K1 = {:.4}, K2 = {:.4}", aux.k1, aux.k2);
    for k in 1..=6 {
        let o = orbit(&spec, p, k)?;
        let rep = verify_slow_variation(&o, &l, &aux, DEFAULT_FD_STEP)?;
        let rich = frame_derivative_richardson(&spec, p, k, DEFAULT_FD_STEP)?;
        println!(
            "k = {k}: {} checks pass = {}, Richardson relative change {:.1e}",
            rep.checks.len(),
            rep.passed(),
            rich.rel_change()
        );
    }
    Ok(())
}
