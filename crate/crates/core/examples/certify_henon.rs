//! Fits a constants ledger to a Hénon orbit, checks the certificate index
//! by index and prints the derived constants.

use hypcoords::certificate::{auxiliary_constants, check_quasi_hyperbolic, fit_constants, Flavor};
use hypcoords::cocycle::orbit;
use hypcoords::fixtures::henon;
use hypcoords::maps::MapSpec;
use hypcoords::{Mat2, Vec2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let o = orbit(&henon(), Vec2::new(0.0, 0.0), 20)?;
    let ledger = fit_constants(&o, Flavor::SingularII, 1.05)?;
    print!("{}", ledger.to_kv());
    let rep = check_quasi_hyperbolic(&o, &ledger);
    let worst = rep.records.iter().flat_map(|r| &r.checks).map(|c| c.margin).fold(f64::INFINITY, f64::min);
    println!("verdict {} over {} indices, smallest log margin {worst:.3e}", rep.verdict, rep.records.len());
    for (name, v) in auxiliary_constants(&ledger)?.members() {
        println!("  {name:<4} {v:.6e}");
    }

    // A rotation is never quasi-hyperbolic: its frame is undefined at i = 1.
    let rot = orbit(&MapSpec::linear(Mat2::new(0.0, 1.0, -1.0, 0.0)), Vec2::new(1.0, 0.0), 5)?;
    let rep = check_quasi_hyperbolic(&rot, &ledger);
    println!("rotation: {}", rep.first_failure().unwrap_or_default());
    Ok(())
}
