//! Order-k hyperbolic coordinates along a Hénon orbit, then a small
//! oracle sweep cross-checking the closed-form SVD.

use hypcoords::cocycle::orbit;
use hypcoords::fixtures::{henon, henon_point};
use hypcoords::frame::frame_of_cocycle;
use hypcoords::oracle::{oracle_sweep, OracleOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let o = orbit(&henon(), henon_point(), 12)?;
    println!(" k   e_x        e_y        ln‖DΦ^k‖   C_k");
    for k in 1..=12 {
        let fr = frame_of_cocycle(&o.cocycle, k)?;
        println!("{k:2}  {:+.6}  {:+.6}  {:9.4}  {:.3e}", fr.e.x, fr.e.y, fr.sigma_max, fr.coecc);
    }

    let rep = oracle_sweep(&OracleOptions { seed: 7, trials: 50, ..Default::default() })?;
    println!("\n{}", rep.label);
    for c in &rep.checks {
        println!("  {:<48} violations {}  min margin {:.2e}", c.name, c.violations(), c.min_margin());
    }
    Ok(())
}
