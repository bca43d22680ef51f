//! Convergence of e^(k) as k grows: a-priori bounds at every pair, the
//! explicit exponential bounds of a fitted certificate, and the measured
//! decay against its envelope.

use hypcoords::bounds::{verify_apriori_all, verify_explicit_convergence};
use hypcoords::certificate::{auxiliary_constants, fit_constants, Flavor};
use hypcoords::cocycle::orbit;
use hypcoords::fixtures::{henon, henon_point};
use hypcoords::foliation::convergence_profile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (spec, p) = (henon(), henon_point());
    let o = orbit(&spec, p, 20)?;
    let mut rep = verify_apriori_all(&o.cocycle, 20, "henon")?;
    let l = fit_constants(&o, Flavor::SingularII, 1.05)?;
    rep.merge(verify_explicit_convergence(&o, &l, &auxiliary_constants(&l)?)?);
    for c in &rep.checks {
        println!("{:<5} rows, {} violations: {}", c.rows.len(), c.violations(), c.name);
    }

    let prof = convergence_profile(&spec, p, 20, Flavor::SingularII, 1.05)?;
    println!("\nmeasured ratio {:.4}, certified envelope c/c̃ = {:.4}", prof.measured_ratio, prof.envelope_ratio);
    for (k, a) in prof.angles.iter().enumerate().take(8) {
        println!("  ∠(e^({}), e^({})) = {a:.3e}", k + 1, k + 2);
    }
    Ok(())
}
