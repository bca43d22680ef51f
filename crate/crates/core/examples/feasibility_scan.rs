//! Which rate constants admit a type (II) ledger at a fixed upper rate Γ.

use hypcoords::certificate::{feasibility_region_scan, Flavor, ScanGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lin = ScanGrid::linspace;
    let grid = ScanGrid {
        gamma: 2.0,
        ratio: lin(0.1, 0.9, 9),
        c: lin(0.01, 0.5, 6),
        b: vec![0.1],
        gamma_tilde: vec![1.0, 1.5],
        c_tilde: vec![0.8, 1.0],
    };
    let cells = feasibility_region_scan(Flavor::SingularII, &grid)?;
    println!("{} of {} cells feasible", cells.iter().filter(|c| c.feasible).count(), cells.len());
    for &r in &grid.ratio {
        let row: String = cells
            .iter()
            .filter(|c| c.ratio == r && c.gamma_tilde == 1.0 && c.c_tilde == 1.0)
            .map(|c| if c.feasible { '#' } else { '.' })
            .collect();
        println!("λ/Γ = {r:.1}  {row}");
    }
    if let Some(bad) = cells.iter().find(|c| !c.feasible) {
        println!("e.g. λ = {:.2}, c = {:.2} violates {}", bad.lambda, bad.c, bad.violated.join(", "));
    }
    Ok(())
}
