//! Finite-time stable and unstable curves through a seed lattice of the
//! Hénon map, with the seed orthogonality check and an SVG export.

use hypcoords::fixtures::henon;
use hypcoords::foliation::{curves_to_svg, foliation_grid, seed_orthogonality, Field, GridOptions, Rect};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = henon();
    let rect = Rect::new(-1.2, 1.2, -0.35, 0.35)?;
    let opts = GridOptions { spacing: 0.2, half_length: 0.05, ..Default::default() };
    let stable = foliation_grid(&spec, &rect, 4, Field::Stable, &opts)?;
    let unstable = foliation_grid(&spec, &rect, 4, Field::Unstable, &opts)?;
    let rep = seed_orthogonality(&stable, &unstable);
    println!(
        "{} stable and {} unstable curves, {} seeds without a frame, seed orthogonality passes: {}",
        stable.curves.len(),
        unstable.curves.len(),
        stable.failures.len(),
        rep.passed()
    );

    let mut curves = stable.curves;
    curves.extend(unstable.curves);
    let path = std::env::temp_dir().join("hypcoords-foliation.svg");
    std::fs::write(&path, curves_to_svg(&curves, &rect))?;
    println!("wrote {}", path.display());
    Ok(())
}
