//! Reference orbits and seeded random cocycles shared by tests, examples
//! and the command line.

use crate::certificate::{auxiliary_constants, ConstantsLedger, Flavor};
use crate::cocycle::Cocycle;
use crate::linalg::{Mat2, Vec2};
use crate::maps::MapSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HENON_A: f64 = 1.4;
pub const HENON_B: f64 = 0.3;
/// Burn-in iterates from the origin before the attractor point is taken.
pub const HENON_BURN_IN: usize = 1000;

pub fn henon() -> MapSpec {
    MapSpec::henon(HENON_A, HENON_B)
}

/// A point on the Hénon attractor: the origin after `HENON_BURN_IN` iterates.
pub fn henon_point() -> Vec2 {
    let spec = henon();
    let mut p = Vec2::new(0.0, 0.0);
    for _ in 0..HENON_BURN_IN {
        p = spec.eval_map(p).expect("the origin's orbit stays bounded");
    }
    p
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A matrix with entries uniform in `[−r, r]`.
pub fn random_matrix<R: Rng>(rng: &mut R, r: f64) -> Mat2 {
    let mut e = || rng.gen_range(-r..=r);
    Mat2::new(e(), e(), e(), e())
}

/// A cocycle of `len` random steps with entries in `[−2, 2]`, redrawn until
/// every prefix has co-eccentricity below `max_coecc` and every step is
/// invertible.
pub fn random_cocycle<R: Rng>(rng: &mut R, len: usize, max_coecc: f64) -> Cocycle {
    loop {
        let steps: Vec<Mat2> = (0..len).map(|_| random_matrix(rng, 2.0)).collect();
        if steps.iter().any(|s| s.det().abs() < 1e-6) {
            continue;
        }
        let c = Cocycle::from_steps(steps);
        if (1..=len).all(|i| c.log_coecc(i).exp() < max_coecc) {
            return c;
        }
    }
}

/// A ledger of the given flavor that passes validation and has finite
/// auxiliary constants, by rejection sampling.
pub fn random_ledger<R: Rng>(rng: &mut R, flavor: Flavor) -> ConstantsLedger {
    loop {
        let gamma = rng.gen_range(1.05..3.0);
        let lambda = gamma * rng.gen_range(0.5..0.98);
        let gt = if flavor.has_i() { rng.gen_range(1.0..1.1) } else { rng.gen_range(1.0..1.5) };
        let ct = rng.gen_range(0.3..=1.0);
        let b = rng.gen_range(0.01..2.0);
        let c = rng.gen_range(1e-4..0.9);
        let big_b = rng.gen_range(1.0..3.0);
        let big_bt = rng.gen_range(0.05..=1.0);
        let big_c = rng.gen_range(0.05..=1.0);
        let big_d = rng.gen_range(1.0..3.0);
        let Ok(l) = ConstantsLedger::new(flavor, gamma, gt, lambda, b, c, ct, big_b, big_bt, big_c, big_d) else {
            continue;
        };
        if auxiliary_constants(&l).is_ok() {
            return l;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn henon_point_is_on_the_attractor() {
        let p = henon_point();
        assert!(p.x.abs() < 1.5 && p.y.abs() < 0.5, "{p:?}");
        assert_eq!(p, henon_point());
    }

    #[test]
    fn random_cocycles_respect_the_bound() {
        let mut r = rng(3);
        for len in 1..=6 {
            let c = random_cocycle(&mut r, len, 0.9);
            assert_eq!(c.len(), len);
            assert!((1..=len).all(|i| c.log_coecc(i) < 0.9_f64.ln()));
        }
    }

    #[test]
    fn random_ledgers_are_valid() {
        let mut r = rng(5);
        for flavor in [Flavor::NonSingular, Flavor::SingularI, Flavor::SingularII, Flavor::SingularBoth] {
            for _ in 0..20 {
                let l = random_ledger(&mut r, flavor);
                assert!(l.validate().is_ok() && auxiliary_constants(&l).is_ok());
            }
        }
    }
}
