//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines are
//! always printed.

use hypcoords::bounds::norms::{bilinear_column_bounds, matrix_column_bounds, random_unit, Bilinear, DMat, BILINEAR_UPPER};
use hypcoords::bounds::{d2_contraction_identity, verify_apriori_all, verify_explicit_convergence, verify_slow_variation};
use hypcoords::bounds::slow::{DEFAULT_FD_STEP, RICHARDSON};
use hypcoords::certificate::{auxiliary_constants, check_quasi_hyperbolic, fit_constants, ConstantsLedger, Flavor};
use hypcoords::cocycle::orbit;
use hypcoords::fixtures::{self, henon, henon_point};
use hypcoords::foliation::{
    foliation_grid, image_orthogonality_deviation, integrator_order_check, seed_orthogonality, Field, GridOptions,
    Rect, IMAGE_ORTHOGONALITY_TOL_RAD,
};
use hypcoords::frame::coeccentricity_of;
use hypcoords::maps::MapSpec;
use hypcoords::oracle::{self, oracle_matrices, oracle_sweep, OracleOptions};
use hypcoords::report::BoundReport;
use hypcoords::{Mat2, Vec2};
use rand::Rng;
use std::path::Path;
use std::time::{Duration, Instant};

type Outcome = Result<String, Box<dyn std::error::Error>>;

fn failure(rep: &BoundReport) -> String {
    rep.first_failure().unwrap_or_else(|| "no failing row".into())
}

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

/// Frame correctness against the critical-angle formula and the grid oracle.
fn frames() -> Outcome {
    let opts = OracleOptions { seed: 1, trials: 1000, grid_n: 1_000_000, ..Default::default() };
    let rep = oracle_sweep(&opts)?;
    for name in [
        oracle::DIR_SVD_C4,
        oracle::DIR_GRID_F,
        oracle::DIR_GRID_E,
        oracle::NORM_MAX,
        oracle::NORM_MIN,
        oracle::ORTHOGONALITY,
        oracle::DIAGONAL_FORM,
    ] {
        let ch = rep.check(name).ok_or(format!("missing check {name}"))?;
        ensure(ch.verdict && ch.rows.len() == 1000, || failure(&rep))?;
    }
    let worst_dir = rep.check(oracle::DIR_GRID_F).unwrap().rows.iter().map(|r| r.lhs).fold(0.0, f64::max);
    Ok(format!("1000 matrices, N = 10^6, worst grid angle {worst_dir:.2e} rad"))
}

fn nalgebra_coecc(m: &Mat2) -> f64 {
    let [a, b, c, d] = m.entries();
    let s = nalgebra::Matrix2::new(a, b, c, d).singular_values();
    s.min() / s.max()
}

/// Three co-eccentricity expressions, an external SVD, and a
/// non-multiplicative pair.
fn coeccentricity() -> Outcome {
    let mats = oracle_matrices(&OracleOptions { seed: 1, trials: 1000, ..Default::default() });
    let mut worst: f64 = 0.0;
    for m in &mats {
        let c = coeccentricity_of(m, m.det())?;
        let ext = nalgebra_coecc(m);
        let vals = [c.det_over_norm_sq.unwrap(), c.conorm_sq_over_det.unwrap(), c.conorm_over_norm];
        for v in vals {
            worst = worst.max((v - ext).abs() / ext);
        }
        worst = worst.max(c.max_rel_spread());
    }
    ensure(worst <= 1e-10, || format!("relative spread {worst:.2e} > 1e-10"))?;
    let a = Mat2::diag(4.0, 1.0);
    let b = Mat2::diag(1.0, 4.0);
    let ab = a * b;
    let ca = coeccentricity_of(&a, a.det())?.conorm_over_norm;
    let cb = coeccentricity_of(&b, b.det())?.conorm_over_norm;
    let cab = coeccentricity_of(&ab, ab.det())?.conorm_over_norm;
    let gap = (cab - ca * cb).abs();
    ensure(gap > 0.1, || format!("|C_AB − C_A C_B| = {gap}"))?;
    Ok(format!("worst relative spread {worst:.2e}; |C_AB − C_A C_B| = {gap:.4}"))
}

fn apriori() -> Outcome {
    let mut rng = fixtures::rng(3);
    let mut rows = 0;
    for t in 0..1000 {
        let len = rng.gen_range(1..=15);
        let c = fixtures::random_cocycle(&mut rng, len, 0.9);
        let rep = verify_apriori_all(&c, len, &format!("random cocycle {t}"))?;
        ensure(rep.passed(), || format!("cocycle {t}: {}", failure(&rep)))?;
        rows += rep.checks.iter().map(|c| c.rows.len()).sum::<usize>();
    }
    let o = orbit(&henon(), henon_point(), 20)?;
    let rep = verify_apriori_all(&o.cocycle, 20, "henon")?;
    ensure(rep.passed(), || format!("henon: {}", failure(&rep)))?;
    rows += rep.checks.iter().map(|c| c.rows.len()).sum::<usize>();
    Ok(format!("{rows} inequality rows, zero violations"))
}

/// Every row with `rhs − lhs ≥ 0`, not only within tolerance.
fn nonnegative_margins(rep: &BoundReport) -> Result<(), String> {
    for c in &rep.checks {
        if let Some(r) = c.rows.iter().find(|r| !(r.margin >= 0.0)) {
            return Err(format!("{} has margin {:e} at i={:?}, k={:?}", c.name, r.margin, r.i, r.k));
        }
    }
    Ok(())
}

fn certificate_and_explicit() -> Outcome {
    let o = orbit(&henon(), henon_point(), 20)?;
    let l = fit_constants(&o, Flavor::SingularII, 1.05)?;
    let cert = check_quasi_hyperbolic(&o, &l);
    ensure(cert.verdict && cert.records.len() == 20, || format!("henon certificate: {:?}", cert.first_failure()))?;
    let rep = verify_explicit_convergence(&o, &l, &auxiliary_constants(&l)?)?;
    ensure(rep.passed(), || failure(&rep))?;
    nonnegative_margins(&rep)?;
    let diag = orbit(&MapSpec::linear(Mat2::diag(2.0, 0.5)), Vec2::new(0.3, -0.2), 20)?;
    for flavor in [Flavor::SingularI, Flavor::SingularII, Flavor::NonSingular] {
        let l = fit_constants(&diag, flavor, 1.05)?;
        let cert = check_quasi_hyperbolic(&diag, &l);
        ensure(cert.verdict, || format!("diagonal {flavor}: {:?}", cert.first_failure()))?;
        let rep = verify_explicit_convergence(&diag, &l, &auxiliary_constants(&l)?)?;
        ensure(rep.passed(), || format!("diagonal {flavor}: {}", failure(&rep)))?;
        nonnegative_margins(&rep)?;
    }
    Ok(format!("henon II ledger c = {:.4}, c̃ = {:.4}; diagonal under I, II, NS", l.c, l.c_tilde))
}

fn auxiliary() -> Outcome {
    let mut rng = fixtures::rng(5);
    let flavors = [Flavor::NonSingular, Flavor::SingularI, Flavor::SingularII, Flavor::SingularBoth];
    for t in 0..100 {
        let l = fixtures::random_ledger(&mut rng, flavors[t % 4]);
        let halved = ConstantsLedger { c: 0.5 * l.c, ..l };
        halved.validate().map_err(|e| format!("ledger {t} with c/2: {e}"))?;
        let (a, h) = (auxiliary_constants(&l)?, auxiliary_constants(&halved)?);
        for ((name, x), (_, y)) in a.members().into_iter().zip(h.members()) {
            ensure(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite(), || format!("ledger {t}: {name} not positive"))?;
            ensure(y <= x * (1.0 + 1e-14), || format!("ledger {t}: {name} grows from {x} to {y} when c halves"))?;
        }
    }
    let base = fixtures::random_ledger(&mut rng, Flavor::SingularBoth);
    let tiny = ConstantsLedger { c: 1e-6, ..base };
    let a = auxiliary_constants(&tiny)?;
    let r2 = std::f64::consts::SQRT_2;
    ensure((a.q0 - r2).abs() <= 1e-6 && (a.k1 - r2).abs() <= 1e-6, || format!("Q0 = {}, K1 = {}", a.q0, a.k1))?;
    Ok(format!("100 ledgers monotone in c; at c = 1e-6 |Q0 − √2| = {:.1e}, |K1 − √2| = {:.1e}", (a.q0 - r2).abs(), (a.k1 - r2).abs()))
}

fn to_nalgebra(a: &DMat) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(a.rows, a.cols, &a.data)
}

fn norm_lemmas() -> Outcome {
    let mut rng = fixtures::rng(6);
    for t in 0..1000 {
        let n = 2 + t % 3;
        let mut a = DMat::zeros(n, n);
        for x in a.data.iter_mut() {
            *x = rng.gen_range(-1.0..1.0);
        }
        let rep = matrix_column_bounds(&a, &mut rng, 64);
        ensure(rep.passed(), || format!("matrix {t}: {}", failure(&rep)))?;
        // External spectral norm against the same bracket.
        let ext = to_nalgebra(&a).singular_values().max();
        let col = a.max_column_norm();
        ensure(col <= ext * (1.0 + 1e-12) && ext <= (n as f64).sqrt() * col * (1.0 + 1e-12), || {
            format!("matrix {t}: external norm {ext} outside [{col}, √n·{col}]")
        })?;
        ensure((a.norm() - ext).abs() <= 1e-9 * ext, || format!("matrix {t}: power norm {} vs {ext}", a.norm()))?;

        let b = Bilinear::random(&mut rng, n);
        let v = random_unit(&mut rng, n);
        let rep = bilinear_column_bounds(&b, &v, &mut rng, 8);
        ensure(rep.passed(), || format!("bilinear {t}: {}", failure(&rep)))?;
        // Sampled lower bound on ‖B‖ must respect the upper bracket too.
        let sampled = (0..256)
            .map(|_| {
                let (u, w) = (random_unit(&mut rng, n), random_unit(&mut rng, n));
                b.apply(&u, &w).iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max);
        let upper = rep.check(BILINEAR_UPPER).unwrap().rows[0].rhs;
        ensure(sampled <= upper * (1.0 + 1e-12), || format!("bilinear {t}: sampled {sampled} > {upper}"))?;
    }
    let mut worst: f64 = 0.0;
    for t in 0..500 {
        let spec = if t % 2 == 0 {
            MapSpec::cubic(t as u64, 0.5)
        } else {
            MapSpec::henon(rng.gen_range(0.5..1.5), rng.gen_range(0.1..0.5))
        };
        let p = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let v = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let rep = d2_contraction_identity(&spec, p, v, 1e-3, 1e-10)?;
        ensure(rep.passed(), || format!("identity trial {t}: {}", failure(&rep)))?;
        worst = worst.max(rep.checks[0].rows.iter().map(|r| r.lhs).fold(0.0, f64::max));
    }
    Ok(format!("1000 bracket trials in n = 2..4; D²Φ identity worst {worst:.1e} over 500 trials"))
}

fn slow_variation() -> Outcome {
    let mut worst_rich: f64 = 0.0;
    for k in 1..=8 {
        let o = orbit(&henon(), henon_point(), k)?;
        let l = fit_constants(&o, Flavor::SingularII, 1.05)?;
        let rep = verify_slow_variation(&o, &l, &auxiliary_constants(&l)?, DEFAULT_FD_STEP)?;
        ensure(rep.passed(), || format!("k = {k}: {}", failure(&rep)))?;
        let rich = rep.check(RICHARDSON).ok_or("missing Richardson check")?;
        let row = &rich.rows[0];
        worst_rich = worst_rich.max(row.lhs / (row.rhs / 0.05));
    }
    Ok(format!("k = 1..8 pass; worst relative Richardson change {:.1e}", worst_rich))
}

fn foliations() -> Outcome {
    let spec = henon();
    let rect = Rect::new(-1.2, 1.2, -0.35, 0.35)?;
    let opts = GridOptions { spacing: 0.2, half_length: 0.05, step: 1e-3 };
    let k = 4;
    let eg = foliation_grid(&spec, &rect, k, Field::Stable, &opts)?;
    let fg = foliation_grid(&spec, &rect, k, Field::Unstable, &opts)?;
    let rep = seed_orthogonality(&eg, &fg);
    let seeds = rep.checks[0].rows.len();
    ensure(rep.passed() && seeds > 20, || format!("{seeds} seeds: {}", failure(&rep)))?;

    let (mut measured, mut worst) = (0, 0.0_f64);
    for ec in &eg.curves {
        let Some(fc) = fg.curves.iter().find(|c| c.seed() == ec.seed()) else { continue };
        let a = image_orthogonality_deviation(&spec, ec, fc, k)?;
        if a.resolution < IMAGE_ORTHOGONALITY_TOL_RAD {
            measured += 1;
            worst = worst.max(a.deviation);
        }
    }
    ensure(measured * 10 >= seeds * 9, || format!("only {measured} of {seeds} image angles resolvable"))?;
    ensure(worst <= IMAGE_ORTHOGONALITY_TOL_RAD, || format!("image deviation {worst:e} rad at i = k"))?;

    let e2 = foliation_grid(&spec, &rect, 2, Field::Stable, &opts)?;
    let f2 = foliation_grid(&spec, &rect, 2, Field::Unstable, &opts)?;
    let mut witness: f64 = 0.0;
    for ec in &e2.curves {
        if let Some(fc) = f2.curves.iter().find(|c| c.seed() == ec.seed()) {
            witness = witness.max(image_orthogonality_deviation(&spec, ec, fc, 1)?.deviation);
        }
    }
    ensure(witness > 0.1, || format!("no non-orthogonal image at i < k (max {witness})"))?;

    let oc = integrator_order_check(&spec, Vec2::new(0.1, 0.0), 2, Field::Unstable, 0.4, 0.05)?;
    ensure(oc.ratio >= 8.0, || format!("order ratio {}", oc.ratio))?;
    Ok(format!(
        "{seeds} seeds; {measured} image angles at i = k, worst {worst:.1e} rad; witness {witness:.3} rad at i = 1 < k = 2; order ratio {:.1}",
        oc.ratio
    ))
}

fn suite_args(dir: &Path) -> Vec<Vec<String>> {
    let out = dir.display().to_string();
    let cmds: [&[&str]; 9] = [
        &["orbit", "--burn-in", "1000", "--k", "20"],
        &["frames", "--burn-in", "1000", "--k", "20"],
        &["certify", "--map", "henon", "--a", "1.4", "--b", "0.3", "--x0", "0", "--y0", "0", "--k", "20", "--flavor", "II"],
        &["aux-constants", "--burn-in", "1000", "--k", "20"],
        &["verify-convergence", "--burn-in", "1000", "--k", "20"],
        &["verify-variation", "--burn-in", "1000", "--k", "8"],
        &["foliate", "--k", "3", "--spacing", "0.5"],
        &["oracle-check", "--seed", "7", "--trials", "200", "--grid", "100000"],
        &["scan-constants", "--n", "5"],
    ];
    cmds.iter()
        .enumerate()
        .map(|(n, c)| {
            let mut v = vec!["hypcoords".to_string()];
            v.extend(c.iter().map(|s| s.to_string()));
            v.extend(["--out".to_string(), format!("{out}/{n}")]);
            v
        })
        .collect()
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn determinism() -> Outcome {
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &runs {
        for args in suite_args(dir.path()) {
            let code = hypcoords::cli::run(&args);
            ensure(code == 0, || format!("`{}` exited with {code}", args[1..].join(" ")))?;
        }
    }
    let (a, b) = (read_tree(runs[0].path()), read_tree(runs[1].path()));
    ensure(!a.is_empty() && a.len() == b.len(), || format!("{} vs {} files", a.len(), b.len()))?;
    for ((na, da), (nb, db)) in a.iter().zip(&b) {
        ensure(na == nb && da == db, || format!("{na} differs between runs"))?;
    }
    Ok(format!("{} report files byte-identical across two runs", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, u64); 9] = [
        ("frame correctness", frames, 60),
        ("co-eccentricity identities", coeccentricity, 5),
        ("a-priori lemma suite", apriori, 120),
        ("certificate and explicit bounds", certificate_and_explicit, 30),
        ("auxiliary constants", auxiliary, 5),
        ("norm lemmas", norm_lemmas, 60),
        ("slow variation", slow_variation, 120),
        ("foliations", foliations, 60),
        ("determinism", determinism, 120),
    ];
    let mut failed = 0;
    for (n, (name, f, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = f();
        let dt = t.elapsed();
        let res = match res {
            Ok(msg) if dt > Duration::from_secs(*budget) => Err(format!("{msg}; over the {budget} s budget").into()),
            other => other,
        };
        match res {
            Ok(msg) => println!("PASS {}. {name}: {msg} ({:.2} s)", n + 1, dt.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("FAIL {}. {name}: {msg} ({:.2} s)", n + 1, dt.as_secs_f64());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
