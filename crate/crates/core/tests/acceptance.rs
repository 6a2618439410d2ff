//! Acceptance suite: one test per headline claim, each printing a pass line.
//!
//! Every tolerance is pinned in the assertion itself; run with
//! `cargo test --test acceptance -- --nocapture` to see the per-criterion
//! report.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use phasebound::bounds::{
    crb_from_qfim, diagnostics, fock_crb, imaging_bound, imaging_bound_mandel,
    ones_structured_inverse, parallel_bound, parallel_bound_mandel, Scheme, SchemeParams,
    SymmetryParamsImaging, SymmetryParamsParallel,
};
use phasebound::families::{
    build_gecs, build_gns, build_noon_pair, build_ucs, closed_form_analytics, crossover_nu,
    match_mean_photon, single_mode_analogue, FamilySpec, Gamma,
};
use phasebound::fock::{
    fock_basis, number_moments, superpose, OccupationVector, SparseState,
};
use phasebound::limits::{DEFAULT_EPSILON, SYMMETRY_TOL};
use phasebound::qfim::{imaging_generators, qfim_covariance, qfim_fd_oracle, Generator, Qfim};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn occ(counts: &[u16]) -> OccupationVector {
    OccupationVector::new(counts).unwrap()
}

/// Random normalised state over the public constructors.
fn random_state(rng: &mut StdRng, modes: usize, cutoff: u16, terms: usize) -> SparseState {
    loop {
        let mut seen: Vec<OccupationVector> = Vec::new();
        let mut pairs: Vec<(Complex64, SparseState)> = Vec::new();
        for _ in 0..terms {
            let counts: Vec<u16> = (0..modes).map(|_| rng.gen_range(0..=cutoff)).collect();
            let o = occ(&counts);
            if seen.contains(&o) {
                continue;
            }
            seen.push(o);
            let coeff = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            pairs.push((coeff, fock_basis(&o, cutoff).unwrap()));
        }
        let refs: Vec<(Complex64, &SparseState)> = pairs.iter().map(|(cf, s)| (*cf, s)).collect();
        if let Ok((state, _)) = superpose(&refs) {
            return state;
        }
    }
}

fn max_abs_diff(a: &Qfim, b: &Qfim) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            worst = worst.max((a.entry(i, j) - b.entry(i, j)).abs());
        }
    }
    worst
}

#[test]
fn criterion_01_gns_bound_exact_and_oracle() {
    for d in [1usize, 2, 4, 9] {
        for n in [1u16, 2] {
            let (state, analytics) = build_gns(d, Gamma::Auto, n).unwrap();
            let s = 1.0 + (d as f64).sqrt();
            let expected = s * s / (4.0 * (n as f64) * (n as f64));
            assert_eq!(
                analytics.bound_exact, expected,
                "d={d} N={n}: analytic bound must equal (1+sqrt(d))^2/4N^2 exactly"
            );
            let crb = fock_crb(&state, Scheme::Imaging, d).unwrap();
            for b in &crb.per_phase {
                assert!(
                    (b - expected).abs() < 1e-9,
                    "d={d} N={n}: Fock CRB {b} vs {expected}"
                );
            }
        }
    }
    println!(
        "[PASS] criterion 01: GNS bound (1+sqrt(d))^2/4N^2 exact for d in {{1,2,4,9}}, N in {{1,2}}; Fock-oracle CRB within 1e-9"
    );
}

#[test]
fn criterion_02_hand_fixture_three_routes() {
    let (state, analytics) = build_gns(2, Gamma::Fixed(1.0), 1).unwrap();

    // Measured QFIM equals (4/9) [[2,-1],[-1,2]].
    let qfim = qfim_covariance(&state, &imaging_generators(2)).unwrap();
    let expected = [
        [8.0 / 9.0, -4.0 / 9.0],
        [-4.0 / 9.0, 8.0 / 9.0],
    ];
    for (i, row) in expected.iter().enumerate() {
        for (j, want) in row.iter().enumerate() {
            assert!(
                (qfim.entry(i, j) - want).abs() < 1e-12,
                "QFIM entry ({i},{j}): {} vs {want}",
                qfim.entry(i, j)
            );
        }
    }

    // Route 1: numeric inversion of the covariance QFIM.
    let route_inversion = crb_from_qfim(&qfim, 1).unwrap();
    // Route 2: closed form from measured symmetry parameters.
    let (params, _) = diagnostics(&state, Scheme::Imaging, 2, SYMMETRY_TOL).unwrap();
    let SchemeParams::Imaging(p) = params else {
        panic!("imaging diagnostics expected")
    };
    let route_closed = imaging_bound(&p).unwrap();
    // Route 3: the family formula.
    let route_family = analytics.bound_exact;

    for b in &route_inversion {
        assert!((b - 1.5).abs() < 1e-12, "inversion route: {b}");
    }
    assert!((route_closed - 1.5).abs() < 1e-12, "closed form: {route_closed}");
    assert!((route_family - 1.5).abs() < 1e-12, "family formula: {route_family}");
    assert!((route_inversion[0] - route_closed).abs() < 1e-12);
    assert!((route_closed - route_family).abs() < 1e-12);
    println!(
        "[PASS] criterion 02: shared-photon fixture gives QFIM (4/9)[[2,-1],[-1,2]] and bound 1.5 through three routes within 1e-12"
    );
}

#[test]
fn criterion_03_parallel_d_independence() {
    // Symmetric probes with and without correlations between the
    // interferometers; the per-phase bound from the full 2d x 2d inversion
    // must match 1/(2(V - C_intra)) and ignore C_inter entirely.
    for d in [1usize, 2, 3] {
        let probes: Vec<SparseState> = vec![
            build_gecs(d, c(1.5), DEFAULT_EPSILON).unwrap().0,
            build_ucs(d, c(0.9), 1.0, DEFAULT_EPSILON).unwrap().0,
        ];
        for state in &probes {
            let qfim = qfim_covariance(state, &phasebound::qfim::parallel_generators(d)).unwrap();
            let full = crb_from_qfim(&qfim, 1).unwrap();
            let (params, _) = diagnostics(state, Scheme::Parallel, d, SYMMETRY_TOL).unwrap();
            let SchemeParams::Parallel(p) = params else {
                panic!("parallel diagnostics expected")
            };
            let closed = parallel_bound(&p).unwrap();
            for b in &full[..d] {
                assert!(
                    (b - closed).abs() < 1e-9,
                    "d={d}: full inversion {b} vs closed {closed}"
                );
            }
        }
    }
    // Closed-form path invariance under artificial C_inter variation.
    let base = SymmetryParamsParallel::new(1.0, -0.4, 0.0, 2).unwrap();
    let reference = parallel_bound(&base).unwrap();
    for k in 0..=20 {
        let c_inter = -1.0 + 0.1 * k as f64;
        for d in [1usize, 2, 3, 7] {
            let p = SymmetryParamsParallel::new(1.0, -0.4, c_inter, d).unwrap();
            let b = parallel_bound(&p).unwrap();
            assert!((b - reference).abs() < 1e-12);
        }
    }
    println!(
        "[PASS] criterion 03: full 2dx2d inversion equals 1/(2(V-C_intra)) within 1e-9 for d in {{1,2,3}}; invariant under C_inter within 1e-12"
    );
}

#[test]
fn criterion_04_crossover_verdict_flips() {
    for d in [1usize, 2, 3] {
        let gecs = FamilySpec::Gecs {
            d,
            alpha: c(4.0),
            epsilon: DEFAULT_EPSILON,
        };
        let gecs_analytics = closed_form_analytics(&gecs).unwrap();
        let target = gecs_analytics.n_total;
        let threshold = crossover_nu(d);
        for (factor, ucs_wins) in [(0.9f64, false), (1.1f64, true)] {
            let nu = threshold * factor.sqrt(); // nu^2 = 2d * factor
            let ucs = FamilySpec::Ucs {
                d,
                alpha: c(4.0),
                nu,
                epsilon: DEFAULT_EPSILON,
            };
            let matched = match_mean_photon(&ucs, target).unwrap();
            let ucs_bound = closed_form_analytics(&matched).unwrap().bound_exact;
            if ucs_wins {
                assert!(
                    ucs_bound < gecs_analytics.bound_exact,
                    "d={d}, nu^2=2d*1.1: expected cat product strictly better"
                );
            } else {
                assert!(
                    ucs_bound > gecs_analytics.bound_exact,
                    "d={d}, nu^2=2d*0.9: expected entangled sum strictly better"
                );
            }
        }
    }
    println!(
        "[PASS] criterion 04: cat-vs-entangled verdict flips between nu^2 = 2d*0.9 and nu^2 = 2d*1.1 at matched mean photon number, d in {{1,2,3}}"
    );
}

#[test]
fn criterion_05_structured_inverse_thousand_cases() {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst_entry = 0.0f64;
    let mut worst_identity = 0.0f64;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=8usize);
        let magnitude = rng.gen_range(0.25..4.0);
        let lambda = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
        let omega = loop {
            let w: f64 = rng.gen_range(-2.0..2.0);
            if (1.0 + w * d as f64).abs() > 0.1 {
                break w;
            }
        };
        let closed = ones_structured_inverse(lambda, omega, d).unwrap();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = lambda * (if i == j { 1.0 } else { 0.0 } + omega);
            }
        }
        let dense = m.clone().try_inverse().expect("dense inversion");
        for i in 0..d {
            for j in 0..d {
                worst_entry = worst_entry.max((closed[(i, j)] - dense[(i, j)]).abs());
            }
        }
        let product = &m * &closed;
        for i in 0..d {
            for j in 0..d {
                let expected = if i == j { 1.0 } else { 0.0 };
                worst_identity = worst_identity.max((product[(i, j)] - expected).abs());
            }
        }
    }
    assert!(worst_entry < 1e-12, "max entrywise error {worst_entry:.3e}");
    assert!(worst_identity < 1e-12, "max |M M^-1 - I| {worst_identity:.3e}");
    println!(
        "[PASS] criterion 05: closed-form ones-structured inverse matches dense inversion over 1000 seeded cases (max entry {worst_entry:.2e}, max identity defect {worst_identity:.2e})"
    );
}

#[test]
fn criterion_06_oracle_equivalence_and_convergence() {
    let mut rng = StdRng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let modes = rng.gen_range(2..=4usize);
        let cutoff = rng.gen_range(2..=6u16);
        let terms = rng.gen_range(3..=24usize);
        let state = random_state(&mut rng, modes, cutoff, terms);
        let mut gens: Vec<Generator> = (0..modes)
            .map(|i| {
                let mut coeffs = vec![0.0; modes];
                coeffs[i] = 1.0;
                Generator::new(coeffs).unwrap()
            })
            .collect();
        let mixed: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
        gens.push(Generator::new(mixed).unwrap());

        let cov = qfim_covariance(&state, &gens).unwrap();
        let fd = qfim_fd_oracle(&state, &gens, 1e-4).unwrap();
        let rel = max_abs_diff(&cov, &fd) / cov.max_abs().max(1.0);
        assert!(rel < 1e-6, "case {case}: relative max error {rel:.3e}");
        worst = worst.max(rel);
    }

    // Second-order convergence: halving the step cuts the discrepancy by
    // about four until rounding takes over.
    let state = random_state(&mut rng, 3, 5, 12);
    let gens: Vec<Generator> = (0..3)
        .map(|i| {
            let mut coeffs = vec![0.0; 3];
            coeffs[i] = 1.0;
            Generator::new(coeffs).unwrap()
        })
        .collect();
    let exact = qfim_covariance(&state, &gens).unwrap();
    let err = |step: f64| {
        let fd = qfim_fd_oracle(&state, &gens, step).unwrap();
        max_abs_diff(&exact, &fd)
    };
    let (e1, e2, e3) = (err(8e-3), err(4e-3), err(2e-3));
    assert!(
        (e1 / e2 - 4.0).abs() < 0.6 && (e2 / e3 - 4.0).abs() < 0.6,
        "step-halving ratios {:.3}, {:.3} not second order",
        e1 / e2,
        e2 / e3
    );
    println!(
        "[PASS] criterion 06: finite-difference oracle matches covariance QFIM within 1e-6 over 100 seeded states (worst {worst:.2e}); step-halving ratios {:.2} and {:.2}",
        e1 / e2,
        e2 / e3
    );
}

#[test]
fn criterion_07_analogue_preserves_mean_and_mandel_q() {
    let q_of = |s: &SparseState, mode: usize| {
        let m = number_moments(s, mode, mode).unwrap();
        (m.cov - m.mean_i, m.mean_i)
    };

    // Exact finite support: one shared excitation.
    for (d, n) in [(2usize, 2u16), (3, 1)] {
        let (state, _) = build_gns(d, Gamma::Fixed(1.0), n).unwrap();
        let analogue = single_mode_analogue(&state).unwrap();
        let (num_in, mean_in) = q_of(&state, 0);
        let (num_out, mean_out) = q_of(&analogue, 0);
        assert!((mean_in - mean_out).abs() < 1e-10);
        assert!((num_in / mean_in - num_out / mean_out).abs() < 1e-10);
    }

    // Truncated entangled coherent sum.
    let (state, _) = build_gecs(1, c(2.0), DEFAULT_EPSILON).unwrap();
    let analogue = single_mode_analogue(&state).unwrap();
    let (num_in, mean_in) = q_of(&state, 0);
    let (num_out, mean_out) = q_of(&analogue, 0);
    assert!((mean_in - mean_out).abs() < 1e-8);
    assert!((num_in / mean_in - num_out / mean_out).abs() < 1e-8);
    println!(
        "[PASS] criterion 07: single-mode analogue preserves mean and Mandel Q within 1e-10 (exact support) and 1e-8 (truncated sum)"
    );
}

#[test]
fn criterion_08_parameterisation_identities() {
    let n_grid = [0.3, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let q_grid = [-0.5, 0.0, 1.0, 4.0, 10.0];
    let j_grid = [-0.12, -0.05, 0.0, 0.4, 0.9];
    let d_grid = [1usize, 2, 3, 5, 8];
    let mut points = 0usize;
    for &n_bar in &n_grid {
        for &q in &q_grid {
            for &j in &j_grid {
                for &d in &d_grid {
                    let v = n_bar * (1.0 + q);
                    let par_v =
                        parallel_bound(&SymmetryParamsParallel::new(v, j * v, 0.0, d).unwrap())
                            .unwrap();
                    let par_m = parallel_bound_mandel(n_bar, q, j).unwrap();
                    assert!(
                        (par_v - par_m).abs() < 1e-12,
                        "parallel identity at n={n_bar} q={q} j={j} d={d}: {par_v} vs {par_m}"
                    );
                    let img_v =
                        imaging_bound(&SymmetryParamsImaging::new(v, j * v, d).unwrap()).unwrap();
                    let img_m = imaging_bound_mandel(n_bar, q, j, d).unwrap();
                    assert!(
                        (img_v - img_m).abs() < 1e-12,
                        "imaging identity at n={n_bar} q={q} j={j} d={d}: {img_v} vs {img_m}"
                    );
                    points += 1;
                }
            }
        }
    }
    assert_eq!(points, 1000);

    // f(d, 0) = 1 and the d = 1 reduction hold exactly.
    for &d in &d_grid {
        for &n_bar in &n_grid {
            for &q in &q_grid {
                let b = imaging_bound_mandel(n_bar, q, 0.0, d).unwrap();
                assert_eq!(b, 1.0 / (4.0 * n_bar * (1.0 + q)));
            }
        }
    }
    for &j in &j_grid {
        let b = imaging_bound_mandel(2.0, 0.5, j, 1).unwrap();
        assert_eq!(b, 1.0 / (4.0 * 2.0 * 1.5));
        let v = 2.0 * 1.5;
        let bv = imaging_bound(&SymmetryParamsImaging::new(v, j * v, 1).unwrap()).unwrap();
        assert_eq!(bv, 1.0 / (4.0 * v));
    }
    println!(
        "[PASS] criterion 08: Mandel-form bounds match covariance forms on a 1000-point grid within 1e-12; f(d,0) = 1 and the d = 1 reduction to 1/(4V) are exact"
    );
}

#[test]
fn criterion_09_cat_bound_decreases_in_nu_at_fixed_mean() {
    let d = 1usize;
    let target = 1.0;
    let steps = 64usize;
    let mut last = f64::INFINITY;
    for k in 0..steps {
        let nu = 50.0 * k as f64 / (steps - 1) as f64;
        let spec = FamilySpec::Ucs {
            d,
            alpha: c(1.0),
            nu,
            epsilon: DEFAULT_EPSILON,
        };
        let matched = match_mean_photon(&spec, target).unwrap();
        let bound = closed_form_analytics(&matched).unwrap().bound_exact;
        assert!(
            bound < last,
            "bound not strictly decreasing at nu = {nu}: {bound} vs previous {last}"
        );
        last = bound;
    }
    println!(
        "[PASS] criterion 09: cat-product bound at fixed mean photon number strictly decreases in nu over [0, 50] ({steps} points)"
    );
}

#[test]
fn criterion_10_noon_baseline() {
    for n in [1u16, 2, 3, 4] {
        let (state, analytics) = build_noon_pair(n).unwrap();
        let expected = 1.0 / ((n as f64) * (n as f64));
        assert!(
            (analytics.bound_exact - expected).abs() < 1e-12,
            "N={n}: {} vs {expected}",
            analytics.bound_exact
        );
        let crb = fock_crb(&state, Scheme::Parallel, 1).unwrap();
        assert!((crb.per_phase[0] - expected).abs() < 1e-12);
    }
    println!("[PASS] criterion 10: NOON-pair bound equals 1/N^2 within 1e-12 for N in {{1,2,3,4}}");
}
