use super::*;
use crate::green::GreenConfig;
use crate::lattice::{check_energy, SupportBox};
use proptest::prelude::{prop_assert, prop_assume, proptest, ProptestConfig};

fn evaluator(e: &Energy) -> Arc<GreenEvaluator> {
    Arc::new(GreenEvaluator::new(*e, 0.0, GreenConfig::default()).unwrap())
}

fn random_real(dim: usize, radius: i64, seed: u64) -> Potential {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Potential::random(&SupportBox::centered(dim, radius), (-1.0, 1.0), false, &mut rng).unwrap()
}

fn solve(v: &Potential, e: f64, omega: &Direction) -> (FreeWaves, ScatteringSolution) {
    let en = check_energy(e, v.dim()).unwrap();
    let free = FreeWaves::resolve(en).unwrap();
    let inc = IncidentWave::along(omega, &free).unwrap();
    let sol = solve_forward(v, &inc, evaluator(&en)).unwrap();
    (free, sol)
}

fn random_points(dim: usize, reach: i64, n: usize, seed: u64) -> Vec<LatticePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let r = if i % 2 == 0 { 2 } else { reach };
            LatticePoint::new((0..dim).map(|_| rng.random_range(-r..=r)).collect())
        })
        .collect()
}

#[test]
fn branch_resolution() {
    let cases = [
        (1, 1.0, Branch::Shifted, -1.0),
        (1, -0.7, Branch::Shifted, -1.0),
        (1, 0.0, Branch::Direct, 1.0),
        (2, 2.5, Branch::Shifted, -1.0),
        (2, -2.5, Branch::Shifted, 1.0),
        (3, 5.0, Branch::Shifted, -1.0),
        (3, -4.5, Branch::Shifted, 1.0),
    ];
    for (d, e, branch, sigma) in cases {
        let free = FreeWaves::resolve(check_energy(e, d).unwrap()).unwrap();
        assert_eq!(free.branch(), branch, "d={d} E={e}");
        assert_eq!(free.orientation(), sigma, "d={d} E={e}");
    }
}

#[test]
fn outgoing_points_solve_free_equation_and_point_outward() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (d, e) in [(1, 1.3), (2, 2.5), (2, -3.1), (3, 5.0)] {
        let free = FreeWaves::resolve(check_energy(e, d).unwrap()).unwrap();
        for _ in 0..20 {
            let w = Direction::random(d, &mut rng);
            let k = free.outgoing_point(&w).unwrap();
            let p = LatticePoint::new((0..d).map(|_| rng.random_range(-40..=40)).collect());
            assert!(free_residual(&k, e, &p) < 1e-12);
            let v: Vec<f64> = k.iter().map(|c| c.sin()).collect();
            assert!(w.dot(&v) > 0.0);
        }
    }
}

#[test]
fn d1_outgoing_point_is_kappa() {
    let free = FreeWaves::resolve(check_energy(1.0, 1).unwrap()).unwrap();
    let k = free.outgoing_point(&Direction::axis(1, 0)).unwrap();
    assert!((k[0] - 2.0 * PI / 3.0).abs() < 1e-15);
    let k = free.outgoing_point(&Direction::axis(1, 0).neg()).unwrap();
    assert!((k[0] + 2.0 * PI / 3.0).abs() < 1e-15);
}

#[test]
fn incident_wave_rejects_non_solutions() {
    let en = check_energy(2.5, 2).unwrap();
    assert!(IncidentWave::new(vec![0.3, 0.4], en).is_err());
    assert!(matches!(
        IncidentWave::new(vec![0.3], en),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn zero_potential_is_free() {
    let (free, sol) = solve(&Potential::zero(2), 2.5, &Direction::polar(0.4));
    for p in random_points(2, 30, 10, 1) {
        assert_eq!(sol.evaluate_psi(&p).unwrap(), sol.incident().value(&p));
        assert_eq!(sol.scattered(&p).unwrap(), Complex64::new(0.0, 0.0));
    }
    let ff = extract_f_reference(&sol, &free, &Direction::polar(1.0), &[10.0, 20.0, 40.0, 80.0]).unwrap();
    assert_eq!(ff.f_plus, Complex64::new(0.0, 0.0));
}

#[test]
fn one_site_closed_form() {
    for (e, g) in [(1.0, 0.7), (-0.4, -1.3), (1.8, 2.0)] {
        let en = check_energy(e, 1).unwrap();
        let v = Potential::new(1, [(LatticePoint::new(vec![0]), Complex64::new(g, 0.0))]).unwrap();
        let (free, sol) = solve(&v, e, &Direction::axis(1, 0));
        let g0 = evaluator(&en).value(&LatticePoint::new(vec![0])).unwrap();
        let want = 1.0 / (1.0 + g * g0);
        let got = sol.psi_on_support()[&LatticePoint::new(vec![0])];
        assert!((got - want).norm() < 1e-14);
        let (s21, t) = transfer_matrix_d1(&v, sol.incident()).unwrap();
        let refl = extract_f_reference(&sol, &free, &Direction::axis(1, 0).neg(), &[1.0]).unwrap();
        let trans = extract_f_reference(&sol, &free, &Direction::axis(1, 0), &[1.0]).unwrap();
        assert!((refl.f_plus - s21).norm() < 1e-12);
        assert!((trans.f_plus + 1.0 - t).norm() < 1e-12);
    }
}

#[test]
fn support_values_are_reproduced() {
    let v = random_real(2, 1, 5);
    let (_, sol) = solve(&v, 2.5, &Direction::polar(0.3));
    for (p, psi) in sol.psi_on_support() {
        assert!((sol.evaluate_psi(&p).unwrap() - psi).norm() < 1e-12);
    }
}

#[test]
fn pde_residuals() {
    for (d, e, radius) in [(1usize, 1.1, 2i64), (2, 2.5, 1), (2, -2.8, 1), (3, 5.0, 1)] {
        let seeds = if d == 3 { 1 } else { 3 };
        for seed in 0..seeds {
            let v = random_real(d, radius, 100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, sol) = solve(&v, e, &Direction::random(d, &mut rng));
            assert!(sol.linear_residual() < 1e-10);
            let n = if d == 3 { 6 } else { 20 };
            for p in random_points(d, 12, n, seed) {
                let r = sol.pde_residual(&p).unwrap();
                assert!(r < 1e-8, "d={d} seed={seed} x={p:?}: {r:e}");
            }
        }
    }
}

#[test]
fn d1_left_of_support_is_exact() {
    for seed in 0..5 {
        let v = random_real(1, 2, seed);
        let e = -1.5 + 0.7 * seed as f64;
        let (_, sol) = solve(&v, e, &Direction::axis(1, 0));
        let (s21, _) = transfer_matrix_d1(&v, sol.incident()).unwrap();
        let k = sol.incident().k()[0];
        for x in [-3i64, -4, -9, -40, -301] {
            let p = LatticePoint::new(vec![x]);
            let want = Complex64::from_polar(1.0, lattice_phase(&[k], &p))
                + s21 * Complex64::from_polar(1.0, -lattice_phase(&[k], &p));
            assert!((sol.evaluate_psi(&p).unwrap() - want).norm() < 1e-11);
        }
    }
}

#[test]
fn transfer_matrix_zero_and_flux() {
    let en = check_energy(0.6, 1).unwrap();
    let free = FreeWaves::resolve(en).unwrap();
    let inc = IncidentWave::along(&Direction::axis(1, 0), &free).unwrap();
    assert_eq!(
        transfer_matrix_d1(&Potential::zero(1), &inc).unwrap(),
        (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    );
    for seed in 0..20 {
        let v = random_real(1, 2, seed);
        let (s21, t) = transfer_matrix_d1(&v, &inc).unwrap();
        assert!((s21.norm_sqr() + t.norm_sqr() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn d1_extraction_matches_transfer_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for seed in 0..50 {
        let v = random_real(1, 2, seed);
        let e = rng.random_range(-1.9..1.9);
        let (free, sol) = solve(&v, e, &Direction::axis(1, 0));
        let (s21, _) = transfer_matrix_d1(&v, sol.incident()).unwrap();
        let f = extract_f_reference(&sol, &free, &Direction::axis(1, 0).neg(), &[1.0]).unwrap();
        assert!((f.f_plus - s21).norm() < 1e-10, "seed {seed}");
    }
}

#[test]
fn d2_decay_and_extraction() {
    let v = random_real(2, 1, 7);
    let (free, sol) = solve(&v, 2.5, &Direction::polar(0.9));
    let w = Direction::polar(2.2);
    let g = |s: f64| {
        let x = int_point(&[s * w.components()[0], s * w.components()[1]]);
        let ph = free.outgoing_phase(&x).unwrap();
        sol.scattered(&x).unwrap() * Complex64::from_polar(x.norm().sqrt(), -ph)
    };
    let ff = extract_f_reference(&sol, &free, &w, &default_s_grid(2)).unwrap();
    assert!(ff.error_estimate < 1e-6, "{ff:?}");
    assert_eq!(ff.order, 3);
    let scaled: Vec<f64> = [40.0, 80.0, 160.0, 320.0, 640.0]
        .iter()
        .map(|&s| s * (g(s) - ff.f_plus).norm())
        .collect();
    let hi = scaled.iter().cloned().fold(0.0, f64::max);
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi < 3.0 * lo, "{scaled:?}");
    let coarse = extract_f_reference(&sol, &free, &w, &[20.0, 40.0, 80.0, 160.0]).unwrap();
    assert!((coarse.f_plus - ff.f_plus).norm() < 1e-5);
    let fine = extract_f_reference_with_order(&sol, &free, &w, &[80.0, 113.0, 160.0, 226.0, 320.0, 452.0], 4).unwrap();
    assert!((fine.f_plus - ff.f_plus).norm() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transfer_matrix_conserves_flux(seed in 0u64..10_000, e in -1.95f64..1.95) {
        let en = check_energy(e, 1).unwrap();
        let free = FreeWaves::resolve(en).unwrap();
        let inc = IncidentWave::along(&Direction::axis(1, 0), &free).unwrap();
        let (s21, t) = transfer_matrix_d1(&random_real(1, 3, seed), &inc).unwrap();
        prop_assert!((s21.norm_sqr() + t.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn outgoing_phase_is_reduced(x in -500i64..500, y in -500i64..500) {
        prop_assume!(x != 0 || y != 0);
        let free = FreeWaves::resolve(check_energy(2.5, 2).unwrap()).unwrap();
        let ph = free.outgoing_phase(&LatticePoint::new(vec![x, y])).unwrap();
        prop_assert!(ph > -PI && ph <= PI);
    }
}
