mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relstab::dynamics::{integrate, projected_moment_sq};
use relstab::equilibria::{group_action, isotropy_algebra_of_point, solve_velocity};
use relstab::expr::{parse, Expr};
use relstab::liealg::{self, LieAlgebra, Subspace};
use relstab::linalg::{self, RankPolicy};
use relstab::phasespace::{hamiltonian_vector_field, poisson_bracket, symplectic_matrix, ActionGenerator};
use relstab::slice::{classify, restricted_hessian, symplectic_slice};
use relstab::{analyze, builtin, VelocityChoice};

use common::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `so(3) + R` with a metric that is invariant on the whole algebra.
fn so3_plus_line(scale: f64) -> LieAlgebra {
    let labels = ["L1", "L2", "L3", "c"].iter().map(|s| s.to_string()).collect();
    let triples = [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (0, 2, 1, -1.0)];
    let metric = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, scale]));
    LieAlgebra::new(labels, &triples, metric).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixed_partials_commute(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..5);
        let e = parse(&random_expr_text(&mut r, n, 4), &names(n)).unwrap();
        let (i, j) = (r.random_range(0..n), r.random_range(0..n));
        let ij = e.differentiate(i).differentiate(j);
        let ji = e.differentiate(j).differentiate(i);
        for _ in 0..5 {
            let x = random_point(&mut r, n);
            if let (Ok(a), Ok(b)) = (ij.eval(&x), ji.eval(&x)) {
                prop_assert!(rel_err(a, b) < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..5);
        let names = names(n);
        let e = parse(&random_expr_text(&mut r, n, 5), &names).unwrap();
        let printed = e.to_text(&names);
        let back = parse(&printed, &names).unwrap();
        for _ in 0..100 {
            let x = random_point(&mut r, n);
            if let (Ok(a), Ok(b)) = (e.eval(&x), back.eval(&x)) {
                prop_assert!(rel_err(a, b) < 1e-12, "{printed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn projectors_are_idempotent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.random_range(1..6);
        let k = r.random_range(0..=d);
        let a = random_matrix(&mut r, d, d);
        let metric = &a * a.transpose() + DMatrix::identity(d, d);
        let basis = linalg::orthonormalize(&random_matrix(&mut r, d, k), &metric);
        let s = Subspace::from_orthonormal(basis);
        let p = s.projector(&metric);
        prop_assert!((&p * &p - &p).amax() < 1e-10);
        prop_assert!(linalg::orthonormality_defect(s.basis(), &metric) < 1e-12);
    }

    #[test]
    fn center_lies_in_coadjoint_isotropy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let alg = so3_plus_line(r.random_range(0.5..3.0));
        let mu = DVector::from_vec(random_point(&mut r, 4));
        let h = alg.coadjoint_isotropy(&mu, RankPolicy::default());
        prop_assert!(h.distance(&alg.basis_vector(3), alg.metric()) < 1e-10);
        // Generic mu: isotropy is the line along mu's so(3) part plus the center.
        prop_assert_eq!(h.rank(), 2);
        prop_assert!(alg.check_invariance(&h).passes());
    }

    #[test]
    fn linear_moments_generate_the_action(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..4);
        let a = symplectic_matrix(n) * random_symmetric(&mut r, 2 * n);
        let b = DVector::from_vec(random_point(&mut r, 2 * n));
        let g = ActionGenerator::new("g", a, b, r.random_range(-1.0..1.0));
        prop_assert!(g.sp_residual() < 1e-12);
        let phi = g.moment_component();
        for _ in 0..10 {
            let z = random_point(&mut r, 2 * n);
            let field = hamiltonian_vector_field(&phi, &z).unwrap();
            let expected = g.field(&DVector::from_vec(z));
            prop_assert!((field - expected).amax() < 1e-10);
        }
    }

    #[test]
    fn velocity_is_orthogonal_to_point_isotropy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sys = builtin::so3_oscillator().system;
        // Aligned q and p leave a rotation fixing the point.
        let q = DVector::from_vec(random_point(&mut r, 3));
        let p = &q * r.random_range(-2.0..2.0);
        let m = DVector::from_iterator(6, q.iter().chain(p.iter()).copied());
        let v = solve_velocity(&sys, &m).unwrap();
        let g_m = isotropy_algebra_of_point(&sys, &m);
        prop_assert_eq!(g_m.rank(), 1);
        for b in g_m.vectors() {
            prop_assert!(sys.algebra().inner(&v.xi, &b).abs() < 1e-10);
        }
    }

    #[test]
    fn slice_spectrum_is_basis_independent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let case = family_a(&mut r);
        let a = analyze(&case.system, &case.point, &VelocityChoice::Auto, false).unwrap();
        let re = &a.equilibrium;
        let slice = symplectic_slice(&case.system, &re.point).unwrap();
        let hess = restricted_hessian(&case.system, &re.point, &re.xi, &slice).unwrap();
        let k = slice.dim();
        let rot = random_orthonormal(&mut r, k, k);
        let rotated = rot.transpose() * &hess.on_slice * &rot;
        let relative = case.system.numerics().definiteness;
        let (before, after) = (classify(&hess.on_slice, relative), classify(&rotated, relative));
        prop_assert_eq!(before.definiteness, after.definiteness);
        for (x, y) in before.eigenvalues.iter().zip(&after.eigenvalues) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn moment_norm_bounds_its_projection(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sys = builtin::so3_oscillator().system;
        let mu = sys.moment_map(&DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        let h = sys.algebra().coadjoint_isotropy(&mu, RankPolicy::default());
        let z0 = DVector::from_vec(random_point(&mut r, 6));
        let traj = integrate(&sys, &z0, 1.0, 1e-2, 10).unwrap();
        for z in &traj.states {
            prop_assert!(sys.moment_norm_sq(z) + 1e-14 >= projected_moment_sq(&sys, &h, z));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn conservation_identities_hold(seed in any::<u64>()) {
        let mut r = rng(seed);
        for loaded in [builtin::ex16(), builtin::so3_oscillator(), builtin::trivial_oscillator()] {
            let sys = &loaded.system;
            let n = sys.space().dof();
            for phi in sys.moment_components() {
                let bracket = poisson_bracket(sys.hamiltonian(), phi, n);
                for _ in 0..10 {
                    let z: Vec<f64> = (0..2 * n).map(|_| r.random_range(-2.0..2.0)).collect();
                    prop_assert!(bracket.eval(&z).unwrap().abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn relative_equilibria_move_along_their_orbit(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sys = builtin::so3_oscillator().system;
        let radius = r.random_range(0.3..2.0);
        let m = DVector::from_vec(vec![radius, 0.0, 0.0, 0.0, radius, 0.0]);
        let a = analyze(&sys, &m, &VelocityChoice::Auto, false).unwrap();
        let traj = integrate(&sys, &a.equilibrium.point, 1.0, 1e-3, 100).unwrap();
        for (t, z) in traj.times.iter().zip(&traj.states) {
            let along = group_action(&sys, &a.equilibrium.xi, *t, &a.equilibrium.point);
            prop_assert!((z - along).amax() < 1e-6);
        }
    }
}

#[test]
fn omega_squares_to_minus_identity() {
    for n in 1..6 {
        let omega = symplectic_matrix(n);
        assert_eq!(&omega * &omega, -DMatrix::identity(2 * n, 2 * n));
    }
}

#[test]
fn so3_structure_constants_satisfy_jacobi() {
    let alg = liealg::so3(DMatrix::identity(3, 3)).unwrap();
    assert_eq!(alg.jacobi_residual().0, 0.0);
}

/// Jacobian of the time-1 map of the linear oscillator, by central
/// differences of whole trajectories, preserves the symplectic form.
#[test]
fn flow_map_is_symplectic() {
    let sys = builtin::so3_oscillator().system;
    let z0 = DVector::from_vec(vec![0.2, -0.1, 0.4, 0.3, 0.0, -0.2]);
    let flow = |z: &DVector<f64>| integrate(&sys, z, 1.0, 1e-3, 1000).unwrap().states.last().unwrap().clone();
    let eps = 1e-5;
    let mut m = DMatrix::zeros(6, 6);
    for j in 0..6 {
        let mut plus = z0.clone();
        let mut minus = z0.clone();
        plus[j] += eps;
        minus[j] -= eps;
        m.set_column(j, &((flow(&plus) - flow(&minus)) / (2.0 * eps)));
    }
    let omega = symplectic_matrix(3);
    assert!((m.transpose() * &omega * &m - &omega).amax() < 1e-6);
}

#[test]
fn constant_expressions_have_zero_derivatives() {
    let e = Expr::constant(3.5);
    assert_eq!(e.differentiate(0).eval(&[1.0]).unwrap(), 0.0);
}
