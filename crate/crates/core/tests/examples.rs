//! Worked examples for each operation, against hand-derived values.

use nalgebra::{DMatrix, DVector};
use relstab::dynamics::{integrate, step_implicit_midpoint, OrbitSampler};
use relstab::equilibria::{characterize, group_action, isotropy_algebra_of_point, refine_relative_equilibrium, solve_velocity};
use relstab::expr::{self, parse};
use relstab::liealg;
use relstab::linalg::RankPolicy;
use relstab::phasespace::{hamiltonian_vector_field, poisson_bracket, symplectic_matrix, ActionGenerator, Numerics, PhaseSpace};
use relstab::slice::{kernel_dphi, restricted_hessian, stability_verdict, symplectic_slice, tangent_spaces, Definiteness, SliceError, Signature};
use relstab::sysfile::load_system;
use relstab::{builtin, SystemDef, Verdict};

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// EX16 in file order `(q1, q2, th, p1, p2, pth)`.
fn ex16_at(q1: f64, q2: f64, th: f64, p1: f64, p2: f64, pth: f64) -> DVector<f64> {
    v(&[q1, q2, th, p1, p2, pth])
}

const SO3_RE: [f64; 6] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];

fn sorted(mut x: Vec<f64>) -> Vec<f64> {
    x.sort_by(f64::total_cmp);
    x
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
    }
}

#[test]
fn parse_and_evaluate() {
    let n = names(&["q1", "q2", "p1", "p2"]);
    assert_eq!(parse("q1*p2 - q2*p1", &n).unwrap().eval(&[1.0, 2.0, 3.0, 4.0]).unwrap(), -2.0);
    assert_eq!(parse("0", &n).unwrap().eval(&[5.0, 6.0, 7.0, 8.0]).unwrap(), 0.0);
    let d = parse("q1*p2 - q2*p1", &n).unwrap().differentiate(0);
    assert_eq!(d.to_text(&n), "p2");
    assert_eq!(parse("sin(q1)^2", &n).unwrap().differentiate(0).eval(&[0.0; 4]).unwrap(), 0.0);
}

#[test]
fn ex16_hamiltonian_round_trips() {
    let sys = builtin::ex16().system;
    let n = sys.space().names().to_vec();
    let text = "(q1*p2 - q2*p1) + pth*(p1^2 + p2^2 - q1^2 - q2^2)";
    let direct = parse(text, &n).unwrap();
    let back = parse(&direct.to_text(&n), &n).unwrap();
    for z in [[0.3, -0.2, 1.0, 0.7, 0.1, 0.4], [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]] {
        let (a, b, c) = (direct.eval(&z).unwrap(), back.eval(&z).unwrap(), sys.energy(&z).unwrap());
        assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
        let hand = (z[0] * z[4] - z[1] * z[3]) + z[5] * (z[3] * z[3] + z[4] * z[4] - z[0] * z[0] - z[1] * z[1]);
        assert!((a - hand).abs() < 1e-12);
    }
}

#[test]
fn hessian_examples() {
    let n = names(&["q1", "q2", "p1", "p2"]);
    let e = parse("q1*p2 - q2*p1", &n).unwrap();
    let h = DMatrix::from_row_slice(4, 4, &expr::hessian(&e, &[0.3, 0.1, -2.0, 4.0]).unwrap());
    let mut expected = DMatrix::zeros(4, 4);
    expected[(0, 3)] = 1.0;
    expected[(3, 0)] = 1.0;
    expected[(1, 2)] = -1.0;
    expected[(2, 1)] = -1.0;
    assert_eq!(h, expected);
    let ev = sorted(h.symmetric_eigen().eigenvalues.iter().copied().collect());
    assert_close(&ev, &[-1.0, -1.0, 1.0, 1.0], 1e-12);

    assert_eq!(expr::gradient(&parse("q1^2+q2^2", &n).unwrap(), &[0.0; 4]).unwrap(), vec![0.0; 4]);
    let six = names(&["q1", "q2", "q3", "p1", "p2", "p3"]);
    let osc = parse("(p1^2+p2^2+p3^2+q1^2+q2^2+q3^2)/2", &six).unwrap();
    assert_eq!(DMatrix::from_row_slice(6, 6, &expr::hessian(&osc, &[0.5; 6]).unwrap()), DMatrix::identity(6, 6));
}

#[test]
fn ex16_hessian_matches_finite_differences() {
    let sys = builtin::ex16().system;
    let z = [0.3, -0.4, 0.2, 0.5, 0.1, 0.7];
    let h = sys.energy_hessian(&z).unwrap();
    let eps = 1e-4;
    for i in 0..6 {
        for j in 0..6 {
            let f = |di: f64, dj: f64| {
                let mut w = z;
                w[i] += di;
                w[j] += dj;
                sys.energy(&w).unwrap()
            };
            let fd = (f(eps, eps) - f(eps, -eps) - f(-eps, eps) + f(-eps, -eps)) / (4.0 * eps * eps);
            assert!((fd - h[(i, j)]).abs() / h[(i, j)].abs().max(1.0) < 1e-6);
        }
    }
}

#[test]
fn vector_field_examples() {
    let n = names(&["q1", "p1"]);
    let f = parse("p1^2/2", &n).unwrap();
    assert_eq!(hamiltonian_vector_field(&f, &[0.0, 1.0]).unwrap().as_slice(), &[1.0, 0.0]);
    assert_eq!(hamiltonian_vector_field(&parse("3", &n).unwrap(), &[2.0, -1.0]).unwrap().as_slice(), &[0.0, 0.0]);
    let ex16 = builtin::ex16().system;
    for th in [0.0, 1.3, -3.0] {
        assert_eq!(ex16.vector_field(ex16_at(0.0, 0.0, th, 0.0, 0.0, 0.0).as_slice()).unwrap().amax(), 0.0);
    }
}

#[test]
fn moment_components_of_generators() {
    // Simultaneous rotation of the q-plane and the p-plane.
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 1)] = -1.0;
    a[(1, 0)] = 1.0;
    a[(2, 3)] = -1.0;
    a[(3, 2)] = 1.0;
    let rotation = ActionGenerator::new("L", a, DVector::zeros(4), 0.0).moment_component();
    let mut t = DVector::zeros(6);
    t[2] = 1.0;
    let translation = ActionGenerator::new("th", DMatrix::zeros(6, 6), t, 0.25).moment_component();
    let zero = ActionGenerator::new("z", DMatrix::zeros(4, 4), DVector::zeros(4), -1.5).moment_component();
    for z in [[0.3, -1.2, 0.7, 2.0], [1.0, 2.0, 3.0, 4.0]] {
        let l = z[0] * z[3] - z[1] * z[2];
        assert!((rotation.eval(&z).unwrap() - l).abs() < 1e-12);
        assert_eq!(zero.eval(&z).unwrap(), -1.5);
        let w = [z[0], z[1], 9.0, z[2], z[3], z[1]];
        assert!((translation.eval(&w).unwrap() - (w[5] + 0.25)).abs() < 1e-12);
    }
}

#[test]
fn poisson_bracket_examples() {
    let ex16 = builtin::ex16().system;
    let pth = &ex16.moment_components()[0];
    let bracket = poisson_bracket(ex16.hamiltonian(), pth, 3);
    for z in [[0.3, -0.2, 1.0, 0.7, 0.1, 0.4], [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]] {
        assert_eq!(bracket.eval(&z).unwrap(), 0.0);
    }

    let so3 = builtin::so3_oscillator().system;
    let phi = so3.moment_components();
    let b12 = poisson_bracket(&phi[0], &phi[1], 3);
    for z in [[0.3, -0.2, 1.0, 0.7, 0.1, 0.4], [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]] {
        let (x, y) = (b12.eval(&z).unwrap(), phi[2].eval(&z).unwrap());
        assert!((x.abs() - y.abs()).abs() < 1e-12, "{x} vs {y}");
        // q x p by hand.
        let l3 = z[0] * z[4] - z[1] * z[3];
        assert!((y - l3).abs() < 1e-12);
    }
    assert!(so3.equivariance().residual < 1e-10);
    assert_eq!(builtin::ex16().system.equivariance().residual, 0.0);
}

#[test]
fn negated_component_breaks_equivariance() {
    let so3 = builtin::so3_oscillator().system;
    let mut generators = so3.generators().to_vec();
    generators[0].a = -&generators[0].a;
    let result = SystemDef::new(
        "corrupt",
        PhaseSpace::canonical(3),
        so3.algebra().clone(),
        generators,
        so3.hamiltonian().clone(),
        Numerics::default(),
    );
    assert!(result.is_err());
}

#[test]
fn moment_values() {
    let ex16 = builtin::ex16().system;
    assert_eq!(ex16.moment_map(&ex16_at(0.0, 0.0, 2.0, 0.0, 0.0, 0.0)).as_slice(), &[0.0]);
    let so3 = builtin::so3_oscillator().system;
    assert_close(so3.moment_map(&v(&SO3_RE)).as_slice(), &[0.0, 0.0, 1.0], 1e-15);
}

#[test]
fn coadjoint_isotropy_examples() {
    let so3 = liealg::so3(DMatrix::identity(3, 3)).unwrap();
    let h = so3.coadjoint_isotropy(&v(&[0.0, 0.0, 1.0]), RankPolicy::default());
    assert_eq!(h.rank(), 1);
    assert!(h.distance(&v(&[0.0, 0.0, 1.0]), so3.metric()) < 1e-12);
    assert_eq!(so3.coadjoint_isotropy(&v(&[0.0; 3]), RankPolicy::default()).rank(), 3);
    assert_eq!(liealg::abelian(2).coadjoint_isotropy(&v(&[1.0, -2.0]), RankPolicy::default()).rank(), 2);

    let perp = so3.orthogonal_complement(&h, RankPolicy::default());
    assert_eq!(perp.rank(), 2);
    assert!(perp.distance(&v(&[1.0, 0.0, 0.0]), so3.metric()) < 1e-12);
    assert!(perp.distance(&v(&[0.0, 1.0, 0.0]), so3.metric()) < 1e-12);
    let back = so3.orthogonal_complement(&perp, RankPolicy::default());
    assert!((back.projector(so3.metric()) - h.projector(so3.metric())).amax() < 1e-10);
}

#[test]
fn point_isotropy_examples() {
    let ex16 = builtin::ex16().system;
    assert_eq!(isotropy_algebra_of_point(&ex16, &ex16_at(0.0, 0.0, 0.4, 0.0, 0.0, 0.0)).rank(), 0);
    let so3 = builtin::so3_oscillator().system;
    assert_eq!(isotropy_algebra_of_point(&so3, &v(&SO3_RE)).rank(), 0);
    assert_eq!(isotropy_algebra_of_point(&so3, &DVector::zeros(6)).rank(), 3);
}

#[test]
fn velocity_examples() {
    let ex16 = builtin::ex16().system;
    let sol = solve_velocity(&ex16, &ex16_at(0.0, 0.0, 0.9, 0.0, 0.0, 0.0)).unwrap();
    assert_eq!(sol.xi.as_slice(), &[0.0]);
    assert_eq!(sol.residual, 0.0);

    let so3 = builtin::so3_oscillator().system;
    let sol = solve_velocity(&so3, &v(&SO3_RE)).unwrap();
    assert_close(sol.xi.as_slice(), &[0.0, 0.0, 1.0], 1e-12);
    assert!(sol.residual < 1e-12);

    let off = solve_velocity(&so3, &v(&[1.0, 0.0, 0.0, 0.3, 1.0, 0.0])).unwrap();
    assert!(off.residual > 0.1);
}

#[test]
fn refinement_examples() {
    let ex16 = builtin::ex16().system;
    let start = ex16_at(1e-3, -5e-4, 0.2, 7e-4, 2e-4, 0.0);
    let re = refine_relative_equilibrium(&ex16, &start, &v(&[0.0])).unwrap();
    for i in [0, 1, 3, 4, 5] {
        assert!(re.point[i].abs() < 1e-10, "{:?}", re.point.as_slice());
    }
    assert!(re.residual < 1e-12);

    let so3 = builtin::so3_oscillator().system;
    let exact = refine_relative_equilibrium(&so3, &v(&SO3_RE), &v(&[0.0, 0.0, 1.0])).unwrap();
    assert!(exact.iterations <= 1);
    assert_close(exact.point.as_slice(), &SO3_RE, 1e-14);

    let bumped = refine_relative_equilibrium(&so3, &v(&[1.01, 0.0, 0.0, 0.0, 1.0, 0.0]), &v(&[0.0, 0.0, 1.0])).unwrap();
    assert!(bumped.residual < 1e-12);
}

#[test]
fn kernel_and_tangent_examples() {
    let ex16 = builtin::ex16().system;
    let m = ex16_at(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    assert_eq!(kernel_dphi(&ex16, &m).ncols(), 5);
    let (t_g, t_h, _) = tangent_spaces(&ex16, &m, &ex16.moment_map(&m));
    assert_eq!((t_g.ncols(), t_h.ncols()), (1, 1));
    assert!((t_h[(2, 0)].abs() - 1.0).abs() < 1e-14);

    let so3 = builtin::so3_oscillator().system;
    let m = v(&SO3_RE);
    assert_eq!(kernel_dphi(&so3, &m).ncols(), 3);
    let (_, t_h, _) = tangent_spaces(&so3, &m, &so3.moment_map(&m));
    assert_eq!(t_h.ncols(), 1);
    let expected = v(&[0.0, 1.0, 0.0, -1.0, 0.0, 0.0]) / 2f64.sqrt();
    let dot = t_h.column(0).dot(&expected);
    assert!((dot.abs() - 1.0).abs() < 1e-12);
    let (t_g, _, _) = tangent_spaces(&so3, &DVector::zeros(6), &DVector::zeros(3));
    assert_eq!(t_g.ncols(), 0);

    let trivial = builtin::trivial_oscillator().system;
    assert_eq!(kernel_dphi(&trivial, &DVector::zeros(4)).ncols(), 4);
}

#[test]
fn slice_examples() {
    let ex16 = builtin::ex16().system;
    let m = ex16_at(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let s = symplectic_slice(&ex16, &m).unwrap();
    assert_eq!(s.dim(), 4);
    // The slice is the (q, p) block: no th or pth component.
    assert!(s.slice.row(2).amax() < 1e-12 && s.slice.row(5).amax() < 1e-12);

    let so3 = builtin::so3_oscillator().system;
    assert_eq!(symplectic_slice(&so3, &v(&SO3_RE)).unwrap().dim(), 2);

    let trivial = builtin::trivial_oscillator().system;
    let s = symplectic_slice(&trivial, &DVector::zeros(4)).unwrap();
    assert_eq!(s.dim(), 4);
    assert!((&s.omega - s.slice.transpose() * symplectic_matrix(2) * &s.slice).amax() < 1e-15);
    assert!((s.omega_det - 1.0).abs() < 1e-12);
}

#[test]
fn restricted_hessian_examples() {
    let ex16 = builtin::ex16().system;
    let m = ex16_at(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let slice = symplectic_slice(&ex16, &m).unwrap();
    let hess = restricted_hessian(&ex16, &m, &v(&[0.0]), &slice).unwrap();
    let ev = sorted(hess.on_slice.symmetric_eigen().eigenvalues.iter().copied().collect());
    assert_close(&ev, &[-1.0, -1.0, 1.0, 1.0], 1e-12);

    // 1/2 |z|^2 - L3 splits into blocks [[1,-1],[-1,1]] on (q1, p2),
    // [[1,1],[1,1]] on (q2, p1) and the identity on (q3, p3).
    let so3 = builtin::so3_oscillator().system;
    let m = v(&SO3_RE);
    let xi = v(&[0.0, 0.0, 1.0]);
    let slice = symplectic_slice(&so3, &m).unwrap();
    let hess = restricted_hessian(&so3, &m, &xi, &slice).unwrap();
    let blocks = [
        DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        DMatrix::identity(2, 2),
    ];
    let mut oracle: Vec<f64> = blocks.iter().flat_map(|b| b.clone().symmetric_eigen().eigenvalues.iter().copied().collect::<Vec<_>>()).collect();
    oracle = sorted(oracle);
    let ev = sorted(hess.full.symmetric_eigen().eigenvalues.iter().copied().collect());
    assert_close(&ev, &oracle, 1e-12);
    assert_close(&oracle, &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0], 1e-12);
    assert!(hess.on_slice.clone().symmetric_eigen().eigenvalues.min() > 0.5);

    let wrong = restricted_hessian(&so3, &m, &v(&[0.0, 0.0, 3.0]), &slice);
    assert!(matches!(wrong, Err(SliceError::NotCritical { .. })));
}

#[test]
fn verdict_examples() {
    let so3 = builtin::so3_oscillator().system;
    let re = characterize(&so3, &v(&SO3_RE), &v(&[0.0, 0.0, 1.0]), 0).unwrap();
    let r = stability_verdict(&so3, &re).unwrap();
    assert_eq!(r.verdict, Verdict::StableCertified);
    assert_eq!(r.slice.signature, Signature { positive: 2, negative: 0, zero: 0 });
    assert!(r.regular_point);

    let ex16 = builtin::ex16().system;
    let re = characterize(&ex16, &DVector::zeros(6), &v(&[0.0]), 0).unwrap();
    let r = stability_verdict(&ex16, &re).unwrap();
    assert_eq!(r.verdict, Verdict::InconclusiveIndefinite);
    assert_eq!(r.slice.signature, Signature { positive: 2, negative: 2, zero: 0 });

    let trivial = builtin::trivial_oscillator().system;
    let re = characterize(&trivial, &DVector::zeros(4), &DVector::zeros(0), 0).unwrap();
    let r = stability_verdict(&trivial, &re).unwrap();
    assert_eq!(r.verdict, Verdict::StableCertified);
    assert_eq!(r.slice.definiteness, Definiteness::PositiveDefinite);
}

#[test]
fn midpoint_step_is_the_cayley_transform_for_ex16() {
    let ex16 = builtin::ex16().system;
    let (s, dt) = (0.3, 0.05);
    let z = ex16_at(0.4, -0.2, 1.0, 0.1, 0.6, s);
    let next = step_implicit_midpoint(&ex16, &z, dt).unwrap();
    // d/dt (q1, q2, p1, p2) at fixed p_th = s.
    let m = DMatrix::from_row_slice(
        4,
        4,
        &[0.0, -1.0, 2.0 * s, 0.0, 1.0, 0.0, 0.0, 2.0 * s, 2.0 * s, 0.0, 0.0, -1.0, 0.0, 2.0 * s, 1.0, 0.0],
    );
    let id = DMatrix::identity(4, 4);
    let cayley = (&id - &m * (dt / 2.0)).try_inverse().unwrap() * (&id + &m * (dt / 2.0));
    let x = v(&[z[0], z[1], z[3], z[4]]);
    let expected = cayley * x;
    assert_close(&[next[0], next[1], next[3], next[4]], expected.as_slice(), 1e-12);
    assert_eq!(next[5], s);

    assert_eq!(step_implicit_midpoint(&ex16, &z, 0.0).unwrap(), z);
}

#[test]
fn free_flight_is_exact() {
    let text = "name = \"free\"\nhamiltonian = \"p1^2/2\"\n[phase_space]\ndof = 1\ncoordinates = [\"q1\", \"p1\"]\n[algebra]\ndim = 0\nstructure_constants = []\n";
    let sys = load_system(text).unwrap().system;
    let next = step_implicit_midpoint(&sys, &v(&[0.5, -2.0]), 0.125).unwrap();
    assert_eq!(next.as_slice(), &[0.25, -2.0]);
}

#[test]
fn ex16_rotation_preserves_radii() {
    let ex16 = builtin::ex16().system;
    let traj = integrate(&ex16, &ex16_at(1.0, 0.0, 0.0, 0.0, 1.0, 0.0), 100.0, 1e-3, 1000).unwrap();
    for z in &traj.states {
        assert!(((z[0] * z[0] + z[1] * z[1]).sqrt() - 1.0).abs() < 1e-9);
        assert!(((z[3] * z[3] + z[4] * z[4]).sqrt() - 1.0).abs() < 1e-9);
        assert_eq!(z[5], 0.0);
    }
}

#[test]
fn orbit_distance_examples() {
    let ex16 = builtin::ex16().system;
    let m = ex16_at(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let h = ex16.algebra().coadjoint_isotropy(&ex16.moment_map(&m), RankPolicy::default());
    let sampler = OrbitSampler::new(&ex16, &m, h);
    assert_eq!(sampler.distance(&m), 0.0);
    assert!(sampler.distance(&ex16_at(0.0, 0.0, 2.2, 0.0, 0.0, 0.0)) < 1e-3);

    let so3 = builtin::so3_oscillator().system;
    let m = v(&SO3_RE);
    let h = so3.algebra().coadjoint_isotropy(&so3.moment_map(&m), RankPolicy::default());
    let sampler = OrbitSampler::new(&so3, &m, h);
    let rotated = group_action(&so3, &v(&[0.0, 0.0, 0.3]), 1.0, &m);
    assert!((&rotated - &m).norm() > 0.2);
    assert!(sampler.distance(&rotated) < 1e-3);
}
