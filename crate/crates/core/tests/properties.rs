use std::sync::Arc;

use proptest::prelude::*;
use proptest::strategy::Strategy;
use quasilin_core::diag::hoelder_seminorm_seeded;
use quasilin_core::fem::assemble_mass;
use quasilin_core::geomap::map_mesh;
use quasilin_core::sparse::conjugate_gradient;
use quasilin_core::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn square(n: usize) -> Arc<Mesh<f64>> {
    Arc::new(Mesh::unit_square(n).unwrap())
}

fn variant() -> impl Strategy<Value = PLaplaceVariant> {
    prop_oneof![Just(PLaplaceVariant::Additive), Just(PLaplaceVariant::Quadratic)]
}

fn mode() -> impl Strategy<Value = MassMode> {
    prop_oneof![Just(MassMode::Lumped), Just(MassMode::Consistent)]
}

fn nodal(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

// 5x5 square has 36 vertices
const N5: usize = 36;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discrete_operator_is_monotone(
        p in prop::sample::select(vec![1.5, 2.0, 3.0, 4.0]),
        v in variant(),
        m in mode(),
        u in nodal(N5),
        w in nodal(N5),
    ) {
        let mesh = square(5);
        let c = make_p_laplace(p, 0.0, v, 1.0, 1.0).unwrap();
        let ru = assemble_residual(&mesh, &c, &u, m).unwrap();
        let rw = assemble_residual(&mesh, &c, &w, m).unwrap();
        let dr: Vec<f64> = ru.iter().zip(&rw).map(|(a, b)| a - b).collect();
        let du: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
        prop_assert!(dot(&dr, &du) >= -1e-10 * (1.0 + dot(&du, &du)));
    }

    #[test]
    fn unforced_operator_is_odd(p in 1.5f64..4.0, m in mode(), u in nodal(N5)) {
        let mesh = square(5);
        let c = make_p_laplace(p, 0.0, PLaplaceVariant::Additive, 1.0, 2.0).unwrap();
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        let a = assemble_residual(&mesh, &c, &u, m).unwrap();
        let b = assemble_residual(&mesh, &c, &neg, m).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x + y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn lq_norm_grows_with_q_on_unit_area(u in nodal(N5), q1 in 1.0f64..6.0, dq in 0.0f64..6.0) {
        let f = DiscreteField::new(square(5), u).unwrap();
        let a = lq_norm(&f, q1, Region::Domain).unwrap();
        let b = lq_norm(&f, q1 + dq, Region::Domain).unwrap();
        let inf = lq_norm(&f, f64::INFINITY, Region::Domain).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-9) + 1e-14);
        prop_assert!(b <= inf * (1.0 + 1e-9) + 1e-14);
    }

    #[test]
    fn hoelder_seminorm_is_a_seminorm(u in nodal(N5), c in -3.0f64..3.0, shift in -5.0f64..5.0, alpha in 0.05f64..1.0) {
        let mesh = square(5);
        let f = DiscreteField::new(mesh.clone(), u.clone()).unwrap();
        let base = hoelder_seminorm_seeded(&f, alpha, 10_000, 1).unwrap();
        prop_assert!(base.exhaustive);
        let scaled = f.with_values(u.iter().map(|x| c * x + shift).collect()).unwrap();
        let s = hoelder_seminorm_seeded(&scaled, alpha, 10_000, 1).unwrap();
        prop_assert!((s.seminorm - c.abs() * base.seminorm).abs() <= 1e-10 * (1.0 + base.seminorm));
    }

    #[test]
    fn hoelder_seminorm_grows_with_alpha_on_small_sets(u in nodal(N5), a1 in 0.05f64..1.0, da in 0.0f64..0.5) {
        // on [0, 1/sqrt 2]^2 every distance is below one
        let map = BiLipschitzMap::scale(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let mesh = Arc::new(map_mesh(&Mesh::unit_square(5).unwrap(), &map).unwrap());
        let f = DiscreteField::new(mesh, u).unwrap();
        let a = hoelder_seminorm_seeded(&f, a1, 10_000, 1).unwrap().seminorm;
        let b = hoelder_seminorm_seeded(&f, (a1 + da).min(1.0), 10_000, 1).unwrap().seminorm;
        prop_assert!(a <= b * (1.0 + 1e-12));
    }

    #[test]
    fn moser_ladder_is_geometric(p in 1.01f64..1.99, levels in 1usize..12) {
        let l = moser_ladder(p, 2, levels).unwrap();
        prop_assert_eq!(l.exponents.len(), levels + 1);
        prop_assert_eq!(l.exponents[0], p);
        for w in l.exponents.windows(2) {
            prop_assert!((w[1] / w[0] - 2.0 / (2.0 - p)).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_product_matches_dense(
        entries in prop::collection::vec((0usize..6, 0usize..6, -5.0f64..5.0), 0..40),
        x in prop::collection::vec(-3.0f64..3.0, 6),
    ) {
        let a = SparseMatrix::from_triplets(6, entries).unwrap();
        let dense = a.to_dense();
        let y = a.mul_vec(&x);
        for i in 0..6 {
            prop_assert!((y[i] - dot(&dense[i], &x)).abs() < 1e-12);
        }
        let back = SparseMatrix::from_triplets(6, a.triplets()).unwrap();
        prop_assert_eq!(back.to_dense(), dense);
    }

    #[test]
    fn cg_solves_mass_plus_stiffness(b in nodal(N5), m in mode()) {
        let mesh = square(5);
        let c = make_p_laplace(2.0, 0.0, PLaplaceVariant::Additive, 1.0, 1.0).unwrap();
        let k = assemble_tangent(&mesh, &c, &vec![0.0; N5], m).unwrap();
        let (x, _) = conjugate_gradient(&k, &b, None, 1e-13, 500).unwrap();
        let r = k.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            prop_assert!((ri - bi).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn resolvent_contracts(
        p in prop::sample::select(vec![1.5, 2.0, 3.0]),
        m in mode(),
        f in nodal(N5),
        g in nodal(N5),
        alpha in 0.1f64..3.0,
    ) {
        let mesh = square(5);
        let c = make_p_laplace(p, 0.0, PLaplaceVariant::Additive, 1.0, 1.0).unwrap();
        let a = ResolventProblem::new(mesh.clone(), c.clone(), alpha, f).unwrap().with_mass_mode(m);
        let b = ResolventProblem::new(mesh, c, alpha, g).unwrap().with_mass_mode(m);
        let r = contraction_ratio(&a, &b, NormKind::L2, &SolverOptions::default()).unwrap();
        prop_assert!(r <= 1.0 + 1e-8);
    }
}

#[test]
fn refinement_keeps_area_and_topology() {
    for mesh in [Mesh::<f64>::unit_square(3).unwrap(), Mesh::l_shape(2).unwrap()] {
        let fine = mesh.refine_uniform();
        fine.validate().unwrap();
        assert_eq!(fine.num_triangles(), 4 * mesh.num_triangles());
        assert!((fine.area() - mesh.area()).abs() < 1e-14);
        assert_eq!(fine.euler_characteristic(), 1);
        let total: f64 = assemble_mass(&fine, true).row_sums().iter().sum();
        assert!((total - fine.area()).abs() < 1e-13);
    }
}

#[test]
fn tangent_matches_finite_differences() {
    let mesh = square(4);
    let n = mesh.num_vertices();
    for (p, m) in [(1.5, MassMode::Lumped), (3.0, MassMode::Consistent), (4.0, MassMode::Lumped)] {
        let c = make_p_laplace(p, 0.5, PLaplaceVariant::Quadratic, 1.0, 1.0).unwrap();
        let u: Vec<f64> = (0..n).map(|i| 0.3 + (i as f64 * 0.7).sin()).collect();
        let d: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let eps = 1e-6;
        let up: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
        let um: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - eps * b).collect();
        let rp = assemble_residual(&mesh, &c, &up, m).unwrap();
        let rm = assemble_residual(&mesh, &c, &um, m).unwrap();
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let jd = assemble_tangent(&mesh, &c, &u, m).unwrap().mul_vec(&d);
        let scale = jd.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let err = fd.iter().zip(&jd).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err <= 1e-5 * scale, "p={p}: {err:e} vs {scale:e}");
    }
}
