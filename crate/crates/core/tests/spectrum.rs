use proptest::prelude::*;

use shellnp::geometry::{shape_set, LayeredGeometry, ShapeFunction};
use shellnp::linalg::bilinear;
use shellnp::np_spectrum::*;

fn spectrum_of(g: &LayeredGeometry, n_max: usize) -> (BlockOperator, GramMatrix, Spectrum) {
    let k = assemble_block_operator(g, !g.is_unperturbed()).unwrap();
    let gm = assemble_gram(g, !g.is_unperturbed()).unwrap();
    let sp = spectrum(&k, &gm, n_max).unwrap();
    (k, gm, sp)
}

#[test]
fn disk_eigenvectors_follow_the_oracle_ratio() {
    let g = LayeredGeometry::disks(1.0, 2.0, 1.0, 1.0, 64);
    let (_, _, sp) = spectrum_of(&g, 8);
    let oracle = disk_oracle_eigs(1.0, 2.0, 1.0, 1.0, 2).unwrap();
    for m in &sp.modes {
        let o = oracle.iter().find(|o| o.n == m.harmonic && o.branch == m.branch).unwrap();
        assert!((m.lambda - o.lambda).abs() < 1e-12);
        let a: f64 = m.vector[..64].iter().map(|v| v * v).sum::<f64>().sqrt();
        let b: f64 = m.vector[64..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let sign = m.vector[..64].iter().zip(&m.vector[64..]).map(|(x, y)| x * y).sum::<f64>().signum();
        assert!((sign * b / a - o.ratio).abs() < 1e-10, "{} vs {}", sign * b / a, o.ratio);
    }
}

#[test]
fn modes_are_g_orthonormal_and_ordered() {
    let (h1, h2) = shape_set(2).unwrap();
    let g = LayeredGeometry::disks(1.0, 2.0, 1.0, 1.0, 128).with_shapes(h1, 0.03, h2, 0.03);
    let (k, gm, sp) = spectrum_of(&g, 10);
    for (i, a) in sp.modes.iter().enumerate() {
        for (j, b) in sp.modes.iter().enumerate() {
            let v = bilinear(&a.vector, &gm.matrix, &b.vector);
            assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8, "{i} {j} {v}");
        }
        let kv = shellnp::linalg::matvec(&k.matrix, &a.vector);
        let res: f64 = kv.iter().zip(&a.vector).map(|(x, y)| (x - a.lambda * y).powi(2)).sum::<f64>().sqrt();
        assert!(res < 1e-8);
    }
    for w in sp.modes.windows(2) {
        assert!(w[0].lambda.abs() >= w[1].lambda.abs() - 1e-12);
    }
}

#[test]
fn eigenvalues_depend_only_on_ratio_for_disks() {
    let a = spectrum_of(&LayeredGeometry::disks(1.0, 2.0, 1.0, 1.0, 64), 6).2;
    let b = spectrum_of(&LayeredGeometry::disks(1.0, 1.0, 1.0, 2.0, 64), 6).2;
    let c = spectrum_of(&LayeredGeometry::disks(3.0, 2.0, 1.0, 3.0, 64), 6).2;
    for ((x, y), z) in a.modes.iter().zip(&b.modes).zip(&c.modes) {
        assert!((x.lambda - y.lambda).abs() < 1e-12 && (x.lambda - z.lambda).abs() < 1e-12);
    }
}

#[test]
fn eigenvalues_converge_with_node_count() {
    let (h1, h2) = shape_set(1).unwrap();
    let g = |n| LayeredGeometry::disks(1.0, 2.0, 1.0, 1.0, n).with_shapes(h1.clone(), 0.05, h2.clone(), 0.05);
    let a = spectrum_of(&g(128), 12).2;
    let b = spectrum_of(&g(256), 12).2;
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues).take(12) {
        assert!((x.re - y.re).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gram_is_positive_on_mean_zero(seed in prop::collection::vec(-1.0f64..1.0, 64), k in 1u32..6, a in -0.3f64..0.3) {
        let g = LayeredGeometry::disks(1.0, 2.0, 1.0, 1.0, 32)
            .with_shapes(ShapeFunction::new(vec![(k, a)], vec![]), 0.5, ShapeFunction::zero(), 0.0);
        let k_op = assemble_block_operator(&g, true).unwrap();
        let gm = assemble_gram(&g, true).unwrap();
        let v = project_mean_zero(&k_op, &seed);
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        prop_assume!(norm2 > 1e-6);
        prop_assert!(bilinear(&v, &gm.matrix, &v) > 0.0);
    }

    #[test]
    fn spectrum_is_real_and_bounded(k1 in 1u32..7, k2 in 1u32..7, a in 0.0f64..0.1, b in 0.0f64..0.2, d2 in 1.0f64..3.0) {
        let g = LayeredGeometry::disks(1.0, 2.0, 1.0, d2, 64).with_shapes(
            ShapeFunction::new(vec![(k1, 1.0)], vec![]), a,
            ShapeFunction::new(vec![], vec![(k2, 1.0)]), b,
        );
        let (k, gm, sp) = spectrum_of(&g, 0);
        prop_assert!(sp.max_imag() < 1e-8);
        prop_assert!(sp.eigenvalues.iter().all(|z| z.re.abs() <= 0.5 + 1e-8));
        prop_assert!(calderon_residual(&k, &gm) < 1e-4);
    }
}
