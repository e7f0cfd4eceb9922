use num_complex::Complex64;
use proptest::prelude::*;

use shellnp::geometry::{make_circle, perturb_curve, scaled_curve, Curve, FourierCurve, Parametrization, Shape, ShapeFunction};
use shellnp::potentials::*;

fn samples(c: &Curve, f: impl Fn(f64) -> f64) -> Vec<f64> {
    c.nodes().iter().map(|&t| f(t)).collect()
}

fn radial(c: &Curve, idx: &[usize], factor: f64) -> Vec<[f64; 2]> {
    idx.iter().map(|&j| {
        let p = c.points()[j];
        [factor * p[0], factor * p[1]]
    }).collect()
}

#[test]
fn jump_relations_on_circle() {
    let c = make_circle(2.0, 128).unwrap();
    let phi = samples(&c, |t| (2.0 * t).sin() - 0.7 * (5.0 * t).cos() + 1.0);
    let kphi = assemble_np_self(&c).apply(&phi);
    let dens: Vec<Complex64> = phi.iter().map(|&v| v.into()).collect();
    let layer = [LayerDensity { curve: &c, density: &dens }];
    let idx: Vec<usize> = (0..128).step_by(5).collect();
    let out = eval_single_layer_gradient(&layer, &radial(&c, &idx, 1.0 + 1e-4)).unwrap();
    let inn = eval_single_layer_gradient(&layer, &radial(&c, &idx, 1.0 - 1e-4)).unwrap();
    for (p, &j) in idx.iter().enumerate() {
        let nu = c.normals()[j];
        let e = (out[p][0] * nu[0] + out[p][1] * nu[1]).re;
        let i = (inn[p][0] * nu[0] + inn[p][1] * nu[1]).re;
        assert!((e - 0.5 * phi[j] - kphi[j]).abs() < 1e-3);
        assert!((i + 0.5 * phi[j] - kphi[j]).abs() < 1e-3);
        assert!((e - i - phi[j]).abs() < 1e-3);
    }
}

#[test]
fn single_layer_is_continuous_on_kite() {
    let param = Parametrization { shape: Shape::Fourier(FourierCurve::kite()), scale: 1.0 };
    let c = Curve::new(param, 128).unwrap();
    let phi = samples(&c, |t| t.cos() + 0.2);
    let sphi = assemble_single_layer_self(&c).apply(&phi);
    let dens: Vec<Complex64> = phi.iter().map(|&v| v.into()).collect();
    let layer = [LayerDensity { curve: &c, density: &dens }];
    let idx: Vec<usize> = (0..128).step_by(16).collect();
    let off = |s: f64| -> Vec<[f64; 2]> {
        idx.iter().map(|&j| {
            let (p, nu) = (c.points()[j], c.normals()[j]);
            [p[0] + s * 1e-4 * nu[0], p[1] + s * 1e-4 * nu[1]]
        }).collect()
    };
    let a = eval_potentials_offboundary(&layer, &off(1.0)).unwrap();
    let b = eval_potentials_offboundary(&layer, &off(-1.0)).unwrap();
    for (p, &j) in idx.iter().enumerate() {
        assert!((a[p] - b[p]).norm() < 1e-3);
        assert!((a[p].re - sphi[j]).abs() < 1e-3);
    }
}

#[test]
fn double_layer_jump_on_circle() {
    let c = make_circle(1.0, 128).unwrap();
    let phi = samples(&c, |t| (3.0 * t).cos() + 1.0);
    let kphi = assemble_np_adjoint_self(&c).apply(&phi);
    let dens: Vec<Complex64> = phi.iter().map(|&v| v.into()).collect();
    let layer = [LayerDensity { curve: &c, density: &dens }];
    let idx: Vec<usize> = (0..128).step_by(16).collect();
    let out = eval_double_layer(&layer, &radial(&c, &idx, 1.0 + 1e-4)).unwrap();
    let inn = eval_double_layer(&layer, &radial(&c, &idx, 1.0 - 1e-4)).unwrap();
    for (p, &j) in idx.iter().enumerate() {
        assert!((out[p].re - (-0.5 * phi[j] + kphi[j])).abs() < 1e-3);
        assert!((inn[p].re - (0.5 * phi[j] + kphi[j])).abs() < 1e-3);
    }
}

#[test]
fn operators_are_finite_on_kite() {
    let param = Parametrization { shape: Shape::Fourier(FourierCurve::kite()), scale: 1.0 };
    let c = Curve::new(param, 128).unwrap();
    for op in [
        assemble_single_layer_self(&c),
        assemble_np_self(&c),
        assemble_np_adjoint_self(&c),
        assemble_hypersingular_self(&c),
        assemble_d2s_nn_self(&c, Trace::PrincipalValue),
    ] {
        assert!(op.is_finite());
    }
    let k1 = assemble_np_adjoint_self(&c).apply(&vec![1.0; 128]);
    assert!(k1.iter().all(|v| (v - 0.5).abs() < 1e-8));
    let ks = assemble_np_self(&c).matrix;
    let w = c.weights();
    for j in 0..128 {
        let col: f64 = (0..128).map(|i| w[i] * ks[(i, j)]).sum();
        assert!((col - 0.5 * w[j]).abs() < 1e-8 * w[j]);
    }
}

#[test]
fn spectral_convergence_of_np_eigenvalues() {
    let h = ShapeFunction::new(vec![(3, 0.2)], vec![(2, 0.1)]);
    let eig = |n: usize| {
        let c = perturb_curve(&make_circle(1.0, n).unwrap(), &h, 1.0).unwrap();
        let k = assemble_np_self(&c).matrix;
        let mut v: Vec<f64> = k.eigenvalues().unwrap().iter().map(|z| z.re).collect();
        v.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        v.truncate(8);
        v.sort_by(|a, b| a.total_cmp(b));
        v
    };
    let (a, b) = (eig(128), eig(256));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn double_layer_of_constant_is_one_half(a in -0.2f64..0.2, b in -0.2f64..0.2, k in 2u32..6) {
        let h = ShapeFunction::new(vec![(k, a)], vec![(k + 1, b)]);
        let c = perturb_curve(&make_circle(1.0, 256).unwrap(), &h, 1.0).unwrap();
        let v = assemble_np_adjoint_self(&c).apply(&vec![1.0; 256]);
        prop_assert!(v.iter().all(|x| (x - 0.5).abs() < 1e-8));
    }

    #[test]
    fn np_is_scale_invariant(delta in 0.1f64..20.0, a in -0.2f64..0.2) {
        let h = ShapeFunction::new(vec![(3, a)], vec![]);
        let c = perturb_curve(&make_circle(1.0, 32).unwrap(), &h, 1.0).unwrap();
        let s = scaled_curve(&c, delta).unwrap();
        let (k, ks) = (assemble_np_self(&c).matrix, assemble_np_self(&s).matrix);
        for i in 0..32 {
            for j in 0..32 {
                prop_assert!((k[(i, j)] - ks[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_layer_scaling_on_mean_zero(delta in 0.1f64..20.0, m in 1u32..6) {
        let c = make_circle(1.5, 64).unwrap();
        let s = scaled_curve(&c, delta).unwrap();
        let phi: Vec<f64> = c.nodes().iter().map(|t| (m as f64 * t).cos()).collect();
        let (a, b) = (assemble_single_layer_self(&c).apply(&phi), assemble_single_layer_self(&s).apply(&phi));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((delta * x - y).abs() < 1e-10 * delta.max(1.0));
        }
    }
}
