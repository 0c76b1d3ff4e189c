use super::*;
use crate::roughpath::{uniform_times, Samples};
use crate::sewing::{rough_integral, SewConfig};
use crate::tensor::{contract_prefix, dot, norm};

fn driver(n: usize, phase: f64, p: f64) -> RoughPath {
    let times = uniform_times(0.0, 1.0, n);
    let s = Samples::from_fn(&times, 2, |t| {
        vec![
            (6.0 * t + phase).sin() + 0.2 * (31.0 * t).cos(),
            (4.0 * t * t - phase).cos() * 0.7 + 0.1 * (23.0 * t).sin(),
        ]
    })
    .unwrap();
    RoughPath::lift(s, p, 3).unwrap()
}

/// `f(x) = sin x1 + x1 x2` with derivatives up to order 1.
fn scalar(x: &RoughPath) -> ControlledPath<'_> {
    ControlledPath::from_function(x, 1, |y: &[f64], j| match j {
        0 => vec![y[0].sin() + y[0] * y[1]],
        _ => vec![y[0].cos() + y[1], y[0]],
    })
}

fn scalar2(x: &RoughPath) -> ControlledPath<'_> {
    ControlledPath::from_function(x, 1, |y: &[f64], j| match j {
        0 => vec![(y[1] * 0.5).exp() - y[0] * y[0]],
        _ => vec![-2.0 * y[0], 0.5 * (y[1] * 0.5).exp()],
    })
}

/// `Σ_j a^{(j)}(first j letters of X^{j+1})` as a vector in `R^d`.
fn one_form_local(a: &[Vec<f64>], x: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (j, aj) in a.iter().enumerate() {
        let v = contract_prefix(&x[j + 1], aj, d);
        for (o, w) in out.iter_mut().zip(v) {
            *o += w;
        }
    }
    out
}

#[test]
fn product_families_agree() {
    let x = driver(40, 0.0, 2.5);
    let y = driver(40, 1.0, 2.5);
    let jp = ProductJoint::new(scalar(&x), scalar2(&y)).unwrap();
    let dv = jp.derivs(7, 19);
    assert_eq!(dv.symmetry_defect(), 0.0);
    let r = Rect::new(3, 29, 5, 33);
    let a = omega_local(&jp, r).unwrap();
    let b = omega_local2(&jp, r).unwrap();
    assert!((a - b).abs() < 1e-13 * a.abs().max(1.0));
    // Ω factors through the one-parameter local approximations
    let la = one_form_local(&scalar(&x).derivatives(3).unwrap(), &x.levels(3, 29, 2).unwrap(), 2);
    let lb = one_form_local(&scalar2(&y).derivatives(5).unwrap(), &y.levels(5, 33, 2).unwrap(), 2);
    assert!((a - dot(&la, &lb)).abs() < 1e-13);
}

#[test]
fn product_remainders_factor() {
    let x = driver(30, 0.3, 2.5);
    let y = driver(30, 0.8, 2.5);
    let (pa, pb) = (scalar(&x), scalar2(&y));
    let jp = ProductJoint::new(scalar(&x), scalar2(&y)).unwrap();
    for j in 0..=1 {
        for k in 0..=1 {
            let r1 = first_remainder1(&jp, j, k, 4, 10, 21).unwrap();
            let want = crate::tensor::kron(&pb.remainder(k, 10, 21).unwrap(), &pa.derivative(j, 4).unwrap());
            assert!(norm(&crate::tensor::sub(&r1, &want)) < 1e-13);
            let r2 = first_remainder2(&jp, k, j, 10, 4, 21).unwrap();
            let want = crate::tensor::kron(&pa.remainder(j, 4, 21).unwrap(), &pb.derivative(k, 10).unwrap());
            assert!(norm(&crate::tensor::sub(&r2, &want)) < 1e-13);
            let rect = Rect::new(2, 17, 6, 25);
            let rr = second_remainder1(&jp, j, k, rect).unwrap();
            let want = crate::tensor::kron(&pb.remainder(k, 6, 25).unwrap(), &pa.remainder(j, 2, 17).unwrap());
            assert!(norm(&crate::tensor::sub(&rr, &want)) < 1e-13);
            let rr2 = second_remainder2(&jp, k, j, rect).unwrap();
            let back = crate::tensor::transpose(&rr2, 2usize.pow(j as u32), 2usize.pow(k as u32));
            assert!(norm(&crate::tensor::sub(&rr, &back)) < 1e-13);
        }
    }
}

#[test]
fn defect_identities() {
    let x = driver(24, 0.1, 2.2);
    let y = driver(24, 2.0, 2.7);
    let jp = ProductJoint::new(scalar(&x), scalar2(&y)).unwrap();
    for (s, m, t, u, w, v) in [(0, 5, 13, 2, 9, 20), (3, 4, 23, 0, 1, 2), (1, 12, 14, 7, 15, 23)] {
        let g = gamma_defect(&jp, s, m, t, u, v).unwrap();
        assert!(g.residual() < 1e-12, "{g:?}");
        let g2 = gamma2_defect(&jp, u, w, v, s, t).unwrap();
        assert!(g2.residual() < 1e-12, "{g2:?}");
        let th = theta_defect(&jp, (s, m, t), (u, w, v)).unwrap();
        assert!(th.residual() < 1e-12, "{th:?}");
        assert!(th.definition.abs() > 0.0);
    }
}

#[test]
fn remainders_are_controlled() {
    // for fixed (u,v), s ↦ R^{(1;·,k)}_{s;u,v} is X-controlled with remainder 𝐑^{(1;·,k)}
    let x = driver(20, 0.4, 2.5);
    let y = driver(20, 1.3, 2.5);
    let jp = ProductJoint::new(scalar(&x), scalar2(&y)).unwrap();
    let (u, v) = (3, 16);
    for k in 0..=1 {
        let e = 2usize.pow(k as u32);
        let path = ControlledPath::new(&x, e, |s: usize| {
            (0..=1)
                .map(|j| {
                    let r = first_remainder1(&jp, j, k, s, u, v).unwrap();
                    crate::tensor::transpose(&r, e, 2usize.pow(j as u32))
                })
                .collect()
        });
        for j in 0..=1 {
            let want = second_remainder1(&jp, j, k, Rect::new(2, 11, u, v)).unwrap();
            let got = crate::tensor::transpose(&path.remainder(j, 2, 11).unwrap(), 2usize.pow(j as u32), e);
            assert!(norm(&crate::tensor::sub(&got, &want)) < 1e-13);
        }
        if k == 1 {
            let (res, scale) = path.defect_identity_check(1, 8, 17).unwrap();
            assert!(res <= 1e-12 * scale.max(1.0));
        }
    }
}

#[test]
fn constant_joint_telescopes() {
    let x = driver(16, 0.0, 2.5);
    let y = driver(16, 0.5, 2.5);
    let jp = ConstantJoint::new(&x, &y, 1.7).unwrap();
    let g = GridPartition::new(vec![0, 3, 7, 16], vec![0, 5, 6, 16]).unwrap();
    let want = 1.7 * dot(&sub2(x.point(16), x.point(0)), &sub2(y.point(16), y.point(0)));
    assert!((grid_sum(&jp, &g).unwrap() - want).abs() < 1e-13);
    let chk = check_maximal_inequality(&jp, &g, None, VariationMode::Auto).unwrap();
    assert!(chk.lhs < 1e-13);
    assert!(chk.holds());
}

fn sub2(a: &[f64], b: &[f64]) -> Vec<f64> {
    crate::tensor::sub(a, b)
}

#[test]
fn product_joint_integral_is_product_of_integrals() {
    let x = driver(256, 0.2, 2.5);
    let y = driver(256, 0.9, 2.5);
    let jp = ProductJoint::new(scalar(&x), scalar2(&y)).unwrap();
    let rect = Rect::new(0, 256, 0, 256);
    let cfg = JointConfig {
        tol: 1e-9,
        max_rounds: 8,
        accept_exhausted: true,
        ..Default::default()
    };
    let ji = joint_integral(&jp, rect, &cfg).unwrap();
    let sc = SewConfig {
        accept_exhausted: true,
        ..Default::default()
    };
    let pa = scalar(&x);
    let pb = scalar2(&y);
    let ta = ControlledPath::new(&x, 4, |s: usize| {
        pa.derivatives(s)
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(j, a)| one_form_lift(&a, j))
            .collect()
    });
    let tb = ControlledPath::new(&y, 4, |u: usize| {
        pb.derivatives(u)
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(j, a)| one_form_lift(&a, j))
            .collect()
    });
    let ia = rough_integral(&ta, 0, 256, &sc).unwrap().value;
    let ib = rough_integral(&tb, 0, 256, &sc).unwrap().value;
    // the full-grid sums factor exactly, so agreement is to rounding
    assert!(
        (ji.value - dot(&ia, &ib)).abs() < 1e-10 * ji.value.abs().max(1.0),
        "{} vs {}",
        ji.value,
        dot(&ia, &ib)
    );
    let it = iterated_integrals(&jp, rect, &sc).unwrap();
    assert!((it.i12 - ji.value).abs() < 1e-10);
    assert!((it.i21 - ji.value).abs() < 1e-10);
    assert!((ji.value - ji.omega).abs() <= ji.bound.unwrap());
}

/// `a ⊗ id_V`: turns a scalar derivative into one-form derivatives `[x][c][c']`.
fn one_form_lift(a: &[f64], _j: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len() * 4];
    for (x, &v) in a.iter().enumerate() {
        for c in 0..2 {
            out[(x * 2 + c) * 2 + c] = v;
        }
    }
    out
}

#[test]
fn maximal_and_removal_on_small_grid() {
    let x = driver(64, 0.6, 2.5);
    let y = driver(64, 1.9, 2.5);
    let jp = ProductJoint::new(scalar(&x), scalar2(&y)).unwrap();
    let mut g = GridPartition::strided(Rect::new(0, 64, 0, 64), 8).unwrap();
    let chk = check_maximal_inequality(&jp, &g, None, VariationMode::Auto).unwrap();
    assert!(chk.quantities.exact);
    assert!(chk.holds(), "{chk:?}");
    let env = maximal_quantities(&jp, &g, None, VariationMode::Envelope).unwrap();
    for j in 0..=1 {
        for k in 0..=1 {
            assert!(env.mixed1[j][k] >= chk.quantities.mixed1[j][k] * (1.0 - 1e-12));
            assert!(env.mixed2[k][j] >= chk.quantities.mixed2[k][j] * (1.0 - 1e-12));
        }
    }
    // removal changes the grid sum by exactly the reported cost
    while g.axis1.len() > 2 {
        let before = grid_sum(&jp, &g).unwrap();
        let r = remove_point(&jp, &g, 1, None).unwrap();
        let after = grid_sum(&jp, &r.partition).unwrap();
        assert!(((before - after).abs() - r.cost).abs() < 1e-12);
        assert!(r.cost <= r.ceiling);
        g = r.partition;
    }
    assert!(remove_point(&jp, &g, 1, None).is_err());
    let rep = endpoint_reductions(&jp, &GridPartition::strided(Rect::new(0, 64, 0, 64), 8).unwrap(), None).unwrap();
    assert!(rep.holds(), "{rep:?}");
}

#[test]
fn scaled_joint_and_distance() {
    let x = driver(32, 0.6, 2.5);
    let y = driver(32, 1.9, 2.5);
    let g = GridPartition::strided(Rect::new(0, 32, 0, 32), 8).unwrap();
    let a = ProductJoint::new(scalar(&x), scalar2(&y)).unwrap();
    let b = ScaledJoint {
        inner: ProductJoint::new(scalar(&x), scalar2(&y)).unwrap(),
        factor: 1.5,
    };
    let d0 = joint_distance(&a, &a, &g).unwrap();
    assert_eq!(d0, crate::controls::NormValue::Finite(0.0));
    let d1 = joint_distance(&a, &b, &g).unwrap().finite().unwrap();
    let d2 = joint_distance(&b, &a, &g).unwrap().finite().unwrap();
    assert!((d1 - d2).abs() < 1e-12 * d1);
    let rep = stability(&a, &b, &g, &g).unwrap();
    assert!((rep.integral_other - 1.5 * rep.integral).abs() < 1e-12 * rep.integral.abs().max(1.0));
    assert_eq!(rep.driver_distance1, 0.0);
}
