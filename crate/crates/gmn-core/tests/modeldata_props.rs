use core::f64::consts::PI;

use gmn_core::linalg::{c, max_abs, max_abs_real, CMat};
use gmn_core::modeldata::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

#[test]
fn rejects_invalid_data() {
    let tt = TauTilde::constant(&CMat::from_element(2, 2, c(0.0, 1.0)));
    let dom = Domain { center: vec![c(0.0, 0.0); 2], radii: vec![1.0; 2] };
    let l = |cc: Vec<i64>| LightCharge::new(cc, c(0.0, 0.0), 0.5, 1);
    let e = ModelData::new(2, vec![2, 3], vec![l(vec![2, 3])], tt.clone(), dom.clone());
    assert_eq!(e.unwrap_err(), ModelError::DivisorChain);
    let e = ModelData::new(2, vec![1, 2], vec![l(vec![1, 1])], tt.clone(), dom.clone());
    assert_eq!(e.unwrap_err().assumption(), "A2 (p_i divides c_i)");
    let bad = TauTilde::constant(&CMat::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.1, 0.0), c(0.2, 0.0), c(0.0, 1.0)]));
    let e = ModelData::new(2, vec![1, 1], vec![l(vec![1, 0])], bad, dom.clone());
    assert_eq!(e.unwrap_err(), ModelError::TauNotSymmetric);
    let mut bad_angle = l(vec![1, 0]);
    bad_angle.theta0 = 2.0 * PI;
    let e = ModelData::new(2, vec![1, 1], vec![bad_angle], tt, dom);
    assert_eq!(e.unwrap_err(), ModelError::FlavorAngle { light: 0 });
}

#[test]
fn multi_ov_charges() {
    let md = i2_model();
    let u = [c(0.9, -1.3)];
    assert_eq!(md.central_charge(&Charge::electric(1, 4, 0), &u, None).unwrap(), u[0]);
    let theta0: Vec<f64> = md.lights.iter().map(|l| l.theta0).collect();
    let expect = [0.0, 0.15 * 2.0 * PI, 0.45 * 2.0 * PI, 0.7 * 2.0 * PI];
    for (a, b) in theta0.iter().zip(expect) {
        assert!((a - b).abs() < 1e-14);
    }
    assert!((md.tau_tilde.eval(&u)[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn pair_expansion_matches_both_signs() {
    let md = rank_two_model();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let u: Vec<Complex64> = (0..2).map(|_| c(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7))).collect();
        let tau = md.tau(&u).unwrap();
        let zm = md.z_magnetic(&u, None).unwrap();
        let mut t2 = md.tau_tilde.eval(&u);
        let mut z2 = md.z_tilde_magnetic(&u);
        let pref = c(0.0, -1.0 / (4.0 * PI));
        for (l, light) in md.lights.iter().enumerate() {
            let z = md.z_light(l, &u);
            let arg = md.arg_z(l, &u, None).unwrap();
            for sign in [1.0, -1.0] {
                let zs = sign * z;
                let args = if sign > 0.0 { arg } else { arg - PI };
                let lg = c((zs.norm() / PI).ln(), args);
                let k: Vec<f64> = md.k(l).iter().map(|x| sign * x).collect();
                let om = light.omega as f64;
                for i in 0..2 {
                    for j in 0..2 {
                        t2[(i, j)] += pref * om * k[i] * k[j] * lg;
                    }
                    let ci = sign * light.c[i] as f64;
                    z2[i] += pref * om * ci * zs * (lg - 1.0);
                }
            }
        }
        assert!(max_abs(&(tau.clone() - t2)) < 1e-13);
        for i in 0..2 {
            assert!((zm[i] - z2[i]).norm() < 1e-13);
        }
        // imaginary part via log |Z|
        let mut imt = md.tau_tilde.eval(&u).map(|z| z.im);
        for (l, light) in md.lights.iter().enumerate() {
            let k = md.k(l);
            let lz = (md.z_light(l, &u).norm() / PI).ln();
            for i in 0..2 {
                for j in 0..2 {
                    imt[(i, j)] -= 2.0 * light.omega as f64 * k[i] * k[j] * lz / (4.0 * PI);
                }
            }
        }
        assert!(max_abs_real(&(tau.map(|z| z.im) - imt)) < 1e-13);
        assert!(max_abs(&(tau.clone() - tau.transpose())) < 1e-15);
    }
}

#[test]
fn prepotential_derivatives() {
    let md = rank_two_model();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-4;
    for _ in 0..50 {
        let u: Vec<Complex64> = (0..2).map(|_| c(rng.gen_range(-0.6..0.6), rng.gen_range(0.1..0.6))).collect();
        let zm = md.z_magnetic(&u, None).unwrap();
        let tau = md.tau(&u).unwrap();
        for i in 0..2 {
            let shift = |d: f64| {
                let mut v = u.clone();
                v[i] += d;
                v
            };
            let df = (md.prepotential(&shift(-2.0 * h)).unwrap() - 8.0 * md.prepotential(&shift(-h)).unwrap()
                + 8.0 * md.prepotential(&shift(h)).unwrap()
                - md.prepotential(&shift(2.0 * h)).unwrap())
                / (12.0 * h);
            assert!((df - zm[i] / md.p[i] as f64).norm() < 1e-9, "dF {df} vs {}", zm[i]);
            for j in 0..2 {
                let zp = md.z_magnetic(&shift(h), None).unwrap()[j];
                let zmn = md.z_magnetic(&shift(-h), None).unwrap()[j];
                let d = (zp - zmn) / (2.0 * h) / md.p[j] as f64;
                assert!((d - tau[(i, j)]).norm() < 1e-6);
            }
        }
        // flat Laplacian of the Kahler potential in each a_i plane
        let hk = 1e-3;
        for i in 0..2 {
            let k = |dx: f64, dy: f64| {
                let mut v = u.clone();
                v[i] += c(dx, dy);
                md.kahler_potential(&v).unwrap()
            };
            let lap = (k(hk, 0.0) + k(-hk, 0.0) + k(0.0, hk) + k(0.0, -hk) - 4.0 * k(0.0, 0.0)) / (hk * hk);
            assert!((lap - 16.0 * tau[(i, i)].im).abs() < 1e-4, "lap {lap} vs {}", 16.0 * tau[(i, i)].im);
        }
    }
}

#[test]
fn cut_glue_multi_ov() {
    let md = i2_model();
    let ov = md.multi_ov.clone().unwrap();
    let gm = Charge::magnetic(1, 4, 0);
    for j in 0..4 {
        let winding: Vec<i64> =
            ov.m.iter().map(|mk| if (mk - ov.m[j]).norm() < 1e-12 { -1 } else { 0 }).collect();
        let rho = md.monodromy_map(&winding);
        let img = md.apply(&rho, &gm);
        let reach = PI - ov.m[j].norm() - 0.05;
        for t in 1..=10 {
            let u = [ov.m[j] + c(0.0, -reach * t as f64 / 10.5)];
            assert!(matches!(md.z_magnetic(&u, None), Err(ModelError::OnCut { .. })));
            let minus = md.central_charge(&gm, &u, Some(CutSide::Minus)).unwrap();
            let plus = md.central_charge(&img, &u, Some(CutSide::Plus)).unwrap();
            assert!((minus - plus).norm() < 1e-12, "light {j}: {minus} vs {plus}");
            // limits from either side match the side conventions
            let eps = 1e-9;
            let right = md.z_magnetic(&[u[0] + eps], None).unwrap()[0];
            let left = md.z_magnetic(&[u[0] - eps], None).unwrap()[0];
            let on_plus = md.z_magnetic(&u, Some(CutSide::Plus)).unwrap()[0];
            let on_minus = md.z_magnetic(&u, Some(CutSide::Minus)).unwrap()[0];
            assert!((right - on_plus).norm() < 1e-7);
            assert!((left - on_minus).norm() < 1e-7);
        }
    }
}

#[test]
fn monodromy_examples() {
    let md = i2_model();
    let id = md.monodromy_map(&[0, 0, 0, 0]);
    for (i, row) in id.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            assert_eq!(x, i64::from(i == j));
        }
    }
    let md3 = build_multi_ov(&[c(0.2, 0.0), c(0.2, 0.0), c(-0.4, 0.0)], &[0.2, 0.3, 0.5], 3).unwrap();
    let rho = md3.monodromy_map(&[-1, -1, 0]);
    let img = md3.apply(&rho, &Charge::magnetic(1, 3, 0));
    // gamma_m + p ((gamma_e + f_0) + (gamma_e + f_1))
    assert_eq!(img, Charge { e: vec![6], m: vec![1], f: vec![3, 3, 0] });
}

fn random_charge(rng: &mut ChaCha8Rng, r: usize, n: usize) -> Charge {
    let mut v = || rng.gen_range(-5i64..=5);
    Charge { e: (0..r).map(|_| v()).collect(), m: (0..r).map(|_| v()).collect(), f: (0..n).map(|_| v()).collect() }
}

#[test]
fn monodromy_preserves_pairing() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for md in [i2_model(), rank_two_model()] {
        let n = md.n_lights();
        for _ in 0..100 {
            let w: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
            let rho = md.monodromy_map(&w);
            let g = random_charge(&mut rng, md.r, n);
            let h = random_charge(&mut rng, md.r, n);
            assert_eq!(md.pair(&md.apply(&rho, &g), &md.apply(&rho, &h)), md.pair(&g, &h));
        }
    }
}

#[test]
fn assumptions_i2_pass() {
    let md = i2_model();
    let rep = check_assumptions(&md, &[c(0.3, 0.2)], &AssumptionOptions::default());
    assert!(rep.passed(), "{:?}", rep.first_failure());
    assert_eq!(rep.vanishing, vec![0, 1]);
    assert!(rep.grid_points >= 720);
    assert!(rep.solvable_subsets.iter().all(|s| s.lights.len() == 1));
}

#[test]
fn repeated_partial_sums_fail_a5() {
    let m = [c(-0.4, 0.1), c(0.3, 0.2), c(0.3, 0.2), c(-0.2, -0.5)];
    let md = build_multi_ov(&m, &[0.3, 0.0, 0.4, 0.3], 1).unwrap();
    let rep = check_assumptions(&md, &[c(0.3, 0.2)], &AssumptionOptions::default());
    assert!(!rep.passed());
    let a5 = rep.checks.iter().find(|c| c.name == "A5").unwrap();
    assert!(!a5.passed);
    let sums = rep.checks.iter().find(|c| c.name == "OVsums").unwrap();
    assert!(!sums.passed);
    assert!(rep.solvable_subsets.iter().any(|s| s.lights == vec![1, 2] && !s.primitive));
}

#[test]
fn no_lights_trivially_pass() {
    let tt = TauTilde::constant(&CMat::from_element(1, 1, c(0.0, 1.0)));
    let dom = Domain { center: vec![c(0.0, 0.0)], radii: vec![1.0] };
    let md = ModelData::new(1, vec![1], vec![], tt, dom).unwrap();
    let rep = check_assumptions(&md, &[c(0.0, 0.0)], &AssumptionOptions::default());
    assert!(rep.passed());
    assert!(rep.vanishing.is_empty() && rep.solvable_subsets.is_empty());
}

#[test]
fn a6_default_shell_passes() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in [1usize, 2, 3, 4, 6] {
        for _ in 0..5 {
            let m = if n == 1 { vec![c(0.0, 0.0)] } else { random_masses(&mut rng, n, 1.3) };
            let y = random_y(&mut rng, n);
            let md = build_multi_ov(&m, &y, 1).unwrap();
            let rep = check_assumptions(&md, &[m[0]], &AssumptionOptions::default());
            let a6 = rep.checks.iter().find(|c| c.name == "A6").unwrap();
            assert!(a6.passed, "n={n} m={m:?}: {}", a6.detail);
            assert!(rep.shell.1 <= PI - 0.05);
        }
    }
}

#[test]
fn a6_fails_near_the_domain_edge() {
    // the single-light profile turns negative just inside |u| = pi
    assert!(region_f(PI - 0.001) < 0.0);
    let md = build_multi_ov(&[c(0.0, 0.0)], &[0.0], 1).unwrap();
    let opts = AssumptionOptions { shell: Some((PI - 0.01, PI)), ..Default::default() };
    let rep = check_assumptions(&md, &[c(0.0, 0.0)], &opts);
    assert!(rep.a6_margin < 0.0);
    // masses below pi/2 do not make the annulus (pi - 1, pi) positive
    let m = [c(-0.3935844463716791, -0.5350416041428134), c(0.3935844463716791, 0.5350416041428134)];
    let md = build_multi_ov(&m, &[0.3, 0.7], 1).unwrap();
    let opts = AssumptionOptions { shell: Some((PI - 1.0, PI)), ..Default::default() };
    let rep = check_assumptions(&md, &[m[0]], &opts);
    assert!(rep.a6_margin < 0.0);
}

#[test]
fn f_root_methods_agree() {
    let b = f_root_bisection(1e-13);
    let n = f_root_newton(0.42, 1e-15);
    assert!((b - n).abs() < 1e-10);
    assert!((0.41..=0.43).contains(&n));
    assert!(region_f(n).abs() < 1e-10);
    let h = 1e-6;
    for r in [0.2, 0.42, 1.0, 2.5] {
        let fd = (region_f(r + h) - region_f(r - h)) / (2.0 * h);
        assert!((fd - region_f_prime(r)).abs() < 1e-7);
    }
}

#[test]
fn central_ratio_conditions_never_coincide() {
    // Im(Z'/Z) = 0 and d arg(Z'/Z) = 0 are never simultaneous for
    // independent light charges.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let md = i2_model();
    let r2 = rank_two_model();
    for _ in 0..10_000 {
        let u = [c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))];
        for (a, b) in [(0usize, 2usize), (0, 3), (2, 3), (1, 2)] {
            let (za, zb) = (md.z_light(a, &u), md.z_light(b, &u));
            if za.norm() == 0.0 || zb.norm() == 0.0 {
                continue;
            }
            let ratio = zb / za;
            // d log(Z_b/Z_a) = (k_b/Z_b - k_a/Z_a) du
            let dlog = md.k(b)[0] / zb - md.k(a)[0] / za;
            let darg = dlog.norm();
            assert!(!(ratio.im.abs() < 1e-8 && darg < 1e-8));
        }
        let v = [c(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)), c(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9))];
        for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let (za, zb) = (r2.z_light(a, &v), r2.z_light(b, &v));
            let ratio = zb / za;
            let (ka, kb) = (r2.k(a), r2.k(b));
            let darg: f64 = (0..2).map(|i| (kb[i] / zb - ka[i] / za).norm()).fold(0.0, f64::max);
            assert!(!(ratio.im.abs() < 1e-8 && darg < 1e-8));
        }
    }
}

#[test]
fn on_cut_requires_side() {
    let md = build_multi_ov(&[c(0.0, 0.0)], &[0.0], 1).unwrap();
    let u = [c(0.0, -1.0)];
    assert_eq!(md.arg_z(0, &u, None), Err(ModelError::OnCut { light: 0 }));
    assert_eq!(md.arg_z(0, &u, Some(CutSide::Plus)), Ok(-PI / 2.0));
    assert_eq!(md.arg_z(0, &u, Some(CutSide::Minus)), Ok(1.5 * PI));
    let a = md.arg_z(0, &[c(1e-3, -1.0)], None).unwrap();
    assert!(a > -PI / 2.0 && a < -PI / 2.0 + 0.01);
}

proptest! {
    #[test]
    fn tau_symmetric_and_affine_charges(re in -0.8f64..0.8, im in -0.8f64..0.8, re2 in -0.8f64..0.8, im2 in -0.8f64..0.8) {
        let md = rank_two_model();
        let u = [c(re, im), c(re2, im2)];
        if let Ok(t) = md.tau(&u) {
            prop_assert!(max_abs(&(t.clone() - t.transpose())) < 1e-15);
        }
        for l in 0..md.n_lights() {
            let g = md.light_charge(l);
            let z = md.central_charge(&g, &u, None).unwrap();
            prop_assert!((z - md.z_light(l, &u)).norm() < 1e-15);
            // affine in u
            let u2 = [u[0] * 2.0, u[1] * 2.0];
            let z2 = md.z_light(l, &u2);
            let z0 = md.lights[l].z0;
            prop_assert!((z2 - z0 - 2.0 * (z - z0)).norm() < 1e-14);
        }
    }

    #[test]
    fn multi_ov_theta0_in_range(seed in 0u64..1000, n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_masses(&mut rng, n, PI);
        let y = random_y(&mut rng, n);
        let md = build_multi_ov(&m, &y, 2).unwrap();
        for l in &md.lights {
            prop_assert!(l.theta0 >= 0.0 && l.theta0 < 2.0 * PI);
            prop_assert_eq!(&l.c, &vec![2]);
        }
    }
}
