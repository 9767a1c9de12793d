use core::f64::consts::PI;

use gmn_core::linalg::{c, det_real, max_abs, max_abs_real, min_eigenvalue, to_complex, RMat};
use gmn_core::modeldata::*;
use gmn_core::modelgeom::*;
use gmn_core::semiflat::*;
use gmn_core::specfun::xsf_value;
use gmn_core::verify::closedness_residual;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

fn ov_model() -> ModelData {
    build_multi_ov(&[c(0.0, 0.0)], &[0.0], 1).unwrap()
}

fn i2_i1_i1_model() -> ModelData {
    build_multi_ov(&[c(0.2, 0.1), c(0.2, 0.1), c(-0.3, 0.4), c(-0.1, -0.6)], &[0.1, 0.2, 0.3, 0.4], 1).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, md: &ModelData, radius: f64) -> FieldPoint {
    loop {
        let u: Vec<Complex64> =
            (0..md.r).map(|_| c(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius))).collect();
        if (0..md.n_lights()).any(|l| md.z_light(l, &u).norm() < 0.1) || md.tau(&u).is_err() {
            continue;
        }
        let te = (0..md.r).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let tm = (0..md.r).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let zeta = Complex64::from_polar(rng.gen_range(0.3..3.0), rng.gen_range(-PI..PI));
        return FieldPoint::new(u, te, tm, zeta);
    }
}

fn models() -> Vec<(ModelData, f64)> {
    vec![(ov_model(), 2.0), (i2_i1_i1_model(), 1.5), (rank_two_model(), 0.8)]
}

#[test]
fn sector_bookkeeping() {
    let dec = SectorDecomposition::new(6, 0.1).unwrap();
    assert!(SectorDecomposition::new(4, 0.0).is_err());
    for a in 1..=12 {
        let mid = dec.ray_angle(a) - dec.width() / 2.0;
        assert_eq!(dec.sector_of(mid), a);
        assert!((dec.margin(mid) - dec.width() / 2.0).abs() < 1e-14);
    }
    let md = i2_i1_i1_model();
    let u = [c(0.7, -0.3)];
    let good = good_decomposition(&md, &u, 5).unwrap();
    assert!(decomposition_margin(&md, &u, &good) > 1e-3);
    let bad = SectorDecomposition::new(5, bps_ray_angle(&md, 2, 1, &u)).unwrap();
    assert!(matches!(check_good(&md, &u, &bad), Err(GeomError::NotGood { .. })));
    // no lights: phi0 = 0
    let mut dark = ov_model();
    dark.lights[0].omega = 0;
    assert_eq!(good_decomposition(&dark, &u, 7).unwrap().phi0, 0.0);
}

/// Brute-force oracle: dense trapezoid on the ray with the contour pushed
/// far from `zeta`.
fn ray_integral_oracle(z: Complex64, th: f64, zeta: Complex64, phi: f64) -> Complex64 {
    let dir = Complex64::from_polar(1.0, phi);
    let h = 1e-3;
    let mut acc = c(0.0, 0.0);
    let mut s: f64 = -14.0;
    while s < 14.0 {
        let zp = dir * s.exp();
        let x = xsf_value(z, th, zp);
        if x.norm() > 1e-300 {
            acc += (zp + zeta) / (zp - zeta) * (1.0 - x).ln();
        }
        s += h;
    }
    acc * h
}

#[test]
fn ray_integral_matches_dense_quadrature() {
    let md = ov_model();
    let u = [c(0.4, 0.3)];
    let pt = FieldPoint::new(u.to_vec(), vec![0.7], vec![0.0], c(0.0, 0.0));
    let z = md.z_light(0, &u);
    let th = md.theta_light(0, &[0.7]);
    let phi = (-z).arg() + 0.2;
    let mut zetas = vec![Complex64::from_polar(0.8, phi + 1.0), Complex64::from_polar(1.7, phi - 2.5)];
    // near the contour, on both sides of the pole-subtraction threshold
    for rho in [0.3, 1.0, 2.5] {
        for b in [0.05, -0.19, 0.21, 0.5] {
            zetas.push(Complex64::from_polar(rho, phi + b));
        }
    }
    for zeta in zetas {
        let got = ray_integral(&md, 0, 1, &pt.with_zeta(zeta), phi, None).unwrap();
        let want = ray_integral_oracle(z, th, zeta, phi);
        assert!((got - want).norm() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn ray_integral_jump_and_on_ray_convention() {
    let md = ov_model();
    let u = [c(0.4, 0.3)];
    let pt = FieldPoint::new(u.to_vec(), vec![0.7], vec![0.0], c(0.0, 0.0));
    let phi = (-md.z_light(0, &u)).arg() + 0.1;
    let z = md.z_light(0, &u);
    let th = md.theta_light(0, &[0.7]);
    for rho in [0.3, 1.0, 2.5] {
        let on = Complex64::from_polar(rho, phi);
        let ccw = ray_integral(&md, 0, 1, &pt.with_zeta(Complex64::from_polar(rho, phi + 1e-9)), phi, None).unwrap();
        let cw = ray_integral(&md, 0, 1, &pt.with_zeta(Complex64::from_polar(rho, phi - 1e-9)), phi, None).unwrap();
        let psi = (1.0 - xsf_value(z, th, on)).ln();
        assert!((ccw - cw - c(0.0, 4.0 * PI) * psi).norm() < 1e-6);
        assert!(matches!(ray_integral(&md, 0, 1, &pt.with_zeta(on), phi, None), Err(GeomError::OnRay)));
        let r_minus = ray_integral(&md, 0, 1, &pt.with_zeta(on), phi, Some(RaySide::Counterclockwise)).unwrap();
        assert!((r_minus - ccw).norm() < 1e-6);
        // continuity away from the ray across the subtraction threshold
        let a = ray_integral(&md, 0, 1, &pt.with_zeta(Complex64::from_polar(rho, phi + 0.2 - 1e-9)), phi, None).unwrap();
        let b = ray_integral(&md, 0, 1, &pt.with_zeta(Complex64::from_polar(rho, phi + 0.2 + 1e-9)), phi, None).unwrap();
        assert!((a - b).norm() < 1e-8, "{a} {b}");
    }
}

#[test]
fn ray_integral_small_at_large_charge() {
    let md = build_multi_ov(&[c(0.0, 0.0)], &[0.0], 1).unwrap();
    let u = [c(10.0, 0.0)];
    let pt = FieldPoint::new(u.to_vec(), vec![0.3], vec![0.0], c(0.6, 0.4));
    let phi = (-md.z_light(0, &u)).arg();
    assert!(ray_integral(&md, 0, 1, &pt, phi, None).unwrap().norm() < 1e-7);
}

#[test]
fn magnetic_pairing_with_lights() {
    for (md, _) in models() {
        for l in 0..md.n_lights() {
            for i in 0..md.r {
                let g = Charge::magnetic(md.r, md.n_lights(), i);
                assert_eq!(md.pair(&g, &md.light_charge(l)), md.lights[l].c[i]);
            }
        }
    }
}

#[test]
fn mn_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (md, rad) in models() {
        for _ in 0..4 {
            let pt = random_point(&mut rng, &md, rad);
            let dec = good_decomposition(&md, &pt.u, 5).unwrap();
            for rho in [0.3, 1.0, 2.5] {
                let p = pt.with_zeta(Complex64::from_polar(rho, PI / 7.0));
                let res = mn_identity_residual(&md, &p, &dec).unwrap();
                assert!(res < 1e-8, "identity residual {res}");
            }
        }
    }
}

#[test]
fn mn_vanish_without_lights() {
    let mut md = i2_i1_i1_model();
    for l in md.lights.iter_mut() {
        l.omega = 0;
    }
    let pt = FieldPoint::new(vec![c(0.5, 0.2)], vec![0.3], vec![1.0], c(0.7, 0.2));
    let dec = good_decomposition(&md, &pt.u, 5).unwrap();
    let (m, n) = mn_matrices(&md, &pt, &dec).unwrap();
    assert_eq!(max_abs(&m), 0.0);
    assert_eq!(max_abs(&n), 0.0);
    let a = varpi_model(&md, &pt).unwrap().coeffs;
    let b = varpi_sf(&md, &pt).unwrap().coeffs;
    assert!(max_abs(&(a - b)) < 1e-15);
}

#[test]
fn two_routes_to_varpi_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (md, rad) in models() {
        for _ in 0..5 {
            let pt = random_point(&mut rng, &md, rad);
            let dec = good_decomposition(&md, &pt.u, 5).unwrap();
            let a = varpi_model(&md, &pt).unwrap().coeffs;
            for cont in [Continuation::None, Continuation::Plus, Continuation::Minus] {
                let b = varpi_model_from_characters(&md, &pt, &dec, cont).unwrap().coeffs;
                assert!(max_abs(&(&a - b)) < 1e-8, "routes differ by {}", max_abs(&(&a - varpi_model_from_characters(&md, &pt, &dec, cont).unwrap().coeffs)));
            }
        }
    }
}

#[test]
fn character_differential_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (md, rad) in models() {
        let pt = random_point(&mut rng, &md, rad);
        let dec = good_decomposition(&md, &pt.u, 5).unwrap();
        let analytic = dlog_x_magnetic_model(&md, &pt, &dec, Continuation::None).unwrap();
        let x0 = pt.coords();
        let h = 1e-5;
        for i in 0..md.r {
            let g = Charge::magnetic(md.r, md.n_lights(), i);
            for k in 0..4 * md.r {
                let mut xp = x0.clone();
                let mut xm = x0.clone();
                xp[k] += h;
                xm[k] -= h;
                let fp = xmodel(&md, &g, &FieldPoint::from_coords(&xp, pt.zeta, Chart::Unprimed), &dec, Continuation::None).unwrap();
                let fm = xmodel(&md, &g, &FieldPoint::from_coords(&xm, pt.zeta, Chart::Unprimed), &dec, Continuation::None).unwrap();
                let fd = (fp / fm).ln() / (2.0 * h) / md.p[i] as f64;
                assert!((fd - analytic[i][k]).norm() < 1e-6, "{fd} vs {}", analytic[i][k]);
            }
        }
    }
}

#[test]
fn decomposition_independence() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for (md, rad) in models() {
        for _ in 0..4 {
            let pt = random_point(&mut rng, &md, rad);
            let d1 = good_decomposition(&md, &pt.u, 5).unwrap();
            let d2 = good_decomposition(&md, &pt.u, 9).unwrap();
            let a = varpi_model_from_characters(&md, &pt, &d1, Continuation::None).unwrap().coeffs;
            let b = varpi_model_from_characters(&md, &pt, &d2, Continuation::Plus).unwrap().coeffs;
            assert!(max_abs(&(a - b)) < 1e-7);
        }
    }
}

#[test]
fn primed_and_unprimed_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for (md, rad) in models() {
        for _ in 0..5 {
            let pt = random_point(&mut rng, &md, rad);
            let pp = to_primed(&md, &pt, None).unwrap();
            let back = to_unprimed(&md, &pp, None).unwrap();
            assert!(back.theta_m.iter().zip(&pt.theta_m).all(|(a, b)| (a - b).abs() < 1e-13));
            let j = primed_chart_jacobian(&md, &pt, 1e-4).unwrap();
            assert!((det_real(&j) - 1.0).abs() < 1e-9);
            let wu = varpi_model(&md, &pt).unwrap().coeffs;
            let wp = varpi_model(&md, &pp).unwrap().coeffs;
            let jc = to_complex(&j);
            assert!(max_abs(&(jc.transpose() * wp * jc - wu)) < 1e-8);
        }
    }
}

#[test]
fn curvature_matches_connection() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for (md, rad) in models() {
        for _ in 0..3 {
            let pt = random_point(&mut rng, &md, rad);
            let f = curvature_from_potential(&md, &pt, 1e-4).unwrap();
            for (chart, pp) in [(Chart::Unprimed, pt.clone()), (Chart::Primed, to_primed(&md, &pt, None).unwrap())] {
                for i in 0..md.r {
                    let da = exterior_derivative(
                        |x: &[f64]| {
                            let q = FieldPoint::from_coords(x, pt.zeta, chart);
                            Ok(potential_connection(&md, &q, None)?.a[i].clone())
                        },
                        &pp.coords(),
                        1e-4,
                    )
                    .unwrap();
                    let diff = max_abs(&(to_complex(&da) - &f[i]));
                    assert!(diff < 1e-6, "curvature mismatch {diff} in {chart:?}");
                }
            }
        }
    }
}


fn model_laurent(md: &ModelData, pt: &FieldPoint) -> LaurentParts {
    laurent_split(|z| Ok(varpi_model(md, &pt.with_zeta(z))?.coeffs)).unwrap()
}

#[test]
fn model_laurent_structure_and_darboux() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (md, rad) in models() {
        for _ in 0..5 {
            let pt = random_point(&mut rng, &md, rad);
            let parts = model_laurent(&md, &pt);
            let zs: Vec<Complex64> = (0..4).map(|_| Complex64::from_polar(rng.gen_range(0.2..4.0), rng.gen_range(-PI..PI))).collect();
            assert!(laurent_residual(&parts, &zs, |z| Ok(varpi_model(&md, &pt.with_zeta(z))?.coeffs)).unwrap() < 1e-10);
            let wp = parts.omega_plus();
            assert!(max_abs(&(parts.omega_minus() - wp.map(|z| z.conj()))) < 1e-12);
            assert!(parts.omega3().iter().all(|z| z.im.abs() < 1e-14));
            let dm = darboux_model_form(&md, &pt).unwrap();
            assert!(max_abs(&(wp - dm)) < 1e-9, "{}", max_abs(&(parts.omega_plus() - darboux_model_form(&md, &pt).unwrap())));
        }
    }
}

#[test]
fn darboux_differential_and_jacobian() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for (md, rad) in models() {
        for _ in 0..5 {
            let pt = random_point(&mut rng, &md, rad);
            let analytic = darboux_model_differential(&md, &pt).unwrap();
            let x0 = pt.coords();
            let h = 1e-5;
            for k in 0..4 * md.r {
                let mut xp = x0.clone();
                let mut xm = x0.clone();
                xp[k] += h;
                xm[k] -= h;
                let zp = darboux_model(&md, &FieldPoint::from_coords(&xp, pt.zeta, Chart::Unprimed)).unwrap();
                let zm = darboux_model(&md, &FieldPoint::from_coords(&xm, pt.zeta, Chart::Unprimed)).unwrap();
                for i in 0..md.r {
                    let fd = (zp[i] - zm[i]) / (2.0 * h);
                    assert!((fd - analytic[i][k]).norm() < 1e-7, "{fd} vs {}", analytic[i][k]);
                }
            }
            let v = potential_v(&md, &pt.u, &pt.theta_e).unwrap();
            let num = darboux_model_jacobian_numeric(&md, &pt, 1e-3).unwrap();
            let closed = darboux_model_jacobian_closed_form(&v);
            assert!(((num - closed) / closed).abs() < 1e-8, "{num} vs {closed}");
        }
    }
}

#[test]
fn varpi_model_closed() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for (md, rad) in models() {
        for _ in 0..3 {
            let pt = random_point(&mut rng, &md, rad);
            for chart in [Chart::Unprimed, Chart::Primed] {
                let p0 = if chart == Chart::Primed { to_primed(&md, &pt, None).unwrap() } else { pt.clone() };
                let (res, _, _) = closedness_residual(
                    |x: &[f64]| varpi_model(&md, &FieldPoint::from_coords(x, pt.zeta, chart)).map(|s| s.coeffs),
                    &p0.coords(),
                    1e-3,
                )
                .unwrap();
                assert!(res < 1e-8, "closedness {res}");
            }
        }
    }
}

#[test]
fn kahler_compatibility_of_omega3() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for (md, rad) in models() {
        for _ in 0..5 {
            let pt = random_point(&mut rng, &md, rad);
            let pc = potential_connection(&md, &pt, None).unwrap();
            let g = metric_gh(&md, &pc).unwrap();
            let j = complex_structure_j3(&md, &pt).unwrap();
            let w3 = gmn_core::linalg::re(&model_laurent(&md, &pt).omega3());
            assert!(max_abs_real(&(&j * &j + RMat::identity(4 * md.r, 4 * md.r))) < 1e-9);
            assert!(max_abs_real(&(j.transpose() * &g - &w3)) < 1e-9, "{}", max_abs_real(&(j.transpose() * &g - &w3)));
            // J is an isometry
            assert!(max_abs_real(&(j.transpose() * &g * &j - &g)) < 1e-9);
        }
    }
}

#[test]
fn metric_flat_and_positive() {
    let md = ov_model();
    let pc = PotentialConnection { v: RMat::identity(1, 1), a: vec![vec![0.0; 4]] };
    let g = metric_gh(&md, &pc).unwrap();
    let expect = RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![0.25, 0.25, 1.0, 1.0])) / PI;
    assert!(max_abs_real(&(g - expect)) < 1e-16);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let v = rng.gen_range(-2.0..2.0);
        let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let pc = PotentialConnection { v: RMat::from_element(1, 1, v), a: vec![a] };
        let g = metric_gh(&md, &pc).unwrap();
        assert_eq!(min_eigenvalue(&g) > 0.0, v > 0.0);
    }
}

#[test]
fn potential_positive_and_close_to_im_tau() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for md in [ov_model(), i2_i1_i1_model(), i2_model()] {
        let mut n = 0;
        while n < 100 {
            let u = [Complex64::from_polar(rng.gen_range(0.0..1.2), rng.gen_range(-PI..PI))];
            let te = [rng.gen_range(0.0..2.0 * PI)];
            if (0..md.n_lights()).any(|l| md.z_light(l, &u).norm() < 1e-3) || md.tau(&u).is_err() {
                continue;
            }
            n += 1;
            let v = potential_v(&md, &u, &te).unwrap();
            assert!(min_eigenvalue(&v) > 0.0);
            let imt = md.tau(&u).unwrap()[(0, 0)].im;
            let bound: f64 = (0..md.n_lights())
                .map(|l| gmn_core::specfun::t_remainder_bound(md.z_light(l, &u).norm()) / (2.0 * PI))
                .sum();
            assert!((v[(0, 0)] - imt).abs() <= bound * (1.0 + 1e-12));
        }
    }
}

#[test]
fn xmodel_reality_and_jump() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (md, rad) in models() {
        for _ in 0..3 {
            let pt = random_point(&mut rng, &md, rad);
            let dec = good_decomposition(&md, &pt.u, 5).unwrap();
            let n = md.n_lights();
            for i in 0..md.r {
                for g in [Charge::electric(md.r, n, i), Charge::magnetic(md.r, n, i)] {
                    let x = xmodel(&md, &g, &pt, &dec, Continuation::None).unwrap();
                    let y = xmodel(&md, &g, &pt.with_zeta(-1.0 / pt.zeta.conj()), &dec, Continuation::None).unwrap();
                    assert!((x.conj() * y - 1.0).norm() < 1e-9, "reality {}", (x.conj() * y - 1.0).norm());
                }
            }
            // jump across the contour of each light
            for l in 0..n {
                let phi = contour_angle(&md, l, 1, &pt.u, &dec, Continuation::None);
                let zeta = Complex64::from_polar(rng.gen_range(0.5..2.0), phi);
                let eps = 1e-10;
                let on = pt.with_zeta(zeta);
                let ccw = pt.with_zeta(zeta * Complex64::from_polar(1.0, eps));
                let cw = pt.with_zeta(zeta * Complex64::from_polar(1.0, -eps));
                for i in 0..md.r {
                    let g = Charge::magnetic(md.r, n, i);
                    let mut factor = c(1.0, 0.0);
                    for l2 in 0..n {
                        for s in [1i8, -1] {
                            if (contour_angle(&md, l2, s, &pt.u, &dec, Continuation::None) - phi).abs() < 1e-12 {
                                let gp = if s == 1 { md.light_charge(l2) } else { md.light_charge(l2).neg() };
                                let xg = xsf(&md, &gp, &on).unwrap();
                                let e = md.lights[l2].omega as i64 * md.pair(&gp, &g);
                                factor *= (1.0 - xg).powi(e as i32);
                            }
                        }
                    }
                    let a = xmodel(&md, &g, &ccw, &dec, Continuation::None).unwrap();
                    let b = xmodel(&md, &g, &cw, &dec, Continuation::None).unwrap();
                    assert!((a - factor * b).norm() < 1e-6 * a.norm().max(1.0));
                    let o = xmodel(&md, &g, &on, &dec, Continuation::None).unwrap();
                    assert!((o - a).norm() < 1e-6 * a.norm().max(1.0));
                }
            }
        }
    }
}

#[test]
fn bessel_form_matches_quadrature_on_ov() {
    let md = ov_model();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..20 {
        let pt = random_point(&mut rng, &md, 1.5);
        let dec = good_decomposition(&md, &pt.u, 5).unwrap();
        let a = varpi_model(&md, &pt).unwrap().coeffs;
        let b = varpi_model_from_characters(&md, &pt, &dec, Continuation::None).unwrap().coeffs;
        assert!(max_abs(&(a - b)) < 1e-9);
    }
}

fn tn_models() -> Vec<(ModelData, TnChart)> {
    let ov = ov_model();
    let i2 = i2_model();
    let t1 = TnChart::new(&ov, 0).unwrap();
    let t2 = TnChart::new(&i2, 0).unwrap();
    vec![(ov, t1), (i2, t2)]
}

#[test]
fn tn_chart_requirements() {
    assert!(TnChart::new(&rank_two_model(), 0).is_err());
    let p2 = build_multi_ov(&[c(0.0, 0.0)], &[0.0], 2).unwrap();
    assert!(TnChart::new(&p2, 0).is_err());
}

#[test]
fn tn_coordinates_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for (md, tn) in tn_models() {
        for _ in 0..50 {
            let w1 = Complex64::from_polar(rng.gen_range(0.01..1.0), rng.gen_range(-PI..PI));
            let w2 = Complex64::from_polar(rng.gen_range(0.01..1.0), rng.gen_range(-PI..PI));
            let pt = tn.to_primed(&md, w1, w2, c(1.0, 0.0));
            let (th, z) = TnChart::moment(w1, w2);
            assert!((md.z_light(tn.light, &pt.u) - z).norm() < 1e-15);
            assert!((reduce(md.theta_light(tn.light, &pt.theta_e)) - th).abs() < 1e-14);
            let (v1, v2) = tn.from_primed(&md, &pt);
            assert!((v1 - w1).norm() < 1e-12 && (v2 - w2).norm() < 1e-12, "{v1} {w1} {v2} {w2}");
            let closed = TnChart::jacobian_closed_form(w1, w2);
            assert!((tn.jacobian_det(w1, w2) - closed).abs() < 1e-14 * closed.max(1.0));
            let num = tn.jacobian_numeric(&md, w1, w2, 1e-4 * (w1.norm().min(w2.norm()))).unwrap();
            assert!(((num - closed) / closed).abs() < 1e-8, "{num} vs {closed}");
        }
        let q2 = Complex64::from_polar(2f64.sqrt(), 0.3);
        assert!((tn.jacobian_det(q2, q2) - 0.5).abs() < 1e-14);
    }
}

fn reduce(x: f64) -> f64 {
    gmn_core::specfun::reduce_angle(x)
}

#[test]
fn tn_potential_and_difference() {
    let md = ov_model();
    let tn = TnChart::new(&md, 0).unwrap();
    let w = Complex64::from_polar(0.5f64.sqrt(), 1.1);
    assert!((tn.potential_connection_tn(&md, w, w).v[(0, 0)] - 2.0).abs() < 1e-15);
    for (md, tn) in tn_models() {
        for psi in [0.3, 2.0, -1.7] {
            for zeta in [c(0.6, 0.2), c(-1.0, 1.4)] {
                let prof = tn.difference_profile(&md, psi, &[1e-1, 1e-2, 1e-3], zeta).unwrap();
                let base = prof[0].1;
                assert!(prof.iter().all(|&(_, d)| d <= 2.0 * base + 1e-12), "{prof:?}");
            }
        }
    }
}

#[test]
fn tn_varpi_regular_and_closed() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for (md, tn) in tn_models() {
        for q in [0.5, 1e-1, 1e-2] {
            let w1 = Complex64::from_polar(q * 0.6, rng.gen_range(-PI..PI));
            let w2 = Complex64::from_polar(q * 0.8, rng.gen_range(-PI..PI));
            let zeta = Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(-PI..PI));
            let w = tn.varpi_model(&md, w1, w2, zeta).unwrap();
            assert!(w.antisymmetry_defect() < 1e-12);
            assert!(w.top_wedge().norm() > 1e-6);
            let h = 1e-3 * q;
            let (res, _, _) = closedness_residual(
                |x: &[f64]| tn.varpi_model(&md, c(x[0], x[1]), c(x[2], x[3]), zeta).map(|s| s.coeffs),
                &[w1.re, w1.im, w2.re, w2.im],
                h,
            )
            .unwrap();
            assert!(res < 1e-6, "closedness {res} at |q| {q}");
            let g = tn.metric(&md, w1, w2).unwrap();
            assert!(min_eigenvalue(&g) > 0.0);
        }
    }
}
