#![allow(dead_code)]

use core::f64::consts::PI;

use gmn_core::linalg::{c, CMat};
use gmn_core::modeldata::*;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn i2_model() -> ModelData {
    let m = [c(0.3, 0.2), c(0.3, 0.2), c(-0.5, 0.1), c(-0.1, -0.5)];
    build_multi_ov(&m, &[0.15, 0.3, 0.25, 0.3], 1).unwrap()
}

pub fn random_masses(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<Complex64> {
    loop {
        let mut m: Vec<Complex64> = (0..n - 1)
            .map(|_| Complex64::from_polar(bound * 0.6 * rng.gen::<f64>(), 2.0 * PI * rng.gen::<f64>()))
            .collect();
        let last = -m.iter().sum::<Complex64>();
        m.push(last);
        if last.norm() < bound {
            return m;
        }
    }
}

pub fn random_y(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut y: Vec<f64> = (0..n - 1).map(|_| rng.gen::<f64>()).collect();
    let s: f64 = y.iter().sum();
    y.push(s.ceil() - s);
    y
}

pub fn rank_two_model() -> ModelData {
    let lights = vec![
        LightCharge::new(vec![1, 0], c(0.1, 0.0), 0.4, 1),
        LightCharge::new(vec![0, 2], c(-0.2, 0.3), 1.1, 2),
        LightCharge::new(vec![1, 2], c(0.05, -0.1), 2.5, 1),
    ];
    let r = 2;
    let cst = CMat::from_row_slice(2, 2, &[c(0.1, 0.9), c(0.2, 0.1), c(0.2, 0.1), c(-0.3, 1.1)]);
    let base = TauTilde::constant(&cst);
    let c0 = base.parts().0.to_vec();
    let mut lin = vec![c(0.0, 0.0); 8];
    // fully symmetric cubic coefficients
    lin[0] = c(0.1, 0.05);
    for idx in [1, 2, 4] {
        lin[idx] = c(-0.07, 0.02);
    }
    for idx in [3, 5, 6] {
        lin[idx] = c(0.03, -0.04);
    }
    lin[7] = c(0.02, 0.01);
    let mut quad = vec![c(0.0, 0.0); 16];
    quad[0] = c(0.01, 0.02);
    quad[15] = c(-0.02, 0.01);
    let tt = TauTilde::from_parts(r, c0, lin, quad).unwrap();
    let domain = Domain { center: vec![c(0.0, 0.0); 2], radii: vec![1.0, 1.0] };
    let mut md = ModelData::new(r, vec![1, 2], lights, tt, domain).unwrap();
    md.z_tilde_m = vec![c(0.3, -0.1), c(0.0, 0.2)];
    md
}

