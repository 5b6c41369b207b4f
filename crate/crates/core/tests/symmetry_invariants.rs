//! Invariants of the Liouville quantities on embedded planar layers.

use std::f64::consts::PI;

use fraclayer::extension::{extend, LambdaGrid};
use fraclayer::grid::{GridFunction, Tail};
use fraclayer::measure::SpectralMeasure;
use fraclayer::symmetry::{growth_check, liouville_d, liouville_d_atom, sigma_flux_combination, GrowthKind, LiouvilleData};

const R_LIST: [f64; 4] = [4.0, 8.0, 16.0, 32.0];

fn data(m: &SpectralMeasure, direction: [f64; 2]) -> LiouvilleData {
    data_n(m, direction, 2001)
}

fn data_n(m: &SpectralMeasure, direction: [f64; 2], n: usize) -> LiouvilleData {
    let u = GridFunction::from_fn_1d(100.0, n, Tail::Layer, |x| 2.0 / PI * x.atan()).unwrap();
    let lambda = LambdaGrid::geometric(0.25 * u.h(), 100.0, 200).unwrap();
    let f = extend(&u, m, &lambda).unwrap();
    LiouvilleData::embedded(f, direction, GrowthKind::LogR).unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / (2 * panels) as f64;
    let mut acc = f(a) + f(b);
    for k in 1..2 * panels {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn d_is_linear_in_the_measure_and_at_the_floor() {
    let m = SpectralMeasure::new(&[(0.3, 0.5), (0.7, 0.5)], 0.0).unwrap();
    let data = data(&m, [1.0, 2.0]);
    let mut prev = 0.0;
    for &r in &R_LIST {
        let v = liouville_d(&data, &m, r).unwrap();
        let parts: f64 = m
            .atoms()
            .iter()
            .enumerate()
            .map(|(i, a)| a.weight * data.d[i] * liouville_d_atom(&data, i, r).unwrap())
            .sum();
        assert!((v.d - parts).abs() <= 1e-12 * v.normalization, "R={r}");
        assert!(v.d >= 0.0);
        // σ is constant on a planar layer
        assert!(v.d <= 1e-5 * v.normalization, "R={r}: {} vs {}", v.d, v.normalization);
        assert!(v.normalization > prev);
        prev = v.normalization;
    }
    // zero for planar data up to the O(h²) difference between the two
    // directional stencils
    let c = sigma_flux_combination(&data, &m, R_LIST[0]).unwrap();
    let fine = sigma_flux_combination(&data_n(&m, [1.0, 2.0], 4001), &m, R_LIST[0]).unwrap();
    assert!(c < 5e-3, "{c}");
    assert!(fine < c / 3.0, "{fine} vs {c}");
}

#[test]
fn cylinder_integrals_of_the_harmonic_arctan() {
    let m = SpectralMeasure::new(&[(0.5, 1.0)], 0.0).unwrap();
    let a = [0.6, 0.8];
    let data = data(&m, a);
    let g = GrowthKind::LogR;
    let table = growth_check(&data, &m, &R_LIST).unwrap();
    for (row, &r) in table.rows.iter().zip(&R_LIST) {
        // U = (2/π) atan(t/(1+λ)) with t = a·x; the disk integral of a
        // function of t is ∫ 2√(R² − t²) g(t) dt
        let ut2 = |t: f64, l: f64| (2.0 / PI * (1.0 + l) / ((1.0 + l).powi(2) + t * t)).powi(2);
        let grad2 = |t: f64, l: f64| (2.0 / PI).powi(2) / ((1.0 + l).powi(2) + t * t);
        let disk = |f: &dyn Fn(f64, f64) -> f64| {
            // t = R sin θ removes the square-root endpoint
            simpson(
                |th: f64| {
                    let t = r * th.sin();
                    2.0 * r * th.cos().powi(2) * r * simpson(|l| f(t, l), 0.0, r, 400)
                },
                -0.5 * PI,
                0.5 * PI,
                200,
            )
        };
        let mass = a[0] * a[0] * disk(&ut2);
        let energy = disk(&grad2);
        assert!((row.mass - mass).abs() < 2e-2 * mass, "R={r}: mass {} vs {mass}", row.mass);
        assert!((row.bound - r * r * g.f(r)).abs() < 1e-12 * row.bound);
        let v = liouville_d(&data, &m, r).unwrap();
        assert!((v.normalization - energy).abs() < 2e-2 * energy, "R={r}: energy {} vs {energy}", v.normalization);
    }
}
