#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Measurement ages of the Berkeley growth study layout: fifteen visits up to
/// age 10 plus adult height at 18.
pub const GROWTH_AGES: [f64; 16] = [
    1.0, 1.25, 1.5, 1.75, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 8.5, 9.0, 9.5, 10.0, 18.0,
];

/// Writes a synthetic `heights.csv` / `ages.csv` pair for `n` subjects.
///
/// Growth velocity decays from an infant peak to a childhood plateau with a
/// mild mid-childhood spurt; adult height adds a pubertal gain correlated
/// with the late-childhood velocity.
pub fn write_growth_fixture(dir: &Path, n: usize, seed: u64) {
    let mut rng = fderiv::rng::stream(seed, 0x4752_4f57, 0);
    let z: Normal<f64> = Normal::new(0.0, 1.0).unwrap();
    let mut heights = String::from("id");
    for a in GROWTH_AGES {
        write!(heights, ",h{a}").unwrap();
    }
    heights.push('\n');
    for i in 0..n {
        let amp = 22.0 + 3.0 * z.sample(&mut rng);
        let tau = 0.9 + 0.1 * rng.random::<f64>();
        let plateau = 5.5 + 0.5 * z.sample(&mut rng);
        let spurt = (1.0 + 0.6 * z.sample(&mut rng)).max(0.0);
        let birth = 52.0 + 2.0 * z.sample(&mut rng);
        // Closed-form integral of the velocity from age 0 to s.
        let to = |s: f64| {
            let bump = spurt * 0.8 * (1.0 + erf((s - 6.5) / 0.8));
            birth + amp * tau * (1.0 - (-s / tau).exp()) + plateau * s + bump
        };
        write!(heights, "b{:02}", i + 1).unwrap();
        for &a in &GROWTH_AGES[..15] {
            let noise = 0.3 * z.sample(&mut rng);
            write!(heights, ",{:.1}", to(a) + noise).unwrap();
        }
        let adult = to(10.0) + 38.0 + 4.0 * (plateau - 5.5) + 2.0 * z.sample(&mut rng);
        writeln!(heights, ",{adult:.1}").unwrap();
    }
    fs::write(dir.join("heights.csv"), heights).unwrap();
    let mut ages = String::from("age\n");
    for a in GROWTH_AGES {
        writeln!(ages, "{a}").unwrap();
    }
    fs::write(dir.join("ages.csv"), ages).unwrap();
}

/// Abramowitz–Stegun 7.1.26 approximation, ample for fixture generation.
fn erf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let y = 1.0 - poly * (-x * x).exp();
    if x >= 0.0 {
        y
    } else {
        -y
    }
}
