use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use robust_beam::beam::{fraction_on_disk, slot_rate, sum_rate, Angle, Deviation, LinkParams};
use robust_beam::uncertainty::Scenario;

fn murad(x: f64) -> Angle {
    Angle::from_microrad(x).unwrap()
}

fn centered_closed_form(p: &LinkParams, theta: Angle) -> f64 {
    let w = p.distance() * theta.rad();
    -(-2.0 * p.detector_radius().powi(2) / (w * w)).exp_m1()
}

#[test]
fn centered_fraction_on_log_grid() {
    let p = LinkParams::reference();
    for k in 0..200 {
        let theta = murad(0.01 * 1e5f64.powf(k as f64 / 199.0));
        let f = fraction_on_disk(&p, theta, Deviation::ZERO).unwrap();
        let want = centered_closed_form(&p, theta);
        assert!(
            (f - want).abs() <= 1e-10,
            "theta {} urad: {f} vs {want}",
            theta.microrad()
        );
    }
}

#[test]
fn wide_detector_captures_the_whole_beam() {
    let p = LinkParams::reference();
    // r / (L theta) >= 5
    let theta = Angle::from_rad(p.detector_radius() / (5.0 * p.distance())).unwrap();
    for t in [theta.rad(), theta.rad() / 10.0, theta.rad() / 1e3] {
        let f = fraction_on_disk(&p, Angle::from_rad(t).unwrap(), Deviation::ZERO).unwrap();
        assert!(f >= 1.0 - 1e-12, "{f}");
    }
}

#[test]
fn far_offsets_vanish() {
    let p = LinkParams::reference();
    for theta in [0.01, 1.0, 7.5, 100.0, 1000.0] {
        let lin = 100.0 * (p.distance() * theta * 1e-6 + p.detector_radius());
        let f =
            fraction_on_disk(&p, murad(theta), Deviation::from_linear(&p, lin).unwrap()).unwrap();
        assert!(f < 1e-12, "theta {theta}: {f}");
    }
}

#[test]
fn centered_slot_rate_reference() {
    // 1 - exp(-2 * 0.15^2 / 0.4^2) = 1 - exp(-0.28125), times K from the link constants
    let p = LinkParams::reference();
    let k = 0.07 * 0.01 / (6.62607015e-34 * 299792458.0 / 850e-9 * 100.0);
    let want = k * -(-0.28125f64).exp_m1();
    let got = slot_rate(&p, murad(10.0), Deviation::ZERO).unwrap();
    assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
}

fn monte_carlo_fraction(sigma: f64, offset: f64, r: f64, n: u64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Normal::new(offset, sigma).unwrap();
    let y = Normal::new(0.0, sigma).unwrap();
    let hits = (0..n)
        .filter(|_| {
            let (a, b) = (x.sample(&mut rng), y.sample(&mut rng));
            a * a + b * b <= r * r
        })
        .count() as f64;
    let p = hits / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

#[test]
fn quadrature_agrees_with_monte_carlo_sampling() {
    let p = LinkParams::reference();
    let r = p.detector_radius();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    use rand::Rng;
    for k in 0..20 {
        // beam radius between 0.3 r and 3 r, offset up to 2 r
        let w = r * 0.3 * 10f64.powf(rng.gen::<f64>());
        let theta = Angle::from_rad(w / p.distance()).unwrap();
        let lin = 2.0 * r * rng.gen::<f64>();
        let d = Deviation::from_linear(&p, lin).unwrap();
        let f = fraction_on_disk(&p, theta, d).unwrap();
        let (est, se) = monte_carlo_fraction(w / 2.0, lin, r, 100_000_000, k);
        assert!(
            (f - est).abs() <= 3.0 * se,
            "pair {k}: quadrature {f}, sampled {est} +- {se}"
        );
    }
}

#[test]
fn staircase_sum_is_the_sum_of_slot_rates() {
    let p = LinkParams::reference();
    let theta = murad(7.5);
    let s = Scenario::from_microrad(&[0.0, 1.0, 2.0]).unwrap();
    let parts: f64 = s
        .deviations()
        .iter()
        .map(|&d| slot_rate(&p, theta, d).unwrap())
        .sum();
    let total = sum_rate(&p, theta, &s).unwrap();
    assert!(((total - parts) / parts).abs() < 1e-15);
}

proptest! {
    #[test]
    fn fraction_is_a_probability(log_theta in -2.0f64..3.0, d in 0.0f64..50.0) {
        let p = LinkParams::reference();
        let f = fraction_on_disk(&p, murad(10f64.powf(log_theta)), Deviation::from_microrad(d).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn fraction_decreases_with_deviation(
        log_theta in -2.0f64..3.0,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let p = LinkParams::reference();
        let theta = murad(10f64.powf(log_theta));
        let w = p.distance() * theta.rad();
        let r = p.detector_radius();
        // offsets up to the beam radius plus two detector radii
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let span = w + 2.0 * r;
        let f = |x: f64| fraction_on_disk(&p, theta, Deviation::from_linear(&p, x * span).unwrap()).unwrap();
        let (f_lo, f_hi) = (f(lo), f(hi));
        // non-increasing up to the quadrature tolerance
        prop_assert!(f_lo >= f_hi - 1e-12, "{f_lo} < {f_hi}");
        let resolvable = (hi - lo) * span >= 0.01 * w && f_hi > 1e-6 && f_lo < 1.0 - 1e-6;
        if resolvable {
            prop_assert!(f_lo > f_hi);
        }
    }

    #[test]
    fn sum_rate_ignores_slot_order(
        values in prop::collection::vec(0.0f64..5.0, 1..8),
        log_theta in -1.0f64..2.0,
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let p = LinkParams::reference();
        let theta = murad(10f64.powf(log_theta));
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = sum_rate(&p, theta, &Scenario::from_microrad(&values).unwrap()).unwrap();
        let b = sum_rate(&p, theta, &Scenario::from_microrad(&shuffled).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    }

    #[test]
    fn doubling_power_doubles_rate(log_theta in -2.0f64..3.0, d in 0.0f64..10.0) {
        let p = LinkParams::reference();
        let q = p.with_tx_power(2.0 * p.tx_power()).unwrap();
        let theta = murad(10f64.powf(log_theta));
        let d = Deviation::from_microrad(d).unwrap();
        prop_assert_eq!(slot_rate(&q, theta, d).unwrap(), 2.0 * slot_rate(&p, theta, d).unwrap());
    }
}
