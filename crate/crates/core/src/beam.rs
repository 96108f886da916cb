//! Gaussian beam link model: intensity on the receiver plane, the energy
//! fraction captured by an offset detector disk, and the resulting rates.
//!
//! A beam with full divergence angle `theta` at distance `L` has intensity
//! `2 / (pi L^2 theta^2) * exp(-2 (x^2 + y^2) / (L theta)^2)`, which is a
//! circular Gaussian density with per-axis standard deviation
//! `sigma = L theta / 2`. The captured fraction for a disk of radius `r`
//! whose center is offset by `d` reduces to the one-dimensional radial
//! integral
//!
//! ```text
//! F = int_0^r (rho / sigma^2) exp(-(rho^2 + d^2) / (2 sigma^2)) I0(rho d / sigma^2) d rho
//! ```
//!
//! which is evaluated with the scaled Bessel function so that the integrand
//! stays finite for offsets up to a million beam widths.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::special::{bessel_i0e, integrate_adaptive};
use crate::uncertainty::Scenario;

/// Planck constant [J s] (exact SI).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum [m/s] (exact SI).
pub const LIGHT_SPEED: f64 = 299_792_458.0;

/// Beyond this many standard deviations from the offset the radial density
/// is below 1e-21 and is dropped.
const TAIL_SIGMAS: f64 = 10.0;
const PANEL_SIGMAS: f64 = 5.0;
const FRACTION_ABS_TOL: f64 = 1e-13;
const MAX_SEGMENTS: usize = 400;

/// Physical link constants, all in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    distance: f64,
    detector_radius: f64,
    tx_power: f64,
    optical_efficiency: f64,
    wavelength: f64,
    photons_per_bit: f64,
}

impl LinkParams {
    /// `distance` [m], `detector_radius` [m], `tx_power` [W],
    /// `optical_efficiency` in (0, 1], `wavelength` [m], `photons_per_bit`.
    pub fn new(
        distance: f64,
        detector_radius: f64,
        tx_power: f64,
        optical_efficiency: f64,
        wavelength: f64,
        photons_per_bit: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("distance", distance),
            ("detector_radius", detector_radius),
            ("tx_power", tx_power),
            ("optical_efficiency", optical_efficiency),
            ("wavelength", wavelength),
            ("photons_per_bit", photons_per_bit),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if optical_efficiency > 1.0 {
            return Err(invalid(
                "optical_efficiency",
                format!("must not exceed 1, got {optical_efficiency}"),
            ));
        }
        Ok(Self {
            distance,
            detector_radius,
            tx_power,
            optical_efficiency,
            wavelength,
            photons_per_bit,
        })
    }

    /// 40 km link, 15 cm detector radius, 70 mW, 1% optical efficiency,
    /// 850 nm, 100 photons/bit.
    pub fn reference() -> Self {
        Self::new(40e3, 0.15, 70e-3, 0.01, 850e-9, 100.0).expect("reference link is valid")
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn detector_radius(&self) -> f64 {
        self.detector_radius
    }

    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    pub fn optical_efficiency(&self) -> f64 {
        self.optical_efficiency
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn photons_per_bit(&self) -> f64 {
        self.photons_per_bit
    }

    pub fn with_tx_power(self, tx_power: f64) -> Result<Self> {
        Self::new(
            self.distance,
            self.detector_radius,
            tx_power,
            self.optical_efficiency,
            self.wavelength,
            self.photons_per_bit,
        )
    }

    /// Photon energy `h c / lambda` [J].
    pub fn photon_energy(&self) -> f64 {
        PLANCK * LIGHT_SPEED / self.wavelength
    }

    /// Rate for a fully captured beam, `P tau / (E_p N_b)` [bit/s].
    pub fn rate_prefactor(&self) -> f64 {
        self.tx_power * self.optical_efficiency / (self.photon_energy() * self.photons_per_bit)
    }
}

/// A strictly positive plane angle, stored in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub fn from_rad(rad: f64) -> Result<Self> {
        if rad.is_finite() && rad > 0.0 {
            Ok(Self(rad))
        } else {
            Err(invalid(
                "theta",
                format!("must be positive and finite, got {rad} rad"),
            ))
        }
    }

    pub fn from_microrad(murad: f64) -> Result<Self> {
        Self::from_rad(murad * 1e-6)
    }

    pub fn rad(self) -> f64 {
        self.0
    }

    pub fn microrad(self) -> f64 {
        self.0 * 1e6
    }
}

/// A non-negative angular deviation of the detector from the beam axis.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Deviation(f64);

impl Deviation {
    pub const ZERO: Deviation = Deviation(0.0);

    pub fn from_rad(rad: f64) -> Result<Self> {
        if rad.is_finite() && rad >= 0.0 {
            Ok(Self(rad))
        } else {
            Err(invalid(
                "deviation",
                format!("must be non-negative and finite, got {rad} rad"),
            ))
        }
    }

    pub fn from_microrad(murad: f64) -> Result<Self> {
        Self::from_rad(murad * 1e-6)
    }

    /// Offset on the receiver plane expressed as an angle, for callers that
    /// want to specify a linear offset directly.
    pub fn from_linear(params: &LinkParams, meters: f64) -> Result<Self> {
        Self::from_rad(meters / params.distance)
    }

    pub fn rad(self) -> f64 {
        self.0
    }

    /// Offset on the receiver plane [m].
    pub fn linear(self, params: &LinkParams) -> f64 {
        self.0 * params.distance
    }
}

/// Beam intensity [1/m^2] at `(x, y)` on the receiver plane.
pub fn intensity(params: &LinkParams, theta: Angle, x: f64, y: f64) -> f64 {
    let w2 = (params.distance * theta.rad()).powi(2);
    2.0 / (PI * w2) * (-2.0 * (x * x + y * y) / w2).exp()
}

/// Fraction of the beam energy falling on the detector disk.
pub fn fraction_on_disk(params: &LinkParams, theta: Angle, d: Deviation) -> Result<f64> {
    let sigma = 0.5 * params.distance * theta.rad();
    disk_fraction(params.detector_radius, d.linear(params), sigma)
}

/// Probability mass of a circular Gaussian (per-axis std `sigma`) inside a
/// disk of radius `radius` whose center is `offset` from the mean.
pub(crate) fn disk_fraction(radius: f64, offset: f64, sigma: f64) -> Result<f64> {
    let big_r = radius / sigma;
    let delta = offset / sigma;
    let lo = (delta - TAIL_SIGMAS).max(0.0);
    let hi = (delta + TAIL_SIGMAS).min(big_r);
    if hi <= lo {
        return Ok(0.0);
    }
    let panels = ((hi - lo) / PANEL_SIGMAS).ceil().max(1.0) as usize;
    let mut breaks: Vec<f64> = (0..=panels)
        .map(|k| lo + (hi - lo) * k as f64 / panels as f64)
        .collect();
    breaks[panels] = hi;
    // In scaled units the integrand is u exp(-(u - delta)^2 / 2) i0e(u delta).
    let integrand = |u: f64| {
        let g = u - delta;
        u * (-0.5 * g * g).exp() * bessel_i0e(u * delta)
    };
    let value = integrate_adaptive(integrand, &breaks, FRACTION_ABS_TOL, MAX_SEGMENTS)?;
    Ok(value.clamp(0.0, 1.0))
}

/// Achievable rate in one slot [bit/s].
pub fn slot_rate(params: &LinkParams, theta: Angle, d: Deviation) -> Result<f64> {
    Ok(params.rate_prefactor() * fraction_on_disk(params, theta, d)?)
}

/// Sum of the slot rates over a scenario [bit/s], accumulated in slot order.
pub fn sum_rate(params: &LinkParams, theta: Angle, scenario: &Scenario) -> Result<f64> {
    scenario
        .deviations()
        .iter()
        .try_fold(0.0, |acc, &d| Ok(acc + slot_rate(params, theta, d)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn murad(x: f64) -> Angle {
        Angle::from_microrad(x).unwrap()
    }

    #[test]
    fn intensity_at_origin_and_offset() {
        let p = LinkParams::reference();
        let i0 = intensity(&p, murad(7.5), 0.0, 0.0);
        assert!((i0 - 7.073553026306459).abs() < 1e-12);
        let i1 = intensity(&p, murad(7.5), 0.3, 0.0);
        // 2 e^-2 / (pi 0.09), 40-digit reference
        assert!((i1 - 0.9573013023043835).abs() / 0.9573013023043835 < 1e-13);
    }

    #[test]
    fn intensity_is_centrosymmetric_and_peaked() {
        let p = LinkParams::reference();
        let t = murad(3.0);
        let (a, b) = (0.07, -0.02);
        let v = intensity(&p, t, a, b);
        assert_eq!(v, intensity(&p, t, b, a));
        assert_eq!(v, intensity(&p, t, -a, -b));
        assert!(v < intensity(&p, t, 0.0, 0.0));
        assert!(v > 0.0);
    }

    #[test]
    fn angle_and_deviation_reject_bad_values() {
        assert!(Angle::from_rad(0.0).is_err());
        assert!(Angle::from_rad(-1e-6).is_err());
        assert!(Angle::from_rad(f64::NAN).is_err());
        assert!(Deviation::from_rad(-1e-9).is_err());
        assert!(Deviation::from_rad(0.0).is_ok());
    }

    #[test]
    fn deviation_linear_offset_is_exact_product() {
        let p = LinkParams::reference();
        let d = Deviation::from_microrad(1.7).unwrap();
        assert_eq!(d.linear(&p), d.rad() * 40e3);
    }

    #[test]
    fn link_params_validation() {
        assert!(LinkParams::new(40e3, 0.15, 0.07, 1.5, 850e-9, 100.0).is_err());
        assert!(LinkParams::new(40e3, 0.0, 0.07, 0.5, 850e-9, 100.0).is_err());
        let p = LinkParams::reference();
        assert!(p.photon_energy() > 0.0);
        // P tau lambda / (h c N_b), 40-digit reference
        assert!((p.rate_prefactor() / 29952993576879.12 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn centered_fraction_matches_closed_form() {
        let p = LinkParams::reference();
        let f = fraction_on_disk(&p, murad(7.5), Deviation::ZERO).unwrap();
        assert!((f - 0.3934693402873666).abs() < 1e-12);
    }

    #[test]
    fn far_offset_captures_nothing() {
        let p = LinkParams::reference();
        let t = murad(7.5);
        let d = Deviation::from_linear(&p, 100.0 * (40e3 * t.rad() + 0.15)).unwrap();
        assert!(fraction_on_disk(&p, t, d).unwrap() < 1e-12);
    }

    #[test]
    fn offset_fraction_matches_monte_carlo_reference() {
        // 1e8-sample Monte Carlo estimate 0.38282 (SE 5e-5)
        let p = LinkParams::reference();
        let d = Deviation::from_linear(&p, 0.04).unwrap();
        let f = fraction_on_disk(&p, murad(7.5), d).unwrap();
        assert!((f - 0.38282).abs() < 5e-4, "{f}");
        // and to the 40-digit radial quadrature
        assert!((f - 0.38282912004321093).abs() < 1e-11, "{f}");
    }

    #[test]
    fn huge_offsets_do_not_overflow() {
        for delta in [1e2, 1e4, 1e6] {
            let f = disk_fraction(1.0, 1.0 + delta * 1e-3, 1e-3).unwrap();
            assert!(f.is_finite());
            assert_eq!(f, 0.0);
            let f = disk_fraction(delta, 0.5 * delta, 1.0).unwrap();
            assert!((f - 1.0).abs() < 1e-12, "{f}");
        }
        // disk around a far-off mean: still a proper probability
        let f = disk_fraction(3.0, 1e3, 1.0).unwrap();
        assert_eq!(f, 0.0);
        let f = disk_fraction(1e6 + 5.0, 1e6, 1.0).unwrap();
        assert!(f > 0.99 && f <= 1.0, "{f}");
    }

    #[test]
    fn slot_rate_reference_value() {
        let p = LinkParams::reference();
        let r = slot_rate(&p, murad(10.0), Deviation::ZERO).unwrap();
        assert!((r / 7343287826928.392 - 1.0).abs() < 1e-10, "{r}");
    }

    #[test]
    fn slot_rate_is_linear_in_power() {
        let p = LinkParams::reference();
        let q = p.with_tx_power(2.0 * p.tx_power()).unwrap();
        let d = Deviation::from_microrad(0.6).unwrap();
        let a = slot_rate(&p, murad(4.0), d).unwrap();
        let b = slot_rate(&q, murad(4.0), d).unwrap();
        assert!((b / a - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sum_rate_of_zero_scenario() {
        let p = LinkParams::reference();
        let s = Scenario::zeros(5);
        let t = murad(6.0);
        let one = slot_rate(&p, t, Deviation::ZERO).unwrap();
        let total = sum_rate(&p, t, &s).unwrap();
        assert!((total - 5.0 * one).abs() <= 1e-14 * total);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn sum_rate_of_three_slot_staircase() {
        // per-slot fractions cross-checked by 1e8-sample Monte Carlo
        // (0.39335, 0.38282, 0.35256, SE 5e-5 each)
        let p = LinkParams::reference();
        let s = Scenario::from_microrad(&[0.0, 1.0, 2.0]).unwrap();
        let want =
            p.rate_prefactor() * (0.3934693402873666 + 0.38282912004321093 + 0.35256171319779375);
        let got = sum_rate(&p, murad(7.5), &s).unwrap();
        assert!((got / want - 1.0).abs() < 1e-10);
        let mc = p.rate_prefactor() * (0.3933468 + 0.38282413 + 0.35255849);
        assert!((got / mc - 1.0).abs() < 5e-4);
    }
}
