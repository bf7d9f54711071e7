//! Return-to-zero link timing: channel rise and fall, reception delay and
//! the resulting information rate per hour.
//!
//! Channel times are in seconds, kinetic times in minutes.

use crate::channel::ChannelParams;
use crate::error::{ensure, Result};
use crate::kinetics::KineticParams;
use crate::special::{bisect, erfc, inverse_erfc, Tolerance};

pub const DEFAULT_RISE_THRESHOLD: f64 = 0.9;
pub const DEFAULT_FALL_THRESHOLD: f64 = 0.1;
/// Rounded reception delay sometimes quoted for the default kinetics, h.
/// Only a reference value; [`reception_delay`] evaluates the formula.
pub const REFERENCE_RECEPTION_HOURS: f64 = 3.0;
/// Multiple of each kinetic time constant allowed for settling.
pub const SETTLING_FACTOR: f64 = 3.0;

const ROOT_TOL: Tolerance = Tolerance {
    abs: 1e-13,
    rel: 1e-13,
    max_iter: 400,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBreakdown {
    pub t_rise: f64,
    pub t_fall: f64,
    /// Minutes.
    pub t_reception: f64,
    /// Stimulation time `t_rise + t_reception`, s.
    pub t_stimulation: f64,
    /// `t_rise + t_reception + t_fall`, s.
    pub t_total: f64,
    pub rise_threshold: f64,
    pub fall_threshold: f64,
}

impl DelayBreakdown {
    pub fn total_hours(&self) -> f64 {
        self.t_total / 3600.0
    }
}

fn erfc_arg(r: f64, t: f64, ch: &ChannelParams) -> f64 {
    r / libm::sqrt(4.0 * ch.diffusion * t)
}

fn check_threshold(threshold: f64) -> Result<()> {
    ensure(threshold > 0.0 && threshold < 1.0, "threshold", threshold, "0 < threshold < 1")
}

/// Fraction of the steady concentration reached `t` seconds after a
/// constant source switches on.
pub fn rise_ratio(r: f64, t: f64, ch: &ChannelParams) -> Result<f64> {
    ensure(t > 0.0, "t", t, "> 0")?;
    ensure(r > 0.0, "r", r, "> 0")?;
    Ok(erfc(erfc_arg(r, t, ch)))
}

/// Time for the rise ratio to reach `threshold`.
pub fn rise_time(r: f64, ch: &ChannelParams, threshold: f64) -> Result<f64> {
    ensure(r > 0.0, "r", r, "> 0")?;
    check_threshold(threshold)?;
    let x = inverse_erfc(threshold)?;
    Ok(r * r / (4.0 * ch.diffusion) / (x * x))
}

/// Fraction of the steady concentration left `s` seconds after a pulse of
/// length `t0` ends.
pub fn fall_ratio(r: f64, t0: f64, s: f64, ch: &ChannelParams) -> Result<f64> {
    ensure(r > 0.0, "r", r, "> 0")?;
    ensure(t0 > 0.0, "t0", t0, "> 0")?;
    ensure(s >= 0.0, "s", s, ">= 0")?;
    if s == 0.0 {
        return Ok(erfc(erfc_arg(r, t0, ch)));
    }
    Ok(erfc(erfc_arg(r, t0 + s, ch)) - erfc(erfc_arg(r, s, ch)))
}

/// Time derivative of `erfc(r / sqrt(4Dt))`.
fn rise_slope(r: f64, t: f64, ch: &ChannelParams) -> f64 {
    let x = erfc_arg(r, t, ch);
    x / (t * libm::sqrt(core::f64::consts::PI)) * libm::exp(-x * x)
}

/// Time after the pulse ends from which the fall ratio stays at or below
/// `threshold`.
///
/// The ratio first keeps growing briefly, then decays monotonically, so
/// the answer is the crossing on the decaying branch, or zero when the peak
/// is already below the threshold.
pub fn fall_time(r: f64, t0: f64, ch: &ChannelParams, threshold: f64) -> Result<f64> {
    ensure(r > 0.0, "r", r, "> 0")?;
    ensure(t0 > 0.0, "t0", t0, "> 0")?;
    check_threshold(threshold)?;
    // The rise slope peaks at r²/6D, where the slope difference is negative.
    let slope_peak = r * r / (6.0 * ch.diffusion);
    let peak = bisect(
        |s| if s == 0.0 { rise_slope(r, t0, ch) } else { rise_slope(r, t0 + s, ch) - rise_slope(r, s, ch) },
        0.0,
        0.0,
        slope_peak,
        ROOT_TOL,
    )?;
    let ratio = |s: f64| fall_ratio(r, t0, s, ch).unwrap_or(f64::NAN);
    if ratio(peak) <= threshold {
        return Ok(0.0);
    }
    let mut hi = 2.0 * slope_peak.max(peak);
    while ratio(hi) > threshold {
        hi *= 2.0;
    }
    bisect(ratio, threshold, peak, hi, ROOT_TOL)
}

/// Kinetic time constants `(1/(Aγ+κ), 1/b1, 1/b2)`, min.
pub fn kinetic_time_constants(a: f64, k: &KineticParams) -> Result<(f64, f64, f64)> {
    ensure(a > 0.0, "concentration", a, "> 0")?;
    Ok((1.0 / k.binding_rate(a), 1.0 / k.b1, 1.0 / k.b2))
}

/// `3·(T1 + T2 + T3)`, min.
pub fn reception_delay(a: f64, k: &KineticParams) -> Result<f64> {
    let (t1, t2, t3) = kinetic_time_constants(a, k)?;
    Ok(SETTLING_FACTOR * (t1 + t2 + t3))
}

/// Full return-to-zero schedule at distance `r` for decoding at
/// concentration `a`.
pub fn delay_breakdown(
    r: f64,
    a: f64,
    k: &KineticParams,
    ch: &ChannelParams,
    rise_threshold: f64,
    fall_threshold: f64,
) -> Result<DelayBreakdown> {
    let t_rise = rise_time(r, ch, rise_threshold)?;
    let t_reception = reception_delay(a, k)?;
    let t_stimulation = t_rise + 60.0 * t_reception;
    let t_fall = fall_time(r, t_stimulation, ch, fall_threshold)?;
    Ok(DelayBreakdown {
        t_rise,
        t_fall,
        t_reception,
        t_stimulation,
        t_total: t_stimulation + t_fall,
        rise_threshold,
        fall_threshold,
    })
}

/// Bits per hour for one channel use per `t_total`.
pub fn bits_per_hour(capacity_bits: f64, delays: &DelayBreakdown) -> f64 {
    capacity_bits / delays.total_hours()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{step_response, steady_concentration, um_to_cm};
    use proptest::prelude::*;

    fn ch() -> ChannelParams {
        ChannelParams::default()
    }

    /// Smallest grid time after which the fall ratio stays at or below the
    /// threshold, found by scanning backwards.
    fn scan_fall(r: f64, t0: f64, thr: f64, step: f64, horizon: f64) -> f64 {
        let c = ch();
        let steps = (horizon / step) as usize;
        let mut last_above = 0;
        for i in 1..=steps {
            if fall_ratio(r, t0, i as f64 * step, &c).unwrap() > thr {
                last_above = i;
            }
        }
        (last_above + 1) as f64 * step
    }

    #[test]
    fn rise_ratio_examples() {
        let r = um_to_cm(50.0);
        assert!(rise_ratio(r, 1e-6, &ch()).unwrap() < 1e-100);
        assert!(rise_ratio(r, 1e12, &ch()).unwrap() > 1.0 - 1e-4);
        assert!((rise_ratio(r, 79.1, &ch()).unwrap() - 0.9).abs() < 0.005);
        assert!(rise_ratio(r, 0.0, &ch()).is_err());
    }

    #[test]
    fn rise_time_examples() {
        let t10 = rise_time(um_to_cm(10.0), &ch(), 0.9).unwrap();
        assert!((t10 - 3.17).abs() < 0.01, "{t10}");
        let t100 = rise_time(um_to_cm(100.0), &ch(), 0.9).unwrap();
        assert!((t100 - 317.0).abs() < 1.0, "{t100}");
        let t40 = rise_time(um_to_cm(40.0), &ch(), 0.9).unwrap();
        assert!((t40 / rise_time(um_to_cm(10.0), &ch(), 0.9).unwrap() - 16.0).abs() < 1e-9);
        assert!(rise_time(um_to_cm(10.0), &ch(), 1.0).is_err());
        assert!(rise_time(0.0, &ch(), 0.9).is_err());
    }

    /// Dense-scan oracle for the rise threshold crossing.
    #[test]
    fn rise_time_matches_scan() {
        let r = um_to_cm(10.0);
        let t = rise_time(r, &ch(), 0.9).unwrap();
        let step = 1e-4;
        let first = (1..100_000)
            .map(|i| i as f64 * step)
            .find(|&s| rise_ratio(r, s, &ch()).unwrap() >= 0.9)
            .unwrap();
        assert!((first - t).abs() <= step);
        assert!((rise_ratio(r, t, &ch()).unwrap() - 0.9).abs() < 1e-6);
    }

    #[test]
    fn rise_ratio_matches_step_response() {
        let c = ch();
        let r = um_to_cm(50.0);
        let steady = steady_concentration(1.0, r, &c).unwrap();
        for t in [0.5, 5.0, 50.0, 500.0] {
            let via_step = step_response(r, t, 1.0, &c).unwrap() / steady;
            assert!((via_step / rise_ratio(r, t, &c).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn fall_time_matches_scan() {
        let r = um_to_cm(50.0);
        let t0 = 3.75 * 3600.0;
        let s = fall_time(r, t0, &ch(), 0.1).unwrap();
        let scan = scan_fall(r, t0, 0.1, 0.01, 400.0);
        assert!((s - scan).abs() <= 0.01, "{s} vs {scan}");
        assert!((fall_ratio(r, t0, s, &ch()).unwrap() - 0.1).abs() < 1e-9);
        // the constant-source approximation only holds for t0 far beyond r²/D
        let asymptotic = rise_time(r, &ch(), 0.9).unwrap();
        assert!((asymptotic - 79.16).abs() < 0.01);
        let long = fall_time(r, 1e12, &ch(), 0.1).unwrap();
        assert!((long / asymptotic - 1.0).abs() < 1e-3);
        assert!(s < asymptotic);
    }

    #[test]
    fn fall_time_near_one_threshold_is_zero() {
        let r = um_to_cm(50.0);
        assert_eq!(fall_time(r, 3.75 * 3600.0, &ch(), 0.999).unwrap(), 0.0);
        let s = fall_time(r, 3.75 * 3600.0, &ch(), 0.95).unwrap();
        assert!(s < 1.0);
    }

    #[test]
    fn reception_delay_examples() {
        let k = KineticParams::default();
        let t = reception_delay(100.0, &k).unwrap();
        assert!((t - 3.0 * (1.0 / 0.14 + 60.0 + 10.0)).abs() < 1e-9);
        assert!((t - 231.4).abs() < 0.1);
        // order of magnitude agreement with the quoted three hours
        let ratio = (t / 60.0) / REFERENCE_RECEPTION_HOURS;
        assert!(ratio > 0.1 && ratio < 10.0);
        assert!((reception_delay(200.0, &k).unwrap() / t - 1.0).abs() < 0.05);
        let fast = KineticParams { b1: f64::INFINITY, b2: f64::INFINITY, ..k };
        assert!((reception_delay(100.0, &fast).unwrap() - 3.0 / 0.14).abs() < 1e-12);
        assert!(reception_delay(0.0, &k).is_err());
    }

    #[test]
    fn breakdown_and_rate() {
        let k = KineticParams::default();
        let d = delay_breakdown(um_to_cm(50.0), 100.0, &k, &ch(), 0.9, 0.1).unwrap();
        assert!(d.t_rise > 0.0 && d.t_fall > 0.0 && d.t_reception > 0.0);
        assert!((d.t_total - (d.t_rise + 60.0 * d.t_reception + d.t_fall)).abs() < 1e-9);
        assert_eq!(d.t_stimulation, d.t_rise + 60.0 * d.t_reception);
        assert_eq!(bits_per_hour(0.0, &d), 0.0);
        let double = DelayBreakdown { t_total: 2.0 * d.t_total, ..d };
        assert!((bits_per_hour(5.0, &double) * 2.0 - bits_per_hour(5.0, &d)).abs() < 1e-12);
    }

    #[test]
    fn total_delay_increases_with_distance() {
        let k = KineticParams::default();
        let mut prev = 0.0;
        for um in [5.0, 10.0, 25.0, 50.0, 100.0, 200.0] {
            let d = delay_breakdown(um_to_cm(um), 100.0, &k, &ch(), 0.9, 0.1).unwrap();
            assert!(d.t_total > prev);
            prev = d.t_total;
        }
    }

    #[test]
    fn fall_time_scales_with_distance_squared() {
        // The residual concentration left by the pulse shifts the crossing by
        // a fraction proportional to r/sqrt(D t0), so t0 must be long.
        let t0 = 24.0 * 3600.0;
        let base = fall_time(um_to_cm(10.0), t0, &ch(), 0.1).unwrap();
        let far = fall_time(um_to_cm(20.0), t0, &ch(), 0.1).unwrap();
        assert!((far / base / 4.0 - 1.0).abs() < 0.02, "{}", far / base);
        let link = 3.75 * 3600.0;
        let short = fall_time(um_to_cm(20.0), link, &ch(), 0.1).unwrap() / fall_time(um_to_cm(10.0), link, &ch(), 0.1).unwrap();
        assert!(short < far / base);
    }

    proptest! {
        #[test]
        fn rise_time_round_trip(um in 1.0f64..500.0, thr in 0.01f64..0.99) {
            let r = um_to_cm(um);
            let t = rise_time(r, &ch(), thr).unwrap();
            prop_assert!((rise_ratio(r, t, &ch()).unwrap() - thr).abs() < 1e-6);
            let t2 = rise_time(2.0 * r, &ch(), thr).unwrap();
            prop_assert!((t2 / t - 4.0).abs() < 1e-9);
        }

        #[test]
        fn fall_time_decreasing_in_threshold(um in 5.0f64..200.0, a in 0.02f64..0.5, d in 0.01f64..0.4) {
            let r = um_to_cm(um);
            let t0 = 3.0 * 3600.0;
            let lo = fall_time(r, t0, &ch(), a).unwrap();
            let hi = fall_time(r, t0, &ch(), a + d).unwrap();
            prop_assert!(hi < lo);
        }

        #[test]
        fn rise_ratio_monotone(t in 0.1f64..1e4, d in 0.1f64..100.0) {
            let r = um_to_cm(50.0);
            prop_assert!(rise_ratio(r, t, &ch()).unwrap() <= rise_ratio(r, t + d, &ch()).unwrap());
        }
    }
}
