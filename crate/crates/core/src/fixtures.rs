//! Parameter sets of the worked examples used by the regression runner,
//! the acceptance tests and the benches.

use crate::model::BuckParams;

/// Voltage-mode design: 5 V in, 3 µs period, 1.2 µs on-time.
pub fn example1() -> BuckParams {
    BuckParams {
        r: 0.5,
        l: 2e-6,
        c: 20e-6,
        rc: 0.02,
        ri: 0.0,
        vs: 5.0,
        vc: 0.0,
    }
}

pub const EXAMPLE1_ON_TIME: f64 = 1.2e-6;
pub const EXAMPLE1_PERIOD: f64 = 3e-6;
/// Ramp slope that places both poles at −0.5 and −0.2.
pub const EXAMPLE2_RAMP: f64 = 9500.0;
/// Output voltage held fixed while the duty cycle varies.
pub const EXAMPLE4_VO: f64 = 2.0;
pub const EXAMPLE4_DUTY_RANGE: (f64, f64) = (0.2, 1.0);
/// Duty cycle held fixed in the on-time design example.
pub const EXAMPLE6_DUTY: f64 = 0.4;

/// Current-mode design: 13.2 V in, 1.04 µs period, 0.26 µs on-time.
pub fn example8() -> BuckParams {
    BuckParams {
        r: 10.0,
        l: 3.1e-6,
        c: 300e-6,
        rc: 4.5e-3,
        ri: 0.15,
        vs: 13.2,
        vc: 0.0,
    }
}

pub const EXAMPLE8_ON_TIME: f64 = 0.26e-6;
pub const EXAMPLE8_PERIOD: f64 = 1.04e-6;
/// Negative ramp that pushes one pole past +1.
pub const EXAMPLE9_RAMP: f64 = -1e5;
