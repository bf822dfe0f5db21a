//! Algebraic identities linking flows, currents, and voltage products.
//!
//! For a branch with series admittance Y = 1/Z, half charging c, and
//! complex tap T = tau exp(i shift), write u = V_f / T for the voltage
//! the series element sees, a = |u|^2, b = |V_t|^2, W = u V_t*,
//! S = u I_f* for the sending-end flow, and l = |I_f|^2 for the squared
//! current magnitude of I_f = (Y + ic) u - Y V_t. Four identities hold
//! for every operating point:
//!
//! ```text
//! (1) |S|^2 = |Y|^2 (a^2 - 2 a Re W + |W|^2) - c^2 a^2 - 2 c a Im S
//! (2) |W|^2 = (1 - 2 c Im Z) a^2 - 2 a Re(Z* S)
//!             + |Z|^2 (|S|^2 + c^2 a^2 + 2 c a Im S)
//! (3)     l = |Y|^2 (a + b - 2 Re W) - c^2 a - 2 c Im S
//! (4)     b = (1 - 2 c Im Z) a - 2 Re(Z* S)
//!             + |Z|^2 (l + c^2 a + 2 c Im S)
//! ```
//!
//! Identity (3) is the reason the voltage-product and current cone
//! closures describe the same set: it expresses the current variable as
//! an affine function of the lifted products, and (4) does the reverse
//! for the receiving-end square. The plain forms are the same four with
//! c = 0 and T = 1, the shape they take for an ideal line.
//!
//! [`run_identity_suite`] draws seeded random electrical data and
//! reports the largest absolute residual over all eight forms; anything
//! above roundoff (about 1e-12 at these magnitudes) indicates a broken
//! derivation, and tests pin the suite at 1e-9.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One electrical sample: endpoint voltages, series admittance, half
/// charging susceptance, and the off-nominal complex tap.
#[derive(Debug, Clone, Copy)]
pub struct FlowSample {
    pub vf: Complex64,
    pub vt: Complex64,
    pub y: Complex64,
    pub half_charge: f64,
    pub tap: f64,
    pub shift: f64,
}

/// Residuals of the four identities at `sample`. With `extended` false
/// the charging and tap are ignored (c = 0, T = 1), giving the plain
/// forms.
pub fn check_flow_identities(sample: &FlowSample, extended: bool) -> [f64; 4] {
    let (c, t) = if extended {
        (sample.half_charge, Complex64::from_polar(sample.tap, sample.shift))
    } else {
        (0.0, Complex64::new(1.0, 0.0))
    };
    let y = sample.y;
    let z = y.inv();
    let u = sample.vf / t;
    let i_f = (y + Complex64::new(0.0, c)) * u - y * sample.vt;
    let s = u * i_f.conj();
    let l = i_f.norm_sqr();
    let w = u * sample.vt.conj();
    let a = u.norm_sqr();
    let b = sample.vt.norm_sqr();
    let y2 = y.norm_sqr();
    let z2 = z.norm_sqr();

    let r1 = s.norm_sqr()
        - (y2 * (a * a - 2.0 * a * w.re + w.norm_sqr()) - c * c * a * a - 2.0 * c * a * s.im);
    let r2 = w.norm_sqr()
        - ((1.0 - 2.0 * c * z.im) * a * a - 2.0 * a * (z.conj() * s).re
            + z2 * (s.norm_sqr() + c * c * a * a + 2.0 * c * a * s.im));
    let r3 = l - (y2 * (a + b - 2.0 * w.re) - c * c * a - 2.0 * c * s.im);
    let r4 = b
        - ((1.0 - 2.0 * c * z.im) * a - 2.0 * (z.conj() * s).re
            + z2 * (l + c * c * a + 2.0 * c * s.im));
    [r1.abs(), r2.abs(), r3.abs(), r4.abs()]
}

/// Worst residuals over a seeded random sweep.
#[derive(Debug, Clone, Copy)]
pub struct IdentitySuite {
    pub samples: usize,
    /// Largest residual of the four extended identities.
    pub max_extended: f64,
    /// Largest residual of the four plain (c = 0, T = 1) identities.
    pub max_plain: f64,
}

impl IdentitySuite {
    pub fn max(&self) -> f64 {
        self.max_extended.max(self.max_plain)
    }
}

/// Draws `samples` random branches and operating points and evaluates
/// all eight identity forms. Ranges keep every quantity within a few
/// orders of unity so the 1e-9 acceptance threshold is meaningful:
/// r in [0.01, 0.3], x in [0.05, 1.0], c in [0, 0.35],
/// tap in [0.9, 1.1], shift within 5 degrees, |V| in [0.5, 1.5],
/// angles free.
pub fn run_identity_suite(seed: u64, samples: usize) -> IdentitySuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = IdentitySuite { samples, max_extended: 0.0, max_plain: 0.0 };
    for _ in 0..samples {
        let r = rng.gen_range(0.01..0.3);
        let x = rng.gen_range(0.05..1.0);
        let sample = FlowSample {
            vf: Complex64::from_polar(
                rng.gen_range(0.5..1.5),
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            ),
            vt: Complex64::from_polar(
                rng.gen_range(0.5..1.5),
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            ),
            y: Complex64::new(r, x).inv(),
            half_charge: rng.gen_range(0.0..0.35),
            tap: rng.gen_range(0.9..1.1),
            shift: rng.gen_range(-0.0873..0.0873),
        };
        for res in check_flow_identities(&sample, true) {
            suite.max_extended = suite.max_extended.max(res);
        }
        for res in check_flow_identities(&sample, false) {
            suite.max_plain = suite.max_plain.max(res);
        }
    }
    suite
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_picked_sample_satisfies_all_forms() {
        let sample = FlowSample {
            vf: Complex64::from_polar(1.05, 0.3),
            vt: Complex64::from_polar(0.97, 0.1),
            y: Complex64::new(0.06, 0.4).inv(),
            half_charge: 0.12,
            tap: 1.04,
            shift: -0.02,
        };
        for res in check_flow_identities(&sample, true) {
            assert!(res < 1e-12, "extended residual {res}");
        }
        for res in check_flow_identities(&sample, false) {
            assert!(res < 1e-12, "plain residual {res}");
        }
    }

    #[test]
    fn seeded_sweep_stays_at_roundoff() {
        let suite = run_identity_suite(7, 500);
        assert_eq!(suite.samples, 500);
        assert!(suite.max() < 1e-10, "max residual {}", suite.max());
    }

    /// The suite must be able to see a wrong derivation: recompute
    /// identity (3) with the charging sign flipped and confirm the
    /// residual is far above the pass threshold.
    #[test]
    fn a_sign_error_would_be_caught() {
        let sample = FlowSample {
            vf: Complex64::new(1.0, 0.1),
            vt: Complex64::new(0.95, -0.05),
            y: Complex64::new(0.05, 0.5).inv(),
            half_charge: 0.2,
            tap: 1.03,
            shift: 0.01,
        };
        let c = sample.half_charge;
        let t = Complex64::from_polar(sample.tap, sample.shift);
        let u = sample.vf / t;
        let i_f = (sample.y + Complex64::new(0.0, c)) * u - sample.y * sample.vt;
        let s = u * i_f.conj();
        let l = i_f.norm_sqr();
        let w = u * sample.vt.conj();
        let (a, b) = (u.norm_sqr(), sample.vt.norm_sqr());
        let y2 = sample.y.norm_sqr();
        let flipped = l - (y2 * (a + b - 2.0 * w.re) - c * c * a + 2.0 * c * s.im);
        assert!(flipped.abs() > 1e-3, "flipped-sign residual {flipped}");
        assert!(check_flow_identities(&sample, true)[2] < 1e-12);
    }
}
