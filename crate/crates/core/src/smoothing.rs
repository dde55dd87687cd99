//! Smooth floor approximation built from a double-exponential step.
//!
//! The floor function is approximated on an integer interval `[a, b]` by
//! stacking one smoothed unit step per interior integer:
//!
//! ```text
//! floor(x) ~ a + sum over q in (a, b) of exp(-exp(-tau * (x - q)))
//! ```
//!
//! Each term is a C-infinity approximation of the indicator of `[q, inf)`,
//! sharpened by the factor `tau`. The sum is monotone increasing, maps
//! `[a, b]` into `[a, b]`, and its derivative is negligible away from the
//! integers, so the plateaus of the true floor survive the smoothing.

/// Smoothed Heaviside step with threshold `q`: `exp(-exp(-tau * (x - q)))`.
///
/// Strictly increasing in `x`, equal to `exp(-1)` at `x == q`, and saturating
/// to 0 or 1 following ordinary floating-point underflow.
pub fn smooth_heaviside(tau: f64, q: f64, x: f64) -> f64 {
    debug_assert!(tau > 0.0, "strengthening factor must be positive");
    (-(-tau * (x - q)).exp()).exp()
}

/// Derivative of [`smooth_heaviside`] with respect to `x`.
pub fn smooth_heaviside_derivative(tau: f64, q: f64, x: f64) -> f64 {
    let inner = (-tau * (x - q)).exp();
    tau * inner * (-inner).exp()
}

/// Smooth floor approximation on an integer interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FloorApprox {
    /// Strengthening factor; larger means sharper steps.
    pub tau: f64,
    /// Left end of the approximation interval.
    pub a: i64,
    /// Right end of the approximation interval.
    pub b: i64,
}

/// Beyond this value of `tau * (x - q)` a step term is 1 to machine
/// precision; below its negation the term is 0. Skipping those terms makes an
/// evaluation O(1) regardless of `b - a`.
const SATURATION: f64 = 40.0;

impl FloorApprox {
    /// A smooth floor on `[a, b]` with strengthening factor `tau`.
    ///
    /// Panics if `tau <= 0` or `a >= b`.
    pub fn new(tau: f64, a: i64, b: i64) -> Self {
        assert!(tau > 0.0, "strengthening factor must be positive");
        assert!(a < b, "approximation interval must satisfy a < b");
        Self { tau, a, b }
    }

    /// Clamps `x` into `[a, b]`, where the step sum is defined.
    fn clamp(&self, x: f64) -> f64 {
        let (lo, hi) = (self.a as f64, self.b as f64);
        if x < lo || x > hi {
            log::warn!(
                "smooth floor input {x} outside [{lo}, {hi}]; clamping",
            );
            x.clamp(lo, hi)
        } else {
            x
        }
    }

    /// Smoothed floor value at `x`.
    ///
    /// Inputs outside `[a, b]` are clamped (and logged). The result lies in
    /// `[a, b - 1]` and increases monotonically with `x`. Integer inputs do
    /// not map to integers: at `x = q` the step centered at `q` contributes
    /// `exp(-1)` rather than 1.
    pub fn value(&self, x: f64) -> f64 {
        let x = self.clamp(x);
        // q below this contributes exactly 1, q above the window contributes 0
        let window = SATURATION / self.tau;
        let q_lo = (self.a + 1).max((x - window).ceil() as i64);
        let q_hi = (self.b - 1).min((x + window).floor() as i64);
        let saturated = (q_lo - (self.a + 1)).max(0) as f64;
        let mut total = self.a as f64 + saturated;
        let mut q = q_lo;
        while q <= q_hi {
            total += smooth_heaviside(self.tau, q as f64, x);
            q += 1;
        }
        total
    }

    /// Analytic derivative of [`FloorApprox::value`] at `x`.
    ///
    /// Zero outside `[a, b]` (the clamped value is constant there).
    pub fn derivative(&self, x: f64) -> f64 {
        let (lo, hi) = (self.a as f64, self.b as f64);
        if x < lo || x > hi {
            return 0.0;
        }
        let window = SATURATION / self.tau;
        let q_lo = (self.a + 1).max((x - window).ceil() as i64);
        let q_hi = (self.b - 1).min((x + window).floor() as i64);
        let mut total = 0.0;
        let mut q = q_lo;
        while q <= q_hi {
            total += smooth_heaviside_derivative(self.tau, q as f64, x);
            q += 1;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn standard() -> FloorApprox {
        FloorApprox::new(75.0, -5, 5)
    }

    #[test]
    fn heaviside_at_threshold_is_inverse_e() {
        for tau in [1.0, 75.0, 300.0] {
            assert_relative_eq!(smooth_heaviside(tau, 2.0, 2.0), (-1.0f64).exp());
        }
    }

    #[test]
    fn heaviside_saturates_on_both_sides() {
        // exp(-15) < 1e-6, so the step at 0 is within 1e-6 of 1 at x = 0.2
        assert!((smooth_heaviside(75.0, 0.0, 0.2) - 1.0).abs() < 1e-6);
        // exp(-exp(15)) underflows to exactly 0
        assert!(smooth_heaviside(75.0, 0.0, -0.2) < 1e-300);
    }

    #[test]
    fn floor_matches_midpoint_values() {
        let fa = standard();
        assert!((fa.value(2.5) - 2.0).abs() < 1e-6);
        // left endpoint: all steps are (numerically) off
        assert!((fa.value(-5.0) - (-5.0)).abs() < 1e-6);
    }

    #[test]
    fn integer_input_does_not_map_to_integer() {
        // at x = 3 the step at q = 3 contributes exp(-1), all q <= 2 are 1,
        // all q >= 4 are 0, hence the value is 2 + exp(-1) (plus underflow
        // dust), strictly between 2 and 3
        let fa = standard();
        let expected: f64 = {
            let mut total = -5.0;
            for q in -4..=4 {
                total += smooth_heaviside(75.0, q as f64, 3.0);
            }
            total
        };
        let got = fa.value(3.0);
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert_relative_eq!(got, 2.0 + (-1.0f64).exp(), epsilon = 1e-9);
        assert!(got.fract() != 0.0);
    }

    #[test]
    fn windowed_sum_equals_full_sum() {
        let fa = standard();
        for i in 0..200 {
            let x = -5.0 + 10.0 * (i as f64) / 199.0;
            let mut full = -5.0;
            for q in -4..=4 {
                full += smooth_heaviside(75.0, q as f64, x);
            }
            assert_relative_eq!(fa.value(x), full, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn accuracy_away_from_integers() {
        let fa = standard();
        let mut worst = 0.0f64;
        for i in 0..10_000 {
            let x = -5.0 + 10.0 * (i as f64) / 9_999.0;
            if (x - x.round()).abs() < 0.2 {
                continue;
            }
            worst = worst.max((fa.value(x) - x.floor()).abs());
        }
        assert!(worst <= 1e-6, "worst error {worst}");
    }

    #[test]
    fn derivative_small_between_integers_and_tau_over_e_at_knots() {
        let fa = standard();
        assert!(fa.derivative(0.5).abs() <= 1e-6);
        assert!(fa.derivative(-2.5).abs() <= 1e-6);
        assert_relative_eq!(fa.derivative(2.0), 75.0 * (-1.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let fa = standard();
        let mut rng_state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            // xorshift; plenty for test point placement
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        let h = 1e-7;
        for _ in 0..100 {
            let x = -4.9 + 9.8 * next();
            let fd = (fa.value(x + h) - fa.value(x - h)) / (2.0 * h);
            let an = fa.derivative(x);
            let scale = an.abs().max(1e-3);
            assert!(
                (fd - an).abs() / scale < 1e-5,
                "x={x}: fd={fd} analytic={an}"
            );
        }
    }

    #[test]
    fn clamping_outside_interval() {
        let fa = standard();
        assert_relative_eq!(fa.value(12.0), fa.value(5.0));
        assert_relative_eq!(fa.value(-12.0), fa.value(-5.0));
        assert_eq!(fa.derivative(12.0), 0.0);
    }

    proptest! {
        #[test]
        fn monotone_and_in_range(a in -0.5f64..0.5, spread in 0.0f64..9.0) {
            let fa = standard();
            let x1 = -4.7 + a + spread * 0.45;
            let x2 = x1 + 0.013 + spread * 0.01;
            prop_assert!(fa.value(x1) <= fa.value(x2));
            prop_assert!(fa.value(x1) >= -5.0);
            prop_assert!(fa.value(x1) < 5.0);
        }
    }
}
