//! Adaptive PI controller.
//!
//! The plant `J·ẋ = −B·x + u` has unknown `J`, `B`. The control law
//! `u = B̂·x + Ĵ·e1 + K·e2` with
//!
//! ```text
//! e  = x_m − x
//! e1 = ẋ_m + λ·e
//! e2 = e + λ·∫e
//! ```
//!
//! gives `J·ė2 = −K·e2 − J̃·e1 − B̃·x`, and the gradient laws
//! `dĴ/dt = γ1·e1·e2`, `dB̂/dt = γ2·x·e2` make
//! `V = ½·(e2² + (J̃²/γ1 + B̃²/γ2)/J)` a Lyapunov function with
//! `V̇ = −(K/J)·e2²`. `V` is only positive definite when `γi·J > 0`, so with
//! `J < 0` the adaptation rates must be negative.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::plant::LinearPlant;

/// Adaptation rates and PI gains. The rates are stored with their sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveGains {
    pub gamma1: f64,
    pub gamma2: f64,
    pub k: f64,
    pub lambda: f64,
}

impl AdaptiveGains {
    /// Builds gains from rate magnitudes, taking the sign of `j_nom` so that
    /// `γi·J > 0` holds whenever the true `J` shares its sign.
    pub fn from_magnitudes(
        gamma1: f64,
        gamma2: f64,
        k: f64,
        lambda: f64,
        j_nom: f64,
    ) -> Result<Self> {
        for (name, g) in [("gamma1", gamma1), ("gamma2", gamma2)] {
            if !(g.is_finite() && g > 0.0) {
                return Err(invalid(name, format!("magnitude must be positive, got {g}")));
            }
        }
        if !(j_nom.is_finite() && j_nom != 0.0) {
            return Err(invalid("J_nom", "must be non-zero"));
        }
        let sign = j_nom.signum();
        let gains = Self {
            gamma1: sign * gamma1,
            gamma2: sign * gamma2,
            k,
            lambda,
        };
        gains.check_sign(j_nom)?;
        if !(k.is_finite() && k < 0.0) {
            return Err(invalid("K", format!("must be negative, got {k}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid("lambda", format!("must be positive, got {lambda}")));
        }
        Ok(gains)
    }

    /// Positivity condition `γi·J > 0` of the Lyapunov function.
    pub fn check_sign(&self, j: f64) -> Result<()> {
        if (self.gamma1 * j).partial_cmp(&0.0) != Some(Ordering::Greater) {
            return Err(invalid("gamma1", format!("gamma1·J must be positive, gamma1 = {}, J = {j}", self.gamma1)));
        }
        if (self.gamma2 * j).partial_cmp(&0.0) != Some(Ordering::Greater) {
            return Err(invalid("gamma2", format!("gamma2·J must be positive, gamma2 = {}, J = {j}", self.gamma2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdaptiveState {
    pub j_hat: f64,
    pub b_hat: f64,
    /// Running integral of `e`, °C·s.
    pub e_int: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorSignals {
    pub e: f64,
    pub e1: f64,
    pub e2: f64,
}

pub fn tracking_errors(x: f64, x_m: f64, dx_m: f64, e_int: f64, lambda: f64) -> ErrorSignals {
    let e = x_m - x;
    ErrorSignals {
        e,
        e1: dx_m + lambda * e,
        e2: e + lambda * e_int,
    }
}

pub fn control_input(st: &AdaptiveState, x: f64, err: &ErrorSignals, k: f64) -> f64 {
    st.b_hat * x + st.j_hat * err.e1 + k * err.e2
}

/// `(dĴ/dt, dB̂/dt)`.
pub fn adaptation_derivatives(g: &AdaptiveGains, err: &ErrorSignals, x: f64) -> (f64, f64) {
    (g.gamma1 * err.e1 * err.e2, g.gamma2 * x * err.e2)
}

/// Stability Lyapunov function of the adaptive loop against the true plant.
pub fn lyapunov_v(
    e2: f64,
    j_hat: f64,
    b_hat: f64,
    truth: &LinearPlant,
    g: &AdaptiveGains,
) -> Result<f64> {
    g.check_sign(truth.j)?;
    Ok(lyapunov_v_unchecked(e2, j_hat, b_hat, truth, g))
}

pub(crate) fn lyapunov_v_unchecked(
    e2: f64,
    j_hat: f64,
    b_hat: f64,
    truth: &LinearPlant,
    g: &AdaptiveGains,
) -> f64 {
    let j_err = j_hat - truth.j;
    let b_err = b_hat - truth.b;
    0.5 * (e2 * e2 + (j_err * j_err / g.gamma1 + b_err * b_err / g.gamma2) / truth.j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::step_rk4;
    use approx::assert_relative_eq;

    fn design_gains() -> AdaptiveGains {
        AdaptiveGains::from_magnitudes(5.0, 1.0, -1.0, 0.3, -2.79).unwrap()
    }

    #[test]
    fn rates_take_sign_of_plant() {
        let g = design_gains();
        assert_eq!((g.gamma1, g.gamma2), (-5.0, -1.0));
        assert!(AdaptiveGains::from_magnitudes(-5.0, 1.0, -1.0, 0.3, -2.79).is_err());
        assert!(AdaptiveGains::from_magnitudes(5.0, 1.0, 1.0, 0.3, -2.79).is_err());
        assert!(AdaptiveGains::from_magnitudes(5.0, 1.0, -1.0, -0.3, -2.79).is_err());
    }

    #[test]
    fn error_signals() {
        let z = tracking_errors(0.4, 0.4, 0.0, 0.0, 0.3);
        assert_eq!((z.e, z.e1, z.e2), (0.0, 0.0, 0.0));

        let s = tracking_errors(0.5, 1.0, 0.2, 2.0, 0.3);
        assert_relative_eq!(s.e, 0.5);
        assert_relative_eq!(s.e1, 0.35);
        assert_relative_eq!(s.e2, 1.1);

        let s = tracking_errors(0.5, 1.0, 0.2, 2.0, 0.0);
        assert_eq!(s.e2, s.e);
    }

    #[test]
    fn control_law() {
        let st = AdaptiveState { j_hat: -2.79, b_hat: -0.07, e_int: 0.0 };
        assert_eq!(control_input(&st, 0.0, &ErrorSignals::default(), -1.0), 0.0);
        let err = ErrorSignals { e: 0.0, e1: 0.05, e2: 0.2 };
        assert_relative_eq!(control_input(&st, 0.1, &err, -1.0), -0.3465, epsilon = 1e-15);
    }

    #[test]
    fn adaptation_freezes_without_error() {
        let err = ErrorSignals { e: 0.3, e1: 0.1, e2: 0.0 };
        assert_eq!(adaptation_derivatives(&design_gains(), &err, 0.2), (0.0, 0.0));
        let err = ErrorSignals { e: 0.0, e1: 0.1, e2: 0.2 };
        let (dj, _) = adaptation_derivatives(&design_gains(), &err, 0.0);
        assert_relative_eq!(dj, -0.1, epsilon = 1e-15);
    }

    #[test]
    fn lyapunov_values() {
        let truth = LinearPlant::new(-2.79, -0.07).unwrap();
        let g = AdaptiveGains { gamma1: -1.0, gamma2: -1.0, k: -1.0, lambda: 0.3 };
        assert_eq!(lyapunov_v(0.0, truth.j, truth.b, &truth, &g).unwrap(), 0.0);
        assert_eq!(lyapunov_v(1.0, truth.j, truth.b, &truth, &g).unwrap(), 0.5);
        let v = lyapunov_v(0.0, truth.j + 0.1, truth.b + 0.2, &truth, &g).unwrap();
        assert_relative_eq!(v, 0.5 * (0.01 + 0.04) / 2.79, epsilon = 1e-15);
        assert!((v - 0.00896).abs() < 1e-5);

        let wrong = AdaptiveGains { gamma1: 1.0, ..g };
        assert!(lyapunov_v(0.0, 0.0, 0.0, &truth, &wrong).is_err());
    }

    /// Perfect estimates remove the parameter-error terms, leaving
    /// `ė2 = −(K/J)·e2`, which the closed loop must reproduce.
    #[test]
    fn perfect_estimates_give_pure_error_decay() {
        let truth = LinearPlant::new(-3.1, -0.085).unwrap();
        let (k, lambda) = (-1.0, 0.3);
        let st = AdaptiveState { j_hat: truth.j, b_hat: truth.b, e_int: 0.0 };
        // Reference trajectory x_m = 0.2 held constant, so ẋ_m = 0.
        let x_m = 0.2;
        let rhs = |_: f64, s: &[f64; 2]| {
            let err = tracking_errors(s[0], x_m, 0.0, s[1], lambda);
            let u = control_input(&st, s[0], &err, k);
            [truth.derivative(s[0], u), err.e]
        };
        let e2 = |s: &[f64; 2]| (x_m - s[0]) + lambda * s[1];
        let dt = 0.005;
        let mut s = [0.0, 0.0];
        let start = e2(&s);
        for i in 0..2000 {
            s = step_rk4(i as f64 * dt, &s, dt, rhs).unwrap();
        }
        let expected = start * (-(k / truth.j) * 10.0).exp();
        assert_relative_eq!(e2(&s), expected, max_relative = 1e-8);
    }

    /// Along closed-loop trajectories with adaptation, `V` must not grow and
    /// its rate must equal `−(K/J)·e2²`.
    #[test]
    fn lyapunov_derivative_matches_closed_form() {
        let truth = LinearPlant::new(-3.0969, -0.0854).unwrap();
        let g = design_gains();
        let x_m = -0.3;
        // state: x, e_int, Ĵ, B̂
        let rhs = |_: f64, s: &[f64; 4]| {
            let st = AdaptiveState { j_hat: s[2], b_hat: s[3], e_int: s[1] };
            let err = tracking_errors(s[0], x_m, 0.0, s[1], g.lambda);
            let u = control_input(&st, s[0], &err, g.k);
            let (dj, db) = adaptation_derivatives(&g, &err, s[0]);
            [truth.derivative(s[0], u), err.e, dj, db]
        };
        let v = |s: &[f64; 4]| {
            let e2 = (x_m - s[0]) + g.lambda * s[1];
            lyapunov_v(e2, s[2], s[3], &truth, &g).unwrap()
        };
        let dt = 0.001;
        let mut s = [0.0, 0.0, -2.79, -0.07];
        for i in 0..5000 {
            let next = step_rk4(i as f64 * dt, &s, dt, rhs).unwrap();
            assert!(v(&next) <= v(&s) + 1e-12);
            if i % 500 == 0 {
                let e2 = (x_m - s[0]) + g.lambda * s[1];
                let fd = (v(&next) - v(&s)) / dt;
                let exact = -(g.k / truth.j) * e2 * e2;
                assert!((fd - exact).abs() <= 1e-3 * exact.abs() + 1e-12, "{fd} {exact}");
            }
            s = next;
        }
    }
}
