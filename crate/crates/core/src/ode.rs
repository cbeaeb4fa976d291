//! Fixed-step classical Runge–Kutta.

use crate::error::{Error, Result};

/// One RK4 step of `ẏ = f(t, y)` from `(t, y)` to `t + dt`.
///
/// Fails if any stage or the result is non-finite.
pub fn step_rk4<const N: usize, F>(t: f64, y: &[f64; N], dt: f64, mut f: F) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    debug_assert!(dt > 0.0);
    let half = 0.5 * dt;
    let shifted = |k: &[f64; N], h: f64| -> [f64; N] {
        let mut out = *y;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += h * ki;
        }
        out
    };

    let k1 = checked(f(t, y), t)?;
    let k2 = checked(f(t + half, &shifted(&k1, half)), t)?;
    let k3 = checked(f(t + half, &shifted(&k2, half)), t)?;
    let k4 = checked(f(t + dt, &shifted(&k3, dt)), t)?;

    let mut next = *y;
    for i in 0..N {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    checked(next, t)
}

fn checked<const N: usize>(v: [f64; N], t: f64) -> Result<[f64; N]> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: "integrator state",
            t,
        })
    }
}
