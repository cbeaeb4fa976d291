//! Lyapunov-based reference governor for the reference model.
//!
//! The governor shapes the raw command `x_d` into `x̃_d` so that the
//! reference model state stays in the sublevel set
//! `{ V(z_m − z̄(x̃_d)) ≤ Γ_ε(x̃_d) }`, where `V(w) = wᵀPw`,
//! `z̄(x̃_d) = (x̃_d, 0)` is the equilibrium for command `x̃_d`, and `Γ_ε` is
//! the smallest value `V` takes on the faces `x_m = ±(x̄ − ε)`. Because the
//! sublevel set is invariant for constant `x̃_d` and touches those faces at
//! most, `|x_m| ≤ x̄ − ε` follows.
//!
//! Each sample the governor moves from the held value toward the raw command,
//! `x̃_d = x̃_d⁻ + κ·(x_d − x̃_d⁻)`, choosing the largest `κ ∈ [−Δ, 1]` that
//! keeps the state inside. Negative `κ` lets `x̃_d` back away when the
//! buffer `ε = ε0 + k_ε·e²` grows with the adaptive tracking error `e`.

use log::debug;
use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::refmodel::{is_spd, RefModelState};

/// Number of grid points in the descending κ scan.
pub const KAPPA_GRID_POINTS: usize = 64;
/// Bracket width at which κ bisection stops.
pub const KAPPA_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorConfig {
    /// Constraint `|x| ≤ x̄`, °C.
    pub x_bar: f64,
    /// Static buffer, °C.
    pub eps0: f64,
    /// Buffer growth with the squared tracking error, 1/°C.
    pub k_eps: f64,
    /// Lower κ bound is `−delta`.
    pub delta: f64,
    /// Saturation limit on the governed command, °C.
    pub x_bar_d: f64,
    /// Governor sample period, s.
    pub sample_period: f64,
}

impl Default for GovernorConfig {
    fn default() -> Self {
        Self {
            x_bar: 0.5,
            eps0: 0.055,
            k_eps: 5.0,
            delta: 1.0,
            x_bar_d: 0.5 - 0.055,
            sample_period: 0.1,
        }
    }
}

impl GovernorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_bar.is_finite() && self.x_bar > 0.0) {
            return Err(invalid("x_bar", format!("must be positive, got {}", self.x_bar)));
        }
        if !(self.eps0 > 0.0 && self.eps0 < self.x_bar) {
            return Err(invalid(
                "eps0",
                format!(
                    "requires 0 < eps0 < x_bar so the tightened set is non-empty (eps0 = {}, x_bar = {})",
                    self.eps0, self.x_bar
                ),
            ));
        }
        if !(self.k_eps.is_finite() && self.k_eps >= 0.0) {
            return Err(invalid("k_eps", format!("must be non-negative, got {}", self.k_eps)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(invalid("delta", format!("must be positive, got {}", self.delta)));
        }
        if !(self.x_bar_d.is_finite()
            && self.x_bar_d >= 0.0
            && self.x_bar_d <= self.x_bar - self.eps0 + 1e-12)
        {
            return Err(invalid(
                "x_bar_d",
                format!(
                    "requires 0 <= x_bar_d <= x_bar - eps0 = {} (got {})",
                    self.x_bar - self.eps0,
                    self.x_bar_d
                ),
            ));
        }
        if !(self.sample_period.is_finite() && self.sample_period > 0.0) {
            return Err(invalid("sample_period", "must be positive"));
        }
        Ok(())
    }

    /// Bounds on κ as `(lower, upper)`.
    pub fn kappa_range(&self) -> (f64, f64) {
        (-self.delta, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GovernorState {
    /// Held governed command `x̃_d(t−1)`, before saturation.
    pub x_tilde_d_prev: f64,
    /// Last solved κ, `None` when that sample was infeasible.
    pub kappa_last: Option<f64>,
    pub infeasible: bool,
}

impl GovernorState {
    pub fn new(x_tilde_d0: f64) -> Self {
        Self {
            x_tilde_d_prev: x_tilde_d0,
            kappa_last: None,
            infeasible: false,
        }
    }
}

/// `ε = ε0 + k_ε·e²`.
pub fn buffer(cfg: &GovernorConfig, e: f64) -> f64 {
    cfg.eps0 + cfg.k_eps * e * e
}

/// Threshold `Γ_ε(x̃_d)`: the minimum of `V` over `x_m = ±(x̄ − ε)`.
///
/// On a face `x_m = c` the offset `w1 = c − x̃_d` is fixed and minimizing
/// over `e_Im` leaves the Schur complement, `w1²·det(P)/P22`. Zero when the
/// tightened set is empty or the equilibrium is not strictly inside it.
pub fn gamma(p: &Matrix2<f64>, x_tilde_d: f64, x_bar: f64, eps: f64) -> f64 {
    let limit = x_bar - eps;
    if limit <= 0.0 || x_tilde_d.abs() >= limit {
        return 0.0;
    }
    let upper = limit - x_tilde_d;
    let lower = -limit - x_tilde_d;
    let c2 = (upper * upper).min(lower * lower);
    c2 * p.determinant() / p[(1, 1)]
}

/// `V = (z_m − z̄)ᵀ P (z_m − z̄)` with `z̄ = (x̃_d, 0)`.
pub fn lyapunov_value(p: &Matrix2<f64>, z_m: &RefModelState, x_tilde_d: f64) -> f64 {
    let w1 = z_m.x_m - x_tilde_d;
    let w2 = z_m.e_im;
    p[(0, 0)] * w1 * w1 + 2.0 * p[(0, 1)] * w1 * w2 + p[(1, 1)] * w2 * w2
}

/// Result of one κ solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaSolution {
    /// `None` if no κ in range satisfies the constraint.
    pub kappa: Option<f64>,
    pub x_tilde_d: f64,
    /// `V` and `Γ` at the returned `x̃_d`.
    pub v: f64,
    pub gamma: f64,
}

impl KappaSolution {
    pub fn is_feasible(&self) -> bool {
        self.kappa.is_some()
    }
}

/// Finds the largest `κ ∈ [−Δ, 1]` with `V(κ) − Γ(κ) ≤ 0` and advances the
/// governor state.
///
/// `g(κ) = V − Γ` is convex and piecewise quadratic in κ, so the feasible set
/// is an interval. `κ = 1` is tried first. Otherwise a descending grid scan
/// brackets the upper end of the interval and bisection refines it to
/// [`KAPPA_TOLERANCE`]. If the scan misses a narrow interval, a golden-section
/// search on `g` locates it. With no feasible κ the held command is kept and
/// the state is flagged infeasible.
pub fn solve_kappa(
    gs: &mut GovernorState,
    cfg: &GovernorConfig,
    p: &Matrix2<f64>,
    z_m: &RefModelState,
    x_d: f64,
    eps: f64,
) -> KappaSolution {
    let prev = gs.x_tilde_d_prev;
    let command = |kappa: f64| prev + kappa * (x_d - prev);
    let g = |kappa: f64| {
        let xt = command(kappa);
        lyapunov_value(p, z_m, xt) - gamma(p, xt, cfg.x_bar, eps)
    };
    let (lo, hi) = cfg.kappa_range();

    let kappa = if g(hi) <= 0.0 {
        Some(hi)
    } else {
        scan_kappa(&g, lo, hi).or_else(|| golden_kappa(&g, lo, hi))
    };

    let x_tilde_d = match kappa {
        Some(k) => command(k),
        None => prev,
    };
    gs.x_tilde_d_prev = x_tilde_d;
    gs.kappa_last = kappa;
    gs.infeasible = kappa.is_none();
    if gs.infeasible {
        debug!("governor infeasible: holding x_tilde_d = {x_tilde_d}, eps = {eps}");
    }
    KappaSolution {
        kappa,
        x_tilde_d,
        v: lyapunov_value(p, z_m, x_tilde_d),
        gamma: gamma(p, x_tilde_d, cfg.x_bar, eps),
    }
}

/// Descending scan from `hi` (known infeasible) to `lo`.
fn scan_kappa(g: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let step = (hi - lo) / (KAPPA_GRID_POINTS - 1) as f64;
    let mut above = hi;
    for i in 1..KAPPA_GRID_POINTS {
        let kappa = if i == KAPPA_GRID_POINTS - 1 {
            lo
        } else {
            hi - i as f64 * step
        };
        if g(kappa) <= 0.0 {
            return Some(bisect_upper(g, kappa, above));
        }
        above = kappa;
    }
    None
}

/// Shrinks `[feasible, infeasible]` onto the boundary and returns the
/// feasible end.
fn bisect_upper(g: &impl Fn(f64) -> f64, mut feasible: f64, mut infeasible: f64) -> f64 {
    while infeasible - feasible > KAPPA_TOLERANCE {
        let mid = 0.5 * (feasible + infeasible);
        if g(mid) <= 0.0 {
            feasible = mid;
        } else {
            infeasible = mid;
        }
    }
    feasible
}

fn golden_kappa(g: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > KAPPA_TOLERANCE {
        if gc <= 0.0 {
            return Some(bisect_upper(g, c, hi));
        }
        if gd <= 0.0 {
            return Some(bisect_upper(g, d, hi));
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - ratio * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + ratio * (b - a);
            gd = g(d);
        }
    }
    None
}

/// Clips the governed command to `±x̄_d`.
pub fn saturate(cfg: &GovernorConfig, x_tilde_d: f64) -> f64 {
    if x_tilde_d.abs() <= cfg.x_bar_d {
        x_tilde_d
    } else {
        cfg.x_bar_d.copysign(x_tilde_d)
    }
}

/// `V(z̃_m(t0)) ≤ Γ(x̃_d(t0))`.
pub fn check_initial_feasibility(
    p: &Matrix2<f64>,
    z_m0: &RefModelState,
    x_tilde_d0: f64,
    cfg: &GovernorConfig,
    eps: f64,
) -> bool {
    lyapunov_value(p, z_m0, x_tilde_d0) <= gamma(p, x_tilde_d0, cfg.x_bar, eps)
}

/// Everything the governor decided at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorSample {
    pub eps: f64,
    pub solution: KappaSolution,
    pub x_tilde_d_sat: f64,
}

/// Governor with its Lyapunov matrix and memory.
#[derive(Debug, Clone)]
pub struct Governor {
    cfg: GovernorConfig,
    p: Matrix2<f64>,
    state: GovernorState,
}

impl Governor {
    pub fn new(cfg: GovernorConfig, p: Matrix2<f64>, x_tilde_d0: f64) -> Result<Self> {
        cfg.validate()?;
        if !is_spd(&p) {
            return Err(Error::NotPositiveDefinite("P"));
        }
        Ok(Self {
            cfg,
            p,
            state: GovernorState::new(x_tilde_d0),
        })
    }

    pub fn config(&self) -> &GovernorConfig {
        &self.cfg
    }

    pub fn lyapunov_matrix(&self) -> &Matrix2<f64> {
        &self.p
    }

    pub fn state(&self) -> &GovernorState {
        &self.state
    }

    /// Fails with the offending `V` and `Γ` if the start is outside the
    /// sublevel set.
    pub fn ensure_feasible(&self, z_m: &RefModelState, e: f64) -> Result<()> {
        let eps = buffer(&self.cfg, e);
        let xt = self.state.x_tilde_d_prev;
        if check_initial_feasibility(&self.p, z_m, xt, &self.cfg, eps) {
            Ok(())
        } else {
            Err(Error::InitiallyInfeasible {
                v: lyapunov_value(&self.p, z_m, xt),
                gamma: gamma(&self.p, xt, self.cfg.x_bar, eps),
            })
        }
    }

    /// Runs one governor update: buffer from `e`, κ solve, saturation.
    pub fn sample(&mut self, z_m: &RefModelState, x_d: f64, e: f64) -> GovernorSample {
        let eps = buffer(&self.cfg, e);
        let solution = solve_kappa(&mut self.state, &self.cfg, &self.p, z_m, x_d, eps);
        GovernorSample {
            eps,
            solution,
            x_tilde_d_sat: saturate(&self.cfg, solution.x_tilde_d),
        }
    }
}
