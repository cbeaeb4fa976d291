//! Closed-loop simulation of plant, reference model, adaptive controller and
//! governor.
//!
//! The continuous state `(x, x_m, e_Im, e_int, Ĵ, B̂)` is advanced with
//! fixed-step RK4. The governor runs every `T_s` seconds at the start of the
//! integration step and its output `x̃'_d` is held until the next sample.

use log::info;
use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::adaptive::{
    adaptation_derivatives, control_input, lyapunov_v_unchecked, tracking_errors, AdaptiveGains,
    AdaptiveState, ErrorSignals,
};
use crate::error::{invalid, Error, Result};
use crate::governor::{buffer, gamma, lyapunov_value, saturate, Governor, GovernorConfig};
use crate::ode::step_rk4;
use crate::plant::{
    linearize_detailed, FuelCellParams, LinearPlant, Linearization, OperatingPoint,
    ThermalCoefficients,
};
use crate::refmodel::{solve_lyapunov, RefModelGains, RefModelState, StateSpace2};

/// Tolerance on `x̃_d − x_d` for the κ convergence check.
pub const KAPPA_CONVERGENCE_TOL: f64 = 1e-6;

/// Which model stands in for the true plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantModel {
    /// Perturbed linearization `J·ẋ = −B·x + u`.
    #[default]
    Linear,
    /// Full bilinear balance with `w_c = w_c° + u`. Perturbations are ignored.
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub k: f64,
    pub lambda: f64,
    /// Adaptation rate magnitudes; the sign is taken from `J_nom`.
    pub gamma1: f64,
    pub gamma2: f64,
    /// Initial estimates, defaulting to the nominal linearization.
    pub j_hat0: Option<f64>,
    pub b_hat0: Option<f64>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            k: -1.0,
            lambda: 0.3,
            gamma1: 5.0,
            gamma2: 1.0,
            j_hat0: None,
            b_hat0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InitialConditions {
    pub x: f64,
    pub x_m: f64,
    pub e_im: f64,
    pub e_int: f64,
    pub x_tilde_d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: FuelCellParams,
    pub operating_point: OperatingPoint,
    /// Relative perturbation of the true `J` and `B` from nominal.
    pub rel_j: f64,
    pub rel_b: f64,
    pub plant_model: PlantModel,
    pub controller: ControllerConfig,
    pub governor: GovernorConfig,
    pub q: Matrix2<f64>,
    pub duration: f64,
    pub dt: f64,
    /// Raw setpoint command, °C deviation from `T_st0`.
    pub x_d: f64,
    pub initial: InitialConditions,
    pub governed: bool,
    /// Safety monitor margin δ: the checked bound is `x̄ − (ε0 − δ)`.
    pub monitor_delta: f64,
    /// `|x(t_end) − x_d|` below this counts as settled.
    pub settle_tol: f64,
    /// Trailing window over which κ must have converged, s.
    pub convergence_window: f64,
    /// Abort if any of `|x|, |x_m|, |e2|, |Ĵ|, |B̂|` exceeds this.
    pub state_bound: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            params: FuelCellParams::default(),
            operating_point: OperatingPoint::default(),
            rel_j: 0.11,
            rel_b: 0.22,
            plant_model: PlantModel::Linear,
            controller: ControllerConfig::default(),
            governor: GovernorConfig::default(),
            q: Matrix2::identity(),
            duration: 100.0,
            dt: 0.01,
            x_d: -0.35,
            initial: InitialConditions::default(),
            governed: true,
            monitor_delta: 0.0525,
            settle_tol: 0.01,
            convergence_window: 10.0,
            state_bound: 1e3,
        }
    }
}

impl SimConfig {
    /// Governor samples per integration step count, `T_s / dt`.
    pub fn steps_per_sample(&self) -> Result<usize> {
        let ratio = self.governor.sample_period / self.dt;
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
            return Err(invalid(
                "sample_period",
                format!(
                    "must be a positive integer multiple of dt (T_s = {}, dt = {})",
                    self.governor.sample_period, self.dt
                ),
            ));
        }
        Ok(m as usize)
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.operating_point.validate()?;
        self.governor.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(invalid("duration", "must be at least one step"));
        }
        self.steps_per_sample()?;
        if !self.x_d.is_finite() {
            return Err(invalid("x_d", "must be finite"));
        }
        for (name, v) in [
            ("x0", self.initial.x),
            ("x_m0", self.initial.x_m),
            ("e_im0", self.initial.e_im),
            ("e_int0", self.initial.e_int),
            ("x_tilde_d0", self.initial.x_tilde_d),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        let g = &self.governor;
        if self.governed {
            let lower = if g.k_eps > 0.0 { 1.0 / (4.0 * g.k_eps) } else { f64::INFINITY };
            if !(self.monitor_delta > lower && self.monitor_delta < g.eps0) {
                return Err(invalid(
                    "monitor_delta",
                    format!(
                        "requires 1/(4 k_eps) < delta < eps0, i.e. {lower} < {} < {}",
                        self.monitor_delta, g.eps0
                    ),
                ));
            }
        }
        if !(self.settle_tol > 0.0 && self.convergence_window >= 0.0 && self.state_bound > 0.0) {
            return Err(invalid(
                "sim",
                "settle_tol and state_bound must be positive, convergence_window non-negative",
            ));
        }
        if !(self.q.iter().all(|v| v.is_finite())) {
            return Err(invalid("q", "must be finite"));
        }
        Ok(())
    }

    /// Safety bound checked on the plant state, `x̄ − (ε0 − δ)`.
    pub fn safety_bound(&self) -> f64 {
        self.governor.x_bar - (self.governor.eps0 - self.monitor_delta)
    }
}

/// Continuous state of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoopState {
    pub x: f64,
    pub x_m: f64,
    pub e_im: f64,
    pub e_int: f64,
    pub j_hat: f64,
    pub b_hat: f64,
}

impl LoopState {
    fn to_array(self) -> [f64; 6] {
        [self.x, self.x_m, self.e_im, self.e_int, self.j_hat, self.b_hat]
    }

    fn from_array(a: &[f64; 6]) -> Self {
        Self {
            x: a[0],
            x_m: a[1],
            e_im: a[2],
            e_int: a[3],
            j_hat: a[4],
            b_hat: a[5],
        }
    }

    pub fn reference(&self) -> RefModelState {
        RefModelState::new(self.x_m, self.e_im)
    }

    pub fn adaptive(&self) -> AdaptiveState {
        AdaptiveState {
            j_hat: self.j_hat,
            b_hat: self.b_hat,
            e_int: self.e_int,
        }
    }
}

/// The true plant the controller acts on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruePlant {
    Linear(LinearPlant),
    Bilinear {
        coefficients: ThermalCoefficients,
        t_st0: f64,
        t_in: f64,
        nominal_flow: f64,
    },
}

impl TruePlant {
    pub fn derivative(&self, x: f64, u: f64) -> f64 {
        match *self {
            TruePlant::Linear(p) => p.derivative(x, u),
            TruePlant::Bilinear {
                coefficients,
                t_st0,
                t_in,
                nominal_flow,
            } => coefficients.derivative(t_st0 + x, nominal_flow + u, t_in),
        }
    }
}

/// Signals computed alongside the derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSignals {
    pub dx_m: f64,
    pub errors: ErrorSignals,
    pub u: f64,
}

/// Right-hand side of the closed loop for a held governed command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoop {
    pub reference: StateSpace2,
    pub gains: AdaptiveGains,
    pub plant: TruePlant,
}

impl ClosedLoop {
    pub fn signals(&self, s: &LoopState, x_tilde_d_sat: f64) -> LoopSignals {
        let dz = self.reference.derivative(&s.reference(), x_tilde_d_sat);
        let errors = tracking_errors(s.x, s.x_m, dz[0], s.e_int, self.gains.lambda);
        let u = control_input(&s.adaptive(), s.x, &errors, self.gains.k);
        LoopSignals {
            dx_m: dz[0],
            errors,
            u,
        }
    }

    pub fn derivative(&self, s: &LoopState, x_tilde_d_sat: f64) -> LoopState {
        let dz = self.reference.derivative(&s.reference(), x_tilde_d_sat);
        let errors = tracking_errors(s.x, s.x_m, dz[0], s.e_int, self.gains.lambda);
        let u = control_input(&s.adaptive(), s.x, &errors, self.gains.k);
        let (dj, db) = adaptation_derivatives(&self.gains, &errors, s.x);
        LoopState {
            x: self.plant.derivative(s.x, u),
            x_m: dz[0],
            e_im: dz[1],
            e_int: errors.e,
            j_hat: dj,
            b_hat: db,
        }
    }

    /// One RK4 step with the governed command held.
    pub fn step(&self, t: f64, s: &LoopState, x_tilde_d_sat: f64, dt: f64) -> Result<LoopState> {
        let next = step_rk4(t, &s.to_array(), dt, |_, y| {
            self.derivative(&LoopState::from_array(y), x_tilde_d_sat).to_array()
        })?;
        Ok(LoopState::from_array(&next))
    }
}

/// One row of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub t: f64,
    pub x: f64,
    pub x_m: f64,
    pub e_im: f64,
    pub e: f64,
    pub e1: f64,
    pub e2: f64,
    pub j_hat: f64,
    pub b_hat: f64,
    pub u: f64,
    pub x_d: f64,
    pub x_tilde_d: f64,
    pub x_tilde_d_sat: f64,
    /// Last solved κ, NaN after an infeasible sample.
    pub kappa: f64,
    /// Buffer at this step, from the current `e`.
    pub eps: f64,
    pub v_gov: f64,
    pub gamma: f64,
    pub v_adapt: f64,
    #[serde(with = "flag")]
    pub infeasible: bool,
    #[serde(with = "flag")]
    pub violation: bool,
}

/// CSV column names, in order.
pub const RECORD_COLUMNS: [&str; 20] = [
    "t",
    "x",
    "x_m",
    "e_im",
    "e",
    "e1",
    "e2",
    "j_hat",
    "b_hat",
    "u",
    "x_d",
    "x_tilde_d",
    "x_tilde_d_sat",
    "kappa",
    "eps",
    "v_gov",
    "gamma",
    "v_adapt",
    "infeasible",
    "violation",
];

mod flag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        Ok(u8::deserialize(d)? != 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub governed: bool,
    pub steps: usize,
    pub max_abs_x: f64,
    pub final_x: f64,
    pub final_e2: f64,
    pub final_j_hat: f64,
    pub final_b_hat: f64,
    /// `|x(t_end) − x_d| < settle_tol`.
    pub settled: bool,
    /// `|x(t)| ≤ x̄ − (ε0 − δ)` at every record.
    pub safety_ok: bool,
    pub violation_count: usize,
    /// κ = 1 and `x̃_d = x_d` at every sample in the trailing window.
    pub kappa_converged: bool,
    pub any_infeasible: bool,
    pub infeasible_samples: usize,
    /// Records where the implied interval
    /// `−x̄ + ε − e ≤ x ≤ x̄ − ε − e` failed while the governor was feasible.
    pub interval_violations: usize,
    /// Largest one-step increase of the adaptive Lyapunov function.
    pub max_v_adapt_increase: f64,
}

/// Derived quantities fixed for the whole run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioModel {
    pub linearization: Linearization,
    pub nominal: LinearPlant,
    /// Plant used for the adaptive Lyapunov diagnostic.
    pub truth: LinearPlant,
    pub ref_gains: RefModelGains,
    pub reference: StateSpace2,
    pub adaptive_gains: AdaptiveGains,
    pub p: Matrix2<f64>,
    pub closed_loop: ClosedLoop,
}

impl ScenarioModel {
    pub fn build(cfg: &SimConfig) -> Result<Self> {
        let linearization = linearize_detailed(&cfg.params, &cfg.operating_point)?;
        let nominal = linearization.plant;
        let truth = nominal.perturb(cfg.rel_j, cfg.rel_b)?;
        let c = &cfg.controller;
        let ref_gains = RefModelGains::new(c.k, c.lambda, nominal.j, nominal.b)?;
        let reference = StateSpace2::from_gains(&ref_gains)?;
        let adaptive_gains =
            AdaptiveGains::from_magnitudes(c.gamma1, c.gamma2, c.k, c.lambda, nominal.j)?;
        let p = solve_lyapunov(&reference, &cfg.q)?;
        let plant = match cfg.plant_model {
            PlantModel::Linear => TruePlant::Linear(truth),
            PlantModel::Bilinear => TruePlant::Bilinear {
                coefficients: linearization.coefficients,
                t_st0: cfg.operating_point.t_st0,
                t_in: cfg.operating_point.t_in,
                nominal_flow: linearization.nominal_flow,
            },
        };
        let truth = match cfg.plant_model {
            PlantModel::Linear => truth,
            PlantModel::Bilinear => nominal,
        };
        Ok(Self {
            linearization,
            nominal,
            truth,
            ref_gains,
            reference,
            adaptive_gains,
            p,
            closed_loop: ClosedLoop {
                reference,
                gains: adaptive_gains,
                plant,
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub records: Vec<SimRecord>,
    pub summary: SimSummary,
    pub model: ScenarioModel,
}

pub fn run_scenario(cfg: &SimConfig) -> Result<SimRun> {
    cfg.validate()?;
    let model = ScenarioModel::build(cfg)?;
    let loop_ = model.closed_loop;
    let gcfg = cfg.governor;
    info!(
        "adaptation rates gamma1 = {}, gamma2 = {} (signed to match J_nom = {})",
        model.adaptive_gains.gamma1, model.adaptive_gains.gamma2, model.nominal.j
    );

    let c = &cfg.controller;
    let mut state = LoopState {
        x: cfg.initial.x,
        x_m: cfg.initial.x_m,
        e_im: cfg.initial.e_im,
        e_int: cfg.initial.e_int,
        j_hat: c.j_hat0.unwrap_or(model.nominal.j),
        b_hat: c.b_hat0.unwrap_or(model.nominal.b),
    };

    let mut governor = Governor::new(gcfg, model.p, cfg.initial.x_tilde_d)?;
    if cfg.governed {
        governor.ensure_feasible(&state.reference(), state.x_m - state.x)?;
    }

    let steps = cfg.steps();
    let per_sample = cfg.steps_per_sample()?;
    let bound = cfg.safety_bound();
    let window_start = cfg.duration - cfg.convergence_window;

    let mut x_tilde_d = if cfg.governed { cfg.initial.x_tilde_d } else { cfg.x_d };
    let mut x_tilde_d_sat = if cfg.governed { saturate(&gcfg, x_tilde_d) } else { cfg.x_d };
    let mut kappa = f64::NAN;
    let mut infeasible = false;

    let mut records = Vec::with_capacity(steps + 1);
    let mut infeasible_samples = 0;
    let mut kappa_converged = true;
    let mut interval_violations = 0;

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        if k % per_sample == 0 {
            if cfg.governed {
                let s = governor.sample(&state.reference(), cfg.x_d, state.x_m - state.x);
                x_tilde_d = s.solution.x_tilde_d;
                x_tilde_d_sat = s.x_tilde_d_sat;
                infeasible = !s.solution.is_feasible();
                kappa = s.solution.kappa.unwrap_or(f64::NAN);
                if infeasible {
                    infeasible_samples += 1;
                }
            } else {
                kappa = 1.0;
            }
            if t >= window_start - 1e-9 * cfg.dt
                && !(kappa == 1.0 && (x_tilde_d - cfg.x_d).abs() <= KAPPA_CONVERGENCE_TOL)
            {
                kappa_converged = false;
            }
        }

        let sig = loop_.signals(&state, x_tilde_d_sat);
        let err = sig.errors;
        let eps = buffer(&gcfg, err.e);
        let v_adapt = lyapunov_v_unchecked(err.e2, state.j_hat, state.b_hat, &model.truth, &model.adaptive_gains);
        let rec = SimRecord {
            t,
            x: state.x,
            x_m: state.x_m,
            e_im: state.e_im,
            e: err.e,
            e1: err.e1,
            e2: err.e2,
            j_hat: state.j_hat,
            b_hat: state.b_hat,
            u: sig.u,
            x_d: cfg.x_d,
            x_tilde_d,
            x_tilde_d_sat,
            kappa,
            eps,
            v_gov: lyapunov_value(&model.p, &state.reference(), x_tilde_d),
            gamma: gamma(&model.p, x_tilde_d, gcfg.x_bar, eps),
            v_adapt,
            infeasible,
            violation: state.x.abs() > bound,
        };
        check_bounds(&rec, cfg.state_bound)?;

        let lower = -gcfg.x_bar + (eps - err.e);
        let upper = gcfg.x_bar - (eps + err.e);
        if cfg.governed && !infeasible && !(lower <= rec.x && rec.x <= upper) {
            interval_violations += 1;
        }
        records.push(rec);

        if k < steps {
            state = loop_.step(t, &state, x_tilde_d_sat, cfg.dt)?;
        }
    }

    let summary = summarize(cfg, &records, infeasible_samples, kappa_converged, interval_violations);
    Ok(SimRun {
        records,
        summary,
        model,
    })
}

fn check_bounds(r: &SimRecord, bound: f64) -> Result<()> {
    for (name, value) in [
        ("x", r.x),
        ("x_m", r.x_m),
        ("e2", r.e2),
        ("j_hat", r.j_hat),
        ("b_hat", r.b_hat),
    ] {
        if !value.is_finite() {
            return Err(Error::NonFinite { what: name, t: r.t });
        }
        if value.abs() > bound {
            return Err(Error::BoundExceeded {
                name,
                value,
                bound,
                t: r.t,
            });
        }
    }
    Ok(())
}

fn summarize(
    cfg: &SimConfig,
    records: &[SimRecord],
    infeasible_samples: usize,
    kappa_converged: bool,
    interval_violations: usize,
) -> SimSummary {
    let last = records.last().expect("at least one record");
    let max_abs_x = records.iter().map(|r| r.x.abs()).fold(0.0, f64::max);
    let violation_count = records.iter().filter(|r| r.violation).count();
    let max_v_adapt_increase = records
        .windows(2)
        .map(|w| w[1].v_adapt - w[0].v_adapt)
        .fold(f64::NEG_INFINITY, f64::max);
    SimSummary {
        governed: cfg.governed,
        steps: records.len() - 1,
        max_abs_x,
        final_x: last.x,
        final_e2: last.e2,
        final_j_hat: last.j_hat,
        final_b_hat: last.b_hat,
        settled: (last.x - cfg.x_d).abs() < cfg.settle_tol,
        safety_ok: violation_count == 0,
        violation_count,
        kappa_converged,
        any_infeasible: infeasible_samples > 0,
        infeasible_samples,
        interval_violations,
        max_v_adapt_increase,
    }
}

/// Maximal `[start, end]` time spans where `violation` is set.
pub fn violation_intervals(records: &[SimRecord]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for r in records {
        match (&mut open, r.violation) {
            (Some(span), true) => span.1 = r.t,
            (None, true) => open = Some((r.t, r.t)),
            (Some(_), false) => out.extend(open.take()),
            (None, false) => {}
        }
    }
    out.extend(open);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDigest {
    pub summary: SimSummary,
    pub violation_intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: RunDigest,
    pub b: RunDigest,
    /// `a.max_abs_x − b.max_abs_x`.
    pub max_abs_x_delta: f64,
}

/// Runs two scenarios that share plant and setpoint, concurrently.
pub fn compare_runs(a: &SimConfig, b: &SimConfig) -> Result<(Comparison, SimRun, SimRun)> {
    if a.params != b.params
        || a.operating_point != b.operating_point
        || a.rel_j != b.rel_j
        || a.rel_b != b.rel_b
        || a.plant_model != b.plant_model
    {
        return Err(Error::Incomparable("plants differ".into()));
    }
    if a.x_d != b.x_d {
        return Err(Error::Incomparable(format!(
            "setpoints differ ({} vs {})",
            a.x_d, b.x_d
        )));
    }
    let (ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(|| run_scenario(a));
        let rb = run_scenario(b);
        (ha.join().expect("scenario thread panicked"), rb)
    });
    let (ra, rb) = (ra?, rb?);
    let digest = |r: &SimRun| RunDigest {
        summary: r.summary,
        violation_intervals: violation_intervals(&r.records),
    };
    let cmp = Comparison {
        a: digest(&ra),
        b: digest(&rb),
        max_abs_x_delta: ra.summary.max_abs_x - rb.summary.max_abs_x,
    };
    Ok((cmp, ra, rb))
}

/// Log row of [`run_reference_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRecord {
    pub t: f64,
    pub x_m: f64,
    pub e_im: f64,
    pub x_d: f64,
    pub x_tilde_d: f64,
    pub kappa: Option<f64>,
    pub v: f64,
    pub gamma: f64,
}

/// The governed reference model on its own, with no plant and therefore
/// `e ≡ 0` and `ε ≡ ε0`. `command(t)` gives the raw setpoint.
#[allow(clippy::too_many_arguments)]
pub fn run_reference_model(
    reference: &StateSpace2,
    p: &Matrix2<f64>,
    cfg: &GovernorConfig,
    z0: RefModelState,
    x_tilde_d0: f64,
    command: impl Fn(f64) -> f64,
    duration: f64,
    dt: f64,
) -> Result<Vec<ReferenceRecord>> {
    let mut governor = Governor::new(*cfg, *p, x_tilde_d0)?;
    governor.ensure_feasible(&z0, 0.0)?;
    let per_sample = (cfg.sample_period / dt).round().max(1.0) as usize;
    let steps = (duration / dt).round() as usize;
    let mut z = z0;
    let mut held = (x_tilde_d0, saturate(cfg, x_tilde_d0), None);
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let x_d = command(t);
        if k % per_sample == 0 {
            let s = governor.sample(&z, x_d, 0.0);
            held = (s.solution.x_tilde_d, s.x_tilde_d_sat, s.solution.kappa);
        }
        let eps = buffer(cfg, 0.0);
        out.push(ReferenceRecord {
            t,
            x_m: z.x_m,
            e_im: z.e_im,
            x_d,
            x_tilde_d: held.0,
            kappa: held.2,
            v: lyapunov_value(p, &z, held.0),
            gamma: gamma(p, held.0, cfg.x_bar, eps),
        });
        if k < steps {
            let next = step_rk4(t, &[z.x_m, z.e_im], dt, |_, y| {
                let d = reference.derivative(&RefModelState::new(y[0], y[1]), held.1);
                [d[0], d[1]]
            })?;
            z = RefModelState::new(next[0], next[1]);
        }
    }
    Ok(out)
}
