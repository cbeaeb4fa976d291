//! Scenario files.
//!
//! A scenario is a sectioned TOML document. Every key carries its unit in
//! its name (`t_st0_degc`, `dt_s`, ...), unknown keys are rejected, and any
//! omitted key takes the default of the fuel cell temperature-regulation
//! scenario. Temperatures of the operating point may be given in Kelvin
//! through the `_kelvin` variants instead.
//!
//! ```toml
//! [plant]
//! t_st0_degc = 70.0
//! current_a = 100.0
//! t_in_degc = 67.0
//! rel_j = 0.11
//! rel_b = 0.22
//! model = "linear"
//!
//! [controller]
//! k = -1.0
//! lambda_per_s = 0.3
//! gamma1_magnitude = 5.0
//! gamma2_magnitude = 1.0
//!
//! [governor]
//! x_bar_degc = 0.5
//! eps0_degc = 0.055
//! k_eps_per_degc = 5.0
//!
//! [sim]
//! x_d_degc = -0.35
//! ```

use std::path::Path;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::governor::GovernorConfig;
use crate::plant::{FuelCellParams, OperatingPoint, KELVIN_OFFSET};
use crate::sim::{ControllerConfig, InitialConditions, PlantModel, SimConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub plant: PlantSection,
    pub controller: ControllerSection,
    pub governor: GovernorSection,
    pub sim: SimSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_st0_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_st0_kelvin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub current_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_in_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_in_kelvin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PlantModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSection>,
}

/// Overrides of the stack constants.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha2_v_per_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1_kohm_cm2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2_kohm_cm2_per_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta1_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta2_v_per_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_cm2_per_ma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e0_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_cell_cm2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_cell: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heat_capacity_kj_per_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub faraday_c_per_mol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub molar_mass_h2_g_per_mol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enthalpy_h2_kj_per_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub faraday_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cp_coolant_kj_per_kg_degc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_per_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1_magnitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2_magnitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_hat0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_hat0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GovernorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_bar_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_eps_per_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Defaults to `x_bar_degc − eps0_degc`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_bar_d_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_period_s: Option<f64>,
    /// Row-major weight of the reference-model Lyapunov equation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_d_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub governed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monitor_delta_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settle_tol_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_window_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_m0_degc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_im0_degc_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_int0_degc_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_tilde_d0_degc: Option<f64>,
}

fn temperature(name: &str, degc: Option<f64>, kelvin: Option<f64>, default: f64) -> Result<f64> {
    match (degc, kelvin) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "give either {name}_degc or {name}_kelvin, not both"
        ))),
        (Some(c), None) => Ok(c),
        (None, Some(k)) => Ok(k - KELVIN_OFFSET),
        (None, None) => Ok(default),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read scenario file {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    /// Resolves defaults and validates the result.
    pub fn to_sim_config(&self) -> Result<SimConfig> {
        let d = SimConfig::default();
        let pl = &self.plant;
        let operating_point = OperatingPoint {
            t_st0: temperature("t_st0", pl.t_st0_degc, pl.t_st0_kelvin, d.operating_point.t_st0)?,
            current: pl.current_a.unwrap_or(d.operating_point.current),
            t_in: temperature("t_in", pl.t_in_degc, pl.t_in_kelvin, d.operating_point.t_in)?,
        };
        let params = pl
            .params
            .as_ref()
            .map(ParamsSection::resolve)
            .unwrap_or_default();

        let c = &self.controller;
        let controller = ControllerConfig {
            k: c.k.unwrap_or(d.controller.k),
            lambda: c.lambda_per_s.unwrap_or(d.controller.lambda),
            gamma1: c.gamma1_magnitude.unwrap_or(d.controller.gamma1),
            gamma2: c.gamma2_magnitude.unwrap_or(d.controller.gamma2),
            j_hat0: c.j_hat0,
            b_hat0: c.b_hat0,
        };

        let g = &self.governor;
        let x_bar = g.x_bar_degc.unwrap_or(d.governor.x_bar);
        let eps0 = g.eps0_degc.unwrap_or(d.governor.eps0);
        let governor = GovernorConfig {
            x_bar,
            eps0,
            k_eps: g.k_eps_per_degc.unwrap_or(d.governor.k_eps),
            delta: g.delta.unwrap_or(d.governor.delta),
            x_bar_d: g.x_bar_d_degc.unwrap_or(x_bar - eps0),
            sample_period: g.sample_period_s.unwrap_or(d.governor.sample_period),
        };
        let q = g
            .q
            .map(|[[a, b], [c, e]]| Matrix2::new(a, b, c, e))
            .unwrap_or(d.q);

        let s = &self.sim;
        let cfg = SimConfig {
            params,
            operating_point,
            rel_j: pl.rel_j.unwrap_or(d.rel_j),
            rel_b: pl.rel_b.unwrap_or(d.rel_b),
            plant_model: pl.model.unwrap_or(d.plant_model),
            controller,
            governor,
            q,
            duration: s.duration_s.unwrap_or(d.duration),
            dt: s.dt_s.unwrap_or(d.dt),
            x_d: s.x_d_degc.unwrap_or(d.x_d),
            initial: InitialConditions {
                x: s.x0_degc.unwrap_or(d.initial.x),
                x_m: s.x_m0_degc.unwrap_or(d.initial.x_m),
                e_im: s.e_im0_degc_s.unwrap_or(d.initial.e_im),
                e_int: s.e_int0_degc_s.unwrap_or(d.initial.e_int),
                x_tilde_d: s.x_tilde_d0_degc.unwrap_or(d.initial.x_tilde_d),
            },
            governed: s.governed.unwrap_or(d.governed),
            monitor_delta: s.monitor_delta_degc.unwrap_or(d.monitor_delta),
            settle_tol: s.settle_tol_degc.unwrap_or(d.settle_tol),
            convergence_window: s.convergence_window_s.unwrap_or(d.convergence_window),
            state_bound: s.state_bound.unwrap_or(d.state_bound),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fully populated file describing `cfg`, temperatures in °C.
    pub fn from_sim_config(cfg: &SimConfig) -> Self {
        let p = &cfg.params;
        let q = &cfg.q;
        Self {
            plant: PlantSection {
                t_st0_degc: Some(cfg.operating_point.t_st0),
                t_st0_kelvin: None,
                current_a: Some(cfg.operating_point.current),
                t_in_degc: Some(cfg.operating_point.t_in),
                t_in_kelvin: None,
                rel_j: Some(cfg.rel_j),
                rel_b: Some(cfg.rel_b),
                model: Some(cfg.plant_model),
                params: Some(ParamsSection {
                    alpha1_v: Some(p.alpha1),
                    alpha2_v_per_degc: Some(p.alpha2),
                    beta1_kohm_cm2: Some(p.beta1),
                    beta2_kohm_cm2_per_degc: Some(p.beta2),
                    theta1_v: Some(p.theta1),
                    theta2_v_per_degc: Some(p.theta2),
                    n_cm2_per_ma: Some(p.n),
                    e0_v: Some(p.e0),
                    a_cell_cm2: Some(p.a_cell),
                    n_cell: Some(p.n_cell),
                    heat_capacity_kj_per_degc: Some(p.heat_capacity),
                    faraday_c_per_mol: Some(p.faraday),
                    molar_mass_h2_g_per_mol: Some(p.molar_mass_h2),
                    enthalpy_h2_kj_per_g: Some(p.enthalpy_h2),
                    faraday_efficiency: Some(p.faraday_efficiency),
                    cp_coolant_kj_per_kg_degc: Some(p.cp_coolant),
                }),
            },
            controller: ControllerSection {
                k: Some(cfg.controller.k),
                lambda_per_s: Some(cfg.controller.lambda),
                gamma1_magnitude: Some(cfg.controller.gamma1),
                gamma2_magnitude: Some(cfg.controller.gamma2),
                j_hat0: cfg.controller.j_hat0,
                b_hat0: cfg.controller.b_hat0,
            },
            governor: GovernorSection {
                x_bar_degc: Some(cfg.governor.x_bar),
                eps0_degc: Some(cfg.governor.eps0),
                k_eps_per_degc: Some(cfg.governor.k_eps),
                delta: Some(cfg.governor.delta),
                x_bar_d_degc: Some(cfg.governor.x_bar_d),
                sample_period_s: Some(cfg.governor.sample_period),
                q: Some([[q[(0, 0)], q[(0, 1)]], [q[(1, 0)], q[(1, 1)]]]),
            },
            sim: SimSection {
                duration_s: Some(cfg.duration),
                dt_s: Some(cfg.dt),
                x_d_degc: Some(cfg.x_d),
                governed: Some(cfg.governed),
                monitor_delta_degc: Some(cfg.monitor_delta),
                settle_tol_degc: Some(cfg.settle_tol),
                convergence_window_s: Some(cfg.convergence_window),
                state_bound: Some(cfg.state_bound),
                x0_degc: Some(cfg.initial.x),
                x_m0_degc: Some(cfg.initial.x_m),
                e_im0_degc_s: Some(cfg.initial.e_im),
                e_int0_degc_s: Some(cfg.initial.e_int),
                x_tilde_d0_degc: Some(cfg.initial.x_tilde_d),
            },
        }
    }
}

impl ParamsSection {
    fn resolve(&self) -> FuelCellParams {
        let d = FuelCellParams::default();
        FuelCellParams {
            alpha1: self.alpha1_v.unwrap_or(d.alpha1),
            alpha2: self.alpha2_v_per_degc.unwrap_or(d.alpha2),
            beta1: self.beta1_kohm_cm2.unwrap_or(d.beta1),
            beta2: self.beta2_kohm_cm2_per_degc.unwrap_or(d.beta2),
            theta1: self.theta1_v.unwrap_or(d.theta1),
            theta2: self.theta2_v_per_degc.unwrap_or(d.theta2),
            n: self.n_cm2_per_ma.unwrap_or(d.n),
            e0: self.e0_v.unwrap_or(d.e0),
            a_cell: self.a_cell_cm2.unwrap_or(d.a_cell),
            n_cell: self.n_cell.unwrap_or(d.n_cell),
            heat_capacity: self.heat_capacity_kj_per_degc.unwrap_or(d.heat_capacity),
            faraday: self.faraday_c_per_mol.unwrap_or(d.faraday),
            molar_mass_h2: self.molar_mass_h2_g_per_mol.unwrap_or(d.molar_mass_h2),
            enthalpy_h2: self.enthalpy_h2_kj_per_g.unwrap_or(d.enthalpy_h2),
            faraday_efficiency: self.faraday_efficiency.unwrap_or(d.faraday_efficiency),
            cp_coolant: self.cp_coolant_kj_per_kg_degc.unwrap_or(d.cp_coolant),
        }
    }
}

pub fn load_sim_config(path: &Path) -> Result<SimConfig> {
    ScenarioFile::load(path)?.to_sim_config()
}
