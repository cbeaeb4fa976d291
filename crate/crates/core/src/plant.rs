//! Reduced-order electro-thermal model of a PEM fuel cell stack.
//!
//! The stack temperature obeys a bilinear balance
//!
//! ```text
//! dT/dt = A0(I) + A1(I)·T − w_c·B0·(T − T_in)
//! ```
//!
//! where `w_c` is the coolant mass flow. Around an operating point
//! `(T_st0, I0)` the flow that holds the stack in equilibrium is `w_c°`, and
//! the deviation dynamics reduce to the first-order plant
//! `J·ẋ = −B·x + u` with `x = T − T_st0` and `u = w_c − w_c°`.
//!
//! Temperatures are in °C throughout. The empirical coefficients carry
//! per-°C units and the model is only consistent when evaluated in °C.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Offset between the Kelvin and Celsius scales.
pub const KELVIN_OFFSET: f64 = 273.15;

/// Physical and empirical constants of the stack.
///
/// Defaults describe a 36-cell stack with 232 cm² cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelCellParams {
    /// Activation overpotential intercept, V.
    pub alpha1: f64,
    /// Activation overpotential slope, V/°C.
    pub alpha2: f64,
    /// Ohmic resistance intercept, kΩ·cm².
    pub beta1: f64,
    /// Ohmic resistance slope, kΩ·cm²/°C.
    pub beta2: f64,
    /// Transport overpotential intercept, V.
    pub theta1: f64,
    /// Transport overpotential slope, V/°C.
    pub theta2: f64,
    /// Transport exponent, cm²/mA.
    pub n: f64,
    /// Open-circuit voltage, V.
    pub e0: f64,
    /// Active cell area, cm².
    pub a_cell: f64,
    /// Number of cells in the stack.
    pub n_cell: f64,
    /// Lumped stack heat capacity `m_st·C_p,st`, kJ/°C.
    pub heat_capacity: f64,
    /// Faraday constant, C/mol.
    pub faraday: f64,
    /// Molar mass of hydrogen, g/mol.
    pub molar_mass_h2: f64,
    /// Enthalpy of combustion of hydrogen, kJ/g.
    pub enthalpy_h2: f64,
    /// Faraday efficiency, dimensionless.
    pub faraday_efficiency: f64,
    /// Coolant specific heat, kJ/(kg·°C).
    pub cp_coolant: f64,
}

impl Default for FuelCellParams {
    fn default() -> Self {
        Self {
            alpha1: 4.01e-2,
            alpha2: -1.40e-4,
            beta1: 4.77e-4,
            beta2: -3.32e-6,
            theta1: 1.1e-4,
            theta2: -1.2e-6,
            n: 8.0e-3,
            e0: 1.05,
            a_cell: 232.0,
            n_cell: 36.0,
            heat_capacity: 35.0,
            faraday: 96485.0,
            molar_mass_h2: 2.016,
            enthalpy_h2: 143.0,
            faraday_efficiency: 0.98,
            cp_coolant: 4.184,
        }
    }
}

impl FuelCellParams {
    /// Checks signs and ranges. The temperature slopes may take any finite
    /// value; everything else must be positive and `faraday_efficiency` must
    /// lie in `(0, 1]`.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha1", self.alpha1),
            ("beta1", self.beta1),
            ("theta1", self.theta1),
            ("n", self.n),
            ("e0", self.e0),
            ("a_cell", self.a_cell),
            ("n_cell", self.n_cell),
            ("heat_capacity", self.heat_capacity),
            ("faraday", self.faraday),
            ("molar_mass_h2", self.molar_mass_h2),
            ("enthalpy_h2", self.enthalpy_h2),
            ("cp_coolant", self.cp_coolant),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be positive and finite, got {value}")));
            }
        }
        for (name, value) in [
            ("alpha2", self.alpha2),
            ("beta2", self.beta2),
            ("theta2", self.theta2),
        ] {
            if !value.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if !(self.faraday_efficiency > 0.0 && self.faraday_efficiency <= 1.0) {
            return Err(invalid(
                "faraday_efficiency",
                format!("must lie in (0, 1], got {}", self.faraday_efficiency),
            ));
        }
        Ok(())
    }

    /// Current density in mA/cm² for a stack current in A.
    pub fn current_density(&self, current: f64) -> f64 {
        1000.0 * current / self.a_cell
    }
}

/// Linearization point of the thermal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Stack temperature, °C.
    pub t_st0: f64,
    /// Load current, A.
    pub current: f64,
    /// Coolant inlet temperature, °C.
    pub t_in: f64,
}

impl Default for OperatingPoint {
    fn default() -> Self {
        Self {
            t_st0: 70.0,
            current: 100.0,
            t_in: 67.0,
        }
    }
}

impl OperatingPoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.current.is_finite() && self.current > 0.0) {
            return Err(Error::NonPositiveCurrent(self.current));
        }
        if !(self.t_st0.is_finite() && self.t_in.is_finite()) {
            return Err(invalid("operating_point", "temperatures must be finite"));
        }
        if self.t_st0 <= self.t_in {
            return Err(Error::DegenerateOperatingPoint {
                t_st0: self.t_st0,
                t_in: self.t_in,
            });
        }
        Ok(())
    }
}

/// The first-order deviation plant `J·ẋ = −B·x + u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPlant {
    pub j: f64,
    pub b: f64,
}

impl LinearPlant {
    pub fn new(j: f64, b: f64) -> Result<Self> {
        if !(j.is_finite() && j < 0.0) {
            return Err(invalid("J", format!("must be negative, got {j}")));
        }
        if !b.is_finite() {
            return Err(invalid("B", "must be finite"));
        }
        Ok(Self { j, b })
    }

    /// `ẋ` for deviation state `x` and input deviation `u`.
    pub fn derivative(&self, x: f64, u: f64) -> f64 {
        (-self.b * x + u) / self.j
    }

    /// Scales the parameters by `(1 + rel_j)` and `(1 + rel_b)`.
    pub fn perturb(&self, rel_j: f64, rel_b: f64) -> Result<Self> {
        Self::new(self.j * (1.0 + rel_j), self.b * (1.0 + rel_b))
    }
}

/// Polarization curve `E0 − V_act − V_ohm − V_trans`.
///
/// Current density enters as mA/cm², the same convention as
/// [`thermal_coefficients`].
pub fn cell_voltage(p: &FuelCellParams, current: f64, temp: f64) -> Result<f64> {
    if !(current.is_finite() && current > 0.0) {
        return Err(Error::NonPositiveCurrent(current));
    }
    let i = p.current_density(current);
    let v_act = (p.alpha1 + p.alpha2 * temp) * i.ln();
    let v_ohm = (p.beta1 + p.beta2 * temp) * i;
    let v_trans = (p.theta1 + p.theta2 * temp) * (p.n * i).exp();
    Ok(p.e0 - v_act - v_ohm - v_trans)
}

/// Coefficients of the bilinear balance at a given load current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalCoefficients {
    /// Temperature-independent net heating, °C/s.
    pub a0: f64,
    /// Temperature sensitivity of net heating, 1/s.
    pub a1: f64,
    /// Coolant effectiveness `C_p,c / (m_st·C_p,st)`, 1/kg.
    pub b0: f64,
}

impl ThermalCoefficients {
    /// Right-hand side of the bilinear balance.
    pub fn derivative(&self, temp: f64, coolant_flow: f64, t_in: f64) -> f64 {
        self.a0 + self.a1 * temp - coolant_flow * self.b0 * (temp - t_in)
    }
}

pub fn thermal_coefficients(p: &FuelCellParams, current: f64) -> Result<ThermalCoefficients> {
    if !(current.is_finite() && current > 0.0) {
        return Err(Error::NonPositiveCurrent(current));
    }
    let i = p.current_density(current);
    let ln_i = i.ln();
    let exp_i = (p.n * i).exp();
    let scale = p.n_cell * current / p.heat_capacity;

    let heat_per_amp = p.faraday_efficiency * p.molar_mass_h2 * p.enthalpy_h2 / (2.0 * p.faraday);
    let electrical = (-p.e0 + p.alpha1 * ln_i + p.beta1 * i + p.theta1 * exp_i) / 1000.0;
    let a0 = scale * (heat_per_amp + electrical);
    let a1 = scale / 1000.0 * (p.alpha2 * ln_i + p.beta2 * i + p.theta2 * exp_i);
    let b0 = p.cp_coolant / p.heat_capacity;

    Ok(ThermalCoefficients { a0, a1, b0 })
}

/// `dT/dt` of the bilinear model. Requires `coolant_flow ≥ 0`.
pub fn bilinear_derivative(
    p: &FuelCellParams,
    temp: f64,
    coolant_flow: f64,
    current: f64,
    t_in: f64,
) -> Result<f64> {
    if coolant_flow < 0.0 {
        return Err(invalid("coolant_flow", format!("must be non-negative, got {coolant_flow}")));
    }
    Ok(thermal_coefficients(p, current)?.derivative(temp, coolant_flow, t_in))
}

/// Coolant flow `w_c°` that makes the operating point an equilibrium.
pub fn nominal_coolant_flow(p: &FuelCellParams, op: &OperatingPoint) -> Result<f64> {
    op.validate()?;
    let c = thermal_coefficients(p, op.current)?;
    Ok((c.a0 + c.a1 * op.t_st0) / (c.b0 * (op.t_st0 - op.t_in)))
}

/// Everything the linearization produces, kept together for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub coefficients: ThermalCoefficients,
    pub nominal_flow: f64,
    pub plant: LinearPlant,
}

pub fn linearize_detailed(p: &FuelCellParams, op: &OperatingPoint) -> Result<Linearization> {
    op.validate()?;
    let c = thermal_coefficients(p, op.current)?;
    let dt = op.t_st0 - op.t_in;
    let nominal_flow = (c.a0 + c.a1 * op.t_st0) / (c.b0 * dt);
    let j = -1.0 / (c.b0 * dt);
    let b = -(c.b0 * nominal_flow - c.a1) / (c.b0 * dt);
    Ok(Linearization {
        coefficients: c,
        nominal_flow,
        plant: LinearPlant::new(j, b)?,
    })
}

pub fn linearize(p: &FuelCellParams, op: &OperatingPoint) -> Result<LinearPlant> {
    linearize_detailed(p, op).map(|l| l.plant)
}
