//! Nominal PI closed loop used as the reference model.
//!
//! With the nominal plant `J_nom·ẋ_m = −B_nom·x_m + u` and the PI law
//! `u = B_nom·x_m + J_nom·(ẋ_d + λ·e_m) + K·e_2m`, the loop in the state
//! `z_m = (x_m, e_Im)`, `ė_Im = e_m = x_d − x_m`, reads
//!
//! ```text
//! ż_m = A_m·z_m + b_m·x_d
//! A_m = [ −(K + J_nom·λ)/J_nom   K·λ/J_nom ]    b_m = [ (K + J_nom·λ)/J_nom ]
//!       [          −1                0     ]          [          1          ]
//! ```
//!
//! for piecewise constant `x_d`.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefModelGains {
    /// Integral-error feedback gain, must be negative.
    pub k: f64,
    /// PI zero location, 1/s, must be positive.
    pub lambda: f64,
    pub j_nom: f64,
    pub b_nom: f64,
}

impl RefModelGains {
    pub fn new(k: f64, lambda: f64, j_nom: f64, b_nom: f64) -> Result<Self> {
        let g = Self {
            k,
            lambda,
            j_nom,
            b_nom,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k < 0.0) {
            return Err(invalid("K", format!("must be negative, got {}", self.k)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if !(self.j_nom.is_finite() && self.j_nom < 0.0) {
            return Err(invalid("J_nom", format!("must be negative, got {}", self.j_nom)));
        }
        if !self.b_nom.is_finite() {
            return Err(invalid("B_nom", "must be finite"));
        }
        Ok(())
    }

    /// Decay rate of `e_2m` under the nominal loop, `−K/J_nom` (negative).
    pub fn error_decay_rate(&self) -> f64 {
        -self.k / self.j_nom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RefModelState {
    pub x_m: f64,
    /// Integral of `x_d − x_m`, °C·s.
    pub e_im: f64,
}

impl RefModelState {
    pub fn new(x_m: f64, e_im: f64) -> Self {
        Self { x_m, e_im }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.x_m, self.e_im)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self::new(v[0], v[1])
    }
}

/// `(A_m, b_m)` of the reference model, Hurwitz by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpace2 {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
}

impl StateSpace2 {
    pub fn new(a: Matrix2<f64>, b: Vector2<f64>) -> Result<Self> {
        // For 2×2, Hurwitz ⇔ trace < 0 and det > 0.
        let (trace, det) = (a.trace(), a.determinant());
        if !(trace < 0.0 && det > 0.0) {
            return Err(Error::NotHurwitz { trace, det });
        }
        Ok(Self { a, b })
    }

    pub fn from_gains(g: &RefModelGains) -> Result<Self> {
        g.validate()?;
        let j = g.j_nom;
        let c = (g.k + j * g.lambda) / j;
        let a = Matrix2::new(-c, g.k * g.lambda / j, -1.0, 0.0);
        Self::new(a, Vector2::new(c, 1.0))
    }

    /// Steady state `−A_m⁻¹·b_m·x_d` for a constant command.
    pub fn equilibrium(&self, x_d: f64) -> RefModelState {
        let inv = self
            .a
            .try_inverse()
            .expect("Hurwitz matrix is invertible");
        RefModelState::from_vector(&(-(inv * self.b) * x_d))
    }

    /// `−[1 0]·A_m⁻¹·b_m`, which is 1 for any admissible gains.
    pub fn dc_gain(&self) -> f64 {
        self.equilibrium(1.0).x_m
    }

    pub fn derivative(&self, z: &RefModelState, x_d: f64) -> Vector2<f64> {
        self.a * z.as_vector() + self.b * x_d
    }

    /// Derivative with a time-varying command, adding `[1 0]ᵀ·ẋ_d`.
    pub fn derivative_with_rate(&self, z: &RefModelState, x_d: f64, dx_d: f64) -> Vector2<f64> {
        self.derivative(z, x_d) + Vector2::new(dx_d, 0.0)
    }
}

pub fn system_matrices(g: &RefModelGains) -> Result<StateSpace2> {
    StateSpace2::from_gains(g)
}

pub(crate) fn is_spd(m: &Matrix2<f64>) -> bool {
    let scale = m.amax().max(1.0);
    (m[(0, 1)] - m[(1, 0)]).abs() <= 1e-12 * scale && m[(0, 0)] > 0.0 && m.determinant() > 0.0
}

/// Solves `Aᵀ·P + P·A = −Q` for symmetric `P`.
///
/// The three distinct entries `(p11, p12, p22)` satisfy a 3×3 linear system
/// built from the `(1,1)`, `(1,2)` and `(2,2)` entries of the equation.
pub fn solve_lyapunov(ss: &StateSpace2, q: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    if !is_spd(q) {
        return Err(Error::NotPositiveDefinite("Q"));
    }
    let a = &ss.a;
    // Position of P[(r, c)] in the unknown vector.
    let idx = |r: usize, c: usize| match (r, c) {
        (0, 0) => 0,
        (1, 1) => 2,
        _ => 1,
    };
    let rows = [(0, 0), (0, 1), (1, 1)];
    let mut m = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (row, &(i, j)) in rows.iter().enumerate() {
        for k in 0..2 {
            // (Aᵀ P)_ij = Σ_k A_ki P_kj ; (P A)_ij = Σ_k P_ik A_kj
            m[(row, idx(k, j))] += a[(k, i)];
            m[(row, idx(i, k))] += a[(k, j)];
        }
        rhs[row] = -q[(i, j)];
    }
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::NotHurwitz {
            trace: a.trace(),
            det: a.determinant(),
        })?;
    let p = Matrix2::new(sol[0], sol[1], sol[1], sol[2]);
    if !is_spd(&p) {
        return Err(Error::NotPositiveDefinite("P"));
    }
    Ok(p)
}

/// Nominal PI law `B_nom·x_m + J_nom·(ẋ_d + λ·e_m) + K·e_2m`.
pub fn nominal_pi_control(g: &RefModelGains, x_m: f64, e_m: f64, e_2m: f64, dx_d: f64) -> f64 {
    g.b_nom * x_m + g.j_nom * (dx_d + g.lambda * e_m) + g.k * e_2m
}
