//! Acceptance gates. Runs as a plain binary and prints one PASS/FAIL line per
//! criterion; the process fails if any criterion does.

use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Vector2};
use safe_adaptive::governor::{gamma, lyapunov_value, solve_kappa, GovernorConfig, GovernorState};
use safe_adaptive::ode::step_rk4;
use safe_adaptive::plant::{linearize_detailed, FuelCellParams, LinearPlant, OperatingPoint};
use safe_adaptive::refmodel::{
    nominal_pi_control, solve_lyapunov, RefModelGains, RefModelState, StateSpace2,
};
use safe_adaptive::sim::{run_reference_model, run_scenario, SimConfig, SimRun};

/// SplitMix64; enough for reproducible draws.
struct Rng(u64);

impl Rng {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

fn random_spd(rng: &mut Rng) -> Matrix2<f64> {
    let a = rng.range(0.1, 10.0);
    let b = rng.range(0.1, 10.0);
    let c = rng.range(-0.95, 0.95) * (a * b).sqrt();
    Matrix2::new(a, c, c, b)
}

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

fn model_identification() -> Outcome {
    let lin = linearize_detailed(&FuelCellParams::default(), &OperatingPoint::default())
        .map_err(|e| e.to_string())?;
    let (w, j, b) = (lin.nominal_flow, lin.plant.j, lin.plant.b);
    check(
        (w - 0.20).abs() <= 0.005 && (j + 2.79).abs() <= 0.01 && (b + 0.07).abs() <= 0.005,
        format!("w_c0 = {w:.5}, J = {j:.5}, B = {b:.5}"),
    )
}

fn governed_run() -> Result<(SimRun, Duration), String> {
    let start = Instant::now();
    let run = run_scenario(&SimConfig::default()).map_err(|e| e.to_string())?;
    Ok((run, start.elapsed()))
}

fn governed_scenario(run: &SimRun, elapsed: Duration) -> Outcome {
    let cfg = SimConfig::default();
    let bound = 0.5 - (0.055 - 0.0525);
    let max_x = run.records.iter().map(|r| r.x.abs()).fold(0.0, f64::max);
    let last = run.records.last().unwrap();
    let tail_ok = run
        .records
        .iter()
        .filter(|r| r.t >= cfg.duration - 10.0 - 1e-9)
        .all(|r| r.kappa == 1.0 && (r.x_tilde_d - cfg.x_d).abs() <= 1e-6);
    let infeasible = run.records.iter().filter(|r| r.infeasible).count();
    let ok = max_x <= bound
        && (last.x + 0.35).abs() <= 0.01
        && last.e2.abs() <= 1e-3
        && tail_ok
        && infeasible == 0
        && within(elapsed, 5.0);
    check(
        ok,
        format!(
            "max|x| = {max_x:.5} (bound {bound}), x_end = {:.6}, e2_end = {:.2e}, kappa tail ok = {tail_ok}, infeasible = {infeasible}, {:.2} s",
            last.x,
            last.e2,
            elapsed.as_secs_f64()
        ),
    )
}

fn baseline_comparison(governed: &SimRun) -> Outcome {
    let cfg = SimConfig { governed: false, ..Default::default() };
    let run = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let last = run.records.last().unwrap();
    let settled = (last.x - cfg.x_d).abs() <= cfg.settle_tol;
    let (mu, mg) = (run.summary.max_abs_x, governed.summary.max_abs_x);
    check(
        settled && mu > mg,
        format!("ungoverned x_end = {:.6}, max|x| ungoverned {mu:.5} vs governed {mg:.5}", last.x),
    )
}

/// Minimum of `V` over `x_m = face`, by a coarse grid on `e_Im` followed by
/// repeated zooming around the best point.
fn face_minimum(p: &Matrix2<f64>, x_tilde_d: f64, face: f64) -> f64 {
    let w1 = face - x_tilde_d;
    let v = |w2: f64| p[(0, 0)] * w1 * w1 + 2.0 * p[(0, 1)] * w1 * w2 + p[(1, 1)] * w2 * w2;
    // For positive definite P the minimizer satisfies |w2| < sqrt(P11/P22)·|w1|.
    let mut half = (p[(0, 0)] / p[(1, 1)]).sqrt() * w1.abs() + 1.0;
    let mut centre = 0.0;
    let n = 2001;
    for _ in 0..6 {
        let h = 2.0 * half / (n - 1) as f64;
        let mut best = (f64::INFINITY, centre);
        for i in 0..n {
            let w2 = centre - half + i as f64 * h;
            let val = v(w2);
            if val < best.0 {
                best = (val, w2);
            }
        }
        centre = best.1;
        half = 2.0 * h;
    }
    v(centre)
}

fn gamma_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng(0x5EED_0004);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = random_spd(&mut rng);
        let x_bar = rng.range(0.2, 2.0);
        let eps = rng.range(0.0, 0.9 * x_bar);
        let limit = x_bar - eps;
        let xt = rng.range(-0.95, 0.95) * limit;
        let grid = face_minimum(&p, xt, limit).min(face_minimum(&p, xt, -limit));
        let closed = gamma(&p, xt, x_bar, eps);
        worst = worst.max((closed - grid).abs() / grid.abs().max(f64::MIN_POSITIVE));
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-3 && within(elapsed, 10.0),
        format!("worst relative error {worst:.2e} over 1000 draws, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn design_reference() -> (RefModelGains, StateSpace2) {
    let lin = linearize_detailed(&FuelCellParams::default(), &OperatingPoint::default()).unwrap();
    let g = RefModelGains::new(-1.0, 0.3, lin.plant.j, lin.plant.b).unwrap();
    (g, StateSpace2::from_gains(&g).unwrap())
}

fn lyapunov_properties(governed: &SimRun) -> Outcome {
    let (_, ss) = design_reference();
    let q = Matrix2::identity();
    let p = solve_lyapunov(&ss, &q).map_err(|e| e.to_string())?;
    let residual = (ss.a.transpose() * p + p * ss.a + q).amax();
    let increase = governed
        .records
        .windows(2)
        .map(|w| w[1].v_adapt - w[0].v_adapt)
        .fold(f64::NEG_INFINITY, f64::max);
    check(
        residual <= 1e-10 && increase <= 1e-8,
        format!("residual {residual:.2e}, largest one-step V increase {increase:.2e}"),
    )
}

fn reference_invariants() -> Outcome {
    let mut rng = Rng(0x5EED_0006);
    let mut worst_dc: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.range(-10.0, -0.01);
        let lambda = rng.range(0.01, 5.0);
        let j = rng.range(-10.0, -0.1);
        let b = rng.range(-1.0, 1.0);
        let g = RefModelGains::new(k, lambda, j, b).map_err(|e| e.to_string())?;
        let ss = StateSpace2::from_gains(&g).map_err(|e| e.to_string())?;
        let inv = ss.a.try_inverse().ok_or("singular A_m")?;
        let dc = -(inv * ss.b)[0];
        worst_dc = worst_dc.max((dc - 1.0).abs());
    }

    // Nominal plant under the nominal PI law, step to x_d from rest.
    let (g, _) = design_reference();
    let plant = LinearPlant::new(g.j_nom, g.b_nom).unwrap();
    let x_d = -0.35;
    let e2 = |y: &[f64; 2]| (x_d - y[0]) + g.lambda * y[1];
    let dt = 0.01;
    let mut y = [0.0, 0.0];
    let mut samples = Vec::new();
    for i in 0..=2000 {
        if i % 100 == 0 {
            samples.push((i as f64 * dt, e2(&y).abs().ln()));
        }
        y = step_rk4(i as f64 * dt, &y, dt, |_, s| {
            let e = x_d - s[0];
            let u = nominal_pi_control(&g, s[0], e, e2(s), 0.0);
            [plant.derivative(s[0], u), e]
        })
        .map_err(|e| e.to_string())?;
    }
    let n = samples.len() as f64;
    let (mt, ml) = samples.iter().fold((0.0, 0.0), |a, s| (a.0 + s.0 / n, a.1 + s.1 / n));
    let (sxy, sxx) = samples
        .iter()
        .fold((0.0, 0.0), |a, s| (a.0 + (s.0 - mt) * (s.1 - ml), a.1 + (s.0 - mt).powi(2)));
    let slope = sxy / sxx;
    let expected = g.k / g.j_nom;
    let rel = ((-slope) - expected).abs() / expected.abs();
    check(
        worst_dc <= 1e-12 && rel <= 0.01,
        format!("worst |dc - 1| = {worst_dc:.2e}, decay rate {:.5} vs -K/J_nom {:.5}", slope, -expected),
    )
}

fn governor_invariance() -> Outcome {
    let (_, ss) = design_reference();
    let p = solve_lyapunov(&ss, &Matrix2::identity()).unwrap();
    let cfg = GovernorConfig { k_eps: 0.0, ..Default::default() };
    let limit = cfg.x_bar - cfg.eps0;
    let mut rng = Rng(0x5EED_0007);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let x0 = rng.range(-0.9, 0.9) * cfg.x_bar_d;
        let before = rng.range(-1.0, 1.0);
        let after = rng.range(-1.5, 1.5);
        let t_step = rng.range(0.0, 10.0);
        let z0 = ss.equilibrium(x0);
        let log = run_reference_model(
            &ss,
            &p,
            &cfg,
            z0,
            x0,
            |t| if t < t_step { before } else { after },
            40.0,
            0.01,
        )
        .map_err(|e| e.to_string())?;
        let peak = log.iter().map(|r| r.x_m.abs()).fold(0.0, f64::max);
        worst = worst.max(peak - limit);
    }
    check(
        worst <= 0.0,
        format!("largest |x_m| - (x_bar - eps0) = {worst:.3e} over 50 setpoint steps"),
    )
}

/// Upper root of `g` on `[0, 1]` given `g(0) <= 0 < g(1)`.
fn bisection_oracle(g: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn kappa_solver() -> Outcome {
    let mut rng = Rng(0x5EED_0008);
    let mut instances = 0;
    let mut worst_residual: f64 = 0.0;
    let mut worst_agreement: f64 = 0.0;
    while instances < 500 {
        let p = random_spd(&mut rng);
        let cfg = GovernorConfig::default();
        let eps = rng.range(cfg.eps0, 0.3);
        let limit = cfg.x_bar - eps;
        let prev = rng.range(-0.9, 0.9) * limit;
        // A state inside the sublevel set around `prev`.
        let level = gamma(&p, prev, cfg.x_bar, eps) * rng.unit();
        let dir = Vector2::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
        let scale = (level / (dir.transpose() * p * dir)[0]).sqrt();
        let z = RefModelState::new(prev + scale * dir[0], scale * dir[1]);
        let x_d = rng.range(-2.0, 2.0);
        let g = |k: f64| {
            let xt = prev + k * (x_d - prev);
            lyapunov_value(&p, &z, xt) - gamma(&p, xt, cfg.x_bar, eps)
        };
        if !(g(0.0) <= 0.0 && g(1.0) > 0.0) {
            continue;
        }
        instances += 1;
        let mut gs = GovernorState::new(prev);
        let sol = solve_kappa(&mut gs, &cfg, &p, &z, x_d, eps);
        let kappa = sol.kappa.ok_or("solver reported infeasible with g(0) <= 0")?;
        if kappa < 1.0 {
            let r = (sol.v - sol.gamma).abs() / sol.gamma.max(1.0);
            worst_residual = worst_residual.max(r);
        }
        worst_agreement = worst_agreement.max((kappa - bisection_oracle(g)).abs());
    }
    check(
        worst_residual <= 1e-6 && worst_agreement <= 1e-9,
        format!("worst |V - Gamma| {worst_residual:.2e}, worst oracle gap {worst_agreement:.2e} over 500 instances"),
    )
}

fn numerical_hygiene(governed: &SimRun) -> Outcome {
    let decay = |dt: f64| {
        let mut y = [1.0];
        let steps = (1.0 / dt).round() as usize;
        for i in 0..steps {
            y = step_rk4(i as f64 * dt, &y, dt, |_, s| [-s[0]]).unwrap();
        }
        (y[0] - (-1.0f64).exp()).abs()
    };
    let ratio = decay(0.1) / decay(0.05);

    let fine = SimConfig { dt: 0.005, ..Default::default() };
    let fine_run = run_scenario(&fine).map_err(|e| e.to_string())?;
    let drift = (fine_run.summary.max_abs_x - governed.summary.max_abs_x).abs();

    let again = run_scenario(&SimConfig::default()).map_err(|e| e.to_string())?;
    let identical = again.records.len() == governed.records.len()
        && again.records.iter().zip(&governed.records).all(|(a, b)| {
            [a.x, a.x_m, a.e_im, a.j_hat, a.b_hat, a.u, a.x_tilde_d, a.v_adapt]
                .iter()
                .zip([b.x, b.x_m, b.e_im, b.j_hat, b.b_hat, b.u, b.x_tilde_d, b.v_adapt])
                .all(|(p, q)| p.to_bits() == q.to_bits())
        });
    check(
        ratio >= 12.0 && drift < 1e-4 && identical,
        format!("RK4 error ratio {ratio:.2}, max|x| change under dt/2 {drift:.2e}, bit-identical rerun = {identical}"),
    )
}

fn main() {
    let governed = governed_run();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 model identification", model_identification()),
        (
            "2 governed scenario",
            governed.as_ref().map_err(Clone::clone).and_then(|(r, t)| governed_scenario(r, *t)),
        ),
        (
            "3 baseline comparison",
            governed.as_ref().map_err(Clone::clone).and_then(|(r, _)| baseline_comparison(r)),
        ),
        ("4 gamma oracle", gamma_oracle()),
        (
            "5 lyapunov properties",
            governed.as_ref().map_err(Clone::clone).and_then(|(r, _)| lyapunov_properties(r)),
        ),
        ("6 reference-model invariants", reference_invariants()),
        ("7 governor invariance", governor_invariance()),
        ("8 kappa solver", kappa_solver()),
        (
            "9 numerical hygiene",
            governed.as_ref().map_err(Clone::clone).and_then(|(r, _)| numerical_hygiene(r)),
        ),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
