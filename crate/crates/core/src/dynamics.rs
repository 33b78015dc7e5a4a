//! Vehicle dynamics `x_t = f(x_{t-1}, u_t)`, its Jacobians, trajectory
//! unrolling and inverse-dynamics control fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{wrap_angle, Control, ControlMode, ControlSequence, Demonstration, State, Trajectory};

/// 4x4 state Jacobian, row-major.
pub type StateJac = [[f64; 4]; 4];
/// 4x2 control Jacobian, row-major.
pub type ControlJac = [[f64; 2]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    /// Transcription of the published five-line update (radius term, the
    /// 3.043 v^2 / 9.8 heading term).
    PaperLiteral,
    /// Standard kinematic bicycle.
    #[default]
    CorrectedBicycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsVariant {
    pub kind: DynamicsKind,
    pub wheelbase: f64,
    pub dt: f64,
}

impl Default for DynamicsVariant {
    fn default() -> Self {
        Self { kind: DynamicsKind::CorrectedBicycle, wheelbase: 3.0, dt: 0.1 }
    }
}

const STEER_LIMIT: f64 = std::f64::consts::FRAC_PI_2;

impl DynamicsVariant {
    pub fn corrected(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    pub fn paper_literal(dt: f64) -> Self {
        Self { kind: DynamicsKind::PaperLiteral, dt, ..Self::default() }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wheelbase > 0.0) || !(self.dt > 0.0) {
            return Err(Error::Config(format!(
                "wheelbase {} and dt {} must be positive",
                self.wheelbase, self.dt
            )));
        }
        Ok(())
    }

    pub fn step(&self, s: &State, u: &Control) -> Result<State> {
        if !(u.steer.abs() < STEER_LIMIT) {
            return Err(Error::Domain { term: "steering angle |steer| < pi/2", step: None });
        }
        let dt = self.dt;
        let next = match self.kind {
            DynamicsKind::CorrectedBicycle => {
                let (sh, ch) = s.h.sin_cos();
                State::new(
                    s.x + s.v * dt * ch,
                    s.y + s.v * dt * sh,
                    s.v + u.accel * dt,
                    wrap_angle(s.h + s.v * dt / self.wheelbase * u.steer.tan()),
                )
            }
            DynamicsKind::PaperLiteral => {
                let lit = Literal::eval(s, u, dt)?;
                State::new(
                    s.x + lit.sin_t * lit.r,
                    s.y + lit.cos_t * lit.r,
                    s.v + u.accel * dt,
                    wrap_angle(s.h + lit.g.asin()),
                )
            }
        };
        if !next.is_finite() {
            return Err(Error::NonFinite("dynamics step produced a non-finite state".into()));
        }
        Ok(next)
    }

    /// Analytic `(A, B) = (d step / d state, d step / d control)`.
    pub fn jacobians(&self, s: &State, u: &Control) -> Result<(StateJac, ControlJac)> {
        if !(u.steer.abs() < STEER_LIMIT) {
            return Err(Error::Domain { term: "steering angle |steer| < pi/2", step: None });
        }
        let dt = self.dt;
        match self.kind {
            DynamicsKind::CorrectedBicycle => {
                let (sh, ch) = s.h.sin_cos();
                let l = self.wheelbase;
                let tan = u.steer.tan();
                let cos_s = u.steer.cos();
                let a = [
                    [1.0, 0.0, dt * ch, -s.v * dt * sh],
                    [0.0, 1.0, dt * sh, s.v * dt * ch],
                    [0.0, 0.0, 1.0, 0.0],
                    [0.0, 0.0, dt / l * tan, 1.0],
                ];
                let b = [[0.0, 0.0], [0.0, 0.0], [dt, 0.0], [0.0, s.v * dt / (l * cos_s * cos_s)]];
                Ok((a, b))
            }
            DynamicsKind::PaperLiteral => {
                let lit = Literal::eval(s, u, dt)?;
                let (st, ct) = (lit.sin_t, lit.cos_t);
                // r = 3 + v dt cos(th) - sqrt(9 - q^2), q = h dt sin(th)
                let dr_dv = dt * ct;
                let dr_dh = lit.q * dt * st / lit.sq;
                let dr_dth = -s.v * dt * st + lit.q * s.h * dt * ct / lit.sq;
                // g = sin(th) v dt / (3.043 v^2 / 9.8)
                let den = (1.0 - lit.g * lit.g).sqrt();
                let dg_dv = -9.8 * dt * st / (3.043 * s.v * s.v);
                let dg_dth = 9.8 * dt * ct / (3.043 * s.v);
                let a = [
                    [1.0, 0.0, st * dr_dv, st * dr_dh],
                    [0.0, 1.0, ct * dr_dv, ct * dr_dh],
                    [0.0, 0.0, 1.0, 0.0],
                    [0.0, 0.0, dg_dv / den, 1.0],
                ];
                let b = [
                    [0.0, ct * lit.r + st * dr_dth],
                    [0.0, -st * lit.r + ct * dr_dth],
                    [dt, 0.0],
                    [0.0, dg_dth / den],
                ];
                Ok((a, b))
            }
        }
    }

    /// Roll a control sequence forward from `x0`. Delta sequences are
    /// resolved against `anchor`.
    pub fn unroll(&self, x0: &State, seq: &ControlSequence, anchor: Control) -> Result<Trajectory> {
        let controls = match seq.mode {
            ControlMode::Absolute => seq.controls.clone(),
            ControlMode::Delta => seq.to_absolute(anchor).controls,
        };
        self.unroll_absolute(x0, &controls)
    }

    pub fn unroll_absolute(&self, x0: &State, controls: &[Control]) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(controls.len());
        let mut s = *x0;
        for (t, u) in controls.iter().enumerate() {
            s = self.step(&s, u).map_err(|e| e.at_step(t))?;
            states.push(s);
        }
        Ok(Trajectory { states, controls: controls.to_vec() })
    }
}

struct Literal {
    sin_t: f64,
    cos_t: f64,
    q: f64,
    sq: f64,
    r: f64,
    g: f64,
}

impl Literal {
    fn eval(s: &State, u: &Control, dt: f64) -> Result<Self> {
        let (sin_t, cos_t) = u.steer.sin_cos();
        let q = s.h * dt * sin_t;
        let rad = 9.0 - q * q;
        if !(rad > 0.0) {
            return Err(Error::Domain { term: "sqrt(9 - (h dt sin steer)^2)", step: None });
        }
        let sq = rad.sqrt();
        let r = 3.0 + s.v * dt * cos_t - sq;
        if s.v == 0.0 {
            return Err(Error::Domain { term: "arcsin heading term (zero speed)", step: None });
        }
        let g = sin_t * s.v * dt / (3.043 * s.v * s.v / 9.8);
        if !(g.abs() < 1.0) {
            return Err(Error::Domain { term: "arcsin heading term |arg| < 1", step: None });
        }
        Ok(Self { sin_t, cos_t, q, sq, r, g })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InferMethod {
    /// Gradient steps preconditioned by the Gauss-Newton matrix with
    /// adaptive Levenberg damping.
    #[default]
    LevenbergMarquardt,
    /// First-order Adam steps on the back-propagated gradient.
    Adam,
}

/// Settings for fitting controls to an observed position track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferConfig {
    pub method: InferMethod,
    pub iters: usize,
    pub lr: f64,
    /// Per-iteration clamp on each normalized increment update.
    pub clamp: f64,
    /// Control scales used to normalize the delta parameterization.
    pub accel_scale: f64,
    pub steer_scale: f64,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            method: InferMethod::LevenbergMarquardt,
            iters: 500,
            lr: 0.2,
            clamp: 0.1,
            accel_scale: 1.0,
            steer_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InferResult {
    pub controls: ControlSequence,
    pub trajectory: Trajectory,
    pub rmse: f64,
    pub iterations: usize,
}

struct TrackFit<'a> {
    targets: &'a [[f64; 2]],
    x0: State,
    anchor: Control,
    variant: &'a DynamicsVariant,
    scale: [f64; 2],
}

impl TrackFit<'_> {
    fn controls(&self, w: &[f64]) -> Vec<Control> {
        let mut acc = self.anchor;
        (0..self.targets.len())
            .map(|t| {
                acc = acc + Control::new(self.scale[0] * w[2 * t], self.scale[1] * w[2 * t + 1]);
                acc
            })
            .collect()
    }

    fn residuals(&self, traj: &Trajectory) -> Vec<f64> {
        traj.states
            .iter()
            .zip(self.targets)
            .flat_map(|(s, p)| [s.x - p[0], s.y - p[1]])
            .collect()
    }

    fn loss(&self, w: &[f64]) -> Result<(f64, Trajectory)> {
        let traj = self.variant.unroll_absolute(&self.x0, &self.controls(w))?;
        let loss = self.residuals(&traj).iter().map(|r| r * r).sum();
        Ok((loss, traj))
    }

    /// Loss and its gradient by reverse accumulation through the rollout.
    fn loss_grad(&self, w: &[f64]) -> Result<(f64, Vec<f64>, Trajectory)> {
        let t_len = self.targets.len();
        let controls = self.controls(w);
        let traj = self.variant.unroll_absolute(&self.x0, &controls)?;
        let mut loss = 0.0;
        let mut lam = [0.0; 4];
        let mut du = vec![[0.0; 2]; t_len];
        for t in (0..t_len).rev() {
            let s = &traj.states[t];
            let ex = s.x - self.targets[t][0];
            let ey = s.y - self.targets[t][1];
            loss += ex * ex + ey * ey;
            lam[0] += 2.0 * ex;
            lam[1] += 2.0 * ey;
            let prev = if t == 0 { self.x0 } else { traj.states[t - 1] };
            let (a, b) = self.variant.jacobians(&prev, &controls[t]).map_err(|e| e.at_step(t))?;
            for j in 0..2 {
                du[t][j] = (0..4).map(|i| b[i][j] * lam[i]).sum();
            }
            let mut nl = [0.0; 4];
            for (j, n) in nl.iter_mut().enumerate() {
                *n = (0..4).map(|i| a[i][j] * lam[i]).sum();
            }
            lam = nl;
        }
        // suffix sums map absolute-control gradients onto increments
        let mut g = vec![0.0; 2 * t_len];
        let mut acc = [0.0; 2];
        for t in (0..t_len).rev() {
            for j in 0..2 {
                acc[j] += du[t][j];
                g[2 * t + j] = acc[j] * self.scale[j];
            }
        }
        Ok((loss, g, traj))
    }

    /// Jacobian of the stacked position residuals w.r.t. the increments, by
    /// forward sensitivity propagation.
    fn jacobian(&self, w: &[f64], traj: &Trajectory) -> Result<nalgebra::DMatrix<f64>> {
        let t_len = self.targets.len();
        let n = 2 * t_len;
        let controls = self.controls(w);
        let mut sens = nalgebra::DMatrix::<f64>::zeros(4, n);
        let mut jac = nalgebra::DMatrix::<f64>::zeros(n, n);
        for t in 0..t_len {
            let prev = if t == 0 { self.x0 } else { traj.states[t - 1] };
            let (a, b) = self.variant.jacobians(&prev, &controls[t]).map_err(|e| e.at_step(t))?;
            let am = nalgebra::Matrix4::from_fn(|i, j| a[i][j]);
            let mut next = nalgebra::DMatrix::<f64>::zeros(4, n);
            next.view_mut((0, 0), (4, n)).copy_from(&(am * &sens));
            // u_t depends on every increment s <= t
            for s in 0..=t {
                for j in 0..2 {
                    for i in 0..4 {
                        next[(i, 2 * s + j)] += b[i][j] * self.scale[j];
                    }
                }
            }
            sens = next;
            jac.row_mut(2 * t).copy_from(&sens.row(0));
            jac.row_mut(2 * t + 1).copy_from(&sens.row(1));
        }
        Ok(jac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub consistent: bool,
    /// Largest per-coordinate deviation between stored and re-unrolled states.
    pub max_error: f64,
    pub worst_step: usize,
}

/// Re-unrolls the expert controls from `x_0` and compares every state
/// coordinate (heading wrapped) with the stored one.
pub fn validate_demonstration(demo: &Demonstration, variant: &DynamicsVariant, tol: f64) -> Result<ValidationReport> {
    demo.check_structure()?;
    let re = variant.unroll_absolute(&demo.x0(), &demo.expert.controls)?;
    let mut max_error = 0.0;
    let mut worst_step = 0;
    for (t, (a, b)) in re.states.iter().zip(&demo.expert.states).enumerate() {
        let e = [a.x - b.x, a.y - b.y, a.v - b.v, wrap_angle(a.h - b.h)].iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if !(e <= max_error) {
            max_error = e;
            worst_step = t;
        }
    }
    Ok(ValidationReport { consistent: max_error <= tol, max_error, worst_step })
}

/// Fit controls whose rollout from `x0` tracks `positions`. `positions[0]` is
/// the position of `x0`; the remaining entries are frames `1..=T`.
///
/// The unknowns are normalized control increments anchored at `anchor`;
/// every iteration's update is clamped component-wise. Returns the best
/// iterate and its positional RMSE.
pub fn infer_controls(
    positions: &[[f64; 2]],
    x0: &State,
    anchor: Control,
    variant: &DynamicsVariant,
    cfg: &InferConfig,
) -> Result<InferResult> {
    if positions.len() < 2 {
        return Err(Error::Structure("need at least two positions".into()));
    }
    let start = positions[0];
    if (start[0] - x0.x).hypot(start[1] - x0.y) > 1e-6 {
        return Err(Error::Structure(format!(
            "first position {:?} does not match the initial state ({}, {})",
            start, x0.x, x0.y
        )));
    }
    let fit = TrackFit {
        targets: &positions[1..],
        x0: *x0,
        anchor,
        variant,
        scale: [cfg.accel_scale, cfg.steer_scale],
    };
    let t_len = fit.targets.len();
    let n = 2 * t_len;
    let mut w = vec![0.0; n];
    let (mut loss, mut traj) = fit.loss(&w)?;
    let mut iterations = 0;
    let diverged = |it: usize| {
        Error::Divergence(format!("inverse dynamics loss became non-finite at iteration {it}; try a smaller lr"))
    };

    match cfg.method {
        InferMethod::LevenbergMarquardt => {
            let mut damping = 1e-3;
            for it in 0..cfg.iters {
                iterations = it + 1;
                let jac = fit.jacobian(&w, &traj)?;
                let r = nalgebra::DVector::from_vec(fit.residuals(&traj));
                let grad = jac.transpose() * &r;
                let gn = jac.transpose() * &jac;
                let mut accepted = false;
                for _ in 0..20 {
                    let mut h = gn.clone();
                    for i in 0..n {
                        h[(i, i)] += damping * (1.0 + gn[(i, i)]);
                    }
                    let Some(step) = h.cholesky().map(|c| c.solve(&grad)) else {
                        damping *= 10.0;
                        continue;
                    };
                    let cand: Vec<f64> =
                        w.iter().zip(step.iter()).map(|(wi, si)| wi - si.clamp(-cfg.clamp, cfg.clamp)).collect();
                    match fit.loss(&cand) {
                        Ok((l, tr)) if l.is_finite() && l < loss => {
                            w = cand;
                            loss = l;
                            traj = tr;
                            damping = (damping / 3.0).max(1e-12);
                            accepted = true;
                            break;
                        }
                        Ok((l, _)) if !l.is_finite() => return Err(diverged(it)),
                        _ => damping *= 4.0,
                    }
                }
                if !accepted || (loss / t_len as f64).sqrt() < 1e-9 {
                    break;
                }
            }
        }
        InferMethod::Adam => {
            let mut m = vec![0.0; n];
            let mut v2 = vec![0.0; n];
            let (b1, b2, eps) = (0.9, 0.999, 1e-12);
            let mut best_w = w.clone();
            for it in 0..cfg.iters {
                iterations = it + 1;
                let (l, g, tr) = fit.loss_grad(&w)?;
                if !l.is_finite() || g.iter().any(|x| !x.is_finite()) {
                    return Err(diverged(it));
                }
                if l < loss {
                    loss = l;
                    best_w.clone_from(&w);
                    traj = tr;
                }
                let k = (it + 1) as f64;
                for i in 0..n {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v2[i] = b2 * v2[i] + (1.0 - b2) * g[i] * g[i];
                    let mh = m[i] / (1.0 - b1.powf(k));
                    let vh = v2[i] / (1.0 - b2.powf(k));
                    w[i] -= (cfg.lr * mh / (vh.sqrt() + eps)).clamp(-cfg.clamp, cfg.clamp);
                }
            }
            let (l, tr) = fit.loss(&w)?;
            if l < loss {
                loss = l;
                traj = tr;
            } else {
                w = best_w;
            }
        }
    }
    if !loss.is_finite() {
        return Err(diverged(iterations));
    }
    Ok(InferResult {
        controls: ControlSequence::absolute(fit.controls(&w)),
        trajectory: traj,
        rmse: (loss / t_len as f64).sqrt(),
        iterations,
    })
}
