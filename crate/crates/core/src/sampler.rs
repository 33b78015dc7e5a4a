//! Trajectory solvers: Langevin dynamics, gradient descent and iLQR.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::dynamics::DynamicsVariant;
use crate::error::{Error, Result};
use crate::features::{eval_frame, FrameInput, FRAME_VARS, N_FEATURES, SHAPES};
use crate::problem::{AgentProblem, Energy, Param, Scene};
use crate::rng::{substream, Rng};
use crate::types::{Control, ControlBounds, ControlSequence, State, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Langevin,
    Gd,
    Ilqr,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "langevin" => Ok(SolverKind::Langevin),
            "gd" => Ok(SolverKind::Gd),
            "ilqr" => Ok(SolverKind::Ilqr),
            other => Err(Error::Config(format!("unknown solver '{other}' (expected langevin|gd|ilqr)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IlqrConfig {
    pub lr_min: f64,
    pub lr_max: f64,
    pub lr_points: usize,
    pub max_iter: usize,
    pub early_stop: f64,
    pub reg_init: f64,
    pub reg_max: f64,
}

impl Default for IlqrConfig {
    fn default() -> Self {
        Self { lr_min: 1e-3, lr_max: 1.0, lr_points: 10, max_iter: 100, early_stop: 1e-3, reg_init: 0.0, reg_max: 1e10 }
    }
}

impl IlqrConfig {
    /// Geometric grid from `lr_max` down to `lr_min`.
    pub fn lr_grid(&self) -> Vec<f64> {
        if self.lr_points <= 1 {
            return vec![self.lr_max];
        }
        let ratio = (self.lr_min / self.lr_max).powf(1.0 / (self.lr_points - 1) as f64);
        (0..self.lr_points).map(|i| self.lr_max * ratio.powi(i as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub kind: SolverKind,
    /// Number of Langevin / gradient steps `l`.
    pub steps: usize,
    /// Langevin `delta`; gradient-descent step size `eta`.
    pub step_size: f64,
    /// Per-step bound on every increment component (normalized units).
    pub clamp: f64,
    /// Multiplier on the Langevin noise term.
    pub noise_scale: f64,
    /// Halve the gradient step while it increases the energy.
    pub backtracking: bool,
    pub seed: u64,
    /// Keep every intermediate iterate.
    pub record_path: bool,
    pub ilqr: IlqrConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Langevin,
            steps: 64,
            step_size: 0.1,
            clamp: 0.1,
            noise_scale: 1.0,
            backtracking: true,
            seed: 0,
            record_path: false,
            ilqr: IlqrConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("sampler steps must be >= 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config(format!("step_size must be > 0, got {}", self.step_size)));
        }
        if !(self.clamp > 0.0) {
            return Err(Error::Config(format!("clamp must be > 0, got {}", self.clamp)));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::Config("noise_scale must be >= 0".into()));
        }
        let il = &self.ilqr;
        if !(il.lr_min > 0.0 && il.lr_max >= il.lr_min) || il.lr_points == 0 || il.max_iter == 0 {
            return Err(Error::Config("invalid ilqr settings".into()));
        }
        Ok(())
    }
}

/// Outcome of a solver over a flat decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub w: Vec<f64>,
    /// Energy at the initial point and after every step.
    pub energy_trace: Vec<f64>,
    pub accepted: usize,
    /// Largest absolute increment component over all steps.
    pub max_increment: f64,
    pub path: Option<Vec<Vec<f64>>>,
}

fn clamp(v: f64, c: f64) -> f64 {
    v.clamp(-c, c)
}

/// `w <- w + clamp(-(delta^2 / 2) grad + noise_scale * delta * z)`.
pub fn langevin_chain(e: &dyn Energy, w0: &[f64], cfg: &SamplerConfig, rng: &mut Rng) -> Result<Chain> {
    cfg.validate()?;
    let d = cfg.step_size;
    let mut w = w0.to_vec();
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut path = cfg.record_path.then(|| vec![w.clone()]);
    let mut max_inc: f64 = 0.0;
    let (mut en, mut g) = e.energy_grad(&w)?;
    for s in 0..cfg.steps {
        check_grad(&g, s)?;
        trace.push(en);
        for (wi, gi) in w.iter_mut().zip(&g) {
            let z: f64 = StandardNormal.sample(rng);
            let inc = clamp(-0.5 * d * d * gi + cfg.noise_scale * d * z, cfg.clamp);
            max_inc = max_inc.max(inc.abs());
            *wi += inc;
        }
        (en, g) = e.energy_grad(&w).map_err(|err| at_iteration(err, s + 1))?;
        if let Some(p) = path.as_mut() {
            p.push(w.clone());
        }
    }
    trace.push(en);
    Ok(Chain { w, energy_trace: trace, accepted: cfg.steps, max_increment: max_inc, path })
}

/// Gradient descent `w <- w - eta grad` with per-component clamping and,
/// unless disabled, step halving until the energy does not increase.
pub fn gd_chain(e: &dyn Energy, w0: &[f64], cfg: &SamplerConfig) -> Result<Chain> {
    cfg.validate()?;
    let mut w = w0.to_vec();
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut path = cfg.record_path.then(|| vec![w.clone()]);
    let mut accepted = 0;
    let mut max_inc: f64 = 0.0;
    let (mut en, mut g) = e.energy_grad(&w)?;
    trace.push(en);
    for s in 0..cfg.steps {
        check_grad(&g, s)?;
        let step: Vec<f64> = g.iter().map(|gi| clamp(-cfg.step_size * gi, cfg.clamp)).collect();
        if step.iter().all(|v| *v == 0.0) {
            trace.push(en);
            if let Some(p) = path.as_mut() {
                p.push(w.clone());
            }
            continue;
        }
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand: Vec<f64> = w.iter().zip(&step).map(|(a, b)| a + scale * b).collect();
            let ce = match e.energy(&cand) {
                Ok(v) => v,
                Err(Error::Domain { .. }) if cfg.backtracking => f64::INFINITY,
                Err(err) => return Err(at_iteration(err, s + 1)),
            };
            if !cfg.backtracking || ce <= en {
                max_inc = max_inc.max(step.iter().fold(0.0f64, |m, v| m.max((scale * v).abs())));
                w = cand;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        if moved {
            accepted += 1;
            (en, g) = e.energy_grad(&w).map_err(|err| at_iteration(err, s + 1))?;
        }
        trace.push(en);
        if let Some(p) = path.as_mut() {
            p.push(w.clone());
        }
    }
    Ok(Chain { w, energy_trace: trace, accepted, max_increment: max_inc, path })
}

fn check_grad(g: &[f64], step: usize) -> Result<()> {
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("gradient component {i} at solver step {step}")));
    }
    Ok(())
}

fn at_iteration(err: Error, s: usize) -> Error {
    match err {
        Error::Domain { term, step } => {
            log::debug!("domain error at solver step {s}");
            Error::Domain { term, step }
        }
        Error::NonFinite(m) => Error::NonFinite(format!("{m} at solver step {s}")),
        other => other,
    }
}

/// Discrete-time optimal control problem with a stage cost on the state
/// reached after each control: `J = sum_t l_t(z_{t+1})`.
pub trait MarkovProblem {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn initial_state(&self) -> DVector<f64>;
    fn step(&self, t: usize, z: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>>;
    fn step_jacobians(&self, t: usize, z: &DVector<f64>, v: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
    fn stage(&self, t: usize, z_next: &DVector<f64>) -> Result<f64>;
    /// Value, gradient and a positive semi-definite curvature model.
    fn stage_quadratic(&self, t: usize, z_next: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)>;
}

#[derive(Debug, Clone)]
pub struct IlqrOutcome {
    pub controls: Vec<DVector<f64>>,
    pub states: Vec<DVector<f64>>,
    /// Total cost at the initialization and after every accepted iteration.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn rollout_markov<P: MarkovProblem + ?Sized>(p: &P, vs: &[DVector<f64>]) -> Result<(Vec<DVector<f64>>, f64)> {
    let mut z = p.initial_state();
    let mut states = Vec::with_capacity(vs.len() + 1);
    states.push(z.clone());
    let mut j = 0.0;
    for (t, v) in vs.iter().enumerate() {
        z = p.step(t, &z, v)?;
        j += p.stage(t, &z)?;
        states.push(z.clone());
    }
    Ok((states, j))
}

pub fn ilqr<P: MarkovProblem + ?Sized>(p: &P, init: Vec<DVector<f64>>, cfg: &IlqrConfig) -> Result<IlqrOutcome> {
    let t_len = p.horizon();
    let (nx, nu) = (p.state_dim(), p.control_dim());
    if init.len() != t_len {
        return Err(Error::Shape(format!("{} initial controls for horizon {t_len}", init.len())));
    }
    let grid = cfg.lr_grid();
    let mut vs = init;
    let (mut zs, mut j) = rollout_markov(p, &vs)?;
    if !j.is_finite() {
        return Err(Error::NonFinite("initial iLQR cost".into()));
    }
    let mut trace = vec![j];
    let mut mu = cfg.reg_init;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut fx = Vec::with_capacity(t_len);
        let mut fu = Vec::with_capacity(t_len);
        let mut lx = Vec::with_capacity(t_len);
        let mut lxx = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let (a, b) = p.step_jacobians(t, &zs[t], &vs[t])?;
            let (_, g, h) = p.stage_quadratic(t, &zs[t + 1])?;
            fx.push(a);
            fu.push(b);
            lx.push(g);
            lxx.push(h);
        }
        // backward pass, raising the regularization until every Quu is PD
        let gains = loop {
            match backward_pass(&fx, &fu, &lx, &lxx, mu, nx, nu) {
                Some(g) => break Some(g),
                None => {
                    mu = (mu * 10.0).max(1e-6);
                    log::debug!("iLQR: Quu not positive definite, regularization raised to {mu:e}");
                    if mu > cfg.reg_max {
                        break None;
                    }
                }
            }
        };
        let Some((ks, kmat)) = gains else { break };
        let mut best: Option<(f64, Vec<DVector<f64>>, Vec<DVector<f64>>)> = None;
        for &alpha in &grid {
            let mut z = p.initial_state();
            let mut cand_v = Vec::with_capacity(t_len);
            let mut cand_z = vec![z.clone()];
            let mut jc = 0.0;
            let mut ok = true;
            for t in 0..t_len {
                let v = &vs[t] + alpha * &ks[t] + &kmat[t] * (&z - &zs[t]);
                match p.step(t, &z, &v).and_then(|zn| p.stage(t, &zn).map(|c| (zn, c))) {
                    Ok((zn, c)) => {
                        jc += c;
                        z = zn;
                    }
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
                cand_v.push(v);
                cand_z.push(z.clone());
            }
            if ok && jc.is_finite() && best.as_ref().is_none_or(|b| jc < b.0) {
                best = Some((jc, cand_v, cand_z));
            }
        }
        match best {
            Some((jb, bv, bz)) if jb <= j => {
                let dc = j - jb;
                if jb < j {
                    vs = bv;
                    zs = bz;
                    j = jb;
                    trace.push(j);
                }
                mu = if mu < 1e-6 { 0.0 } else { mu / 10.0 };
                if dc < cfg.early_stop {
                    converged = true;
                    break;
                }
            }
            _ => {
                mu = (mu * 10.0).max(1e-6);
                log::debug!("iLQR: no descent on the line-search grid, regularization raised to {mu:e}");
                if mu > cfg.reg_max {
                    break;
                }
            }
        }
    }
    Ok(IlqrOutcome { controls: vs, states: zs, cost_trace: trace, iterations, converged })
}

#[allow(clippy::type_complexity)]
fn backward_pass(
    fx: &[DMatrix<f64>],
    fu: &[DMatrix<f64>],
    lx: &[DVector<f64>],
    lxx: &[DMatrix<f64>],
    mu: f64,
    nx: usize,
    nu: usize,
) -> Option<(Vec<DVector<f64>>, Vec<DMatrix<f64>>)> {
    let t_len = fx.len();
    let mut vx = DVector::zeros(nx);
    let mut vxx = DMatrix::zeros(nx, nx);
    let mut ks = vec![DVector::zeros(nu); t_len];
    let mut kmat = vec![DMatrix::zeros(nu, nx); t_len];
    for t in (0..t_len).rev() {
        let wx = &lx[t] + &vx;
        let wxx = &lxx[t] + &vxx;
        let qx = fx[t].transpose() * &wx;
        let qu = fu[t].transpose() * &wx;
        let wfx = &wxx * &fx[t];
        let qxx = fx[t].transpose() * &wfx;
        let qux = fu[t].transpose() * &wfx;
        let quu = fu[t].transpose() * &wxx * &fu[t] + DMatrix::identity(nu, nu) * mu;
        let chol = quu.clone().cholesky()?;
        let k = -chol.solve(&qu);
        let kk = -chol.solve(&qux);
        vx = &qx + kk.transpose() * &quu * &k + kk.transpose() * &qu + qux.transpose() * &k;
        let m = &qxx + kk.transpose() * &quu * &kk + kk.transpose() * &qux + qux.transpose() * &kk;
        vxx = (&m + m.transpose()) * 0.5;
        ks[t] = k;
        kmat[t] = kk;
    }
    Some((ks, kmat))
}

/// Single-agent driving problem on the augmented state
/// `(x, y, v, h, a, steer, a_prev, steer_prev)`, controls in normalized
/// absolute units.
pub struct DrivingProblem<'a> {
    pub agent: &'a AgentProblem,
    pub cost: &'a CostFunction,
    pub dynamics: DynamicsVariant,
    pub horizon: usize,
}

impl<'a> DrivingProblem<'a> {
    pub fn new(agent: &'a AgentProblem, cost: &'a CostFunction, dynamics: DynamicsVariant, horizon: usize) -> Result<Self> {
        if !cost.model.is_markovian() {
            return Err(Error::Unsupported(format!(
                "iLQR requires a per-frame cost; {:?} cost is not decomposable",
                cost.model.kind()
            )));
        }
        agent.env.validate(horizon)?;
        Ok(Self { agent, cost, dynamics, horizon })
    }

    fn raw_control(&self, v: &DVector<f64>) -> Control {
        let n = &self.cost.normalizer;
        Control::new(n.control_mean[0] + n.control_std[0] * v[0], n.control_mean[1] + n.control_std[1] * v[1])
    }

    /// Decoded control, clipped to the default bounds.
    fn control(&self, v: &DVector<f64>) -> Control {
        ControlBounds::default().clip(self.raw_control(v))
    }

    fn frame(&self, t: usize, z: &DVector<f64>) -> crate::features::FrameEval {
        let obs: Vec<[f64; 2]> = self.agent.env.obstacles.iter().map(|o| o.positions[t]).collect();
        let input = FrameInput {
            state: State::new(z[0], z[1], z[2], z[3]),
            control: Control::new(z[4], z[5]),
            prev_control: Control::new(z[6], z[7]),
            is_final: t + 1 == self.horizon,
            obstacles: &obs,
        };
        eval_frame(&input, &self.agent.env, &self.cost.features)
    }

    pub fn encode(&self, controls: &[Control]) -> Vec<DVector<f64>> {
        let n = &self.cost.normalizer;
        controls
            .iter()
            .map(|u| {
                DVector::from_vec(vec![
                    (u.accel - n.control_mean[0]) / n.control_std[0],
                    (u.steer - n.control_mean[1]) / n.control_std[1],
                ])
            })
            .collect()
    }

    pub fn decode(&self, vs: &[DVector<f64>]) -> Vec<Control> {
        vs.iter().map(|v| self.control(v)).collect()
    }
}

impl MarkovProblem for DrivingProblem<'_> {
    fn state_dim(&self) -> usize {
        FRAME_VARS
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial_state(&self) -> DVector<f64> {
        let s = self.agent.x0.to_array();
        let u = self.agent.anchor;
        DVector::from_vec(vec![s[0], s[1], s[2], s[3], u.accel, u.steer, u.accel, u.steer])
    }

    fn step(&self, _t: usize, z: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let u = self.control(v);
        let s = self.dynamics.step(&State::new(z[0], z[1], z[2], z[3]), &u)?;
        Ok(DVector::from_vec(vec![s.x, s.y, s.v, s.h, u.accel, u.steer, z[4], z[5]]))
    }

    fn step_jacobians(&self, _t: usize, z: &DVector<f64>, v: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let u = self.control(v);
        let (a, b) = self.dynamics.jacobians(&State::new(z[0], z[1], z[2], z[3]), &u)?;
        let raw = self.raw_control(v).to_array();
        let bounds = ControlBounds::default();
        let max = [bounds.accel_max, bounds.steer_max];
        let n = &self.cost.normalizer.control_std;
        let sd = [0, 1].map(|j| if raw[j].abs() <= max[j] { n[j] } else { 0.0 });
        let mut fx = DMatrix::zeros(8, 8);
        let mut fu = DMatrix::zeros(8, 2);
        for i in 0..4 {
            for j in 0..4 {
                fx[(i, j)] = a[i][j];
            }
            for j in 0..2 {
                fu[(i, j)] = b[i][j] * sd[j];
            }
        }
        fu[(4, 0)] = sd[0];
        fu[(5, 1)] = sd[1];
        fx[(6, 4)] = 1.0;
        fx[(7, 5)] = 1.0;
        Ok((fx, fu))
    }

    fn stage(&self, t: usize, z: &DVector<f64>) -> Result<f64> {
        let f = self.cost.normalizer.apply(&self.frame(t, z).values);
        Ok(self.cost.model.frame_value_grad(&f)?.0)
    }

    fn stage_quadratic(&self, t: usize, z: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let fe = self.frame(t, z);
        let div = self.cost.normalizer.divisors;
        let f = self.cost.normalizer.apply(&fe.values);
        let (c, dc) = self.cost.model.frame_value_grad(&f)?;
        let mut g = DVector::zeros(FRAME_VARS);
        let mut h = DMatrix::zeros(FRAME_VARS, FRAME_VARS);
        let floor = self.cost.features.curvature_floor;
        for k in 0..N_FEATURES {
            let wk = dc[k] / div[k];
            for i in 0..FRAME_VARS {
                g[i] += wk * fe.jac[k][i];
            }
            let curv = wk.max(0.0) * SHAPES[k].curvature(fe.residuals[k], floor);
            if curv > 0.0 {
                let r = &fe.residual_grad[k];
                for i in 0..FRAME_VARS {
                    for j in 0..FRAME_VARS {
                        h[(i, j)] += curv * r[i] * r[j];
                    }
                }
            }
        }
        Ok((c, g, h))
    }
}

/// Result of a single-agent solve.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub controls: ControlSequence,
    pub trajectory: Trajectory,
    pub energy_trace: Vec<f64>,
    pub accepted: usize,
    pub wall_time: f64,
    /// Absolute controls at every recorded iterate, when requested.
    pub path: Option<Vec<Vec<Control>>>,
}

/// Runs the configured solver on a scene from decision vector `w0`.
/// iLQR is only available for a single agent with a per-frame cost.
pub fn solve_scene(scene: &Scene<'_>, w0: &[f64], cfg: &SamplerConfig, rng: &mut Rng) -> Result<Chain> {
    match cfg.kind {
        SolverKind::Langevin => langevin_chain(scene, w0, cfg, rng),
        SolverKind::Gd => gd_chain(scene, w0, cfg),
        SolverKind::Ilqr => {
            if scene.n_agents() != 1 {
                return Err(Error::Unsupported("iLQR is implemented for single-agent scenes only".into()));
            }
            let controls = scene.agent_controls(w0, 0);
            let dp = DrivingProblem::new(&scene.agents[0], scene.cost, scene.dynamics, scene.horizon)?;
            let out = ilqr(&dp, dp.encode(&controls), &cfg.ilqr)?;
            let w = scene.encode(&[dp.decode(&out.controls)])?;
            let accepted = out.cost_trace.len() - 1;
            Ok(Chain { w, energy_trace: out.cost_trace, accepted, max_increment: f64::NAN, path: None })
        }
    }
}

/// Energy-trace-bearing solve of one agent from initial controls.
pub fn solve(
    cost: &CostFunction,
    init: &ControlSequence,
    agent: &AgentProblem,
    dynamics: &DynamicsVariant,
    cfg: &SamplerConfig,
    rng: &mut Rng,
) -> Result<SolverResult> {
    let start = Instant::now();
    let scene = Scene::single(agent.clone(), init.len(), cost, *dynamics, Param::NormalizedDelta)?;
    let w0 = scene.encode(&[init.resolve(agent.anchor)])?;
    let chain = solve_scene(&scene, &w0, cfg, rng)?;
    let controls = scene.agent_controls(&chain.w, 0);
    let trajectory = dynamics.unroll_absolute(&agent.x0, &controls)?;
    let path = chain.path.as_ref().map(|p| p.iter().map(|w| scene.agent_controls(w, 0)).collect());
    Ok(SolverResult {
        controls: ControlSequence::absolute(controls),
        trajectory,
        energy_trace: chain.energy_trace,
        accepted: chain.accepted,
        wall_time: start.elapsed().as_secs_f64(),
        path,
    })
}

pub fn langevin_sample(
    cost: &CostFunction,
    init: &ControlSequence,
    agent: &AgentProblem,
    dynamics: &DynamicsVariant,
    cfg: &SamplerConfig,
) -> Result<SolverResult> {
    let cfg = SamplerConfig { kind: SolverKind::Langevin, ..cfg.clone() };
    solve(cost, init, agent, dynamics, &cfg, &mut substream(cfg.seed, "langevin", &[]))
}

pub fn gd_optimize(
    cost: &CostFunction,
    init: &ControlSequence,
    agent: &AgentProblem,
    dynamics: &DynamicsVariant,
    cfg: &SamplerConfig,
) -> Result<SolverResult> {
    let cfg = SamplerConfig { kind: SolverKind::Gd, ..cfg.clone() };
    solve(cost, init, agent, dynamics, &cfg, &mut substream(cfg.seed, "gd", &[]))
}

pub fn ilqr_solve(
    cost: &CostFunction,
    init: &ControlSequence,
    agent: &AgentProblem,
    dynamics: &DynamicsVariant,
    cfg: &SamplerConfig,
) -> Result<SolverResult> {
    let cfg = SamplerConfig { kind: SolverKind::Ilqr, ..cfg.clone() };
    solve(cost, init, agent, dynamics, &cfg, &mut substream(cfg.seed, "ilqr", &[]))
}

pub fn write_energy_trace_csv<W: Write>(mut out: W, trace: &[f64]) -> Result<()> {
    writeln!(out, "step,energy")?;
    for (i, e) in trace.iter().enumerate() {
        writeln!(out, "{i},{e}")?;
    }
    Ok(())
}
