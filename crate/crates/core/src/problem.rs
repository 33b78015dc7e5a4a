//! Scene energy: K agents sharing one cost, each agent's obstacle set being
//! the static obstacles followed by the other agents' current positions.
//! Gradients w.r.t. the controls are accumulated backward through the
//! unrolled dynamics.

use crate::cost::CostFunction;
use crate::dynamics::DynamicsVariant;
use crate::error::{Error, Result};
use crate::features::{eval_frame, FrameEval, FrameInput, FRAME_VARS, N_FEATURES, OBSTACLE};
use crate::types::{Control, ControlBounds, Demonstration, Environment, History, JointScene, State, Trajectory};

/// Anything with a differentiable scalar energy over a flat vector.
pub trait Energy: Sync {
    fn dim(&self) -> usize;
    fn energy(&self, w: &[f64]) -> Result<f64>;
    fn energy_grad(&self, w: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Parameterization of the per-agent decision variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    /// Raw absolute controls.
    Absolute,
    /// Raw increments over the previous control.
    Delta,
    /// Increments divided by the control standard deviation.
    NormalizedDelta,
    /// `(u - mean) / std`.
    NormalizedAbsolute,
}

/// One agent's fixed context.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentProblem {
    pub x0: State,
    pub anchor: Control,
    pub env: Environment,
    pub history: History,
}

impl AgentProblem {
    pub fn from_demo(d: &Demonstration) -> Self {
        Self { x0: d.x0(), anchor: d.anchor(), env: d.env.clone(), history: d.history.clone() }
    }
}

/// Agents of a joint scene with only their own static obstacles; the other
/// agents enter through the coupling.
pub fn scene_agents(scene: &JointScene) -> Vec<AgentProblem> {
    scene.agents.iter().map(AgentProblem::from_demo).collect()
}

pub struct SceneEval {
    pub energy: f64,
    pub grad: Option<Vec<f64>>,
    pub d_params: Option<Vec<f64>>,
    pub trajectories: Vec<Trajectory>,
}

pub struct Scene<'a> {
    pub agents: Vec<AgentProblem>,
    pub horizon: usize,
    pub cost: &'a CostFunction,
    pub dynamics: DynamicsVariant,
    pub param: Param,
    /// Decoded controls are clipped to these bounds.
    pub bounds: ControlBounds,
}

impl<'a> Scene<'a> {
    pub fn new(
        agents: Vec<AgentProblem>,
        horizon: usize,
        cost: &'a CostFunction,
        dynamics: DynamicsVariant,
        param: Param,
    ) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::Structure("scene has no agents".into()));
        }
        if horizon == 0 {
            return Err(Error::Structure("horizon must be positive".into()));
        }
        for a in &agents {
            a.env.validate(horizon)?;
        }
        if let Some(h) = cost.model.required_horizon() {
            if h != horizon {
                return Err(Error::Shape(format!("conv cost built for horizon {h}, scene horizon {horizon}")));
            }
        }
        Ok(Self { agents, horizon, cost, dynamics, param, bounds: ControlBounds::default() })
    }

    pub fn single(agent: AgentProblem, horizon: usize, cost: &'a CostFunction, dynamics: DynamicsVariant, param: Param) -> Result<Self> {
        Self::new(vec![agent], horizon, cost, dynamics, param)
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn dim(&self) -> usize {
        self.agents.len() * self.horizon * 2
    }

    fn block<'w>(&self, w: &'w [f64], k: usize) -> &'w [f64] {
        let n = 2 * self.horizon;
        &w[k * n..(k + 1) * n]
    }

    fn scale(&self) -> [f64; 2] {
        self.cost.normalizer.control_std
    }

    pub fn with_bounds(mut self, bounds: ControlBounds) -> Self {
        self.bounds = bounds;
        self
    }

    /// Absolute controls of agent `k` from the decision vector.
    pub fn agent_controls(&self, w: &[f64], k: usize) -> Vec<Control> {
        self.decode(w, k).0
    }

    /// Clipped controls and, per component, whether the clip is inactive.
    fn decode(&self, w: &[f64], k: usize) -> (Vec<Control>, Vec<[bool; 2]>) {
        let b = self.block(w, k);
        let sd = self.scale();
        let mu = self.cost.normalizer.control_mean;
        let max = [self.bounds.accel_max, self.bounds.steer_max];
        let mut prev = self.agents[k].anchor;
        b.chunks_exact(2)
            .map(|c| {
                let raw = match self.param {
                    Param::Absolute => Control::new(c[0], c[1]),
                    Param::Delta => prev + Control::new(c[0], c[1]),
                    Param::NormalizedDelta => prev + Control::new(sd[0] * c[0], sd[1] * c[1]),
                    Param::NormalizedAbsolute => Control::new(mu[0] + sd[0] * c[0], mu[1] + sd[1] * c[1]),
                };
                let r = raw.to_array();
                let free = [r[0].abs() <= max[0], r[1].abs() <= max[1]];
                let u = self.bounds.clip(raw);
                prev = u;
                (u, free)
            })
            .unzip()
    }

    pub fn controls(&self, w: &[f64]) -> Vec<Vec<Control>> {
        (0..self.agents.len()).map(|k| self.agent_controls(w, k)).collect()
    }

    /// Inverse of [`Scene::controls`].
    pub fn encode(&self, controls: &[Vec<Control>]) -> Result<Vec<f64>> {
        if controls.len() != self.agents.len() {
            return Err(Error::Structure(format!("{} control sequences for {} agents", controls.len(), self.agents.len())));
        }
        let sd = self.scale();
        let mu = self.cost.normalizer.control_mean;
        let mut w = Vec::with_capacity(self.dim());
        for (k, seq) in controls.iter().enumerate() {
            if seq.len() != self.horizon {
                return Err(Error::Structure(format!("agent {k}: {} controls for horizon {}", seq.len(), self.horizon)));
            }
            let mut prev = self.agents[k].anchor;
            for u in seq {
                let d = *u - prev;
                let v = match self.param {
                    Param::Absolute => u.to_array(),
                    Param::Delta => d.to_array(),
                    Param::NormalizedDelta => [d.accel / sd[0], d.steer / sd[1]],
                    Param::NormalizedAbsolute => [(u.accel - mu[0]) / sd[0], (u.steer - mu[1]) / sd[1]],
                };
                w.extend(v);
                prev = *u;
            }
        }
        Ok(w)
    }

    /// Decision vector of all-zero absolute controls.
    pub fn zero_init(&self) -> Vec<f64> {
        let zeros = vec![vec![Control::default(); self.horizon]; self.agents.len()];
        self.encode(&zeros).expect("consistent shapes")
    }

    pub fn rollout(&self, w: &[f64]) -> Result<Vec<Trajectory>> {
        if w.len() != self.dim() {
            return Err(Error::Shape(format!("decision vector of length {} for dimension {}", w.len(), self.dim())));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("decision vector".into()));
        }
        (0..self.agents.len())
            .map(|k| self.dynamics.unroll_absolute(&self.agents[k].x0, &self.agent_controls(w, k)))
            .collect()
    }

    /// Obstacles seen by agent `k` at frame `t`.
    pub fn frame_obstacles(&self, k: usize, t: usize, trajs: &[Trajectory]) -> Vec<[f64; 2]> {
        let mut obs: Vec<[f64; 2]> = self.agents[k].env.obstacles.iter().map(|o| o.positions[t]).collect();
        for (m, tr) in trajs.iter().enumerate() {
            if m != k {
                obs.push(tr.states[t].position());
            }
        }
        obs
    }

    fn agent_frames(&self, k: usize, trajs: &[Trajectory]) -> Vec<FrameEval> {
        let a = &self.agents[k];
        let tr = &trajs[k];
        (0..self.horizon)
            .map(|t| {
                let obs = self.frame_obstacles(k, t, trajs);
                let input = FrameInput {
                    state: tr.states[t],
                    control: tr.controls[t],
                    prev_control: if t == 0 { a.anchor } else { tr.controls[t - 1] },
                    is_final: t + 1 == self.horizon,
                    obstacles: &obs,
                };
                eval_frame(&input, &a.env, &self.cost.features)
            })
            .collect()
    }

    /// Normalized frame features of agent `k` under the coupling.
    pub fn agent_features(&self, k: usize, trajs: &[Trajectory]) -> Result<Vec<[f64; N_FEATURES]>> {
        self.check_trajs(trajs)?;
        Ok(self.normalized(&self.agent_frames(k, trajs)))
    }

    /// Joint cost of given trajectories, optionally with the parameter gradient.
    pub fn evaluate_trajectories(&self, trajs: &[Trajectory], want_params: bool) -> Result<(f64, Option<Vec<f64>>)> {
        self.check_trajs(trajs)?;
        let mut total = 0.0;
        let mut d_params = want_params.then(|| vec![0.0; self.cost.model.n_params()]);
        for k in 0..self.agents.len() {
            let feats = self.normalized(&self.agent_frames(k, trajs));
            if want_params {
                let b = self.cost.model.backward(&feats, true)?;
                total += b.value;
                add_into(d_params.as_mut().unwrap(), b.d_params.as_ref().unwrap());
            } else {
                total += self.cost.model.value(&feats)?;
            }
        }
        finite(total, "energy")?;
        Ok((total, d_params))
    }

    fn check_trajs(&self, trajs: &[Trajectory]) -> Result<()> {
        if trajs.len() != self.agents.len() {
            return Err(Error::Structure(format!("{} trajectories for {} agents", trajs.len(), self.agents.len())));
        }
        for (k, t) in trajs.iter().enumerate() {
            if t.states.len() != self.horizon || t.controls.len() != self.horizon {
                return Err(Error::Structure(format!("agent {k}: trajectory length {} for horizon {}", t.len(), self.horizon)));
            }
        }
        Ok(())
    }

    fn normalized(&self, frames: &[FrameEval]) -> Vec<[f64; N_FEATURES]> {
        frames.iter().map(|f| self.cost.normalizer.apply(&f.values)).collect()
    }

    pub fn evaluate(&self, w: &[f64], want_grad: bool, want_params: bool) -> Result<SceneEval> {
        let trajs = self.rollout(w)?;
        if !want_grad {
            let (energy, d_params) = self.evaluate_trajectories(&trajs, want_params)?;
            return Ok(SceneEval { energy, grad: None, d_params, trajectories: trajs });
        }
        let n_agents = self.agents.len();
        let t_len = self.horizon;
        let div = self.cost.normalizer.divisors;
        let mut gx = vec![vec![[0.0; 4]; t_len]; n_agents];
        let mut gu = vec![vec![[0.0; 2]; t_len]; n_agents];
        let mut energy = 0.0;
        let mut d_params = want_params.then(|| vec![0.0; self.cost.model.n_params()]);
        for k in 0..n_agents {
            let frames = self.agent_frames(k, &trajs);
            let b = self.cost.model.backward(&self.normalized(&frames), want_params)?;
            energy += b.value;
            if let (Some(acc), Some(dp)) = (d_params.as_mut(), b.d_params.as_ref()) {
                add_into(acc, dp);
            }
            let n_static = self.agents[k].env.obstacles.len();
            for (t, fe) in frames.iter().enumerate() {
                let mut gz = [0.0; FRAME_VARS];
                for j in 0..N_FEATURES {
                    let wj = b.d_feats[t][j] / div[j];
                    if wj == 0.0 {
                        continue;
                    }
                    for (g, d) in gz.iter_mut().zip(&fe.jac[j]) {
                        *g += wj * d;
                    }
                }
                for i in 0..4 {
                    gx[k][t][i] += gz[i];
                }
                gu[k][t][0] += gz[4];
                gu[k][t][1] += gz[5];
                if t > 0 {
                    gu[k][t - 1][0] += gz[6];
                    gu[k][t - 1][1] += gz[7];
                }
                let w_obs = b.d_feats[t][OBSTACLE] / div[OBSTACLE];
                if w_obs != 0.0 {
                    let others = (0..n_agents).filter(|&m| m != k);
                    for (og, m) in fe.obstacle_grad[n_static..].iter().zip(others) {
                        gx[m][t][0] += w_obs * og[0];
                        gx[m][t][1] += w_obs * og[1];
                    }
                }
            }
        }
        finite(energy, "energy")?;
        let mut grad = Vec::with_capacity(self.dim());
        for k in 0..n_agents {
            let du = self.adjoint(k, &trajs[k], &gx[k], &gu[k])?;
            grad.extend(self.map_grad(&du, &self.decode(w, k).1));
        }
        if let Some((i, _)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::NonFinite(format!("energy gradient entry {i}")));
        }
        Ok(SceneEval { energy, grad: Some(grad), d_params, trajectories: trajs })
    }

    /// `lambda <- lambda + gx_t; du_t = gu_t + B_t^T lambda; lambda <- A_t^T lambda`.
    fn adjoint(&self, k: usize, tr: &Trajectory, gx: &[[f64; 4]], gu: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        let mut lam = [0.0; 4];
        let mut du = vec![[0.0; 2]; self.horizon];
        for t in (0..self.horizon).rev() {
            for i in 0..4 {
                lam[i] += gx[t][i];
            }
            let prev = if t == 0 { self.agents[k].x0 } else { tr.states[t - 1] };
            let (a, b) = self.dynamics.jacobians(&prev, &tr.controls[t]).map_err(|e| e.at_step(t))?;
            for j in 0..2 {
                du[t][j] = gu[t][j] + (0..4).map(|i| b[i][j] * lam[i]).sum::<f64>();
            }
            let mut nl = [0.0; 4];
            for (j, n) in nl.iter_mut().enumerate() {
                *n = (0..4).map(|i| a[i][j] * lam[i]).sum();
            }
            lam = nl;
        }
        Ok(du)
    }

    /// Absolute-control gradient mapped onto the decision variables;
    /// saturated components pass no gradient.
    fn map_grad(&self, du: &[[f64; 2]], free: &[[bool; 2]]) -> Vec<f64> {
        let sd = self.scale();
        let mask = |t: usize, j: usize| if free[t][j] { 1.0 } else { 0.0 };
        let mut g = vec![0.0; 2 * du.len()];
        match self.param {
            Param::Absolute | Param::NormalizedAbsolute => {
                let s = if self.param == Param::Absolute { [1.0, 1.0] } else { sd };
                for (t, d) in du.iter().enumerate() {
                    for j in 0..2 {
                        g[2 * t + j] = d[j] * s[j] * mask(t, j);
                    }
                }
            }
            Param::Delta | Param::NormalizedDelta => {
                let s = if self.param == Param::Delta { [1.0, 1.0] } else { sd };
                // total derivative w.r.t. u_t flows into u_{t-1} only through
                // an unsaturated clip
                let mut carry = [0.0; 2];
                for t in (0..du.len()).rev() {
                    for j in 0..2 {
                        let a = du[t][j] + carry[j];
                        g[2 * t + j] = a * s[j] * mask(t, j);
                        carry[j] = a * mask(t, j);
                    }
                }
            }
        }
        g
    }
}

impl Energy for Scene<'_> {
    fn dim(&self) -> usize {
        Scene::dim(self)
    }

    fn energy(&self, w: &[f64]) -> Result<f64> {
        Ok(self.evaluate(w, false, false)?.energy)
    }

    fn energy_grad(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let e = self.evaluate(w, true, false)?;
        Ok((e.energy, e.grad.expect("requested")))
    }
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{CostKind, CostModel, CostSpec};
    use crate::features::{FeatureConfig, FeatureNormalizer};
    use crate::types::{HistoryFrame, Lane, OtherVehicleTrack};
    use rand::{Rng, SeedableRng};

    fn agent(x: f64, y: f64, goal: [f64; 2], obstacles: Vec<OtherVehicleTrack>) -> AgentProblem {
        let s = State::new(x, y, 8.0, 0.0);
        let u = Control::new(0.3, 0.01);
        AgentProblem {
            x0: s,
            anchor: u,
            env: Environment { lane: Lane { coeffs: [0.5, 0.01, 0.001, 0.0] }, speed_limit: 10.0, goal, dt: 0.1, obstacles },
            history: History::new(vec![HistoryFrame { state: s, control: u }]).unwrap(),
        }
    }

    fn cost(kind: CostKind, horizon: usize, seed: u64) -> CostFunction {
        let mut r = crate::rng::Rng::seed_from_u64(seed);
        let model = CostModel::init(CostSpec::default_for(kind, horizon), &mut r).unwrap();
        let normalizer = FeatureNormalizer {
            divisors: [3.0, 2.0, 0.5, 1.0, 0.1, 1.0, 0.01, 0.5, 0.001, 20.0],
            control_mean: [0.1, 0.0],
            control_std: [1.5, 0.05],
        };
        CostFunction::new(model, normalizer, FeatureConfig { obstacle_cap: 15.0, ..Default::default() })
    }

    fn fd(e: &dyn Energy, w: &[f64], eps: f64) -> Vec<f64> {
        (0..w.len())
            .map(|i| {
                let mut a = w.to_vec();
                let mut b = w.to_vec();
                a[i] += eps;
                b[i] -= eps;
                (e.energy(&a).unwrap() - e.energy(&b).unwrap()) / (2.0 * eps)
            })
            .collect()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn gradient_matches_fd_for_every_parameterization() {
        let obs = vec![OtherVehicleTrack { positions: (0..6).map(|t| [6.0 + 0.5 * t as f64, 1.5]).collect() }];
        let c = cost(CostKind::Mlp, 6, 3);
        for param in [Param::Absolute, Param::Delta, Param::NormalizedDelta, Param::NormalizedAbsolute] {
            let s = Scene::single(agent(0.0, 0.0, [5.0, 1.0], obs.clone()), 6, &c, DynamicsVariant::default(), param).unwrap();
            let mut r = crate::rng::Rng::seed_from_u64(5);
            let w: Vec<f64> = (0..s.dim()).map(|i| if i % 2 == 0 { r.random_range(-0.5..0.5) } else { r.random_range(-0.02..0.02) }).collect();
            let (_, g) = s.energy_grad(&w).unwrap();
            assert!(rel(&g, &fd(&s, &w, 1e-6)) < 1e-6, "{param:?}");
        }
    }

    #[test]
    fn coupled_gradient_matches_fd() {
        let c = cost(CostKind::Linear, 5, 4);
        let agents = vec![agent(0.0, 0.0, [4.0, 0.0], vec![]), agent(3.0, 1.0, [7.0, 1.0], vec![]), agent(1.0, -2.0, [5.0, -2.0], vec![])];
        let s = Scene::new(agents, 5, &c, DynamicsVariant::default(), Param::NormalizedDelta).unwrap();
        let mut r = crate::rng::Rng::seed_from_u64(6);
        let w: Vec<f64> = (0..s.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
        let (_, g) = s.energy_grad(&w).unwrap();
        assert!(rel(&g, &fd(&s, &w, 1e-6)) < 1e-6);
    }

    #[test]
    fn saturated_controls_are_clipped_and_differentiated() {
        let obs = vec![OtherVehicleTrack { positions: (0..6).map(|t| [6.0 + 0.5 * t as f64, 1.5]).collect() }];
        let c = cost(CostKind::Mlp, 6, 3);
        let b = ControlBounds { accel_max: 1.0, steer_max: 0.05 };
        for param in [Param::Absolute, Param::NormalizedDelta] {
            let s = Scene::single(agent(0.0, 0.0, [5.0, 1.0], obs.clone()), 6, &c, DynamicsVariant::default(), param).unwrap().with_bounds(b);
            let mut r = crate::rng::Rng::seed_from_u64(9);
            // increments big enough that several steps hit the bounds, away from the kinks
            let w: Vec<f64> = (0..s.dim())
                .map(|i| {
                    let m = if param == Param::Absolute { [1.0, 0.05] } else { [0.6, 0.8] };
                    let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
                    sign * m[i % 2] * r.random_range(0.2..1.9)
                })
                .collect();
            let u = s.agent_controls(&w, 0);
            assert!(u.iter().all(|u| b.contains(u)));
            assert!(u.iter().any(|u| u.accel.abs() == 1.0 || u.steer.abs() == 0.05));
            let (_, g) = s.energy_grad(&w).unwrap();
            assert!(rel(&g, &fd(&s, &w, 1e-7)) < 1e-5, "{param:?}");
        }
    }

    #[test]
    fn control_only_cost_gradient_is_closed_form() {
        let mut theta = [0.0; N_FEATURES];
        theta[5] = 1.0;
        let c = CostFunction::new(CostModel::linear(theta), FeatureNormalizer::identity(), FeatureConfig::default());
        let s = Scene::single(agent(0.0, 0.0, [1.0, 0.0], vec![]), 4, &c, DynamicsVariant::default(), Param::Absolute).unwrap();
        let w = vec![0.3, 0.0, -1.2, 0.1, 2.0, 0.0, 0.7, -0.1];
        let (_, g) = s.energy_grad(&w).unwrap();
        for t in 0..4 {
            assert!((g[2 * t] - 2.0 * w[2 * t]).abs() < 1e-12);
            assert_eq!(g[2 * t + 1], 0.0);
        }
    }

    #[test]
    fn goal_cost_assigns_credit_to_every_step() {
        let mut theta = [0.0; N_FEATURES];
        theta[0] = 1.0;
        let c = CostFunction::new(CostModel::linear(theta), FeatureNormalizer::identity(), FeatureConfig::default());
        let s = Scene::single(agent(0.0, 0.0, [100.0, 0.0], vec![]), 8, &c, DynamicsVariant::default(), Param::Absolute).unwrap();
        let w = s.zero_init();
        let (_, g) = s.energy_grad(&w).unwrap();
        // the final acceleration only changes the final speed, not the position
        for t in 0..7 {
            assert!(g[2 * t] != 0.0, "step {t}");
        }
        assert_eq!(g[14], 0.0);
        assert!(rel(&g, &fd(&s, &w, 1e-6)) < 1e-6);
    }

    #[test]
    fn encode_inverts_controls() {
        let c = cost(CostKind::Linear, 5, 1);
        for param in [Param::Absolute, Param::Delta, Param::NormalizedDelta, Param::NormalizedAbsolute] {
            let s = Scene::single(agent(0.0, 0.0, [4.0, 0.0], vec![]), 5, &c, DynamicsVariant::default(), param).unwrap();
            let w: Vec<f64> = (0..10).map(|i| 0.1 * i as f64 - 0.4).collect();
            let back = s.encode(&s.controls(&w)).unwrap();
            for (a, b) in w.iter().zip(back) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn far_agents_decouple() {
        let c = cost(CostKind::Linear, 4, 2);
        let a = agent(0.0, 0.0, [3.0, 0.0], vec![]);
        let b = agent(500.0, 40.0, [503.0, 40.0], vec![]);
        let joint = Scene::new(vec![a.clone(), b.clone()], 4, &c, DynamicsVariant::default(), Param::NormalizedDelta).unwrap();
        let w = joint.zero_init();
        let sa = Scene::single(a, 4, &c, DynamicsVariant::default(), Param::NormalizedDelta).unwrap();
        let sb = Scene::single(b, 4, &c, DynamicsVariant::default(), Param::NormalizedDelta).unwrap();
        let sum = sa.energy(&w[..8]).unwrap() + sb.energy(&w[8..]).unwrap();
        assert!((joint.energy(&w).unwrap() - sum).abs() < 1e-9 * sum.abs().max(1.0));
    }

    #[test]
    fn empty_scene_is_rejected() {
        let c = cost(CostKind::Linear, 4, 2);
        assert!(Scene::new(vec![], 4, &c, DynamicsVariant::default(), Param::Absolute).is_err());
    }
}
