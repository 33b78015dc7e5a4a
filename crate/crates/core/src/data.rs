//! Synthetic highway scenarios, oracle experts under a known linear cost,
//! dataset splitting and ingestion of position-only tracks.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{CostFunction, CostModel};
use crate::dynamics::{infer_controls, validate_demonstration, DynamicsVariant, InferConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureNormalizer, FeatureVector};
use crate::multiagent::joint_solve;
use crate::problem::AgentProblem;
use crate::rng::{substream, Rng};
use crate::sampler::{solve, SamplerConfig, SolverKind};
use crate::types::{
    Control, ControlSequence, Demonstration, Environment, History, HistoryFrame, JointScene, Lane, OtherVehicleTrack, State, Trajectory,
};

/// Ranges of the scenario generator. Every `[lo, hi]` pair is sampled
/// uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub count: usize,
    pub horizon: usize,
    pub dt: f64,
    pub history_len: usize,
    /// Agents per scene.
    pub agents: usize,
    pub lane_slope: [f64; 2],
    pub lane_curvature: [f64; 2],
    pub lane_cubic: [f64; 2],
    /// Initial lateral offset from the lane centre.
    pub lateral_offset: [f64; 2],
    pub speed: [f64; 2],
    pub speed_limit: [f64; 2],
    pub warmup_accel: [f64; 2],
    /// Goal distance as a fraction of `speed_limit * horizon * dt`.
    pub goal_fraction: [f64; 2],
    pub goal_lateral: [f64; 2],
    pub obstacle_count: [usize; 2],
    pub obstacle_lon: [f64; 2],
    pub obstacle_lat: [f64; 2],
    pub obstacle_speed: [f64; 2],
    /// Longitudinal spacing between consecutive agents.
    pub agent_spacing: [f64; 2],
    pub agent_lat: [f64; 2],
    /// Minimum spawn distance between any two vehicles.
    pub min_gap: f64,
    pub max_retries: usize,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            count: 100,
            horizon: 40,
            dt: 0.1,
            history_len: 5,
            agents: 1,
            lane_slope: [-0.05, 0.05],
            lane_curvature: [-0.002, 0.002],
            lane_cubic: [0.0, 0.0],
            lateral_offset: [-1.0, 1.0],
            speed: [6.0, 14.0],
            speed_limit: [8.0, 14.0],
            warmup_accel: [-0.5, 0.5],
            goal_fraction: [0.8, 1.0],
            goal_lateral: [-0.5, 0.5],
            obstacle_count: [0, 2],
            obstacle_lon: [10.0, 60.0],
            obstacle_lat: [-4.0, 4.0],
            obstacle_speed: [0.0, 10.0],
            agent_spacing: [10.0, 20.0],
            agent_lat: [-3.5, 3.5],
            min_gap: 6.0,
            max_retries: 50,
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::Config(format!("range {name} = {r:?} is not an ordered finite pair")));
    }
    Ok(())
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.history_len == 0 || self.agents == 0 || self.agents > crate::types::MAX_AGENTS {
            return Err(Error::Config("horizon, history_len and agents must be positive (agents <= 64)".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        for (n, r) in [
            ("lane_slope", self.lane_slope),
            ("lane_curvature", self.lane_curvature),
            ("lane_cubic", self.lane_cubic),
            ("lateral_offset", self.lateral_offset),
            ("speed", self.speed),
            ("speed_limit", self.speed_limit),
            ("warmup_accel", self.warmup_accel),
            ("goal_fraction", self.goal_fraction),
            ("goal_lateral", self.goal_lateral),
            ("obstacle_lon", self.obstacle_lon),
            ("obstacle_lat", self.obstacle_lat),
            ("obstacle_speed", self.obstacle_speed),
            ("agent_spacing", self.agent_spacing),
            ("agent_lat", self.agent_lat),
        ] {
            check_range(n, r)?;
        }
        if self.obstacle_count[0] > self.obstacle_count[1] {
            return Err(Error::Config("obstacle_count must be ordered".into()));
        }
        if !(self.speed[0] > 0.0) || !(self.speed_limit[0] > 0.0) {
            return Err(Error::Config("speeds must be positive".into()));
        }
        Ok(())
    }
}

/// Context of one agent before any expert is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSetup {
    pub history: History,
    pub env: Environment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub horizon: usize,
    pub agents: Vec<AgentSetup>,
}

fn uniform(rng: &mut Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

/// Ego warmup from `(x_start, lane + offset)` under a constant control.
fn warmup(lane: &Lane, x_start: f64, offset: f64, speed: f64, accel: f64, spec: &ScenarioSpec, dyn_: &DynamicsVariant) -> Result<History> {
    let u = Control::new(accel, 0.0);
    let mut s = State::new(x_start, lane.offset(x_start) + offset, speed, lane.heading(x_start));
    let mut frames = Vec::with_capacity(spec.history_len);
    frames.push(HistoryFrame { state: s, control: u });
    for _ in 1..spec.history_len {
        s = dyn_.step(&s, &u)?;
        frames.push(HistoryFrame { state: s, control: u });
    }
    History::new(frames)
}

fn try_scenario(spec: &ScenarioSpec, rng: &mut Rng) -> Result<Option<Scenario>> {
    let dyn_ = DynamicsVariant::default().with_dt(spec.dt);
    let lane = Lane::from([0.0, uniform(rng, spec.lane_slope), uniform(rng, spec.lane_curvature), uniform(rng, spec.lane_cubic)]);
    let speed_limit = uniform(rng, spec.speed_limit);

    let n_obs = rng.random_range(spec.obstacle_count[0]..=spec.obstacle_count[1]);
    let mut obstacles = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let x = uniform(rng, spec.obstacle_lon);
        let lat = uniform(rng, spec.obstacle_lat);
        let v = uniform(rng, spec.obstacle_speed);
        let positions = (1..=spec.horizon)
            .map(|t| {
                let xt = x + v * spec.dt * t as f64;
                [xt, lane.offset(xt) + lat]
            })
            .collect();
        obstacles.push((OtherVehicleTrack { positions }, [x, lane.offset(x) + lat]));
    }

    let mut spawns: Vec<[f64; 2]> = Vec::new();
    let mut agents = Vec::with_capacity(spec.agents);
    let mut x_start = 0.0;
    for k in 0..spec.agents {
        let offset = if k == 0 { uniform(rng, spec.lateral_offset) } else { uniform(rng, spec.agent_lat) };
        if k > 0 {
            x_start += uniform(rng, spec.agent_spacing);
        }
        let speed = uniform(rng, spec.speed);
        let accel = uniform(rng, spec.warmup_accel);
        let history = warmup(&lane, x_start, offset, speed, accel, spec, &dyn_)?;
        let x0 = history.initial_state();
        if !(x0.v > 0.0) {
            return Ok(None);
        }
        let p = x0.position();
        let too_close = |q: &[f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]) < spec.min_gap;
        if spawns.iter().any(too_close) || obstacles.iter().any(|(_, o)| too_close(o)) {
            return Ok(None);
        }
        spawns.push(p);
        let reach = speed_limit * spec.horizon as f64 * spec.dt * uniform(rng, spec.goal_fraction);
        let gx = x0.x + reach;
        let goal = [gx, lane.offset(gx) + uniform(rng, spec.goal_lateral)];
        let env = Environment {
            lane,
            speed_limit,
            goal,
            dt: spec.dt,
            obstacles: obstacles.iter().map(|(o, _)| o.clone()).collect(),
        };
        agents.push(AgentSetup { history, env });
    }
    Ok(Some(Scenario { horizon: spec.horizon, agents }))
}

/// Reproducible scenario set; scene `i` depends only on `(seed, i)`.
pub fn gen_scenarios(spec: &ScenarioSpec, seed: u64) -> Result<Vec<Scenario>> {
    spec.validate()?;
    (0..spec.count)
        .into_par_iter()
        .map(|i| {
            for attempt in 0..=spec.max_retries {
                let mut rng = substream(seed, "scenario", &[i as u64, attempt as u64]);
                if let Some(s) = try_scenario(spec, &mut rng)? {
                    return Ok(s);
                }
            }
            Err(Error::Config(format!(
                "scenario {i}: no feasible spawn after {} retries; widen the ranges or lower min_gap",
                spec.max_retries
            )))
        })
        .collect()
}

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Ground-truth linear costs on the reference feature scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaPreset {
    LaneKeeper,
    GoalSeeker,
    Defensive,
}

impl std::str::FromStr for ThetaPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "lane_keeper" => Ok(Self::LaneKeeper),
            "goal_seeker" => Ok(Self::GoalSeeker),
            "defensive" => Ok(Self::Defensive),
            other => Err(Error::Config(format!("unknown theta preset '{other}' (lane_keeper, goal_seeker, defensive)"))),
        }
    }
}

impl ThetaPreset {
    pub fn theta(self) -> FeatureVector {
        // goal lon, goal lat, lane, speed, heading, accel, steer, d accel, d steer, obstacle
        match self {
            Self::LaneKeeper => [0.5, 0.5, 1.0, 0.5, 1.0, 0.2, 0.2, 0.5, 0.5, 0.0],
            Self::GoalSeeker => [4.0, 4.0, 0.1, 0.2, 0.2, 0.1, 0.1, 0.3, 0.3, 0.0],
            Self::Defensive => [0.5, 0.5, 0.5, 0.5, 0.5, 0.3, 0.3, 0.5, 0.5, -1.0],
        }
    }
}

/// Fixed feature and control scales on which the presets are expressed.
pub fn reference_normalizer() -> FeatureNormalizer {
    FeatureNormalizer {
        divisors: [5.0, 1.0, 0.5, 1.0, 0.05, 0.25, 1e-4, 0.01, 1e-5, 20.0],
        control_mean: [0.0, 0.0],
        control_std: [0.5, 0.01],
    }
}

pub fn oracle_cost(theta: FeatureVector, features: FeatureConfig) -> Result<CostFunction> {
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("theta*".into()));
    }
    Ok(CostFunction::new(CostModel::linear(theta), reference_normalizer(), features))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    /// Main solver; iLQR for single agents, replaced by gradient descent for
    /// joint scenes.
    pub solver: SamplerConfig,
    pub joint_solver: SamplerConfig,
    /// Short Langevin refinement from the solver output.
    pub jitter: Option<SamplerConfig>,
    /// Replace the scenario goal by the expert endpoint.
    pub goal_from_endpoint: bool,
    pub features: FeatureConfig,
    pub dynamics: DynamicsVariant,
    pub validate_tol: f64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            solver: SamplerConfig { kind: SolverKind::Ilqr, ..Default::default() },
            joint_solver: SamplerConfig { kind: SolverKind::Gd, steps: 150, ..Default::default() },
            jitter: Some(SamplerConfig { kind: SolverKind::Langevin, steps: 4, step_size: 0.005, ..Default::default() }),
            goal_from_endpoint: false,
            features: FeatureConfig::default(),
            dynamics: DynamicsVariant::default(),
            validate_tol: 1e-9,
        }
    }
}

fn expert_scene(cost: &CostFunction, sc: &Scenario, cfg: &ExpertConfig, seed: u64, i: usize) -> Result<JointScene> {
    let t = sc.horizon;
    if t == 0 || sc.agents.is_empty() {
        return Err(Error::Structure("empty scenario".into()));
    }
    let dynamics = cfg.dynamics.with_dt(sc.agents[0].env.dt);
    let placeholder: Vec<Demonstration> = sc
        .agents
        .iter()
        .map(|a| {
            let x0 = a.history.initial_state();
            let expert = dynamics.unroll_absolute(&x0, &vec![a.history.last_control(); t])?;
            Ok(Demonstration { history: a.history.clone(), env: a.env.clone(), expert })
        })
        .collect::<Result<_>>()?;
    let mut controls: Vec<Vec<Control>> = if sc.agents.len() == 1 {
        let agent = AgentProblem::from_demo(&placeholder[0]);
        let init = ControlSequence::absolute(placeholder[0].expert.controls.clone());
        let r = solve(cost, &init, &agent, &dynamics, &cfg.solver, &mut substream(seed, "expert", &[i as u64]))?;
        vec![r.trajectory.controls]
    } else {
        let scene = JointScene::new(placeholder.clone())?;
        let r = joint_solve(cost, &scene, None, &dynamics, &cfg.joint_solver, &mut substream(seed, "expert", &[i as u64]))?;
        r.into_iter().map(|s| s.trajectory.controls).collect()
    };
    if let Some(j) = &cfg.jitter {
        let scene = JointScene::new(placeholder.clone())?;
        let r = joint_solve(cost, &scene, Some(&controls), &dynamics, j, &mut substream(seed, "jitter", &[i as u64]))?;
        controls = r.into_iter().map(|s| s.trajectory.controls).collect();
    }
    let mut agents = Vec::with_capacity(controls.len());
    for (a, u) in sc.agents.iter().zip(controls) {
        let expert = dynamics.unroll_absolute(&a.history.initial_state(), &u)?;
        let mut env = a.env.clone();
        if cfg.goal_from_endpoint {
            env.goal = expert.states.last().expect("nonempty").position();
        }
        let d = Demonstration { history: a.history.clone(), env, expert };
        let rep = validate_demonstration(&d, &dynamics, cfg.validate_tol)?;
        if !rep.consistent {
            return Err(Error::Structure(format!("expert inconsistent with dynamics (max error {})", rep.max_error)));
        }
        agents.push(d);
    }
    JointScene::new(agents)
}

/// Oracle experts for joint scenes of a known horizon. Scenes on which the
/// solver fails are dropped with a warning.
pub fn gen_expert_scenes(scenarios: &[Scenario], theta: FeatureVector, cfg: &ExpertConfig, seed: u64) -> Result<Vec<JointScene>> {
    let cost = oracle_cost(theta, cfg.features)?;
    let out: Vec<Option<JointScene>> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, sc)| {
            match expert_scene(&cost, sc, cfg, seed, i) {
                Ok(s) => Some(s),
                Err(e) => {
                    log::warn!("scenario {i} dropped: {e}");
                    None
                }
            }
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// Single-agent oracle demonstrations.
pub fn gen_expert_demos(scenarios: &[Scenario], theta: FeatureVector, cfg: &ExpertConfig, seed: u64) -> Result<Vec<Demonstration>> {
    Ok(gen_expert_scenes(scenarios, theta, cfg, seed)?.into_iter().flat_map(|s| s.agents).collect())
}

/// Disjoint, exhaustive, seeded split; `round(ratio * n)` items go to train.
pub fn split<T: Clone>(data: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut substream(seed, "split", &[]));
    let n_train = (ratio * data.len() as f64).round() as usize;
    let mut train_idx = idx[..n_train].to_vec();
    let mut test_idx = idx[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((train_idx.iter().map(|&i| data[i].clone()).collect(), test_idx.iter().map(|&i| data[i].clone()).collect()))
}

/// Position-only record: `positions` are the future frames `1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Track {
    pub history: History,
    pub env: Environment,
    pub positions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub rmse: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    pub infer: InferConfig,
    pub dynamics: DynamicsVariant,
    /// Tracks fitted worse than this are rejected (m).
    pub max_rmse: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { infer: InferConfig::default(), dynamics: DynamicsVariant::default(), max_rmse: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub demos: Vec<Demonstration>,
    pub fit_rmse: Vec<f64>,
    pub rejected: Vec<Rejection>,
}

/// Infers controls for every track and re-unrolls them into dynamically
/// consistent demonstrations.
pub fn ingest_tracks(tracks: &[Track], cfg: &IngestConfig) -> Result<IngestReport> {
    let results: Vec<std::result::Result<(Demonstration, f64), Rejection>> = tracks
        .par_iter()
        .enumerate()
        .map(|(i, tr)| {
            let x0 = tr.history.initial_state();
            let mut pos = Vec::with_capacity(tr.positions.len() + 1);
            pos.push(x0.position());
            pos.extend_from_slice(&tr.positions);
            let dynamics = cfg.dynamics.with_dt(tr.env.dt);
            let r = infer_controls(&pos, &x0, tr.history.last_control(), &dynamics, &cfg.infer)
                .map_err(|e| Rejection { index: i, rmse: None, reason: e.to_string() })?;
            if !(r.rmse <= cfg.max_rmse) {
                return Err(Rejection { index: i, rmse: Some(r.rmse), reason: format!("fit rmse {:.3} m above {}", r.rmse, cfg.max_rmse) });
            }
            let d = Demonstration { history: tr.history.clone(), env: tr.env.clone(), expert: r.trajectory };
            d.check_structure().map_err(|e| Rejection { index: i, rmse: Some(r.rmse), reason: e.to_string() })?;
            Ok((d, r.rmse))
        })
        .collect();
    let mut rep = IngestReport { demos: Vec::new(), fit_rmse: Vec::new(), rejected: Vec::new() };
    for r in results {
        match r {
            Ok((d, e)) => {
                rep.demos.push(d);
                rep.fit_rmse.push(e);
            }
            Err(rej) => {
                log::warn!("track {} rejected: {}", rej.index, rej.reason);
                rep.rejected.push(rej);
            }
        }
    }
    Ok(rep)
}

/// Strips a demonstration down to its observed positions.
pub fn to_track(d: &Demonstration) -> Track {
    Track { history: d.history.clone(), env: d.env.clone(), positions: d.expert.positions() }
}

/// Track with i.i.d. Gaussian noise of standard deviation `sigma` on every
/// future position.
pub fn noisy_track(d: &Demonstration, sigma: f64, rng: &mut Rng) -> Track {
    let normal = rand_distr::Normal::new(0.0, sigma.max(0.0)).expect("sigma >= 0");
    let mut t = to_track(d);
    for p in t.positions.iter_mut() {
        p[0] += rng.sample(normal);
        p[1] += rng.sample(normal);
    }
    t
}

/// Mean final-frame distance to the goal.
pub fn mean_goal_distance(trajs: &[Trajectory], envs: &[Environment]) -> f64 {
    let n = trajs.len() as f64;
    trajs
        .iter()
        .zip(envs)
        .map(|(t, e)| {
            let p = t.states.last().expect("nonempty").position();
            (p[0] - e.goal[0]).hypot(p[1] - e.goal[1])
        })
        .sum::<f64>()
        / n
}
