//! Trajectory metrics and the corner-case behaviour suite.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::dynamics::DynamicsVariant;
use crate::error::{Error, Result};
use crate::problem::AgentProblem;
use crate::rng::{substream, Rng};
use crate::sampler::{solve, SamplerConfig};
use crate::types::{Control, ControlSequence, Environment, History, HistoryFrame, Lane, OtherVehicleTrack, State, Trajectory};

fn sq_err(a: &Trajectory, b: &Trajectory, t: usize) -> f64 {
    let p = a.states[t].position();
    let q = b.states[t].position();
    (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
}

fn check_t(trajs: &[&Trajectory], t: usize) -> Result<()> {
    for tr in trajs {
        if t >= tr.states.len() {
            return Err(Error::Structure(format!("frame {t} outside a trajectory of length {}", tr.states.len())));
        }
    }
    Ok(())
}

/// `sqrt(mean_i |y^_it - y_it|^2)` over the (x, y) positions at frame `t`.
pub fn rmse_at(preds: &[Trajectory], gts: &[Trajectory], t: usize) -> Result<f64> {
    if preds.len() != gts.len() {
        return Err(Error::Structure(format!("{} predictions for {} ground truths", preds.len(), gts.len())));
    }
    if preds.is_empty() {
        return Err(Error::Structure("no trajectories".into()));
    }
    let mut acc = 0.0;
    for (p, g) in preds.iter().zip(gts) {
        check_t(&[p, g], t)?;
        acc += sq_err(p, g, t);
    }
    Ok((acc / preds.len() as f64).sqrt())
}

fn endpoint_error(p: &Trajectory, g: &Trajectory) -> f64 {
    let t = g.states.len() - 1;
    sq_err(p, g, t).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvgMin {
    /// Frame indices the entries refer to.
    pub frames: Vec<usize>,
    pub avg: Vec<f64>,
    pub min: Vec<f64>,
}

fn check_samples(samples: &[Vec<Trajectory>], gts: &[Trajectory]) -> Result<()> {
    if samples.len() != gts.len() {
        return Err(Error::Structure(format!("{} sample sets for {} ground truths", samples.len(), gts.len())));
    }
    if gts.is_empty() {
        return Err(Error::Structure("no trajectories".into()));
    }
    for (i, (s, g)) in samples.iter().zip(gts).enumerate() {
        if s.is_empty() {
            return Err(Error::Structure(format!("demo {i} has no samples")));
        }
        if g.states.is_empty() {
            return Err(Error::Structure(format!("demo {i} has an empty ground truth")));
        }
        for tr in s {
            if tr.states.len() != g.states.len() {
                return Err(Error::Structure(format!("demo {i}: sample length {} vs {}", tr.states.len(), g.states.len())));
            }
        }
    }
    Ok(())
}

/// `avg`: RMSE averaged over the M samples of every demo. `min`: at each
/// frame, RMSE of every demo's best sample, chosen by its error at that frame
/// (the endpoint of the prediction truncated to the horizon).
pub fn avg_min_rmse(samples: &[Vec<Trajectory>], gts: &[Trajectory], frames: &[usize]) -> Result<AvgMin> {
    check_samples(samples, gts)?;
    let n = gts.len() as f64;
    let mut avg = Vec::with_capacity(frames.len());
    let mut min = Vec::with_capacity(frames.len());
    for &t in frames {
        let mut acc_avg = 0.0;
        let mut acc_min = 0.0;
        for (s, g) in samples.iter().zip(gts) {
            check_t(&[g], t)?;
            let errs: Vec<f64> = s.iter().map(|p| sq_err(p, g, t)).collect();
            acc_avg += errs.iter().sum::<f64>() / s.len() as f64;
            acc_min += errs.iter().copied().fold(f64::INFINITY, f64::min);
        }
        avg.push((acc_avg / n).sqrt());
        min.push((acc_min / n).sqrt());
    }
    Ok(AvgMin { frames: frames.to_vec(), avg, min })
}

/// Fraction of demos where every sample ends farther than `radius` from the
/// ground-truth endpoint.
pub fn missing_rate(samples: &[Vec<Trajectory>], gts: &[Trajectory], radius: f64) -> Result<f64> {
    check_samples(samples, gts)?;
    let missed = samples.iter().zip(gts).filter(|(s, g)| s.iter().all(|p| endpoint_error(p, g) > radius)).count();
    Ok(missed as f64 / gts.len() as f64)
}

/// Frame index of a horizon given in seconds.
pub fn horizon_frame(seconds: f64, dt: f64) -> Result<usize> {
    let steps = (seconds / dt).round();
    if !(steps >= 1.0) {
        return Err(Error::Config(format!("horizon {seconds}s is shorter than one step of {dt}s")));
    }
    Ok(steps as usize - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonRow {
    pub horizon_s: f64,
    pub avg_rmse: f64,
    pub min_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub n_demos: usize,
    pub samples_per_demo: usize,
    pub rows: Vec<HorizonRow>,
    pub missing_rate: f64,
    pub missing_radius: f64,
}

pub fn evaluate(samples: &[Vec<Trajectory>], gts: &[Trajectory], horizons_s: &[f64], dt: f64, radius: f64) -> Result<EvalReport> {
    let frames = horizons_s.iter().map(|h| horizon_frame(*h, dt)).collect::<Result<Vec<_>>>()?;
    let am = avg_min_rmse(samples, gts, &frames)?;
    let rows = horizons_s
        .iter()
        .zip(am.avg.iter().zip(&am.min))
        .map(|(h, (a, m))| HorizonRow { horizon_s: *h, avg_rmse: *a, min_rmse: *m })
        .collect();
    Ok(EvalReport {
        n_demos: gts.len(),
        samples_per_demo: samples.iter().map(Vec::len).max().unwrap_or(0),
        rows,
        missing_rate: missing_rate(samples, gts, radius)?,
        missing_radius: radius,
    })
}

impl EvalReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "horizon,avg_rmse,min_rmse,missing_rate")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.horizon_s, r.avg_rmse, r.min_rmse, self.missing_rate)?;
        }
        Ok(())
    }
}

/// Thresholds and solver used by [`corner_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CornerConfig {
    /// Minimum centre distance to the lead vehicle, m.
    pub safety_gap: f64,
    /// Maximum vertical offset from the lane centre, m.
    pub max_deviation: f64,
    pub horizon: usize,
    pub dt: f64,
    pub sampler: SamplerConfig,
    pub dynamics: DynamicsVariant,
}

impl Default for CornerConfig {
    fn default() -> Self {
        Self {
            safety_gap: 2.0,
            max_deviation: 1.5,
            horizon: 40,
            dt: 0.1,
            sampler: SamplerConfig { record_path: true, ..Default::default() },
            dynamics: DynamicsVariant::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerKind {
    SuddenBrake,
    CutIn,
    Curvature,
}

/// A scripted scene. `lead` indexes the obstacle the ego must not close on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerCase {
    pub name: String,
    pub kind: CornerKind,
    pub history: History,
    pub env: Environment,
    pub lead: Option<usize>,
}

/// Track of a vehicle starting at `p` with heading 0, speed `v`, constant
/// acceleration `a` (stopping at zero speed) and a lateral move of `dy`
/// spread linearly over `[t0, t1]` seconds.
#[allow(clippy::too_many_arguments)]
fn scripted_track(p: [f64; 2], v: f64, a: f64, dy: f64, t0: f64, t1: f64, horizon: usize, dt: f64) -> OtherVehicleTrack {
    let mut x = p[0];
    let mut speed = v;
    let positions = (1..=horizon)
        .map(|i| {
            let t = i as f64 * dt;
            let nv = (speed + a * dt).max(0.0);
            x += 0.5 * (speed + nv) * dt;
            speed = nv;
            let frac = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            [x, p[1] + dy * frac]
        })
        .collect();
    OtherVehicleTrack { positions }
}

fn ego_history(y: f64, v: f64, h: f64) -> History {
    History::new(vec![HistoryFrame { state: State::new(0.0, y, v, h), control: Control::default() }])
        .expect("one history frame")
}

/// The six scripted scenes: sudden braking, lane cut-in and large lane
/// curvature, two of each.
pub fn corner_cases(horizon: usize, dt: f64) -> Vec<CornerCase> {
    let straight = Lane::default();
    let track = |p, v, a, dy, t0, t1| scripted_track(p, v, a, dy, t0, t1, horizon, dt);
    let env = |lane: Lane, goal: [f64; 2], obstacles| Environment { lane, speed_limit: 12.0, goal, dt, obstacles };
    let mut cases = Vec::new();
    for (i, (gap, decel)) in [(20.0, -6.0), (14.0, -4.0)].into_iter().enumerate() {
        cases.push(CornerCase {
            name: format!("sudden_brake_{}", i + 1),
            kind: CornerKind::SuddenBrake,
            history: ego_history(0.0, 10.0, 0.0),
            env: env(
                straight,
                [60.0, 0.0],
                vec![track([gap, 0.0], 10.0, decel, 0.0, 0.0, 1.0), track([5.0, 3.5], 10.0, 0.0, 0.0, 0.0, 1.0), track([-8.0, -3.5], 10.0, 0.0, 0.0, 0.0, 1.0)],
            ),
            lead: Some(0),
        });
    }
    for (i, (ahead, side, speed)) in [(12.0, 3.5, 8.0), (9.0, -3.5, 7.0)].into_iter().enumerate() {
        cases.push(CornerCase {
            name: format!("cut_in_{}", i + 1),
            kind: CornerKind::CutIn,
            history: ego_history(0.0, 10.0, 0.0),
            env: env(straight, [60.0, 0.0], vec![track([ahead, side], speed, 0.0, -side, 0.3, 2.0)]),
            lead: Some(0),
        });
    }
    for (i, c2) in [0.008, -0.008].into_iter().enumerate() {
        let lane = Lane { coeffs: [0.0, 0.0, c2, 0.0] };
        let gx = 45.0;
        cases.push(CornerCase {
            name: format!("curvature_{}", i + 1),
            kind: CornerKind::Curvature,
            history: ego_history(0.0, 10.0, 0.0),
            env: env(lane, [gx, lane.offset(gx)], vec![]),
            lead: None,
        });
    }
    cases
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerMetrics {
    pub mean_accel: f64,
    /// `v_T - v_0`.
    pub delta_v: f64,
    pub min_lead_gap: Option<f64>,
    pub max_lane_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerResult {
    pub name: String,
    pub kind: CornerKind,
    pub passed: bool,
    pub error: Option<String>,
    pub metrics: Option<CornerMetrics>,
    /// Absolute controls `[accel, steer]` per frame at every recorded solver
    /// iterate; empty unless the sampler records its path.
    pub control_trace: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerReport {
    pub config: CornerConfig,
    pub passed: usize,
    pub total: usize,
    pub results: Vec<CornerResult>,
}

fn corner_metrics(case: &CornerCase, traj: &Trajectory) -> CornerMetrics {
    let n = traj.controls.len().max(1) as f64;
    let v0 = case.history.initial_state().v;
    let min_lead_gap = case.lead.map(|j| {
        traj.states
            .iter()
            .zip(&case.env.obstacles[j].positions)
            .map(|(s, o)| (s.x - o[0]).hypot(s.y - o[1]))
            .fold(f64::INFINITY, f64::min)
    });
    CornerMetrics {
        mean_accel: traj.controls.iter().map(|u| u.accel).sum::<f64>() / n,
        delta_v: traj.states.last().map_or(0.0, |s| s.v - v0),
        min_lead_gap,
        max_lane_deviation: traj.states.iter().map(|s| (s.y - case.env.lane.offset(s.x)).abs()).fold(0.0, f64::max),
    }
}

fn corner_passes(kind: CornerKind, m: &CornerMetrics, cfg: &CornerConfig) -> bool {
    match kind {
        CornerKind::SuddenBrake => m.mean_accel < 0.0 && m.min_lead_gap.is_some_and(|g| g > cfg.safety_gap),
        CornerKind::CutIn => m.delta_v < 0.0,
        CornerKind::Curvature => m.max_lane_deviation < cfg.max_deviation,
    }
}

/// Solves one scripted scene from zero increments and checks its assertion.
/// Solver failures are reported in the result instead of propagated.
pub fn run_corner_case(cost: &CostFunction, case: &CornerCase, cfg: &CornerConfig, rng: &mut Rng) -> CornerResult {
    let agent = AgentProblem {
        x0: case.history.initial_state(),
        anchor: case.history.last_control(),
        env: case.env.clone(),
        history: case.history.clone(),
    };
    let solved = solve(cost, &ControlSequence::zeros(cfg.horizon), &agent, &cfg.dynamics, &cfg.sampler, rng);
    match solved {
        Ok(r) => {
            let metrics = corner_metrics(case, &r.trajectory);
            CornerResult {
                name: case.name.clone(),
                kind: case.kind,
                passed: corner_passes(case.kind, &metrics, cfg),
                error: None,
                metrics: Some(metrics),
                control_trace: r
                    .path
                    .unwrap_or_default()
                    .iter()
                    .map(|us| us.iter().map(|u| [u.accel, u.steer]).collect())
                    .collect(),
            }
        }
        Err(e) => CornerResult {
            name: case.name.clone(),
            kind: case.kind,
            passed: false,
            error: Some(e.to_string()),
            metrics: None,
            control_trace: vec![],
        },
    }
}

pub fn corner_suite(cost: &CostFunction, cfg: &CornerConfig, seed: u64) -> Result<CornerReport> {
    cfg.sampler.validate()?;
    let results: Vec<CornerResult> = corner_cases(cfg.horizon, cfg.dt)
        .iter()
        .enumerate()
        .map(|(i, case)| run_corner_case(cost, case, cfg, &mut substream(seed, "corner", &[i as u64])))
        .collect();
    Ok(CornerReport {
        config: cfg.clone(),
        passed: results.iter().filter(|r| r.passed).count(),
        total: results.len(),
        results,
    })
}

impl CornerReport {
    /// `case,langevin_step,t,accel,steer`
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "case,langevin_step,t,accel,steer")?;
        for r in &self.results {
            for (step, us) in r.control_trace.iter().enumerate() {
                for (t, u) in us.iter().enumerate() {
                    writeln!(out, "{},{},{},{},{}", r.name, step, t, u[0], u[1])?;
                }
            }
        }
        Ok(())
    }
}
