//! Hand-crafted per-frame features, their trajectory aggregate and the
//! dataset-fitted normalization of features and controls.
//!
//! Every feature is `psi(r)` for a smooth scalar residual `r` of the frame
//! variables `z = (x, y, v, h, accel, steer, accel_prev, steer_prev)` and a
//! fixed outer shape `psi`. The residual form gives exact gradients for
//! back-propagation and a Gauss-Newton curvature for iLQR.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Control, Demonstration, Environment, History, State, Trajectory};

pub const N_FEATURES: usize = 10;
/// Width of the frame variable vector `z`.
pub const FRAME_VARS: usize = 8;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "dist_goal_lon",
    "dist_goal_lat",
    "dist_lane_center",
    "speed_limit_diff",
    "lane_heading_diff",
    "accel_l2",
    "steer_l2",
    "accel_diff",
    "steer_diff",
    "nearest_obstacle_dist",
];

pub const GOAL_LON: usize = 0;
pub const GOAL_LAT: usize = 1;
pub const OBSTACLE: usize = 9;

pub type FeatureVector = [f64; N_FEATURES];

/// Outer shape applied to a feature residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Abs,
    Square,
    /// `max(0, r) + 0.1 |r|`
    OverSpeed,
    /// `min(r, cap)`
    Capped,
}

pub const SHAPES: [Shape; N_FEATURES] = [
    Shape::Abs,
    Shape::Abs,
    Shape::Abs,
    Shape::OverSpeed,
    Shape::Abs,
    Shape::Square,
    Shape::Square,
    Shape::Square,
    Shape::Square,
    Shape::Capped,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Saturation distance for the obstacle feature (m).
    pub obstacle_cap: f64,
    pub softmin_temperature: f64,
    /// Residual floor for the iteratively-reweighted curvature of `|r|`.
    pub curvature_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { obstacle_cap: 50.0, softmin_temperature: 1.0, curvature_floor: 0.1 }
    }
}

impl Shape {
    fn value(self, r: f64, cap: f64) -> f64 {
        match self {
            Shape::Abs => r.abs(),
            Shape::Square => r * r,
            Shape::OverSpeed => r.max(0.0) + 0.1 * r.abs(),
            Shape::Capped => r.min(cap),
        }
    }

    fn derivative(self, r: f64, cap: f64) -> f64 {
        match self {
            Shape::Abs => sign(r),
            Shape::Square => 2.0 * r,
            Shape::OverSpeed => (if r > 0.0 { 1.0 } else { 0.0 }) + 0.1 * sign(r),
            Shape::Capped => {
                if r < cap {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Non-negative curvature surrogate: exact for squares, an
    /// iteratively-reweighted majorizer for the absolute-value kinks, zero for
    /// the capped distance.
    pub fn curvature(self, r: f64, floor: f64) -> f64 {
        match self {
            Shape::Abs => 1.0 / r.abs().max(floor),
            Shape::Square => 2.0,
            Shape::OverSpeed => 0.6 / r.abs().max(floor),
            Shape::Capped => 0.0,
        }
    }
}

fn sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Everything a single frame's features depend on.
#[derive(Debug, Clone, Copy)]
pub struct FrameInput<'a> {
    pub state: State,
    pub control: Control,
    pub prev_control: Control,
    /// Goal features only count at the final frame.
    pub is_final: bool,
    /// Positions of every obstacle at this frame.
    pub obstacles: &'a [[f64; 2]],
}

/// Feature values plus the residual representation and its gradients.
#[derive(Debug, Clone)]
pub struct FrameEval {
    pub values: FeatureVector,
    pub residuals: [f64; N_FEATURES],
    /// d residual / d z
    pub residual_grad: [[f64; FRAME_VARS]; N_FEATURES],
    /// d value / d z
    pub jac: [[f64; FRAME_VARS]; N_FEATURES],
    /// d obstacle feature / d obstacle position, aligned with the input
    /// obstacle list.
    pub obstacle_grad: Vec<[f64; 2]>,
}

pub fn eval_frame(input: &FrameInput<'_>, env: &Environment, cfg: &FeatureConfig) -> FrameEval {
    let s = input.state;
    let u = input.control;
    let p = input.prev_control;
    let mut r = [0.0; N_FEATURES];
    let mut g = [[0.0; FRAME_VARS]; N_FEATURES];

    if input.is_final {
        r[GOAL_LON] = s.x - env.goal[0];
        g[GOAL_LON][0] = 1.0;
        r[GOAL_LAT] = s.y - env.goal[1];
        g[GOAL_LAT][1] = 1.0;
    }

    let lane = &env.lane;
    let slope = lane.slope(s.x);
    r[2] = s.y - lane.offset(s.x);
    g[2][0] = -slope;
    g[2][1] = 1.0;

    r[3] = s.v - env.speed_limit;
    g[3][2] = 1.0;

    r[4] = s.h - slope.atan();
    g[4][3] = 1.0;
    g[4][0] = -lane.curvature_term(s.x) / (1.0 + slope * slope);

    r[5] = u.accel;
    g[5][4] = 1.0;
    r[6] = u.steer;
    g[6][5] = 1.0;
    r[7] = u.accel - p.accel;
    g[7][4] = 1.0;
    g[7][6] = -1.0;
    r[8] = u.steer - p.steer;
    g[8][5] = 1.0;
    g[8][7] = -1.0;

    let cap = cfg.obstacle_cap;
    let mut obstacle_grad = vec![[0.0; 2]; input.obstacles.len()];
    if input.obstacles.is_empty() {
        r[OBSTACLE] = cap;
    } else {
        // softmin_j d_j = -tau log sum exp(-d_j / tau), shifted by the hard min
        let tau = cfg.softmin_temperature;
        let d: Vec<f64> = input.obstacles.iter().map(|o| (s.x - o[0]).hypot(s.y - o[1])).collect();
        let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
        let wts: Vec<f64> = d.iter().map(|dj| (-(dj - dmin) / tau).exp()).collect();
        let z: f64 = wts.iter().sum();
        r[OBSTACLE] = dmin - tau * z.ln();
        for (j, o) in input.obstacles.iter().enumerate() {
            if d[j] > 0.0 {
                let wj = wts[j] / z;
                let gx = wj * (s.x - o[0]) / d[j];
                let gy = wj * (s.y - o[1]) / d[j];
                g[OBSTACLE][0] += gx;
                g[OBSTACLE][1] += gy;
                obstacle_grad[j] = [-gx, -gy];
            }
        }
    }

    let mut values = [0.0; N_FEATURES];
    let mut jac = [[0.0; FRAME_VARS]; N_FEATURES];
    for k in 0..N_FEATURES {
        values[k] = SHAPES[k].value(r[k], cap);
        let dpsi = SHAPES[k].derivative(r[k], cap);
        for i in 0..FRAME_VARS {
            jac[k][i] = dpsi * g[k][i];
        }
    }
    if SHAPES[OBSTACLE].derivative(r[OBSTACLE], cap) == 0.0 {
        obstacle_grad.iter_mut().for_each(|o| *o = [0.0, 0.0]);
    }
    FrameEval { values, residuals: r, residual_grad: g, jac, obstacle_grad }
}

/// Obstacle positions at frame `t`.
pub fn obstacles_at(env: &Environment, t: usize) -> Vec<[f64; 2]> {
    env.obstacles.iter().map(|o| o.positions[t]).collect()
}

/// Features of frame `t` (0-based over the predicted horizon).
pub fn frame_features(
    traj: &Trajectory,
    t: usize,
    env: &Environment,
    history: &History,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    let len = traj.len();
    if t >= len {
        return Err(Error::Structure(format!("frame {t} outside horizon {len}")));
    }
    let prev = if t == 0 { history.last_control() } else { traj.controls[t - 1] };
    let obstacles = obstacles_at(env, t);
    let input = FrameInput {
        state: traj.states[t],
        control: traj.controls[t],
        prev_control: prev,
        is_final: t + 1 == len,
        obstacles: &obstacles,
    };
    Ok(eval_frame(&input, env, cfg).values)
}

/// All frame features of a trajectory, in order.
pub fn all_frame_features(
    traj: &Trajectory,
    env: &Environment,
    history: &History,
    cfg: &FeatureConfig,
) -> Result<Vec<FeatureVector>> {
    env.validate(traj.len())?;
    (0..traj.len()).map(|t| frame_features(traj, t, env, history, cfg)).collect()
}

/// `phi(x, u, e, h) = sum_t phi_t`.
pub fn trajectory_features(
    traj: &Trajectory,
    env: &Environment,
    history: &History,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    let mut acc = [0.0; N_FEATURES];
    for f in all_frame_features(traj, env, history, cfg)? {
        for k in 0..N_FEATURES {
            acc[k] += f[k];
        }
    }
    Ok(acc)
}

/// Feature divisors and control standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureNormalizer {
    pub divisors: FeatureVector,
    pub control_mean: [f64; 2],
    pub control_std: [f64; 2],
}

impl Default for FeatureNormalizer {
    fn default() -> Self {
        Self::identity()
    }
}

/// Number of frames on which feature `k` can be nonzero.
pub fn active_frames(k: usize, horizon: usize) -> usize {
    if k == GOAL_LON || k == GOAL_LAT {
        1
    } else {
        horizon
    }
}

impl FeatureNormalizer {
    pub fn identity() -> Self {
        Self { divisors: [1.0; N_FEATURES], control_mean: [0.0; 2], control_std: [1.0; 2] }
    }

    /// Divisors are the mean |feature| over the frames where the feature is
    /// active (the final frame for the goal features); control statistics are
    /// the population mean and standard deviation of the expert controls.
    pub fn fit(demos: &[Demonstration], cfg: &FeatureConfig) -> Result<Self> {
        if demos.is_empty() {
            return Err(Error::Structure("cannot fit a normalizer on an empty dataset".into()));
        }
        let mut abs_sum = [0.0; N_FEATURES];
        let mut counts = [0usize; N_FEATURES];
        let mut c_sum = [0.0; 2];
        let mut n_controls = 0usize;
        for d in demos {
            let frames = all_frame_features(&d.expert, &d.env, &d.history, cfg)?;
            let horizon = frames.len();
            for (t, f) in frames.iter().enumerate() {
                for k in 0..N_FEATURES {
                    if active_frames(k, horizon) == horizon || t + 1 == horizon {
                        abs_sum[k] += f[k].abs();
                        counts[k] += 1;
                    }
                }
            }
            for u in &d.expert.controls {
                c_sum[0] += u.accel;
                c_sum[1] += u.steer;
                n_controls += 1;
            }
        }
        let mut divisors = [1.0; N_FEATURES];
        for k in 0..N_FEATURES {
            let m = abs_sum[k] / counts[k] as f64;
            if m > 1e-12 && m.is_finite() {
                divisors[k] = m;
            } else {
                log::warn!("feature {} is identically zero on the training set; divisor set to 1", FEATURE_NAMES[k]);
            }
        }
        let n = n_controls as f64;
        let mean = [c_sum[0] / n, c_sum[1] / n];
        let mut var = [0.0; 2];
        for d in demos {
            for u in &d.expert.controls {
                var[0] += (u.accel - mean[0]).powi(2);
                var[1] += (u.steer - mean[1]).powi(2);
            }
        }
        let names = ["accel", "steer"];
        let mut std = [0.0; 2];
        for j in 0..2 {
            std[j] = (var[j] / n).sqrt();
            if !(std[j] > 1e-12) {
                return Err(Error::Structure(format!("control channel '{}' has zero variance", names[j])));
            }
        }
        Ok(Self { divisors, control_mean: mean, control_std: std })
    }

    pub fn apply(&self, f: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            out[k] = f[k] / self.divisors[k];
        }
        out
    }

    pub fn invert(&self, f: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            out[k] = f[k] * self.divisors[k];
        }
        out
    }

    pub fn normalize_control(&self, u: &Control) -> [f64; 2] {
        [
            (u.accel - self.control_mean[0]) / self.control_std[0],
            (u.steer - self.control_mean[1]) / self.control_std[1],
        ]
    }

    pub fn denormalize_control(&self, z: [f64; 2]) -> Control {
        Control::new(
            z[0] * self.control_std[0] + self.control_mean[0],
            z[1] * self.control_std[1] + self.control_mean[1],
        )
    }
}

pub const ENV_ENCODING_DIM: usize = 29;
const ENCODED_OBSTACLES: usize = 4;

/// Fixed-width environment encoding for the neural generator, expressed
/// relative to the initial ego state:
/// `[lane c0..c3 re-expanded about x0, speed_limit, goal dx, goal dy, dt]`,
/// then the 4 nearest obstacles as `(dx, dy, vx per step, vy per step)`,
/// zero-padded to 29.
pub fn encode_environment(env: &Environment, x0: &State) -> [f64; ENV_ENCODING_DIM] {
    let mut e = [0.0; ENV_ENCODING_DIM];
    let [_, _, c2, c3] = env.lane.coeffs;
    e[0] = env.lane.offset(x0.x) - x0.y;
    e[1] = env.lane.slope(x0.x);
    e[2] = c2 + 3.0 * c3 * x0.x;
    e[3] = c3;
    e[4] = env.speed_limit;
    e[5] = env.goal[0] - x0.x;
    e[6] = env.goal[1] - x0.y;
    e[7] = env.dt;
    let mut obs: Vec<(f64, [f64; 4])> = env
        .obstacles
        .iter()
        .filter(|o| !o.positions.is_empty())
        .map(|o| {
            let p0 = o.positions[0];
            let p1 = *o.positions.get(1).unwrap_or(&p0);
            let rel = [p0[0] - x0.x, p0[1] - x0.y, p1[0] - p0[0], p1[1] - p0[1]];
            (rel[0].hypot(rel[1]), rel)
        })
        .collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (i, (_, rel)) in obs.iter().take(ENCODED_OBSTACLES).enumerate() {
        e[8 + 4 * i..12 + 4 * i].copy_from_slice(rel);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DynamicsVariant;
    use crate::types::{HistoryFrame, Lane, OtherVehicleTrack};
    use rand::{Rng, SeedableRng};

    fn history(u0: Control) -> History {
        History::new(vec![HistoryFrame { state: State::new(0.0, 0.0, 10.0, 0.0), control: u0 }]).unwrap()
    }

    fn env(goal: [f64; 2], obstacles: Vec<OtherVehicleTrack>) -> Environment {
        Environment { lane: Lane::default(), speed_limit: 10.0, goal, dt: 0.1, obstacles }
    }

    #[test]
    fn all_residuals_vanish() {
        let e = env([1.0, 0.0], vec![]);
        let traj = Trajectory { states: vec![State::new(1.0, 0.0, 10.0, 0.0)], controls: vec![Control::default()] };
        let f = frame_features(&traj, 0, &e, &history(Control::default()), &FeatureConfig::default()).unwrap();
        assert_eq!(f, [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 50.0]);
    }

    #[test]
    fn lane_offset_straight_lane() {
        let e = env([100.0, 0.0], vec![]);
        let traj = Trajectory { states: vec![State::new(5.0, 2.0, 10.0, 0.0)], controls: vec![Control::default()] };
        let f = frame_features(&traj, 0, &e, &history(Control::default()), &FeatureConfig::default()).unwrap();
        assert_eq!(f[2], 2.0);
    }

    /// Direct transcription of the feature table used as a second route.
    fn reference_features(
        s: State,
        u: Control,
        p: Control,
        last: bool,
        e: &Environment,
        obs: &[[f64; 2]],
        cap: f64,
    ) -> FeatureVector {
        let [c0, c1, c2, c3] = e.lane.coeffs;
        let lane_y = c0 + c1 * s.x + c2 * s.x * s.x + c3 * s.x * s.x * s.x;
        let lane_dir = (c1 + 2.0 * c2 * s.x + 3.0 * c3 * s.x * s.x).atan();
        let dv = s.v - e.speed_limit;
        let near = if obs.is_empty() {
            cap
        } else {
            let sum: f64 = obs.iter().map(|o| (-((s.x - o[0]).powi(2) + (s.y - o[1]).powi(2)).sqrt()).exp()).sum();
            (-sum.ln()).min(cap)
        };
        [
            if last { (e.goal[0] - s.x).abs() } else { 0.0 },
            if last { (e.goal[1] - s.y).abs() } else { 0.0 },
            (s.y - lane_y).abs(),
            if dv > 0.0 { dv } else { 0.0 } + 0.1 * dv.abs(),
            (s.h - lane_dir).abs(),
            u.accel * u.accel,
            u.steer * u.steer,
            (u.accel - p.accel).powi(2),
            (u.steer - p.steer).powi(2),
            near,
        ]
    }

    #[test]
    fn matches_reference_implementation() {
        let e = Environment {
            lane: Lane::from([0.5, 0.01, -0.002, 1e-5]),
            speed_limit: 12.0,
            goal: [40.0, 1.0],
            dt: 0.1,
            obstacles: vec![
                OtherVehicleTrack { positions: vec![[8.0, 3.5]; 3] },
                OtherVehicleTrack { positions: vec![[12.0, -2.0]; 3] },
            ],
        };
        let h = history(Control::new(0.3, 0.01));
        let traj = Trajectory {
            states: vec![
                State::new(7.0, 1.2, 13.0, 0.05),
                State::new(8.2, 1.3, 12.5, 0.02),
                State::new(9.5, 1.1, 11.0, -0.01),
            ],
            controls: vec![Control::new(0.5, 0.02), Control::new(-1.0, 0.0), Control::new(-0.2, -0.03)],
        };
        for t in 0..3 {
            let f = frame_features(&traj, t, &e, &h, &FeatureConfig::default()).unwrap();
            let p = if t == 0 { h.last_control() } else { traj.controls[t - 1] };
            let r = reference_features(traj.states[t], traj.controls[t], p, t == 2, &e, &obstacles_at(&e, t), 50.0);
            for k in 0..N_FEATURES {
                assert!((f[k] - r[k]).abs() < 1e-12, "t={t} k={k}: {} vs {}", f[k], r[k]);
            }
        }
    }

    #[test]
    fn trajectory_features_sum_frames() {
        let e = env([3.0, 0.5], vec![OtherVehicleTrack { positions: vec![[2.0, 3.0]; 4] }]);
        let h = history(Control::new(0.1, 0.0));
        let traj = DynamicsVariant::corrected(0.1)
            .unroll_absolute(
                &State::new(0.0, 0.0, 8.0, 0.0),
                &[Control::new(0.5, 0.01), Control::new(0.2, -0.02), Control::new(0.0, 0.0), Control::new(-1.0, 0.03)],
            )
            .unwrap();
        let total = trajectory_features(&traj, &e, &h, &FeatureConfig::default()).unwrap();
        let mut acc = [0.0; N_FEATURES];
        for t in 0..4 {
            let f = frame_features(&traj, t, &e, &h, &FeatureConfig::default()).unwrap();
            for k in 0..N_FEATURES {
                acc[k] += f[k];
            }
        }
        assert_eq!(total, acc);
        let single = Trajectory { states: traj.states[..1].to_vec(), controls: traj.controls[..1].to_vec() };
        assert_eq!(
            trajectory_features(&single, &e, &h, &FeatureConfig::default()).unwrap(),
            frame_features(&single, 0, &e, &h, &FeatureConfig::default()).unwrap()
        );
    }

    #[test]
    fn repeated_steady_frame_is_additive() {
        // constant-velocity cruise on the lane at the limit: every frame equal
        let e = env([0.0, 0.0], vec![]);
        let h = history(Control::default());
        let steady = |n: usize| Trajectory {
            states: vec![State::new(0.0, 0.0, 10.0, 0.0); n],
            controls: vec![Control::new(0.0, 0.0); n],
        };
        let cfg = FeatureConfig::default();
        let f2 = trajectory_features(&steady(2), &e, &h, &cfg).unwrap();
        let f4 = trajectory_features(&steady(4), &e, &h, &cfg).unwrap();
        for k in 2..N_FEATURES {
            assert_eq!(f4[k], 2.0 * f2[k]);
        }
    }

    #[test]
    fn obstacle_beyond_cap_saturates() {
        let e = env([0.0, 0.0], vec![OtherVehicleTrack { positions: vec![[500.0, 0.0]] }]);
        let traj = Trajectory { states: vec![State::new(0.0, 0.0, 10.0, 0.0)], controls: vec![Control::default()] };
        let input = FrameInput {
            state: traj.states[0],
            control: Control::default(),
            prev_control: Control::default(),
            is_final: true,
            obstacles: &obstacles_at(&e, 0),
        };
        let ev = eval_frame(&input, &e, &FeatureConfig::default());
        assert_eq!(ev.values[OBSTACLE], 50.0);
        assert_eq!(ev.jac[OBSTACLE], [0.0; FRAME_VARS]);
        assert_eq!(ev.obstacle_grad[0], [0.0, 0.0]);
    }

    #[test]
    fn frame_jacobian_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cfg = FeatureConfig::default();
        for _ in 0..50 {
            let e = Environment {
                lane: Lane::from([
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-1e-3..1e-3),
                    rng.random_range(-1e-5..1e-5),
                ]),
                speed_limit: rng.random_range(8.0..20.0),
                goal: [rng.random_range(20.0..60.0), rng.random_range(-3.0..3.0)],
                dt: 0.1,
                obstacles: vec![],
            };
            let obs: Vec<[f64; 2]> =
                (0..3).map(|_| [rng.random_range(-10.0..30.0), rng.random_range(-6.0..6.0)]).collect();
            let z0: Vec<f64> = vec![
                rng.random_range(0.0..30.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(5.0..25.0),
                rng.random_range(-0.2..0.2),
                rng.random_range(-2.0..2.0),
                rng.random_range(-0.1..0.1),
                rng.random_range(-2.0..2.0),
                rng.random_range(-0.1..0.1),
            ];
            let eval_z = |z: &[f64], obs: &[[f64; 2]]| {
                let input = FrameInput {
                    state: State::new(z[0], z[1], z[2], z[3]),
                    control: Control::new(z[4], z[5]),
                    prev_control: Control::new(z[6], z[7]),
                    is_final: true,
                    obstacles: obs,
                };
                eval_frame(&input, &e, &cfg)
            };
            let base = eval_z(&z0, &obs);
            let eps = 1e-6;
            for i in 0..FRAME_VARS {
                let mut zp = z0.clone();
                let mut zm = z0.clone();
                zp[i] += eps;
                zm[i] -= eps;
                let (fp, fm) = (eval_z(&zp, &obs).values, eval_z(&zm, &obs).values);
                for k in 0..N_FEATURES {
                    let fd = (fp[k] - fm[k]) / (2.0 * eps);
                    let an = base.jac[k][i];
                    assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "k={k} i={i}: fd {fd} vs {an}");
                }
            }
            for j in 0..obs.len() {
                for c in 0..2 {
                    let mut op = obs.clone();
                    let mut om = obs.clone();
                    op[j][c] += eps;
                    om[j][c] -= eps;
                    let fd = (eval_z(&z0, &op).values[OBSTACLE] - eval_z(&z0, &om).values[OBSTACLE]) / (2.0 * eps);
                    assert!((fd - base.obstacle_grad[j][c]).abs() < 1e-6);
                }
            }
        }
    }

    fn demo(u: Vec<Control>, goal: [f64; 2]) -> Demonstration {
        let x0 = State::new(0.0, 0.0, 10.0, 0.0);
        let expert = DynamicsVariant::corrected(0.1).unroll_absolute(&x0, &u).unwrap();
        Demonstration {
            history: History::new(vec![HistoryFrame { state: x0, control: Control::new(0.1, 0.0) }]).unwrap(),
            env: env(goal, vec![]),
            expert,
        }
    }

    #[test]
    fn normalizer_identical_demos() {
        let u: Vec<Control> = (0..5).map(|t| Control::new(0.2 * t as f64, 0.01 * (t as f64 - 2.0))).collect();
        let d = demo(u, [6.0, 0.5]);
        let cfg = FeatureConfig::default();
        let norm = FeatureNormalizer::fit(&[d.clone(), d.clone(), d.clone()], &cfg).unwrap();
        let frames = all_frame_features(&d.expert, &d.env, &d.history, &cfg).unwrap();
        for k in 0..N_FEATURES {
            let n = active_frames(k, 5) as f64;
            let expect = if active_frames(k, 5) == 1 {
                frames[4][k].abs()
            } else {
                frames.iter().map(|f| f[k].abs()).sum::<f64>() / n
            };
            if expect > 1e-12 {
                assert!((norm.divisors[k] - expect).abs() < 1e-12, "k={k}");
            } else {
                assert_eq!(norm.divisors[k], 1.0);
            }
        }
    }

    #[test]
    fn normalized_controls_are_standardized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let demos: Vec<Demonstration> = (0..10)
            .map(|_| {
                let u = (0..8).map(|_| Control::new(rng.random_range(-2.0..2.0), rng.random_range(-0.1..0.1))).collect();
                demo(u, [10.0, 0.0])
            })
            .collect();
        let norm = FeatureNormalizer::fit(&demos, &FeatureConfig::default()).unwrap();
        let z: Vec<[f64; 2]> =
            demos.iter().flat_map(|d| d.expert.controls.iter().map(|u| norm.normalize_control(u))).collect();
        let n = z.len() as f64;
        for j in 0..2 {
            let mean = z.iter().map(|v| v[j]).sum::<f64>() / n;
            let var = z.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-6);
        }
        // mean |normalized feature| is one on active frames
        let cfg = FeatureConfig::default();
        let mut sum = [0.0; N_FEATURES];
        let mut cnt = [0.0; N_FEATURES];
        for d in &demos {
            let frames = all_frame_features(&d.expert, &d.env, &d.history, &cfg).unwrap();
            for (t, f) in frames.iter().enumerate() {
                let g = norm.apply(f);
                for k in 0..N_FEATURES {
                    if active_frames(k, 8) == 8 || t == 7 {
                        sum[k] += g[k].abs();
                        cnt[k] += 1.0;
                    }
                }
            }
        }
        for k in 0..N_FEATURES {
            assert!((sum[k] / cnt[k] - 1.0).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn zero_variance_channel_is_named() {
        let d = demo(vec![Control::new(0.5, 0.0); 4], [5.0, 0.0]);
        match FeatureNormalizer::fit(&[d], &FeatureConfig::default()) {
            Err(Error::Structure(m)) => assert!(m.contains("accel")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn environment_encoding_layout() {
        let e = Environment {
            lane: Lane::from([1.0, 0.0, 0.0, 0.0]),
            speed_limit: 15.0,
            goal: [50.0, 2.0],
            dt: 0.1,
            obstacles: (0..6)
                .map(|i| OtherVehicleTrack { positions: vec![[10.0 * (i + 1) as f64, 0.0], [10.0 * (i + 1) as f64 + 1.0, 0.0]] })
                .collect(),
        };
        let x0 = State::new(5.0, 0.5, 10.0, 0.0);
        let enc = encode_environment(&e, &x0);
        assert_eq!(enc[0], 0.5);
        assert_eq!(&enc[4..8], &[15.0, 45.0, 1.5, 0.1]);
        // nearest obstacle first
        assert_eq!(&enc[8..12], &[5.0, -0.5, 1.0, 0.0]);
        assert_eq!(&enc[24..], &[0.0; 5]);
    }

    proptest::proptest! {
        #[test]
        fn normalizer_round_trip(f in proptest::array::uniform10(-1e3f64..1e3),
                                 d in proptest::array::uniform10(1e-3f64..1e3)) {
            let norm = FeatureNormalizer { divisors: d, control_mean: [0.1, 0.0], control_std: [1.5, 0.02] };
            let back = norm.invert(&norm.apply(&f));
            for k in 0..N_FEATURES {
                proptest::prop_assert!((back[k] - f[k]).abs() <= 1e-12 * (1.0 + f[k].abs()));
            }
            let u = Control::new(f[0] / 100.0, f[1] / 1e4);
            let u2 = norm.denormalize_control(norm.normalize_control(&u));
            proptest::prop_assert!((u2.accel - u.accel).abs() < 1e-12 && (u2.steer - u.steer).abs() < 1e-12);
        }
    }
}
