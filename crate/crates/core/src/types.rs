//! Domain data model: vehicle states, controls, trajectories, scenes and
//! expert demonstrations.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Kinematic vehicle state. `x` is longitudinal, `y` lateral, heading is
/// measured from the +x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub h: f64,
}

impl State {
    pub const DIM: usize = 4;

    pub fn new(x: f64, y: f64, v: f64, h: f64) -> Self {
        Self { x, y, v, h }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.v, self.h]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// Checks the record-level invariants (finite, non-negative speed,
    /// heading in (-pi, pi]).
    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite(format!("state {:?}", self)));
        }
        if self.v < 0.0 {
            return Err(Error::Structure(format!("negative speed {}", self.v)));
        }
        if !(self.h > -PI && self.h <= PI) {
            return Err(Error::Structure(format!("heading {} outside (-pi, pi]", self.h)));
        }
        Ok(())
    }
}

impl From<[f64; 4]> for State {
    fn from(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<State> for [f64; 4] {
    fn from(s: State) -> Self {
        s.to_array()
    }
}

/// Per-step action: longitudinal acceleration and steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Control {
    pub accel: f64,
    pub steer: f64,
}

impl Control {
    pub const DIM: usize = 2;

    pub fn new(accel: f64, steer: f64) -> Self {
        Self { accel, steer }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.accel, self.steer]
    }

    pub fn is_finite(&self) -> bool {
        self.accel.is_finite() && self.steer.is_finite()
    }
}

impl From<[f64; 2]> for Control {
    fn from(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl From<Control> for [f64; 2] {
    fn from(c: Control) -> Self {
        c.to_array()
    }
}

impl std::ops::Add for Control {
    type Output = Control;
    fn add(self, o: Control) -> Control {
        Control::new(self.accel + o.accel, self.steer + o.steer)
    }
}

impl std::ops::Sub for Control {
    type Output = Control;
    fn sub(self, o: Control) -> Control {
        Control::new(self.accel - o.accel, self.steer - o.steer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBounds {
    pub accel_max: f64,
    pub steer_max: f64,
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self { accel_max: 5.0, steer_max: 0.6 }
    }
}

impl ControlBounds {
    pub fn contains(&self, c: &Control) -> bool {
        c.is_finite() && c.accel.abs() <= self.accel_max && c.steer.abs() <= self.steer_max
    }

    pub fn clip(&self, c: Control) -> Control {
        Control::new(
            c.accel.clamp(-self.accel_max, self.accel_max),
            c.steer.clamp(-self.steer_max, self.steer_max),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    Absolute,
    /// Entries are first differences, `u_t = u_{t-1} + du_t`.
    Delta,
}

/// A control sequence in either absolute or first-difference form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    pub controls: Vec<Control>,
    pub mode: ControlMode,
}

impl ControlSequence {
    pub fn absolute(controls: Vec<Control>) -> Self {
        Self { controls, mode: ControlMode::Absolute }
    }

    pub fn delta(deltas: Vec<Control>) -> Self {
        Self { controls: deltas, mode: ControlMode::Delta }
    }

    pub fn zeros(t: usize) -> Self {
        Self::absolute(vec![Control::default(); t])
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    /// Prefix-sum a delta sequence onto `anchor`. Absolute input is returned
    /// unchanged.
    pub fn to_absolute(&self, anchor: Control) -> ControlSequence {
        match self.mode {
            ControlMode::Absolute => {
                log::warn!("to_absolute called on an absolute sequence; returning it unchanged");
                self.clone()
            }
            ControlMode::Delta => {
                let mut acc = anchor;
                let controls = self
                    .controls
                    .iter()
                    .map(|d| {
                        acc = acc + *d;
                        acc
                    })
                    .collect();
                ControlSequence::absolute(controls)
            }
        }
    }

    /// First-difference an absolute sequence against `anchor`. Delta input is
    /// returned unchanged.
    pub fn to_delta(&self, anchor: Control) -> ControlSequence {
        match self.mode {
            ControlMode::Delta => {
                log::warn!("to_delta called on a delta sequence; returning it unchanged");
                self.clone()
            }
            ControlMode::Absolute => {
                let mut prev = anchor;
                let deltas = self
                    .controls
                    .iter()
                    .map(|u| {
                        let d = *u - prev;
                        prev = *u;
                        d
                    })
                    .collect();
                ControlSequence::delta(deltas)
            }
        }
    }

    /// Absolute controls, resolving delta mode against `anchor`.
    pub fn resolve(&self, anchor: Control) -> Vec<Control> {
        match self.mode {
            ControlMode::Absolute => self.controls.clone(),
            ControlMode::Delta => self.to_absolute(anchor).controls,
        }
    }
}

/// States `x_1..x_T` paired with the absolute controls `u_1..u_T` that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub controls: Vec<Control>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.states.iter().map(State::position).collect()
    }
}

/// Lane centre line as a cubic polynomial `y = c0 + c1 x + c2 x^2 + c3 x^3`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Lane {
    pub coeffs: [f64; 4],
}

impl From<[f64; 4]> for Lane {
    fn from(coeffs: [f64; 4]) -> Self {
        Self { coeffs }
    }
}

impl From<Lane> for [f64; 4] {
    fn from(l: Lane) -> Self {
        l.coeffs
    }
}

impl Lane {
    pub fn offset(&self, x: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coeffs;
        c0 + x * (c1 + x * (c2 + x * c3))
    }

    pub fn slope(&self, x: f64) -> f64 {
        let [_, c1, c2, c3] = self.coeffs;
        c1 + x * (2.0 * c2 + 3.0 * c3 * x)
    }

    pub fn curvature_term(&self, x: f64) -> f64 {
        let [_, _, c2, c3] = self.coeffs;
        2.0 * c2 + 6.0 * c3 * x
    }

    /// Lane direction at longitude `x`.
    pub fn heading(&self, x: f64) -> f64 {
        self.slope(x).atan()
    }
}

/// Future positions of a vehicle that is not controlled, one per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OtherVehicleTrack {
    pub positions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub lane: Lane,
    pub speed_limit: f64,
    pub goal: [f64; 2],
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub obstacles: Vec<OtherVehicleTrack>,
}

fn default_dt() -> f64 {
    0.1
}

impl Environment {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if !(self.speed_limit > 0.0) {
            return Err(Error::Structure(format!("speed limit {} must be positive", self.speed_limit)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Structure(format!("dt {} must be positive", self.dt)));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if o.positions.len() < horizon {
                return Err(Error::Structure(format!(
                    "obstacle {} track has {} frames, horizon is {}",
                    i,
                    o.positions.len(),
                    horizon
                )));
            }
            if o.positions.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(format!("obstacle {} track", i)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryFrame {
    pub state: State,
    pub control: Control,
}

/// Recent past `(x_t, u_t)` for `t = -k..0`; the last frame holds `x_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct History {
    pub frames: Vec<HistoryFrame>,
}

impl History {
    pub fn new(frames: Vec<HistoryFrame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Structure("history must be nonempty".into()));
        }
        Ok(Self { frames })
    }

    pub fn initial_state(&self) -> State {
        self.frames.last().expect("nonempty history").state
    }

    /// Last observed control, the anchor `u_0` for delta parameterization.
    pub fn last_control(&self) -> Control {
        self.frames.last().expect("nonempty history").control
    }
}

/// One expert training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demonstration {
    pub history: History,
    pub env: Environment,
    pub expert: Trajectory,
}

impl Demonstration {
    pub fn horizon(&self) -> usize {
        self.expert.len()
    }

    pub fn x0(&self) -> State {
        self.history.initial_state()
    }

    pub fn anchor(&self) -> Control {
        self.history.last_control()
    }

    /// Structural checks: nonempty history, matching expert lengths and a
    /// well-formed environment.
    pub fn check_structure(&self) -> Result<()> {
        if self.history.frames.is_empty() {
            return Err(Error::Structure("empty history".into()));
        }
        let t = self.expert.states.len();
        if t == 0 {
            return Err(Error::Structure("empty expert trajectory".into()));
        }
        if self.expert.controls.len() != t {
            return Err(Error::Structure(format!(
                "expert has {} states but {} controls",
                t,
                self.expert.controls.len()
            )));
        }
        self.env.validate(t)
    }
}

/// Several agents controlled jointly under one shared cost. Each agent's
/// environment lists only static obstacles; the other agents are added as
/// obstacles from their current rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointScene {
    pub agents: Vec<Demonstration>,
}

pub const MAX_AGENTS: usize = 64;

impl JointScene {
    pub fn new(agents: Vec<Demonstration>) -> Result<Self> {
        let s = Self { agents };
        s.check_structure()?;
        Ok(s)
    }

    pub fn check_structure(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::Structure("joint scene needs at least one agent".into()));
        }
        if self.agents.len() > MAX_AGENTS {
            return Err(Error::Structure(format!(
                "{} agents exceeds the maximum of {}",
                self.agents.len(),
                MAX_AGENTS
            )));
        }
        let t = self.agents[0].horizon();
        let dt = self.agents[0].env.dt;
        for a in &self.agents {
            a.check_structure()?;
            if a.horizon() != t {
                return Err(Error::Structure("agents must share one horizon".into()));
            }
            if a.env.dt != dt {
                return Err(Error::Structure("agents must share one dt".into()));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.agents[0].horizon()
    }

    /// Single-agent view of every agent, with the other agents' expert tracks
    /// appended as obstacles.
    pub fn flatten(&self) -> Vec<Demonstration> {
        (0..self.agents.len())
            .map(|k| {
                let mut d = self.agents[k].clone();
                for (j, other) in self.agents.iter().enumerate() {
                    if j != k {
                        d.env.obstacles.push(OtherVehicleTrack { positions: other.expert.positions() });
                    }
                }
                d
            })
            .collect()
    }
}

impl From<Demonstration> for JointScene {
    fn from(d: Demonstration) -> Self {
        JointScene { agents: vec![d] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_increments_hold_anchor() {
        let seq = ControlSequence::delta(vec![Control::default(); 5]);
        let abs = seq.to_absolute(Control::new(1.0, 0.1));
        assert!(abs.controls.iter().all(|u| *u == Control::new(1.0, 0.1)));
        assert_eq!(abs.mode, ControlMode::Absolute);
    }

    #[test]
    fn prefix_sum() {
        let seq = ControlSequence::delta(vec![Control::new(0.1, 0.0), Control::new(0.1, 0.0)]);
        let abs = seq.to_absolute(Control::default());
        assert_eq!(abs.controls, vec![Control::new(0.1, 0.0), Control::new(0.2, 0.0)]);
    }

    #[test]
    fn absolute_input_is_noop() {
        let seq = ControlSequence::absolute(vec![Control::new(1.0, 2.0)]);
        assert_eq!(seq.to_absolute(Control::new(5.0, 5.0)), seq);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.3), 0.3);
    }

    #[test]
    fn lane_polynomial() {
        let lane = Lane::from([1.0, 0.5, 0.25, 0.125]);
        assert_eq!(lane.offset(2.0), 1.0 + 1.0 + 1.0 + 1.0);
        assert_eq!(lane.slope(2.0), 0.5 + 1.0 + 1.5);
    }

    #[test]
    fn joint_scene_limits() {
        assert!(JointScene::new(vec![]).is_err());
    }

    proptest! {
        // Integer-valued increments keep the float sums exact.
        #[test]
        fn delta_round_trip(raw in prop::collection::vec((-1000i32..1000, -1000i32..1000), 1..40),
                            a0 in -100i32..100, s0 in -100i32..100) {
            let deltas: Vec<Control> = raw.iter().map(|&(a, s)| Control::new(a as f64 / 64.0, s as f64 / 1024.0)).collect();
            let anchor = Control::new(a0 as f64 / 8.0, s0 as f64 / 256.0);
            let seq = ControlSequence::delta(deltas);
            let back = seq.to_absolute(anchor).to_delta(anchor);
            prop_assert_eq!(back, seq);
        }

        #[test]
        fn delta_round_trip_general(raw in prop::collection::vec((-5.0f64..5.0, -0.5f64..0.5), 1..40)) {
            let anchor = Control::new(0.3, -0.01);
            let abs = ControlSequence::absolute(raw.iter().map(|&(a, s)| Control::new(a, s)).collect());
            let back = abs.to_delta(anchor).to_absolute(anchor);
            for (u, w) in back.controls.iter().zip(&abs.controls) {
                prop_assert!((u.accel - w.accel).abs() < 1e-12);
                prop_assert!((u.steer - w.steer).abs() < 1e-12);
            }
        }
    }
}
