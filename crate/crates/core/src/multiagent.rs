//! Joint control of several agents under one shared cost.
//!
//! The joint cost is the sum of per-agent costs, where each agent sees the
//! other agents' current rollouts as moving obstacles. All machinery lives in
//! [`Scene`]; this module exposes the scene-level entry points.

use std::time::Instant;

use rayon::prelude::*;

use crate::cost::{CostFunction, CostKind};
use crate::dynamics::DynamicsVariant;
use crate::error::Result;
use crate::generator::PolicyGenerator;
use crate::learning::{synthesize_scene, train_scenes, TrainConfig, TrainOutput};
use crate::problem::{scene_agents, Param, Scene};
use crate::rng::Rng;
use crate::sampler::{solve_scene, SamplerConfig, SolverResult};
use crate::types::{Control, ControlSequence, JointScene, Trajectory};

/// `sum_k C(x^k, u^k)` with the coupling through obstacle features.
pub fn joint_cost(cost: &CostFunction, scene: &JointScene, trajs: &[Trajectory], dynamics: &DynamicsVariant) -> Result<f64> {
    let s = Scene::new(scene_agents(scene), scene.horizon(), cost, *dynamics, Param::NormalizedDelta)?;
    Ok(s.evaluate_trajectories(trajs, false)?.0)
}

/// Runs the configured solver over the concatenated controls of all agents.
/// `init` holds absolute controls per agent; `None` starts every agent from
/// its anchor.
pub fn joint_solve(
    cost: &CostFunction,
    scene: &JointScene,
    init: Option<&[Vec<Control>]>,
    dynamics: &DynamicsVariant,
    cfg: &SamplerConfig,
    rng: &mut Rng,
) -> Result<Vec<SolverResult>> {
    let start = Instant::now();
    let s = Scene::new(scene_agents(scene), scene.horizon(), cost, *dynamics, Param::NormalizedDelta)?;
    let w0 = match init {
        Some(c) => s.encode(c)?,
        None => s.zero_init(),
    };
    let chain = solve_scene(&s, &w0, cfg, rng)?;
    let trajs = s.rollout(&chain.w)?;
    let wall_time = start.elapsed().as_secs_f64();
    Ok(trajs
        .into_iter()
        .enumerate()
        .map(|(k, trajectory)| SolverResult {
            controls: ControlSequence::absolute(trajectory.controls.clone()),
            trajectory,
            energy_trace: chain.energy_trace.clone(),
            accepted: chain.accepted,
            wall_time,
            path: chain.path.as_ref().map(|p| p.iter().map(|w| s.agent_controls(w, k)).collect()),
        })
        .collect())
}

/// Langevin over the joint control space; every step re-rolls all agents.
pub fn joint_langevin(
    cost: &CostFunction,
    scene: &JointScene,
    dynamics: &DynamicsVariant,
    cfg: &SamplerConfig,
    rng: &mut Rng,
) -> Result<Vec<SolverResult>> {
    let cfg = SamplerConfig { kind: crate::sampler::SolverKind::Langevin, ..cfg.clone() };
    joint_solve(cost, scene, None, dynamics, &cfg, rng)
}

/// Test-time joint synthesis: `samples[scene][agent][copy]`.
#[allow(clippy::too_many_arguments)]
pub fn predict_scenes(
    cost: &CostFunction,
    generator: Option<&PolicyGenerator>,
    scenes: &[JointScene],
    sampler: &SamplerConfig,
    dynamics: &DynamicsVariant,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<Trajectory>>>> {
    let seed = crate::rng::derive(seed, "predict", &[]);
    scenes
        .par_iter()
        .enumerate()
        .map(|(i, sc)| {
            let s = synthesize_scene(cost, sc, dynamics, sampler, generator, samples, seed, &[i as u64])?;
            Ok((0..sc.agents.len()).map(|k| s.trajectories.iter().map(|c| c[k].clone()).collect()).collect())
        })
        .collect()
}

/// Shared-parameter training over joint scenes.
pub fn train_multiagent(scenes: &[JointScene], kind: CostKind, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_scenes(scenes, kind, cfg, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostModel;
    use crate::features::{FeatureConfig, FeatureNormalizer, N_FEATURES, OBSTACLE};
    use crate::rng::substream;
    use crate::types::{Demonstration, Environment, History, HistoryFrame, Lane, State};
    use proptest::prelude::*;

    fn agent(x: f64, y: f64, h: f64, goal: [f64; 2], t: usize) -> Demonstration {
        let s = State::new(x, y, 8.0, h);
        let expert = DynamicsVariant::default().unroll_absolute(&s, &vec![Control::default(); t]).unwrap();
        Demonstration {
            history: History::new(vec![HistoryFrame { state: s, control: Control::default() }]).unwrap(),
            env: Environment { lane: Lane::default(), speed_limit: 10.0, goal, dt: 0.1, obstacles: vec![] },
            expert,
        }
    }

    fn cost(theta: [f64; N_FEATURES]) -> CostFunction {
        CostFunction::new(CostModel::linear(theta), FeatureNormalizer::identity(), FeatureConfig::default())
    }

    #[test]
    fn one_agent_joint_cost_is_single_cost() {
        let d = agent(0.0, 0.5, 0.0, [30.0, 0.0], 8);
        let c = cost([0.3, 0.2, 1.0, 0.1, 0.5, 0.2, 1.0, 0.3, 0.4, -0.1]);
        let sc = JointScene::new(vec![d.clone()]).unwrap();
        let j = joint_cost(&c, &sc, &[d.expert.clone()], &DynamicsVariant::default()).unwrap();
        assert_eq!(j, c.cost_value(&d.expert, &d.env, &d.history).unwrap());
    }

    #[test]
    fn far_agents_sum_independently() {
        let a = agent(0.0, 0.0, 0.0, [30.0, 0.0], 8);
        let b = agent(0.0, 500.0, 0.0, [30.0, 500.0], 8);
        let c = cost([0.3, 0.2, 1.0, 0.1, 0.5, 0.2, 1.0, 0.3, 0.4, -0.1]);
        let sc = JointScene::new(vec![a.clone(), b.clone()]).unwrap();
        let j = joint_cost(&c, &sc, &[a.expert.clone(), b.expert.clone()], &DynamicsVariant::default()).unwrap();
        let sep = c.cost_value(&a.expert, &a.env, &a.history).unwrap() + c.cost_value(&b.expert, &b.env, &b.history).unwrap();
        assert!((j - sep).abs() < 1e-9 * sep.abs().max(1.0));
    }

    #[test]
    fn one_agent_joint_langevin_matches_single_sampler() {
        let d = agent(0.0, 0.5, 0.0, [30.0, 0.0], 6);
        let c = cost([0.3, 0.2, 1.0, 0.1, 0.5, 0.2, 1.0, 0.3, 0.4, 0.0]);
        let sc = JointScene::new(vec![d.clone()]).unwrap();
        let cfg = SamplerConfig { steps: 10, ..Default::default() };
        let j = joint_langevin(&c, &sc, &DynamicsVariant::default(), &cfg, &mut substream(3, "x", &[])).unwrap();
        let agent = crate::problem::AgentProblem::from_demo(&d);
        let s = crate::sampler::solve(
            &c,
            &ControlSequence::absolute(vec![d.anchor(); 6]),
            &agent,
            &DynamicsVariant::default(),
            &SamplerConfig { kind: crate::sampler::SolverKind::Langevin, ..cfg },
            &mut substream(3, "x", &[]),
        )
        .unwrap();
        assert_eq!(j[0].energy_trace, s.energy_trace);
        assert_eq!(j[0].trajectory, s.trajectory);
    }

    #[test]
    fn repulsive_weight_separates_head_on_agents() {
        let t = 20;
        let a = agent(0.0, 0.0, 0.0, [30.0, 0.0], t);
        let b = agent(30.0, 0.3, std::f64::consts::PI, [0.0, 0.3], t);
        let mut theta = [0.0; N_FEATURES];
        theta[OBSTACLE] = -1.0;
        theta[5] = 0.01;
        theta[6] = 0.01;
        let c = cost(theta);
        let sc = JointScene::new(vec![a.clone(), b.clone()]).unwrap();
        let dist = |x: &Trajectory, y: &Trajectory| {
            x.states.iter().zip(&y.states).map(|(p, q)| (p.x - q.x).hypot(p.y - q.y)).fold(f64::INFINITY, f64::min)
        };
        let before = dist(&a.expert, &b.expert);
        let cfg = SamplerConfig { kind: crate::sampler::SolverKind::Gd, steps: 60, ..Default::default() };
        let r = joint_solve(&c, &sc, None, &DynamicsVariant::default(), &cfg, &mut substream(0, "x", &[])).unwrap();
        let after = dist(&r[0].trajectory, &r[1].trajectory);
        assert!(after > before, "{after} <= {before}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn joint_cost_is_permutation_invariant(ys in proptest::collection::vec(-6.0f64..6.0, 3), xs in proptest::collection::vec(0.0f64..20.0, 3)) {
            let ds: Vec<Demonstration> = (0..3).map(|i| agent(xs[i], ys[i], 0.0, [40.0, ys[i]], 6)).collect();
            let c = cost([0.3, 0.2, 1.0, 0.1, 0.5, 0.2, 1.0, 0.3, 0.4, -0.2]);
            let dy = DynamicsVariant::default();
            let fwd = JointScene::new(ds.clone()).unwrap();
            let rev = JointScene::new(ds.iter().rev().cloned().collect()).unwrap();
            let tf: Vec<Trajectory> = ds.iter().map(|d| d.expert.clone()).collect();
            let tr: Vec<Trajectory> = tf.iter().rev().cloned().collect();
            let a = joint_cost(&c, &fwd, &tf, &dy).unwrap();
            let b = joint_cost(&c, &rev, &tr, &dy).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
