//! Maximum-likelihood learning of the cost by analysis by synthesis.
//!
//! Every mini-batch draws (or optimizes) trajectories under the current cost
//! and moves `theta` along `mean[dC/dtheta(synth) - dC/dtheta(obs)]`.
//! Single-agent training is the one-agent case of the joint-scene loop.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{CostFunction, CostKind, CostModel, CostSpec};
use crate::dynamics::DynamicsVariant;
use crate::error::{Error, Result};
use crate::eval;
use crate::features::{active_frames, FeatureConfig, FeatureNormalizer, FeatureVector, N_FEATURES};
use crate::generator::{generator_loss_grad, noise_fingerprint, sample_noise, GenSample, GeneratorConfig, NoiseSequence, PolicyGenerator};
use crate::problem::{scene_agents, Param, Scene};
use crate::rng::substream;
use crate::sampler::{solve_scene, SamplerConfig, SolverKind};
use crate::types::{Control, ControlBounds, Demonstration, JointScene, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    /// `lr * decay^t`
    Exponential,
    /// `lr / (1 + t)`
    RobbinsMonro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub lr: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: LrSchedule,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self::default_for(CostKind::Linear)
    }
}

impl OptimConfig {
    pub fn default_for(kind: CostKind) -> Self {
        let (lr, decay) = match kind {
            CostKind::Linear => (0.1, 0.999),
            CostKind::Mlp => (5e-3, 1.0),
            CostKind::Cnn => (5e-3, 0.999),
        };
        Self { lr, decay, beta1: 0.5, beta2: 0.5, eps: 1e-8, schedule: LrSchedule::Exponential }
    }

    /// Learning rate of update number `t` (0-based).
    pub fn lr_at(&self, t: u64) -> f64 {
        match self.schedule {
            LrSchedule::Exponential => self.lr * self.decay.powf(t as f64),
            LrSchedule::RobbinsMonro => self.lr / (1.0 + t as f64),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(self.decay > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// Bias-corrected Adam descent step on `params`.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], lr: f64, beta1: f64, beta2: f64, eps: f64) {
    state.t += 1;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + eps);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Zeros,
    Generator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Synthesized copies per demonstration.
    pub samples_per_demo: usize,
    /// Defaults per cost kind when absent.
    pub optimizer: Option<OptimConfig>,
    pub sampler: SamplerConfig,
    pub seed: u64,
    pub dynamics: DynamicsVariant,
    pub features: FeatureConfig,
    /// Overrides the default architecture of the chosen cost kind.
    pub cost: Option<CostSpec>,
    pub generator: GeneratorConfig,
    /// Chain initialization outside cooperative training; `generator` uses
    /// a fixed, randomly initialized generator.
    pub init: InitMode,
    pub missing_radius: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            epochs: 40,
            samples_per_demo: 1,
            optimizer: None,
            sampler: SamplerConfig::default(),
            seed: 0,
            dynamics: DynamicsVariant::default(),
            features: FeatureConfig::default(),
            cost: None,
            generator: GeneratorConfig::default(),
            init: InitMode::Zeros,
            missing_radius: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.samples_per_demo == 0 {
            return Err(Error::Config("samples_per_demo must be >= 1".into()));
        }
        self.sampler.validate()?;
        self.dynamics.validate()?;
        if let Some(o) = &self.optimizer {
            o.validate()?;
        }
        Ok(())
    }

    pub fn optimizer_for(&self, kind: CostKind) -> OptimConfig {
        self.optimizer.clone().unwrap_or_else(|| OptimConfig::default_for(kind))
    }
}

/// Rejects solver/cost combinations that cannot run.
pub fn check_combination(kind: CostKind, solver: SolverKind, max_agents: usize) -> Result<()> {
    if solver == SolverKind::Ilqr && kind == CostKind::Cnn {
        return Err(Error::Unsupported("iLQR needs a per-frame cost; the cnn cost is not decomposable".into()));
    }
    if solver == SolverKind::Ilqr && max_agents > 1 {
        return Err(Error::Unsupported("iLQR is single-agent only".into()));
    }
    Ok(())
}

/// Per-feature normalized moments `sum_t phi~_tk / active_frames(k)`.
pub fn moments(feats: &[FeatureVector]) -> FeatureVector {
    let t = feats.len();
    let mut m = [0.0; N_FEATURES];
    for f in feats {
        for k in 0..N_FEATURES {
            m[k] += f[k];
        }
    }
    for (k, v) in m.iter_mut().enumerate() {
        *v /= active_frames(k, t) as f64;
    }
    m
}

/// `mean_i [dC/dtheta(synth_i) - dC/dtheta(obs_i)]`, the synthesized term of
/// each demo averaged over its copies.
pub fn estimate_likelihood_grad(cost: &CostFunction, demos: &[Demonstration], synth: &[Vec<Trajectory>]) -> Result<Vec<f64>> {
    if demos.len() != synth.len() {
        return Err(Error::Structure(format!("{} synthesized sets for {} demonstrations", synth.len(), demos.len())));
    }
    if demos.is_empty() {
        return Err(Error::Structure("empty batch".into()));
    }
    let mut g = vec![0.0; cost.model.n_params()];
    let n = demos.len() as f64;
    for (i, (d, s)) in demos.iter().zip(synth).enumerate() {
        if s.is_empty() {
            return Err(Error::Structure(format!("demo {i} has no synthesized trajectories")));
        }
        let obs = cost.grad_wrt_params(&d.expert, &d.env, &d.history)?;
        let m = s.len() as f64;
        for tr in s {
            if tr.len() != d.horizon() {
                return Err(Error::Structure(format!("demo {i}: synthesized length {} vs horizon {}", tr.len(), d.horizon())));
            }
            let gs = cost.grad_wrt_params(tr, &d.env, &d.history)?;
            for j in 0..g.len() {
                g[j] += gs[j] / (m * n);
            }
        }
        for j in 0..g.len() {
            g[j] -= obs[j] / n;
        }
    }
    Ok(g)
}

/// Generator output used to initialize one agent's chain.
#[derive(Debug, Clone)]
pub struct GenInit {
    pub xi: NoiseSequence,
    pub controls: Vec<Control>,
}

/// Synthesized trajectories of one scene: `trajectories[copy][agent]`.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub trajectories: Vec<Vec<Trajectory>>,
    pub inits: Vec<Vec<Option<GenInit>>>,
    pub energy_traces: Vec<Vec<f64>>,
}

/// Runs the sampler on a scene, `copies` times, each chain on its own
/// substream of `seed` keyed by `stream`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_scene(
    cost: &CostFunction,
    scene: &JointScene,
    dynamics: &DynamicsVariant,
    sampler: &SamplerConfig,
    generator: Option<&PolicyGenerator>,
    copies: usize,
    seed: u64,
    stream: &[u64],
) -> Result<Synthesis> {
    let s = Scene::new(scene_agents(scene), scene.horizon(), cost, *dynamics, Param::NormalizedDelta)?;
    let mut out = Synthesis { trajectories: Vec::with_capacity(copies), inits: Vec::with_capacity(copies), energy_traces: Vec::new() };
    for m in 0..copies {
        let mut idx = stream.to_vec();
        idx.push(m as u64);
        let mut inits = Vec::with_capacity(s.n_agents());
        let mut init_controls = Vec::with_capacity(s.n_agents());
        for (k, a) in s.agents.iter().enumerate() {
            match generator {
                Some(g) => {
                    let mut kidx = idx.clone();
                    kidx.push(k as u64);
                    let xi = sample_noise(s.horizon, &mut substream(seed, "xi", &kidx));
                    let controls = g.generate(&a.x0, a.anchor, &a.env, &xi, dynamics)?.controls;
                    init_controls.push(controls.clone());
                    inits.push(Some(GenInit { xi, controls }));
                }
                None => {
                    init_controls.push(vec![Control::default(); s.horizon]);
                    inits.push(None);
                }
            }
        }
        let w0 = s.encode(&init_controls)?;
        let chain = solve_scene(&s, &w0, sampler, &mut substream(seed, "synth", &idx))?;
        out.trajectories.push(s.rollout(&chain.w)?);
        out.inits.push(inits);
        out.energy_traces.push(chain.energy_trace);
    }
    Ok(out)
}

/// Normalized moments of every agent of a scene for given trajectories.
pub fn scene_moments(cost: &CostFunction, dynamics: &DynamicsVariant, scene: &JointScene, trajs: &[Trajectory]) -> Result<Vec<FeatureVector>> {
    let s = Scene::new(scene_agents(scene), scene.horizon(), cost, *dynamics, Param::NormalizedDelta)?;
    (0..s.n_agents()).map(|k| Ok(moments(&s.agent_features(k, trajs)?))).collect()
}

pub fn expert_trajectories(scene: &JointScene) -> Vec<Trajectory> {
    scene.agents.iter().map(|a| a.expert.clone()).collect()
}

/// `|mean moments(synth) - mean moments(obs)|` per feature over every agent
/// of every scene; `synth[i][copy][agent]`.
pub fn moment_gap(cost: &CostFunction, dynamics: &DynamicsVariant, scenes: &[JointScene], synth: &[Vec<Vec<Trajectory>>]) -> Result<FeatureVector> {
    if scenes.len() != synth.len() {
        return Err(Error::Structure("misaligned synthesized scenes".into()));
    }
    let mut obs = [0.0; N_FEATURES];
    let mut syn = [0.0; N_FEATURES];
    let mut n_obs = 0.0;
    let mut n_syn = 0.0;
    for (sc, copies) in scenes.iter().zip(synth) {
        for m in scene_moments(cost, dynamics, sc, &expert_trajectories(sc))? {
            add(&mut obs, &m);
            n_obs += 1.0;
        }
        for c in copies {
            for m in scene_moments(cost, dynamics, sc, c)? {
                add(&mut syn, &m);
                n_syn += 1.0;
            }
        }
    }
    let mut gap = [0.0; N_FEATURES];
    for k in 0..N_FEATURES {
        gap[k] = (syn[k] / n_syn - obs[k] / n_obs).abs();
    }
    Ok(gap)
}

fn add(acc: &mut FeatureVector, x: &FeatureVector) {
    for k in 0..N_FEATURES {
        acc[k] += x[k];
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean `C(synth) - C(obs)` over the epoch's scenes.
    pub energy_gap: f64,
    pub moment_gap: Vec<f64>,
    pub max_moment_gap: f64,
    /// Final-frame RMSE of the synthesized trajectories against the experts.
    pub rmse_avg: f64,
    pub rmse_min: f64,
    pub missing_rate: f64,
    pub failed_scenes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator_loss: Option<f64>,
    /// RMS normalized distance between generator init and refined controls.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_refine_gap: Option<f64>,
    pub param_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.epochs {
            serde_json::to_writer(&mut out, e)?;
            writeln!(out)?;
        }
        Ok(())
    }

    /// The trace with wall-clock times zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut t = self.clone();
        for e in t.epochs.iter_mut() {
            e.wall_time = 0.0;
        }
        t
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub cost: CostFunction,
    pub generator: Option<PolicyGenerator>,
    pub trace: TrainTrace,
}

/// Algorithm 1 on single-agent demonstrations.
pub fn train_ebm(dataset: &[Demonstration], kind: CostKind, cfg: &TrainConfig) -> Result<TrainOutput> {
    let scenes = as_scenes(dataset)?;
    train_scenes(&scenes, kind, cfg, false)
}

/// Algorithm 2: generator-initialized sampling with generator regression.
pub fn train_cooperative(dataset: &[Demonstration], kind: CostKind, cfg: &TrainConfig) -> Result<TrainOutput> {
    let scenes = as_scenes(dataset)?;
    train_scenes(&scenes, kind, cfg, true)
}

pub fn as_scenes(dataset: &[Demonstration]) -> Result<Vec<JointScene>> {
    dataset.iter().map(|d| JointScene::new(vec![d.clone()])).collect()
}

/// Shared training loop over joint scenes.
pub fn train_scenes(scenes: &[JointScene], kind: CostKind, cfg: &TrainConfig, cooperative: bool) -> Result<TrainOutput> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::Structure("empty training set".into()));
    }
    for s in scenes {
        s.check_structure()?;
    }
    let max_agents = scenes.iter().map(|s| s.agents.len()).max().unwrap_or(1);
    check_combination(kind, cfg.sampler.kind, max_agents)?;
    let horizon = scenes[0].horizon();
    let spec = cfg.cost.clone().unwrap_or_else(|| CostSpec::default_for(kind, horizon));
    if spec.kind() != kind {
        return Err(Error::Config(format!("cost layout {:?} does not match requested kind {kind:?}", spec.kind())));
    }

    let flat: Vec<Demonstration> = scenes.iter().flat_map(JointScene::flatten).collect();
    let normalizer = FeatureNormalizer::fit(&flat, &cfg.features)?;
    let model = CostModel::init(spec, &mut substream(cfg.seed, "cost_init", &[]))?;
    let mut cost = CostFunction::new(model, normalizer, cfg.features);
    let opt = cfg.optimizer_for(kind);
    let mut adam = AdamState::new(cost.model.n_params());

    let gcfg = &cfg.generator;
    let mut generator = (cooperative || cfg.init == InitMode::Generator)
        .then(|| PolicyGenerator::init(gcfg.hidden.clone(), ControlBounds::default(), &mut substream(cfg.seed, "gen_init", &[])));
    let mut gen_adam = generator.as_ref().map(|g| AdamState::new(g.n_params()));
    let mut gen_steps: u64 = 0;

    let mut trace = TrainTrace::default();
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut substream(cfg.seed, "shuffle", &[epoch as u64]));
        let mut stats = EpochStats::default();
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let snapshot = &cost;
            let gen_ref = generator.as_ref();
            let results: Vec<(usize, Result<Synthesis>)> = batch
                .par_iter()
                .map(|&i| {
                    let r = synthesize_scene(
                        snapshot,
                        &scenes[i],
                        &cfg.dynamics,
                        &cfg.sampler,
                        gen_ref,
                        cfg.samples_per_demo,
                        cfg.seed,
                        &[epoch as u64, i as u64],
                    );
                    (i, r)
                })
                .collect();

            // analysis step
            let mut grad = vec![0.0; cost.model.n_params()];
            let mut ok: Vec<(usize, Synthesis)> = Vec::with_capacity(results.len());
            for (i, r) in results {
                match r {
                    Ok(s) => ok.push((i, s)),
                    Err(e) => {
                        log::warn!("epoch {epoch} batch {b}: scene {i} skipped: {e}");
                        stats.failed += 1;
                    }
                }
            }
            if ok.is_empty() {
                continue;
            }
            // every agent counts as one observation
            let n = ok.iter().map(|(i, _)| scenes[*i].agents.len()).sum::<usize>() as f64;
            for (i, syn) in &ok {
                let sc = &scenes[*i];
                let s = Scene::new(scene_agents(sc), sc.horizon(), &cost, cfg.dynamics, Param::NormalizedDelta)?;
                let experts = expert_trajectories(sc);
                let (c_obs, g_obs) = s.evaluate_trajectories(&experts, true)?;
                let g_obs = g_obs.expect("requested");
                let m = syn.trajectories.len() as f64;
                let mut c_syn = 0.0;
                for copy in &syn.trajectories {
                    let (c, g) = s.evaluate_trajectories(copy, true)?;
                    c_syn += c / m;
                    for (acc, gj) in grad.iter_mut().zip(g.expect("requested")) {
                        *acc += gj / (m * n);
                    }
                }
                for (acc, gj) in grad.iter_mut().zip(&g_obs) {
                    *acc -= gj / n;
                }
                stats.record(&s, sc, &experts, syn, c_syn - c_obs)?;
            }
            // ascend the likelihood = descend on its negative
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            let mut params = cost.model.params().to_vec();
            let lr = opt.lr_at(adam.t);
            adam_step(&mut adam, &mut params, &neg, lr, opt.beta1, opt.beta2, opt.eps);
            if params.iter().any(|p| !p.is_finite()) {
                let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                return Err(Error::Divergence(format!(
                    "non-finite parameters after epoch {epoch} batch {b} (gradient norm {gnorm:e}, lr {lr:e})"
                )));
            }
            cost.model.set_params(params)?;

            if let (Some(gen), true) = (generator.as_mut(), cooperative && gcfg.train) {
                let samples = gen_samples(scenes, &ok);
                if !samples.is_empty() {
                    let lr = gcfg.lr * gcfg.decay.powf(gen_steps as f64);
                    gen_steps += 1;
                    for _ in 0..gcfg.updates_per_step {
                        let (loss, g) = generator_loss_grad(gen, &samples, cost.normalizer.control_std, &cfg.dynamics)?;
                        if gcfg.use_adam {
                            let st = gen_adam.as_mut().expect("generator optimizer");
                            adam_step(st, &mut gen.params, &g, lr, opt.beta1, opt.beta2, opt.eps);
                        } else {
                            for (p, gi) in gen.params.iter_mut().zip(&g) {
                                *p -= lr * gi;
                            }
                        }
                        stats.gen_loss = Some(loss);
                    }
                    if gen.params.iter().any(|p| !p.is_finite()) {
                        return Err(Error::Divergence(format!("non-finite generator parameters after epoch {epoch} batch {b}")));
                    }
                }
            }
        }
        let rec = stats.finish(epoch, &cost, cfg.missing_radius, start.elapsed().as_secs_f64())?;
        log::info!(
            "epoch {epoch}: energy gap {:.4}, max moment gap {:.4}, rmse {:.3}",
            rec.energy_gap,
            rec.max_moment_gap,
            rec.rmse_avg
        );
        trace.epochs.push(rec);
    }
    Ok(TrainOutput { cost, generator, trace })
}

/// Test-time synthesis: `samples` chains per demonstration, initialized from
/// the generator when given and from zero controls otherwise.
#[allow(clippy::too_many_arguments)]
pub fn predict(
    cost: &CostFunction,
    generator: Option<&PolicyGenerator>,
    demos: &[Demonstration],
    sampler: &SamplerConfig,
    dynamics: &DynamicsVariant,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<Trajectory>>> {
    let seed = crate::rng::derive(seed, "predict", &[]);
    demos
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let scene = JointScene::new(vec![d.clone()])?;
            let s = synthesize_scene(cost, &scene, dynamics, sampler, generator, samples, seed, &[i as u64])?;
            Ok(s.trajectories.into_iter().map(|mut c| c.remove(0)).collect())
        })
        .collect()
}

fn gen_samples(scenes: &[JointScene], ok: &[(usize, Synthesis)]) -> Vec<GenSample> {
    let mut out = Vec::new();
    for (i, syn) in ok {
        let sc = &scenes[*i];
        for (copy, inits) in syn.trajectories.iter().zip(&syn.inits) {
            for (k, init) in inits.iter().enumerate() {
                if let Some(gi) = init {
                    let a = &sc.agents[k];
                    out.push(GenSample {
                        x0: a.x0(),
                        anchor: a.anchor(),
                        env: a.env.clone(),
                        init_fingerprint: noise_fingerprint(&gi.xi),
                        xi: gi.xi.clone(),
                        target: copy[k].controls.clone(),
                    });
                }
            }
        }
    }
    out
}

#[derive(Default)]
struct EpochStats {
    energy_gap: f64,
    n_scenes: usize,
    obs_moments: FeatureVector,
    syn_moments: FeatureVector,
    n_obs: usize,
    n_syn: usize,
    samples: Vec<Vec<Trajectory>>,
    gts: Vec<Trajectory>,
    failed: usize,
    gen_loss: Option<f64>,
    init_sq: f64,
    init_n: usize,
}

impl EpochStats {
    fn record(&mut self, s: &Scene<'_>, sc: &JointScene, experts: &[Trajectory], syn: &Synthesis, gap: f64) -> Result<()> {
        self.energy_gap += gap;
        self.n_scenes += 1;
        for k in 0..s.n_agents() {
            add(&mut self.obs_moments, &moments(&s.agent_features(k, experts)?));
            self.n_obs += 1;
            for copy in &syn.trajectories {
                add(&mut self.syn_moments, &moments(&s.agent_features(k, copy)?));
                self.n_syn += 1;
            }
            self.samples.push(syn.trajectories.iter().map(|c| c[k].clone()).collect());
            self.gts.push(experts[k].clone());
        }
        let sd = s.cost.normalizer.control_std;
        for (copy, inits) in syn.trajectories.iter().zip(&syn.inits) {
            for (k, init) in inits.iter().enumerate() {
                if let Some(gi) = init {
                    for (u, v) in copy[k].controls.iter().zip(&gi.controls) {
                        self.init_sq += ((u.accel - v.accel) / sd[0]).powi(2) + ((u.steer - v.steer) / sd[1]).powi(2);
                        self.init_n += 1;
                    }
                }
            }
        }
        let _ = sc;
        Ok(())
    }

    fn finish(self, epoch: usize, cost: &CostFunction, radius: f64, wall: f64) -> Result<EpochRecord> {
        let params = cost.model.params();
        let param_norm = params.iter().map(|p| p * p).sum::<f64>().sqrt();
        let keep_params = (params.len() <= 64).then(|| params.to_vec());
        if self.n_scenes == 0 {
            return Ok(EpochRecord {
                epoch,
                energy_gap: f64::NAN,
                moment_gap: vec![f64::NAN; N_FEATURES],
                max_moment_gap: f64::NAN,
                rmse_avg: f64::NAN,
                rmse_min: f64::NAN,
                missing_rate: f64::NAN,
                failed_scenes: self.failed,
                generator_loss: self.gen_loss,
                init_refine_gap: None,
                param_norm,
                params: keep_params,
                wall_time: wall,
            });
        }
        let gap: Vec<f64> = (0..N_FEATURES)
            .map(|k| (self.syn_moments[k] / self.n_syn as f64 - self.obs_moments[k] / self.n_obs as f64).abs())
            .collect();
        let t_last = self.gts[0].len() - 1;
        let am = eval::avg_min_rmse(&self.samples, &self.gts, &[t_last])?;
        Ok(EpochRecord {
            epoch,
            energy_gap: self.energy_gap / self.n_scenes as f64,
            max_moment_gap: gap.iter().copied().fold(0.0, f64::max),
            moment_gap: gap,
            rmse_avg: am.avg[0],
            rmse_min: am.min[0],
            missing_rate: eval::missing_rate(&self.samples, &self.gts, radius)?,
            failed_scenes: self.failed,
            generator_loss: self.gen_loss,
            init_refine_gap: (self.init_n > 0).then(|| (self.init_sq / self.init_n as f64).sqrt()),
            param_norm,
            params: keep_params,
            wall_time: wall,
        })
    }
}
