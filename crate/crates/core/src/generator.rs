//! Policy-network trajectory generator used to initialize the sampler.
//!
//! `u_t = F_alpha(x_{t-1}, u_{t-1}, e, xi_t)`, `x_t = f(x_{t-1}, u_t)`.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsVariant;
use crate::error::{Error, Result};
use crate::features::{encode_environment, ENV_ENCODING_DIM};
use crate::nn::{Activation, Mlp, MlpTape};
use crate::rng::Rng;
use crate::types::{Control, ControlBounds, Environment, State, Trajectory};

pub const NOISE_DIM: usize = 4;
const STATE_INPUTS: usize = 6;
pub const INPUT_DIM: usize = STATE_INPUTS + ENV_ENCODING_DIM + NOISE_DIM;

/// Fixed input scaling bringing every input to order one.
const STATE_SCALE: [f64; STATE_INPUTS] = [0.05, 0.2, 0.1, 2.0, 0.2, 2.0];
const ENV_SCALE: [f64; 8] = [0.2, 5.0, 200.0, 1e4, 0.1, 0.05, 0.2, 5.0];
const OBSTACLE_SCALE: [f64; 4] = [0.05, 0.2, 1.0, 1.0];

pub type NoiseSequence = Vec<[f64; NOISE_DIM]>;

pub fn sample_noise(t: usize, rng: &mut Rng) -> NoiseSequence {
    (0..t)
        .map(|_| {
            let mut xi = [0.0; NOISE_DIM];
            for v in xi.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            xi
        })
        .collect()
}

/// FNV-1a over the bit patterns of a noise sequence.
pub fn noise_fingerprint(xi: &[[f64; NOISE_DIM]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in xi.iter().flatten() {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyGenerator {
    pub hidden: Vec<usize>,
    pub bounds: ControlBounds,
    pub params: Vec<f64>,
}

impl PolicyGenerator {
    fn net_for(hidden: &[usize]) -> Mlp {
        let mut sizes = vec![INPUT_DIM];
        sizes.extend(hidden);
        sizes.push(2);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(Activation::Tanh);
        Mlp::new(sizes, acts)
    }

    fn net(&self) -> Mlp {
        Self::net_for(&self.hidden)
    }

    pub fn default_hidden() -> Vec<usize> {
        vec![64, 16, 8]
    }

    pub fn init(hidden: Vec<usize>, bounds: ControlBounds, rng: &mut Rng) -> Self {
        let mut params = Self::net_for(&hidden).init(rng);
        // keep the initial policy close to "keep straight"
        let net = Self::net_for(&hidden);
        let n = net.n_params();
        let last_in = hidden.last().copied().unwrap_or(INPUT_DIM);
        let last = n - (last_in * 2 + 2);
        for p in &mut params[last..] {
            *p *= 0.1;
        }
        Self { hidden, bounds, params }
    }

    pub fn zeros(hidden: Vec<usize>, bounds: ControlBounds) -> Self {
        let n = Self::net_for(&hidden).n_params();
        Self { hidden, bounds, params: vec![0.0; n] }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.len() != self.net().n_params() {
            return Err(Error::Shape(format!("generator expects {} parameters, got {}", self.net().n_params(), self.params.len())));
        }
        Ok(())
    }

    fn input(&self, x0: &State, s: &State, prev: Control, env_enc: &[f64; ENV_ENCODING_DIM], xi: &[f64; NOISE_DIM]) -> Vec<f64> {
        let raw = [s.x - x0.x, s.y - x0.y, s.v, s.h, prev.accel, prev.steer];
        let mut v = Vec::with_capacity(INPUT_DIM);
        v.extend(raw.iter().zip(STATE_SCALE).map(|(a, b)| a * b));
        for (i, e) in env_enc.iter().enumerate() {
            let sc = if i < 8 { ENV_SCALE[i] } else { OBSTACLE_SCALE[(i - 8) % 4] };
            v.push(e * sc);
        }
        v.extend_from_slice(xi);
        v
    }

    fn rollout(&self, x0: &State, anchor: Control, env: &Environment, xi: &[[f64; NOISE_DIM]], dynamics: &DynamicsVariant) -> Result<Rollout> {
        let net = self.net();
        let enc = encode_environment(env, x0);
        let mut s = *x0;
        let mut prev = anchor;
        let mut tapes = Vec::with_capacity(xi.len());
        let mut controls = Vec::with_capacity(xi.len());
        let mut states = Vec::with_capacity(xi.len());
        for (t, n) in xi.iter().enumerate() {
            let tape = net.forward(&self.params, &self.input(x0, &s, prev, &enc, n));
            let o = tape.output();
            let u = Control::new(self.bounds.accel_max * o[0], self.bounds.steer_max * o[1]);
            s = dynamics.step(&s, &u).map_err(|e| e.at_step(t))?;
            tapes.push(tape);
            controls.push(u);
            states.push(s);
            prev = u;
        }
        Ok(Rollout { tapes, traj: Trajectory { states, controls } })
    }

    /// Single ancestral pass through policy and dynamics.
    pub fn generate(
        &self,
        x0: &State,
        anchor: Control,
        env: &Environment,
        xi: &[[f64; NOISE_DIM]],
        dynamics: &DynamicsVariant,
    ) -> Result<Trajectory> {
        Ok(self.rollout(x0, anchor, env, xi, dynamics)?.traj)
    }
}

struct Rollout {
    tapes: Vec<MlpTape>,
    traj: Trajectory,
}

/// One regression target for the generator.
#[derive(Debug, Clone)]
pub struct GenSample {
    pub x0: State,
    pub anchor: Control,
    pub env: Environment,
    pub xi: NoiseSequence,
    /// Fingerprint of the noise used when the sampler was initialized.
    pub init_fingerprint: u64,
    pub target: Vec<Control>,
}

/// Mean over samples of `sum_t |(u~_t - G(xi)_t) / std|^2` and its gradient
/// w.r.t. the generator parameters, back-propagated through the policy and
/// the dynamics.
pub fn generator_loss_grad(
    gen: &PolicyGenerator,
    batch: &[GenSample],
    control_std: [f64; 2],
    dynamics: &DynamicsVariant,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Structure("empty generator batch".into()));
    }
    gen.validate()?;
    let net = gen.net();
    let n = batch.len() as f64;
    let inv_var = [1.0 / control_std[0].powi(2), 1.0 / control_std[1].powi(2)];
    let bound = [gen.bounds.accel_max, gen.bounds.steer_max];
    let mut loss = 0.0;
    let mut grad = vec![0.0; gen.n_params()];
    for (i, smp) in batch.iter().enumerate() {
        if noise_fingerprint(&smp.xi) != smp.init_fingerprint {
            return Err(Error::Contract(format!("sample {i}: noise differs from the one used for initialization")));
        }
        if smp.xi.len() != smp.target.len() {
            return Err(Error::Contract(format!("sample {i}: {} noise steps for {} target controls", smp.xi.len(), smp.target.len())));
        }
        let ro = gen.rollout(&smp.x0, smp.anchor, &smp.env, &smp.xi, dynamics)?;
        let t_len = smp.xi.len();
        let mut g_x = vec![[0.0; 4]; t_len + 1]; // adjoint of x_{t}, index t+1; index 0 is x0
        let mut g_u_carry = vec![[0.0; 2]; t_len + 1]; // from the prev-control input
        for t in (0..t_len).rev() {
            let u = ro.traj.controls[t];
            let e = [u.accel - smp.target[t].accel, u.steer - smp.target[t].steer];
            loss += (e[0] * e[0] * inv_var[0] + e[1] * e[1] * inv_var[1]) / n;
            let prev_state = if t == 0 { smp.x0 } else { ro.traj.states[t - 1] };
            let (a, b) = dynamics.jacobians(&prev_state, &u).map_err(|err| err.at_step(t))?;
            let gx_t = g_x[t + 1];
            let mut g_u = [0.0; 2];
            for j in 0..2 {
                g_u[j] = 2.0 * e[j] * inv_var[j] / n + g_u_carry[t + 1][j] + (0..4).map(|r| b[r][j] * gx_t[r]).sum::<f64>();
            }
            for j in 0..4 {
                g_x[t][j] += (0..4).map(|r| a[r][j] * gx_t[r]).sum::<f64>();
            }
            let dy = [g_u[0] * bound[0], g_u[1] * bound[1]];
            let din = net.backward(&gen.params, &ro.tapes[t], &dy, Some(&mut grad));
            for j in 0..4 {
                g_x[t][j] += din[j] * STATE_SCALE[j];
            }
            g_u_carry[t][0] += din[4] * STATE_SCALE[4];
            g_u_carry[t][1] += din[5] * STATE_SCALE[5];
        }
    }
    Ok((loss, grad))
}

/// Settings for the generator's own updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub decay: f64,
    /// Generator updates per synthesis step.
    pub updates_per_step: usize,
    pub use_adam: bool,
    /// Whether the generator is updated at all.
    pub train: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { hidden: PolicyGenerator::default_hidden(), lr: 2e-3, decay: 0.998, updates_per_step: 5, use_adam: true, train: true }
    }
}

/// Default-architecture generator with slightly jittered weights.
pub fn random_generator(rng: &mut Rng) -> PolicyGenerator {
    let mut g = PolicyGenerator::init(PolicyGenerator::default_hidden(), ControlBounds::default(), rng);
    for p in g.params.iter_mut() {
        *p += rng.random_range(-0.01..0.01);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Lane;
    use rand::SeedableRng;

    fn env() -> Environment {
        Environment { lane: Lane { coeffs: [0.0, 0.0, 0.001, 0.0] }, speed_limit: 10.0, goal: [30.0, 1.0], dt: 0.1, obstacles: vec![] }
    }

    #[test]
    fn zero_generator_drives_straight() {
        let g = PolicyGenerator::zeros(PolicyGenerator::default_hidden(), ControlBounds::default());
        let x0 = State::new(0.0, 0.0, 10.0, 0.0);
        let xi = sample_noise(5, &mut Rng::seed_from_u64(1));
        let tr = g.generate(&x0, Control::new(1.0, 0.1), &env(), &xi, &DynamicsVariant::default()).unwrap();
        assert!(tr.controls.iter().all(|u| u.accel == 0.0 && u.steer == 0.0));
        let expect = DynamicsVariant::default().unroll_absolute(&x0, &[Control::default(); 5]).unwrap();
        assert_eq!(tr, expect);
    }

    #[test]
    fn generation_is_deterministic_and_bounded() {
        let mut r = Rng::seed_from_u64(3);
        let mut g = random_generator(&mut r);
        for p in g.params.iter_mut() {
            *p *= 30.0;
        }
        let x0 = State::new(0.0, 0.0, 10.0, 0.0);
        let xi = sample_noise(10, &mut r);
        let a = g.generate(&x0, Control::default(), &env(), &xi, &DynamicsVariant::default()).unwrap();
        let b = g.generate(&x0, Control::default(), &env(), &xi, &DynamicsVariant::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.controls.iter().all(|u| ControlBounds::default().contains(u)));
    }

    fn sample(seed: u64, t: usize) -> GenSample {
        let mut r = Rng::seed_from_u64(seed);
        let xi = sample_noise(t, &mut r);
        let target = (0..t).map(|_| Control::new(r.random_range(-1.0..1.0), r.random_range(-0.05..0.05))).collect();
        GenSample {
            x0: State::new(0.0, 0.5, 9.0, 0.02),
            anchor: Control::new(0.2, -0.01),
            env: env(),
            init_fingerprint: noise_fingerprint(&xi),
            xi,
            target,
        }
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let g = PolicyGenerator::init(vec![6, 5], ControlBounds::default(), &mut Rng::seed_from_u64(4));
        let mut g = g;
        for p in g.params.iter_mut() {
            *p *= 3.0;
        }
        let batch = vec![sample(1, 3), sample(2, 3)];
        let sd = [1.2, 0.04];
        let d = DynamicsVariant::default();
        let (_, grad) = generator_loss_grad(&g, &batch, sd, &d).unwrap();
        let eps = 1e-6;
        let mut max_err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..g.n_params() {
            let mut a = g.clone();
            let mut b = g.clone();
            a.params[i] += eps;
            b.params[i] -= eps;
            let fd = (generator_loss_grad(&a, &batch, sd, &d).unwrap().0 - generator_loss_grad(&b, &batch, sd, &d).unwrap().0) / (2.0 * eps);
            max_err = max_err.max((fd - grad[i]).abs());
            scale = scale.max(fd.abs());
        }
        assert!(max_err / scale < 1e-5, "{max_err} / {scale}");
    }

    #[test]
    fn loss_vanishes_on_own_output() {
        let g = PolicyGenerator::init(vec![8], ControlBounds::default(), &mut Rng::seed_from_u64(5));
        let mut s = sample(7, 4);
        s.target = g.generate(&s.x0, s.anchor, &s.env, &s.xi, &DynamicsVariant::default()).unwrap().controls;
        let (l, grad) = generator_loss_grad(&g, &[s], [1.0, 0.05], &DynamicsVariant::default()).unwrap();
        assert_eq!(l, 0.0);
        assert!(grad.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn changed_noise_is_contract_violation() {
        let g = PolicyGenerator::init(vec![8], ControlBounds::default(), &mut Rng::seed_from_u64(5));
        let mut s = sample(7, 4);
        s.xi[2][0] += 1.0;
        assert!(matches!(generator_loss_grad(&g, &[s], [1.0, 0.05], &DynamicsVariant::default()), Err(Error::Contract(_))));
    }

    /// Single step with no hidden layer and identity-like output: the
    /// gradient w.r.t. the output bias is the least-squares residual.
    #[test]
    fn single_step_bias_gradient_is_residual() {
        let g = PolicyGenerator::zeros(vec![], ControlBounds::default());
        let mut s = sample(9, 1);
        s.target = vec![Control::new(0.6, 0.03)];
        let sd = [1.0, 0.1];
        let (l, grad) = generator_loss_grad(&g, &[s], sd, &DynamicsVariant::default()).unwrap();
        assert!((l - (0.36 + 0.09)).abs() < 1e-12);
        let nb = grad.len();
        // d/db of |bound * tanh(b) - target|^2 / sd^2 at b = 0
        assert!((grad[nb - 2] - 2.0 * (-0.6) * 5.0).abs() < 1e-12);
        assert!((grad[nb - 1] - 2.0 * (-0.03) / 0.01 * 0.6).abs() < 1e-12);
    }
}
