//! Parameterized cost models over normalized per-frame features.
//!
//! Every model maps the `T x 10` normalized feature sequence to a scalar.
//! [`CostModel::backward`] returns the gradient w.r.t. every feature entry and
//! optionally w.r.t. the flat parameter vector; the chain through the
//! features and the dynamics lives in [`crate::problem`].

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsVariant;
use crate::error::{Error, Result};
use crate::features::{all_frame_features, FeatureConfig, FeatureNormalizer, FeatureVector, N_FEATURES};
use crate::nn::{Activation, Conv1d, Mlp};
use crate::problem::{AgentProblem, Param, Scene};
use crate::types::{ControlMode, ControlSequence, Environment, History, State, Trajectory};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Linear,
    Mlp,
    Cnn,
}

impl std::str::FromStr for CostKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(CostKind::Linear),
            "mlp" => Ok(CostKind::Mlp),
            "cnn" | "conv" => Ok(CostKind::Cnn),
            other => Err(Error::Config(format!("unknown cost kind '{other}' (expected linear|mlp|cnn)"))),
        }
    }
}

/// Architecture descriptor; together with the flat parameter vector it fully
/// determines a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CostSpec {
    Linear,
    Mlp {
        hidden: Vec<usize>,
        slope: f64,
    },
    Conv {
        channels: Vec<usize>,
        strides: Vec<usize>,
        kernel: usize,
        horizon: usize,
        slope: f64,
    },
}

impl CostSpec {
    pub fn default_for(kind: CostKind, horizon: usize) -> Self {
        match kind {
            CostKind::Linear => CostSpec::Linear,
            CostKind::Mlp => CostSpec::Mlp { hidden: vec![64, 64], slope: DEFAULT_LEAKY_SLOPE },
            CostKind::Cnn => CostSpec::Conv {
                channels: vec![32, 64, 128, 256],
                strides: vec![2, 2, 2, 1],
                kernel: 4,
                horizon,
                slope: DEFAULT_LEAKY_SLOPE,
            },
        }
    }

    pub fn kind(&self) -> CostKind {
        match self {
            CostSpec::Linear => CostKind::Linear,
            CostSpec::Mlp { .. } => CostKind::Mlp,
            CostSpec::Conv { .. } => CostKind::Cnn,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CostSpec::Linear => Ok(()),
            CostSpec::Mlp { hidden, slope } => {
                if hidden.contains(&0) || !slope.is_finite() {
                    return Err(Error::Config(format!("invalid MLP layout {hidden:?} / slope {slope}")));
                }
                Ok(())
            }
            CostSpec::Conv { channels, strides, kernel, horizon, slope } => {
                if channels.is_empty()
                    || channels.len() != strides.len()
                    || channels.contains(&0)
                    || strides.contains(&0)
                    || *kernel == 0
                    || *horizon == 0
                    || !slope.is_finite()
                {
                    return Err(Error::Config(format!(
                        "invalid conv layout channels {channels:?} strides {strides:?} kernel {kernel} horizon {horizon}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Concrete network structure derived from a [`CostSpec`].
#[derive(Debug, Clone)]
enum Net {
    Linear,
    Mlp(Mlp),
    Conv { layers: Vec<Conv1d>, lens: Vec<usize>, slope: f64, head: Mlp },
}

impl Net {
    fn build(spec: &CostSpec) -> Self {
        match spec {
            CostSpec::Linear => Net::Linear,
            CostSpec::Mlp { hidden, slope } => {
                let mut sizes = vec![N_FEATURES];
                sizes.extend(hidden);
                sizes.push(1);
                let mut acts = vec![Activation::LeakyRelu(*slope); hidden.len()];
                acts.push(Activation::Identity);
                Net::Mlp(Mlp::new(sizes, acts))
            }
            CostSpec::Conv { channels, strides, kernel, horizon, slope } => {
                let mut layers = Vec::new();
                let mut lens = vec![*horizon];
                let mut c_in = N_FEATURES;
                for (&c, &s) in channels.iter().zip(strides) {
                    let l = Conv1d { in_channels: c_in, out_channels: c, kernel: *kernel, stride: s };
                    lens.push(l.out_len(*lens.last().unwrap()));
                    layers.push(l);
                    c_in = c;
                }
                let flat = c_in * lens.last().unwrap();
                let head = Mlp::new(vec![flat, 1], vec![Activation::Identity]);
                Net::Conv { layers, lens, slope: *slope, head }
            }
        }
    }

    fn n_params(&self) -> usize {
        match self {
            Net::Linear => N_FEATURES,
            Net::Mlp(m) => m.n_params(),
            Net::Conv { layers, head, .. } => layers.iter().map(Conv1d::n_params).sum::<usize>() + head.n_params(),
        }
    }
}

/// Gradients of a model evaluated on one feature sequence.
#[derive(Debug, Clone)]
pub struct CostBackward {
    pub value: f64,
    /// dC / d(normalized feature) per frame.
    pub d_feats: Vec<FeatureVector>,
    pub d_params: Option<Vec<f64>>,
}

/// A cost model: architecture plus flat parameters `theta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CostModelRepr", into = "CostModelRepr")]
pub struct CostModel {
    spec: CostSpec,
    params: Vec<f64>,
    net: Net,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostModelRepr {
    layout: CostSpec,
    params: Vec<f64>,
}

impl TryFrom<CostModelRepr> for CostModel {
    type Error = Error;
    fn try_from(r: CostModelRepr) -> Result<Self> {
        CostModel::new(r.layout, r.params)
    }
}

impl From<CostModel> for CostModelRepr {
    fn from(m: CostModel) -> Self {
        CostModelRepr { layout: m.spec, params: m.params }
    }
}

impl PartialEq for CostModel {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.params == other.params
    }
}

impl CostModel {
    pub fn new(spec: CostSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let net = Net::build(&spec);
        let n = net.n_params();
        if params.len() != n {
            return Err(Error::Shape(format!("{:?} cost expects {n} parameters, got {}", spec.kind(), params.len())));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("cost parameters".into()));
        }
        Ok(Self { spec, params, net })
    }

    pub fn linear(theta: FeatureVector) -> Self {
        Self::new(CostSpec::Linear, theta.to_vec()).expect("linear layout")
    }

    /// Linear weights drawn from a standard normal; neural layers use
    /// fan-in scaled normal weights and zero biases.
    pub fn init<R: Rng>(spec: CostSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let net = Net::build(&spec);
        let params = match &net {
            Net::Linear => (0..N_FEATURES)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z
                })
                .collect(),
            Net::Mlp(m) => m.init(rng),
            Net::Conv { layers, head, .. } => {
                let mut p = Vec::with_capacity(net.n_params());
                for l in layers {
                    p.extend(l.init(rng));
                }
                p.extend(head.init(rng));
                p
            }
        };
        Self::new(spec, params)
    }

    pub fn zeros(spec: CostSpec) -> Result<Self> {
        let n = Net::build(&spec).n_params();
        Self::new(spec, vec![0.0; n])
    }

    pub fn spec(&self) -> &CostSpec {
        &self.spec
    }

    pub fn kind(&self) -> CostKind {
        self.spec.kind()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", self.params.len(), params.len())));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("cost parameter update".into()));
        }
        self.params = params;
        Ok(())
    }

    /// Whether the cost is a sum of identical per-frame terms.
    pub fn is_markovian(&self) -> bool {
        !matches!(self.net, Net::Conv { .. })
    }

    /// Horizon required by the model, if any.
    pub fn required_horizon(&self) -> Option<usize> {
        match &self.spec {
            CostSpec::Conv { horizon, .. } => Some(*horizon),
            _ => None,
        }
    }

    fn check_len(&self, t: usize) -> Result<()> {
        if t == 0 {
            return Err(Error::Shape("empty feature sequence".into()));
        }
        if let Some(h) = self.required_horizon() {
            if h != t {
                return Err(Error::Shape(format!("conv cost built for horizon {h}, got {t} frames")));
            }
        }
        Ok(())
    }

    pub fn value(&self, feats: &[FeatureVector]) -> Result<f64> {
        self.check_len(feats.len())?;
        Ok(match &self.net {
            Net::Linear => feats.iter().map(|f| dot(&self.params, f)).sum(),
            Net::Mlp(m) => feats.iter().map(|f| m.forward(&self.params, f).output()[0]).sum(),
            Net::Conv { .. } => self.conv_forward(feats).0,
        })
    }

    /// Value and gradient of a single frame term. Only for Markovian models.
    pub fn frame_value_grad(&self, f: &FeatureVector) -> Result<(f64, FeatureVector)> {
        match &self.net {
            Net::Linear => {
                let mut g = [0.0; N_FEATURES];
                g.copy_from_slice(&self.params);
                Ok((dot(&self.params, f), g))
            }
            Net::Mlp(m) => {
                let tape = m.forward(&self.params, f);
                let dx = m.backward(&self.params, &tape, &[1.0], None);
                let mut g = [0.0; N_FEATURES];
                g.copy_from_slice(&dx);
                Ok((tape.output()[0], g))
            }
            Net::Conv { .. } => Err(Error::Unsupported("conv cost has no per-frame decomposition".into())),
        }
    }

    pub fn backward(&self, feats: &[FeatureVector], want_params: bool) -> Result<CostBackward> {
        self.check_len(feats.len())?;
        let mut d_params = want_params.then(|| vec![0.0; self.params.len()]);
        match &self.net {
            Net::Linear => {
                let mut theta = [0.0; N_FEATURES];
                theta.copy_from_slice(&self.params);
                if let Some(dp) = d_params.as_mut() {
                    for f in feats {
                        for k in 0..N_FEATURES {
                            dp[k] += f[k];
                        }
                    }
                }
                let value = feats.iter().map(|f| dot(&self.params, f)).sum();
                Ok(CostBackward { value, d_feats: vec![theta; feats.len()], d_params })
            }
            Net::Mlp(m) => {
                let mut value = 0.0;
                let mut d_feats = Vec::with_capacity(feats.len());
                for f in feats {
                    let tape = m.forward(&self.params, f);
                    value += tape.output()[0];
                    let dx = m.backward(&self.params, &tape, &[1.0], d_params.as_deref_mut());
                    let mut g = [0.0; N_FEATURES];
                    g.copy_from_slice(&dx);
                    d_feats.push(g);
                }
                Ok(CostBackward { value, d_feats, d_params })
            }
            Net::Conv { layers, lens, slope, head } => {
                let (value, acts) = self.conv_forward(feats);
                let act = Activation::LeakyRelu(*slope);
                let mut offsets = Vec::with_capacity(layers.len());
                let mut off = 0;
                for l in layers {
                    offsets.push(off);
                    off += l.n_params();
                }
                let head_p = &self.params[off..];
                let last = acts.last().unwrap();
                let tape = head.forward(head_p, &last.1);
                let mut delta = head.backward(head_p, &tape, &[1.0], d_params.as_deref_mut().map(|d| &mut d[off..]));
                for (i, l) in layers.iter().enumerate().rev() {
                    let (pre, post) = &acts[i + 1];
                    for (d, (z, y)) in delta.iter_mut().zip(pre.iter().zip(post)) {
                        *d *= act.derivative(*z, *y);
                    }
                    let p = &self.params[offsets[i]..offsets[i] + l.n_params()];
                    let dp = d_params.as_deref_mut().map(|d| &mut d[offsets[i]..offsets[i] + l.n_params()]);
                    delta = l.backward(p, &acts[i].1, lens[i], &delta, dp);
                }
                let t_len = feats.len();
                let d_feats = (0..t_len)
                    .map(|t| {
                        let mut g = [0.0; N_FEATURES];
                        for (c, gc) in g.iter_mut().enumerate() {
                            *gc = delta[c * t_len + t];
                        }
                        g
                    })
                    .collect();
                Ok(CostBackward { value, d_feats, d_params })
            }
        }
    }

    /// Returns the value and per-layer (pre, post) activations; entry 0 is
    /// the channel-major input.
    #[allow(clippy::type_complexity)]
    fn conv_forward(&self, feats: &[FeatureVector]) -> (f64, Vec<(Vec<f64>, Vec<f64>)>) {
        let Net::Conv { layers, lens, slope, head } = &self.net else { unreachable!() };
        let t_len = feats.len();
        let mut x = vec![0.0; N_FEATURES * t_len];
        for (t, f) in feats.iter().enumerate() {
            for c in 0..N_FEATURES {
                x[c * t_len + t] = f[c];
            }
        }
        let act = Activation::LeakyRelu(*slope);
        let mut acts = vec![(x.clone(), x)];
        let mut off = 0;
        for (i, l) in layers.iter().enumerate() {
            let p = &self.params[off..off + l.n_params()];
            off += l.n_params();
            let z = l.forward(p, &acts[i].1, lens[i]);
            let y = z.iter().map(|&v| act.apply(v)).collect();
            acts.push((z, y));
        }
        let value = head.forward(&self.params[off..], &acts.last().unwrap().1).output()[0];
        (value, acts)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient of the cost at one control sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub value: f64,
    /// dC / du_t, in the units and mode of the input sequence.
    pub d_controls: Vec<[f64; 2]>,
    pub d_params: Vec<f64>,
}

/// A cost model bound to the feature map it consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostFunction {
    pub model: CostModel,
    pub normalizer: FeatureNormalizer,
    #[serde(default)]
    pub features: FeatureConfig,
}

impl CostFunction {
    pub fn new(model: CostModel, normalizer: FeatureNormalizer, features: FeatureConfig) -> Self {
        Self { model, normalizer, features }
    }

    pub fn normalized_features(&self, traj: &Trajectory, env: &Environment, history: &History) -> Result<Vec<FeatureVector>> {
        Ok(all_frame_features(traj, env, history, &self.features)?.iter().map(|f| self.normalizer.apply(f)).collect())
    }

    pub fn cost_value(&self, traj: &Trajectory, env: &Environment, history: &History) -> Result<f64> {
        self.model.value(&self.normalized_features(traj, env, history)?)
    }

    pub fn grad_wrt_params(&self, traj: &Trajectory, env: &Environment, history: &History) -> Result<Vec<f64>> {
        let feats = self.normalized_features(traj, env, history)?;
        Ok(self.model.backward(&feats, true)?.d_params.expect("requested"))
    }

    /// Full gradient through the unrolled dynamics for a single agent.
    pub fn grad_wrt_controls(
        &self,
        seq: &ControlSequence,
        x0: &State,
        env: &Environment,
        history: &History,
        dynamics: &DynamicsVariant,
    ) -> Result<GradReport> {
        let agent = AgentProblem { x0: *x0, anchor: history.last_control(), env: env.clone(), history: history.clone() };
        let param = match seq.mode {
            ControlMode::Absolute => Param::Absolute,
            ControlMode::Delta => Param::Delta,
        };
        let scene = Scene::new(vec![agent], seq.len(), self, *dynamics, param)?;
        let w: Vec<f64> = seq.controls.iter().flat_map(|c| c.to_array()).collect();
        let eval = scene.evaluate(&w, true, true)?;
        let g = eval.grad.expect("requested");
        Ok(GradReport {
            value: eval.energy,
            d_controls: g.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            d_params: eval.d_params.expect("requested"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> crate::rng::Rng {
        crate::rng::Rng::seed_from_u64(seed)
    }

    fn random_feats(t: usize, seed: u64) -> Vec<FeatureVector> {
        let mut r = rng(seed);
        (0..t)
            .map(|_| {
                let mut f = [0.0; N_FEATURES];
                for v in f.iter_mut() {
                    *v = r.random_range(-2.0..2.0);
                }
                f
            })
            .collect()
    }

    fn fd_feats(m: &CostModel, feats: &[FeatureVector], eps: f64) -> Vec<FeatureVector> {
        let mut out = vec![[0.0; N_FEATURES]; feats.len()];
        for t in 0..feats.len() {
            for k in 0..N_FEATURES {
                let mut a = feats.to_vec();
                let mut b = feats.to_vec();
                a[t][k] += eps;
                b[t][k] -= eps;
                out[t][k] = (m.value(&a).unwrap() - m.value(&b).unwrap()) / (2.0 * eps);
            }
        }
        out
    }

    fn fd_params(m: &CostModel, feats: &[FeatureVector], eps: f64) -> Vec<f64> {
        (0..m.n_params())
            .map(|i| {
                let mut a = m.clone();
                let mut b = m.clone();
                let mut pa = m.params().to_vec();
                let mut pb = m.params().to_vec();
                pa[i] += eps;
                pb[i] -= eps;
                a.set_params(pa).unwrap();
                b.set_params(pb).unwrap();
                (a.value(feats).unwrap() - b.value(feats).unwrap()) / (2.0 * eps)
            })
            .collect()
    }

    fn max_rel(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn one_hot_linear_picks_feature() {
        let feats = random_feats(5, 3);
        for k in 0..N_FEATURES {
            let mut theta = [0.0; N_FEATURES];
            theta[k] = 1.0;
            let c = CostModel::linear(theta).value(&feats).unwrap();
            let expect: f64 = feats.iter().map(|f| f[k]).sum();
            assert_eq!(c, expect);
        }
    }

    #[test]
    fn zero_models_give_zero() {
        let feats = random_feats(4, 1);
        assert_eq!(CostModel::linear([0.0; N_FEATURES]).value(&feats).unwrap(), 0.0);
        let mlp = CostModel::zeros(CostSpec::default_for(CostKind::Mlp, 4)).unwrap();
        assert_eq!(mlp.value(&feats).unwrap(), 0.0);
    }

    /// Layer-by-layer re-evaluation written independently of `nn::Mlp`.
    fn mlp_oracle(p: &[f64], hidden: &[usize], slope: f64, f: &FeatureVector) -> f64 {
        let mut a: Vec<f64> = f.to_vec();
        let mut off = 0;
        let mut sizes = vec![N_FEATURES];
        sizes.extend(hidden);
        sizes.push(1);
        for l in 0..sizes.len() - 1 {
            let (ni, no) = (sizes[l], sizes[l + 1]);
            let mut z = vec![0.0; no];
            for o in 0..no {
                let mut acc = p[off + ni * no + o];
                for i in 0..ni {
                    acc += p[off + o * ni + i] * a[i];
                }
                z[o] = if l + 2 < sizes.len() && acc < 0.0 { slope * acc } else { acc };
            }
            off += ni * no + no;
            a = z;
        }
        a[0]
    }

    #[test]
    fn mlp_matches_layerwise_oracle() {
        let spec = CostSpec::Mlp { hidden: vec![32, 32, 32], slope: 0.01 };
        let m = CostModel::init(spec, &mut rng(7)).unwrap();
        let feats = random_feats(6, 8);
        let oracle: f64 = feats.iter().map(|f| mlp_oracle(m.params(), &[32, 32, 32], 0.01, f)).sum();
        assert!((m.value(&feats).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let specs = [
            CostSpec::Linear,
            CostSpec::Mlp { hidden: vec![16, 16], slope: 0.01 },
            CostSpec::Conv { channels: vec![4, 6, 8, 5], strides: vec![2, 2, 2, 1], kernel: 4, horizon: 12, slope: 0.01 },
        ];
        for (i, spec) in specs.into_iter().enumerate() {
            let m = CostModel::init(spec, &mut rng(10 + i as u64)).unwrap();
            let feats = random_feats(12, 20 + i as u64);
            let b = m.backward(&feats, true).unwrap();
            assert!((b.value - m.value(&feats).unwrap()).abs() < 1e-12);
            let fd = fd_feats(&m, &feats, 1e-6);
            let got: Vec<f64> = b.d_feats.iter().flatten().copied().collect();
            let want: Vec<f64> = fd.iter().flatten().copied().collect();
            assert!(max_rel(&got, &want) < 1e-6, "{i}: features");
            let want_p = fd_params(&m, &feats, 1e-6);
            assert!(max_rel(b.d_params.as_ref().unwrap(), &want_p) < 1e-6, "{i}: params");
        }
    }

    #[test]
    fn default_conv_reduces_forty_frames_to_one() {
        let m = CostModel::init(CostSpec::default_for(CostKind::Cnn, 40), &mut rng(1)).unwrap();
        assert!(m.value(&random_feats(40, 2)).unwrap().is_finite());
        assert!(matches!(m.value(&random_feats(39, 2)), Err(Error::Shape(_))));
        assert!(!m.is_markovian());
    }

    #[test]
    fn frame_decomposition_sums_to_value() {
        let m = CostModel::init(CostSpec::default_for(CostKind::Mlp, 0), &mut rng(4)).unwrap();
        let feats = random_feats(5, 5);
        let s: f64 = feats.iter().map(|f| m.frame_value_grad(f).unwrap().0).sum();
        assert!((s - m.value(&feats).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn wrong_param_count_is_shape_error() {
        assert!(matches!(CostModel::new(CostSpec::Linear, vec![0.0; 3]), Err(Error::Shape(_))));
    }

    #[test]
    fn checkpoint_json_round_trip() {
        let m = CostModel::init(CostSpec::default_for(CostKind::Mlp, 0), &mut rng(9)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: CostModel = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }

    proptest::proptest! {
        #[test]
        fn linear_cost_is_linear_in_theta(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            let feats = random_feats(4, seed);
            let mut r = rng(seed + 1);
            let t1: Vec<f64> = (0..N_FEATURES).map(|_| r.random_range(-1.0..1.0)).collect();
            let t2: Vec<f64> = (0..N_FEATURES).map(|_| r.random_range(-1.0..1.0)).collect();
            let mix: Vec<f64> = t1.iter().zip(&t2).map(|(x, y)| a * x + b * y).collect();
            let c = |t: Vec<f64>| CostModel::new(CostSpec::Linear, t).unwrap().value(&feats).unwrap();
            let lhs = c(mix);
            let rhs = a * c(t1) + b * c(t2);
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
