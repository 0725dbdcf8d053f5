//! Clip-level fusion and regression, and the weighted aggregation of clip
//! scores into a video score.
//!
//! Per clip:
//!
//! ```text
//! si' = A si            ti' = B ti
//! p1  = C(query = ti', key/value = si')
//! p2  = C(query = si', key/value = ti')
//! ff  = F [p1 ; p2]
//! q   = fc2 act(fc1 ff)
//! ```
//!
//! and the video score is `Q = sum(w_i q_i) / sum(w_i)` over the eight clips.
//! Everything is `f64` with a hand-written backward pass.

mod checkpoint;
mod layers;

pub(crate) use checkpoint::write_json_atomic;
pub use checkpoint::{export_hvs_weights, load_params, save_params, ParamsFile, PARAMS_FORMAT_VERSION};
pub use layers::{AttentionTape, CrossAttention, Linear};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureBundle;
use crate::sampling::CLIP_COUNT;

/// Aggregation fails when `|sum(w)|` is at or below this.
pub const HVS_WEIGHT_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                // keeps NaN visible, unlike f64::max
                if x < 0.0 {
                    0.0
                } else {
                    x
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `x`.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - x.tanh().powi(2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Width `d` of the projected tokens and the attention.
    pub hidden_dim: usize,
    pub heads: usize,
    /// Width of the regression hidden layer.
    pub head_hidden: usize,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 512,
            heads: 8,
            head_hidden: 64,
            activation: Activation::Relu,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.heads == 0 || self.head_hidden == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if !self.hidden_dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "hidden_dim {} is not divisible by {} heads",
                self.hidden_dim, self.heads
            )));
        }
        Ok(())
    }
}

/// All trainable parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityModelParams {
    pub config: ModelConfig,
    pub si_dim: usize,
    pub ti_dim: usize,
    pub proj_si: Linear,
    pub proj_ti: Linear,
    pub cross_attn: CrossAttention,
    pub proj_fuse: Linear,
    pub fc1: Linear,
    pub fc2: Linear,
    pub hvs_weights: Vec<f64>,
}

impl QualityModelParams {
    /// Glorot-initialised layers from a seeded RNG, HVS weights all 1.
    pub fn init(config: ModelConfig, si_dim: usize, ti_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if si_dim == 0 || ti_dim == 0 {
            return Err(Error::Shape("si and ti must be non-empty".into()));
        }
        let d = config.hidden_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            si_dim,
            ti_dim,
            proj_si: Linear::glorot(si_dim, d, &mut rng),
            proj_ti: Linear::glorot(ti_dim, d, &mut rng),
            cross_attn: CrossAttention::glorot(d, config.heads, &mut rng),
            proj_fuse: Linear::glorot(2 * d, d, &mut rng),
            fc1: Linear::glorot(d, config.head_hidden, &mut rng),
            fc2: Linear::glorot(config.head_hidden, 1, &mut rng),
            hvs_weights: vec![1.0; CLIP_COUNT],
            config,
        })
    }

    /// Same shapes, every value zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            si_dim: self.si_dim,
            ti_dim: self.ti_dim,
            proj_si: self.proj_si.zeros_like(),
            proj_ti: self.proj_ti.zeros_like(),
            cross_attn: self.cross_attn.zeros_like(),
            proj_fuse: self.proj_fuse.zeros_like(),
            fc1: self.fc1.zeros_like(),
            fc2: self.fc2.zeros_like(),
            hvs_weights: vec![0.0; self.hvs_weights.len()],
        }
    }

    /// Names of the tensors yielded by [`tensors`](Self::tensors), same order.
    pub fn tensor_names() -> Vec<&'static str> {
        vec![
            "proj_si.weight",
            "proj_si.bias",
            "proj_ti.weight",
            "proj_ti.bias",
            "cross_attn.query.weight",
            "cross_attn.query.bias",
            "cross_attn.key.weight",
            "cross_attn.key.bias",
            "cross_attn.value.weight",
            "cross_attn.value.bias",
            "cross_attn.output.weight",
            "cross_attn.output.bias",
            "proj_fuse.weight",
            "proj_fuse.bias",
            "fc1.weight",
            "fc1.bias",
            "fc2.weight",
            "fc2.bias",
            "hvs_weights",
        ]
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let a = &self.cross_attn;
        vec![
            &self.proj_si.weight,
            &self.proj_si.bias,
            &self.proj_ti.weight,
            &self.proj_ti.bias,
            &a.query.weight,
            &a.query.bias,
            &a.key.weight,
            &a.key.bias,
            &a.value.weight,
            &a.value.bias,
            &a.output.weight,
            &a.output.bias,
            &self.proj_fuse.weight,
            &self.proj_fuse.bias,
            &self.fc1.weight,
            &self.fc1.bias,
            &self.fc2.weight,
            &self.fc2.bias,
            &self.hvs_weights,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let a = &mut self.cross_attn;
        vec![
            &mut self.proj_si.weight,
            &mut self.proj_si.bias,
            &mut self.proj_ti.weight,
            &mut self.proj_ti.bias,
            &mut a.query.weight,
            &mut a.query.bias,
            &mut a.key.weight,
            &mut a.key.bias,
            &mut a.value.weight,
            &mut a.value.bias,
            &mut a.output.weight,
            &mut a.output.bias,
            &mut self.proj_fuse.weight,
            &mut self.proj_fuse.bias,
            &mut self.fc1.weight,
            &mut self.fc1.bias,
            &mut self.fc2.weight,
            &mut self.fc2.bias,
            &mut self.hvs_weights,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Adds `scale * other` elementwise.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += scale * s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_inputs(&self, si: &[f64], ti: &[f64]) -> Result<()> {
        if si.len() != self.si_dim || ti.len() != self.ti_dim {
            return Err(Error::Shape(format!(
                "model expects |si| = {}, |ti| = {}; got {}, {}",
                self.si_dim,
                self.ti_dim,
                si.len(),
                ti.len()
            )));
        }
        Ok(())
    }
}

/// Projects `si` and `ti` to the shared width `d`.
pub fn project(si: &[f64], ti: &[f64], params: &QualityModelParams) -> Result<(Vec<f64>, Vec<f64>)> {
    params.check_inputs(si, ti)?;
    Ok((params.proj_si.forward(si), params.proj_ti.forward(ti)))
}

/// Two cross-attention passes with shared weights, concatenated and projected.
pub fn cross_fuse(si_p: &[f64], ti_p: &[f64], params: &QualityModelParams) -> Result<Vec<f64>> {
    let d = params.config.hidden_dim;
    if si_p.len() != d || ti_p.len() != d {
        return Err(Error::Shape(format!("projected tokens must have width {d}")));
    }
    let (p1, _) = params.cross_attn.forward(ti_p, &[si_p]);
    let (p2, _) = params.cross_attn.forward(si_p, &[ti_p]);
    let z = [p1, p2].concat();
    Ok(params.proj_fuse.forward(&z))
}

/// Clip score from the fused vector.
pub fn regress_clip(ff: &[f64], params: &QualityModelParams) -> Result<f64> {
    if ff.len() != params.config.hidden_dim {
        return Err(Error::Shape(format!("fused vector must have width {}", params.config.hidden_dim)));
    }
    let act = params.config.activation;
    let h: Vec<f64> = params.fc1.forward(ff).into_iter().map(|x| act.apply(x)).collect();
    Ok(params.fc2.forward(&h)[0])
}

/// Weighted mean of the clip scores.
pub fn aggregate_hvs(scores: &[f64], weights: &[f64]) -> Result<f64> {
    if scores.len() != weights.len() || scores.is_empty() {
        return Err(Error::Shape(format!(
            "{} clip scores but {} weights",
            scores.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if !(total.abs() > HVS_WEIGHT_EPS) {
        return Err(Error::Aggregation(total));
    }
    Ok(scores.iter().zip(weights).map(|(q, w)| q * w).sum::<f64>() / total)
}

/// Score of one clip from raw `si` / `ti`.
pub fn clip_score(si: &[f64], ti: &[f64], params: &QualityModelParams) -> Result<f64> {
    let (sp, tp) = project(si, ti, params)?;
    let ff = cross_fuse(&sp, &tp, params)?;
    regress_clip(&ff, params)
}

/// `(Q, [q_1 .. q_8])` for a video.
pub fn forward(bundle: &FeatureBundle, params: &QualityModelParams) -> Result<(f64, [f64; CLIP_COUNT])> {
    let clips: Vec<(&[f64], &[f64])> = bundle
        .clips()
        .iter()
        .map(|c| (c.spatial.si(), c.temporal.ti()))
        .collect();
    let (q, scores) = forward_clips(&clips, params)?;
    let mut out = [0.0; CLIP_COUNT];
    out.copy_from_slice(&scores);
    Ok((q, out))
}

/// Forward pass over explicit `(si, ti)` pairs, one per clip.
pub fn forward_clips(clips: &[(&[f64], &[f64])], params: &QualityModelParams) -> Result<(f64, Vec<f64>)> {
    if clips.len() != params.hvs_weights.len() {
        return Err(Error::Shape(format!(
            "{} clips but {} aggregation weights",
            clips.len(),
            params.hvs_weights.len()
        )));
    }
    let scores = clips
        .iter()
        .map(|(si, ti)| clip_score(si, ti, params))
        .collect::<Result<Vec<_>>>()?;
    Ok((aggregate_hvs(&scores, &params.hvs_weights)?, scores))
}

struct ClipTape {
    si: Vec<f64>,
    ti: Vec<f64>,
    t1: AttentionTape,
    t2: AttentionTape,
    z: Vec<f64>,
    ff: Vec<f64>,
    h_pre: Vec<f64>,
    h: Vec<f64>,
}

/// Saved activations of one video's forward pass.
pub struct VideoTape {
    clips: Vec<ClipTape>,
    pub scores: Vec<f64>,
    pub quality: f64,
}

fn clip_forward_taped(si: &[f64], ti: &[f64], params: &QualityModelParams) -> Result<(f64, ClipTape)> {
    params.check_inputs(si, ti)?;
    let sp = params.proj_si.forward(si);
    let tp = params.proj_ti.forward(ti);
    let (p1, t1) = params.cross_attn.forward(&tp, &[&sp]);
    let (p2, t2) = params.cross_attn.forward(&sp, &[&tp]);
    let z = [p1, p2].concat();
    let ff = params.proj_fuse.forward(&z);
    let h_pre = params.fc1.forward(&ff);
    let act = params.config.activation;
    let h: Vec<f64> = h_pre.iter().map(|&x| act.apply(x)).collect();
    let q = params.fc2.forward(&h)[0];
    Ok((
        q,
        ClipTape {
            si: si.to_vec(),
            ti: ti.to_vec(),
            t1,
            t2,
            z,
            ff,
            h_pre,
            h,
        },
    ))
}

fn clip_backward(tape: &ClipTape, dq: f64, params: &QualityModelParams, grad: &mut QualityModelParams) {
    let act = params.config.activation;
    let d = params.config.hidden_dim;
    let dh = params.fc2.backward(&tape.h, &[dq], &mut grad.fc2);
    let dh_pre: Vec<f64> = dh.iter().zip(&tape.h_pre).map(|(g, &x)| g * act.derivative(x)).collect();
    let dff = params.fc1.backward(&tape.ff, &dh_pre, &mut grad.fc1);
    let dz = params.proj_fuse.backward(&tape.z, &dff, &mut grad.proj_fuse);
    let (dtp_q, dsp_kv) = params.cross_attn.backward(&tape.t1, &dz[..d], &mut grad.cross_attn);
    let (dsp_q, dtp_kv) = params.cross_attn.backward(&tape.t2, &dz[d..], &mut grad.cross_attn);
    let dsp: Vec<f64> = dsp_q.iter().zip(&dsp_kv[0]).map(|(a, b)| a + b).collect();
    let dtp: Vec<f64> = dtp_q.iter().zip(&dtp_kv[0]).map(|(a, b)| a + b).collect();
    params.proj_si.backward(&tape.si, &dsp, &mut grad.proj_si);
    params.proj_ti.backward(&tape.ti, &dtp, &mut grad.proj_ti);
}

/// Forward pass that keeps what [`backward`] needs.
pub fn forward_taped(clips: &[(&[f64], &[f64])], params: &QualityModelParams) -> Result<VideoTape> {
    if clips.len() != params.hvs_weights.len() {
        return Err(Error::Shape(format!(
            "{} clips but {} aggregation weights",
            clips.len(),
            params.hvs_weights.len()
        )));
    }
    let mut tapes = Vec::with_capacity(clips.len());
    let mut scores = Vec::with_capacity(clips.len());
    for (si, ti) in clips {
        let (q, t) = clip_forward_taped(si, ti, params)?;
        scores.push(q);
        tapes.push(t);
    }
    let quality = aggregate_hvs(&scores, &params.hvs_weights)?;
    Ok(VideoTape {
        clips: tapes,
        scores,
        quality,
    })
}

/// Accumulates `d_quality * dQ/dθ` into `grad`.
pub fn backward(tape: &VideoTape, d_quality: f64, params: &QualityModelParams, grad: &mut QualityModelParams) {
    let total: f64 = params.hvs_weights.iter().sum();
    for (i, (clip, &q)) in tape.clips.iter().zip(&tape.scores).enumerate() {
        grad.hvs_weights[i] += d_quality * (q - tape.quality) / total;
        let dq = d_quality * params.hvs_weights[i] / total;
        clip_backward(clip, dq, params, grad);
    }
}

/// `(si, ti)` slices of every clip in a bundle.
pub fn bundle_inputs(bundle: &FeatureBundle) -> Vec<(&[f64], &[f64])> {
    bundle
        .clips()
        .iter()
        .map(|c| (c.spatial.si(), c.temporal.ti()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(activation: Activation) -> QualityModelParams {
        let cfg = ModelConfig {
            hidden_dim: 8,
            heads: 2,
            head_hidden: 5,
            activation,
        };
        QualityModelParams::init(cfg, 6, 4, 17).unwrap()
    }

    fn inputs(seed: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..8)
            .map(|c| {
                let si = (0..6).map(|i| ((i + c * 7) as f64 * seed).sin()).collect();
                let ti = (0..4).map(|i| ((i * 3 + c) as f64 * seed).cos()).collect();
                (si, ti)
            })
            .collect()
    }

    fn refs(v: &[(Vec<f64>, Vec<f64>)]) -> Vec<(&[f64], &[f64])> {
        v.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect()
    }

    #[test]
    fn default_config_widths() {
        let c = ModelConfig::default();
        assert_eq!((c.hidden_dim, c.heads, c.head_hidden), (512, 8, 64));
        c.validate().unwrap();
        assert!(ModelConfig { heads: 7, ..c }.validate().is_err());
    }

    #[test]
    fn init_is_seeded() {
        let a = QualityModelParams::init(ModelConfig::default(), 10, 12, 1).unwrap();
        let b = QualityModelParams::init(ModelConfig::default(), 10, 12, 1).unwrap();
        let c = QualityModelParams::init(ModelConfig::default(), 10, 12, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.hvs_weights, vec![1.0; 8]);
        assert_eq!(a.tensors().len(), QualityModelParams::tensor_names().len());
    }

    #[test]
    fn aggregation() {
        assert_eq!(aggregate_hvs(&[1.0, 3.0], &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(aggregate_hvs(&[1.0, 3.0], &[3.0, 1.0]).unwrap(), 1.5);
        assert!(matches!(aggregate_hvs(&[1.0, 3.0], &[1.0, -1.0]), Err(Error::Aggregation(_))));
        assert!(aggregate_hvs(&[1.0, 3.0], &[5e-7, 0.0]).is_err());
        assert!(aggregate_hvs(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn staged_functions_compose_to_forward() {
        let p = small(Activation::Relu);
        let data = inputs(0.37);
        let (q, scores) = forward_clips(&refs(&data), &p).unwrap();
        let mut manual = Vec::new();
        for (si, ti) in &data {
            let (a, b) = project(si, ti, &p).unwrap();
            let ff = cross_fuse(&a, &b, &p).unwrap();
            manual.push(regress_clip(&ff, &p).unwrap());
        }
        assert_eq!(manual, scores);
        assert!((q - manual.iter().sum::<f64>() / 8.0).abs() < 1e-12);
        let tape = forward_taped(&refs(&data), &p).unwrap();
        assert_eq!(tape.scores, scores);
        assert_eq!(tape.quality, q);
    }

    #[test]
    fn wrong_input_width_is_shape_error() {
        let p = small(Activation::Relu);
        assert!(matches!(project(&[0.0; 5], &[0.0; 4], &p), Err(Error::Shape(_))));
    }

    fn check_gradient(activation: Activation) {
        let mut p = small(activation);
        p.hvs_weights = vec![1.0, 0.5, 2.0, 1.5, 0.8, 1.2, 0.9, 1.1];
        let data = inputs(0.61);
        let r = refs(&data);
        let tape = forward_taped(&r, &p).unwrap();
        let mut g = p.zeros_like();
        backward(&tape, 1.0, &p, &mut g);
        let h = 1e-6;
        let names = QualityModelParams::tensor_names();
        for t in 0..names.len() {
            let len = p.tensors()[t].len();
            for idx in (0..len).step_by(len.div_ceil(4).max(1)) {
                let mut plus = p.clone();
                plus.tensors_mut()[t][idx] += h;
                let mut minus = p.clone();
                minus.tensors_mut()[t][idx] -= h;
                let fd = (forward_clips(&r, &plus).unwrap().0 - forward_clips(&r, &minus).unwrap().0) / (2.0 * h);
                let an = g.tensors()[t][idx];
                assert!((an - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{}[{idx}]: {an} vs {fd}", names[t]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_relu() {
        check_gradient(Activation::Relu);
    }

    #[test]
    fn gradients_match_finite_differences_tanh() {
        check_gradient(Activation::Tanh);
    }

    #[test]
    fn aggregation_examples() {
        let scores: Vec<f64> = (1..=8).map(f64::from).collect();
        assert_eq!(aggregate_hvs(&scores, &[1.0; 8]).unwrap(), 4.5);
        let mut one_hot = [0.0; 8];
        one_hot[2] = 1.0;
        assert_eq!(aggregate_hvs(&scores, &one_hot).unwrap(), 3.0);
        let w = [2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(aggregate_hvs(&[10.0; 8], &w).unwrap(), 10.0);
    }

    #[test]
    fn zero_inputs_project_to_zero() {
        let p = small(Activation::Relu);
        let (a, b) = project(&[0.0; 6], &[0.0; 4], &p).unwrap();
        assert_eq!(a, vec![0.0; 8]);
        assert_eq!(b, vec![0.0; 8]);
    }

    #[test]
    fn identity_projection_passes_through() {
        let cfg = ModelConfig {
            hidden_dim: 4,
            heads: 2,
            head_hidden: 3,
            ..Default::default()
        };
        let mut p = QualityModelParams::init(cfg, 4, 4, 0).unwrap();
        p.proj_si = Linear::identity(4);
        p.proj_ti = Linear::identity(4);
        let si = [1.0, -2.0, 3.5, 0.25];
        let ti = [0.0, 7.0, -1.0, 2.0];
        assert_eq!(project(&si, &ti, &p).unwrap(), (si.to_vec(), ti.to_vec()));
    }

    #[test]
    fn equal_tokens_give_equal_halves() {
        let p = small(Activation::Relu);
        let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let (half, _) = p.cross_attn.forward(&x, &[&x]);
        let expected = p.proj_fuse.forward(&[half.clone(), half].concat());
        assert_eq!(cross_fuse(&x, &x, &p).unwrap(), expected);
    }

    /// `proj_fuse` that copies one half of its `2d` input.
    fn half_selector(d: usize, second: bool) -> Linear {
        let mut l = Linear::zeros(2 * d, d);
        let off = if second { d } else { 0 };
        for i in 0..d {
            l.weight[i * 2 * d + off + i] = 1.0;
        }
        l
    }

    #[test]
    fn swapping_inputs_swaps_the_halves() {
        let mut first = small(Activation::Relu);
        first.proj_fuse = half_selector(8, false);
        let mut second = first.clone();
        second.proj_fuse = half_selector(8, true);
        let a: Vec<f64> = (0..8).map(|i| (i as f64 * 0.3).cos()).collect();
        let b: Vec<f64> = (0..8).map(|i| (i as f64 * 1.1).sin() - 0.2).collect();
        assert_eq!(cross_fuse(&a, &b, &first).unwrap(), cross_fuse(&b, &a, &second).unwrap());
        assert_eq!(cross_fuse(&a, &b, &second).unwrap(), cross_fuse(&b, &a, &first).unwrap());
        assert_ne!(cross_fuse(&a, &b, &first).unwrap(), cross_fuse(&a, &b, &second).unwrap());
    }

    #[test]
    fn zero_head_regresses_to_zero() {
        let mut p = small(Activation::Tanh);
        p.fc1 = Linear::zeros(8, 5);
        p.fc2 = Linear::zeros(5, 1);
        assert_eq!(regress_clip(&[3.0; 8], &p).unwrap(), 0.0);
        let p = small(Activation::Relu);
        let ff = [0.5, -1.0, 2.0, 0.0, 1.5, -0.5, 0.25, 1.0];
        assert_eq!(regress_clip(&ff, &p).unwrap(), regress_clip(&ff, &p).unwrap());
    }

    #[test]
    fn identical_clips_give_identical_scores() {
        let mut p = small(Activation::Relu);
        p.hvs_weights = vec![0.3, 2.0, -0.5, 1.0, 0.7, 4.0, 0.1, 1.2];
        let one = inputs(0.9).remove(0);
        let data = vec![one; 8];
        let (q, scores) = forward_clips(&refs(&data), &p).unwrap();
        assert!(scores.iter().all(|&s| s == scores[0]));
        assert!((q - scores[0]).abs() < 1e-12);
    }

    #[test]
    fn forward_is_permutation_sensitive() {
        let mut p = small(Activation::Relu);
        let mut one_hot = vec![0.0; 8];
        one_hot[0] = 1.0;
        p.hvs_weights = one_hot;
        let data = inputs(0.45);
        let (q, scores) = forward_clips(&refs(&data), &p).unwrap();
        assert_ne!(scores[0], scores[1]);
        let mut swapped = data.clone();
        swapped.swap(0, 1);
        let (q_swapped, _) = forward_clips(&refs(&swapped), &p).unwrap();
        assert_eq!(q, scores[0]);
        assert_eq!(q_swapped, scores[1]);
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn aggregation_is_scale_invariant(
            scores in prop::collection::vec(-100.0f64..100.0, 8),
            weights in prop::collection::vec(0.01f64..5.0, 8),
            c in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
        ) {
            let scaled: Vec<f64> = weights.iter().map(|w| w * c).collect();
            let a = aggregate_hvs(&scores, &weights).unwrap();
            let b = aggregate_hvs(&scores, &scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }

        #[test]
        fn positive_weights_stay_within_score_range(
            scores in prop::collection::vec(-100.0f64..100.0, 8),
            weights in prop::collection::vec(0.001f64..5.0, 8),
        ) {
            let q = aggregate_hvs(&scores, &weights).unwrap();
            let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(q >= lo - 1e-9 && q <= hi + 1e-9);
        }

        #[test]
        fn stage_widths_follow_config(
            heads in 1usize..4,
            per_head in 1usize..5,
            head_hidden in 1usize..6,
            si_dim in 1usize..12,
            ti_dim in 1usize..12,
            seed in any::<u64>(),
        ) {
            let cfg = ModelConfig { hidden_dim: heads * per_head, heads, head_hidden, ..Default::default() };
            let p = QualityModelParams::init(cfg, si_dim, ti_dim, seed).unwrap();
            let si: Vec<f64> = (0..si_dim).map(|i| (i as f64 + seed as f64 % 7.0).sin()).collect();
            let ti: Vec<f64> = (0..ti_dim).map(|i| (i as f64 * 0.5).cos()).collect();
            let (a, b) = project(&si, &ti, &p).unwrap();
            prop_assert_eq!(a.len(), heads * per_head);
            prop_assert_eq!(b.len(), heads * per_head);
            prop_assert_eq!(cross_fuse(&a, &b, &p).unwrap().len(), heads * per_head);
        }

        #[test]
        fn finite_inputs_give_finite_scores(
            ff in prop::collection::vec(-1e3f64..1e3, 8),
            seed in any::<u64>(),
            tanh in any::<bool>(),
        ) {
            let act = if tanh { Activation::Tanh } else { Activation::Relu };
            let cfg = ModelConfig { hidden_dim: 8, heads: 2, head_hidden: 5, activation: act };
            let p = QualityModelParams::init(cfg, 6, 4, seed).unwrap();
            prop_assert!(regress_clip(&ff, &p).unwrap().is_finite());
        }
    }
}
