//! Deterministic stand-ins for the pretrained backbones.

use std::collections::HashMap;

use super::{FeatureMap, ImageTextMatcher, MotionEncoder, PromptCategory, PromptSet, SemanticEncoder};
use crate::error::{Error, Result};
use crate::frame::{luma_of, RgbFrame};

/// Returns constant-valued stage maps.
#[derive(Clone, Debug)]
pub struct ConstantSemanticEncoder {
    pub dims: (usize, usize),
    pub grid: (usize, usize),
    pub value: f64,
}

impl ConstantSemanticEncoder {
    pub fn ones(c1: usize, c2: usize) -> Self {
        Self {
            dims: (c1, c2),
            grid: (7, 7),
            value: 1.0,
        }
    }
}

impl SemanticEncoder for ConstantSemanticEncoder {
    fn name(&self) -> &str {
        "mock-constant"
    }

    fn stage_dims(&self) -> (usize, usize) {
        self.dims
    }

    fn encode_stages(&self, _frame: &RgbFrame) -> Result<(FeatureMap, FeatureMap)> {
        let (h, w) = self.grid;
        Ok((
            FeatureMap::constant(h, w, self.dims.0, self.value),
            FeatureMap::constant(h.div_ceil(2), w.div_ceil(2), self.dims.1, self.value),
        ))
    }
}

/// Stage maps built from per-cell color statistics.
///
/// Stage one is a 4x4 grid, stage two a 2x2 grid. Channel `k` of a cell is
/// the mean projection of normalized RGB onto a fixed direction; every third
/// channel is the cell's luma standard deviation instead.
#[derive(Clone, Debug)]
pub struct PixelStatsSemanticEncoder {
    pub dims: (usize, usize),
}

impl PixelStatsSemanticEncoder {
    pub fn new(c1: usize, c2: usize) -> Self {
        Self { dims: (c1, c2) }
    }

    fn stage(frame: &RgbFrame, grid: usize, channels: usize, phase: f64) -> FeatureMap {
        let cells_x = grid.min(frame.width());
        let cells_y = grid.min(frame.height());
        let mut data = Vec::with_capacity(cells_x * cells_y * channels);
        let directions: Vec<[f64; 3]> = (0..channels)
            .map(|k| {
                let a = phase + 1.3 * (k as f64 + 1.0);
                [a.cos(), (a + 2.1).cos(), (a + 4.2).cos()]
            })
            .collect();
        for cy in 0..cells_y {
            let y0 = cy * frame.height() / cells_y;
            let y1 = (cy + 1) * frame.height() / cells_y;
            for cx in 0..cells_x {
                let x0 = cx * frame.width() / cells_x;
                let x1 = (cx + 1) * frame.width() / cells_x;
                let mut sums = vec![0.0; channels];
                let (mut l_sum, mut l_sq) = (0.0, 0.0);
                for y in y0..y1 {
                    for x in x0..x1 {
                        let p = frame.pixel(x, y);
                        let c = p.map(|v| v as f64 / 255.0);
                        for (s, d) in sums.iter_mut().zip(&directions) {
                            *s += d[0] * c[0] + d[1] * c[1] + d[2] * c[2];
                        }
                        let l = luma_of(p) / 255.0;
                        l_sum += l;
                        l_sq += l * l;
                    }
                }
                let count = ((y1 - y0) * (x1 - x0)) as f64;
                let l_mean = l_sum / count;
                let l_std = (l_sq / count - l_mean * l_mean).max(0.0).sqrt();
                for (k, s) in sums.iter().enumerate() {
                    data.push(if k % 3 == 2 { l_std } else { s / count });
                }
            }
        }
        FeatureMap::new(cells_y, cells_x, channels, data).expect("consistent map shape")
    }
}

impl SemanticEncoder for PixelStatsSemanticEncoder {
    fn name(&self) -> &str {
        "mock-pixel-stats"
    }

    fn stage_dims(&self) -> (usize, usize) {
        self.dims
    }

    fn encode_stages(&self, frame: &RgbFrame) -> Result<(FeatureMap, FeatureMap)> {
        Ok((
            Self::stage(frame, 4, self.dims.0, 0.0),
            Self::stage(frame, 2, self.dims.1, 0.7),
        ))
    }
}

/// Mean absolute inter-frame pixel difference (0-1 scale), replicated
/// `dim` times. A single-frame clip yields zeros.
#[derive(Clone, Debug)]
pub struct FrameDifferenceMotionEncoder {
    pub dim: usize,
}

impl FrameDifferenceMotionEncoder {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl MotionEncoder for FrameDifferenceMotionEncoder {
    fn name(&self) -> &str {
        "mock-frame-diff"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, clip: &[RgbFrame]) -> Result<Vec<f64>> {
        if clip.is_empty() {
            return Err(Error::Encoder("motion encoder needs at least one frame".into()));
        }
        let pairs = clip.len() - 1;
        let value = if pairs == 0 {
            0.0
        } else {
            clip.windows(2)
                .map(|w| {
                    let total: u64 = w[0]
                        .as_raw()
                        .iter()
                        .zip(w[1].as_raw())
                        .map(|(a, b)| a.abs_diff(*b) as u64)
                        .sum();
                    total as f64 / (w[0].as_raw().len() as f64 * 255.0)
                })
                .sum::<f64>()
                / pairs as f64
        };
        Ok(vec![value; self.dim])
    }
}

/// Equal logits for every prompt.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformMatcher;

impl ImageTextMatcher for UniformMatcher {
    fn name(&self) -> &str {
        "mock-uniform"
    }

    fn logits(&self, _tile: &RgbFrame, prompts: &[String]) -> Result<Vec<f64>> {
        Ok(vec![0.0; prompts.len()])
    }
}

/// Returns the same logit vector for any tile. Test helper.
#[derive(Clone, Debug)]
pub struct FixedLogitsMatcher {
    logits: Vec<f64>,
}

impl FixedLogitsMatcher {
    pub fn new(logits: Vec<f64>) -> Self {
        Self { logits }
    }
}

impl ImageTextMatcher for FixedLogitsMatcher {
    fn name(&self) -> &str {
        "mock-fixed"
    }

    fn logits(&self, _tile: &RgbFrame, _prompts: &[String]) -> Result<Vec<f64>> {
        Ok(self.logits.clone())
    }
}

/// Scores prompts by how close a tile statistic is to the prompt's grade.
///
/// Each rendered prompt of the configured sets maps to a category and a
/// grade `i / 4` from its hint position. The tile statistic is mean luma
/// for brightness prompts and mean horizontal luma gradient for noise
/// prompts, both scaled to [0, 1]. The logit is
/// `-(statistic - grade)^2 / temperature`. Lookup is by prompt text, so
/// permuting the hints permutes the logits identically. Unknown prompts get
/// a grade hashed from their text and are read as brightness prompts.
#[derive(Clone, Debug)]
pub struct GradedStatisticMatcher {
    grades: HashMap<String, (PromptCategory, f64)>,
    pub temperature: f64,
}

impl GradedStatisticMatcher {
    pub const DEFAULT_TEMPERATURE: f64 = 0.02;
    /// Gradient magnitude (0-255 luma units) that saturates the noise statistic.
    pub const NOISE_SATURATION: f64 = 32.0;

    pub fn new(brightness: &PromptSet, noise: &PromptSet) -> Result<Self> {
        let mut grades = HashMap::new();
        for set in [brightness, noise] {
            for (i, p) in set.render()?.into_iter().enumerate() {
                grades.insert(p, (set.category, i as f64 / 4.0));
            }
        }
        Ok(Self {
            grades,
            temperature: Self::DEFAULT_TEMPERATURE,
        })
    }

    fn grade(&self, prompt: &str) -> (PromptCategory, f64) {
        self.grades.get(prompt).copied().unwrap_or_else(|| {
            // FNV-1a
            let h = prompt
                .bytes()
                .fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
            (PromptCategory::Brightness, (h % 1001) as f64 / 1000.0)
        })
    }

    pub fn brightness_statistic(tile: &RgbFrame) -> f64 {
        tile.pixels().map(luma_of).sum::<f64>() / (tile.pixel_count() as f64 * 255.0)
    }

    pub fn noise_statistic(tile: &RgbFrame) -> f64 {
        let l = tile.luma();
        let w = tile.width();
        let mut total = 0.0;
        let mut count = 0usize;
        for row in l.chunks_exact(w) {
            for pair in row.windows(2) {
                total += (pair[1] - pair[0]).abs();
                count += 1;
            }
        }
        if count == 0 {
            return 0.0;
        }
        (total / count as f64 / Self::NOISE_SATURATION).min(1.0)
    }
}

impl ImageTextMatcher for GradedStatisticMatcher {
    fn name(&self) -> &str {
        "mock-graded"
    }

    fn logits(&self, tile: &RgbFrame, prompts: &[String]) -> Result<Vec<f64>> {
        let mut brightness = None;
        let mut noise = None;
        Ok(prompts
            .iter()
            .map(|p| {
                let (category, grade) = self.grade(p);
                let stat = match category {
                    PromptCategory::Brightness => {
                        *brightness.get_or_insert_with(|| Self::brightness_statistic(tile))
                    }
                    PromptCategory::Noise => *noise.get_or_insert_with(|| Self::noise_statistic(tile)),
                };
                -(stat - grade).powi(2) / self.temperature
            })
            .collect())
    }
}
