//! Multi-resolution texture recovery from the reference portrait through the
//! frozen rasterization.
//!
//! The rendered image is exactly linear in the texture (geometry and camera
//! are fixed after the geometry fit), so each level solves a convex problem:
//! Frobenius data term on covered pixels plus a small total-variation term on
//! the rendered image. Levels run coarse to fine, each initialized from the
//! upsampled previous level; the first level starts at the covered-pixel mean
//! color of the target.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::mesh::{CameraPose, HeadMesh, Intrinsics};
use crate::optim::{self, cosine_lr, Adam};
use crate::raster::{self, RasterBuffer};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TexFitConfig {
    /// Texture side lengths, strictly increasing.
    pub hierarchy: Vec<usize>,
    /// Weight of the total-variation term on the rendered image.
    pub alpha: f64,
    pub iterations_per_level: usize,
    pub learning_rate: f64,
    /// Adam (beta1, beta2).
    pub betas: (f64, f64),
    pub epsilon: f64,
    /// Cosine-anneal floor as a fraction of the initial rate; 1.0 = constant.
    pub lr_decay: f64,
    /// Use the squared Frobenius data term instead of the default unsquared.
    pub squared_data: bool,
}

impl Default for TexFitConfig {
    fn default() -> Self {
        TexFitConfig {
            hierarchy: vec![32, 128, 512, 1024],
            alpha: 0.01,
            iterations_per_level: 200,
            learning_rate: 5e-2,
            betas: (0.9, 0.999),
            epsilon: 1e-8,
            lr_decay: 1e-2,
            squared_data: false,
        }
    }
}

impl TexFitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hierarchy.is_empty() {
            return Err(Error::InvalidConfig("texture hierarchy is empty".into()));
        }
        if !self.hierarchy.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(format!(
                "texture hierarchy must be strictly increasing: {:?}",
                self.hierarchy
            )));
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.iterations_per_level == 0 {
            return Err(Error::InvalidConfig("iterations_per_level must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-level loss trace of a texture fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelTrace {
    pub resolution: usize,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TexFitReport {
    pub levels: Vec<LevelTrace>,
    pub final_loss: f64,
    pub covered_pixels: usize,
}

impl TexFitReport {
    pub fn trace_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("level,resolution,iteration,loss\n");
        for (li, level) in self.levels.iter().enumerate() {
            for (i, loss) in level.losses.iter().enumerate() {
                let _ = writeln!(out, "{li},{},{i},{loss}", level.resolution);
            }
        }
        out
    }
}

/// Last finite state carried by a divergence error.
#[derive(Debug, Clone)]
pub struct TexFitPartial {
    pub texture: Image,
    pub report: TexFitReport,
}

/// Texture-fit loss on a rendered/target pair: Frobenius norm of the
/// per-pixel residual restricted to covered pixels, plus `alpha` times the
/// anisotropic total variation of the rendered image over covered-covered
/// neighbor pairs. Returns the loss and its gradient with respect to the
/// rendered image (zero on uncovered pixels).
pub fn texture_loss(
    rendered: &Image,
    target: &Image,
    coverage: &Mask,
    alpha: f64,
    squared: bool,
) -> Result<(f64, Vec<f64>)> {
    if !rendered.same_dims(target)
        || rendered.width() != coverage.width()
        || rendered.height() != coverage.height()
    {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", rendered.width(), rendered.height()),
            actual: format!(
                "target {}x{}, coverage {}x{}",
                target.width(),
                target.height(),
                coverage.width(),
                coverage.height()
            ),
        });
    }
    let w = rendered.width();
    let h = rendered.height();
    let r = rendered.data();
    let t = target.data();
    let mut grad = vec![0.0; r.len()];

    // data term
    let mut sq = 0.0;
    for y in 0..h {
        for x in 0..w {
            if !coverage.get(x, y) {
                continue;
            }
            let i = (y * w + x) * 3;
            for c in 0..3 {
                let d = r[i + c] - t[i + c];
                sq += d * d;
            }
        }
    }
    let data = if squared { sq } else { sq.sqrt() };
    for y in 0..h {
        for x in 0..w {
            if !coverage.get(x, y) {
                continue;
            }
            let i = (y * w + x) * 3;
            for c in 0..3 {
                let d = r[i + c] - t[i + c];
                grad[i + c] = if squared {
                    2.0 * d
                } else if data > 0.0 {
                    d / data
                } else {
                    0.0
                };
            }
        }
    }

    // TV on the rendered image, covered-covered pairs only
    let mut tv = 0.0;
    if alpha != 0.0 {
        for y in 0..h {
            for x in 0..w {
                if !coverage.get(x, y) {
                    continue;
                }
                let i = (y * w + x) * 3;
                if x + 1 < w && coverage.get(x + 1, y) {
                    for c in 0..3 {
                        let d = r[i + c] - r[i + 3 + c];
                        tv += d.abs();
                        let s = alpha * sign(d);
                        grad[i + c] += s;
                        grad[i + 3 + c] -= s;
                    }
                }
                if y + 1 < h && coverage.get(x, y + 1) {
                    let j = i + w * 3;
                    for c in 0..3 {
                        let d = r[i + c] - r[j + c];
                        tv += d.abs();
                        let s = alpha * sign(d);
                        grad[i + c] += s;
                        grad[j + c] -= s;
                    }
                }
            }
        }
    }

    Ok((data + alpha * tv, grad))
}

#[inline]
fn sign(d: f64) -> f64 {
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Bilinear upsampling of a square texture with half-texel-centered
/// alignment; constant textures stay constant bit-exactly. `new == current`
/// is the identity.
pub fn upsample(texture: &Image, new_resolution: usize) -> Result<Image> {
    if texture.width() != texture.height() {
        return Err(Error::DimensionMismatch {
            expected: "square texture".into(),
            actual: format!("{}x{}", texture.width(), texture.height()),
        });
    }
    let old = texture.width();
    if new_resolution < old {
        return Err(Error::Downsample { from: old, to: new_resolution });
    }
    if new_resolution == old {
        return Ok(texture.clone());
    }
    let scale = old as f64 / new_resolution as f64;
    let mut out = Image::new(new_resolution, new_resolution);
    let src = texture.data();
    let clamp = |v: i64| -> usize { v.clamp(0, old as i64 - 1) as usize };
    for ro in 0..new_resolution {
        let rf = (ro as f64 + 0.5) * scale - 0.5;
        let r0f = rf.floor();
        let fr = rf - r0f;
        let r0 = clamp(r0f as i64);
        let r1 = clamp(r0f as i64 + 1);
        for co in 0..new_resolution {
            let cf = (co as f64 + 0.5) * scale - 0.5;
            let c0f = cf.floor();
            let fc = cf - c0f;
            let c0 = clamp(c0f as i64);
            let c1 = clamp(c0f as i64 + 1);
            let i = (ro * new_resolution + co) * 3;
            for ch in 0..3 {
                let v00 = src[(r0 * old + c0) * 3 + ch];
                let v01 = src[(r0 * old + c1) * 3 + ch];
                let v10 = src[(r1 * old + c0) * 3 + ch];
                let v11 = src[(r1 * old + c1) * 3 + ch];
                // nested lerp: exact for constant inputs
                let top = v00 + fc * (v01 - v00);
                let bot = v10 + fc * (v11 - v10);
                out.data_mut()[i + ch] = top + fr * (bot - top);
            }
        }
    }
    Ok(out)
}

/// Total bilinear weight each texel receives from the covered pixels of a
/// raster buffer, at the given texture resolution.
pub fn coverage_weights(buffer: &RasterBuffer, resolution: usize) -> Vec<f64> {
    let mut weights = vec![0.0; resolution * resolution];
    for p in buffer.pixels().iter().flatten() {
        for (t, w) in raster::bilinear_footprint(resolution, resolution, p.uv) {
            weights[t] += w;
        }
    }
    weights
}

/// Coarse-to-fine texture fit against a target portrait. The rasterization is
/// computed once from the (frozen) geometry and camera; texel values are then
/// optimized per level with Adam. Deterministic for identical inputs.
pub fn fit_texture(
    mesh: &HeadMesh,
    pose: &CameraPose,
    intr: &Intrinsics,
    target: &Image,
    config: &TexFitConfig,
) -> Result<(Image, TexFitReport)> {
    config.validate()?;
    let buffer = raster::rasterize(mesh, pose, intr, target.width(), target.height());
    fit_texture_with_buffer(&buffer, target, config)
}

/// [`fit_texture`] with a precomputed raster buffer (the pipeline reuses the
/// buffer for previews).
pub fn fit_texture_with_buffer(
    buffer: &RasterBuffer,
    target: &Image,
    config: &TexFitConfig,
) -> Result<(Image, TexFitReport)> {
    config.validate()?;
    if buffer.width() != target.width() || buffer.height() != target.height() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", buffer.width(), buffer.height()),
            actual: format!("{}x{}", target.width(), target.height()),
        });
    }
    let coverage = buffer.coverage_mask();
    let covered: Vec<usize> = (0..buffer.pixels().len())
        .filter(|&i| buffer.pixels()[i].is_some())
        .collect();
    let mean = target.mean_color(Some(&coverage));

    let mut texture: Option<Image> = None;
    let mut report = TexFitReport { levels: Vec::new(), final_loss: 0.0, covered_pixels: covered.len() };

    for &res in &config.hierarchy {
        let mut tex = match texture.take() {
            None => Image::constant(res, res, mean),
            Some(prev) => upsample(&prev, res)?,
        };

        // Bilinear footprint of every covered pixel at this resolution, in
        // ascending pixel order; gradient accumulation follows this order,
        // so the fit is bit-deterministic.
        let footprints: Vec<[(usize, f64); 4]> = covered
            .iter()
            .map(|&i| {
                let p = buffer.pixels()[i].as_ref().unwrap();
                raster::bilinear_footprint(res, res, p.uv)
            })
            .collect();

        // Texels actually touched by any footprint; only those are optimized
        // (untouched texels have identically zero gradient anyway).
        let mut touched: Vec<usize> = footprints.iter().flatten().map(|&(t, _)| t).collect();
        touched.sort_unstable();
        touched.dedup();
        let mut slot_of = vec![u32::MAX; res * res];
        for (k, &t) in touched.iter().enumerate() {
            slot_of[t] = k as u32;
        }

        let n = touched.len() * 3;
        let mut params = vec![0.0; n];
        for (k, &t) in touched.iter().enumerate() {
            params[k * 3..k * 3 + 3].copy_from_slice(&tex.data()[t * 3..t * 3 + 3]);
        }
        let mut prev_params = params.clone();
        let mut adam = Adam::new(n, config.betas, config.epsilon);
        let mut grad = vec![0.0; n];
        let mut rendered = Image::new(target.width(), target.height());
        let mut losses = Vec::with_capacity(config.iterations_per_level);

        for iter in 0..config.iterations_per_level {
            // forward through the fixed linear map
            for (&px, fp) in covered.iter().zip(&footprints) {
                let mut color = [0.0; 3];
                for &(t, w) in fp {
                    let base = slot_of[t] as usize * 3;
                    color[0] += w * params[base];
                    color[1] += w * params[base + 1];
                    color[2] += w * params[base + 2];
                }
                rendered.data_mut()[px * 3..px * 3 + 3].copy_from_slice(&color);
            }
            let (loss, g_rendered) =
                texture_loss(&rendered, target, &coverage, config.alpha, config.squared_data)?;
            if !loss.is_finite() {
                for (k, &t) in touched.iter().enumerate() {
                    tex.data_mut()[t * 3..t * 3 + 3]
                        .copy_from_slice(&prev_params[k * 3..k * 3 + 3]);
                }
                report.levels.push(LevelTrace { resolution: res, losses });
                report.final_loss = f64::NAN;
                return Err(Error::TexFitDiverged {
                    level: res,
                    iteration: iter,
                    partial: Box::new(TexFitPartial { texture: tex, report }),
                });
            }
            losses.push(loss);

            // backward: scatter pixel gradients into texel slots
            grad.fill(0.0);
            for (&px, fp) in covered.iter().zip(&footprints) {
                let gi = px * 3;
                for &(t, w) in fp {
                    let base = slot_of[t] as usize * 3;
                    grad[base] += w * g_rendered[gi];
                    grad[base + 1] += w * g_rendered[gi + 1];
                    grad[base + 2] += w * g_rendered[gi + 2];
                }
            }

            prev_params.copy_from_slice(&params);
            let lr = optim::warmup_factor(iter, config.iterations_per_level)
                * cosine_lr(config.learning_rate, config.lr_decay, iter, config.iterations_per_level);
            adam.step(&mut params, &grad, lr);
        }

        for (k, &t) in touched.iter().enumerate() {
            tex.data_mut()[t * 3..t * 3 + 3].copy_from_slice(&params[k * 3..k * 3 + 3]);
        }
        report.final_loss = *losses.last().unwrap_or(&0.0);
        report.levels.push(LevelTrace { resolution: res, losses });
        texture = Some(tex);
    }

    Ok((texture.expect("hierarchy validated non-empty"), report))
}
