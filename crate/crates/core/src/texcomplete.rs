//! Texture correction and completion: replace error-prone regions (eyes,
//! mouth, nostrils) with template content via Poisson blending, transfer
//! mouth/eyebrow colors from the portrait, then blend the facial region into
//! the template albedo to inherit ears and neck.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Mask};

/// Semantic regions of the texture/portrait label maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLabel {
    Background,
    Skin,
    LeftEye,
    RightEye,
    Mouth,
    Nostrils,
    Eyebrows,
    Ears,
    Neck,
}

impl RegionLabel {
    pub const ALL: [RegionLabel; 9] = [
        RegionLabel::Background,
        RegionLabel::Skin,
        RegionLabel::LeftEye,
        RegionLabel::RightEye,
        RegionLabel::Mouth,
        RegionLabel::Nostrils,
        RegionLabel::Eyebrows,
        RegionLabel::Ears,
        RegionLabel::Neck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RegionLabel::Background => "background",
            RegionLabel::Skin => "skin",
            RegionLabel::LeftEye => "left_eye",
            RegionLabel::RightEye => "right_eye",
            RegionLabel::Mouth => "mouth",
            RegionLabel::Nostrils => "nostrils",
            RegionLabel::Eyebrows => "eyebrows",
            RegionLabel::Ears => "ears",
            RegionLabel::Neck => "neck",
        }
    }
}

/// Indexed-color palette of the label PNG, one entry per label in
/// [`RegionLabel::ALL`] order.
pub const LABEL_PALETTE: [[u8; 3]; 9] = [
    [0, 0, 0],       // background
    [255, 204, 153], // skin
    [0, 255, 0],     // left_eye
    [0, 200, 255],   // right_eye
    [255, 0, 0],     // mouth
    [255, 255, 0],   // nostrils
    [128, 64, 0],    // eyebrows
    [255, 0, 255],   // ears
    [0, 0, 255],     // neck
];

/// Per-pixel semantic labels in texture UV space (or portrait image space).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionLabelMap {
    width: usize,
    height: usize,
    labels: Vec<RegionLabel>,
}

impl RegionLabelMap {
    pub fn new(width: usize, height: usize) -> Self {
        RegionLabelMap { width, height, labels: vec![RegionLabel::Background; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> RegionLabel {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, label: RegionLabel) {
        self.labels[y * self.width + x] = label;
    }

    pub fn labels(&self) -> &[RegionLabel] {
        &self.labels
    }

    /// Binary mask of one label.
    pub fn mask_for(&self, label: RegionLabel) -> Mask {
        self.mask_for_any(&[label])
    }

    /// Binary mask of the union of several labels.
    pub fn mask_for_any(&self, labels: &[RegionLabel]) -> Mask {
        let mut m = Mask::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if labels.contains(&self.get(x, y)) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    pub fn count(&self, label: RegionLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Write as an indexed-color PNG using [`LABEL_PALETTE`].
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(
            std::io::BufWriter::new(file),
            self.width as u32,
            self.height as u32,
        );
        encoder.set_color(png::ColorType::Indexed);
        encoder.set_depth(png::BitDepth::Eight);
        let palette: Vec<u8> = LABEL_PALETTE.iter().flatten().copied().collect();
        encoder.set_palette(palette);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::ImageFormat { path: path.into(), msg: e.to_string() })?;
        let data: Vec<u8> = self.labels.iter().map(|&l| l as u8).collect();
        writer
            .write_image_data(&data)
            .map_err(|e| Error::ImageFormat { path: path.into(), msg: e.to_string() })
    }

    /// Read an indexed or RGB PNG whose colors are exactly the palette
    /// entries.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::ImageFormat { path: path.into(), msg: e.to_string() })?
            .to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut map = RegionLabelMap::new(w, h);
        for (i, px) in img.pixels().enumerate() {
            let rgb = [px.0[0], px.0[1], px.0[2]];
            let Some(k) = LABEL_PALETTE.iter().position(|p| *p == rgb) else {
                return Err(Error::UnknownLabelColor { color: rgb, x: i % w, y: i / w });
            };
            map.labels[i] = RegionLabel::ALL[k];
        }
        Ok(map)
    }
}

/// Morphological dilation with a Euclidean disc of the given radius (in
/// texels). Radius 0 is the identity.
pub fn dilate(mask: &Mask, radius: usize) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let w = mask.width() as i64;
    let h = mask.height() as i64;
    let r = radius as i64;
    // disc offsets
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                offsets.push((dx, dy));
            }
        }
    }
    let mut out = Mask::new(mask.width(), mask.height());
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as usize, y as usize) {
                continue;
            }
            for &(dx, dy) in &offsets {
                let nx = x + dx;
                let ny = y + dy;
                if nx >= 0 && nx < w && ny >= 0 && ny < h {
                    out.set(nx as usize, ny as usize, true);
                }
            }
        }
    }
    out
}

/// Seamless cloning: solve the discrete Poisson equation on the mask
/// interior with the source's gradients as guidance and the target's values
/// as Dirichlet boundary. Outside the mask the output equals the target
/// bit-exactly.
///
/// The solver is conjugate gradients on the 5-point Laplacian, run to an
/// infinity-norm residual below 1e-10 (capped at 10x the interior size in
/// iterations).
pub fn poisson_blend(source: &Image, target: &Image, mask: &Mask) -> Result<Image> {
    if !source.same_dims(target)
        || source.width() != mask.width()
        || source.height() != mask.height()
    {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", source.width(), source.height()),
            actual: format!(
                "target {}x{}, mask {}x{}",
                target.width(),
                target.height(),
                mask.width(),
                mask.height()
            ),
        });
    }
    if mask.any_on_border() {
        return Err(Error::MaskTouchesBorder);
    }
    let w = source.width();
    let h = source.height();
    let interior: Vec<usize> = (0..w * h).filter(|i| mask.data()[*i]).collect();
    if interior.is_empty() {
        return Err(Error::EmptyMaskInterior);
    }
    let mut index_of = vec![u32::MAX; w * h];
    for (k, &p) in interior.iter().enumerate() {
        index_of[p] = k as u32;
    }
    let n = interior.len();
    let neighbors = |p: usize| [p - 1, p + 1, p - w, p + w];

    let mut out = target.clone();
    for ch in 0..3 {
        // b = laplacian of source (guidance divergence) + boundary values
        let mut b = vec![0.0; n];
        for (k, &p) in interior.iter().enumerate() {
            let mut rhs = 4.0 * source.data()[p * 3 + ch];
            for q in neighbors(p) {
                rhs -= source.data()[q * 3 + ch];
                if index_of[q] == u32::MAX {
                    rhs += target.data()[q * 3 + ch];
                }
            }
            b[k] = rhs;
        }
        // x0 = target values inside the mask (good initial guess)
        let mut x: Vec<f64> = interior.iter().map(|&p| target.data()[p * 3 + ch]).collect();
        cg_laplacian(&interior, &index_of, &neighbors, &b, &mut x, w);
        for (k, &p) in interior.iter().enumerate() {
            out.data_mut()[p * 3 + ch] = x[k];
        }
    }
    Ok(out)
}

/// CG on A x = b with A the 5-point Laplacian restricted to the interior
/// (Dirichlet outside). Terminates at ||r||_inf < 1e-10 or 10 n iterations.
fn cg_laplacian<F>(
    interior: &[usize],
    index_of: &[u32],
    neighbors: &F,
    b: &[f64],
    x: &mut [f64],
    width: usize,
) where
    F: Fn(usize) -> [usize; 4] + Sync,
{
    let _ = width;
    let n = interior.len();
    let apply = |v: &[f64], out: &mut [f64]| {
        out.par_iter_mut().enumerate().for_each(|(k, o)| {
            let p = interior[k];
            let mut acc = 4.0 * v[k];
            for q in neighbors(p) {
                let j = index_of[q];
                if j != u32::MAX {
                    acc -= v[j as usize];
                }
            }
            *o = acc;
        });
    };

    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    for k in 0..n {
        r[k] = b[k] - ax[k];
    }
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let max_iters = 10 * n;
    let tol = 1e-10;
    let mut ap = vec![0.0; n];
    for _ in 0..max_iters {
        let rinf = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rinf < tol {
            break;
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break; // should not happen for the SPD Laplacian
        }
        let alpha = rs / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        rs = rs_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
}

/// Per-channel affine color transform: out = ratio * x + offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorTransform {
    pub ratio: [f64; 3],
    pub offset: [f64; 3],
}

impl ColorTransform {
    pub fn apply(&self, rgb: [f64; 3]) -> [f64; 3] {
        [
            self.ratio[0] * rgb[0] + self.offset[0],
            self.ratio[1] * rgb[1] + self.offset[1],
            self.ratio[2] * rgb[2] + self.offset[2],
        ]
    }

    pub fn is_identity(&self) -> bool {
        self.ratio == [1.0; 3] && self.offset == [0.0; 3]
    }
}

/// Per-channel mean and (population) standard deviation of a pixel region.
pub fn region_stats(pixels: &[[f64; 3]]) -> ([f64; 3], [f64; 3]) {
    let n = pixels.len() as f64;
    let mut mean = [0.0; 3];
    for p in pixels {
        for c in 0..3 {
            mean[c] += p[c];
        }
    }
    mean = mean.map(|m| m / n);
    let mut var = [0.0; 3];
    for p in pixels {
        for c in 0..3 {
            let d = p[c] - mean[c];
            var[c] += d * d;
        }
    }
    (mean, var.map(|v| (v / n).sqrt()))
}

/// Affine transform matching the destination region's per-channel mean and
/// standard deviation to the source region's, with the std ratio clamped to
/// [0.25, 4] to bound amplification. A constant destination channel (std 0)
/// keeps ratio 1 and shifts the mean only.
pub fn color_transfer(
    source_region: &[[f64; 3]],
    destination_region: &[[f64; 3]],
) -> Result<ColorTransform> {
    if source_region.is_empty() {
        return Err(Error::EmptyRegion("source".into()));
    }
    if destination_region.is_empty() {
        return Err(Error::EmptyRegion("destination".into()));
    }
    let (src_mean, src_std) = region_stats(source_region);
    let (dst_mean, dst_std) = region_stats(destination_region);
    let mut ratio = [1.0; 3];
    let mut offset = [0.0; 3];
    for c in 0..3 {
        ratio[c] = if dst_std[c] > 0.0 {
            (src_std[c] / dst_std[c]).clamp(0.25, 4.0)
        } else {
            1.0
        };
        offset[c] = src_mean[c] - ratio[c] * dst_mean[c];
    }
    Ok(ColorTransform { ratio, offset })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TexCompleteConfig {
    /// Dilation radius in texels at 1024x1024; scaled proportionally at other
    /// resolutions.
    pub dilation_radius: usize,
    /// Optional RGBA make-up overlay composited at the end, off by default.
    pub makeup_overlay: Option<PathBuf>,
}

impl Default for TexCompleteConfig {
    fn default() -> Self {
        TexCompleteConfig { dilation_radius: 4, makeup_overlay: None }
    }
}

const REPLACE_LABELS: [RegionLabel; 4] = [
    RegionLabel::LeftEye,
    RegionLabel::RightEye,
    RegionLabel::Mouth,
    RegionLabel::Nostrils,
];

const FACE_LABELS: [RegionLabel; 6] = [
    RegionLabel::Skin,
    RegionLabel::LeftEye,
    RegionLabel::RightEye,
    RegionLabel::Mouth,
    RegionLabel::Nostrils,
    RegionLabel::Eyebrows,
];

fn region_pixels(img: &Image, labels: &RegionLabelMap, label: RegionLabel) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            if labels.get(x, y) == label {
                out.push(img.pixel(x, y));
            }
        }
    }
    out
}

/// Correct and complete a fitted texture:
///
/// 1. dilate the eye/mouth/nostril masks,
/// 2. replace those regions with template content via Poisson blending,
/// 3. Poisson-blend the whole facial region into the template albedo so ears
///    and neck are inherited from the template,
/// 4. transfer mouth and eyebrow colors from the portrait,
/// 5. optionally composite a make-up overlay.
///
/// The color transfer runs after the face blend: it pins the mouth/eyebrow
/// statistics to the portrait's, and any later blend would shift that tone by
/// its harmonic correction, which breaks idempotence on already-completed
/// textures.
pub fn complete_texture(
    fitted: &Image,
    labels: &RegionLabelMap,
    template: &Image,
    portrait: &Image,
    portrait_labels: &RegionLabelMap,
    config: &TexCompleteConfig,
) -> Result<Image> {
    if !fitted.same_dims(template)
        || fitted.width() != labels.width()
        || fitted.height() != labels.height()
    {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", fitted.width(), fitted.height()),
            actual: format!(
                "template {}x{}, labels {}x{}",
                template.width(),
                template.height(),
                labels.width(),
                labels.height()
            ),
        });
    }
    if portrait.width() != portrait_labels.width() || portrait.height() != portrait_labels.height()
    {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", portrait.width(), portrait.height()),
            actual: format!("{}x{}", portrait_labels.width(), portrait_labels.height()),
        });
    }

    let mut missing: Vec<String> = Vec::new();
    for label in FACE_LABELS {
        if labels.count(label) == 0 {
            missing.push(label.name().to_string());
        }
    }
    for label in [RegionLabel::Mouth, RegionLabel::Eyebrows] {
        if portrait_labels.count(label) == 0 {
            missing.push(format!("portrait:{}", label.name()));
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingLabels(missing));
    }

    let radius =
        ((config.dilation_radius * fitted.width()) as f64 / 1024.0).round().max(0.0) as usize;

    // (1)+(2): replace dilated error-prone regions with template content,
    // boundary tones from the fitted texture
    let mut replace_mask = labels.mask_for(REPLACE_LABELS[0]);
    for label in &REPLACE_LABELS[1..] {
        replace_mask = replace_mask.union(&labels.mask_for(*label));
    }
    let replace_mask = dilate(&replace_mask, radius);
    let out = poisson_blend(template, fitted, &replace_mask)?;

    // (3): whole-face region blended into the template (ears/neck inherited)
    let face_mask = labels.mask_for_any(&FACE_LABELS);
    let mut completed = poisson_blend(&out, template, &face_mask)?;

    // (4): portrait -> texture color transfer for mouth and eyebrows
    for label in [RegionLabel::Mouth, RegionLabel::Eyebrows] {
        let src = region_pixels(portrait, portrait_labels, label);
        let dst = region_pixels(&completed, labels, label);
        let transform = color_transfer(&src, &dst)?;
        for y in 0..labels.height() {
            for x in 0..labels.width() {
                if labels.get(x, y) == label {
                    completed.set_pixel(x, y, transform.apply(completed.pixel(x, y)));
                }
            }
        }
    }

    // (5): optional make-up overlay
    if let Some(overlay_path) = &config.makeup_overlay {
        composite_overlay(&mut completed, overlay_path)?;
    }
    Ok(completed)
}

fn composite_overlay(base: &mut Image, path: &Path) -> Result<()> {
    let overlay = image::open(path)
        .map_err(|e| Error::ImageFormat { path: path.into(), msg: e.to_string() })?
        .to_rgba8();
    if overlay.width() as usize != base.width() || overlay.height() as usize != base.height() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", base.width(), base.height()),
            actual: format!("{}x{}", overlay.width(), overlay.height()),
        });
    }
    for (i, px) in overlay.pixels().enumerate() {
        let a = px.0[3] as f64 / 255.0;
        if a == 0.0 {
            continue;
        }
        for c in 0..3 {
            let over = crate::image::srgb_decode(px.0[c] as f64 / 255.0);
            base.data_mut()[i * 3 + c] = a * over + (1.0 - a) * base.data()[i * 3 + c];
        }
    }
    Ok(())
}

/// Aggregate per-label pixel statistics, handy for reports and tests.
pub fn label_histogram(labels: &RegionLabelMap) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for label in RegionLabel::ALL {
        let c = labels.count(label);
        if c > 0 {
            out.insert(label.name(), c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilate_radius_zero_is_identity() {
        let mut m = Mask::new(8, 8);
        m.set(3, 4, true);
        m.set(5, 5, true);
        assert_eq!(dilate(&m, 0), m);
    }

    #[test]
    fn dilate_single_texel_radius_one_is_plus_shape() {
        let mut m = Mask::new(7, 7);
        m.set(3, 3, true);
        let d = dilate(&m, 1);
        assert_eq!(d.count(), 5);
        for (x, y) in [(3, 3), (2, 3), (4, 3), (3, 2), (3, 4)] {
            assert!(d.get(x, y), "({x},{y}) should be set");
        }
    }

    #[test]
    fn dilate_full_mask_saturates() {
        let mut m = Mask::new(5, 5);
        for y in 0..5 {
            for x in 0..5 {
                m.set(x, y, true);
            }
        }
        assert_eq!(dilate(&m, 3), m);
    }

    fn disc_mask(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> Mask {
        let mut m = Mask::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                if dx * dx + dy * dy <= r * r {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    #[test]
    fn poisson_identity_when_source_equals_target() {
        let mut img = Image::new(16, 16);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = ((i * 7) % 19) as f64 / 19.0;
        }
        let mask = disc_mask(16, 16, 8.0, 8.0, 4.5);
        let out = poisson_blend(&img, &img, &mask).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn poisson_outside_mask_is_bit_identical_to_target() {
        let mut source = Image::new(16, 16);
        for (i, v) in source.data_mut().iter_mut().enumerate() {
            *v = (i % 11) as f64 / 11.0;
        }
        let mut target = Image::new(16, 16);
        for (i, v) in target.data_mut().iter_mut().enumerate() {
            *v = ((i * 3) % 7) as f64 / 7.0;
        }
        let mask = disc_mask(16, 16, 8.0, 8.0, 4.0);
        let out = poisson_blend(&source, &target, &mask).unwrap();
        for i in 0..16 * 16 {
            if !mask.data()[i] {
                for c in 0..3 {
                    assert_eq!(out.data()[i * 3 + c], target.data()[i * 3 + c]);
                }
            }
        }
    }

    #[test]
    fn poisson_interior_satisfies_discrete_equation() {
        let w = 24;
        let mut source = Image::new(w, w);
        let mut target = Image::new(w, w);
        for y in 0..w {
            for x in 0..w {
                source.set_pixel(x, y, [0.3 + 0.02 * x as f64, 0.5, 0.1 + 0.01 * y as f64]);
                target.set_pixel(x, y, [0.8 - 0.01 * y as f64, 0.2, 0.9]);
            }
        }
        let mask = disc_mask(w, w, 12.0, 12.0, 7.0);
        let out = poisson_blend(&source, &target, &mask).unwrap();
        for y in 1..w - 1 {
            for x in 1..w - 1 {
                if !mask.get(x, y) {
                    continue;
                }
                for c in 0..3 {
                    let p = |xx: usize, yy: usize| out.pixel(xx, yy)[c];
                    let s = |xx: usize, yy: usize| source.pixel(xx, yy)[c];
                    let lhs =
                        4.0 * p(x, y) - p(x - 1, y) - p(x + 1, y) - p(x, y - 1) - p(x, y + 1);
                    let rhs =
                        4.0 * s(x, y) - s(x - 1, y) - s(x + 1, y) - s(x, y - 1) - s(x, y + 1);
                    assert!((lhs - rhs).abs() < 1e-8, "residual at ({x},{y}) ch{c}");
                }
            }
        }
    }

    #[test]
    fn poisson_rejects_border_mask_and_empty_interior() {
        let img = Image::new(8, 8);
        let mut border = Mask::new(8, 8);
        border.set(0, 3, true);
        assert!(matches!(
            poisson_blend(&img, &img, &border),
            Err(Error::MaskTouchesBorder)
        ));
        let empty = Mask::new(8, 8);
        assert!(matches!(
            poisson_blend(&img, &img, &empty),
            Err(Error::EmptyMaskInterior)
        ));
    }

    #[test]
    fn color_transfer_identity_for_identical_regions() {
        let region: Vec<[f64; 3]> =
            (0..50).map(|i| [i as f64 / 50.0, 0.5, 1.0 - i as f64 / 100.0]).collect();
        let t = color_transfer(&region, &region).unwrap();
        for c in 0..3 {
            assert!((t.ratio[c] - 1.0).abs() < 1e-12);
            assert!(t.offset[c].abs() < 1e-12);
        }
    }

    #[test]
    fn color_transfer_matches_target_statistics() {
        // source mean 0.8 / std 0.1, destination mean 0.4 / std 0.05:
        // ratio = 2, transformed mean = 0.8
        let source: Vec<[f64; 3]> = vec![[0.7; 3], [0.9; 3]];
        let dest: Vec<[f64; 3]> = vec![[0.35; 3], [0.45; 3]];
        let t = color_transfer(&source, &dest).unwrap();
        assert!((t.ratio[0] - 2.0).abs() < 1e-12);
        let transferred: Vec<[f64; 3]> = dest.iter().map(|p| t.apply(*p)).collect();
        let (mean, std) = region_stats(&transferred);
        assert!((mean[0] - 0.8).abs() < 1e-12);
        assert!((std[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn color_transfer_constant_destination_shifts_mean_only() {
        let source: Vec<[f64; 3]> = vec![[0.2; 3], [0.6; 3]];
        let dest: Vec<[f64; 3]> = vec![[0.5; 3], [0.5; 3]];
        let t = color_transfer(&source, &dest).unwrap();
        assert_eq!(t.ratio, [1.0; 3]);
        assert!((t.apply([0.5; 3])[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn color_transfer_rejects_empty_regions() {
        let region = vec![[0.5; 3]];
        assert!(color_transfer(&[], &region).is_err());
        assert!(color_transfer(&region, &[]).is_err());
    }

    #[test]
    fn label_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut map = RegionLabelMap::new(16, 12);
        map.set(3, 4, RegionLabel::Mouth);
        map.set(5, 5, RegionLabel::LeftEye);
        map.set(15, 11, RegionLabel::Neck);
        let path = dir.path().join("labels.png");
        map.save_png(&path).unwrap();
        let back = RegionLabelMap::load_png(&path).unwrap();
        assert_eq!(map, back);
    }
}
