//! End-to-end orchestration: geometry fit, texture extraction, texture
//! completion, asset matching and a preview render, with per-stage artifacts
//! and wall-clock accounting.
//!
//! Each stage's artifacts are written to disk and the next stage reads them
//! back, so a standalone subcommand run on the intermediate files reproduces
//! the pipeline's corresponding artifact bit-exactly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assetmatch::{self, AssetCatalog};
use crate::error::{Error, Result};
use crate::geomfit::{self, GeomFitConfig};
use crate::image::Image;
use crate::mesh::{self, CameraFile, CameraPose, HeadMesh, Intrinsics, LandmarkSet};
use crate::raster;
use crate::texcomplete::{self, RegionLabelMap, TexCompleteConfig};
use crate::texfit::{self, TexFitConfig};

/// Input files of the pipeline; relative paths resolve against the config
/// file's directory.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PipelinePaths {
    pub template_mesh: PathBuf,
    pub landmarks: PathBuf,
    pub camera: PathBuf,
    pub portrait: PathBuf,
    pub portrait_labels: PathBuf,
    pub labels: PathBuf,
    pub template_albedo: PathBuf,
    pub catalog: PathBuf,
    pub query: PathBuf,
}

impl PipelinePaths {
    fn all(&self) -> [(&'static str, &PathBuf); 9] {
        [
            ("template_mesh", &self.template_mesh),
            ("landmarks", &self.landmarks),
            ("camera", &self.camera),
            ("portrait", &self.portrait),
            ("portrait_labels", &self.portrait_labels),
            ("labels", &self.labels),
            ("template_albedo", &self.template_albedo),
            ("catalog", &self.catalog),
            ("query", &self.query),
        ]
    }

    fn resolve(&mut self, base: &Path) {
        for path in [
            &mut self.template_mesh,
            &mut self.landmarks,
            &mut self.camera,
            &mut self.portrait,
            &mut self.portrait_labels,
            &mut self.labels,
            &mut self.template_albedo,
            &mut self.catalog,
            &mut self.query,
        ] {
            if path.is_relative() {
                *path = base.join(&path);
            }
        }
    }
}

/// One structured config with per-stage sections; every numeric default of
/// the stage modules is representable here.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PipelineConfig {
    pub paths: PipelinePaths,
    #[serde(default)]
    pub geomfit: GeomFitConfig,
    #[serde(default)]
    pub texfit: TexFitConfig,
    #[serde(default)]
    pub texcomplete: TexCompleteConfig,
}

impl PipelineConfig {
    /// Load a TOML config; relative input paths are resolved against the
    /// config file's parent directory.
    pub fn load_toml(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| Error::Config { path: path.into(), msg: e.to_string() })?;
        if let Some(dir) = path.parent() {
            config.paths.resolve(dir);
        }
        Ok(config)
    }

    pub fn save_toml(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config { path: path.into(), msg: e.to_string() })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// All referenced input files must exist.
    pub fn validate_paths(&self) -> Result<()> {
        for (field, path) in self.paths.all() {
            if !path.is_file() {
                return Err(Error::Config {
                    path: path.clone(),
                    msg: format!("{field}: file not found"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stages: Vec<StageTiming>,
    pub total_seconds: f64,
    /// Output artifacts by class, relative to the output directory.
    pub artifacts: BTreeMap<String, String>,
}

/// Canonical artifact names inside the output directory.
pub mod artifact {
    pub const FITTED_MESH: &str = "fitted_mesh.obj";
    pub const FITTED_CAMERA: &str = "fitted_camera.json";
    pub const GEOMFIT_REPORT: &str = "geomfit_report.json";
    pub const GEOMFIT_TRACE: &str = "geomfit_trace.csv";
    pub const TEXTURE_F32: &str = "texture_fitted.f32";
    pub const TEXTURE_PNG: &str = "texture_fitted.png";
    pub const TEXFIT_REPORT: &str = "texfit_report.json";
    pub const TEXFIT_TRACE: &str = "texfit_trace.csv";
    pub const ALBEDO_F32: &str = "albedo.f32";
    pub const ALBEDO_PNG: &str = "albedo.png";
    pub const ASSETS: &str = "assets.json";
    pub const PREVIEW: &str = "preview.png";
    pub const TIMINGS: &str = "timings.json";
}

/// Matched asset as recorded in the output manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchedAsset {
    pub id: String,
    pub label_text: String,
    pub similarity: f64,
    pub attributes: BTreeMap<String, String>,
}

fn stage<T>(
    name: &'static str,
    timings: &mut Vec<StageTiming>,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| Error::stage(name, e))?;
    timings.push(StageTiming { stage: name.to_string(), seconds: start.elapsed().as_secs_f64() });
    Ok(out)
}

/// Run fit-geometry -> extract-texture -> complete-texture -> match-assets ->
/// render-preview, writing every artifact under `out_dir`. A stage failure
/// aborts with the stage name; artifacts written so far are preserved.
pub fn run_pipeline(config: &PipelineConfig, out_dir: &Path) -> Result<PipelineReport> {
    let total_start = Instant::now();
    config.validate_paths()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let template = mesh::load_mesh(&config.paths.template_mesh)?;
    let landmarks = LandmarkSet::load(&config.paths.landmarks)?;
    let (intr, init_pose) = CameraFile::load(&config.paths.camera)?.split();
    let portrait = Image::load(&config.paths.portrait)?;

    let mut timings = Vec::new();

    // geometry
    let (mesh_path, camera_path) = stage("fit-geometry", &mut timings, || {
        let (fitted, pose, report) =
            geomfit::fit_geometry(&template, &landmarks, &intr, &init_pose, &config.geomfit)?;
        let mesh_path = out_dir.join(artifact::FITTED_MESH);
        mesh::save_mesh(&fitted, &mesh_path)?;
        let camera_path = out_dir.join(artifact::FITTED_CAMERA);
        CameraFile::new(intr, pose).save(&camera_path)?;
        mesh::write_json(&out_dir.join(artifact::GEOMFIT_REPORT), &report)?;
        std::fs::write(out_dir.join(artifact::GEOMFIT_TRACE), report.trace_csv())
            .map_err(|e| Error::io(out_dir.join(artifact::GEOMFIT_TRACE), e))?;
        Ok((mesh_path, camera_path))
    })?;

    // texture extraction (reads back the stage artifacts, like the
    // standalone subcommand does)
    let fitted_mesh = mesh::load_mesh(&mesh_path)?;
    let (_, fitted_pose) = CameraFile::load(&camera_path)?.split();
    let texture_path = stage("extract-texture", &mut timings, || {
        let (texture, report) =
            texfit::fit_texture(&fitted_mesh, &fitted_pose, &intr, &portrait, &config.texfit)?;
        let path = out_dir.join(artifact::TEXTURE_F32);
        texture.save_f32(&path)?;
        texture.save_png(out_dir.join(artifact::TEXTURE_PNG))?;
        mesh::write_json(&out_dir.join(artifact::TEXFIT_REPORT), &report)?;
        std::fs::write(out_dir.join(artifact::TEXFIT_TRACE), report.trace_csv())
            .map_err(|e| Error::io(out_dir.join(artifact::TEXFIT_TRACE), e))?;
        Ok(path)
    })?;

    // completion
    let albedo_path = stage("complete-texture", &mut timings, || {
        let fitted_texture = Image::load_f32(&texture_path)?;
        let labels = RegionLabelMap::load_png(&config.paths.labels)?;
        let template_albedo = Image::load(&config.paths.template_albedo)?;
        let portrait_labels = RegionLabelMap::load_png(&config.paths.portrait_labels)?;
        let albedo = texcomplete::complete_texture(
            &fitted_texture,
            &labels,
            &template_albedo,
            &portrait,
            &portrait_labels,
            &config.texcomplete,
        )?;
        let path = out_dir.join(artifact::ALBEDO_F32);
        albedo.save_f32(&path)?;
        albedo.save_png(out_dir.join(artifact::ALBEDO_PNG))?;
        Ok(path)
    })?;

    // asset matching
    stage("match-assets", &mut timings, || {
        let catalog = AssetCatalog::load(&config.paths.catalog)?;
        let query = assetmatch::load_query(&config.paths.query)?;
        let matches = assetmatch::match_all(&query, &catalog)?;
        let manifest: BTreeMap<String, MatchedAsset> = matches
            .iter()
            .map(|(category, entry)| {
                let similarity = assetmatch::cosine_similarity(
                    &query[category],
                    &entry.embedding,
                )
                .expect("validated embeddings");
                (
                    category.name().to_string(),
                    MatchedAsset {
                        id: entry.id.clone(),
                        label_text: entry.label_text.clone(),
                        similarity,
                        attributes: entry.attributes.clone(),
                    },
                )
            })
            .collect();
        mesh::write_json(&out_dir.join(artifact::ASSETS), &manifest)
    })?;

    // preview
    stage("render-preview", &mut timings, || {
        let albedo = Image::load_f32(&albedo_path)?;
        render_preview(
            &fitted_mesh,
            &albedo,
            &fitted_pose,
            &intr,
            portrait.width(),
            portrait.height(),
            &out_dir.join(artifact::PREVIEW),
        )
    })?;

    let artifacts: BTreeMap<String, String> = [
        ("mesh", artifact::FITTED_MESH),
        ("camera", artifact::FITTED_CAMERA),
        ("albedo", artifact::ALBEDO_F32),
        ("albedo_png", artifact::ALBEDO_PNG),
        ("texture", artifact::TEXTURE_F32),
        ("geomfit_report", artifact::GEOMFIT_REPORT),
        ("texfit_report", artifact::TEXFIT_REPORT),
        ("assets", artifact::ASSETS),
        ("preview", artifact::PREVIEW),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();

    let report = PipelineReport {
        stages: timings,
        total_seconds: total_start.elapsed().as_secs_f64(),
        artifacts,
    };
    mesh::write_json(&out_dir.join(artifact::TIMINGS), &report)?;
    Ok(report)
}

/// Textured render from the given camera plus three turntable views (90, 180,
/// 270 degrees about +Y), side by side in one PNG.
pub fn render_preview(
    mesh: &HeadMesh,
    texture: &Image,
    pose: &CameraPose,
    intr: &Intrinsics,
    width: usize,
    height: usize,
    out_path: &Path,
) -> Result<()> {
    let views = 4usize;
    let mut strip = Image::new(width * views, height);
    for k in 0..views {
        let angle = k as f64 * std::f64::consts::FRAC_PI_2;
        let rotated = if k == 0 { mesh.clone() } else { rotate_about_y(mesh, angle) };
        let buffer = raster::rasterize(&rotated, pose, intr, width, height);
        let view = raster::render(&buffer, texture);
        for y in 0..height {
            for x in 0..width {
                strip.set_pixel(k * width + x, y, view.pixel(x, y));
            }
        }
    }
    strip.save_png(out_path)
}

fn rotate_about_y(mesh: &HeadMesh, angle: f64) -> HeadMesh {
    let (s, c) = angle.sin_cos();
    let mut out = mesh.clone();
    for v in &mut out.vertices {
        let x = c * v[0] + s * v[2];
        let z = -s * v[0] + c * v[2];
        v[0] = x;
        v[2] = z;
    }
    out
}
