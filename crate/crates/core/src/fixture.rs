//! Deterministic synthetic fixture bundles: a UV-unwrapped ellipsoid head
//! with a mirror-symmetric atlas, a ground-truth deformation and texture, a
//! camera, the rendered portrait, projected landmarks, label maps, a template
//! albedo and a small tagged asset catalog. Everything needed to run the full
//! pipeline plus the ground truth needed to score it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assetmatch::{AssetCatalog, AssetCategory, AssetEntry};
use crate::error::{Error, Result};
use crate::geomfit::{self, GeomFitConfig};
use crate::image::Image;
use crate::mesh::{CameraFile, CameraPose, HeadMesh, Intrinsics, Landmark, LandmarkSet};
use crate::pipeline::{PipelineConfig, PipelinePaths};
use crate::raster;
use crate::texcomplete::{RegionLabel, RegionLabelMap, TexCompleteConfig};
use crate::texfit::TexFitConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureOptions {
    pub seed: u64,
    /// Longitude/latitude grid side; also the fixture's triplane resolution.
    pub grid: usize,
    pub image_size: usize,
    pub texture_resolution: usize,
    pub landmark_count: usize,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        FixtureOptions {
            seed: 0,
            grid: 64,
            image_size: 512,
            texture_resolution: 1024,
            landmark_count: 431,
        }
    }
}

/// Everything a fixture bundle contains, with paths relative to its
/// directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub seed: u64,
    pub grid: usize,
    pub image_size: usize,
    pub texture_resolution: usize,
    pub bbox_diagonal: f64,
    /// Landmark RMSE of the undeformed template under the ground-truth
    /// camera: how far the fit has to travel.
    pub initial_rmse_px: f64,
    pub files: BTreeMap<String, String>,
}

impl FixtureManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::mesh::read_json(path.as_ref())
    }

    pub fn path(&self, dir: &Path, key: &str) -> PathBuf {
        dir.join(self.files.get(key).map(String::as_str).unwrap_or(key))
    }
}

const RADII: [f64; 3] = [0.75, 1.0, 0.85];
pub const CAMERA_DISTANCE: f64 = 2.6;

/// Ellipsoid template: grid x grid vertices, u along longitude (seam at the
/// back, duplicated), v along latitude, +Y up, facing +Z. UVs land exactly on
/// the texel lattice of a grid-resolution triplane, and the atlas is
/// mirror-symmetric about u = 0.5 with X antisymmetric.
pub fn template_mesh(grid: usize) -> HeadMesh {
    assert!(grid >= 8);
    let g1 = (grid - 1) as f64;
    let mut vertices = Vec::with_capacity(grid * grid);
    let mut uvs = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        let v = i as f64 / g1;
        for j in 0..grid {
            let u = j as f64 / g1;
            vertices.push(surface_point(u, v));
            uvs.push([u, v]);
        }
    }
    let mut faces = Vec::new();
    let vid = |i: usize, j: usize| (i * grid + j) as u32;
    for i in 0..grid - 1 {
        for j in 0..grid - 1 {
            let a = vid(i, j);
            let b = vid(i, j + 1);
            let c = vid(i + 1, j);
            let d = vid(i + 1, j + 1);
            // skip triangles whose three corners include two pole vertices
            if i > 0 {
                faces.push([a, b, d]);
            }
            if i + 1 < grid - 1 {
                faces.push([a, d, c]);
            }
        }
    }
    HeadMesh { vertices, uvs, faces }
}

/// Ellipsoid surface point for (u, v); poles are exact.
fn surface_point(u: f64, v: f64) -> [f64; 3] {
    if v <= 0.0 {
        return [0.0, -RADII[1], 0.0];
    }
    if v >= 1.0 {
        return [0.0, RADII[1], 0.0];
    }
    let theta = std::f64::consts::PI * (1.0 - v);
    let phi = 2.0 * std::f64::consts::PI * u + std::f64::consts::PI;
    let rho = theta.sin();
    [
        RADII[0] * rho * phi.sin(),
        RADII[1] * theta.cos(),
        RADII[2] * rho * phi.cos(),
    ]
}

/// Smooth ground-truth deformation: a handful of Gaussian bumps, directed
/// mostly in the image plane (X/Y); the viewing-ray component of a
/// single-view landmark fit is unobservable, so it is kept small.
fn deformation_bumps(rng: &mut ChaCha8Rng) -> Vec<([f64; 3], [f64; 3], f64)> {
    let mut bumps = Vec::new();
    for _ in 0..6 {
        let u = rng.gen_range(0.30..0.70);
        let v = rng.gen_range(0.30..0.80);
        let center = surface_point(u, v);
        let mut dir = [
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-0.12..0.12f64),
        ];
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if n < 1e-6 {
            dir = [1.0, 0.0, 0.0];
        } else {
            dir = dir.map(|d| d / n);
        }
        let amp = rng.gen_range(0.035..0.075);
        let sigma = rng.gen_range(0.28..0.45f64);
        bumps.push((center, [dir[0] * amp, dir[1] * amp, dir[2] * amp], sigma));
    }
    bumps
}

fn deform(mesh: &HeadMesh, bumps: &[([f64; 3], [f64; 3], f64)]) -> HeadMesh {
    let mut out = mesh.clone();
    for vertex in &mut out.vertices {
        let mut delta = [0.0; 3];
        for (center, dir, sigma) in bumps {
            let d2 = (vertex[0] - center[0]).powi(2)
                + (vertex[1] - center[1]).powi(2)
                + (vertex[2] - center[2]).powi(2);
            let w = (-d2 / (2.0 * sigma * sigma)).exp();
            for c in 0..3 {
                delta[c] += dir[c] * w;
            }
        }
        for c in 0..3 {
            vertex[c] += delta[c];
        }
    }
    out
}

/// Ground-truth camera: on +Z looking down -Z (rotation pi about Y), head
/// centered in frame.
pub fn gt_camera(image_size: usize) -> (CameraPose, Intrinsics) {
    (
        CameraPose {
            rotation: [0.0, std::f64::consts::PI, 0.0],
            translation: [0.0, 0.0, CAMERA_DISTANCE],
        },
        Intrinsics::default_for_image(image_size as u32, image_size as u32),
    )
}

struct Feature {
    label: RegionLabel,
    center: [f64; 2],
    radii: [f64; 2],
    color: [f64; 3],
}

fn features() -> Vec<Feature> {
    vec![
        Feature {
            label: RegionLabel::LeftEye,
            center: [0.42, 0.64],
            radii: [0.035, 0.020],
            color: [0.92, 0.92, 0.90],
        },
        Feature {
            label: RegionLabel::RightEye,
            center: [0.58, 0.64],
            radii: [0.035, 0.020],
            color: [0.92, 0.92, 0.90],
        },
        Feature {
            label: RegionLabel::Eyebrows,
            center: [0.42, 0.705],
            radii: [0.045, 0.012],
            color: [0.24, 0.16, 0.11],
        },
        Feature {
            label: RegionLabel::Eyebrows,
            center: [0.58, 0.705],
            radii: [0.045, 0.012],
            color: [0.24, 0.16, 0.11],
        },
        Feature {
            label: RegionLabel::Nostrils,
            center: [0.47, 0.50],
            radii: [0.012, 0.010],
            color: [0.42, 0.28, 0.22],
        },
        Feature {
            label: RegionLabel::Nostrils,
            center: [0.53, 0.50],
            radii: [0.012, 0.010],
            color: [0.42, 0.28, 0.22],
        },
        Feature {
            label: RegionLabel::Mouth,
            center: [0.50, 0.42],
            radii: [0.050, 0.020],
            color: [0.62, 0.26, 0.26],
        },
    ]
}

const FACE_CENTER: [f64; 2] = [0.5, 0.55];
const FACE_RADII: [f64; 2] = [0.22, 0.32];
const EAR_CENTERS: [[f64; 2]; 2] = [[0.20, 0.55], [0.80, 0.55]];
const EAR_RADII: [f64; 2] = [0.030, 0.070];

fn ellipse_dist(u: f64, v: f64, center: [f64; 2], radii: [f64; 2]) -> f64 {
    let du = (u - center[0]) / radii[0];
    let dv = (v - center[1]) / radii[1];
    (du * du + dv * dv).sqrt()
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Sharp semantic label at a UV position.
fn label_at(u: f64, v: f64) -> RegionLabel {
    for f in features() {
        if ellipse_dist(u, v, f.center, f.radii) <= 1.0 {
            return f.label;
        }
    }
    for ear in EAR_CENTERS {
        if ellipse_dist(u, v, ear, EAR_RADII) <= 1.0 {
            return RegionLabel::Ears;
        }
    }
    if v < 0.15 {
        return RegionLabel::Neck;
    }
    if ellipse_dist(u, v, FACE_CENTER, FACE_RADII) <= 1.0 {
        return RegionLabel::Skin;
    }
    RegionLabel::Background
}

pub fn label_map(resolution: usize) -> RegionLabelMap {
    let mut map = RegionLabelMap::new(resolution, resolution);
    for row in 0..resolution {
        let v = 1.0 - (row as f64 + 0.5) / resolution as f64;
        for col in 0..resolution {
            let u = (col as f64 + 0.5) / resolution as f64;
            map.set(col, row, label_at(u, v));
        }
    }
    map
}

/// Smooth texture paint shared by the ground-truth texture and the template
/// albedo; feature edges are soft so the texture stays representable across
/// the multi-resolution fit.
fn paint_texture(resolution: usize, base: [f64; 3], wobble: f64) -> Image {
    let mut img = Image::new(resolution, resolution);
    let feats = features();
    for row in 0..resolution {
        let v = 1.0 - (row as f64 + 0.5) / resolution as f64;
        for col in 0..resolution {
            let u = (col as f64 + 0.5) / resolution as f64;
            let tau = std::f64::consts::TAU;
            let mut rgb = [
                base[0] + wobble * (tau * (2.0 * u + 0.3)).sin() * (tau * 1.5 * v).cos(),
                base[1] + wobble * (tau * (1.5 * u)).cos() * (tau * (2.5 * v + 0.1)).sin(),
                base[2] + wobble * (tau * (2.5 * u + 0.7)).sin() * (tau * 2.0 * v).sin(),
            ];
            for f in &feats {
                let d = ellipse_dist(u, v, f.center, f.radii);
                let w = 1.0 - smoothstep(0.75, 1.15, d);
                if w > 0.0 {
                    for c in 0..3 {
                        rgb[c] = rgb[c] + w * (f.color[c] - rgb[c]);
                    }
                }
            }
            // gentle darkening toward the neck
            let neck = 1.0 - smoothstep(0.12, 0.22, v);
            for c in 0..3 {
                rgb[c] *= 1.0 - 0.12 * neck;
                rgb[c] = rgb[c].clamp(0.0, 1.0);
            }
            img.set_pixel(col, row, rgb);
        }
    }
    img
}

pub fn gt_texture(resolution: usize) -> Image {
    paint_texture(resolution, [0.78, 0.60, 0.50], 0.055)
}

pub fn template_albedo(resolution: usize) -> Image {
    paint_texture(resolution, [0.74, 0.58, 0.52], 0.02)
}

/// Front-hemisphere landmark vertices: well inside the silhouette, excluding
/// pole rows, evenly subsampled to the requested count.
pub fn landmark_vertices(mesh: &HeadMesh, grid: usize, count: usize) -> Vec<u32> {
    let mut candidates = Vec::new();
    for (vid, p) in mesh.vertices.iter().enumerate() {
        let row = vid / grid;
        if row == 0 || row == grid - 1 {
            continue;
        }
        if p[2] > 0.30 * RADII[2] {
            candidates.push(vid as u32);
        }
    }
    if candidates.len() <= count {
        return candidates;
    }
    (0..count).map(|k| candidates[k * candidates.len() / count]).collect()
}

fn catalog_words() -> Vec<(AssetCategory, Vec<&'static str>, &'static str)> {
    vec![
        (AssetCategory::Hair, vec!["short", "long", "curly", "straight", "wavy", "buzzcut"], "length"),
        (AssetCategory::Garment, vec!["tshirt", "suit", "hoodie", "dress", "jacket"], "style"),
        (AssetCategory::Hat, vec!["cap", "beanie", "fedora", "none"], "type"),
        (AssetCategory::Moustache, vec!["none", "thin", "full", "goatee"], "shape"),
        (AssetCategory::Glasses, vec!["none", "round", "square", "sunglasses"], "frame"),
        (AssetCategory::Eyelashes, vec!["short", "medium", "long"], "length"),
        (AssetCategory::Iris, vec!["brown", "blue", "green", "gray"], "color"),
        (AssetCategory::Body, vec!["slim", "regular"], "build"),
    ]
}

pub fn demo_catalog(rng: &mut ChaCha8Rng, dim: usize) -> AssetCatalog {
    let mut entries = Vec::new();
    for (category, words, attr_key) in catalog_words() {
        for (k, word) in words.iter().enumerate() {
            let embedding: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut attributes = BTreeMap::new();
            attributes.insert(attr_key.to_string(), word.to_string());
            entries.push(AssetEntry {
                id: format!("{}_{:02}", category.name(), k),
                category,
                label_text: format!("{word} {}", category.name()),
                attributes,
                embedding,
            });
        }
    }
    AssetCatalog { embedding_dim: dim, entries }
}

fn demo_query(
    rng: &mut ChaCha8Rng,
    catalog: &AssetCatalog,
) -> BTreeMap<AssetCategory, Vec<f64>> {
    let mut out = BTreeMap::new();
    for category in [
        AssetCategory::Hair,
        AssetCategory::Garment,
        AssetCategory::Glasses,
        AssetCategory::Iris,
        AssetCategory::Body,
    ] {
        let choices: Vec<&AssetEntry> =
            catalog.entries.iter().filter(|e| e.category == category).collect();
        let pick = choices[rng.gen_range(0..choices.len())];
        let query: Vec<f64> =
            pick.embedding.iter().map(|v| v + rng.gen_range(-0.08..0.08)).collect();
        out.insert(category, query);
    }
    out
}

/// Generate a complete fixture bundle under `out_dir`. Deterministic: the
/// same seed produces bit-identical files.
pub fn make_fixture(options: &FixtureOptions, out_dir: &Path) -> Result<FixtureManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let template = template_mesh(options.grid);
    template.validate()?;
    let bumps = deformation_bumps(&mut rng);
    let gt_mesh = deform(&template, &bumps);
    let (gt_pose, intr) = gt_camera(options.image_size);

    // perturbed starting pose for the joint pipeline fit
    let init_pose = CameraPose {
        rotation: [
            gt_pose.rotation[0] + rng.gen_range(-0.02..0.02),
            gt_pose.rotation[1] + rng.gen_range(-0.02..0.02),
            gt_pose.rotation[2] + rng.gen_range(-0.02..0.02),
        ],
        translation: [
            gt_pose.translation[0] + rng.gen_range(-0.02..0.02),
            gt_pose.translation[1] + rng.gen_range(-0.02..0.02),
            gt_pose.translation[2] + rng.gen_range(-0.02..0.02),
        ],
    };

    // landmarks: project the deformed vertices with the ground-truth camera
    let lmk_vertices = landmark_vertices(&template, options.grid, options.landmark_count);
    let mut landmarks = Vec::with_capacity(lmk_vertices.len());
    for &vid in &lmk_vertices {
        let p = geomfit::project(gt_mesh.vertices[vid as usize], &gt_pose, &intr)
            .map_err(|e| Error::InvalidMesh(format!("fixture landmark {vid}: {e}")))?;
        landmarks.push(Landmark { x: p[0], y: p[1], vertex_id: vid });
    }
    let landmark_set = LandmarkSet {
        image_width: options.image_size as u32,
        image_height: options.image_size as u32,
        landmarks,
    };

    // Ground-truth texture and portrait. The texture ships as f32, so
    // quantize before rendering: the stored portrait must equal a re-render
    // from the stored texture bit-exactly.
    let mut texture = gt_texture(options.texture_resolution);
    for v in texture.data_mut().iter_mut() {
        *v = *v as f32 as f64;
    }
    let buffer =
        raster::rasterize(&gt_mesh, &gt_pose, &intr, options.image_size, options.image_size);
    let portrait = raster::render(&buffer, &texture);

    // label maps: UV space, plus the portrait labels via nearest-texel lookup
    let labels = label_map(options.texture_resolution);
    let mut portrait_labels = RegionLabelMap::new(options.image_size, options.image_size);
    for y in 0..options.image_size {
        for x in 0..options.image_size {
            if let Some(p) = buffer.pixel(x, y) {
                let res = options.texture_resolution;
                let col =
                    ((p.uv[0] * res as f64).floor().max(0.0) as usize).min(res - 1);
                let row =
                    (((1.0 - p.uv[1]) * res as f64).floor().max(0.0) as usize).min(res - 1);
                portrait_labels.set(x, y, labels.get(col, row));
            }
        }
    }

    let albedo = template_albedo(options.texture_resolution);
    let catalog = demo_catalog(&mut rng, 16);
    catalog.validate()?;
    let query = demo_query(&mut rng, &catalog);

    // write the bundle
    let mut files = BTreeMap::new();
    let mut record = |key: &str, name: &str| {
        files.insert(key.to_string(), name.to_string());
        out_dir.join(name)
    };

    crate::mesh::save_mesh(&template, record("template_mesh", "template.obj"))?;
    crate::mesh::save_mesh(&gt_mesh, record("gt_mesh", "gt_mesh.obj"))?;
    landmark_set.save(record("landmarks", "landmarks.json"))?;
    CameraFile::new(intr, init_pose).save(record("camera", "camera.json"))?;
    CameraFile::new(intr, gt_pose).save(record("camera_gt", "camera_gt.json"))?;
    portrait.save_f32(record("portrait", "portrait.f32"))?;
    portrait.save_png(record("portrait_png", "portrait.png"))?;
    labels.save_png(record("labels", "labels.png"))?;
    portrait_labels.save_png(record("portrait_labels", "portrait_labels.png"))?;
    texture.save_f32(record("gt_texture", "gt_texture.f32"))?;
    albedo.save_f32(record("template_albedo", "template_albedo.f32"))?;
    albedo.save_png(record("template_albedo_png", "template_albedo.png"))?;
    catalog.save(record("catalog", "catalog.json"))?;
    crate::mesh::write_json(&record("query", "query.json"), &query)?;

    let config = PipelineConfig {
        paths: PipelinePaths {
            template_mesh: "template.obj".into(),
            landmarks: "landmarks.json".into(),
            camera: "camera.json".into(),
            portrait: "portrait.f32".into(),
            portrait_labels: "portrait_labels.png".into(),
            labels: "labels.png".into(),
            template_albedo: "template_albedo.f32".into(),
            catalog: "catalog.json".into(),
            query: "query.json".into(),
        },
        geomfit: GeomFitConfig {
            triplane_resolution: options.grid,
            ..GeomFitConfig::default()
        },
        texfit: TexFitConfig::default(),
        texcomplete: TexCompleteConfig::default(),
    };
    let config_path = record("config", "config.toml");
    config.save_toml(&config_path)?;

    let manifest = FixtureManifest {
        seed: options.seed,
        grid: options.grid,
        image_size: options.image_size,
        texture_resolution: options.texture_resolution,
        bbox_diagonal: gt_mesh.bbox_diagonal(),
        initial_rmse_px: geomfit::landmark_rmse(&template, &landmark_set, &gt_pose, &intr),
        files,
    };
    crate::mesh::write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
