//! Fixture-bundle self-consistency and end-to-end pipeline behavior on a
//! reduced-size bundle: determinism, artifact presence, stage isolation and
//! preview consistency.

mod common;

use std::collections::BTreeMap;
use std::path::Path;

use headfit_core::fixture::{self, FixtureOptions};
use headfit_core::geomfit;
use headfit_core::image::Image;
use headfit_core::mesh::{self, CameraFile, LandmarkSet};
use headfit_core::pipeline::{self, artifact, PipelineConfig};
use headfit_core::raster;

fn small_options(seed: u64) -> FixtureOptions {
    FixtureOptions {
        seed,
        grid: 32,
        image_size: 128,
        texture_resolution: 256,
        landmark_count: 200,
    }
}

fn dir_digest(dir: &Path) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            let bytes = std::fs::read(&path).unwrap();
            // FNV-1a
            let mut hash = 0xcbf29ce484222325u64;
            for b in bytes {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
            out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), hash);
        }
    }
    out
}

#[test]
fn same_seed_produces_bit_identical_bundles() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    fixture::make_fixture(&small_options(7), &a).unwrap();
    fixture::make_fixture(&small_options(7), &b).unwrap();
    assert_eq!(dir_digest(&a), dir_digest(&b));

    let c = tmp.path().join("c");
    fixture::make_fixture(&small_options(8), &c).unwrap();
    assert_ne!(dir_digest(&a), dir_digest(&c), "different seeds must differ");
}

#[test]
fn gt_landmarks_reproject_exactly_and_portrait_is_self_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture::make_fixture(&small_options(0), tmp.path()).unwrap();

    let gt_mesh = mesh::load_mesh(manifest.path(tmp.path(), "gt_mesh")).unwrap();
    let landmarks = LandmarkSet::load(manifest.path(tmp.path(), "landmarks")).unwrap();
    let (intr, gt_pose) = CameraFile::load(manifest.path(tmp.path(), "camera_gt"))
        .unwrap()
        .split();
    let rmse = geomfit::landmark_rmse(&gt_mesh, &landmarks, &gt_pose, &intr);
    assert_eq!(rmse, 0.0, "landmarks are projections of the gt mesh by construction");

    // re-render the portrait from ground truth; must match the stored floats
    let texture = Image::load_f32(manifest.path(tmp.path(), "gt_texture")).unwrap();
    let buffer = raster::rasterize(&gt_mesh, &gt_pose, &intr, 128, 128);
    let rendered = raster::render(&buffer, &texture);
    let stored = Image::load_f32(manifest.path(tmp.path(), "portrait")).unwrap();
    for (a, b) in rendered.data().iter().zip(stored.data()) {
        assert_eq!(*a as f32, *b as f32, "portrait must be bit-exact at f32");
    }

    // the template must start meaningfully off
    assert!(manifest.initial_rmse_px > 2.0, "initial rmse {}", manifest.initial_rmse_px);
}

#[test]
fn pipeline_produces_all_artifact_classes_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture_dir = tmp.path().join("fixture");
    let manifest = fixture::make_fixture(&small_options(1), &fixture_dir).unwrap();

    let mut config = PipelineConfig::load_toml(manifest.path(&fixture_dir, "config")).unwrap();
    // shrink the fitting work for the test
    config.geomfit.iterations = 150;
    config.texfit.hierarchy = vec![32, 128, 256];
    config.texfit.iterations_per_level = 60;

    let out1 = tmp.path().join("run1");
    let report = pipeline::run_pipeline(&config, &out1).unwrap();

    for name in [
        artifact::FITTED_MESH,
        artifact::FITTED_CAMERA,
        artifact::GEOMFIT_REPORT,
        artifact::GEOMFIT_TRACE,
        artifact::TEXTURE_F32,
        artifact::TEXTURE_PNG,
        artifact::TEXFIT_REPORT,
        artifact::ALBEDO_F32,
        artifact::ALBEDO_PNG,
        artifact::ASSETS,
        artifact::PREVIEW,
        artifact::TIMINGS,
    ] {
        assert!(out1.join(name).is_file(), "missing artifact {name}");
    }

    // stage wall clocks present and consistent
    assert_eq!(report.stages.len(), 5);
    let sum: f64 = report.stages.iter().map(|s| s.seconds).sum();
    assert!(sum <= report.total_seconds + 1e-9, "stage times exceed total");

    // rerun: float artifacts bit-identical
    let out2 = tmp.path().join("run2");
    pipeline::run_pipeline(&config, &out2).unwrap();
    for name in [artifact::FITTED_MESH, artifact::TEXTURE_F32, artifact::ALBEDO_F32] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between runs");
    }

    // fitted geometry actually explains the landmarks
    let fitted = mesh::load_mesh(out1.join(artifact::FITTED_MESH)).unwrap();
    let landmarks = LandmarkSet::load(manifest.path(&fixture_dir, "landmarks")).unwrap();
    let (intr, pose) = CameraFile::load(out1.join(artifact::FITTED_CAMERA)).unwrap().split();
    let rmse = geomfit::landmark_rmse(&fitted, &landmarks, &pose, &intr);
    println!("pipeline rmse {rmse:.3} px (initial {:.2})", manifest.initial_rmse_px);
    assert!(rmse < 1.0, "joint fit rmse {rmse}");
}

#[test]
fn stage_isolation_extract_texture_reproduces_pipeline_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture_dir = tmp.path().join("fixture");
    let manifest = fixture::make_fixture(&small_options(2), &fixture_dir).unwrap();
    let mut config = PipelineConfig::load_toml(manifest.path(&fixture_dir, "config")).unwrap();
    config.geomfit.iterations = 100;
    // hierarchy must end at the label-map resolution for the completion stage
    config.texfit.hierarchy = vec![64, 256];
    config.texfit.iterations_per_level = 40;

    let out = tmp.path().join("out");
    pipeline::run_pipeline(&config, &out).unwrap();

    // standalone texture extraction from the pipeline's intermediate files
    let fitted = mesh::load_mesh(out.join(artifact::FITTED_MESH)).unwrap();
    let (intr, pose) = CameraFile::load(out.join(artifact::FITTED_CAMERA)).unwrap().split();
    let portrait = Image::load(&config.paths.portrait).unwrap();
    let (texture, _) =
        headfit_core::texfit::fit_texture(&fitted, &pose, &intr, &portrait, &config.texfit)
            .unwrap();
    let from_pipeline = Image::load_f32(out.join(artifact::TEXTURE_F32)).unwrap();
    for (a, b) in texture.data().iter().zip(from_pipeline.data()) {
        assert_eq!(*a as f32, *b as f32);
    }
}

#[test]
fn preview_first_view_matches_portrait_for_ground_truth_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture::make_fixture(&small_options(3), tmp.path()).unwrap();
    let gt_mesh = mesh::load_mesh(manifest.path(tmp.path(), "gt_mesh")).unwrap();
    let texture = Image::load_f32(manifest.path(tmp.path(), "gt_texture")).unwrap();
    let (intr, gt_pose) =
        CameraFile::load(manifest.path(tmp.path(), "camera_gt")).unwrap().split();

    let preview_path = tmp.path().join("preview.png");
    pipeline::render_preview(&gt_mesh, &texture, &gt_pose, &intr, 128, 128, &preview_path)
        .unwrap();
    let preview = Image::load_png(&preview_path).unwrap();
    assert_eq!(preview.width(), 4 * 128);

    // first view equals the stored portrait PNG (same render path, same
    // 8-bit quantization)
    let portrait = Image::load_png(manifest.path(tmp.path(), "portrait_png")).unwrap();
    for y in 0..128 {
        for x in 0..128 {
            assert_eq!(preview.pixel(x, y), portrait.pixel(x, y), "pixel ({x},{y})");
        }
    }
    // the other views must not be empty
    let mut lit = 0;
    for y in 0..128 {
        for x in 128..512 {
            if preview.pixel(x, y) != [0.0, 0.0, 0.0] {
                lit += 1;
            }
        }
    }
    assert!(lit > 1000, "turntable views look empty ({lit} lit pixels)");
}

#[test]
fn missing_portrait_path_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture::make_fixture(&small_options(4), tmp.path()).unwrap();
    let mut config = PipelineConfig::load_toml(manifest.path(tmp.path(), "config")).unwrap();
    config.paths.portrait = tmp.path().join("no_such_portrait.f32");
    let err = pipeline::run_pipeline(&config, &tmp.path().join("out")).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("portrait"), "error should name the field: {msg}");
    assert!(err.is_config());
}

#[test]
fn missing_config_field_is_named_in_toml_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("broken.toml");
    std::fs::write(
        &path,
        "[paths]\ntemplate_mesh = \"a.obj\"\nlandmarks = \"l.json\"\n",
    )
    .unwrap();
    let err = PipelineConfig::load_toml(&path).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("camera") || msg.contains("missing field"), "{msg}");
}
