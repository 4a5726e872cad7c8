//! Texture-fit oracles: synthetic round-trip PSNR, the dense least-squares
//! cross-check at 32x32 with residual orthogonality, untouched-texel
//! preservation, and the multi-resolution-vs-single-level comparison.

mod common;

use common::{psnr_on_texels, render_matrix};
use headfit_core::fixture;
use headfit_core::image::Image;
use headfit_core::raster;
use headfit_core::texfit::{self, TexFitConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small head scene: ellipsoid template, frontal camera.
fn scene(grid: usize, size: usize) -> (headfit_core::HeadMesh, raster::RasterBuffer) {
    let mesh = fixture::template_mesh(grid);
    let (pose, intr) = fixture::gt_camera(size);
    let buffer = raster::rasterize(&mesh, &pose, &intr, size, size);
    (mesh, buffer)
}

#[test]
fn synthetic_texture_recovery_psnr() {
    let (_, buffer) = scene(32, 192);
    let gt = fixture::gt_texture(256);
    let target = raster::render(&buffer, &gt);
    let config = TexFitConfig {
        hierarchy: vec![32, 128, 256],
        iterations_per_level: 200,
        ..TexFitConfig::default()
    };
    let (recovered, report) = texfit::fit_texture_with_buffer(&buffer, &target, &config).unwrap();

    let weights = texfit::coverage_weights(&buffer, 256);
    let texels: Vec<usize> =
        (0..weights.len()).filter(|&t| weights[t] > 0.05).collect();
    let psnr = psnr_on_texels(&recovered, &gt, &texels);
    println!(
        "recovery psnr {psnr:.2} dB on {} texels, final loss {:.4}",
        texels.len(),
        report.final_loss
    );
    assert!(psnr > 35.0, "psnr {psnr:.2} dB");
}

#[test]
fn alpha_zero_fit_matches_dense_normal_equations() {
    let (_, buffer) = scene(24, 96);
    // target: render of a texture, plus deterministic noise so the optimum
    // has a nonzero residual (the unsquared norm is smooth there)
    let gt = fixture::gt_texture(64);
    let mut target = raster::render(&buffer, &gt);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for v in target.data_mut().iter_mut() {
        *v += rng.gen_range(-0.02..0.02);
    }

    let matrix = render_matrix(&buffer, 32);
    let solution = matrix.normal_equations_solution(&target);
    let mut solution_tex = Image::new(32, 32);
    for (k, &t) in matrix.touched.iter().enumerate() {
        solution_tex.data_mut()[t * 3..t * 3 + 3].copy_from_slice(&solution[k]);
    }
    let loss_star = matrix.frobenius_loss(&solution_tex, &target);
    let orth_star = matrix.residual_orthogonality(&solution_tex, &target);
    println!("dense solution: loss {loss_star:.6}, orthogonality {orth_star:.2e}");
    assert!(orth_star < 1e-8, "dense solve must be orthogonal");

    let config = TexFitConfig {
        hierarchy: vec![32],
        alpha: 0.0,
        iterations_per_level: 4000,
        learning_rate: 3e-2,
        lr_decay: 1e-4,
        ..TexFitConfig::default()
    };
    let (fitted, _) = texfit::fit_texture_with_buffer(&buffer, &target, &config).unwrap();
    let loss_fit = matrix.frobenius_loss(&fitted, &target);
    let orth_fit = matrix.residual_orthogonality(&fitted, &target);
    println!("iterative fit: loss {loss_fit:.6}, orthogonality {orth_fit:.2e}");
    assert!(
        loss_fit <= loss_star * 1.01,
        "fit loss {loss_fit} more than 1% above dense optimum {loss_star}"
    );
    assert!(orth_fit < 1e-4, "residual orthogonality {orth_fit:.3e}");
}

#[test]
fn untouched_texels_keep_their_initialization() {
    let (_, buffer) = scene(16, 64);
    let gt = fixture::gt_texture(64);
    let target = raster::render(&buffer, &gt);
    let config = TexFitConfig {
        hierarchy: vec![64],
        iterations_per_level: 30,
        ..TexFitConfig::default()
    };
    let (fitted, _) = texfit::fit_texture_with_buffer(&buffer, &target, &config).unwrap();

    // level-0 initialization is the covered-pixel mean color of the target
    let coverage = buffer.coverage_mask();
    let mean = target.mean_color(Some(&coverage));
    let weights = texfit::coverage_weights(&buffer, 64);
    let mut untouched = 0;
    for t in 0..64 * 64 {
        if weights[t] == 0.0 {
            let px = [
                fitted.data()[t * 3],
                fitted.data()[t * 3 + 1],
                fitted.data()[t * 3 + 2],
            ];
            assert_eq!(px, mean, "untouched texel {t} moved");
            untouched += 1;
        }
    }
    assert!(untouched > 0, "fixture should leave some texels untouched");
}

#[test]
fn all_black_target_converges_to_black() {
    let (_, buffer) = scene(16, 64);
    let target = Image::new(64, 64);
    let config = TexFitConfig {
        hierarchy: vec![16, 32],
        iterations_per_level: 150,
        ..TexFitConfig::default()
    };
    let (fitted, report) = texfit::fit_texture_with_buffer(&buffer, &target, &config).unwrap();
    let weights = texfit::coverage_weights(&buffer, 32);
    for t in 0..32 * 32 {
        if weights[t] > 0.05 {
            for c in 0..3 {
                assert!(
                    fitted.data()[t * 3 + c].abs() < 5e-3,
                    "texel {t} channel {c} = {}",
                    fitted.data()[t * 3 + c]
                );
            }
        }
    }
    // black start means zero loss from iteration 0
    assert!(report.final_loss < 1e-9);
}

#[test]
fn per_level_loss_is_mostly_non_increasing() {
    let (_, buffer) = scene(24, 128);
    let gt = fixture::gt_texture(128);
    let target = raster::render(&buffer, &gt);
    let config = TexFitConfig {
        hierarchy: vec![32, 64, 128],
        iterations_per_level: 120,
        ..TexFitConfig::default()
    };
    let (_, report) = texfit::fit_texture_with_buffer(&buffer, &target, &config).unwrap();
    for level in &report.levels {
        let lo = level.losses.iter().copied().fold(f64::INFINITY, f64::min);
        let tol = 1e-2 * (level.losses[0] - lo).max(0.0);
        let ok = level
            .losses
            .windows(2)
            .filter(|w| w[1] <= w[0] + tol)
            .count();
        let frac = ok as f64 / (level.losses.len() - 1) as f64;
        println!("level {}: non-increasing fraction {frac:.3}", level.resolution);
        assert!(frac >= 0.95, "level {} fraction {frac:.3}", level.resolution);
    }
}

#[test]
fn multiresolution_beats_single_level_at_equal_budget() {
    let (_, buffer) = scene(32, 192);
    let gt = fixture::gt_texture(256);
    let target = raster::render(&buffer, &gt);
    let multi = TexFitConfig {
        hierarchy: vec![32, 128, 256],
        iterations_per_level: 100,
        ..TexFitConfig::default()
    };
    let single = TexFitConfig {
        hierarchy: vec![256],
        iterations_per_level: 300, // same total budget
        ..TexFitConfig::default()
    };
    let coverage = buffer.coverage_mask();
    let (tex_multi, _) = texfit::fit_texture_with_buffer(&buffer, &target, &multi).unwrap();
    let (tex_single, _) = texfit::fit_texture_with_buffer(&buffer, &target, &single).unwrap();
    let loss = |tex: &Image| {
        let rendered = raster::render(&buffer, tex);
        texfit::texture_loss(&rendered, &target, &coverage, multi.alpha, false).unwrap().0
    };
    let l_multi = loss(&tex_multi);
    let l_single = loss(&tex_single);
    println!("multi {l_multi:.4} vs single {l_single:.4}");
    assert!(
        l_multi <= 1.05 * l_single,
        "multi-resolution ({l_multi}) worse than 1.05x single-level ({l_single})"
    );
}

#[test]
fn fit_is_bit_deterministic() {
    let (_, buffer) = scene(16, 64);
    let gt = fixture::gt_texture(64);
    let target = raster::render(&buffer, &gt);
    let config = TexFitConfig {
        hierarchy: vec![16, 48],
        iterations_per_level: 60,
        ..TexFitConfig::default()
    };
    let (a, ra) = texfit::fit_texture_with_buffer(&buffer, &target, &config).unwrap();
    let (b, rb) = texfit::fit_texture_with_buffer(&buffer, &target, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.final_loss.to_bits(), rb.final_loss.to_bits());
}
