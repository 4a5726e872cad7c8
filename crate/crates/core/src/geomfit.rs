//! Joint optimization of the triplane and camera pose against dense 2D
//! landmarks.
//!
//! The loss is the sum of unsquared pixel distances between each landmark and
//! the projection of its vertex (read from the triplane), plus weighted total
//! variation and symmetry regularizers on the triplane image. All gradients
//! are analytic, chained through the projection, the Rodrigues rotation and
//! the triplane lookup. Optimization is first-order adaptive-moment over the
//! valid texel values and the six pose parameters, with cosine-annealed
//! learning rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Vec3};
use crate::mesh::{CameraPose, HeadMesh, Intrinsics, LandmarkSet};
use crate::optim::{self, cosine_lr, Adam};
use crate::triplane::{self, TriplaneMap};

/// Minimum camera-space depth for a projectable point.
pub const MIN_DEPTH: f64 = 1e-6;

/// Landmarks needed for pose observability.
pub const MIN_LANDMARKS: usize = 6;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GeomFitConfig {
    /// Weight of the total-variation regularizer.
    pub lambda_tv: f64,
    /// Weight of the symmetry regularizer.
    pub lambda_sym: f64,
    pub iterations: usize,
    pub lr_triplane: f64,
    pub lr_camera: f64,
    /// Adam (beta1, beta2).
    pub betas: (f64, f64),
    pub epsilon: f64,
    /// Cosine-anneal floor as a fraction of the initial rate; 1.0 = constant.
    pub lr_decay: f64,
    /// Use squared pixel residuals instead of the default unsquared norm.
    pub squared_landmarks: bool,
    /// Triplane side length used to encode the mesh.
    pub triplane_resolution: usize,
}

impl Default for GeomFitConfig {
    fn default() -> Self {
        GeomFitConfig {
            lambda_tv: 1.0,
            lambda_sym: 0.1,
            iterations: 500,
            lr_triplane: 1e-3,
            lr_camera: 2e-3,
            betas: (0.9, 0.999),
            epsilon: 1e-8,
            lr_decay: 1e-3,
            squared_landmarks: false,
            triplane_resolution: triplane::DEFAULT_RESOLUTION,
        }
    }
}

/// Loss values for one evaluation; `total = lmk + lambda_tv*tv + lambda_sym*sym`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub lmk: f64,
    pub tv: f64,
    pub sym: f64,
}

/// Outcome of [`fit_geometry`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    /// Loss at the start of each executed iteration.
    pub trace: Vec<LossBreakdown>,
    /// Root-mean-square landmark reprojection error, pixels, after the fit.
    pub final_rmse_px: f64,
    pub iterations: usize,
    /// Landmarks excluded because their vertex sat behind the camera, as
    /// observed on the final evaluation.
    pub skipped_landmarks: usize,
}

impl FitReport {
    /// Per-iteration trace as delimited text for plotting.
    pub fn trace_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("iteration,total,lmk,tv,sym\n");
        for (i, l) in self.trace.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{},{}", l.total, l.lmk, l.tv, l.sym);
        }
        out
    }
}

/// Last finite state carried by a divergence error.
#[derive(Debug, Clone)]
pub struct GeomFitPartial {
    pub mesh: HeadMesh,
    pub pose: CameraPose,
    pub report: FitReport,
}

/// Pinhole projection of a world point: p_cam = R p + T, pixel =
/// (fx x/z + cx, -fy y/z + cy). Errors when the camera-space depth is at or
/// below [`MIN_DEPTH`].
pub fn project(point: Vec3, pose: &CameraPose, intr: &Intrinsics) -> Result<[f64; 2]> {
    let p = math::add3(math::rotate(pose.rotation, point), pose.translation);
    project_cam_space(p, intr)
}

fn project_cam_space(p: Vec3, intr: &Intrinsics) -> Result<[f64; 2]> {
    if p[2] <= MIN_DEPTH {
        return Err(Error::BehindCamera { depth: p[2] });
    }
    Ok([
        intr.fx * p[0] / p[2] + intr.cx,
        intr.fy * (-p[1]) / p[2] + intr.cy,
    ])
}

/// Gradients of a scalar loss with respect to the triplane values and the
/// six pose parameters (rotation then translation).
#[derive(Debug, Clone)]
pub struct LossGrads {
    pub value: f64,
    /// Same layout as the triplane values (R*R*3).
    pub triplane: Vec<f64>,
    /// [dr0, dr1, dr2, dt0, dt1, dt2]
    pub pose: [f64; 6],
    /// Landmarks whose vertex was behind the camera and got excluded.
    pub skipped: usize,
}

/// Landmark projection loss: sum over landmarks of the pixel distance between
/// the target and the projection of the triplane-stored vertex.
///
/// Landmarks whose vertex sits behind the camera are excluded from the sum
/// and counted in `skipped`; the caller decides whether to warn. With
/// `squared` the distances enter squared instead (gradient scale changes,
/// same minimizer on consistent data).
pub fn landmark_loss(
    triplane: &TriplaneMap,
    landmarks: &LandmarkSet,
    pose: &CameraPose,
    intr: &Intrinsics,
    squared: bool,
) -> LossGrads {
    let mut grads = LossGrads {
        value: 0.0,
        triplane: vec![0.0; triplane.values().len()],
        pose: [0.0; 6],
        skipped: 0,
    };

    for lm in &landmarks.landmarks {
        let vid = lm.vertex_id as usize;
        let v = triplane.vertex_value(vid);
        let (p_cam, jac_rot) = math::rotate_with_jacobian(pose.rotation, v);
        let p_cam = math::add3(p_cam, pose.translation);
        if p_cam[2] <= MIN_DEPTH {
            grads.skipped += 1;
            continue;
        }
        let z = p_cam[2];
        let px = intr.fx * p_cam[0] / z + intr.cx;
        let py = intr.fy * (-p_cam[1]) / z + intr.cy;
        let ex = px - lm.x;
        let ey = py - lm.y;
        let dist = (ex * ex + ey * ey).sqrt();

        // dL/d(pixel)
        let (term, de): (f64, [f64; 2]) = if squared {
            (dist * dist, [2.0 * ex, 2.0 * ey])
        } else if dist > 0.0 {
            (dist, [ex / dist, ey / dist])
        } else {
            (0.0, [0.0, 0.0]) // gradient defined as 0 at exactly zero residual
        };
        grads.value += term;

        // d(pixel)/d(p_cam)
        let dpx = [intr.fx / z, 0.0, -intr.fx * p_cam[0] / (z * z)];
        let dpy = [0.0, -intr.fy / z, intr.fy * p_cam[1] / (z * z)];
        let g_cam = [
            de[0] * dpx[0] + de[1] * dpy[0],
            de[0] * dpx[1] + de[1] * dpy[1],
            de[0] * dpx[2] + de[1] * dpy[2],
        ];

        // translation: d(p_cam)/dT = I
        grads.pose[3] += g_cam[0];
        grads.pose[4] += g_cam[1];
        grads.pose[5] += g_cam[2];
        // rotation: chain through the Rodrigues Jacobian
        for j in 0..3 {
            grads.pose[j] +=
                g_cam[0] * jac_rot[0][j] + g_cam[1] * jac_rot[1][j] + g_cam[2] * jac_rot[2][j];
        }
        // vertex position: d(p_cam)/dV = R, scatter into the vertex's texel
        let rot = pose.rotation_matrix();
        let g_v = math::mat3_mul_vec(&math::mat3_transpose(&rot), g_cam);
        let t = triplane.texel_of_vertex(vid) * 3;
        grads.triplane[t] += g_v[0];
        grads.triplane[t + 1] += g_v[1];
        grads.triplane[t + 2] += g_v[2];
    }
    grads
}

/// Weighted total loss (landmark + lambda_tv TV + lambda_sym symmetry) with
/// the matching weighted gradients.
pub fn total_loss(
    triplane: &TriplaneMap,
    landmarks: &LandmarkSet,
    pose: &CameraPose,
    intr: &Intrinsics,
    config: &GeomFitConfig,
) -> (LossBreakdown, LossGrads) {
    let mut grads = landmark_loss(triplane, landmarks, pose, intr, config.squared_landmarks);
    let lmk = grads.value;
    let (tv, tv_grad) = if config.lambda_tv != 0.0 {
        triplane::tv_loss(triplane)
    } else {
        (0.0, Vec::new())
    };
    let (sym, sym_grad) = if config.lambda_sym != 0.0 {
        triplane::symmetry_loss(triplane)
    } else {
        (0.0, Vec::new())
    };
    if !tv_grad.is_empty() {
        for (g, t) in grads.triplane.iter_mut().zip(&tv_grad) {
            *g += config.lambda_tv * t;
        }
    }
    if !sym_grad.is_empty() {
        for (g, s) in grads.triplane.iter_mut().zip(&sym_grad) {
            *g += config.lambda_sym * s;
        }
    }
    let breakdown = LossBreakdown {
        total: lmk + config.lambda_tv * tv + config.lambda_sym * sym,
        lmk,
        tv,
        sym,
    };
    grads.value = breakdown.total;
    (breakdown, grads)
}

/// RMS landmark reprojection error in pixels for a mesh/pose pair; landmarks
/// behind the camera are excluded.
pub fn landmark_rmse(
    mesh: &HeadMesh,
    landmarks: &LandmarkSet,
    pose: &CameraPose,
    intr: &Intrinsics,
) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for lm in &landmarks.landmarks {
        if let Ok(p) = project(mesh.vertices[lm.vertex_id as usize], pose, intr) {
            let dx = p[0] - lm.x;
            let dy = p[1] - lm.y;
            sum += dx * dx + dy * dy;
            count += 1;
        }
    }
    if count == 0 {
        return f64::NAN;
    }
    (sum / count as f64).sqrt()
}

/// Joint first-order fit of triplane values (valid texels only) and camera
/// pose. Deterministic for identical inputs.
///
/// On divergence (non-finite loss) the error carries the last finite state.
pub fn fit_geometry(
    mesh: &HeadMesh,
    landmarks: &LandmarkSet,
    intr: &Intrinsics,
    init_pose: &CameraPose,
    config: &GeomFitConfig,
) -> Result<(HeadMesh, CameraPose, FitReport)> {
    mesh.validate()?;
    landmarks.validate(mesh)?;
    intr.validate()?;
    if landmarks.len() < MIN_LANDMARKS {
        return Err(Error::TooFewLandmarks { got: landmarks.len(), required: MIN_LANDMARKS });
    }

    let mut triplane = triplane::mesh_to_triplane(mesh, config.triplane_resolution)?;
    let sym_frac = triplane.mirror_symmetry_fraction();
    if sym_frac < 0.95 {
        log::warn!(
            "triplane valid mask is only {:.1}% mirror-symmetric; the symmetry loss \
             assumes a left-right symmetric UV atlas",
            sym_frac * 100.0
        );
    }

    // Pack parameters: 3 channels per valid texel, then the 6 pose values.
    let valid_texels: Vec<usize> = triplane.valid_texels().iter().map(|&t| t as usize).collect();
    let n_tri = valid_texels.len() * 3;
    let mut p_tri = vec![0.0; n_tri];
    for (k, &t) in valid_texels.iter().enumerate() {
        p_tri[k * 3..k * 3 + 3].copy_from_slice(&triplane.values()[t * 3..t * 3 + 3]);
    }
    let mut p_pose = [
        init_pose.rotation[0],
        init_pose.rotation[1],
        init_pose.rotation[2],
        init_pose.translation[0],
        init_pose.translation[1],
        init_pose.translation[2],
    ];

    let mut adam_tri = Adam::new(n_tri, config.betas, config.epsilon);
    let mut adam_pose = Adam::new(6, config.betas, config.epsilon);
    let mut trace = Vec::with_capacity(config.iterations);
    let mut g_tri = vec![0.0; n_tri];
    let mut skipped_last = 0usize;

    for iter in 0..config.iterations {
        // scatter parameters into the triplane/pose
        for (k, &t) in valid_texels.iter().enumerate() {
            triplane.values_mut()[t * 3..t * 3 + 3].copy_from_slice(&p_tri[k * 3..k * 3 + 3]);
        }
        let pose = CameraPose {
            rotation: [p_pose[0], p_pose[1], p_pose[2]],
            translation: [p_pose[3], p_pose[4], p_pose[5]],
        };

        let (breakdown, grads) = total_loss(&triplane, landmarks, &pose, intr, config);
        skipped_last = grads.skipped;
        if !breakdown.total.is_finite() {
            // report the state entering this iteration (the last finite one)
            let partial_mesh = triplane::triplane_to_mesh(&triplane, mesh)?;
            let report = FitReport {
                final_rmse_px: landmark_rmse(&partial_mesh, landmarks, &pose, intr),
                trace,
                iterations: iter,
                skipped_landmarks: grads.skipped,
            };
            return Err(Error::GeomFitDiverged {
                iteration: iter,
                partial: Box::new(GeomFitPartial { mesh: partial_mesh, pose, report }),
            });
        }
        trace.push(breakdown);

        for (k, &t) in valid_texels.iter().enumerate() {
            g_tri[k * 3..k * 3 + 3].copy_from_slice(&grads.triplane[t * 3..t * 3 + 3]);
        }
        let ramp = optim::warmup_factor(iter, config.iterations);
        let lr_t = ramp * cosine_lr(config.lr_triplane, config.lr_decay, iter, config.iterations);
        let lr_c = ramp * cosine_lr(config.lr_camera, config.lr_decay, iter, config.iterations);
        adam_tri.step(&mut p_tri, &g_tri, lr_t);
        adam_pose.step(&mut p_pose, &grads.pose, lr_c);
    }

    for (k, &t) in valid_texels.iter().enumerate() {
        triplane.values_mut()[t * 3..t * 3 + 3].copy_from_slice(&p_tri[k * 3..k * 3 + 3]);
    }
    let pose = CameraPose {
        rotation: [p_pose[0], p_pose[1], p_pose[2]],
        translation: [p_pose[3], p_pose[4], p_pose[5]],
    };
    let fitted = triplane::triplane_to_mesh(&triplane, mesh)?;
    if skipped_last > 0 {
        log::warn!("{skipped_last} landmarks were behind the camera on the final iteration");
    }
    let report = FitReport {
        final_rmse_px: landmark_rmse(&fitted, landmarks, &pose, intr),
        trace,
        iterations: config.iterations,
        skipped_landmarks: skipped_last,
    };
    Ok((fitted, pose, report))
}
