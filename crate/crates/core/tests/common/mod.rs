//! Shared oracle machinery for the integration suites: central finite
//! differences, a brute-force rasterization oracle, dense linear solvers for
//! the Poisson and least-squares cross-checks, and PSNR.

#![allow(dead_code)]

use headfit_core::image::{Image, Mask};
use headfit_core::math;
use headfit_core::mesh::{CameraPose, HeadMesh, Intrinsics};
use headfit_core::raster::{self, RasterBuffer, NEAR_PLANE};

/// Relative-error gradient comparison with an absolute floor: both analytic
/// and finite-difference values carry noise near zero.
pub fn assert_grad_close(analytic: f64, fd: f64, rel_tol: f64, context: &str) {
    let scale = analytic.abs().max(fd.abs());
    let err = (analytic - fd).abs();
    assert!(
        err <= rel_tol * scale.max(1e-3),
        "{context}: analytic {analytic} vs central-difference {fd} (err {err:.3e})"
    );
}

/// Central difference of a scalar function along coordinate `k`.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[k] += h;
    let mut xm = x.to_vec();
    xm[k] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Brute-force per-pixel rasterization oracle: for every pixel center test
/// every face with an inclusive edge test plus the top-left rule, pick the
/// nearest (ties to the lower face index). Shares nothing with the tiled
/// rasterizer except the fill-rule definition.
pub fn oracle_face_ids(
    mesh: &HeadMesh,
    pose: &CameraPose,
    intr: &Intrinsics,
    width: usize,
    height: usize,
) -> Vec<Option<u32>> {
    let rot = pose.rotation_matrix();
    let cam: Vec<[f64; 3]> = mesh
        .vertices
        .iter()
        .map(|v| math::add3(math::mat3_mul_vec(&rot, *v), pose.translation))
        .collect();
    let screen: Vec<Option<[f64; 3]>> = cam
        .iter()
        .map(|p| {
            if p[2] < NEAR_PLANE {
                None
            } else {
                Some([
                    intr.fx * p[0] / p[2] + intr.cx,
                    intr.fy * (-p[1]) / p[2] + intr.cy,
                    p[2],
                ])
            }
        })
        .collect();

    let mut out = vec![None; width * height];
    for y in 0..height {
        for x in 0..width {
            let qx = x as f64 + 0.5;
            let qy = y as f64 + 0.5;
            let mut best: Option<(f64, u32)> = None;
            'faces: for (fi, f) in mesh.faces.iter().enumerate() {
                let (Some(a), Some(b), Some(c)) = (
                    screen[f[0] as usize],
                    screen[f[1] as usize],
                    screen[f[2] as usize],
                ) else {
                    continue;
                };
                let cross = |p: [f64; 3], q: [f64; 3], r: (f64, f64)| {
                    (q[0] - p[0]) * (r.1 - p[1]) - (q[1] - p[1]) * (r.0 - p[0])
                };
                let area2 = cross(a, b, (c[0], c[1]));
                // orient positively
                let (v0, v1, v2) = if area2 > 0.0 {
                    (a, b, c)
                } else if area2 < 0.0 {
                    (a, c, b)
                } else {
                    continue;
                };
                let edges = [(v1, v2), (v2, v0), (v0, v1)];
                let mut lambda = [0.0f64; 3];
                for (k, (p, q)) in edges.iter().enumerate() {
                    let e = cross(*p, *q, (qx, qy));
                    if e < 0.0 {
                        continue 'faces;
                    }
                    if e == 0.0 {
                        // top-left rule, y-down: include horizontal edges
                        // going right and edges going up the image
                        let dy = q[1] - p[1];
                        let dx = q[0] - p[0];
                        if !(dy < 0.0 || (dy == 0.0 && dx > 0.0)) {
                            continue 'faces;
                        }
                    }
                    lambda[k] = e;
                }
                let total = lambda[0] + lambda[1] + lambda[2];
                let l = lambda.map(|v| v / total);
                let s0 = l[0] / v0[2];
                let s1 = l[1] / v1[2];
                let s2 = l[2] / v2[2];
                let depth = 1.0 / (s0 + s1 + s2);
                let fi = fi as u32;
                best = match best {
                    None => Some((depth, fi)),
                    Some((bd, bf)) => {
                        if depth < bd || (depth == bd && fi < bf) {
                            Some((depth, fi))
                        } else {
                            Some((bd, bf))
                        }
                    }
                };
            }
            out[y * width + x] = best.map(|(_, f)| f);
        }
    }
    out
}

/// Assert the tiled rasterizer agrees with the brute-force oracle exactly on
/// coverage and the winning face.
pub fn assert_matches_oracle(
    mesh: &HeadMesh,
    pose: &CameraPose,
    intr: &Intrinsics,
    width: usize,
    height: usize,
) -> RasterBuffer {
    let buffer = raster::rasterize(mesh, pose, intr, width, height);
    let oracle = oracle_face_ids(mesh, pose, intr, width, height);
    for y in 0..height {
        for x in 0..width {
            let got = buffer.pixel(x, y).map(|p| p.face);
            let want = oracle[y * width + x];
            assert_eq!(got, want, "pixel ({x},{y}): rasterizer {got:?} vs oracle {want:?}");
        }
    }
    buffer
}

/// Dense direct Poisson solve (LU via nalgebra) with the same discretization
/// as `poisson_blend`: 5-point Laplacian on the mask interior, source
/// gradients as guidance, target as Dirichlet boundary.
pub fn dense_poisson(source: &Image, target: &Image, mask: &Mask) -> Image {
    let w = source.width();
    let h = source.height();
    let interior: Vec<usize> = (0..w * h).filter(|&i| mask.data()[i]).collect();
    let n = interior.len();
    assert!(n > 0);
    let mut index_of = vec![usize::MAX; w * h];
    for (k, &p) in interior.iter().enumerate() {
        index_of[p] = k;
    }
    let neighbors = |p: usize| [p - 1, p + 1, p - w, p + w];

    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (k, &p) in interior.iter().enumerate() {
        a[(k, k)] = 4.0;
        for q in neighbors(p) {
            if index_of[q] != usize::MAX {
                a[(k, index_of[q])] = -1.0;
            }
        }
    }
    let lu = a.lu();

    let mut out = target.clone();
    for ch in 0..3 {
        let mut b = nalgebra::DVector::<f64>::zeros(n);
        for (k, &p) in interior.iter().enumerate() {
            let mut rhs = 4.0 * source.data()[p * 3 + ch];
            for q in neighbors(p) {
                rhs -= source.data()[q * 3 + ch];
                if index_of[q] == usize::MAX {
                    rhs += target.data()[q * 3 + ch];
                }
            }
            b[k] = rhs;
        }
        let x = lu.solve(&b).expect("Laplacian is nonsingular");
        for (k, &p) in interior.iter().enumerate() {
            out.data_mut()[p * 3 + ch] = x[k];
        }
    }
    out
}

/// The linear render map A of a raster buffer at a texture resolution,
/// restricted to touched texels: returns (touched texel list, per covered
/// pixel the footprint as (column into touched, weight)).
pub struct RenderMatrix {
    pub touched: Vec<usize>,
    pub rows: Vec<[(usize, f64); 4]>,
    /// flat pixel index per row
    pub pixels: Vec<usize>,
}

pub fn render_matrix(buffer: &RasterBuffer, resolution: usize) -> RenderMatrix {
    let mut rows = Vec::new();
    let mut pixels = Vec::new();
    let mut touched: Vec<usize> = Vec::new();
    for (i, p) in buffer.pixels().iter().enumerate() {
        let Some(p) = p else { continue };
        let fp = raster::bilinear_footprint(resolution, resolution, p.uv);
        // exactly-zero weights (UV on a texel center/edge) would create
        // all-zero columns and a singular normal matrix
        touched.extend(fp.iter().filter(|&&(_, w)| w != 0.0).map(|&(t, _)| t));
        rows.push(fp);
        pixels.push(i);
    }
    touched.sort_unstable();
    touched.dedup();
    let mut col_of = vec![usize::MAX; resolution * resolution];
    for (k, &t) in touched.iter().enumerate() {
        col_of[t] = k;
    }
    let rows = rows
        .into_iter()
        .map(|fp| fp.map(|(t, w)| if w != 0.0 { (col_of[t], w) } else { (0, 0.0) }))
        .collect();
    RenderMatrix { touched, rows, pixels }
}

impl RenderMatrix {
    /// Least-squares solution per channel via the dense normal equations,
    /// solved with an SVD pseudo-inverse: texels observed only through a
    /// shared pixel make A rank-deficient, and any least-squares solution
    /// yields the same (optimal) residual, which is what the oracle compares.
    pub fn normal_equations_solution(&self, target: &Image) -> Vec<[f64; 3]> {
        let n = self.touched.len();
        let mut ata = nalgebra::DMatrix::<f64>::zeros(n, n);
        for fp in &self.rows {
            for &(i, wi) in fp {
                for &(j, wj) in fp {
                    ata[(i, j)] += wi * wj;
                }
            }
        }
        let svd = ata.svd(true, true);
        let mut out = vec![[0.0; 3]; n];
        for ch in 0..3 {
            let mut atb = nalgebra::DVector::<f64>::zeros(n);
            for (fp, &px) in self.rows.iter().zip(&self.pixels) {
                let b = target.data()[px * 3 + ch];
                for &(i, wi) in fp {
                    atb[i] += wi * b;
                }
            }
            let x = svd.solve(&atb, 1e-10).expect("svd solve");
            for k in 0..n {
                out[k][ch] = x[k];
            }
        }
        out
    }

    /// ||A^T (A x - b)||_inf over touched texels and channels for a texture.
    pub fn residual_orthogonality(&self, texture: &Image, target: &Image) -> f64 {
        assert_eq!(texture.width(), texture.height());
        let mut atr = vec![[0.0f64; 3]; self.touched.len()];
        for (fp, &px) in self.rows.iter().zip(&self.pixels) {
            for ch in 0..3 {
                let mut rendered = 0.0;
                for &(i, wi) in fp {
                    rendered += wi * texture.data()[self.touched[i] * 3 + ch];
                }
                let r = rendered - target.data()[px * 3 + ch];
                for &(i, wi) in fp {
                    atr[i][ch] += wi * r;
                }
            }
        }
        atr.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Unsquared Frobenius data loss of a texture against the target.
    pub fn frobenius_loss(&self, texture: &Image, target: &Image) -> f64 {
        let mut sq = 0.0;
        for (fp, &px) in self.rows.iter().zip(&self.pixels) {
            for ch in 0..3 {
                let mut rendered = 0.0;
                for &(i, wi) in fp {
                    rendered += wi * texture.data()[self.touched[i] * 3 + ch];
                }
                let d = rendered - target.data()[px * 3 + ch];
                sq += d * d;
            }
        }
        sq.sqrt()
    }
}

/// PSNR (max value 1) between two textures over a texel subset.
pub fn psnr_on_texels(a: &Image, b: &Image, texels: &[usize]) -> f64 {
    assert!(!texels.is_empty());
    let mut mse = 0.0;
    for &t in texels {
        for c in 0..3 {
            let d = a.data()[t * 3 + c] - b.data()[t * 3 + c];
            mse += d * d;
        }
    }
    mse /= (texels.len() * 3) as f64;
    -10.0 * mse.log10()
}

/// Rotation angle in radians between two axis-angle rotations.
pub fn rotation_angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    let ra = math::rotation_matrix(a);
    let rb = math::rotation_matrix(b);
    let rel = math::mat3_mul(&math::mat3_transpose(&ra), &rb);
    let trace = rel[0][0] + rel[1][1] + rel[2][2];
    ((trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}
