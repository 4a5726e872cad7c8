//! Deterministic software rasterizer and texture-lookup rendering.
//!
//! Rasterization records per pixel which face is visible, its perspective-
//! correct barycentric coordinates, the interpolated UV and camera-space
//! depth. Rendering then is a pure texture lookup through those UVs, which
//! makes the rendered image exactly linear in the texture values; the
//! bilinear sample weights are the Jacobian. Geometry and camera stay frozen
//! during texture fitting, so no visibility gradients are needed.
//!
//! Coverage follows a top-left fill rule so a pixel center on an edge shared
//! by two triangles is claimed by exactly one of them. Tiles partition the
//! image and faces are processed per tile in index order, so output is
//! bit-identical regardless of how many threads rasterize.

use rayon::prelude::*;

use crate::image::{Image, Mask};
use crate::mesh::{CameraPose, HeadMesh, Intrinsics};

/// Faces with any vertex closer than this camera-space depth are skipped.
pub const NEAR_PLANE: f64 = 1e-4;

const TILE: usize = 64;

/// Per-pixel rasterization record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelSample {
    pub face: u32,
    /// Perspective-correct barycentric weights in the face's vertex order.
    pub bary: [f64; 3],
    /// Perspective-correct interpolation of the face's vertex UVs.
    pub uv: [f64; 2],
    /// Barycentric-interpolated camera-space depth.
    pub depth: f64,
}

/// Dense per-pixel output of [`rasterize`].
#[derive(Debug, Clone)]
pub struct RasterBuffer {
    width: usize,
    height: usize,
    pixels: Vec<Option<PixelSample>>,
}

impl RasterBuffer {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> Option<&PixelSample> {
        self.pixels[y * self.width + x].as_ref()
    }

    pub fn pixels(&self) -> &[Option<PixelSample>] {
        &self.pixels
    }

    pub fn covered_count(&self) -> usize {
        self.pixels.iter().filter(|p| p.is_some()).count()
    }

    pub fn coverage_mask(&self) -> Mask {
        let mut m = Mask::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                m.set(x, y, self.pixels[y * self.width + x].is_some());
            }
        }
        m
    }

    /// Debug dump: one text record per covered pixel.
    pub fn dump_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "# x y face b0 b1 b2 u v depth");
        for y in 0..self.height {
            for x in 0..self.width {
                if let Some(p) = self.pixel(x, y) {
                    let _ = writeln!(
                        out,
                        "{x} {y} {} {} {} {} {} {} {}",
                        p.face, p.bary[0], p.bary[1], p.bary[2], p.uv[0], p.uv[1], p.depth
                    );
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy)]
struct ScreenVert {
    x: f64,
    y: f64,
    /// camera-space depth
    z: f64,
}

/// Screen-space triangle ready for coverage tests: vertices ordered for
/// positive orientation, plus the permutation back to the face's original
/// vertex order.
struct FaceSetup {
    v: [ScreenVert; 3],
    uv: [[f64; 2]; 3],
    order: [usize; 3],
}

/// Project a camera-space point to pixel coordinates. Image y grows downward
/// while camera +Y is up, hence the sign flip.
#[inline]
fn project_cam(p: [f64; 3], intr: &Intrinsics) -> (f64, f64) {
    (
        intr.fx * p[0] / p[2] + intr.cx,
        intr.fy * (-p[1]) / p[2] + intr.cy,
    )
}

#[inline]
fn edge(ax: f64, ay: f64, bx: f64, by: f64, qx: f64, qy: f64) -> f64 {
    (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
}

/// Top-left ownership for a positively-oriented triangle in y-down pixel
/// space: a boundary pixel belongs to a horizontal edge going right (top
/// edge) or an edge strictly descending in y (left edge).
#[inline]
fn edge_is_top_left(a: &ScreenVert, b: &ScreenVert) -> bool {
    let dy = b.y - a.y;
    dy < 0.0 || (dy == 0.0 && (b.x - a.x) > 0.0)
}

fn face_setup(cam: &[[f64; 3]], mesh: &HeadMesh, face: usize, intr: &Intrinsics) -> Option<FaceSetup> {
    let f = mesh.faces[face];
    let idx = [f[0] as usize, f[1] as usize, f[2] as usize];
    if idx.iter().any(|&i| cam[i][2] < NEAR_PLANE) {
        return None;
    }
    let sv = idx.map(|i| {
        let (x, y) = project_cam(cam[i], intr);
        ScreenVert { x, y, z: cam[i][2] }
    });
    let area2 = edge(sv[0].x, sv[0].y, sv[1].x, sv[1].y, sv[2].x, sv[2].y);
    let order = if area2 > 0.0 {
        [0usize, 1, 2]
    } else if area2 < 0.0 {
        [0usize, 2, 1]
    } else {
        return None; // zero screen-space area
    };
    Some(FaceSetup {
        v: [sv[order[0]], sv[order[1]], sv[order[2]]],
        uv: [mesh.uvs[idx[order[0]]], mesh.uvs[idx[order[1]]], mesh.uvs[idx[order[2]]]],
        order,
    })
}

/// Test one pixel center against a face; returns the sample when covered.
fn shade_pixel(fi: u32, s: &FaceSetup, qx: f64, qy: f64) -> Option<PixelSample> {
    let [a, b, c] = &s.v;
    // edge functions opposite each vertex
    let e0 = edge(b.x, b.y, c.x, c.y, qx, qy);
    let e1 = edge(c.x, c.y, a.x, a.y, qx, qy);
    let e2 = edge(a.x, a.y, b.x, b.y, qx, qy);
    let inside = |e: f64, va: &ScreenVert, vb: &ScreenVert| e > 0.0 || (e == 0.0 && edge_is_top_left(va, vb));
    if !(inside(e0, b, c) && inside(e1, c, a) && inside(e2, a, b)) {
        return None;
    }
    let area2 = e0 + e1 + e2;
    // screen barycentrics, then perspective correction by 1/z weighting
    let l0 = e0 / area2;
    let l1 = e1 / area2;
    let l2 = e2 / area2;
    let s0 = l0 / a.z;
    let s1 = l1 / b.z;
    let s2 = l2 / c.z;
    let inv = 1.0 / (s0 + s1 + s2);
    let b0 = s0 * inv;
    let b1 = s1 * inv;
    let b2 = s2 * inv;
    let depth = b0 * a.z + b1 * b.z + b2 * c.z;
    let u = b0 * s.uv[0][0] + b1 * s.uv[1][0] + b2 * s.uv[2][0];
    let v = b0 * s.uv[0][1] + b1 * s.uv[1][1] + b2 * s.uv[2][1];
    // barycentrics back in the face's original vertex order
    let mut bary = [0.0; 3];
    bary[s.order[0]] = b0;
    bary[s.order[1]] = b1;
    bary[s.order[2]] = b2;
    Some(PixelSample { face: fi, bary, uv: [u, v], depth })
}

/// Z-buffered rasterization at pixel centers (x+0.5, y+0.5). The nearest
/// face wins; exact depth ties go to the lower face index. Returns an empty
/// buffer (with a warning) when nothing is covered.
pub fn rasterize(
    mesh: &HeadMesh,
    pose: &CameraPose,
    intr: &Intrinsics,
    width: usize,
    height: usize,
) -> RasterBuffer {
    assert!(width > 0 && height > 0);
    let rot = pose.rotation_matrix();
    let cam: Vec<[f64; 3]> = mesh
        .vertices
        .iter()
        .map(|v| crate::math::add3(crate::math::mat3_mul_vec(&rot, *v), pose.translation))
        .collect();

    let setups: Vec<Option<FaceSetup>> =
        (0..mesh.faces.len()).map(|f| face_setup(&cam, mesh, f, intr)).collect();

    // Bin faces to tiles in face order (deterministic).
    let tiles_x = width.div_ceil(TILE);
    let tiles_y = height.div_ceil(TILE);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (fi, setup) in setups.iter().enumerate() {
        let Some(s) = setup else { continue };
        let xs = [s.v[0].x, s.v[1].x, s.v[2].x];
        let ys = [s.v[0].y, s.v[1].y, s.v[2].y];
        let xmin = xs.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        let ymin = ys.iter().fold(f64::INFINITY, |m, &y| m.min(y));
        let xmax = xs.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let ymax = ys.iter().fold(f64::NEG_INFINITY, |m, &y| m.max(y));
        if xmax < 0.0 || ymax < 0.0 || xmin >= width as f64 || ymin >= height as f64 {
            continue;
        }
        let x0 = (xmin.max(0.0) as usize).min(width - 1);
        let y0 = (ymin.max(0.0) as usize).min(height - 1);
        let x1 = (xmax as usize).min(width - 1);
        let y1 = (ymax as usize).min(height - 1);
        for ty in (y0 / TILE)..=(y1 / TILE) {
            for tx in (x0 / TILE)..=(x1 / TILE) {
                bins[ty * tiles_x + tx].push(fi as u32);
            }
        }
    }

    // Each tile owns a disjoint pixel range; tiles run in parallel, faces
    // within a tile in ascending index order.
    let tile_results: Vec<Vec<Option<PixelSample>>> = bins
        .par_iter()
        .enumerate()
        .map(|(tidx, faces)| {
            let px0 = (tidx % tiles_x) * TILE;
            let py0 = (tidx / tiles_x) * TILE;
            let pw = TILE.min(width - px0);
            let ph = TILE.min(height - py0);
            let mut local: Vec<Option<PixelSample>> = vec![None; pw * ph];
            for &fi in faces {
                let s = setups[fi as usize].as_ref().unwrap();
                // clip the face bbox to this tile
                let xs = [s.v[0].x, s.v[1].x, s.v[2].x];
                let ys = [s.v[0].y, s.v[1].y, s.v[2].y];
                let xmin = xs.iter().fold(f64::INFINITY, |m, &x| m.min(x));
                let ymin = ys.iter().fold(f64::INFINITY, |m, &y| m.min(y));
                let xmax = xs.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
                let ymax = ys.iter().fold(f64::NEG_INFINITY, |m, &y| m.max(y));
                let x0 = (xmin.max(px0 as f64) as usize).max(px0);
                let y0 = (ymin.max(py0 as f64) as usize).max(py0);
                let x1 = (xmax.min((px0 + pw - 1) as f64) as usize).min(px0 + pw - 1);
                let y1 = (ymax.min((py0 + ph - 1) as f64) as usize).min(py0 + ph - 1);
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let sample = shade_pixel(fi, s, x as f64 + 0.5, y as f64 + 0.5);
                        let Some(sample) = sample else { continue };
                        let slot = &mut local[(y - py0) * pw + (x - px0)];
                        let replace = match slot {
                            None => true,
                            // strict: equal depth keeps the earlier (lower) face
                            Some(prev) => sample.depth < prev.depth,
                        };
                        if replace {
                            *slot = Some(sample);
                        }
                    }
                }
            }
            local
        })
        .collect();

    let mut pixels: Vec<Option<PixelSample>> = vec![None; width * height];
    for (tidx, local) in tile_results.into_iter().enumerate() {
        let px0 = (tidx % tiles_x) * TILE;
        let py0 = (tidx / tiles_x) * TILE;
        let pw = TILE.min(width - px0);
        for (i, sample) in local.into_iter().enumerate() {
            let x = px0 + i % pw;
            let y = py0 + i / pw;
            pixels[y * width + x] = sample;
        }
    }

    let buffer = RasterBuffer { width, height, pixels };
    if buffer.covered_count() == 0 {
        log::warn!("rasterize: no pixel covered ({} faces, {width}x{height})", mesh.face_count());
    }
    buffer
}

/// Bilinear texture sample with half-texel-centered addressing and
/// clamp-to-edge. Returns the color and the four (flat texel index, weight)
/// pairs that produced it — the Jacobian of the color with respect to the
/// texture.
///
/// Texel (row i, col j) is centered at u = (j+0.5)/W, v = 1 - (i+0.5)/H (UV
/// origin at the bottom-left, image rows from the top).
pub fn sample_bilinear(texture: &Image, uv: [f64; 2]) -> ([f64; 3], [(usize, f64); 4]) {
    let w = texture.width();
    let h = texture.height();
    let footprint = bilinear_footprint(w, h, uv);
    let mut color = [0.0; 3];
    for (t, wgt) in footprint {
        let base = t * 3;
        let d = texture.data();
        color[0] += wgt * d[base];
        color[1] += wgt * d[base + 1];
        color[2] += wgt * d[base + 2];
    }
    (color, footprint)
}

/// The four (flat texel index, weight) pairs of a bilinear lookup; weights
/// are non-negative and sum to 1. Out-of-range UVs clamp to the edge, which
/// may repeat a texel index.
pub fn bilinear_footprint(w: usize, h: usize, uv: [f64; 2]) -> [(usize, f64); 4] {
    let cf = uv[0] * w as f64 - 0.5;
    let rf = (1.0 - uv[1]) * h as f64 - 0.5;
    let c0f = cf.floor();
    let r0f = rf.floor();
    let fc = cf - c0f;
    let fr = rf - r0f;
    let clamp = |v: f64, hi: usize| -> usize {
        if v < 0.0 {
            0
        } else if v > (hi - 1) as f64 {
            hi - 1
        } else {
            v as usize
        }
    };
    let c0 = clamp(c0f, w);
    let c1 = clamp(c0f + 1.0, w);
    let r0 = clamp(r0f, h);
    let r1 = clamp(r0f + 1.0, h);
    [
        (r0 * w + c0, (1.0 - fr) * (1.0 - fc)),
        (r0 * w + c1, (1.0 - fr) * fc),
        (r1 * w + c0, fr * (1.0 - fc)),
        (r1 * w + c1, fr * fc),
    ]
}

/// Texture lookup through a raster buffer: covered pixels sample the texture
/// bilinearly at their interpolated UV, uncovered pixels are black. For a
/// fixed buffer the output is exactly linear in the texture values.
pub fn render(buffer: &RasterBuffer, texture: &Image) -> Image {
    let w = buffer.width();
    let h = buffer.height();
    let mut out = Image::new(w, h);
    out.data_mut()
        .par_chunks_mut(w * 3)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                if let Some(p) = buffer.pixel(x, y) {
                    let (color, _) = sample_bilinear(texture, p.uv);
                    row[x * 3..x * 3 + 3].copy_from_slice(&color);
                }
            }
        });
    out
}
