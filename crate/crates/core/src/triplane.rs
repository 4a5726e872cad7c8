//! Conversion between a mesh's vertex positions and a 3-channel UV-space
//! image, plus the two regularizers defined on that image.
//!
//! Each vertex is stored at the texel addressed by its UV coordinates
//! (nearest-texel rounding), channels holding the X/Y/Z position components.
//! Placement is bijective: every vertex owns exactly one texel, so the
//! mesh -> image -> mesh round trip is bit-exact. Texels holding no vertex
//! are zero-filled, marked invalid, and contribute to no loss.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::HeadMesh;

pub const DEFAULT_RESOLUTION: usize = 256;

/// UV-space position image: R x R texels, 3 channels (X, Y, Z).
#[derive(Debug, Clone, PartialEq)]
pub struct TriplaneMap {
    resolution: usize,
    /// Row-major, channel-interleaved: values[(row * R + col) * 3 + c].
    values: Vec<f64>,
    valid: Vec<bool>,
    /// u32::MAX where no vertex lives.
    texel_vertex: Vec<u32>,
    /// Flat texel index of each vertex, in vertex order.
    vertex_texel: Vec<u32>,
    /// Flat indices of valid texels, ascending (deterministic iteration).
    valid_texels: Vec<u32>,
}

/// Texel addressed by a UV coordinate: col from u, row from v with v = 1 at
/// the top row, both by nearest-texel rounding.
pub fn uv_to_texel(uv: [f64; 2], resolution: usize) -> (usize, usize) {
    let r1 = (resolution - 1) as f64;
    let col = (uv[0] * r1).round() as usize;
    let row = ((1.0 - uv[1]) * r1).round() as usize;
    (row.min(resolution - 1), col.min(resolution - 1))
}

impl TriplaneMap {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    /// Ascending flat indices of the texels that hold vertices.
    pub fn valid_texels(&self) -> &[u32] {
        &self.valid_texels
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_texel.len()
    }

    pub fn texel_index(&self, row: usize, col: usize) -> usize {
        row * self.resolution + col
    }

    /// Flat texel index owned by a vertex.
    pub fn texel_of_vertex(&self, vertex: usize) -> usize {
        self.vertex_texel[vertex] as usize
    }

    pub fn vertex_of_texel(&self, texel: usize) -> Option<usize> {
        let v = self.texel_vertex[texel];
        (v != u32::MAX).then_some(v as usize)
    }

    /// Position stored for a vertex.
    pub fn vertex_value(&self, vertex: usize) -> [f64; 3] {
        let t = self.vertex_texel[vertex] as usize * 3;
        [self.values[t], self.values[t + 1], self.values[t + 2]]
    }

    pub fn set_vertex_value(&mut self, vertex: usize, value: [f64; 3]) {
        let t = self.vertex_texel[vertex] as usize * 3;
        self.values[t..t + 3].copy_from_slice(&value);
    }

    /// Fraction of valid texels whose horizontal mirror is also valid. The
    /// symmetry loss presumes an atlas mirror-symmetric about the vertical
    /// centerline; callers warn when this drops below 0.95.
    pub fn mirror_symmetry_fraction(&self) -> f64 {
        if self.valid_texels.is_empty() {
            return 1.0;
        }
        let r = self.resolution;
        let mut ok = 0usize;
        for &t in &self.valid_texels {
            let t = t as usize;
            let (row, col) = (t / r, t % r);
            if self.valid[row * r + (r - 1 - col)] {
                ok += 1;
            }
        }
        ok as f64 / self.valid_texels.len() as f64
    }

    /// Debug dump: 3-channel float image plus a JSON sidecar describing the
    /// valid texels.
    pub fn save_debug(&self, image_path: &Path, sidecar_path: &Path) -> Result<()> {
        let mut img = crate::image::Image::new(self.resolution, self.resolution);
        img.data_mut().copy_from_slice(&self.values);
        img.save_f32(image_path)?;

        #[derive(Serialize)]
        struct TexelRecord {
            row: usize,
            col: usize,
            vertex: u32,
        }
        #[derive(Serialize)]
        struct Sidecar {
            resolution: usize,
            texels: Vec<TexelRecord>,
        }
        let texels = self
            .valid_texels
            .iter()
            .map(|&t| TexelRecord {
                row: t as usize / self.resolution,
                col: t as usize % self.resolution,
                vertex: self.texel_vertex[t as usize],
            })
            .collect();
        crate::mesh::write_json(sidecar_path, &Sidecar { resolution: self.resolution, texels })
    }
}

/// Encode a mesh's vertex positions into a triplane image.
///
/// Errors with the colliding vertex pair and the minimum workable resolution
/// if two vertices round to the same texel.
pub fn mesh_to_triplane(mesh: &HeadMesh, resolution: usize) -> Result<TriplaneMap> {
    assert!(resolution >= 2, "triplane resolution must be at least 2");
    let size = resolution * resolution;
    let mut values = vec![0.0; size * 3];
    let mut valid = vec![false; size];
    let mut texel_vertex = vec![u32::MAX; size];
    let mut vertex_texel = vec![0u32; mesh.vertex_count()];

    for (v, uv) in mesh.uvs.iter().enumerate() {
        let (row, col) = uv_to_texel(*uv, resolution);
        let t = row * resolution + col;
        if valid[t] {
            let other = texel_vertex[t] as usize;
            return Err(Error::TexelCollision {
                vertex_a: other,
                vertex_b: v,
                uv_a: mesh.uvs[other],
                uv_b: *uv,
                resolution,
                min_resolution: min_collision_free_resolution(mesh, 1 << 15),
            });
        }
        valid[t] = true;
        texel_vertex[t] = v as u32;
        vertex_texel[v] = t as u32;
        let base = t * 3;
        values[base..base + 3].copy_from_slice(&mesh.vertices[v]);
    }

    let valid_texels: Vec<u32> =
        (0..size as u32).filter(|&t| valid[t as usize]).collect();

    Ok(TriplaneMap { resolution, values, valid, texel_vertex, vertex_texel, valid_texels })
}

/// Smallest resolution at which no two vertices share a texel, or None if two
/// UVs coincide (or `max_resolution` is exceeded).
pub fn min_collision_free_resolution(mesh: &HeadMesh, max_resolution: usize) -> Option<usize> {
    let collides = |res: usize| -> bool {
        let mut seen = std::collections::HashSet::with_capacity(mesh.uvs.len());
        for uv in &mesh.uvs {
            if !seen.insert(uv_to_texel(*uv, res)) {
                return true;
            }
        }
        false
    };
    // find an upper bound by doubling, then binary search the threshold
    let mut hi = 2usize;
    while collides(hi) {
        hi *= 2;
        if hi > max_resolution {
            return None;
        }
    }
    let mut lo = 2usize; // smallest admissible resolution
    while lo < hi {
        let mid = (lo + hi) / 2;
        if collides(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Read vertex positions back out of the triplane using `topology`'s UV
/// layout; faces and UVs are carried over unchanged.
pub fn triplane_to_mesh(triplane: &TriplaneMap, topology: &HeadMesh) -> Result<HeadMesh> {
    let r = triplane.resolution;
    let mut vertices = Vec::with_capacity(topology.vertex_count());
    for (v, uv) in topology.uvs.iter().enumerate() {
        let (row, col) = uv_to_texel(*uv, r);
        let t = row * r + col;
        if !triplane.valid[t] {
            return Err(Error::MissingTexel { vertex: v });
        }
        let base = t * 3;
        vertices.push([
            triplane.values[base],
            triplane.values[base + 1],
            triplane.values[base + 2],
        ]);
    }
    Ok(HeadMesh { vertices, uvs: topology.uvs.clone(), faces: topology.faces.clone() })
}

/// Anisotropic total variation over 4-neighbor texel pairs where both texels
/// are valid: sum over pairs and channels of |a - b|.
///
/// Returns the loss and its exact subgradient (sign convention: 0 at ties);
/// invalid texels receive zero gradient.
pub fn tv_loss(triplane: &TriplaneMap) -> (f64, Vec<f64>) {
    let r = triplane.resolution;
    let mut loss = 0.0;
    let mut grad = vec![0.0; triplane.values.len()];
    for row in 0..r {
        for col in 0..r {
            let t = row * r + col;
            if !triplane.valid[t] {
                continue;
            }
            // right and down neighbors so each unordered pair counts once
            if col + 1 < r && triplane.valid[t + 1] {
                accumulate_pair(&triplane.values, t, t + 1, &mut loss, &mut grad);
            }
            if row + 1 < r && triplane.valid[t + r] {
                accumulate_pair(&triplane.values, t, t + r, &mut loss, &mut grad);
            }
        }
    }
    (loss, grad)
}

fn accumulate_pair(values: &[f64], a: usize, b: usize, loss: &mut f64, grad: &mut [f64]) {
    for c in 0..3 {
        let d = values[a * 3 + c] - values[b * 3 + c];
        *loss += d.abs();
        let s = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        grad[a * 3 + c] += s;
        grad[b * 3 + c] -= s;
    }
}

/// Facial-symmetry loss under a horizontal mirror of the UV image
/// (column j <-> column R-1-j):
///
/// X is antisymmetric and Y/Z symmetric, so the residuals are
/// ch0 + flip(ch0), ch1 - flip(ch1), ch2 - flip(ch2), each reduced by a
/// Frobenius norm over texels whose mirror partner is also valid, and the
/// three norms summed. Returns the loss and its exact gradient (zero on
/// excluded texels, and zero for a channel whose residual vanishes
/// identically).
pub fn symmetry_loss(triplane: &TriplaneMap) -> (f64, Vec<f64>) {
    let r = triplane.resolution;
    let values = &triplane.values;
    let mut sq = [0.0f64; 3];
    // residual per included texel, reused for the gradient pass
    let mut included: Vec<(usize, usize)> = Vec::new(); // (texel, mirror)
    for &t in &triplane.valid_texels {
        let t = t as usize;
        let (row, col) = (t / r, t % r);
        let m = row * r + (r - 1 - col);
        if !triplane.valid[m] {
            continue;
        }
        included.push((t, m));
        let r0 = values[t * 3] + values[m * 3];
        let r1 = values[t * 3 + 1] - values[m * 3 + 1];
        let r2 = values[t * 3 + 2] - values[m * 3 + 2];
        sq[0] += r0 * r0;
        sq[1] += r1 * r1;
        sq[2] += r2 * r2;
    }
    let norms = sq.map(f64::sqrt);
    let loss = norms[0] + norms[1] + norms[2];

    let mut grad = vec![0.0; values.len()];
    for &(t, m) in &included {
        // d||res_c||/dx_c[t] = 2 res_c(t) / ||res_c||; each texel appears in
        // its own residual and (with matching sign) in its mirror's.
        if norms[0] > 0.0 {
            grad[t * 3] = 2.0 * (values[t * 3] + values[m * 3]) / norms[0];
        }
        if norms[1] > 0.0 {
            grad[t * 3 + 1] = 2.0 * (values[t * 3 + 1] - values[m * 3 + 1]) / norms[1];
        }
        if norms[2] > 0.0 {
            grad[t * 3 + 2] = 2.0 * (values[t * 3 + 2] - values[m * 3 + 2]) / norms[2];
        }
    }
    (loss, grad)
}
