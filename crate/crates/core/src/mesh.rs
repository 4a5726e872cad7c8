//! Core geometric types and file I/O: triangle meshes with per-vertex UVs,
//! 2D landmark sets, and the pinhole camera model.
//!
//! OBJ is the mesh interchange format. Only `v`, `vt` and `f` records are
//! interpreted; faces must be triangles and every face vertex must reference a
//! texture coordinate. Positions shared between different texture coordinates
//! are split on load so that the vertex/UV correspondence is exactly 1:1.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Mat3, Vec3};

/// Fixed-topology triangle mesh with one UV per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadMesh {
    /// Vertex positions in model units (arbitrary scale).
    pub vertices: Vec<[f64; 3]>,
    /// Per-vertex texture coordinates in [0,1]^2, same length as `vertices`.
    pub uvs: Vec<[f64; 2]>,
    /// Counter-clockwise front-facing triangles, indices into `vertices`.
    pub faces: Vec<[u32; 3]>,
}

impl HeadMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Check the type invariants: 1:1 vertex/UV correspondence, in-range face
    /// indices, no repeated indices within a face, UVs inside [0,1].
    pub fn validate(&self) -> Result<()> {
        if self.uvs.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} vertices but {} uvs",
                self.vertices.len(),
                self.uvs.len()
            )));
        }
        let n = self.vertices.len() as u32;
        for (i, f) in self.faces.iter().enumerate() {
            if f[0] >= n || f[1] >= n || f[2] >= n {
                return Err(Error::InvalidMesh(format!("face {i} references vertex >= {n}")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {i} has repeated vertex indices")));
            }
        }
        for (i, uv) in self.uvs.iter().enumerate() {
            if !(0.0..=1.0).contains(&uv[0]) || !(0.0..=1.0).contains(&uv[1]) {
                return Err(Error::InvalidMesh(format!("uv {i} out of [0,1]: {uv:?}")));
            }
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidMesh(format!("vertex {i} not finite: {v:?}")));
            }
        }
        Ok(())
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for c in 0..3 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        math::norm3(math::sub3(hi, lo))
    }
}

/// One 2D landmark with its predefined mesh-vertex correspondence.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
    pub vertex_id: u32,
}

/// Dense 2D landmarks in image pixels, each tied to a mesh vertex.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LandmarkSet {
    pub image_width: u32,
    pub image_height: u32,
    pub landmarks: Vec<Landmark>,
}

impl LandmarkSet {
    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    /// Correspondences must reference the mesh in use and carry finite pixels.
    pub fn validate(&self, mesh: &HeadMesh) -> Result<()> {
        let n = mesh.vertex_count() as u32;
        for (i, lm) in self.landmarks.iter().enumerate() {
            if lm.vertex_id >= n {
                return Err(Error::InvalidLandmarks(format!(
                    "landmark {i} references vertex {} but mesh has {n}",
                    lm.vertex_id
                )));
            }
            if !lm.x.is_finite() || !lm.y.is_finite() {
                return Err(Error::InvalidLandmarks(format!("landmark {i} has non-finite pixel")));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

/// Fixed pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Default used when nothing else is specified: focal length equal to the
    /// image width, principal point at the image center.
    pub fn default_for_image(width: u32, height: u32) -> Self {
        Intrinsics {
            fx: width as f64,
            fy: width as f64,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidMesh(format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }
}

/// Camera extrinsics: world-to-camera transform p_cam = R p + T, with R given
/// as an axis-angle vector (radians) and T in model units.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CameraPose {
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
}

impl CameraPose {
    pub fn identity() -> Self {
        CameraPose { rotation: [0.0; 3], translation: [0.0; 3] }
    }

    /// Rodrigues rotation matrix for this pose; always orthonormal with
    /// determinant +1.
    pub fn rotation_matrix(&self) -> Mat3 {
        math::rotation_matrix(self.rotation)
    }

    pub fn transform(&self, p: Vec3) -> Vec3 {
        math::add3(math::rotate(self.rotation, p), self.translation)
    }
}

/// On-disk camera document: intrinsics and extrinsics in one flat record.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CameraFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
}

impl CameraFile {
    pub fn new(intr: Intrinsics, pose: CameraPose) -> Self {
        CameraFile {
            fx: intr.fx,
            fy: intr.fy,
            cx: intr.cx,
            cy: intr.cy,
            rotation: pose.rotation,
            translation: pose.translation,
        }
    }

    pub fn split(&self) -> (Intrinsics, CameraPose) {
        (
            Intrinsics { fx: self.fx, fy: self.fy, cx: self.cx, cy: self.cy },
            CameraPose { rotation: self.rotation, translation: self.translation },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

/// Read a JSON document (exact float parsing).
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: path.into(), msg: e.to_string() })
}

/// Write a JSON document (pretty, trailing newline).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Json { path: path.into(), msg: e.to_string() })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Load a triangle mesh from an OBJ file.
///
/// Positions referenced with more than one distinct `vt` index are split into
/// separate vertices, so the returned mesh always satisfies the 1:1
/// vertex/UV invariant. The set of world-space triangles is unchanged by the
/// split.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<HeadMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

/// Parse OBJ text; see [`load_mesh`].
pub fn parse_obj(text: &str) -> Result<HeadMesh> {
    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut texcoords: Vec<[f64; 2]> = Vec::new();
    // face corners as (position index, vt index), 0-based
    let mut faces_raw: Vec<[(usize, usize); 3]> = Vec::new();
    let mut saw_face_without_vt = false;

    for (lineno, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap();
        match tag {
            "v" => {
                let v = parse_floats::<3>(&mut it, lineno, "v")?;
                positions.push(v);
            }
            "vt" => {
                let vt = parse_floats::<2>(&mut it, lineno, "vt")?;
                texcoords.push(vt);
            }
            "f" => {
                let corners: Vec<&str> = it.collect();
                if corners.len() != 3 {
                    return Err(Error::NonTriangleFace { line: lineno, verts: corners.len() });
                }
                let mut face = [(0usize, 0usize); 3];
                for (k, corner) in corners.iter().enumerate() {
                    let mut parts = corner.split('/');
                    let vi = parse_index(parts.next(), positions.len(), lineno)?;
                    let vt_part = parts.next();
                    match vt_part {
                        Some(s) if !s.is_empty() => {
                            let ti = parse_index(Some(s), texcoords.len(), lineno)?;
                            face[k] = (vi, ti);
                        }
                        _ => {
                            saw_face_without_vt = true;
                            face[k] = (vi, usize::MAX);
                        }
                    }
                }
                faces_raw.push(face);
            }
            // normals, materials, groups, smoothing: ignored
            _ => {}
        }
    }

    if faces_raw.is_empty() {
        return Err(Error::InvalidMesh("OBJ contains no faces".into()));
    }
    if saw_face_without_vt || texcoords.is_empty() {
        return Err(Error::MissingUvs);
    }

    // Fast path: positions and texture coordinates already correspond 1:1
    // (the format this module writes). Vertex order, including unreferenced
    // vertices, is preserved exactly, so save -> load is the identity.
    let direct = positions.len() == texcoords.len()
        && faces_raw.iter().all(|f| f.iter().all(|&(vi, ti)| vi == ti));
    if direct {
        let faces = faces_raw
            .iter()
            .map(|f| [f[0].0 as u32, f[1].0 as u32, f[2].0 as u32])
            .collect();
        let mesh = HeadMesh { vertices: positions, uvs: texcoords, faces };
        mesh.validate()?;
        return Ok(mesh);
    }

    // General path: split on unique (position, vt) pairs. Each position's
    // first pair keeps the position's own index, so meshes that need no
    // splitting keep their numbering; extra copies append at the end.
    let mut first_pair: Vec<Option<usize>> = vec![None; positions.len()];
    let mut extra_pairs: HashMap<(usize, usize), u32> = HashMap::new();
    let mut vertices: Vec<[f64; 3]> = positions.clone();
    let mut uvs: Vec<[f64; 2]> = vec![[0.0, 0.0]; positions.len()];
    let mut referenced = vec![false; positions.len()];
    let mut faces = Vec::with_capacity(faces_raw.len());
    for face in &faces_raw {
        let mut tri = [0u32; 3];
        for (k, &(vi, ti)) in face.iter().enumerate() {
            let id = match first_pair[vi] {
                None => {
                    first_pair[vi] = Some(ti);
                    referenced[vi] = true;
                    uvs[vi] = texcoords[ti];
                    vi as u32
                }
                Some(t0) if t0 == ti => vi as u32,
                Some(_) => *extra_pairs.entry((vi, ti)).or_insert_with(|| {
                    vertices.push(positions[vi]);
                    uvs.push(texcoords[ti]);
                    (vertices.len() - 1) as u32
                }),
            };
            tri[k] = id;
        }
        faces.push(tri);
    }
    // positions never referenced by a face carry their same-index vt when one
    // exists, or a zero uv otherwise
    for vi in 0..positions.len() {
        if !referenced[vi] && vi < texcoords.len() {
            uvs[vi] = texcoords[vi];
        }
    }

    let mesh = HeadMesh { vertices, uvs, faces };
    mesh.validate()?;
    Ok(mesh)
}

fn parse_floats<const N: usize>(
    it: &mut std::str::SplitWhitespace,
    line: usize,
    tag: &str,
) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    for slot in out.iter_mut() {
        let tok = it
            .next()
            .ok_or_else(|| Error::ObjParse { line, msg: format!("{tag}: missing component") })?;
        *slot = tok
            .parse()
            .map_err(|_| Error::ObjParse { line, msg: format!("{tag}: bad float '{tok}'") })?;
    }
    Ok(out)
}

fn parse_index(tok: Option<&str>, len: usize, line: usize) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::ObjParse { line, msg: "missing index".into() })?;
    let idx: i64 = tok
        .parse()
        .map_err(|_| Error::ObjParse { line, msg: format!("bad index '{tok}'") })?;
    if idx < 1 || idx as usize > len {
        return Err(Error::ObjParse { line, msg: format!("index {idx} out of range (1..={len})") });
    }
    Ok(idx as usize - 1)
}

/// Serialize a mesh to OBJ text. Floats use the shortest decimal form that
/// round-trips exactly, so save followed by load reproduces the mesh
/// bit-exact.
pub fn mesh_to_obj_string(mesh: &HeadMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    for t in &mesh.uvs {
        let _ = writeln!(out, "vt {} {}", t[0], t[1]);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {a}/{a} {b}/{b} {c}/{c}", a = f[0] + 1, b = f[1] + 1, c = f[2] + 1);
    }
    out
}

pub fn save_mesh(mesh: &HeadMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, mesh_to_obj_string(mesh)).map_err(|e| Error::io(path, e))
}
