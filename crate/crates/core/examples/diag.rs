// temporary diagnostic — not part of the repo
use headfit_core::fixture::{self, FixtureOptions};
use headfit_core::mesh::{self, CameraFile, LandmarkSet};

fn main() {
    let tmp = std::env::temp_dir().join("hf_diag_fixture");
    let _ = std::fs::remove_dir_all(&tmp);
    let opts = FixtureOptions { seed: 0, grid: 32, image_size: 128, texture_resolution: 256, landmark_count: 200 };
    let manifest = fixture::make_fixture(&opts, &tmp).unwrap();

    // recompute in memory
    let template = fixture::template_mesh(32);
    let loaded_template = mesh::load_mesh(manifest.path(&tmp, "template_mesh")).unwrap();
    let mut bad = 0;
    for (a, b) in template.vertices.iter().zip(&loaded_template.vertices) {
        for c in 0..3 { if a[c].to_bits() != b[c].to_bits() { bad += 1; } }
    }
    println!("template vertex bit mismatches: {bad}");

    let gt_loaded = mesh::load_mesh(manifest.path(&tmp, "gt_mesh")).unwrap();
    let lm = LandmarkSet::load(manifest.path(&tmp, "landmarks")).unwrap();
    let (intr, gt_pose) = CameraFile::load(manifest.path(&tmp, "camera_gt")).unwrap().split();
    println!("pose rot bits: {:?}", gt_pose.rotation.map(f64::to_bits));
    println!("pi bits      : {}", std::f64::consts::PI.to_bits());

    let mut worst = 0.0f64; let mut worst_id = 0;
    for l in &lm.landmarks {
        let p = headfit_core::geomfit::project(gt_loaded.vertices[l.vertex_id as usize], &gt_pose, &intr).unwrap();
        let d = ((p[0]-l.x).powi(2) + (p[1]-l.y).powi(2)).sqrt();
        if d > worst { worst = d; worst_id = l.vertex_id; }
    }
    println!("worst reprojection {worst:.3e} at vertex {worst_id}");
    let v = gt_loaded.vertices[worst_id as usize];
    println!("vertex bits loaded: {:?}", v.map(f64::to_bits));
}
