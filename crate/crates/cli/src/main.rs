//! Command-line front end: every pipeline stage as a subcommand plus the
//! synthetic fixture generator.
//!
//! Exit codes: 0 success, 2 configuration error (bad flags, unreadable or
//! inconsistent inputs), 3 stage failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use headfit_core::error::Error;
use headfit_core::fixture::{self, FixtureOptions};
use headfit_core::image::Image;
use headfit_core::mesh::{self, CameraFile};
use headfit_core::pipeline::{self, artifact, PipelineConfig};
use headfit_core::texcomplete::{self, RegionLabelMap, TexCompleteConfig};
use headfit_core::{assetmatch, geomfit, texfit};

#[derive(Parser)]
#[command(name = "headfit", version, about = "Landmark-guided head mesh and texture fitting")]
struct Cli {
    /// Pipeline config file (TOML); required by the fitting subcommands.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; 1 is the fully deterministic reference mode.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Seed for fixture generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct GeomFitOverrides {
    /// Total-variation weight.
    #[arg(long)]
    lambda_tv: Option<f64>,
    /// Symmetry weight.
    #[arg(long)]
    lambda_sym: Option<f64>,
    /// Optimization iterations.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr_triplane: Option<f64>,
    #[arg(long)]
    lr_camera: Option<f64>,
    /// Use squared landmark residuals.
    #[arg(long)]
    squared_lmk: bool,
}

impl GeomFitOverrides {
    fn apply(&self, config: &mut headfit_core::geomfit::GeomFitConfig) {
        if let Some(v) = self.lambda_tv {
            config.lambda_tv = v;
        }
        if let Some(v) = self.lambda_sym {
            config.lambda_sym = v;
        }
        if let Some(v) = self.iters {
            config.iterations = v;
        }
        if let Some(v) = self.lr_triplane {
            config.lr_triplane = v;
        }
        if let Some(v) = self.lr_camera {
            config.lr_camera = v;
        }
        if self.squared_lmk {
            config.squared_landmarks = true;
        }
    }
}

#[derive(Args, Clone, Default)]
struct TexFitOverrides {
    /// Texture resolution hierarchy, e.g. 32,128,512,1024.
    #[arg(long, value_delimiter = ',')]
    hierarchy: Option<Vec<usize>>,
    /// TV weight on the rendered image.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters_per_level: Option<usize>,
    /// Use the squared data term.
    #[arg(long)]
    squared_data: bool,
}

impl TexFitOverrides {
    fn apply(&self, config: &mut headfit_core::texfit::TexFitConfig) {
        if let Some(v) = &self.hierarchy {
            config.hierarchy = v.clone();
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.iters_per_level {
            config.iterations_per_level = v;
        }
        if self.squared_data {
            config.squared_data = true;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: fit-geometry, extract-texture,
    /// complete-texture, match-assets, render-preview.
    Pipeline {
        #[command(flatten)]
        geomfit: GeomFitOverrides,
        #[command(flatten)]
        texfit: TexFitOverrides,
    },
    /// Fit the head geometry and camera to the landmarks.
    FitGeometry {
        #[command(flatten)]
        overrides: GeomFitOverrides,
    },
    /// Recover the texture from the portrait through the fitted geometry.
    ExtractTexture {
        /// Fitted mesh (defaults to <out>/fitted_mesh.obj).
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Fitted camera (defaults to <out>/fitted_camera.json).
        #[arg(long)]
        camera: Option<PathBuf>,
        #[command(flatten)]
        overrides: TexFitOverrides,
    },
    /// Correct and complete a fitted texture against the template albedo.
    CompleteTexture {
        #[arg(long)]
        fitted: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        portrait: PathBuf,
        #[arg(long)]
        portrait_labels: PathBuf,
        /// Dilation radius in texels at 1024 resolution.
        #[arg(long)]
        radius: Option<usize>,
        /// Optional RGBA make-up overlay.
        #[arg(long)]
        makeup: Option<PathBuf>,
    },
    /// Select catalog assets by embedding similarity.
    MatchAssets {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        query: PathBuf,
    },
    /// Render a textured mesh from its camera plus three turntable views.
    RenderPreview {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        texture: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        /// Output image path (defaults to <out>/preview.png).
        #[arg(long)]
        out_file: Option<PathBuf>,
        #[arg(long, default_value_t = 512)]
        size: usize,
    },
    /// Generate a synthetic fixture bundle (inputs plus ground truth).
    MakeFixture {
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 512)]
        image_size: usize,
        #[arg(long, default_value_t = 1024)]
        texture_resolution: usize,
        #[arg(long, default_value_t = 431)]
        landmarks: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    if let Err(e) =
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()
    {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(2);
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn is_config_error(e: &Error) -> bool {
    match e {
        Error::Stage { .. } => false,
        e => e.is_config(),
    }
}

fn load_config(cli_config: &Option<PathBuf>) -> Result<PipelineConfig, Error> {
    let path = cli_config.as_ref().ok_or_else(|| Error::Config {
        path: PathBuf::from("--config"),
        msg: "this subcommand requires --config".into(),
    })?;
    PipelineConfig::load_toml(path)
}

fn ensure_out(out: &PathBuf) -> Result<(), Error> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out.clone(), e))
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Pipeline { geomfit, texfit } => {
            let mut config = load_config(&cli.config)?;
            geomfit.apply(&mut config.geomfit);
            texfit.apply(&mut config.texfit);
            let report = pipeline::run_pipeline(&config, &cli.out)?;
            for stage in &report.stages {
                println!("{:<18} {:>8.2} s", stage.stage, stage.seconds);
            }
            println!("{:<18} {:>8.2} s", "total", report.total_seconds);
            println!("artifacts in {}", cli.out.display());
            Ok(())
        }
        Command::FitGeometry { overrides } => {
            let mut config = load_config(&cli.config)?;
            overrides.apply(&mut config.geomfit);
            ensure_out(&cli.out)?;
            let template = mesh::load_mesh(&config.paths.template_mesh)?;
            let landmarks = mesh::LandmarkSet::load(&config.paths.landmarks)?;
            let (intr, init_pose) = CameraFile::load(&config.paths.camera)?.split();
            let (fitted, pose, report) =
                geomfit::fit_geometry(&template, &landmarks, &intr, &init_pose, &config.geomfit)?;
            mesh::save_mesh(&fitted, cli.out.join(artifact::FITTED_MESH))?;
            CameraFile::new(intr, pose).save(cli.out.join(artifact::FITTED_CAMERA))?;
            mesh::write_json(&cli.out.join(artifact::GEOMFIT_REPORT), &report)?;
            std::fs::write(cli.out.join(artifact::GEOMFIT_TRACE), report.trace_csv())
                .map_err(|e| Error::io(cli.out.join(artifact::GEOMFIT_TRACE), e))?;
            println!(
                "fit-geometry: rmse {:.4} px after {} iterations",
                report.final_rmse_px, report.iterations
            );
            Ok(())
        }
        Command::ExtractTexture { mesh: mesh_path, camera, overrides } => {
            let mut config = load_config(&cli.config)?;
            overrides.apply(&mut config.texfit);
            ensure_out(&cli.out)?;
            let mesh_path =
                mesh_path.clone().unwrap_or_else(|| cli.out.join(artifact::FITTED_MESH));
            let camera_path =
                camera.clone().unwrap_or_else(|| cli.out.join(artifact::FITTED_CAMERA));
            let fitted = mesh::load_mesh(&mesh_path)?;
            let (intr, pose) = CameraFile::load(&camera_path)?.split();
            let portrait = Image::load(&config.paths.portrait)?;
            let (texture, report) =
                texfit::fit_texture(&fitted, &pose, &intr, &portrait, &config.texfit)?;
            texture.save_f32(cli.out.join(artifact::TEXTURE_F32))?;
            texture.save_png(cli.out.join(artifact::TEXTURE_PNG))?;
            mesh::write_json(&cli.out.join(artifact::TEXFIT_REPORT), &report)?;
            std::fs::write(cli.out.join(artifact::TEXFIT_TRACE), report.trace_csv())
                .map_err(|e| Error::io(cli.out.join(artifact::TEXFIT_TRACE), e))?;
            println!(
                "extract-texture: final loss {:.4} over {} covered pixels",
                report.final_loss, report.covered_pixels
            );
            Ok(())
        }
        Command::CompleteTexture {
            fitted,
            labels,
            template,
            portrait,
            portrait_labels,
            radius,
            makeup,
        } => {
            ensure_out(&cli.out)?;
            let mut config = TexCompleteConfig::default();
            if let Some(r) = radius {
                config.dilation_radius = *r;
            }
            config.makeup_overlay = makeup.clone();
            let fitted = Image::load(fitted)?;
            let labels = RegionLabelMap::load_png(labels)?;
            let template = Image::load(template)?;
            let portrait = Image::load(portrait)?;
            let portrait_labels = RegionLabelMap::load_png(portrait_labels)?;
            let albedo = texcomplete::complete_texture(
                &fitted,
                &labels,
                &template,
                &portrait,
                &portrait_labels,
                &config,
            )?;
            albedo.save_f32(cli.out.join(artifact::ALBEDO_F32))?;
            albedo.save_png(cli.out.join(artifact::ALBEDO_PNG))?;
            println!("complete-texture: wrote {}", cli.out.join(artifact::ALBEDO_PNG).display());
            Ok(())
        }
        Command::MatchAssets { catalog, query } => {
            ensure_out(&cli.out)?;
            let catalog = assetmatch::AssetCatalog::load(catalog)?;
            let query = assetmatch::load_query(query)?;
            let matches = assetmatch::match_all(&query, &catalog)?;
            let manifest: std::collections::BTreeMap<String, pipeline::MatchedAsset> = matches
                .iter()
                .map(|(category, entry)| {
                    let similarity =
                        assetmatch::cosine_similarity(&query[category], &entry.embedding)
                            .expect("validated embeddings");
                    (
                        category.name().to_string(),
                        pipeline::MatchedAsset {
                            id: entry.id.clone(),
                            label_text: entry.label_text.clone(),
                            similarity,
                            attributes: entry.attributes.clone(),
                        },
                    )
                })
                .collect();
            mesh::write_json(&cli.out.join(artifact::ASSETS), &manifest)?;
            for (category, m) in &manifest {
                println!("{category:<10} -> {} ({:.3})", m.id, m.similarity);
            }
            Ok(())
        }
        Command::RenderPreview { mesh: mesh_path, texture, camera, out_file, size } => {
            ensure_out(&cli.out)?;
            let mesh = mesh::load_mesh(mesh_path)?;
            let texture = Image::load(texture)?;
            let (intr, pose) = CameraFile::load(camera)?.split();
            let out_path =
                out_file.clone().unwrap_or_else(|| cli.out.join(artifact::PREVIEW));
            pipeline::render_preview(&mesh, &texture, &pose, &intr, *size, *size, &out_path)?;
            println!("render-preview: wrote {}", out_path.display());
            Ok(())
        }
        Command::MakeFixture { grid, image_size, texture_resolution, landmarks } => {
            let options = FixtureOptions {
                seed: cli.seed,
                grid: *grid,
                image_size: *image_size,
                texture_resolution: *texture_resolution,
                landmark_count: *landmarks,
            };
            let manifest = fixture::make_fixture(&options, &cli.out)?;
            println!(
                "fixture seed {} in {} ({} files, initial rmse {:.2} px)",
                manifest.seed,
                cli.out.display(),
                manifest.files.len(),
                manifest.initial_rmse_px
            );
            Ok(())
        }
    }
}
