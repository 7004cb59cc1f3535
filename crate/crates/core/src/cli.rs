//! The `atlas` command line: build, validate, replot-sim, serve, and
//! generate-mock for a synthetic dataset.
//!
//! Exit codes: 0 ok, 1 validation failure, 2 I/O, 3 provider.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::atlas::{build_atlas, load_atlas, load_build_input, save_atlas, to_canonical_json, Atlas, AtlasError, Bounds, BuildManifest};
use crate::dataset::{generate_mock_dataset, DatasetError, DatasetShape, FULL_TERM_COUNT, FULL_TEXTURE_COUNT};
use crate::embedding::{trustworthiness, Metric, UmapParams};
use crate::gateway::{raster, ImageBytes, MockSeedConfig, ProviderError, ProviderSet};
use crate::replot::{replot_frame, ReplotError, ReplotRecord};
use crate::rng::SplitMix64;
use crate::service::{ServiceConfig, ServiceError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;

/// Neighborhood size for the build report's trustworthiness.
pub const REPORT_K: usize = 15;

#[derive(Debug, Parser)]
#[command(name = "atlas", version, about = "Build, check and serve dual texture/term maps")]
pub struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for map fitting (build) or the mock providers (replot-sim, serve, generate-mock).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Data directory: default output of build, image root for replot-sim, store for serve.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit both maps from a manifest and write the atlas.
    Build(BuildArgs),
    /// Check every invariant of an atlas file.
    Validate { atlas: PathBuf },
    /// Replot N generated frames into an atlas in memory and report.
    ReplotSim {
        atlas: PathBuf,
        #[arg(long, default_value_t = 10)]
        frames: usize,
    },
    /// Run the HTTP service.
    Serve {
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
    },
    /// Write a synthetic dataset (manifest, embeddings, images) made by the mock providers.
    GenerateMock {
        dir: PathBuf,
        #[arg(long, default_value_t = FULL_TERM_COUNT)]
        terms: usize,
        #[arg(long, default_value_t = FULL_TEXTURE_COUNT)]
        textures: usize,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct BuildArgs {
    pub manifest: PathBuf,
    /// Output path; defaults to the manifest's `output`, else `<data-dir>/atlas.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n_neighbors: Option<usize>,
    #[arg(long)]
    pub min_dist: Option<f64>,
    #[arg(long)]
    pub metric: Option<Metric>,
    #[arg(long)]
    pub n_epochs: Option<usize>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<AtlasError> for CliError {
    fn from(e: AtlasError) -> Self {
        let code = match &e {
            AtlasError::Io { .. } => EXIT_IO,
            AtlasError::Staging { .. } => EXIT_PROVIDER,
            _ => EXIT_VALIDATION,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<ProviderError> for CliError {
    fn from(e: ProviderError) -> Self {
        CliError { code: EXIT_PROVIDER, message: e.to_string() }
    }
}

impl From<ReplotError> for CliError {
    fn from(e: ReplotError) -> Self {
        let code = match &e {
            ReplotError::Provider { .. } | ReplotError::Dimension { .. } => EXIT_PROVIDER,
            ReplotError::Io { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Atlas(a) => a.into(),
            DatasetError::Provider { .. } | DatasetError::Decode { .. } => CliError { code: EXIT_PROVIDER, message: e.to_string() },
            DatasetError::Io { .. } => CliError { code: EXIT_IO, message: e.to_string() },
            _ => CliError { code: EXIT_VALIDATION, message: e.to_string() },
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Atlas(a) => a.into(),
            ServiceError::Provider(p) => p.into(),
            ServiceError::Io { .. } => CliError { code: EXIT_IO, message: e.to_string() },
            _ => CliError { code: EXIT_VALIDATION, message: e.to_string() },
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trustworthiness {
    pub image: f64,
    pub k: usize,
    pub text: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuildReport {
    pub output: PathBuf,
    pub sha256: String,
    pub terms: usize,
    pub textures: usize,
    pub trustworthiness: Trustworthiness,
    pub wall_time_secs: f64,
}

/// Builds the atlas described by a manifest. Parameters come from the
/// defaults, then the manifest, then the flags.
pub fn cmd_build(args: &BuildArgs, seed: Option<u64>, data_dir: Option<&Path>) -> Result<BuildReport, CliError> {
    let start = Instant::now();
    let manifest = BuildManifest::load(&args.manifest)?;
    let mut params = manifest.params.apply(UmapParams::default());
    if let Some(v) = args.n_neighbors {
        params.n_neighbors = v;
    }
    if let Some(v) = args.min_dist {
        params.min_dist = v;
    }
    if let Some(v) = args.metric {
        params.metric = v;
    }
    if let Some(v) = args.n_epochs {
        params.n_epochs = v;
    }
    if let Some(v) = seed {
        params.seed = v;
    }
    let output = match (&args.out, &manifest.output, data_dir) {
        (Some(p), _, _) => p.clone(),
        (None, Some(p), _) => manifest.resolve(p),
        (None, None, Some(d)) => d.join("atlas.json"),
        (None, None, None) => PathBuf::from("atlas.json"),
    };

    let input = load_build_input(&manifest, None)?;
    let (text_vectors, image_vectors) = ordered_vectors(&input);
    let atlas = build_atlas(input, &params)?;
    save_atlas(&atlas, &output)?;
    let bytes = to_canonical_json(&atlas)?;

    let trust = |vectors: &[Vec<f32>], coords| {
        let k = REPORT_K.min(vectors.len().saturating_sub(2) * 2 / 3);
        trustworthiness(vectors, coords, k.max(1), params.metric).unwrap_or(f64::NAN)
    };
    let trustworthiness = Trustworthiness {
        image: trust(&image_vectors, &atlas.image_coords()),
        k: REPORT_K,
        text: trust(&text_vectors, &atlas.text_coords()),
    };
    Ok(BuildReport {
        output,
        sha256: sha256_hex(bytes.as_bytes()),
        terms: atlas.terms.len(),
        textures: atlas.textures.len(),
        trustworthiness,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Input vectors in the record order the atlas uses (sorted by id).
fn ordered_vectors(input: &crate::atlas::AtlasInput) -> (Vec<Vec<f32>>, Vec<Vec<f32>>) {
    let mut terms: Vec<_> = input.terms.iter().map(|t| (&t.term_id, &t.text_embedding_id)).collect();
    terms.sort();
    let mut textures: Vec<_> = input.textures.iter().map(|t| (&t.texture_id, &t.image_embedding_id)).collect();
    textures.sort();
    let text = terms.iter().filter_map(|(_, e)| input.text_embeddings.get(*e).cloned()).collect();
    let image = textures.iter().filter_map(|(_, e)| input.image_embeddings.get(*e).cloned()).collect();
    (text, image)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidateReport {
    pub dynamic_points: usize,
    pub path: PathBuf,
    pub terms: usize,
    pub textures: usize,
    pub valid: bool,
}

pub fn cmd_validate(path: &Path) -> Result<ValidateReport, CliError> {
    let atlas = load_atlas(path)?;
    Ok(ValidateReport {
        dynamic_points: atlas.dynamic_points.len(),
        path: path.to_path_buf(),
        terms: atlas.terms.len(),
        textures: atlas.textures.len(),
        valid: true,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplotSimReport {
    pub determinism_hash: String,
    pub frames: usize,
    /// Bounds of the replotted coordinates, absent when no frame was replotted.
    pub image_bounds: Option<Bounds>,
    pub records: Vec<ReplotRecord>,
    pub text_bounds: Option<Bounds>,
    /// Whether every replotted point lies inside its map's bounds grown by 25% per side.
    pub within_expanded_bounds: bool,
}

/// Interpolates between seeded texture pairs, picks one frame from each
/// video and replots it. The atlas file is not modified.
pub fn cmd_replot_sim(atlas_path: &Path, frames: usize, seed: u64, image_root: Option<&Path>) -> Result<ReplotSimReport, CliError> {
    let mut atlas = load_atlas(atlas_path)?;
    let root = image_root.map(Path::to_path_buf).or_else(|| atlas_path.parent().map(Path::to_path_buf)).unwrap_or_default();
    let providers = ProviderSet::mock(MockSeedConfig::with_seed(seed));
    let mut rng = SplitMix64::derive(seed, 0x5EED);
    let n = atlas.textures.len();
    for i in 0..frames {
        let a = rng.below(n);
        let b = (a + 1 + rng.below(n.max(2) - 1)) % n;
        let video = providers.interpolate_video(&texture_image(&atlas, a, &root), &texture_image(&atlas, b, &root))?;
        let index = rng.below(video.len());
        replot_frame(&mut atlas, &providers, &video[index], &format!("sim-{i:04}"), index)?;
    }
    let records = atlas.dynamic_points.clone();
    let grown = (atlas.bounds.image.expanded(0.25), atlas.bounds.text.expanded(0.25));
    let within = records.iter().all(|r| grown.0.contains(r.image_coord) && grown.1.contains(r.text_coord));
    let bounds_of = |f: fn(&ReplotRecord) -> [f64; 2]| (!records.is_empty()).then(|| Bounds::from_coords(&records.iter().map(f).collect::<Vec<_>>()));
    let hash_input = serde_json::to_vec(&records).map_err(|e| CliError { code: EXIT_VALIDATION, message: e.to_string() })?;
    Ok(ReplotSimReport {
        determinism_hash: sha256_hex(&hash_input),
        frames,
        image_bounds: bounds_of(|r| r.image_coord),
        text_bounds: bounds_of(|r| r.text_coord),
        records,
        within_expanded_bounds: within,
    })
}

/// The stored texture image, or a stand-in keyed by the texture id when
/// the file is not available.
fn texture_image(atlas: &Atlas, index: usize, root: &Path) -> ImageBytes {
    let t = &atlas.textures[index];
    match std::fs::read(root.join(&t.image_path)) {
        Ok(bytes) => ImageBytes(bytes),
        Err(_) => {
            let key = MockSeedConfig::default().hash("stand-in", &[t.texture_id.as_bytes()]);
            raster::encode(&raster::noise_texture(key, raster::TEXTURE_SIZE))
        }
    }
}

pub fn cmd_serve(config: Option<&Path>, listen: Option<String>, seed: Option<u64>, data_dir: Option<PathBuf>) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    }
    .with_env(|k| std::env::var(k).ok())?;
    if let Some(l) = listen {
        cfg.listen = l;
    }
    if let Some(s) = seed {
        cfg.provider.seed = s;
    }
    if let Some(d) = data_dir {
        cfg.data_dir = d;
    }
    let providers = ProviderSet::from_config(&cfg.provider)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError { code: EXIT_IO, message: e.to_string() })?;
    runtime.block_on(crate::service::serve(&cfg, providers, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(())
}

/// Parses `args`, runs the command, prints to `out` and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(out, "{e}");
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let json = cli.json;
    let result = execute(cli);
    let (code, text) = match result {
        Ok(report) => (EXIT_OK, if json { report.json } else { report.human }),
        Err(e) => {
            let text = if json {
                serde_json::json!({ "error": e.message, "exit_code": e.code, "ok": false }).to_string()
            } else {
                format!("error: {}", e.message)
            };
            (e.code, text)
        }
    };
    let _ = writeln!(out, "{text}");
    code
}

struct Rendered {
    json: String,
    human: String,
}

fn render<T: Serialize>(report: &T, human: String) -> Rendered {
    Rendered { json: serde_json::to_string(report).unwrap_or_default(), human }
}

fn execute(cli: Cli) -> Result<Rendered, CliError> {
    let data_dir = cli.data_dir.clone();
    match cli.command {
        Command::Build(args) => {
            let r = cmd_build(&args, cli.seed, data_dir.as_deref())?;
            let human = format!(
                "wrote {} ({} terms, {} textures) in {:.1}s\ntrustworthiness@{}: image {:.4}, text {:.4}\nsha256 {}",
                r.output.display(),
                r.terms,
                r.textures,
                r.wall_time_secs,
                r.trustworthiness.k,
                r.trustworthiness.image,
                r.trustworthiness.text,
                r.sha256
            );
            Ok(render(&r, human))
        }
        Command::Validate { atlas } => {
            let r = cmd_validate(&atlas)?;
            let human = format!("{}: valid ({} terms, {} textures, {} dynamic points)", r.path.display(), r.terms, r.textures, r.dynamic_points);
            Ok(render(&r, human))
        }
        Command::ReplotSim { atlas, frames } => {
            let r = cmd_replot_sim(&atlas, frames, cli.seed.unwrap_or(42), data_dir.as_deref())?;
            let mut human = format!("replotted {} frames, determinism hash {}\n", r.frames, r.determinism_hash);
            for rec in &r.records {
                let _ = writeln!(
                    human,
                    "  {} {:<14} image ({:.3}, {:.3}) text ({:.3}, {:.3})",
                    rec.replot_id, rec.surface, rec.image_coord[0], rec.image_coord[1], rec.text_coord[0], rec.text_coord[1]
                );
            }
            let _ = write!(human, "within bounds grown by 25%: {}", r.within_expanded_bounds);
            Ok(render(&r, human))
        }
        Command::Serve { config, listen } => {
            cmd_serve(config.as_deref(), listen, cli.seed, data_dir)?;
            Ok(Rendered { json: "{\"ok\":true}".into(), human: "service stopped".into() })
        }
        Command::GenerateMock { dir, terms, textures } => {
            let s = generate_mock_dataset(&dir, &DatasetShape { terms, textures, seed: cli.seed.unwrap_or(42) })?;
            #[derive(Serialize)]
            struct Out<'a> {
                manifest: &'a Path,
                partial_terms: usize,
                terms: usize,
                textures: usize,
            }
            let human = format!(
                "wrote {} ({} terms, {} textures, {} with a failed third texture)",
                s.manifest_path.display(),
                s.terms,
                s.textures,
                s.partial_terms
            );
            Ok(render(&Out { manifest: &s.manifest_path, partial_terms: s.partial_terms, terms: s.terms, textures: s.textures }, human))
        }
    }
}
