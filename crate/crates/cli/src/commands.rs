use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use idforge_core::baselines::{
    dbscan, default_eps, default_lof_neighbors, filter_by_labels, filter_by_scores, lof_scores,
    mahalanobis_compactness, MahalanobisMetric, DBSCAN_DEFAULT_MIN_PTS, DEFAULT_SHRINKAGE,
};
use idforge_core::injection::{DenoiseSource, InjectionConfig};
use idforge_core::synth::precision_recall;
use idforge_core::{
    discover_identity, generate_embeddings, make_schedule, DiscoveryConfig, EmbeddingMatrix, RankSelection, Schedule,
    SyntheticEmbeddingConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats::{self, Format};
use crate::report;
use crate::story::{self, SimulationConfig, Story, StorySpec, DEFAULT_PRIOR_STD};

/// Kernel schedule formula recorded with every simulation.
pub const KERNEL_FORMULA: &str = "K_i = round((t' - i) / t' * k_max)";

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Write seeded synthetic embedding sets with ground-truth labels.
    GenEmbeddings(GenArgs),
    /// Run iterative identity discovery on one embedding file.
    Discover(DiscoverArgs),
    /// Compare discovery against naive averaging, LOF and DBSCAN.
    Compare(CompareArgs),
    /// Render a toy story with identity injection.
    Simulate(SimulateArgs),
    /// Render comparison or sweep CSVs as SVG charts.
    Report(ReportArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DiscoveryArgs {
    #[arg(long, env = "IDFORGE_RATIO", default_value_t = 0.6)]
    pub ratio: f64,
    #[arg(long, env = "IDFORGE_ITERS", default_value_t = 3)]
    pub iters: usize,
    /// Retained singular directions [default: 1].
    #[arg(long, env = "IDFORGE_TOPK", conflicts_with = "energy")]
    pub topk: Option<usize>,
    /// Choose the rank as the smallest count reaching this energy fraction.
    #[arg(long, env = "IDFORGE_ENERGY")]
    pub energy: Option<f64>,
    #[arg(long, env = "IDFORGE_MIN_KEEP", default_value_t = 1)]
    pub min_keep: usize,
    /// Unit-normalise rows before filtering.
    #[arg(long, env = "IDFORGE_NORMALIZE")]
    pub normalize: bool,
}

impl Default for DiscoveryArgs {
    fn default() -> Self {
        Self { ratio: 0.6, iters: 3, topk: None, energy: None, min_keep: 1, normalize: false }
    }
}

impl DiscoveryArgs {
    pub fn config(&self) -> CliResult<DiscoveryConfig> {
        let rank = match (self.topk, self.energy) {
            (Some(k), None) => RankSelection::Fixed(k),
            (None, Some(e)) => RankSelection::Energy(e),
            (None, None) => DiscoveryConfig::default().rank,
            (Some(_), Some(_)) => return Err(CliError::Config("--topk and --energy are exclusive".into())),
        };
        let cfg = DiscoveryConfig {
            rank,
            ratio: self.ratio,
            iterations: self.iters,
            min_keep: self.min_keep,
            normalize_rows: self.normalize,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "IDFORGE_DIM", default_value_t = 512)]
    pub dim: usize,
    #[arg(long, env = "IDFORGE_SAMPLES", default_value_t = 64)]
    pub samples: usize,
    #[arg(long, env = "IDFORGE_SIGMA_IN", default_value_t = 0.1)]
    pub sigma_in: f64,
    #[arg(long, env = "IDFORGE_SUBSPACE_DIM", default_value_t = 8)]
    pub subspace_dim: usize,
    #[arg(long, env = "IDFORGE_AMBIENT_STD", default_value_t = 0.005)]
    pub ambient_std: f64,
    #[arg(long, env = "IDFORGE_CONTAMINATION", default_value_t = 0.3)]
    pub contamination: f64,
    #[arg(long, env = "IDFORGE_IDENTITIES", default_value_t = 4)]
    pub identities: usize,
    #[arg(long, env = "IDFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "IDFORGE_FORMAT", value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

impl GenArgs {
    pub fn config(&self) -> SyntheticEmbeddingConfig {
        SyntheticEmbeddingConfig {
            dim: self.dim,
            samples: self.samples,
            sigma_in: self.sigma_in,
            subspace_dim: self.subspace_dim,
            ambient_std: self.ambient_std,
            contamination: self.contamination,
            num_identities: self.identities,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DiscoverArgs {
    pub input: PathBuf,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub discovery: DiscoveryArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    /// Embedding files, or directories whose embedding files are all used.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// CSV path.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub discovery: DiscoveryArgs,
    #[arg(long, env = "IDFORGE_SHRINKAGE", default_value_t = DEFAULT_SHRINKAGE)]
    pub shrinkage: f64,
    /// LOF neighbourhood size [default: max(5, m/10)].
    #[arg(long, env = "IDFORGE_LOF_NEIGHBORS")]
    pub lof_neighbors: Option<usize>,
    /// DBSCAN radius [default: half the median pairwise distance].
    #[arg(long, env = "IDFORGE_EPS")]
    pub eps: Option<f64>,
    #[arg(long, env = "IDFORGE_MIN_PTS", default_value_t = DBSCAN_DEFAULT_MIN_PTS)]
    pub min_pts: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// StorySpec JSON.
    pub story: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "t-prime", env = "IDFORGE_T_PRIME", default_value_t = 40)]
    pub t_prime: usize,
    #[arg(long, env = "IDFORGE_K_MAX", default_value_t = 50)]
    pub k_max: usize,
    #[arg(long, env = "IDFORGE_LATENT_SIDE", default_value_t = 32)]
    pub latent_side: usize,
    /// Overrides the story's seed.
    #[arg(long, env = "IDFORGE_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "IDFORGE_PRIOR_STD", default_value_t = DEFAULT_PRIOR_STD)]
    pub prior_std: f64,
    #[arg(long, env = "IDFORGE_SAMPLES", default_value_t = 64)]
    pub samples: usize,
    #[arg(long, env = "IDFORGE_CONTAMINATION", default_value_t = 0.3)]
    pub contamination: f64,
    /// Which latent the identity denoisers read: composed or cached.
    #[arg(long, env = "IDFORGE_DENOISE_SOURCE", default_value = "composed", value_parser = story::parse_denoise_source)]
    pub denoise_source: DenoiseSource,
    /// Also sweep these start levels and write sweep.csv.
    #[arg(long = "sweep-t-prime", env = "IDFORGE_SWEEP_T_PRIME", value_delimiter = ',')]
    pub sweep_t_prime: Vec<usize>,
    #[command(flatten)]
    pub discovery: DiscoveryArgs,
    #[arg(long, env = "IDFORGE_FORMAT", value_enum, default_value_t = Format::Bin)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory; one SVG per CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Redirect the replayed command's output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Files a command read and wrote, plus a line for the terminal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub summary: String,
}

impl Command {
    /// The path a manifest for this command is written next to.
    pub fn out_path(&self) -> Option<&Path> {
        match self {
            Command::GenEmbeddings(a) => Some(&a.out),
            Command::Discover(a) => Some(&a.out),
            Command::Compare(a) => Some(&a.out),
            Command::Simulate(a) => Some(&a.out),
            Command::Report(a) => Some(&a.out),
            Command::Replay(_) => None,
        }
    }

    pub fn set_out_path(&mut self, out: PathBuf) {
        match self {
            Command::GenEmbeddings(a) => a.out = out,
            Command::Discover(a) => a.out = out,
            Command::Compare(a) => a.out = out,
            Command::Simulate(a) => a.out = out,
            Command::Report(a) => a.out = out,
            Command::Replay(a) => a.out = Some(out),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::GenEmbeddings(_) => "gen-embeddings",
            Command::Discover(_) => "discover",
            Command::Compare(_) => "compare",
            Command::Simulate(_) => "simulate",
            Command::Report(_) => "report",
            Command::Replay(_) => "replay",
        }
    }

    /// Runs the command without writing a manifest.
    pub fn execute(&self) -> CliResult<Outcome> {
        match self {
            Command::GenEmbeddings(a) => gen_embeddings(a),
            Command::Discover(a) => discover(a),
            Command::Compare(a) => compare(a),
            Command::Simulate(a) => simulate(a),
            Command::Report(a) => run_report(a),
            Command::Replay(_) => Err(CliError::Config("replay must go through the manifest runner".into())),
        }
    }
}

pub fn gen_embeddings(a: &GenArgs) -> CliResult<Outcome> {
    let sets = generate_embeddings(&a.config())?;
    let mut outputs = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let path = a.out.join(format!("identity_{i:02}.{}", a.format.extension()));
        outputs.extend(formats::write_matrix(&path, set.embeddings.matrix(), Some(&set.inlier), a.format)?);
    }
    Ok(Outcome {
        inputs: vec![],
        summary: format!("wrote {} identities of {}x{} to {}", sets.len(), a.samples, a.dim, a.out.display()),
        outputs,
    })
}

fn prepare(e: EmbeddingMatrix, cfg: &DiscoveryConfig) -> EmbeddingMatrix {
    if cfg.normalize_rows {
        e.normalized()
    } else {
        e
    }
}

pub fn discover(a: &DiscoverArgs) -> CliResult<Outcome> {
    let cfg = a.discovery.config()?;
    let data = formats::read_matrix(&a.input)?;
    let e = prepare(data.embeddings()?, &cfg);
    let report = discover_identity(&e, &cfg)?;
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    formats::write_file(&a.out, json.as_bytes())?;
    let kept = report.kept_ids().len();
    Ok(Outcome {
        inputs: vec![a.input.clone()],
        outputs: vec![a.out.clone()],
        summary: format!("retained {kept}/{} ({:.3})", report.initial_count, report.retained_fraction),
    })
}

/// Embedding files named directly, plus those inside named directories in
/// file-name order.
pub fn expand_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::io(p, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|f| matches!(f.extension().and_then(|x| x.to_str()), Some("emb" | "embf")))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("no embedding files found".into()));
    }
    Ok(out)
}

pub const COMPARE_HEADER: [&str; 8] =
    ["identity", "method", "retained", "total", "compactness", "self_compactness", "precision", "recall"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub identity: String,
    pub method: String,
    pub retained: usize,
    pub total: usize,
    /// Mean distance to the group mean under the metric fitted on the full set.
    pub compactness: f64,
    /// The same with the metric refitted on the retained rows alone.
    pub self_compactness: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Retained groups of every method on one embedding set: naive, discovery,
/// LOF (keeping as many rows as discovery), DBSCAN (non-noise rows, or every
/// row when all are noise).
pub fn method_groups(e: &EmbeddingMatrix, a: &CompareArgs) -> CliResult<Vec<(&'static str, EmbeddingMatrix)>> {
    let cfg = a.discovery.config()?;
    let e = prepare(e.clone(), &cfg);
    let report = discover_identity(&e, &cfg)?;
    let disc = e.select(&report.kept_ids().iter().map(|id| position(&e, *id)).collect::<Vec<_>>());
    let mut groups = vec![("naive", e.clone()), ("discovery", disc.clone())];
    if e.len() >= 3 {
        let k = a.lof_neighbors.unwrap_or_else(|| default_lof_neighbors(e.len()));
        let scores = lof_scores(&e, k)?;
        groups.push(("lof", filter_by_scores(&e, &scores, disc.len())?));
    }
    let eps = a.eps.unwrap_or_else(|| default_eps(&e));
    let labels = dbscan(&e, eps, a.min_pts)?;
    groups.push(("dbscan", filter_by_labels(&e, &labels).unwrap_or_else(|| e.clone())));
    Ok(groups)
}

fn position(e: &EmbeddingMatrix, id: usize) -> usize {
    e.source_ids().iter().position(|&s| s == id).expect("kept id comes from this set")
}

pub fn compare_rows(
    name: &str,
    e: &EmbeddingMatrix,
    labels: Option<&[bool]>,
    a: &CompareArgs,
) -> CliResult<Vec<CompareRow>> {
    let groups = method_groups(e, a)?;
    let metric = MahalanobisMetric::fit(&groups[0].1, a.shrinkage)?;
    groups
        .into_iter()
        .map(|(method, g)| {
            let (precision, recall) = match labels {
                Some(l) => {
                    let (p, r) = precision_recall(g.source_ids(), l);
                    (Some(p), Some(r))
                }
                None => (None, None),
            };
            let self_compactness = if g.len() >= 2 { mahalanobis_compactness(&g, a.shrinkage)? } else { 0.0 };
            Ok(CompareRow {
                identity: name.to_string(),
                method: method.to_string(),
                retained: g.len(),
                total: e.len(),
                compactness: metric.compactness(&g)?,
                self_compactness,
                precision,
                recall,
            })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_compare_csv(path: &Path, rows: &[CompareRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(COMPARE_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.identity.clone(),
            r.method.clone(),
            r.retained.to_string(),
            r.total.to_string(),
            r.compactness.to_string(),
            r.self_compactness.to_string(),
            opt(r.precision),
            opt(r.recall),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?;
    formats::write_file(path, &bytes)
}

pub fn compare(a: &CompareArgs) -> CliResult<Outcome> {
    let files = expand_inputs(&a.inputs)?;
    let mut rows = Vec::new();
    for f in &files {
        let data = formats::read_matrix(f)?;
        let name = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        rows.extend(compare_rows(&name, &data.embeddings()?, data.labels.as_deref(), a)?);
    }
    write_compare_csv(&a.out, &rows)?;
    let mut disc_wins = 0;
    for f in &files {
        let name = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let group: Vec<&CompareRow> = rows.iter().filter(|r| r.identity == name).collect();
        if let Some(d) = group.iter().find(|r| r.method == "discovery") {
            disc_wins += usize::from(group.iter().all(|r| d.compactness <= r.compactness));
        }
    }
    Ok(Outcome {
        summary: format!("{} identities; discovery most compact on {disc_wins}", files.len()),
        inputs: files,
        outputs: vec![a.out.clone()],
    })
}

pub const SWEEP_HEADER: [&str; 4] = ["t_prime", "background_deviation", "identity_correlation", "seam"];

impl SimulateArgs {
    pub fn config(&self) -> CliResult<SimulationConfig> {
        if self.latent_side == 0 {
            return Err(CliError::Config("--latent-side must be positive".into()));
        }
        if !(self.prior_std >= 0.0) {
            return Err(CliError::Config("--prior-std must be nonnegative".into()));
        }
        Ok(SimulationConfig {
            latent_side: self.latent_side,
            injection: InjectionConfig {
                start_t_prime: self.t_prime,
                k_max: self.k_max,
                denoise_source: self.denoise_source,
            },
            prior_std: self.prior_std,
            samples: self.samples,
            contamination: self.contamination,
            discovery: self.discovery.config()?,
        })
    }
}

pub fn load_story(path: &Path) -> CliResult<StorySpec> {
    let bytes = formats::read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::parse(path, format!("line {}: {e}", e.line())))
}

fn schedule() -> Schedule {
    make_schedule(1000, 50, 1e-4, 0.02).expect("default schedule is valid")
}

pub fn write_sweep_csv(path: &Path, points: &[story::SweepPoint]) -> CliResult<()> {
    let mut text = SWEEP_HEADER.join(",");
    text.push('\n');
    for p in points {
        writeln!(text, "{},{},{},{}", p.t_prime, p.background_deviation, p.identity_correlation, p.seam)
            .expect("string");
    }
    formats::write_file(path, text.as_bytes())
}

pub fn simulate(a: &SimulateArgs) -> CliResult<Outcome> {
    let cfg = a.config()?;
    let mut spec = load_story(&a.story)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let sched = schedule();
    if cfg.injection.start_t_prime > sched.steps() || a.sweep_t_prime.iter().any(|&t| t > sched.steps()) {
        return Err(CliError::Config(format!("start levels must not exceed {}", sched.steps())));
    }
    let story = Story::prepare(spec, &cfg, &sched)?;
    let shots = story.render(&cfg.injection, &sched)?;
    let ext = a.format.extension();
    let mut outputs = Vec::new();

    let mut steps = String::from("prompt,level,kernel,background_cells,character_cells\n");
    let mut metrics = String::from("prompt,character,identity_correlation,background_deviation,seam\n");
    for (i, (template, shot)) in story.templates.iter().zip(&shots).enumerate() {
        outputs.extend(formats::write_grid(&a.out.join(format!("z0_{i:02}.{ext}")), &shot.trace.latent, a.format)?);
        outputs.extend(formats::write_grid(
            &a.out.join(format!("template_{i:02}.{ext}")),
            template.trajectory.final_latent(),
            a.format,
        )?);
        for (j, m) in template.masks.characters().iter().enumerate() {
            let path = a.out.join(format!("mask_{i:02}_{j}.pgm"));
            formats::write_mask(&path, m)?;
            outputs.push(path);
        }
        for s in &shot.trace.steps {
            let cells: Vec<String> = s.character_cells.iter().map(|c| c.to_string()).collect();
            writeln!(steps, "{i},{},{},{},{}", s.level, s.kernel, s.background_cells, cells.join(";")).expect("string");
        }
        for c in &shot.scores {
            writeln!(
                metrics,
                "{i},{},{},{},{}",
                c.character, c.identity_correlation, shot.background_deviation, shot.seam
            )
            .expect("string");
        }
    }
    for (j, c) in story.characters.iter().enumerate() {
        outputs.extend(formats::write_grid(&a.out.join(format!("identity_{j:02}.{ext}")), &c.target, a.format)?);
    }
    for (name, body) in [("steps.csv", steps), ("metrics.csv", metrics)] {
        let path = a.out.join(name);
        formats::write_file(&path, body.as_bytes())?;
        outputs.push(path);
    }
    if !a.sweep_t_prime.is_empty() {
        let points = story::sweep(&story, &cfg.injection, &a.sweep_t_prime, &sched)?;
        let path = a.out.join("sweep.csv");
        write_sweep_csv(&path, &points)?;
        outputs.push(path);
    }
    Ok(Outcome {
        inputs: vec![a.story.clone()],
        summary: format!(
            "rendered {} prompt(s) for {} character(s); {KERNEL_FORMULA}",
            story.templates.len(),
            story.characters.len()
        ),
        outputs,
    })
}

pub fn run_report(a: &ReportArgs) -> CliResult<Outcome> {
    let mut outputs = Vec::new();
    let mut charts = Vec::new();
    for input in &a.inputs {
        let text = String::from_utf8(formats::read_file(input)?).map_err(|_| CliError::parse(input, "not UTF-8"))?;
        let svg = report::render_csv(&text).map_err(|m| CliError::parse(input, m))?;
        let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "chart".into());
        charts.push((a.out.join(format!("{stem}.svg")), svg));
    }
    // nothing is written unless every input parsed
    for (path, svg) in charts {
        formats::write_file(&path, svg.as_bytes())?;
        outputs.push(path);
    }
    Ok(Outcome { inputs: a.inputs.clone(), summary: format!("wrote {} chart(s)", outputs.len()), outputs })
}
