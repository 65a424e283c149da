//! `stemclass` — synthesize datasets, separate stems, featurize, run the
//! repeated-trial experiment, and render reports.
//!
//! Exit codes: 0 success, 1 I/O or data error, 2 usage error, 3 refused
//! overwrite, 4 inconsistent inputs.

mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use stemclass::audio_io;
use stemclass::experiment::{
    self, default_genre_specs, render_f1_histogram_svg, report_from_rows, synth_dataset,
    SynthGenreSpec, TrialProtocol, VariantFeatures,
};
use stemclass::features::{featurize, DatasetManifest, FeatureTensor, SeparatorKind, Variant};
use stemclass::separation::{additivity_snr_db, separate_hpss3, Stem};

use config::RunConfig;

pub struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Self::new(1, message)
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(2, message)
    }

    fn refused(message: impl Into<String>) -> Self {
        Self::new(3, message)
    }

    fn inconsistent(message: impl Into<String>) -> Self {
        Self::new(4, message)
    }
}

#[derive(Parser)]
#[command(name = "stemclass", version, about = "Source-separated spectrogram genre classification pipeline")]
struct Cli {
    /// TOML config file supplying defaults for any flag (flags win)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Stems3,
    MixFull,
    MixNovox,
}

impl VariantArg {
    fn to_variant(self) -> Variant {
        match self {
            VariantArg::Stems3 => Variant::Stems3,
            VariantArg::MixFull => Variant::MixFull,
            VariantArg::MixNovox => Variant::MixNovox,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SeparatorArg {
    Builtin,
    External,
}

impl SeparatorArg {
    fn to_kind(self) -> SeparatorKind {
        match self {
            SeparatorArg::Builtin => SeparatorKind::Builtin,
            SeparatorArg::External => SeparatorKind::External,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-genre dataset with ground-truth stems
    Synth {
        /// Output directory for the dataset and its manifest
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Number of genres from the built-in palette (2..=6)
        #[arg(long)]
        genres: Option<usize>,
        /// Comma-separated clip counts, one per genre (or one for all)
        #[arg(long, value_name = "LIST")]
        clips_per_genre: Option<String>,
        /// Mandatory generation seed
        #[arg(long)]
        seed: Option<u64>,
        /// Two genre names forced to share drums, bass, and tempo
        #[arg(long, value_name = "A,B")]
        similar_pair: Option<String>,
        /// Two genre names validated to be disjoint in every field
        #[arg(long, value_name = "C,D")]
        different_pair: Option<String>,
    },
    /// Split a WAV into bass/drums/other/vocals stems
    Separate {
        /// Input mix (PCM16 or float32 WAV)
        input: PathBuf,
        /// Output directory for the stem files
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Separation method
        #[arg(long)]
        method: Option<String>,
        /// Overwrite an existing non-empty output directory
        #[arg(long)]
        force: bool,
    },
    /// Compute a feature tensor from a dataset manifest
    Featurize {
        #[arg(long, value_name = "CSV")]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[arg(long, value_enum)]
        separator: Option<SeparatorArg>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run the 4-variant repeated-trial experiment
    Trials {
        #[arg(long, value_name = "FILE")]
        features_stems3: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        features_full: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        features_novox: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Mandatory base seed; trial t uses base_seed + t
        #[arg(long)]
        base_seed: Option<u64>,
        #[arg(long, value_name = "CSV")]
        out: Option<PathBuf>,
        /// Summary text output (defaults to <out dir>/summary.txt)
        #[arg(long, value_name = "FILE")]
        summary: Option<PathBuf>,
        /// Parallel trial workers; 1 guarantees bit-identical reruns
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Render the F1 histogram figure and stats from a results CSV
    Report {
        /// Results CSV produced by `trials`
        results: PathBuf,
        #[arg(long, value_name = "SVG")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        stats: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth { out, genres, clips_per_genre, seed, similar_pair, different_pair } => {
            cmd_synth(&config, out, genres, clips_per_genre, seed, similar_pair, different_pair)
        }
        Command::Separate { input, out, method, force } => {
            cmd_separate(&config, input, out, method, force)
        }
        Command::Featurize { manifest, variant, separator, out } => {
            cmd_featurize(&config, manifest, variant, separator, out)
        }
        Command::Trials {
            features_stems3,
            features_full,
            features_novox,
            trials,
            epochs,
            base_seed,
            out,
            summary,
            jobs,
        } => cmd_trials(
            &config,
            features_stems3,
            features_full,
            features_novox,
            trials,
            epochs,
            base_seed,
            out,
            summary,
            jobs,
        ),
        Command::Report { results, out, stats } => cmd_report(&config, results, out, stats),
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::usage(format!("missing required --{flag} (flag or config)")))
}

fn parse_pair(raw: &str, flag: &str) -> Result<(String, String), CliError> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 || parts[0].is_empty() || parts[1].is_empty() {
        return Err(CliError::usage(format!("--{flag} expects two comma-separated genre names")));
    }
    Ok((parts[0].to_string(), parts[1].to_string()))
}

fn genre_index(specs: &[SynthGenreSpec], name: &str, flag: &str) -> Result<usize, CliError> {
    specs.iter().position(|s| s.name == name).ok_or_else(|| {
        let names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
        CliError::usage(format!("--{flag}: unknown genre '{name}'; available: {}", names.join(", ")))
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    config: &RunConfig,
    out: Option<PathBuf>,
    genres: Option<usize>,
    clips_per_genre: Option<String>,
    seed: Option<u64>,
    similar_pair: Option<String>,
    different_pair: Option<String>,
) -> Result<(), CliError> {
    let out = require(out.or_else(|| config.synth.out.clone()), "out")?;
    let genres = genres.or(config.synth.genres).unwrap_or(6);
    let seed = require(seed.or(config.synth.seed), "seed")?;
    let clips_raw = require(
        clips_per_genre.or_else(|| config.synth.clips_per_genre.clone()),
        "clips-per-genre",
    )?;
    let similar_pair = similar_pair.or_else(|| config.synth.similar_pair.clone());
    let different_pair = different_pair.or_else(|| config.synth.different_pair.clone());

    let palette = default_genre_specs();
    if !(2..=palette.len()).contains(&genres) {
        return Err(CliError::usage(format!(
            "--genres must be in 2..={}, got {genres}",
            palette.len()
        )));
    }
    let mut specs: Vec<SynthGenreSpec> = palette[..genres].to_vec();

    let counts: Vec<usize> = clips_raw
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("--clips-per-genre: cannot parse '{clips_raw}'")))?;
    let counts = if counts.len() == 1 {
        vec![counts[0]; genres]
    } else if counts.len() == genres {
        counts
    } else {
        return Err(CliError::usage(format!(
            "--clips-per-genre has {} entries for {genres} genres",
            counts.len()
        )));
    };
    if counts.iter().any(|&c| c == 0) {
        return Err(CliError::usage("--clips-per-genre entries must be positive"));
    }

    if let Some(raw) = similar_pair {
        let (a, b) = parse_pair(&raw, "similar-pair")?;
        let ia = genre_index(&specs, &a, "similar-pair")?;
        let ib = genre_index(&specs, &b, "similar-pair")?;
        if ia == ib {
            return Err(CliError::usage("--similar-pair needs two distinct genres"));
        }
        // force the pair to share its rhythm section, keeping b's texture
        let donor = specs[ia].clone();
        let target = &mut specs[ib];
        target.tempo_bpm = donor.tempo_bpm;
        target.drum_pattern = donor.drum_pattern.clone();
        target.drum_level = donor.drum_level;
        target.bass_root_hz = donor.bass_root_hz;
        target.bass_pattern = donor.bass_pattern.clone();
        target.bass_level = donor.bass_level;
        println!("similar_pair={a},{b}");
    }
    if let Some(raw) = different_pair {
        let (c, d) = parse_pair(&raw, "different-pair")?;
        let ic = genre_index(&specs, &c, "different-pair")?;
        let id = genre_index(&specs, &d, "different-pair")?;
        if ic == id {
            return Err(CliError::usage("--different-pair needs two distinct genres"));
        }
        let (sc, sd) = (&specs[ic], &specs[id]);
        if sc.tempo_bpm == sd.tempo_bpm
            || sc.drum_pattern == sd.drum_pattern
            || sc.bass_root_hz == sd.bass_root_hz
            || sc.chord_set == sd.chord_set
        {
            return Err(CliError::usage(format!(
                "--different-pair: genres '{c}' and '{d}' share rhythm or texture fields"
            )));
        }
        println!("different_pair={c},{d}");
    }

    let manifest = synth_dataset(&specs, &counts, seed, &out).map_err(map_experiment_err)?;
    println!("clips={}", manifest.entries().len());
    println!("genres={}", manifest.genres().len());
    println!("manifest={}", out.join("manifest.csv").display());
    Ok(())
}

fn cmd_separate(
    config: &RunConfig,
    input: PathBuf,
    out: Option<PathBuf>,
    method: Option<String>,
    force: bool,
) -> Result<(), CliError> {
    let out = require(out.or_else(|| config.separate.out.clone()), "out")?;
    let method = method.or_else(|| config.separate.method.clone()).unwrap_or_else(|| "hpss3".into());
    let force = force || config.separate.force.unwrap_or(false);
    if method != "hpss3" {
        return Err(CliError::usage(format!("unknown --method '{method}'; valid: hpss3")));
    }
    if !input.is_file() {
        return Err(CliError::data(format!("input {} does not exist", input.display())));
    }
    if out.is_dir() {
        let occupied = std::fs::read_dir(&out)
            .map_err(|e| CliError::data(format!("cannot inspect {}: {e}", out.display())))?
            .next()
            .is_some();
        if occupied && !force {
            return Err(CliError::refused(format!(
                "output directory {} is not empty; pass --force to overwrite",
                out.display()
            )));
        }
    }

    let mix = audio_io::decode_wav(&input)
        .map_err(|e| CliError::data(format!("cannot decode {}: {e}", input.display())))?;
    let stems = separate_hpss3(&mix).map_err(|e| CliError::data(e.to_string()))?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::data(e.to_string()))?;
    for stem in Stem::ALL {
        audio_io::encode_wav(stems.get(stem), out.join(stem.file_name()))
            .map_err(|e| CliError::data(e.to_string()))?;
    }
    println!("additivity_snr_db={:.2}", additivity_snr_db(&mix, &stems));
    Ok(())
}

fn cmd_featurize(
    config: &RunConfig,
    manifest: Option<PathBuf>,
    variant: Option<VariantArg>,
    separator: Option<SeparatorArg>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let manifest_path = require(manifest.or_else(|| config.featurize.manifest.clone()), "manifest")?;
    let variant = match variant {
        Some(v) => v.to_variant(),
        None => {
            let raw = require(config.featurize.variant.clone(), "variant")?;
            Variant::from_id(&raw).map_err(|e| CliError::usage(e.to_string()))?
        }
    };
    let separator = match separator {
        Some(s) => s.to_kind(),
        None => {
            let raw = require(config.featurize.separator.clone(), "separator")?;
            SeparatorKind::from_id(&raw).map_err(|e| CliError::usage(e.to_string()))?
        }
    };
    let out = require(out.or_else(|| config.featurize.out.clone()), "out")?;

    let manifest = DatasetManifest::from_csv(&manifest_path)
        .map_err(|e| CliError::data(e.to_string()))?;

    // upfront validation: list every entry with missing files, then abort
    let mut missing = Vec::new();
    for entry in manifest.entries() {
        if !entry.mix_path.is_file() {
            missing.push(format!("song {}: missing mix {}", entry.song_id, entry.mix_path.display()));
        }
        if separator == SeparatorKind::External || variant == Variant::Stems3 {
            match (&entry.stems_dir, separator) {
                (Some(dir), SeparatorKind::External) => {
                    for stem in Stem::ALL {
                        let p = dir.join(stem.file_name());
                        if !p.is_file() {
                            missing.push(format!("song {}: missing stem {}", entry.song_id, p.display()));
                        }
                    }
                }
                (None, SeparatorKind::External) => {
                    missing.push(format!("song {}: no stems_dir in manifest", entry.song_id));
                }
                _ => {}
            }
        }
    }
    if !missing.is_empty() {
        for line in &missing {
            eprintln!("{line}");
        }
        return Err(CliError::data(format!("{} song(s) have missing inputs", missing.len())));
    }

    let featurized = featurize(&manifest, variant, separator)
        .map_err(|e| CliError::data(e.to_string()))?;
    for warning in &featurized.warnings {
        eprintln!("warning: {warning}");
    }
    featurized.tensor.save(&out).map_err(|e| CliError::data(e.to_string()))?;
    let (n, h, w, c) = featurized.tensor.shape();
    println!("shape=({n},{h},{w},{c})");
    println!("tensor={}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_trials(
    config: &RunConfig,
    features_stems3: Option<PathBuf>,
    features_full: Option<PathBuf>,
    features_novox: Option<PathBuf>,
    trials: Option<usize>,
    epochs: Option<usize>,
    base_seed: Option<u64>,
    out: Option<PathBuf>,
    summary: Option<PathBuf>,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let stems3_path =
        require(features_stems3.or_else(|| config.trials.features_stems3.clone()), "features-stems3")?;
    let full_path =
        require(features_full.or_else(|| config.trials.features_full.clone()), "features-full")?;
    let novox_path =
        require(features_novox.or_else(|| config.trials.features_novox.clone()), "features-novox")?;
    let trials = trials.or(config.trials.trials).unwrap_or(50);
    let epochs = epochs.or(config.trials.epochs).unwrap_or(6);
    let base_seed = require(base_seed.or(config.trials.base_seed), "base-seed")?;
    let out = require(out.or_else(|| config.trials.out.clone()), "out")?;
    let summary_path = summary
        .or_else(|| config.trials.summary.clone())
        .unwrap_or_else(|| out.parent().unwrap_or(Path::new(".")).join("summary.txt"));
    let jobs = resolve_jobs(jobs, config);
    if trials == 0 || epochs == 0 {
        return Err(CliError::usage("--trials and --epochs must be positive"));
    }

    let load = |p: &Path| -> Result<FeatureTensor, CliError> {
        FeatureTensor::load(p)
            .map_err(|e| CliError::data(format!("cannot load {}: {e}", p.display())))
    };
    let stems3 = load(&stems3_path)?;
    let full = load(&full_path)?;
    let novox = load(&novox_path)?;
    let features = VariantFeatures { stems3: &stems3, full: &full, novox: &novox };
    features.validate().map_err(|e| CliError::inconsistent(e.to_string()))?;

    let protocol = TrialProtocol { epochs, ..TrialProtocol::default() };
    eprintln!("running {trials} trial(s) x {} variant(s), {epochs} epoch(s), jobs={jobs}", 4);
    let runs = experiment::run_experiment(&features, trials, base_seed, protocol, jobs)
        .map_err(map_experiment_err)?;
    experiment::write_results_csv(&runs, &out).map_err(map_experiment_err)?;
    let summary = experiment::summarize(&runs).map_err(map_experiment_err)?;
    let text = experiment::summary_text(&summary);
    std::fs::write(&summary_path, &text).map_err(|e| CliError::data(e.to_string()))?;
    print!("{text}");
    println!("results={}", out.display());
    println!("summary={}", summary_path.display());
    Ok(())
}

fn resolve_jobs(flag: Option<usize>, config: &RunConfig) -> usize {
    flag.or(config.trials.jobs)
        .or(config.jobs)
        .or_else(|| std::env::var("STEMCLASS_JOBS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1)
        .max(1)
}

fn cmd_report(
    config: &RunConfig,
    results: PathBuf,
    out: Option<PathBuf>,
    stats: Option<PathBuf>,
) -> Result<(), CliError> {
    let out = require(out.or_else(|| config.report.out.clone()), "out")?;
    let stats_path = require(stats.or_else(|| config.report.stats.clone()), "stats")?;

    let rows = experiment::read_results_csv(&results)
        .map_err(|e| CliError::data(format!("{}: {e}", results.display())))?;
    let data = report_from_rows(&rows).map_err(map_experiment_err)?;
    std::fs::write(&out, render_f1_histogram_svg(&data))
        .map_err(|e| CliError::data(e.to_string()))?;
    std::fs::write(&stats_path, experiment::stats_text(&data))
        .map_err(|e| CliError::data(e.to_string()))?;
    println!("figure={}", out.display());
    println!("stats={}", stats_path.display());
    Ok(())
}

fn map_experiment_err(e: experiment::ExperimentError) -> CliError {
    match &e {
        experiment::ExperimentError::Config(_) => CliError::inconsistent(e.to_string()),
        _ => CliError::data(e.to_string()),
    }
}
