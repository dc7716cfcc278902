//! Command-line interface: segmentation, metrics, cohort clustering,
//! phantom generation and benchmarking.
//!
//! Exit codes: 0 success, 1 data error (printed as `E_CODE: message`),
//! 2 usage error. All numeric output carries 9 significant digits.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use maskslic::io::{
    self, consistency_report_json, fmt_sig9, overlap_report_json, read_labeling, read_mask,
    read_volume, write_labeling, write_mask, write_series, write_volume, Dtype, VolumeData,
};
use maskslic::phantom::{make_phantom, PhantomSpec};
use maskslic::volume::standardize_volume;
use maskslic::{
    consistency_score, error_increase, extract_descriptors, kmeans_cohort, label_consistency,
    mask_slic, propagate_labels, region_scale, segment, standardize_items, temporal_pca, Backend,
    Error, FeatureVolume, Labeling, LcAggregation, Mask, Result, SlicParams, BACKGROUND,
};

#[derive(Parser)]
#[command(
    name = "mslic",
    about = "Region-constrained supervoxel toolkit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Maskslic,
    Naive1,
    Naive2,
}

impl BackendArg {
    fn cli_name(self) -> &'static str {
        match self {
            BackendArg::Maskslic => "maskslic",
            BackendArg::Naive1 => "naive1",
            BackendArg::Naive2 => "naive2",
        }
    }
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Backend {
        match b {
            BackendArg::Maskslic => Backend::MaskSlic,
            BackendArg::Naive1 => Backend::NaiveWholeImage,
            BackendArg::Naive2 => Backend::NaiveGridFiltered,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LcAggArg {
    VoxelMean,
    RegionMean,
    RegionMedian,
}

impl From<LcAggArg> for LcAggregation {
    fn from(a: LcAggArg) -> LcAggregation {
        match a {
            LcAggArg::VoxelMean => LcAggregation::VoxelMean,
            LcAggArg::RegionMean => LcAggregation::RegionMean,
            LcAggArg::RegionMedian => LcAggregation::RegionMedian,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CohortMode {
    Supervoxel,
    Voxel,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long, value_enum)]
    backend: BackendArg,
    #[arg(long)]
    n_regions: usize,
    #[arg(long)]
    compactness: f64,
    #[arg(long, default_value_t = 10)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.0)]
    residual_tol: f64,
    /// Skip connectivity enforcement.
    #[arg(long)]
    no_connectivity: bool,
    /// Z-score each channel over in-mask voxels before clustering.
    #[arg(long)]
    standardize: bool,
    /// Multiply the compactness by the region scale S, making it scale-free.
    #[arg(long)]
    scale_compactness: bool,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Best-overlap consistency between two labelings under a known offset.
    Cs {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Offset as comma-separated integers, e.g. 4,0 or 1,2,3.
        #[arg(long, default_value = "0,0")]
        offset: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Label consistency of a labeling against a ground-truth grid.
    Lc {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Mask file; defaults to the labeled support of `--labels`.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = LcAggArg::VoxelMean)]
        lc_agg: LcAggArg,
        /// Baseline error for a percentage-improvement line, printed as
        /// `error_increase` against this run's error.
        #[arg(long)]
        baseline_e: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Command {
    /// Segment a volume inside a mask.
    Segment(SegmentArgs),
    /// Evaluation metrics.
    Metrics {
        #[command(subcommand)]
        which: MetricsCommand,
    },
    /// Per-case supervoxels plus cohort-wide k-means into subregion labels.
    ClusterCohort {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        pca_components: usize,
        #[arg(long, value_enum)]
        mode: CohortMode,
        #[arg(long, default_value_t = 50)]
        n_regions: usize,
        #[arg(long, default_value_t = 10.0)]
        compactness: f64,
        #[arg(long, default_value_t = 10)]
        max_iters: usize,
        /// Comma-separated volume files, one per case.
        #[arg(long, value_delimiter = ',')]
        inputs: Vec<PathBuf>,
        /// Comma-separated mask files, congruent with the inputs.
        #[arg(long, value_delimiter = ',')]
        masks: Vec<PathBuf>,
        /// Skip per-feature z-scoring before clustering.
        #[arg(long)]
        no_standardize: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate a synthetic dataset.
    Phantom {
        /// Spec name: a (2D blob image), b (3D labeled volume), c (4D series).
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Translation for spec a, comma-separated.
        #[arg(long)]
        translate: Option<String>,
        /// Noise fraction override.
        #[arg(long)]
        noise: Option<f64>,
        /// Cube edge for specs b and c.
        #[arg(long)]
        dim: Option<usize>,
        /// Canvas size for spec a, e.g. 128x128.
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        archetypes: Option<usize>,
        #[arg(long)]
        mask_frac: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Repeat-timing of segmentation backends.
    Bench {
        /// Comma-separated backends to time.
        #[arg(long, value_delimiter = ',')]
        backend: Vec<BackendArg>,
        #[arg(long)]
        n_regions: usize,
        #[arg(long)]
        compactness: f64,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mask: PathBuf,
    },
}

fn parse_offset(text: &str) -> Result<Vec<i64>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<i64>()
                .map_err(|_| Error::InvalidInput(format!("bad offset component {p:?}")))
        })
        .collect()
}

fn mask_from_labeling(lab: &Labeling) -> Result<Mask> {
    let bits: Vec<bool> = lab.labels().iter().map(|&l| l != BACKGROUND).collect();
    Mask::new(&lab.dims(), bits)
}

fn run_segment(args: SegmentArgs) -> Result<()> {
    let volume = read_volume(&args.input)?.into_features()?;
    let mask = read_mask(&args.mask)?;
    let volume = if args.standardize {
        standardize_volume(&volume, &mask)?
    } else {
        volume
    };
    let mut compactness = args.compactness;
    if args.scale_compactness {
        compactness *= region_scale(&mask, args.n_regions, &volume.spacing())?;
    }
    let params = SlicParams::new(args.n_regions, compactness)?
        .with_backend(args.backend.into())
        .with_max_iters(args.max_iters)
        .with_residual_tol(args.residual_tol)
        .with_connectivity(!args.no_connectivity);
    let labeling = segment(&volume, &mask, &params)?;
    write_labeling(&labeling, &args.output)?;
    println!(
        "{{\"n_regions\": {}, \"output\": {:?}}}",
        labeling.num_regions(),
        args.output
    );
    Ok(())
}

fn run_metrics(which: MetricsCommand) -> Result<()> {
    match which {
        MetricsCommand::Cs {
            a,
            b,
            offset,
            output,
        } => {
            let s1 = read_labeling(&a)?;
            let s2 = read_labeling(&b)?;
            let off = parse_offset(&offset)?;
            let report = consistency_score(&s1, &s2, &off)?;
            let text = overlap_report_json(&report);
            if let Some(path) = output {
                std::fs::write(path, &text)?;
            }
            println!("{text}");
        }
        MetricsCommand::Lc {
            labels,
            truth,
            mask,
            lc_agg,
            baseline_e,
            output,
        } => {
            let lab = read_labeling(&labels)?;
            let truth_lab = read_labeling(&truth)?;
            let mask = match mask {
                Some(p) => read_mask(&p)?,
                None => mask_from_labeling(&lab)?,
            };
            let report = label_consistency(&lab, truth_lab.labels(), &mask, lc_agg.into())?;
            let text = consistency_report_json(&report);
            if let Some(path) = output {
                std::fs::write(path, &text)?;
            }
            println!("{text}");
            if let Some(be) = baseline_e {
                match error_increase(be, report.e) {
                    Ok(e) => println!("{{\"error_increase\": {}}}", fmt_sig9(e)),
                    Err(Error::DivisionByZero) => {
                        println!("{{\"error_increase\": \"infinite improvement\"}}")
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_cluster_cohort(
    k: usize,
    pca_components: usize,
    mode: CohortMode,
    n_regions: usize,
    compactness: f64,
    max_iters: usize,
    inputs: Vec<PathBuf>,
    masks: Vec<PathBuf>,
    no_standardize: bool,
    out_dir: PathBuf,
) -> Result<()> {
    if inputs.is_empty() || inputs.len() != masks.len() {
        return Err(Error::InvalidInput(
            "need matching --inputs and --masks lists".into(),
        ));
    }
    std::fs::create_dir_all(&out_dir)?;

    // per-case feature extraction
    let mut case_features: Vec<FeatureVolume> = Vec::new();
    let mut case_masks: Vec<Mask> = Vec::new();
    let mut case_ids: Vec<String> = Vec::new();
    for (input, mask_path) in inputs.iter().zip(masks.iter()) {
        let mask = read_mask(mask_path)?;
        let features = match read_volume(input)? {
            VolumeData::Temporal(series) => temporal_pca(&series, &mask, pca_components)?,
            VolumeData::Features(v) => v,
        };
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "case".into());
        // duplicate stems get an index suffix so outputs never collide
        let case_id = if case_ids.contains(&stem) {
            format!("{stem}_{}", case_ids.len())
        } else {
            stem
        };
        case_ids.push(case_id);
        case_features.push(features);
        case_masks.push(mask);
    }

    match mode {
        CohortMode::Supervoxel => {
            let params = SlicParams::new(n_regions, compactness)?.with_max_iters(max_iters);
            let mut labelings = Vec::new();
            let mut all_desc = Vec::new();
            let mut case_desc_ranges = Vec::new();
            for ((features, mask), case_id) in case_features
                .iter()
                .zip(case_masks.iter())
                .zip(case_ids.iter())
            {
                let lab = mask_slic(features, mask, &params)?;
                let desc = extract_descriptors(features, &lab, case_id)?;
                let start = all_desc.len();
                all_desc.extend(desc);
                case_desc_ranges.push(start..all_desc.len());
                labelings.push(lab);
            }
            let mut items: Vec<Vec<f64>> =
                all_desc.iter().map(|d| d.feature_means.clone()).collect();
            if !no_standardize {
                standardize_items(&mut items);
            }
            let clustering = kmeans_cohort(&items, k, 100)?;
            io::write_descriptor_table(&all_desc, out_dir.join("descriptors.csv"))?;
            for (i, (lab, range)) in labelings.iter().zip(case_desc_ranges.iter()).enumerate() {
                let sub = maskslic::CohortClustering {
                    k: clustering.k,
                    centroids: clustering.centroids.clone(),
                    assignment: clustering.assignment[range.clone()].to_vec(),
                    inertia: clustering.inertia,
                    inertia_history: clustering.inertia_history.clone(),
                };
                let map = propagate_labels(&sub, lab, &all_desc[range.clone()])?;
                write_labeling(
                    &map,
                    out_dir.join(format!("{}_subregions.mslc", case_ids[i])),
                )?;
            }
            write_cluster_report(
                &out_dir,
                k,
                clustering.inertia,
                "supervoxel",
                &clustering.assignment,
            )?;
        }
        CohortMode::Voxel => {
            let mut items: Vec<Vec<f64>> = Vec::new();
            let mut spans = Vec::new();
            for (features, mask) in case_features.iter().zip(case_masks.iter()) {
                let start = items.len();
                for idx in mask.foreground() {
                    items.push(features.features_at(idx).to_vec());
                }
                spans.push((start..items.len(), mask.foreground()));
            }
            if !no_standardize {
                standardize_items(&mut items);
            }
            let clustering = kmeans_cohort(&items, k, 100)?;
            for (i, ((range, fg), mask)) in spans.iter().zip(case_masks.iter()).enumerate() {
                let mut labels = vec![BACKGROUND; mask.bits().len()];
                for (slot, &idx) in fg.iter().enumerate() {
                    labels[idx] = clustering.assignment[range.start + slot] as i32;
                }
                let map = Labeling::with_region_count(&mask.dims(), labels, k)?;
                write_labeling(
                    &map,
                    out_dir.join(format!("{}_subregions.mslc", case_ids[i])),
                )?;
            }
            write_cluster_report(
                &out_dir,
                k,
                clustering.inertia,
                "voxel",
                &clustering.assignment,
            )?;
        }
    }
    Ok(())
}

fn write_cluster_report(
    out_dir: &std::path::Path,
    k: usize,
    inertia: f64,
    mode: &str,
    assignment: &[u32],
) -> Result<()> {
    let assign: Vec<String> = assignment.iter().map(|a| a.to_string()).collect();
    let text = format!(
        "{{\"k\": {k}, \"inertia\": {}, \"mode\": \"{mode}\", \"assignment\": [{}]}}",
        fmt_sig9(inertia),
        assign.join(", ")
    );
    std::fs::write(out_dir.join("clusters.json"), &text)?;
    println!("{text}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_phantom(
    spec: String,
    seed: u64,
    translate: Option<String>,
    noise: Option<f64>,
    dim: Option<usize>,
    dims: Option<String>,
    frames: Option<usize>,
    archetypes: Option<usize>,
    mask_frac: Option<f64>,
    out_dir: PathBuf,
) -> Result<()> {
    let mut spec = PhantomSpec::parse(&spec)?;
    match &mut spec {
        PhantomSpec::BlobImage2d {
            dims: d,
            translate: t,
            noise: n,
        } => {
            if let Some(text) = dims {
                let parts: Vec<usize> = text
                    .split(['x', ','])
                    .map(|p| {
                        p.parse()
                            .map_err(|_| Error::BadSpec(format!("bad dims {text:?}")))
                    })
                    .collect::<Result<_>>()?;
                if parts.len() != 2 {
                    return Err(Error::BadSpec("spec a needs 2 dims".into()));
                }
                *d = [parts[0], parts[1]];
            }
            if let Some(text) = translate {
                let parts = parse_offset(&text)?;
                if parts.len() != 2 {
                    return Err(Error::BadSpec("translate needs 2 components".into()));
                }
                *t = [parts[0], parts[1]];
            }
            if let Some(x) = noise {
                *n = x;
            }
        }
        PhantomSpec::LabeledVolume3d {
            dim: d,
            noise: n,
            mask_frac: f,
        } => {
            if let Some(x) = dim {
                *d = x;
            }
            if let Some(x) = noise {
                *n = x;
            }
            if let Some(x) = mask_frac {
                *f = x;
            }
        }
        PhantomSpec::TemporalArchetypes {
            dim: d,
            frames: fr,
            archetypes: a,
            noise: n,
        } => {
            if let Some(x) = dim {
                *d = x;
            }
            if let Some(x) = frames {
                *fr = x;
            }
            if let Some(x) = archetypes {
                *a = x;
            }
            if let Some(x) = noise {
                *n = x;
            }
        }
    }
    std::fs::create_dir_all(&out_dir)?;
    let phantom = make_phantom(&spec, seed)?;
    let (volume_name, dims_vec) = match &phantom.data {
        VolumeData::Features(v) => {
            write_volume(v, out_dir.join("volume.mslc"), Dtype::F32)?;
            ("volume.mslc", v.dims())
        }
        VolumeData::Temporal(s) => {
            write_series(s, out_dir.join("series.mslc"), Dtype::F32)?;
            ("series.mslc", s.dims())
        }
    };
    write_mask(&phantom.mask, out_dir.join("mask.mslc"))?;
    let max_label = phantom.truth.iter().copied().max().unwrap_or(-1);
    let truth = Labeling::with_region_count(
        &dims_vec,
        phantom.truth.clone(),
        (max_label + 1).max(0) as usize,
    )?;
    write_labeling(&truth, out_dir.join("truth.mslc"))?;
    println!(
        "{{\"volume\": \"{volume_name}\", \"mask\": \"mask.mslc\", \"truth\": \"truth.mslc\", \"contrast\": {}}}",
        fmt_sig9(phantom.contrast)
    );
    Ok(())
}

fn run_bench(
    backends: Vec<BackendArg>,
    n_regions: usize,
    compactness: f64,
    repeats: usize,
    input: PathBuf,
    mask: PathBuf,
) -> Result<()> {
    let volume = read_volume(&input)?.into_features()?;
    let mask = read_mask(&mask)?;
    let mut entries = Vec::new();
    for b in backends {
        let params = SlicParams::new(n_regions, compactness)?.with_backend(b.into());
        let mut runs_ms = Vec::with_capacity(repeats.max(1));
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            let _ = segment(&volume, &mask, &params)?;
            runs_ms.push(start.elapsed().as_secs_f64() * 1e3);
        }
        let mut sorted = runs_ms.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        let runs: Vec<String> = runs_ms.iter().map(|r| fmt_sig9(*r)).collect();
        entries.push(format!(
            "{{\"backend\": \"{}\", \"median_ms\": {}, \"runs_ms\": [{}]}}",
            b.cli_name(),
            fmt_sig9(median),
            runs.join(", ")
        ));
    }
    println!("{{\"results\": [{}]}}", entries.join(", "));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Segment(args) => run_segment(args),
        Command::Metrics { which } => run_metrics(which),
        Command::ClusterCohort {
            k,
            pca_components,
            mode,
            n_regions,
            compactness,
            max_iters,
            inputs,
            masks,
            no_standardize,
            out_dir,
        } => run_cluster_cohort(
            k,
            pca_components,
            mode,
            n_regions,
            compactness,
            max_iters,
            inputs,
            masks,
            no_standardize,
            out_dir,
        ),
        Command::Phantom {
            spec,
            seed,
            translate,
            noise,
            dim,
            dims,
            frames,
            archetypes,
            mask_frac,
            out_dir,
        } => run_phantom(
            spec, seed, translate, noise, dim, dims, frames, archetypes, mask_frac, out_dir,
        ),
        Command::Bench {
            backend,
            n_regions,
            compactness,
            repeats,
            input,
            mask,
        } => run_bench(backend, n_regions, compactness, repeats, input, mask),
    }
}

fn main() -> ExitCode {
    // MSLIC_THREADS caps the worker pool; 0 or unset means automatic
    if let Ok(text) = std::env::var("MSLIC_THREADS") {
        if let Ok(n) = text.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {}", e.code(), e);
            ExitCode::from(1)
        }
    }
}
