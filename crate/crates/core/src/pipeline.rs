//! End-to-end run: load, segment, refine, homogenize, fit per-part
//! libraries, and write pieces, the assembly sheet and logs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anim::{average_mesh, Anim};
use crate::boundary::{
    extract_smooth_boundary, smooth_votes, vertex_votes, ExtractOptions, SegmentedAnim, SmoothingOperator,
    DEFAULT_SMOOTHING_ITERATIONS, DEFAULT_SMOOTHING_STEP,
};
use crate::error::{Error, Result};
use crate::homogenize::{homogenize_all, HomogenizedAnim};
use crate::io::{load_sequence_dir, read_obj, read_saliency, read_seed_file, save_sequence, write_obj};
use crate::library::{
    bcd_optimize, min_library_for_cap, sweep_library_size, OptimConfig, OptimResult, PartAnim, ReplacementLibrary,
    SaliencyWeights, SweepPoint, DEFAULT_LAMBDA, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL, DEFAULT_RESTARTS,
};
use crate::report::{report_errors, write_frame_report};
use crate::segmentation::{segment_parts, SeedSet, DEFAULT_GAMMA};

/// Marker left in the output directory until a run completes.
pub const STALE_MARKER: &str = "STALE";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RunMode {
    /// Fit one library of the configured size per part.
    Optimize,
    /// Stop after homogenization and write the segmented sequence.
    SegmentOnly,
    /// Fit every size in `min..=max`; pieces come from the configured size
    /// when it lies in range, otherwise from `max`.
    Sweep { min: usize, max: usize },
    /// Smallest library per part whose worst frame error is at most `cap`.
    ErrorCap { cap: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub cuts: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub parts: usize,
    /// Library size per part; a single value applies to every part.
    pub sizes: Vec<usize>,
    pub lambda: f64,
    pub gamma: f64,
    pub weights: Option<PathBuf>,
    pub smoothing_iterations: usize,
    pub smoothing_step: f64,
    pub min_island: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub mode: RunMode,
    pub fixed_library: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            cuts: None,
            seeds: None,
            parts: 1,
            sizes: vec![1],
            lambda: DEFAULT_LAMBDA,
            gamma: DEFAULT_GAMMA,
            weights: None,
            smoothing_iterations: DEFAULT_SMOOTHING_ITERATIONS,
            smoothing_step: DEFAULT_SMOOTHING_STEP,
            min_island: 0,
            restarts: DEFAULT_RESTARTS,
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            seed: 0,
            out: out.into(),
            mode: RunMode::Optimize,
            fixed_library: None,
        }
    }

    pub fn size_for(&self, part: usize) -> usize {
        if self.sizes.len() == 1 {
            self.sizes[0]
        } else {
            self.sizes[part]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts == 0 {
            return Err(Error::InvalidConfig("at least one part is required".into()));
        }
        if self.sizes.len() != 1 && self.sizes.len() != self.parts {
            return Err(Error::InvalidConfig(format!(
                "{} library sizes given for {} parts",
                self.sizes.len(),
                self.parts
            )));
        }
        if self.sizes.contains(&0) {
            return Err(Error::InvalidConfig("library sizes must be at least 1".into()));
        }
        if self.parts > 1 && self.seeds.is_none() {
            return Err(Error::InvalidConfig("a seed file is required for more than one part".into()));
        }
        if !(self.smoothing_step > 0.0 && self.smoothing_step <= 1.0) {
            return Err(Error::InvalidConfig("smoothing step must lie in (0, 1]".into()));
        }
        if let RunMode::Sweep { min, max } = self.mode {
            if min == 0 || min > max {
                return Err(Error::InvalidConfig(format!("invalid sweep range {min}:{max}")));
            }
        }
        if let RunMode::ErrorCap { cap } = self.mode {
            if !(cap > 0.0) || !cap.is_finite() {
                return Err(Error::InvalidConfig("error cap must be positive".into()));
            }
        }
        if self.fixed_library.is_some() && !matches!(self.mode, RunMode::Optimize) {
            return Err(Error::InvalidConfig("a fixed library is only used when optimizing one size".into()));
        }
        self.optim(0).check()
    }

    fn optim(&self, seed: u64) -> OptimConfig<f64> {
        OptimConfig {
            lambda: self.lambda,
            restarts: self.restarts,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            seed,
        }
    }
}

/// Shooting instructions: one piece per part for every frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblySheet {
    pub frames: Vec<SheetRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetRow {
    pub frame: usize,
    pub pieces: BTreeMap<String, String>,
}

pub fn part_name(part: usize) -> String {
    format!("part{}", part + 1)
}

pub fn piece_id(part: usize, piece: usize) -> String {
    format!("p{}_{:03}", part + 1, piece)
}

impl AssemblySheet {
    pub fn from_assignments(labels: &[Vec<usize>]) -> Self {
        let n = labels.first().map_or(0, Vec::len);
        let frames = (0..n)
            .map(|f| SheetRow {
                frame: f,
                pieces: labels.iter().enumerate().map(|(j, l)| (part_name(j), piece_id(j, l[f]))).collect(),
            })
            .collect();
        Self { frames }
    }
}

/// Sub-mesh of the triangles labeled `part`, vertices in ascending global order.
pub fn extract_part_submesh<T: crate::Real>(hom: &HomogenizedAnim<T>, part: usize) -> Result<PartAnim<T>> {
    let anim = &hom.anim;
    let tris: Vec<[usize; 3]> = anim
        .triangles()
        .iter()
        .zip(&hom.part_labels)
        .filter(|(_, &l)| l == part)
        .map(|(t, _)| *t)
        .collect();
    if tris.is_empty() {
        return Err(Error::EmptyPart(part));
    }
    let mut local = vec![usize::MAX; anim.n_vertices()];
    for t in &tris {
        for &v in t {
            local[v] = 0;
        }
    }
    let global: Vec<usize> = (0..anim.n_vertices()).filter(|&v| local[v] == 0).collect();
    for (i, &v) in global.iter().enumerate() {
        local[v] = i;
    }
    let tris = tris.iter().map(|t| [local[t[0]], local[t[1]], local[t[2]]]).collect();
    let m = global.len();
    let mut positions = Vec::with_capacity(m * anim.n_frames());
    for frame in anim.frames() {
        positions.extend(global.iter().map(|&v| frame[v]));
    }
    let sub = Anim::from_flat(positions, m, tris, anim.cuts().to_vec())?;
    PartAnim::new(sub, global)
}

/// Part libraries given as input: `manifest.json` in the directory lists,
/// per part, piece OBJ files and the indices to keep frozen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedLibraryManifest {
    pub parts: Vec<FixedPartEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPartEntry {
    pub pieces: Vec<PathBuf>,
    #[serde(default)]
    pub frozen: Vec<usize>,
}

pub fn load_fixed_libraries(dir: &Path) -> Result<Vec<ReplacementLibrary<f64>>> {
    let manifest: FixedLibraryManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    manifest
        .parts
        .iter()
        .map(|entry| {
            let fields = entry
                .pieces
                .iter()
                .map(|p| read_obj::<f64>(&dir.join(p)).map(|o| o.vertices))
                .collect::<Result<Vec<_>>>()?;
            let mut frozen = vec![false; fields.len()];
            for &k in &entry.frozen {
                *frozen.get_mut(k).ok_or_else(|| Error::InvalidConfig(format!("frozen index {k} out of range")))? =
                    true;
            }
            ReplacementLibrary::from_fields(&fields, frozen)
        })
        .collect()
}

/// Summary of one part's optimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartSummary {
    pub part: usize,
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub pieces: usize,
    pub energy: f64,
    pub best_restart: usize,
    pub iterations: Vec<usize>,
    pub piece_usage: Vec<usize>,
    /// Frames per piece of this part.
    pub compression: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: String,
    pub version: String,
    pub float_environment: String,
    pub config: PipelineConfig,
    /// Per-part seeds drawn from the run seed.
    pub part_seeds: Vec<u64>,
    pub n_frames: usize,
    pub n_input_vertices: usize,
    pub n_input_triangles: usize,
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub seam_vertices: usize,
    pub segmentation_energy: Option<f64>,
    pub parts: Vec<PartSummary>,
    /// Pieces printed across all parts.
    pub printed_pieces: usize,
    /// One printed piece per part per frame.
    pub naive_pieces: usize,
    /// `n / printed_pieces`
    pub frames_per_piece: f64,
    /// `naive_pieces / printed_pieces`
    pub combined_saving: f64,
    pub files: Vec<PathBuf>,
}

pub struct PipelineOutput {
    pub manifest: RunManifest,
    pub homogenized: HomogenizedAnim<f64>,
    pub parts: Vec<PartAnim<f64>>,
    pub results: Vec<OptimResult<f64>>,
    pub sheet: Option<AssemblySheet>,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.at_stage(name))
}

/// Segments and homogenizes; `s = 1` skips segmentation.
pub fn prepare_parts(
    anim: Anim<f64>,
    config: &PipelineConfig,
) -> Result<(SegmentedAnim<f64>, HomogenizedAnim<f64>, Option<f64>)> {
    let (seg, seg_energy) = if config.parts == 1 {
        let k = anim.n_triangles();
        (stage("segment", SegmentedAnim::from_labels(anim, vec![0; k], 1))?, None)
    } else {
        let seeds_path = config.seeds.as_deref().expect("validated");
        let seeds = stage("segment", read_seed_file(seeds_path).and_then(|s| SeedSet::new(s, anim.n_triangles())))?;
        if seeds.n_parts() != config.parts {
            return Err(Error::InvalidSeeds(format!(
                "seed file has {} parts, expected {}",
                seeds.n_parts(),
                config.parts
            ))
            .at_stage("segment"));
        }
        let segmentation = stage("segment", segment_parts(&anim, &seeds, config.gamma))?;
        let seg = stage("refine", {
            let avg = average_mesh(&anim);
            vertex_votes(&anim, &segmentation.labeling, config.parts).and_then(|votes| {
                let op = SmoothingOperator::new(&avg.values, anim.triangles());
                let smooth = smooth_votes(&votes, &op, config.smoothing_iterations, config.smoothing_step)?;
                let options = ExtractOptions { min_island: config.min_island, ..Default::default() };
                extract_smooth_boundary(&anim, &smooth, &options)
            })
        })?;
        (seg, Some(segmentation.energy))
    };
    let hom = stage("homogenize", homogenize_all(&seg))?;
    Ok((seg, hom, seg_energy))
}

fn optimize_part(
    part: &PartAnim<f64>,
    j: usize,
    weights: &SaliencyWeights<f64>,
    config: &PipelineConfig,
    seed: u64,
    fixed: Option<&ReplacementLibrary<f64>>,
) -> Result<(OptimResult<f64>, Vec<SweepPoint<f64>>)> {
    let optim = config.optim(seed);
    let d = config.size_for(j);
    match config.mode {
        RunMode::Sweep { min, max } => {
            let max = max.min(part.n_frames());
            let sizes: Vec<usize> = (min.min(max)..=max).collect();
            let curve = sweep_library_size(part, &sizes, weights, &optim)?;
            let pick = curve.iter().position(|p| p.d == d).unwrap_or(curve.len() - 1);
            let result = curve[pick].result.clone();
            Ok((result, curve))
        }
        RunMode::ErrorCap { cap } => {
            let point = min_library_for_cap(part, cap, weights, &optim)?;
            Ok((point.result.clone(), vec![point]))
        }
        RunMode::Optimize | RunMode::SegmentOnly => match fixed {
            Some(lib) => {
                let lib = pad_library(lib, d);
                Ok((bcd_optimize(part, lib.n_pieces(), weights, &optim, Some(&lib))?, Vec::new()))
            }
            None => Ok((bcd_optimize(part, d.min(part.n_frames()), weights, &optim, None)?, Vec::new())),
        },
    }
}

/// Appends free pieces up to `d`; never drops given pieces.
fn pad_library(lib: &ReplacementLibrary<f64>, d: usize) -> ReplacementLibrary<f64> {
    let extra = d.saturating_sub(lib.n_pieces());
    let mut frozen = lib.frozen.clone();
    frozen.extend(std::iter::repeat_n(false, extra));
    let pieces = lib.pieces.clone().resize_horizontally(lib.n_pieces() + extra, 0.0);
    ReplacementLibrary { pieces, frozen }
}

fn write_text(path: &Path, text: &str, files: &mut Vec<PathBuf>, out: &Path) -> Result<()> {
    fs::write(path, text)?;
    files.push(path.strip_prefix(out).unwrap_or(path).to_path_buf());
    Ok(())
}

/// Runs every stage and writes the artifacts under `config.out`.
///
/// A `STALE` marker exists in the output directory from the start of the
/// run until every artifact has been written.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    run_stages(config).map_err(|e| match e {
        Error::Stage { .. } => e,
        other => other.at_stage("export"),
    })
}

fn run_stages(config: &PipelineConfig) -> Result<PipelineOutput> {
    stage("config", config.validate())?;
    let out = config.out.clone();
    fs::create_dir_all(&out)?;
    fs::write(out.join(STALE_MARKER), "run did not complete\n")?;

    let anim: Anim<f64> = stage("load", load_sequence_dir(&config.input, config.cuts.as_deref()))?;
    let (n_in_v, n_in_t) = (anim.n_vertices(), anim.n_triangles());
    let saliency = match &config.weights {
        Some(p) => Some(stage("load", read_saliency::<f64>(p, n_in_v))?),
        None => None,
    };
    let (seg, hom, seg_energy) = prepare_parts(anim, config)?;
    let mut files = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let part_seeds: Vec<u64> = (0..config.parts).map(|_| rng.random()).collect();
    let n = hom.anim.n_frames();

    let mut manifest = RunManifest {
        status: "running".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        float_environment: "IEEE-754 binary64; results are bit-reproducible for a fixed build and target".into(),
        config: config.clone(),
        part_seeds: part_seeds.clone(),
        n_frames: n,
        n_input_vertices: n_in_v,
        n_input_triangles: n_in_t,
        n_vertices: hom.anim.n_vertices(),
        n_triangles: hom.anim.n_triangles(),
        seam_vertices: hom.seam_vertices.len(),
        segmentation_energy: seg_energy,
        parts: Vec::new(),
        printed_pieces: 0,
        naive_pieces: n * config.parts,
        frames_per_piece: 0.0,
        combined_saving: 0.0,
        files: Vec::new(),
    };

    if config.mode == RunMode::SegmentOnly {
        let dir = out.join("segmented");
        fs::create_dir_all(&dir)?;
        for p in save_sequence(&hom.anim, &dir, "frame_")? {
            files.push(p.strip_prefix(&out).unwrap_or(&p).to_path_buf());
        }
        let labels: String = hom.part_labels.iter().map(|l| format!("{l}\n")).collect();
        write_text(&out.join("part_labels.txt"), &labels, &mut files, &out)?;
        manifest.status = "complete".into();
        manifest.files = files;
        finish_manifest(&out, &manifest)?;
        return Ok(PipelineOutput { manifest, homogenized: hom, parts: Vec::new(), results: Vec::new(), sheet: None });
    }

    let parts: Vec<PartAnim<f64>> =
        stage("extract", (0..config.parts).map(|j| extract_part_submesh(&hom, j)).collect::<Result<_>>())?;
    let weights: Vec<SaliencyWeights<f64>> = stage(
        "weights",
        parts
            .iter()
            .map(|p| match &saliency {
                Some(w) => {
                    let remeshed = seg.interpolate_vertex_scalars(w);
                    SaliencyWeights::new(p.global_vertices.iter().map(|&v| remeshed[v]).collect())
                }
                None => Ok(SaliencyWeights::uniform(p.n_vertices())),
            })
            .collect::<Result<_>>(),
    )?;
    let fixed = match &config.fixed_library {
        Some(dir) => {
            let libs = stage("load", load_fixed_libraries(dir))?;
            if libs.len() != config.parts {
                return Err(Error::InvalidConfig(format!(
                    "fixed library lists {} parts, expected {}",
                    libs.len(),
                    config.parts
                ))
                .at_stage("load"));
            }
            Some(libs)
        }
        None => None,
    };

    let optimized: Vec<(OptimResult<f64>, Vec<SweepPoint<f64>>)> = stage(
        "optimize",
        (0..config.parts)
            .into_par_iter()
            .map(|j| {
                let f = fixed.as_ref().map(|l| &l[j]);
                optimize_part(&parts[j], j, &weights[j], config, part_seeds[j], f)
            })
            .collect::<Result<_>>(),
    )?;

    let piece_dir = out.join("pieces");
    fs::create_dir_all(&piece_dir)?;
    let mut energy_log = String::from("part,restart,iteration,energy_after_update,energy_after_assign\n");
    let mut curve_csv = String::from("part,pieces,energy,max_frame_error\n");
    for (j, (result, curve)) in optimized.iter().enumerate() {
        let part = &parts[j];
        for k in 0..result.library.n_pieces() {
            let path = piece_dir.join(format!("{}.obj", piece_id(j, k)));
            write_obj(&path, &result.library.piece(k), part.anim.triangles())?;
            files.push(path.strip_prefix(&out).unwrap_or(&path).to_path_buf());
        }
        for (r, run) in result.runs.iter().enumerate() {
            for (i, it) in run.iterations.iter().enumerate() {
                let _ = writeln!(
                    energy_log,
                    "{},{r},{i},{:e},{:e}",
                    j + 1,
                    it.energy_after_update,
                    it.energy_after_assign
                );
            }
        }
        for p in curve {
            let _ = writeln!(curve_csv, "{},{},{:e},{:e}", j + 1, p.d, p.energy, p.max_frame_error);
        }
        let d = result.library.n_pieces();
        manifest.parts.push(PartSummary {
            part: j + 1,
            n_vertices: part.n_vertices(),
            n_triangles: part.anim.n_triangles(),
            pieces: d,
            energy: result.energy,
            best_restart: result.best_restart,
            iterations: result.runs.iter().map(|r| r.iterations.len()).collect(),
            piece_usage: result.assignment.counts(d),
            compression: n as f64 / d as f64,
        });
    }
    write_text(&out.join("energy_log.csv"), &energy_log, &mut files, &out)?;
    if matches!(config.mode, RunMode::Sweep { .. } | RunMode::ErrorCap { .. }) {
        write_text(&out.join("error_curve.csv"), &curve_csv, &mut files, &out)?;
    }

    let labels: Vec<Vec<usize>> = optimized.iter().map(|(r, _)| r.assignment.labels.clone()).collect();
    let sheet = AssemblySheet::from_assignments(&labels);
    write_text(&out.join("assignment.json"), &serde_json::to_string_pretty(&sheet)?, &mut files, &out)?;

    let results: Vec<OptimResult<f64>> = optimized.into_iter().map(|(r, _)| r).collect();
    let report = stage("report", report_errors(&parts, &results, &weights, config.lambda, true))?;
    let mut csv = String::new();
    write_frame_report(&report, &mut csv);
    write_text(&out.join("frame_errors.csv"), &csv, &mut files, &out)?;

    manifest.printed_pieces = results.iter().map(|r| r.library.n_pieces()).sum();
    manifest.frames_per_piece = n as f64 / manifest.printed_pieces as f64;
    manifest.combined_saving = manifest.naive_pieces as f64 / manifest.printed_pieces as f64;
    manifest.status = "complete".into();
    manifest.files = files;
    finish_manifest(&out, &manifest)?;
    Ok(PipelineOutput { manifest, homogenized: hom, parts, results, sheet: Some(sheet) })
}

fn finish_manifest(out: &Path, manifest: &RunManifest) -> Result<()> {
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    fs::remove_file(out.join(STALE_MARKER))?;
    Ok(())
}
