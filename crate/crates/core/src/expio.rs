//! Experiment manifests out, training results in, and the aggregations used
//! for accuracy-vs-architecture plots.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::archgen::ArchitectureSpec;
use crate::error::{Error, Result};
use crate::gridsearch::cmp_params;
use crate::schedule::ScheduleParams;
use crate::skewnorm::SkewNormalParams;

pub const MANIFEST_SUFFIX: &str = ".manifest.json";
pub const RESULTS_HEADER: [&str; 5] = ["arch_id", "dataset", "epoch", "val_accuracy", "seed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Mnist,
    FashionMnist,
    Cifar10,
}

impl Dataset {
    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Mnist => "mnist",
            Dataset::FashionMnist => "fashion_mnist",
            Dataset::Cifar10 => "cifar10",
        }
    }

    pub fn default_epochs(self) -> u32 {
        match self {
            Dataset::Cifar10 => 150,
            Dataset::Mnist | Dataset::FashionMnist => 30,
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(Dataset::Mnist),
            "fashion_mnist" => Ok(Dataset::FashionMnist),
            "cifar10" => Ok(Dataset::Cifar10),
            other => Err(Error::domain(format!("unknown dataset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSchedule {
    pub eta_max: f64,
    pub eta_min: f64,
    pub first_cycle: u32,
    pub cycle_mult: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Augmentation {
    pub horizontal_flip: bool,
    pub translate_pixels: u32,
}

/// Everything a trainer needs to build and train one architecture.
///
/// Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub arch_id: String,
    pub params: SkewNormalParams,
    pub template: String,
    pub counts: Vec<u64>,
    pub parameter_count: u64,
    pub dataset: Dataset,
    pub epochs: u32,
    pub batch_size: u32,
    pub weight_decay: f64,
    pub schedule: ManifestSchedule,
    pub augmentation: Augmentation,
    pub resize_to: [u32; 2],
    pub init_scheme: String,
    pub bn_epsilon: f64,
    pub seed: u64,
}

impl ExperimentManifest {
    /// Manifest with the standard training setup for `dataset`: batch 128,
    /// weight decay 5e-4, warm-restart schedule, He initialization, flip and
    /// 4-pixel translation on CIFAR-10 only, 32x32 inputs.
    pub fn new(spec: &ArchitectureSpec, dataset: Dataset, seed: u64) -> Self {
        let schedule = ScheduleParams::warm_restarts(dataset.default_epochs());
        let augmentation = match dataset {
            Dataset::Cifar10 => Augmentation {
                horizontal_flip: true,
                translate_pixels: 4,
            },
            Dataset::Mnist | Dataset::FashionMnist => Augmentation {
                horizontal_flip: false,
                translate_pixels: 0,
            },
        };
        ExperimentManifest {
            arch_id: spec.arch_id.clone(),
            params: spec.params,
            template: spec.template_name.clone(),
            counts: spec.allocation.counts.clone(),
            parameter_count: spec.parameter_count,
            dataset,
            epochs: dataset.default_epochs(),
            batch_size: 128,
            weight_decay: 5e-4,
            schedule: ManifestSchedule {
                eta_max: schedule.eta_max,
                eta_min: schedule.eta_min,
                first_cycle: schedule.first_cycle,
                cycle_mult: schedule.cycle_mult,
            },
            augmentation,
            resize_to: [32, 32],
            init_scheme: "he_normal".into(),
            bn_epsilon: 1e-4,
            seed,
        }
    }

    pub fn schedule_params(&self) -> ScheduleParams {
        ScheduleParams {
            eta_max: self.schedule.eta_max,
            eta_min: self.schedule.eta_min,
            first_cycle: self.schedule.first_cycle,
            cycle_mult: self.schedule.cycle_mult,
            total_epochs: self.epochs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.schedule_params().validate()?;
        if self.counts.is_empty() || self.counts.contains(&0) {
            return Err(Error::domain(
                "manifest counts must be non-empty and positive",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch size must be positive"));
        }
        if matches!(self.dataset, Dataset::Mnist | Dataset::FashionMnist)
            && self.resize_to != [32, 32]
        {
            return Err(Error::domain(format!(
                "{} inputs must be resized to 32x32",
                self.dataset
            )));
        }
        Ok(())
    }

    pub fn file_name(&self) -> String {
        format!("{}{MANIFEST_SUFFIX}", self.arch_id)
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("manifest fields always serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory
/// followed by a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// One `<arch_id>.manifest.json` per spec in `dir` (created if missing).
/// Returns the number of files written.
pub fn write_manifests(specs: &[ArchitectureSpec], dataset: Dataset, dir: &Path) -> Result<usize> {
    write_manifests_seeded(specs, dataset, 0, dir)
}

pub fn write_manifests_seeded(
    specs: &[ArchitectureSpec],
    dataset: Dataset,
    seed: u64,
    dir: &Path,
) -> Result<usize> {
    if specs.is_empty() {
        return Err(Error::Empty("no architectures to write"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for spec in specs {
        let manifest = ExperimentManifest::new(spec, dataset, seed);
        write_atomic(
            &dir.join(manifest.file_name()),
            manifest.to_json().as_bytes(),
        )?;
    }
    Ok(specs.len())
}

pub fn read_manifest(path: &Path) -> Result<ExperimentManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = ExperimentManifest::from_json(&text).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    manifest.validate()?;
    Ok(manifest)
}

/// All manifests in `dir`, ordered by file name.
pub fn read_manifests(dir: &Path) -> Result<Vec<ExperimentManifest>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(MANIFEST_SUFFIX))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| read_manifest(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub arch_id: String,
    pub dataset: Dataset,
    pub epoch: u32,
    pub val_accuracy: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultSet {
    pub records: Vec<RunResult>,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv_writer(writer);
        out.write_record(RESULTS_HEADER)?;
        for r in &self.records {
            out.write_record([
                r.arch_id.clone(),
                r.dataset.to_string(),
                r.epoch.to_string(),
                r.val_accuracy.to_string(),
                r.seed.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<results>", e))?;
        Ok(())
    }
}

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

/// Read a results CSV from disk. See [`parse_results`].
pub fn ingest_results(path: &Path) -> Result<ResultSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_results(&bytes, path)
}

/// Parse a results CSV (`arch_id,dataset,epoch,val_accuracy,seed`, UTF-8,
/// LF line endings). The whole input is rejected on the first bad row, with
/// its 1-based line number.
pub fn parse_results(bytes: &[u8], path: &Path) -> Result<ResultSet> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };

    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count() as u64
            + 1;
        parse_err(line, "invalid UTF-8".into())
    })?;
    if let Some(pos) = text.find('\r') {
        let line = text[..pos].matches('\n').count() as u64 + 1;
        return Err(parse_err(
            line,
            "carriage return found; LF line endings required".into(),
        ));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();

    let header = match rows.next() {
        Some(record) => record?,
        None => return Err(parse_err(1, "missing header".into())),
    };
    if header.iter().ne(RESULTS_HEADER) {
        return Err(parse_err(
            1,
            format!(
                "header must be `{}`, found `{}`",
                RESULTS_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut records = Vec::new();
    let mut seen: HashMap<(String, Dataset, u32, u64), u64> = HashMap::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != RESULTS_HEADER.len() {
            return Err(parse_err(
                line,
                format!(
                    "expected {} fields, found {}",
                    RESULTS_HEADER.len(),
                    row.len()
                ),
            ));
        }
        let arch_id = row[0].trim();
        if arch_id.is_empty() {
            return Err(parse_err(line, "empty arch_id".into()));
        }
        let dataset: Dataset = row[1]
            .trim()
            .parse()
            .map_err(|e: Error| parse_err(line, e.to_string()))?;
        let epoch: u32 = row[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("epoch `{}` is not an integer", &row[2])))?;
        if epoch == 0 {
            return Err(parse_err(line, "epoch must be at least 1".into()));
        }
        let val_accuracy: f64 = row[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("val_accuracy `{}` is not a number", &row[3])))?;
        if !(0.0..=1.0).contains(&val_accuracy) {
            return Err(parse_err(
                line,
                format!("val_accuracy {val_accuracy} outside [0, 1]"),
            ));
        }
        let seed: u64 = row[4]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("seed `{}` is not an integer", &row[4])))?;

        let key = (arch_id.to_owned(), dataset, epoch, seed);
        if let Some(&first_line) = seen.get(&key) {
            return Err(Error::Conflict {
                path: path.to_owned(),
                line,
                first_line,
                key: format!("({arch_id}, {dataset}, epoch {epoch}, seed {seed})"),
            });
        }
        seen.insert(key, line);
        records.push(RunResult {
            arch_id: arch_id.to_owned(),
            dataset,
            epoch,
            val_accuracy,
            seed,
        });
    }
    Ok(ResultSet { records })
}

/// The parts of an architecture the aggregations need; obtainable from a
/// realized spec or from a manifest on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchRef {
    pub arch_id: String,
    pub params: SkewNormalParams,
    pub parameter_count: u64,
}

impl From<&ArchitectureSpec> for ArchRef {
    fn from(spec: &ArchitectureSpec) -> Self {
        ArchRef {
            arch_id: spec.arch_id.clone(),
            params: spec.params,
            parameter_count: spec.parameter_count,
        }
    }
}

impl From<&ExperimentManifest> for ArchRef {
    fn from(m: &ExperimentManifest) -> Self {
        ArchRef {
            arch_id: m.arch_id.clone(),
            params: m.params,
            parameter_count: m.parameter_count,
        }
    }
}

/// Per-(architecture, dataset) accuracy history, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
struct RunSummary<'a> {
    arch: &'a ArchRef,
    dataset: Dataset,
    /// Mean over seeds of each seed's last-epoch accuracy.
    final_accuracy: f64,
    /// (epoch, mean accuracy over the seeds that reported it)
    trajectory: Vec<(u32, f64)>,
}

fn summarize_runs<'a>(results: &ResultSet, archs: &'a [ArchRef]) -> Result<Vec<RunSummary<'a>>> {
    if results.is_empty() {
        return Err(Error::Empty("result set is empty"));
    }
    let index: HashMap<&str, &ArchRef> = archs.iter().map(|a| (a.arch_id.as_str(), a)).collect();

    // (arch, dataset) -> seed -> epoch -> accuracy
    type Runs<'r> = BTreeMap<(&'r str, Dataset), BTreeMap<u64, BTreeMap<u32, f64>>>;
    let mut runs: Runs<'_> = BTreeMap::new();
    for r in &results.records {
        if !index.contains_key(r.arch_id.as_str()) {
            return Err(Error::UnresolvedArch(r.arch_id.clone()));
        }
        runs.entry((r.arch_id.as_str(), r.dataset))
            .or_default()
            .entry(r.seed)
            .or_default()
            .insert(r.epoch, r.val_accuracy);
    }

    Ok(runs
        .into_iter()
        .map(|((arch_id, dataset), seeds)| {
            let finals: Vec<f64> = seeds
                .values()
                .map(|epochs| *epochs.values().next_back().expect("non-empty run"))
                .collect();
            let mut per_epoch: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
            for epochs in seeds.values() {
                for (&epoch, &acc) in epochs {
                    let slot = per_epoch.entry(epoch).or_default();
                    slot.0 += acc;
                    slot.1 += 1;
                }
            }
            RunSummary {
                arch: index[arch_id],
                dataset,
                final_accuracy: finals.iter().sum::<f64>() / finals.len() as f64,
                trajectory: per_epoch
                    .into_iter()
                    .map(|(epoch, (sum, n))| (epoch, sum / n as f64))
                    .collect(),
            }
        })
        .collect())
}

/// Winner among all (ω, α) sharing one ξ on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiBest {
    pub dataset: Dataset,
    pub xi: f64,
    pub omega: f64,
    pub alpha: f64,
    pub arch_id: String,
    pub parameter_count: u64,
    pub final_accuracy: f64,
    pub trajectory: Vec<(u32, f64)>,
}

/// For each dataset and ξ, the architecture with the highest final-epoch
/// accuracy. Ties go to the lower parameter count, then to the
/// lexicographically smaller (ω, α).
pub fn best_per_xi(results: &ResultSet, archs: &[ArchRef]) -> Result<Vec<XiBest>> {
    let runs = summarize_runs(results, archs)?;
    let mut best: BTreeMap<(Dataset, u64), &RunSummary<'_>> = BTreeMap::new();
    for run in &runs {
        // ξ keyed by bit pattern made order-preserving for non-negative
        // and negative values alike
        let key = (run.dataset, ordered_bits(run.arch.params.xi));
        match best.get(&key) {
            Some(current) if !beats(run, current) => {}
            _ => {
                best.insert(key, run);
            }
        }
    }
    Ok(best
        .into_values()
        .map(|run| XiBest {
            dataset: run.dataset,
            xi: run.arch.params.xi,
            omega: run.arch.params.omega,
            alpha: run.arch.params.alpha,
            arch_id: run.arch.arch_id.clone(),
            parameter_count: run.arch.parameter_count,
            final_accuracy: run.final_accuracy,
            trajectory: run.trajectory.clone(),
        })
        .collect())
}

fn beats(challenger: &RunSummary<'_>, incumbent: &RunSummary<'_>) -> bool {
    use std::cmp::Ordering;
    let by_accuracy = challenger
        .final_accuracy
        .total_cmp(&incumbent.final_accuracy);
    let by_size = incumbent
        .arch
        .parameter_count
        .cmp(&challenger.arch.parameter_count);
    let by_shape = incumbent
        .arch
        .params
        .omega
        .total_cmp(&challenger.arch.params.omega)
        .then(
            incumbent
                .arch
                .params
                .alpha
                .total_cmp(&challenger.arch.params.alpha),
        );
    by_accuracy.then(by_size).then(by_shape) == Ordering::Greater
}

fn ordered_bits(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub dataset: Dataset,
    pub xi: f64,
    pub omega: f64,
    pub alpha: f64,
    pub arch_id: String,
    pub parameter_count: u64,
    pub final_accuracy: f64,
}

/// One row per (architecture, dataset) with results, sorted by
/// (ξ, ω, α, dataset).
pub fn scatter_data(results: &ResultSet, archs: &[ArchRef]) -> Result<Vec<ScatterRow>> {
    let runs = summarize_runs(results, archs)?;
    let mut rows: Vec<ScatterRow> = runs
        .iter()
        .map(|run| ScatterRow {
            dataset: run.dataset,
            xi: run.arch.params.xi,
            omega: run.arch.params.omega,
            alpha: run.arch.params.alpha,
            arch_id: run.arch.arch_id.clone(),
            parameter_count: run.arch.parameter_count,
            final_accuracy: run.final_accuracy,
        })
        .collect();
    rows.sort_by(|a, b| {
        let pa = SkewNormalParams {
            xi: a.xi,
            omega: a.omega,
            alpha: a.alpha,
        };
        let pb = SkewNormalParams {
            xi: b.xi,
            omega: b.omega,
            alpha: b.alpha,
        };
        cmp_params(&pa, &pb)
            .then(a.dataset.cmp(&b.dataset))
            .then(a.arch_id.cmp(&b.arch_id))
    });
    Ok(rows)
}

pub fn write_scatter_csv<W: Write>(rows: &[ScatterRow], writer: W) -> Result<()> {
    let mut out = csv_writer(writer);
    out.write_record([
        "dataset",
        "xi",
        "omega",
        "alpha",
        "arch_id",
        "parameter_count",
        "final_accuracy",
    ])?;
    for r in rows {
        out.write_record([
            r.dataset.to_string(),
            r.xi.to_string(),
            r.omega.to_string(),
            r.alpha.to_string(),
            r.arch_id.clone(),
            r.parameter_count.to_string(),
            r.final_accuracy.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<scatter>", e))?;
    Ok(())
}

/// Long format: one row per epoch of each winner's trajectory.
pub fn write_best_per_xi_csv<W: Write>(winners: &[XiBest], writer: W) -> Result<()> {
    let mut out = csv_writer(writer);
    out.write_record([
        "dataset",
        "xi",
        "omega",
        "alpha",
        "arch_id",
        "parameter_count",
        "final_accuracy",
        "epoch",
        "val_accuracy",
    ])?;
    for w in winners {
        for &(epoch, acc) in &w.trajectory {
            out.write_record([
                w.dataset.to_string(),
                w.xi.to_string(),
                w.omega.to_string(),
                w.alpha.to_string(),
                w.arch_id.clone(),
                w.parameter_count.to_string(),
                w.final_accuracy.to_string(),
                epoch.to_string(),
                acc.to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("<best-per-xi>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(id: &str, xi: f64, omega: f64, alpha: f64, parameter_count: u64) -> ArchRef {
        ArchRef {
            arch_id: id.into(),
            params: SkewNormalParams { xi, omega, alpha },
            parameter_count,
        }
    }

    fn run(id: &str, epoch: u32, acc: f64) -> RunResult {
        RunResult {
            arch_id: id.into(),
            dataset: Dataset::Cifar10,
            epoch,
            val_accuracy: acc,
            seed: 0,
        }
    }

    fn parse(text: &str) -> Result<ResultSet> {
        parse_results(text.as_bytes(), Path::new("results.csv"))
    }

    #[test]
    fn parses_well_formed_file() {
        let set = parse(
            "arch_id,dataset,epoch,val_accuracy,seed\n\
             a,mnist,1,0.5,0\n\
             a,mnist,2,0.75,0\n\
             b,cifar10,1,0.25,3\n",
        )
        .unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.records[2].dataset, Dataset::Cifar10);
        assert_eq!(set.records[2].seed, 3);
    }

    #[test]
    fn located_errors() {
        let header = "arch_id,dataset,epoch,val_accuracy,seed\n";
        let cases = [
            (format!("{header}a,mnist,1,0.5,0\na,mnist,2,1.2,0\n"), 3),
            (format!("{header}a,mnist,x,0.5,0\n"), 2),
            (format!("{header}a,mnist,1,0.5\n"), 2),
            (format!("{header}a,imagenet,1,0.5,0\n"), 2),
            (format!("{header}a,mnist,0,0.5,0\n"), 2),
            (format!("{header}a,mnist,1,NaN,0\n"), 2),
            (format!("{header}a,mnist,1,0.5,-1\n"), 2),
            (format!("{header},mnist,1,0.5,0\n"), 2),
            ("arch,dataset,epoch,val_accuracy,seed\n".to_string(), 1),
            (String::new(), 1),
            (format!("{header}a,mnist,1,0.5,0\r\n"), 2),
        ];
        for (text, expected_line) in cases {
            match parse(&text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, expected_line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn duplicates_conflict() {
        let err = parse(
            "arch_id,dataset,epoch,val_accuracy,seed\n\
             a,mnist,1,0.5,0\n\
             a,mnist,2,0.6,0\n\
             a,mnist,1,0.7,0\n",
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                Error::Conflict {
                    line: 4,
                    first_line: 2,
                    ..
                }
            ),
            "{err}"
        );
        // a different seed is a different key
        parse(
            "arch_id,dataset,epoch,val_accuracy,seed\n\
             a,mnist,1,0.5,0\n\
             a,mnist,1,0.5,1\n",
        )
        .unwrap();
    }

    #[test]
    fn best_per_xi_tie_breaks_on_size_then_shape() {
        let archs = vec![
            arch("big", 3.0, 1.0, 0.0, 2_000_000),
            arch("small", 3.0, 2.0, 0.0, 1_000_000),
            arch("twin_a", 5.0, 2.0, 4.0, 10),
            arch("twin_b", 5.0, 1.5, 8.0, 10),
        ];
        let results = ResultSet {
            records: vec![
                run("big", 1, 0.9),
                run("small", 1, 0.9),
                run("twin_a", 1, 0.8),
                run("twin_b", 1, 0.8),
            ],
        };
        let winners = best_per_xi(&results, &archs).unwrap();
        assert_eq!(winners.len(), 2);
        assert_eq!(winners[0].arch_id, "small");
        assert_eq!(winners[1].arch_id, "twin_b");
    }

    #[test]
    fn best_per_xi_uses_last_epoch() {
        let archs = vec![
            arch("early", 1.0, 1.0, 0.0, 5),
            arch("late", 1.0, 2.0, 0.0, 5),
        ];
        let results = ResultSet {
            records: vec![
                run("early", 1, 0.95),
                run("early", 2, 0.70),
                run("late", 1, 0.50),
                run("late", 2, 0.80),
            ],
        };
        let winners = best_per_xi(&results, &archs).unwrap();
        assert_eq!(winners[0].arch_id, "late");
        assert_eq!(winners[0].trajectory, [(1, 0.50), (2, 0.80)]);
    }

    #[test]
    fn aggregation_errors() {
        let archs = vec![arch("a", 1.0, 1.0, 0.0, 5)];
        assert!(matches!(
            best_per_xi(&ResultSet::default(), &archs),
            Err(Error::Empty(_))
        ));
        let orphan = ResultSet {
            records: vec![run("ghost", 1, 0.5)],
        };
        assert!(matches!(
            scatter_data(&orphan, &archs),
            Err(Error::UnresolvedArch(_))
        ));
    }

    #[test]
    fn seeds_are_averaged() {
        let archs = vec![arch("a", 1.0, 1.0, 0.0, 5)];
        let mut r2 = run("a", 1, 0.6);
        r2.seed = 1;
        let results = ResultSet {
            records: vec![run("a", 1, 0.4), r2],
        };
        let rows = scatter_data(&results, &archs).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].final_accuracy - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ordered_bits_sorts_like_floats() {
        let values = [-3.0, -0.5, 0.0, 1.0, 16.0];
        for w in values.windows(2) {
            assert!(ordered_bits(w[0]) < ordered_bits(w[1]));
        }
    }

    #[test]
    fn dataset_names() {
        for d in [Dataset::Mnist, Dataset::FashionMnist, Dataset::Cifar10] {
            assert_eq!(d.as_str().parse::<Dataset>().unwrap(), d);
            assert_eq!(serde_json::to_string(&d).unwrap(), format!("\"{d}\""));
        }
    }
}
