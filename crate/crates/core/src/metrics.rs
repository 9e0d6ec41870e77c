//! Diagnosis metrics and run-log persistence.
//!
//! `acc_s` / `acc_u` are average accuracies over seen- and unseen-labeled
//! test samples; `Har` is their harmonic mean, the balance metric of the
//! generalized paradigm.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Test-set paradigm: traditional evaluates unseen faults only, generalized
/// mixes seen and unseen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Paradigm {
    Tzsfd,
    Gzsfd,
}

impl Paradigm {
    pub fn as_str(self) -> &'static str {
        match self {
            Paradigm::Tzsfd => "tzsfd",
            Paradigm::Gzsfd => "gzsfd",
        }
    }
}

/// Per-stage evaluation results. Accuracies are fractions in `[0, 1]`;
/// formatting to percentages happens only at the reporting boundary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageMetrics {
    pub stage: usize,
    pub paradigm: Paradigm,
    pub acc_seen: Option<f64>,
    pub acc_unseen: f64,
    pub har: Option<f64>,
    /// (category, correct, total) triples over the evaluated samples.
    pub per_category: Vec<(usize, usize, usize)>,
}

/// `2ab / (a + b)`, defined as 0 when both inputs are 0.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Computes seen/unseen accuracies from aligned predictions and labels.
///
/// In the generalized paradigm both partitions must be present; the
/// traditional paradigm scores unseen-labeled samples only.
pub fn compute_metrics(
    stage: usize,
    paradigm: Paradigm,
    predictions: &[usize],
    labels: &[usize],
    seen: &BTreeSet<usize>,
) -> Result<StageMetrics> {
    if predictions.len() != labels.len() {
        return Err(CoreError::InvalidInput(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }

    let mut per_category: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
    let (mut seen_correct, mut seen_total) = (0usize, 0usize);
    let (mut unseen_correct, mut unseen_total) = (0usize, 0usize);

    for (&pred, &label) in predictions.iter().zip(labels) {
        let correct = usize::from(pred == label);
        let entry = per_category.entry(label).or_insert((0, 0));
        entry.0 += correct;
        entry.1 += 1;
        if seen.contains(&label) {
            seen_correct += correct;
            seen_total += 1;
        } else {
            unseen_correct += correct;
            unseen_total += 1;
        }
    }

    let per_category: Vec<(usize, usize, usize)> = per_category
        .into_iter()
        .map(|(c, (ok, total))| (c, ok, total))
        .collect();

    match paradigm {
        Paradigm::Tzsfd => {
            if unseen_total == 0 {
                return Err(CoreError::UndefinedMetric(
                    "traditional paradigm needs unseen-labeled samples".into(),
                ));
            }
            Ok(StageMetrics {
                stage,
                paradigm,
                acc_seen: None,
                acc_unseen: unseen_correct as f64 / unseen_total as f64,
                har: None,
                per_category,
            })
        }
        Paradigm::Gzsfd => {
            if seen_total == 0 || unseen_total == 0 {
                return Err(CoreError::UndefinedMetric(
                    "generalized paradigm needs both seen and unseen test partitions".into(),
                ));
            }
            let acc_s = seen_correct as f64 / seen_total as f64;
            let acc_u = unseen_correct as f64 / unseen_total as f64;
            Ok(StageMetrics {
                stage,
                paradigm,
                acc_seen: Some(acc_s),
                acc_unseen: acc_u,
                har: Some(harmonic_mean(acc_s, acc_u)),
                per_category,
            })
        }
    }
}

/// One logged row of generative training.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LossRow {
    pub step: u64,
    pub wasserstein: f64,
    pub penalty: f64,
    pub anti_att: f64,
    pub anti_fe: f64,
    pub generator_adv: f64,
    pub generator_total: f64,
}

/// Everything recorded for one completed stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub metrics: Vec<StageMetrics>,
    /// Accuracy on stage-1 seen categories under the current model.
    pub stage1_seen_accuracy: f64,
    /// Accuracy on stage-1 unseen categories under the current model.
    pub stage1_unseen_accuracy: Option<f64>,
    pub loss_curve: Vec<LossRow>,
}

/// Machine-readable log of a full run; the source of truth every emitted
/// file derives from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunLog {
    pub format: String,
    pub version: u32,
    pub protocol: String,
    pub plan_seed: u64,
    pub train_seed: u64,
    pub config: serde_json::Value,
    pub stages: Vec<StageRecord>,
    pub checkpoints: Vec<String>,
}

impl RunLog {
    pub fn new(protocol: &str, plan_seed: u64, train_seed: u64, config: serde_json::Value) -> Self {
        Self {
            format: "zsfd-runlog".into(),
            version: 1,
            protocol: protocol.into(),
            plan_seed,
            train_seed,
            config,
            stages: Vec::new(),
            checkpoints: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let log: RunLog = serde_json::from_slice(&fs::read(path)?)?;
        if log.format != "zsfd-runlog" {
            return Err(CoreError::Format(format!(
                "{} is not a run log (format tag {})",
                path.display(),
                log.format
            )));
        }
        Ok(log)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Writes the derived result files into `dir`:
/// `metrics.csv`, `manifest.json`, `stage1_accuracy.csv`, and one
/// `gan_loss_stage<k>.csv` per stage with a recorded curve.
/// Re-emission from the same log is byte-identical.
pub fn emit_results(log: &RunLog, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let mut metrics_csv = String::from("stage,paradigm,acc_s,acc_u,har\n");
    for record in &log.stages {
        for m in &record.metrics {
            writeln!(
                metrics_csv,
                "{},{},{},{:.6},{}",
                m.stage,
                m.paradigm.as_str(),
                fmt_opt(m.acc_seen),
                m.acc_unseen,
                fmt_opt(m.har)
            )
            .expect("string write");
        }
    }
    let metrics_path = dir.join("metrics.csv");
    fs::write(&metrics_path, metrics_csv)?;
    written.push(metrics_path);

    let mut stage1_csv = String::from("stage,stage1_seen_acc,stage1_unseen_acc\n");
    for record in &log.stages {
        writeln!(
            stage1_csv,
            "{},{:.6},{}",
            record.stage,
            record.stage1_seen_accuracy,
            fmt_opt(record.stage1_unseen_accuracy)
        )
        .expect("string write");
    }
    let stage1_path = dir.join("stage1_accuracy.csv");
    fs::write(&stage1_path, stage1_csv)?;
    written.push(stage1_path);

    #[derive(Serialize)]
    struct Manifest<'a> {
        format: &'a str,
        version: u32,
        protocol: &'a str,
        plan_seed: u64,
        train_seed: u64,
        config: &'a serde_json::Value,
        checkpoints: &'a [String],
        stages: usize,
    }
    let manifest = Manifest {
        format: "zsfd-run-manifest",
        version: 1,
        protocol: &log.protocol,
        plan_seed: log.plan_seed,
        train_seed: log.train_seed,
        config: &log.config,
        checkpoints: &log.checkpoints,
        stages: log.stages.len(),
    };
    let manifest_path = dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)?;
    written.push(manifest_path);

    for record in &log.stages {
        if record.loss_curve.is_empty() {
            continue;
        }
        let mut csv = String::from("step,wasserstein,penalty,anti_att,anti_fe\n");
        for row in &record.loss_curve {
            writeln!(
                csv,
                "{},{:.6},{:.6},{:.6},{:.6}",
                row.step, row.wasserstein, row.penalty, row.anti_att, row.anti_fe
            )
            .expect("string write");
        }
        let path = dir.join(format!("gan_loss_stage{}.csv", record.stage));
        fs::write(&path, csv)?;
        written.push(path);
    }

    Ok(written)
}

/// Parsed row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsCsvRow {
    pub stage: usize,
    pub paradigm: String,
    pub acc_seen: Option<f64>,
    pub acc_unseen: f64,
    pub har: Option<f64>,
}

/// Reads back a `metrics.csv` produced by [`emit_results`].
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsCsvRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CoreError::Format(e.to_string()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CoreError::Format(e.to_string()))?;
        if record.len() != 5 {
            return Err(CoreError::Format(format!(
                "metrics row has {} fields, expected 5",
                record.len()
            )));
        }
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(s.parse().map_err(|_| {
                    CoreError::Format(format!("bad float {s}"))
                })?))
            }
        };
        rows.push(MetricsCsvRow {
            stage: record[0]
                .parse()
                .map_err(|_| CoreError::Format("bad stage".into()))?,
            paradigm: record[1].to_string(),
            acc_seen: parse_opt(&record[2])?,
            acc_unseen: record[3]
                .parse()
                .map_err(|_| CoreError::Format("bad acc_u".into()))?,
            har: parse_opt(&record[4])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seen_set(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    #[test]
    fn harmonic_mean_matches_published_arithmetic() {
        // 80.04 / 59.29 -> 68.12
        let har = harmonic_mean(0.8004, 0.5929);
        assert!((har - 0.6812).abs() < 1e-4);
    }

    #[test]
    fn harmonic_mean_fixed_point_and_zero_cases() {
        assert!((harmonic_mean(0.7, 0.7) - 0.7).abs() < 1e-15);
        assert_eq!(harmonic_mean(0.0, 0.5), 0.0);
        assert_eq!(harmonic_mean(0.0, 0.0), 0.0);
    }

    #[test]
    fn gzsfd_metrics_and_partition_errors() {
        let seen = seen_set(&[0]);
        // seen cat 0: 1 of 2 correct; unseen cat 1: 1 of 1.
        let labels = vec![0, 0, 1];
        let preds = vec![0, 1, 1];
        let m = compute_metrics(2, Paradigm::Gzsfd, &preds, &labels, &seen).unwrap();
        assert_eq!(m.acc_seen, Some(0.5));
        assert_eq!(m.acc_unseen, 1.0);
        assert!((m.har.unwrap() - harmonic_mean(0.5, 1.0)).abs() < 1e-15);

        // Unseen partition missing in GZSFD is undefined.
        let all_seen = vec![0, 0];
        let err = compute_metrics(0, Paradigm::Gzsfd, &all_seen, &all_seen, &seen);
        assert!(matches!(err, Err(CoreError::UndefinedMetric(_))));
    }

    #[test]
    fn tzsfd_reports_unseen_only() {
        let seen = seen_set(&[0]);
        let labels = vec![0, 0, 0, 0, 1, 1];
        let preds = vec![0, 0, 0, 1, 1, 0];
        let m = compute_metrics(1, Paradigm::Tzsfd, &preds, &labels, &seen).unwrap();
        assert_eq!(m.acc_seen, None);
        assert_eq!(m.har, None);
        assert_eq!(m.acc_unseen, 0.5);
    }

    #[test]
    fn metrics_are_invariant_to_sample_order() {
        let seen = seen_set(&[0, 1]);
        let labels = vec![0, 1, 2, 2, 0];
        let preds = vec![0, 2, 2, 1, 0];
        let a = compute_metrics(0, Paradigm::Gzsfd, &preds, &labels, &seen).unwrap();
        let perm = [4, 2, 0, 3, 1];
        let labels_p: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        let preds_p: Vec<usize> = perm.iter().map(|&i| preds[i]).collect();
        let b = compute_metrics(0, Paradigm::Gzsfd, &preds_p, &labels_p, &seen).unwrap();
        assert_eq!(a.acc_seen, b.acc_seen);
        assert_eq!(a.acc_unseen, b.acc_unseen);
        assert_eq!(a.har, b.har);
        assert_eq!(a.per_category, b.per_category);
    }

    #[test]
    fn emitted_files_roundtrip_and_are_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = RunLog::new("category-increment", 1, 2, serde_json::json!({"t": 2}));
        for stage in 0..2 {
            log.stages.push(StageRecord {
                stage,
                metrics: vec![
                    compute_metrics(
                        stage,
                        Paradigm::Gzsfd,
                        &[0, 1, 2],
                        &[0, 1, 2],
                        &seen_set(&[0, 1]),
                    )
                    .unwrap(),
                    compute_metrics(
                        stage,
                        Paradigm::Tzsfd,
                        &[2, 2],
                        &[2, 2],
                        &seen_set(&[0, 1]),
                    )
                    .unwrap(),
                ],
                stage1_seen_accuracy: 0.875,
                stage1_unseen_accuracy: Some(0.5),
                loss_curve: vec![LossRow {
                    step: 1,
                    wasserstein: 0.5,
                    penalty: 0.1,
                    anti_att: 2.0,
                    anti_fe: 0.0,
                    generator_adv: -0.5,
                    generator_total: 19.5,
                }],
            });
        }

        let first = emit_results(&log, dir.path()).unwrap();
        let bytes: Vec<Vec<u8>> = first.iter().map(|p| std::fs::read(p).unwrap()).collect();
        let second = emit_results(&log, dir.path()).unwrap();
        assert_eq!(first, second);
        for (p, b) in second.iter().zip(&bytes) {
            assert_eq!(&std::fs::read(p).unwrap(), b, "{} changed", p.display());
        }

        // Two stages, two paradigms each.
        let rows = read_metrics_csv(&dir.path().join("metrics.csv")).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].paradigm, "gzsfd");
        assert_eq!(rows[0].acc_seen, Some(1.0));

        // Fig-4-style file has exactly one row per stage.
        let stage1 = std::fs::read_to_string(dir.path().join("stage1_accuracy.csv")).unwrap();
        assert_eq!(stage1.lines().count(), 1 + 2);
    }
}
