//! Error metrics and report files.
//!
//! Report layout written by [`emit_report`]:
//!
//! * `summary.json`: a [`Summary`] (checked by [`validate_summary`]).
//! * `records.csv`: `label,timestamp,mode,status,lateral_error,yaw_error`,
//!   one row per frame; errors are empty for failed frames.
//! * `histogram.csv`: `label,bin_lower_m,bin_upper_m,count`, absolute lateral
//!   error in 1 cm bins from zero up to the largest observed bin.
//!
//! All floating point values are written with 6 decimal places.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boundary::DetectionMode;
use crate::error::{Error, Result};
use crate::geometry::{cross_track_error, yaw_error};
use crate::pipeline::{FrameEstimate, FrameStatus};
use crate::world::Trajectory;

pub const THRESHOLDS: [f64; 4] = [0.1, 0.3, 0.5, 1.0];
pub const HISTOGRAM_BIN: f64 = 0.01;
pub const SUMMARY_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_FRAME_REJECTION: f64 = 0.1;

/// Per-frame error against ground truth. Errors are present exactly when the
/// estimate carried a pose (`ok` or `not_converged`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub timestamp: f64,
    pub mode: DetectionMode,
    pub status: FrameStatus,
    pub lateral_error_abs: Option<f64>,
    pub yaw_error_abs: Option<f64>,
    pub mean_residual: Option<f64>,
}

impl EvalRecord {
    pub fn is_failed(&self) -> bool {
        self.lateral_error_abs.is_none()
    }
}

/// Records plus how many estimates fell outside the reference time span.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub records: Vec<EvalRecord>,
    pub excluded: usize,
}

pub fn align_to_reference(estimates: &[FrameEstimate], reference: &Trajectory) -> Alignment {
    let mut records = Vec::with_capacity(estimates.len());
    let mut excluded = 0;
    for e in estimates {
        let Ok(truth) = reference.interpolate(e.live_timestamp) else {
            excluded += 1;
            continue;
        };
        let (lat, yaw) = match &e.estimated_pose {
            Some(p) => (
                Some(cross_track_error(p, &truth).abs()),
                Some(yaw_error(p, &truth).abs()),
            ),
            None => (None, None),
        };
        records.push(EvalRecord {
            timestamp: e.live_timestamp,
            mode: e.mode,
            status: e.status,
            lateral_error_abs: lat,
            yaw_error_abs: yaw,
            mean_residual: e.icp.as_ref().map(|r| r.mean_residual),
        });
    }
    Alignment { records, excluded }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub count: usize,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdTable {
    pub total: usize,
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdTable {
    /// Builds a table from precomputed counts. An empty total yields no rows.
    pub fn from_counts(thresholds: &[f64], counts: &[usize], total: usize) -> Result<Self> {
        if thresholds.len() != counts.len() {
            return Err(Error::Domain("thresholds and counts differ in length".into()));
        }
        if total == 0 {
            return Ok(Self { total, rows: Vec::new() });
        }
        let rows = thresholds
            .iter()
            .zip(counts)
            .map(|(&threshold, &count)| ThresholdRow {
                threshold,
                count,
                percentage: count as f64 / total as f64 * 100.0,
            })
            .collect();
        let table = Self { total, rows };
        table.check()?;
        Ok(table)
    }

    /// Monotone counts bounded by the total, percentages matching counts
    /// to 0.01 %.
    pub fn check(&self) -> Result<()> {
        let mut prev: Option<&ThresholdRow> = None;
        for row in &self.rows {
            if row.count > self.total {
                return Err(Error::Domain(format!("count {} exceeds total {}", row.count, self.total)));
            }
            let expected = row.count as f64 / self.total as f64 * 100.0;
            if (expected - row.percentage).abs() > 0.01 {
                return Err(Error::Domain(format!(
                    "percentage {} inconsistent with {}/{}",
                    row.percentage, row.count, self.total
                )));
            }
            if let Some(p) = prev {
                if row.threshold <= p.threshold || row.count < p.count {
                    return Err(Error::Domain("threshold table is not monotone".into()));
                }
            }
            prev = Some(row);
        }
        Ok(())
    }
}

/// Counts records with lateral error strictly below each of [`THRESHOLDS`].
pub fn threshold_table(records: &[EvalRecord]) -> ThresholdTable {
    let counts: Vec<usize> = THRESHOLDS
        .iter()
        .map(|&t| {
            records
                .iter()
                .filter(|r| r.lateral_error_abs.is_some_and(|e| e < t))
                .count()
        })
        .collect();
    ThresholdTable::from_counts(&THRESHOLDS, &counts, records.len())
        .expect("counts from records are consistent")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanErrors {
    pub lateral: f64,
    pub yaw: f64,
    pub ok_count: usize,
    pub failed_count: usize,
}

pub fn mean_abs_errors(records: &[EvalRecord]) -> Result<MeanErrors> {
    let mut lat = 0.0;
    let mut yaw = 0.0;
    let mut n = 0;
    for r in records {
        if let (Some(l), Some(y)) = (r.lateral_error_abs, r.yaw_error_abs) {
            lat += l;
            yaw += y;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput("no successfully localised frames".into()));
    }
    Ok(MeanErrors {
        lateral: lat / n as f64,
        yaw: yaw / n as f64,
        ok_count: n,
        failed_count: records.len() - n,
    })
}

/// Drops the ⌈fraction·n⌉ records with the largest ICP residual. Records
/// without a residual rank worst; ties drop the later record first. Order of
/// the survivors is preserved.
pub fn reject_worst_frames(records: &[EvalRecord], reject_fraction: f64) -> Result<Vec<EvalRecord>> {
    if !(0.0..1.0).contains(&reject_fraction) {
        return Err(Error::Domain(format!("reject_fraction {reject_fraction} outside [0, 1)")));
    }
    let drop = (reject_fraction * records.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..records.len()).collect();
    let key = |i: usize| records[i].mean_residual.unwrap_or(f64::INFINITY);
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(b.cmp(&a)));
    let mut dropped = vec![false; records.len()];
    for &i in order.iter().take(drop) {
        dropped[i] = true;
    }
    Ok(records
        .iter()
        .zip(dropped)
        .filter(|(_, d)| !d)
        .map(|(r, _)| r.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvePoint {
    pub deviation: f64,
    pub probability: f64,
}

/// Fraction of records whose lateral error exceeds each deviation; failed
/// frames exceed every deviation. An empty record set gives probability 0.
pub fn exceedance_curve(records: &[EvalRecord], deviations: &[f64]) -> Result<Vec<CurvePoint>> {
    if deviations.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Domain("deviations must be sorted ascending".into()));
    }
    Ok(deviations
        .iter()
        .map(|&d| {
            let over = records
                .iter()
                .filter(|r| r.lateral_error_abs.is_none_or(|e| e > d))
                .count();
            CurvePoint {
                deviation: d,
                probability: if records.is_empty() {
                    0.0
                } else {
                    over as f64 / records.len() as f64
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRejection {
    pub fraction: f64,
    pub mean_lateral: Option<f64>,
    pub mean_yaw: Option<f64>,
}

/// Aggregate metrics for one estimate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSummary {
    pub label: String,
    pub frames: usize,
    pub localised: usize,
    pub failed: usize,
    pub not_converged: usize,
    pub excluded: usize,
    pub mean_lateral: Option<f64>,
    pub mean_yaw: Option<f64>,
    pub table: ThresholdTable,
    pub exceedance: Vec<CurvePoint>,
    pub frame_rejection: FrameRejection,
}

/// `candidate − baseline` for each aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub baseline: String,
    pub candidate: String,
    pub delta_mean_lateral: Option<f64>,
    pub delta_mean_yaw: Option<f64>,
    pub delta_within_percentage: Vec<CurvePoint>,
    pub delta_exceedance: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub format_version: u32,
    pub modes: Vec<ModeSummary>,
    #[serde(default)]
    pub comparison: Option<Comparison>,
}

pub fn summarise(label: &str, alignment: &Alignment) -> ModeSummary {
    let records = &alignment.records;
    let means = mean_abs_errors(records).ok();
    let rejected = reject_worst_frames(records, DEFAULT_FRAME_REJECTION).expect("valid fraction");
    let rejected_means = mean_abs_errors(&rejected).ok();
    ModeSummary {
        label: label.to_string(),
        frames: records.len(),
        localised: records.iter().filter(|r| !r.is_failed()).count(),
        failed: records.iter().filter(|r| r.is_failed()).count(),
        not_converged: records
            .iter()
            .filter(|r| r.status == FrameStatus::NotConverged)
            .count(),
        excluded: alignment.excluded,
        mean_lateral: means.map(|m| m.lateral),
        mean_yaw: means.map(|m| m.yaw),
        table: threshold_table(records),
        exceedance: exceedance_curve(records, &THRESHOLDS).expect("sorted"),
        frame_rejection: FrameRejection {
            fraction: DEFAULT_FRAME_REJECTION,
            mean_lateral: rejected_means.map(|m| m.lateral),
            mean_yaw: rejected_means.map(|m| m.yaw),
        },
    }
}

pub fn compare(baseline: &ModeSummary, candidate: &ModeSummary) -> Comparison {
    let diff = |a: Option<f64>, b: Option<f64>| Some(b? - a?);
    let pct = |s: &ModeSummary, t: f64| {
        s.table
            .rows
            .iter()
            .find(|r| r.threshold == t)
            .map_or(0.0, |r| r.percentage)
    };
    let prob = |s: &ModeSummary, d: f64| {
        s.exceedance
            .iter()
            .find(|c| c.deviation == d)
            .map_or(0.0, |c| c.probability)
    };
    Comparison {
        baseline: baseline.label.clone(),
        candidate: candidate.label.clone(),
        delta_mean_lateral: diff(baseline.mean_lateral, candidate.mean_lateral),
        delta_mean_yaw: diff(baseline.mean_yaw, candidate.mean_yaw),
        delta_within_percentage: THRESHOLDS
            .iter()
            .map(|&t| CurvePoint { deviation: t, probability: pct(candidate, t) - pct(baseline, t) })
            .collect(),
        delta_exceedance: THRESHOLDS
            .iter()
            .map(|&d| CurvePoint { deviation: d, probability: prob(candidate, d) - prob(baseline, d) })
            .collect(),
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6 + 0.0
}

fn rounded(summary: &Summary) -> Summary {
    let mut s = summary.clone();
    let opt = |v: &mut Option<f64>| *v = v.map(round6);
    let curve = |c: &mut Vec<CurvePoint>| {
        for p in c {
            p.deviation = round6(p.deviation);
            p.probability = round6(p.probability);
        }
    };
    for m in &mut s.modes {
        opt(&mut m.mean_lateral);
        opt(&mut m.mean_yaw);
        for r in &mut m.table.rows {
            r.threshold = round6(r.threshold);
            r.percentage = round6(r.percentage);
        }
        curve(&mut m.exceedance);
        m.frame_rejection.fraction = round6(m.frame_rejection.fraction);
        opt(&mut m.frame_rejection.mean_lateral);
        opt(&mut m.frame_rejection.mean_yaw);
    }
    if let Some(c) = &mut s.comparison {
        opt(&mut c.delta_mean_lateral);
        opt(&mut c.delta_mean_yaw);
        curve(&mut c.delta_within_percentage);
        curve(&mut c.delta_exceedance);
    }
    s
}

/// Parses and checks a `summary.json` document.
pub fn validate_summary(json: &str) -> Result<Summary> {
    let s: Summary = serde_json::from_str(json)
        .map_err(|e| Error::format(Path::new("summary.json"), e))?;
    let bad = |msg: String| Err(Error::format(Path::new("summary.json"), msg));
    if s.format_version != SUMMARY_FORMAT_VERSION {
        return bad(format!("unsupported format_version {}", s.format_version));
    }
    for m in &s.modes {
        if m.localised + m.failed != m.frames || m.table.total != m.frames {
            return bad(format!("{}: frame counts disagree", m.label));
        }
        if let Err(e) = m.table.check() {
            return bad(format!("{}: {e}", m.label));
        }
        let probs: Vec<f64> = m.exceedance.iter().map(|c| c.probability).collect();
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || probs.windows(2).any(|w| w[1] > w[0]) {
            return bad(format!("{}: exceedance curve out of range or increasing", m.label));
        }
    }
    Ok(s)
}

/// Writes `summary.json`, `records.csv` and `histogram.csv` into `out_dir`.
/// `records` pairs each summary label with its records.
pub fn emit_report(out_dir: &Path, summary: &Summary, records: &[(&str, &[EvalRecord])]) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, body: String| {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    };

    let mut json = serde_json::to_string_pretty(&rounded(summary)).expect("summary serialises");
    json.push('\n');
    write("summary.json", json)?;

    let opt = |v: Option<f64>| v.map(|x| format!("{:.6}", round6(x))).unwrap_or_default();
    let mut csv = String::from("label,timestamp,mode,status,lateral_error,yaw_error\n");
    for (label, recs) in records {
        for r in *recs {
            let status = serde_json::to_value(r.status).expect("status serialises");
            csv.push_str(&format!(
                "{label},{:.6},{},{},{},{}\n",
                r.timestamp,
                r.mode,
                status.as_str().unwrap_or_default(),
                opt(r.lateral_error_abs),
                opt(r.yaw_error_abs),
            ));
        }
    }
    write("records.csv", csv)?;

    let mut hist = String::from("label,bin_lower_m,bin_upper_m,count\n");
    for (label, recs) in records {
        let bins: Vec<usize> = recs
            .iter()
            .filter_map(|r| r.lateral_error_abs)
            .map(|e| (e / HISTOGRAM_BIN).floor() as usize)
            .collect();
        let Some(&max) = bins.iter().max() else { continue };
        let mut counts = vec![0usize; max + 1];
        for b in bins {
            counts[b] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            hist.push_str(&format!(
                "{label},{:.6},{:.6},{c}\n",
                i as f64 * HISTOGRAM_BIN,
                (i + 1) as f64 * HISTOGRAM_BIN
            ));
        }
    }
    write("histogram.csv", hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{interpolate_pose, Pose2};
    use crate::icp::IcpResult;
    use crate::world::TrajectorySample;
    use crate::geometry::Transform2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(lat: Option<f64>, residual: Option<f64>) -> EvalRecord {
        EvalRecord {
            timestamp: 0.0,
            mode: DetectionMode::VisibleOnly,
            status: if lat.is_some() { FrameStatus::Ok } else { FrameStatus::NoOverlap },
            lateral_error_abs: lat,
            yaw_error_abs: lat.map(|l| l / 10.0),
            mean_residual: residual,
        }
    }

    fn lats(v: &[f64]) -> Vec<EvalRecord> {
        v.iter().map(|&l| rec(Some(l), Some(l))).collect()
    }

    fn estimate(t: f64, pose: Option<Pose2>) -> FrameEstimate {
        FrameEstimate {
            live_timestamp: t,
            map_timestamp: Some(0.0),
            mode: DetectionMode::VisibleOnly,
            icp: pose.map(|_| IcpResult {
                transform: Transform2::identity(),
                iterations: 1,
                mean_residual: 0.01,
                inlier_count: 1,
                converged: true,
                residual_history: vec![0.01],
            }),
            estimated_pose: pose,
            status: if pose.is_some() { FrameStatus::Ok } else { FrameStatus::NoOverlap },
            diagnostic: None,
        }
    }

    fn curved_reference() -> Trajectory {
        let samples = (0..21)
            .map(|i| {
                let t = i as f64 * 0.5;
                TrajectorySample {
                    timestamp: t,
                    pose: Pose2::new(3.0 * t, 0.2 * t * t, 0.3 * t - 1.0),
                }
            })
            .collect();
        Trajectory::new(samples).unwrap()
    }

    #[test]
    fn alignment_examples() {
        let reference = curved_reference();
        let on = reference.samples()[4];
        let a = align_to_reference(&[estimate(on.timestamp, Some(on.pose))], &reference);
        assert_eq!(a.records[0].lateral_error_abs, Some(0.0));
        assert_eq!(a.records[0].yaw_error_abs, Some(0.0));

        let t = 3.3;
        let truth = reference.interpolate(t).unwrap();
        let left = Pose2::new(truth.x(), truth.y(), truth.yaw()).compose(&Transform2::new(0.0, 0.25, 0.0));
        let a = align_to_reference(
            &[estimate(t, Some(left)), estimate(-1.0, Some(left)), estimate(99.0, None), estimate(t, None)],
            &reference,
        );
        assert_eq!(a.excluded, 2);
        assert!((a.records[0].lateral_error_abs.unwrap() - 0.25).abs() < 1e-12);
        assert!(a.records[1].is_failed());
    }

    #[test]
    fn alignment_matches_oversampled_reference() {
        let reference = curved_reference();
        let s = reference.samples();
        let mut dense = Vec::new();
        for w in s.windows(2) {
            for k in 0..10 {
                let f = k as f64 / 10.0;
                dense.push(TrajectorySample {
                    timestamp: w[0].timestamp + f * (w[1].timestamp - w[0].timestamp),
                    pose: interpolate_pose(&w[0].pose, &w[1].pose, f).unwrap(),
                });
            }
        }
        dense.push(*s.last().unwrap());
        let dense = Trajectory::new(dense).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let estimates: Vec<_> = (0..200)
            .map(|_| {
                let t = rng.random_range(0.0..10.0);
                let p = Pose2::new(rng.random_range(-5.0..40.0), rng.random_range(-5.0..25.0), rng.random_range(-3.0..3.0));
                estimate(t, Some(p))
            })
            .collect();
        let a = align_to_reference(&estimates, &reference).records;
        let b = align_to_reference(&estimates, &dense).records;
        for (x, y) in a.iter().zip(&b) {
            assert!((x.lateral_error_abs.unwrap() - y.lateral_error_abs.unwrap()).abs() < 1e-6);
            assert!((x.yaw_error_abs.unwrap() - y.yaw_error_abs.unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn threshold_examples() {
        let t = threshold_table(&lats(&[0.0; 7]));
        assert!(t.rows.iter().all(|r| r.percentage == 100.0));

        let t = threshold_table(&lats(&[0.05, 0.2, 0.4, 0.9, 1.5]));
        assert_eq!(t.rows.iter().map(|r| r.count).collect::<Vec<_>>(), vec![1, 2, 3, 4]);

        // boundary values are not "within"
        let t = threshold_table(&lats(&[0.1, 0.3]));
        assert_eq!(t.rows.iter().map(|r| r.count).collect::<Vec<_>>(), vec![0, 1, 2, 2]);

        let mut with_fail = lats(&[0.0]);
        with_fail.push(rec(None, None));
        let t = threshold_table(&with_fail);
        assert!(t.rows.iter().all(|r| r.count == 1 && r.percentage == 50.0));

        assert!(threshold_table(&[]).rows.is_empty());
    }

    #[test]
    fn published_table_regenerates() {
        let t = ThresholdTable::from_counts(&THRESHOLDS, &[20389, 27479, 29005, 30124], 31100).unwrap();
        for (row, want) in t.rows.iter().zip([65.56, 88.36, 93.26, 96.86]) {
            assert!((row.percentage - want).abs() < 0.01, "{row:?}");
        }
        assert!(ThresholdTable::from_counts(&THRESHOLDS, &[3, 2, 4, 5], 10).is_err());
    }

    #[test]
    fn mean_examples() {
        let m = mean_abs_errors(&[EvalRecord { yaw_error_abs: Some(0.01), ..rec(Some(0.1), None) }]).unwrap();
        assert_eq!((m.lateral, m.yaw), (0.1, 0.01));
        let mut r = lats(&[0.1, 0.3]);
        r.push(rec(None, None));
        let m = mean_abs_errors(&r).unwrap();
        assert!((m.lateral - 0.2).abs() < 1e-15);
        assert_eq!((m.ok_count, m.failed_count), (2, 1));
        assert!(matches!(mean_abs_errors(&[rec(None, None)]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn rejection_examples() {
        let r = lats(&[0.3, 0.1, 0.2]);
        assert_eq!(reject_worst_frames(&r, 0.0).unwrap(), r);
        let r: Vec<_> = [1.0, 2.0, 3.0, 4.0].iter().map(|&x| rec(Some(x), Some(x))).collect();
        let kept = reject_worst_frames(&r, 0.5).unwrap();
        assert_eq!(kept.iter().map(|k| k.mean_residual.unwrap()).collect::<Vec<_>>(), vec![1.0, 2.0]);
        let mut r = lats(&[0.1, 0.2]);
        r.insert(1, rec(None, None));
        assert_eq!(reject_worst_frames(&r, 0.2).unwrap(), lats(&[0.1, 0.2]));
        assert!(reject_worst_frames(&r, 1.0).is_err());
    }

    #[test]
    fn rejection_helps_when_residual_tracks_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let recs: Vec<_> = (0..500)
            .map(|_| {
                let e: f64 = rng.random_range(0.0..1.0);
                rec(Some(e), Some(e * 0.1 + rng.random_range(0.0..0.01)))
            })
            .collect();
        let before = mean_abs_errors(&recs).unwrap().lateral;
        let after = mean_abs_errors(&reject_worst_frames(&recs, 0.1).unwrap()).unwrap().lateral;
        assert!(after <= before);
    }

    #[test]
    fn exceedance_examples() {
        let c = exceedance_curve(&lats(&[0.0, 0.0]), &[0.1, 0.5]).unwrap();
        assert!(c.iter().all(|p| p.probability == 0.0));
        let c = exceedance_curve(&lats(&[0.05, 0.15, 0.25]), &[0.1]).unwrap();
        assert!((c[0].probability - 2.0 / 3.0).abs() < 1e-15);
        let c = exceedance_curve(&[rec(None, None)], &[1e9]).unwrap();
        assert_eq!(c[0].probability, 1.0);
        assert!(exceedance_curve(&[], &[0.5, 0.1]).is_err());
    }

    #[test]
    fn comparison_signs() {
        let a = Alignment { records: lats(&[0.1, 0.2, 0.6]), excluded: 0 };
        let b = Alignment { records: lats(&[0.05, 0.1, 0.2]), excluded: 0 };
        let sa = summarise("a", &a);
        let sb = summarise("b", &b);
        let zero = compare(&sa, &sa);
        assert_eq!(zero.delta_mean_lateral, Some(0.0));
        assert!(zero.delta_exceedance.iter().all(|c| c.probability == 0.0));
        let ab = compare(&sa, &sb);
        let ba = compare(&sb, &sa);
        assert!(ab.delta_mean_lateral.unwrap() < 0.0);
        assert_eq!(ab.delta_mean_lateral.map(|d| -d), ba.delta_mean_lateral);
        for (x, y) in ab.delta_within_percentage.iter().zip(&ba.delta_within_percentage) {
            assert_eq!(x.probability, -y.probability);
        }
    }

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let empty = Alignment { records: Vec::new(), excluded: 0 };
        let summary = Summary { format_version: 1, modes: vec![summarise("visible_only", &empty)], comparison: None };
        emit_report(dir.path(), &summary, &[("visible_only", &[])]).unwrap();
        let json = fs::read_to_string(dir.path().join("summary.json")).unwrap();
        let back = validate_summary(&json).unwrap();
        assert!(back.modes[0].table.rows.is_empty());
        assert_eq!(
            fs::read_to_string(dir.path().join("records.csv")).unwrap(),
            "label,timestamp,mode,status,lateral_error,yaw_error\n"
        );
        assert_eq!(fs::read_to_string(dir.path().join("histogram.csv")).unwrap().lines().count(), 1);

        let mut records = lats(&[0.015, 0.019, 0.031]);
        records.push(rec(None, None));
        let al = Alignment { records: records.clone(), excluded: 1 };
        let s1 = summarise("x", &al);
        let summary = Summary { format_version: 1, modes: vec![s1.clone(), s1.clone()], comparison: Some(compare(&s1, &s1)) };
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        emit_report(d1.path(), &summary, &[("x", &records)]).unwrap();
        emit_report(d2.path(), &summary, &[("x", &records)]).unwrap();
        for f in ["summary.json", "records.csv", "histogram.csv"] {
            assert_eq!(fs::read(d1.path().join(f)).unwrap(), fs::read(d2.path().join(f)).unwrap());
        }
        let hist = fs::read_to_string(d1.path().join("histogram.csv")).unwrap();
        assert!(hist.contains("x,0.010000,0.020000,2\n") && hist.contains("x,0.030000,0.040000,1\n"));
        let csv = fs::read_to_string(d1.path().join("records.csv")).unwrap();
        assert!(csv.contains("x,0.000000,visible_only,no_overlap,,\n"));
        validate_summary(&fs::read_to_string(d1.path().join("summary.json")).unwrap()).unwrap();

        assert!(validate_summary(&json.replace("\"format_version\": 1", "\"format_version\": 1, \"extra\": 0")).is_err());
    }

    proptest! {
        #[test]
        fn table_and_curve_invariants(errs in prop::collection::vec(prop::option::of(0.0..2.0f64), 0..60)) {
            let records: Vec<_> = errs.iter().map(|e| rec(*e, *e)).collect();
            let t = threshold_table(&records);
            prop_assert!(t.check().is_ok());
            let devs = [0.0, 0.05, 0.1, 0.3, 0.5, 1.0, 5.0];
            let c = exceedance_curve(&records, &devs).unwrap();
            prop_assert!(c.iter().all(|p| (0.0..=1.0).contains(&p.probability)));
            prop_assert!(c.windows(2).all(|w| w[1].probability <= w[0].probability));
            if errs.iter().all(|e| e.is_some()) {
                prop_assert_eq!(c.last().unwrap().probability, 0.0);
            }
        }
    }
}
