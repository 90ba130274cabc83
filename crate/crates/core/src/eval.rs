//! Supervised evaluation of anomaly traces and feature-case ranking.
//!
//! A tick is predicted abnormal when `θ ≥ threshold`. The ROC curve sweeps
//! every distinct score plus a `+∞` sentinel, from the highest threshold
//! down, so `(FPR, TPR)` run from `(0, 0)` to `(1, 1)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Manoeuvre classes of the U-turn ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentClass {
    EnteringUturn,
    UturnExecution,
    ExitingUturn,
    InverseCurve,
    StraightMotion,
}

impl SegmentClass {
    pub const ALL: [SegmentClass; 5] = [
        SegmentClass::EnteringUturn,
        SegmentClass::UturnExecution,
        SegmentClass::ExitingUturn,
        SegmentClass::InverseCurve,
        SegmentClass::StraightMotion,
    ];

    /// Abnormal with respect to perimeter monitoring.
    pub fn is_abnormal(self) -> bool {
        matches!(self, SegmentClass::UturnExecution | SegmentClass::InverseCurve)
    }

    pub fn name(self) -> &'static str {
        match self {
            SegmentClass::EnteringUturn => "EnteringUturn",
            SegmentClass::UturnExecution => "UturnExecution",
            SegmentClass::ExitingUturn => "ExitingUturn",
            SegmentClass::InverseCurve => "InverseCurve",
            SegmentClass::StraightMotion => "StraightMotion",
        }
    }
}

impl fmt::Display for SegmentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SegmentClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SegmentClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub timestamps: Vec<f64>,
    pub classes: Vec<SegmentClass>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.classes.iter().map(|c| c.is_abnormal()).collect()
    }

    /// `t,class,label` rows.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,class,label\n");
        for (t, c) in self.timestamps.iter().zip(&self.classes) {
            out.push_str(&format!("{t},{c},{}\n", u8::from(c.is_abnormal())));
        }
        out
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let col = |n: &str| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::MissingColumn(n.to_string()))
        };
        let (tc, cc) = (col("t")?, col("class")?);
        let mut timestamps = Vec::new();
        let mut classes = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let raw = rec[tc].trim();
            timestamps.push(raw.parse::<f64>().map_err(|_| Error::InvalidValue {
                row,
                column: "t".into(),
                value: raw.to_string(),
            })?);
            classes.push(rec[cc].trim().parse()?);
        }
        Ok(Self { timestamps, classes })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "extended_f64")]
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Serde adapter for `f64` fields that may be infinite: JSON has no
/// infinities, so they are written as the strings `"inf"` / `"-inf"`.
pub mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(|_| de::Error::custom(format!("bad number `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / (self.tp + self.tn + self.fp + self.fn_) as f64
    }
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if let Some(row) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidValue {
            row,
            column: "theta".into(),
            value: "NaN".into(),
        });
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    Ok((pos, neg))
}

pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion> {
    check_inputs(scores, labels)?;
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let thr = scores[order[i]];
        while i < order.len() && scores[order[i]] == thr {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(RocPoint {
            threshold: thr,
            tpr: tp as f64 / pos as f64,
            fpr: fp as f64 / neg as f64,
        });
    }
    Ok(out)
}

/// Trapezoidal area under the ROC curve.
pub fn auc(roc: &[RocPoint]) -> f64 {
    roc.windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum()
}

pub fn accuracy(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    Ok(confusion(scores, labels, threshold)?.accuracy())
}

/// Best accuracy over the ROC thresholds; ties go to the lower threshold.
pub fn best_accuracy(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    let roc = roc_curve(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    let n = labels.len() as f64;
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    // thresholds descend along the curve, so `>=` keeps the lowest on ties
    for p in &roc {
        let acc = (p.tpr * pos + (1.0 - p.fpr) * neg) / n;
        if acc >= best.0 {
            best = (acc, p.threshold);
        }
    }
    Ok(best)
}

/// Centered moving average; a window of 1 (or 0) leaves the trace untouched.
/// Even windows are widened to the next odd size.
pub fn smooth(scores: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return scores.to_vec();
    }
    let half = window / 2;
    (0..scores.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(scores.len());
            scores[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub feature: String,
    pub auc: f64,
    pub best_acc: f64,
    #[serde(with = "extended_f64")]
    pub threshold: f64,
    pub roc: Vec<RocPoint>,
}

pub fn evaluate(feature: &str, scores: &[f64], labels: &[bool]) -> Result<EvalReport> {
    let roc = roc_curve(scores, labels)?;
    let (best_acc, threshold) = best_accuracy(scores, labels)?;
    Ok(EvalReport {
        feature: feature.to_string(),
        auc: auc(&roc),
        best_acc,
        threshold,
        roc,
    })
}

/// Ranking: AUC descending, then best accuracy descending, then feature id.
pub fn select_model(reports: &[EvalReport]) -> Result<Vec<EvalReport>> {
    if reports.is_empty() {
        return Err(Error::EmptyReportSet);
    }
    let mut out = reports.to_vec();
    out.sort_by(|a, b| {
        b.auc
            .total_cmp(&a.auc)
            .then_with(|| b.best_acc.total_cmp(&a.best_acc))
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(out)
}

/// Mean score over ticks whose label equals `abnormal`.
pub fn class_mean(scores: &[f64], labels: &[bool], abnormal: bool) -> f64 {
    let (s, n) = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == abnormal)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Mann-Whitney oracle: P(s⁺ > s⁻) + ½ P(s⁺ = s⁻) over all pairs.
    fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_and_inverted_separation() {
        let s = [0.9, 0.8, 0.2, 0.1];
        let roc = roc_curve(&s, &[true, true, false, false]).unwrap();
        assert!(roc.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(auc(&roc), 1.0);
        let roc = roc_curve(&s, &[false, false, true, true]).unwrap();
        assert!(roc.iter().any(|p| p.fpr == 1.0 && p.tpr == 0.0));
        assert_eq!(auc(&roc), 0.0);
    }

    #[test]
    fn single_class_and_length_errors() {
        assert!(matches!(
            roc_curve(&[0.1, 0.2], &[false, false]),
            Err(Error::SingleClassLabels)
        ));
        assert!(matches!(
            roc_curve(&[0.1], &[false, true]),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn roc_shape() {
        let s = [0.3, 0.3, 0.7, 0.1, 0.9, 0.3];
        let l = [true, false, true, false, false, true];
        let roc = roc_curve(&s, &l).unwrap();
        assert!(roc[0].threshold.is_infinite());
        assert_eq!(roc.len(), 5);
        for w in roc.windows(2) {
            assert!(w[0].threshold > w[1].threshold);
            assert!(w[1].tpr >= w[0].tpr && w[1].fpr >= w[0].fpr);
        }
        let last = roc.last().unwrap();
        assert_eq!((last.tpr, last.fpr), (1.0, 1.0));
    }

    #[test]
    fn accuracy_by_hand() {
        // TP = TN = FP = FN = 1
        let s = [0.9, 0.8, 0.2, 0.1];
        let l = [true, false, false, true];
        let c = confusion(&s, &l, 0.5).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (1, 1, 1, 1));
        assert_eq!(accuracy(&s, &l, 0.5).unwrap(), 0.5);
        // inclusive decision rule
        assert_eq!(confusion(&s, &l, 0.9).unwrap().tp, 1);
    }

    #[test]
    fn best_accuracy_perfect_and_ties() {
        let s = [0.9, 0.8, 0.2, 0.1];
        let (acc, thr) = best_accuracy(&s, &[true, true, false, false]).unwrap();
        assert_eq!((acc, thr), (1.0, 0.8));
        // every threshold gives 0.5 here; the lowest wins
        let (acc, thr) = best_accuracy(&[0.5, 0.5], &[true, false]).unwrap();
        assert_eq!((acc, thr), (0.5, 0.5));
    }

    #[test]
    fn prevalence_at_extreme_thresholds() {
        let s = [0.2, 0.4, 0.6, 0.8, 0.1];
        let l = [true, false, true, false, false];
        assert_eq!(accuracy(&s, &l, 0.0).unwrap(), 0.4);
        assert_eq!(accuracy(&s, &l, 0.81).unwrap(), 0.6);
    }

    #[test]
    fn auc_matches_pairwise_oracle_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = rng.random_range(2..=200);
            // coarse scores so ties occur
            let s: Vec<f64> = (0..n).map(|_| (rng.random_range(0.0..1.0f64) * 20.0).round() / 20.0).collect();
            let mut l: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
            l[0] = true;
            l[1] = false;
            let a = auc(&roc_curve(&s, &l).unwrap());
            assert!((a - pairwise_auc(&s, &l)).abs() < 1e-9);
        }
    }

    fn report(id: &str, auc: f64, acc: f64) -> EvalReport {
        EvalReport {
            feature: id.into(),
            auc,
            best_acc: acc,
            threshold: 0.5,
            roc: vec![],
        }
    }

    #[test]
    fn table_one_ranking_picks_sp() {
        let reports: Vec<EvalReport> = [
            ("SVP", 0.7299, 0.6940),
            ("SP", 0.782, 0.7611),
            ("VP", 0.6427, 0.6256),
            ("SV", 0.7676, 0.7338),
            ("S", 0.7144, 0.7338),
            ("V", 0.7071, 0.7064),
            ("P", 0.6044, 0.6268),
        ]
        .iter()
        .map(|&(id, a, c)| report(id, a, c))
        .collect();
        let ranked = select_model(&reports).unwrap();
        let ids: Vec<&str> = ranked.iter().map(|r| r.feature.as_str()).collect();
        assert_eq!(ids, ["SP", "SV", "SVP", "S", "V", "VP", "P"]);
    }

    #[test]
    fn ranking_ties_and_edge_cases() {
        let ranked = select_model(&[report("V", 0.7, 0.7), report("S", 0.7, 0.7)]).unwrap();
        assert_eq!(ranked[0].feature, "S");
        let ranked = select_model(&[report("V", 0.7, 0.8), report("S", 0.7, 0.7)]).unwrap();
        assert_eq!(ranked[0].feature, "V");
        assert_eq!(select_model(&[report("P", 0.1, 0.2)]).unwrap()[0].feature, "P");
        assert!(matches!(select_model(&[]), Err(Error::EmptyReportSet)));
    }

    #[test]
    fn smoothing_window() {
        let s = [0.0, 3.0, 0.0, 3.0];
        assert_eq!(smooth(&s, 1), s.to_vec());
        assert_eq!(smooth(&s, 3), vec![1.5, 1.0, 2.0, 1.5]);
    }

    #[test]
    fn ground_truth_csv_round_trip() {
        let gt = GroundTruth {
            timestamps: vec![0.0, 0.1, 0.2],
            classes: vec![
                SegmentClass::StraightMotion,
                SegmentClass::UturnExecution,
                SegmentClass::InverseCurve,
            ],
        };
        let csv = gt.to_csv_string();
        assert!(csv.contains("0.1,UturnExecution,1"));
        assert_eq!(GroundTruth::read_csv(csv.as_bytes()).unwrap(), gt);
        assert_eq!(gt.labels(), vec![false, true, true]);
        assert!(GroundTruth::read_csv("t,class\n0,Reverse\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn monotone_transform_keeps_the_curve(
            s in prop::collection::vec(0.0f64..1.0, 4..60),
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut l: Vec<bool> = (0..s.len()).map(|_| rng.random_bool(0.5)).collect();
            l[0] = true;
            l[1] = false;
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() + 2.0).collect();
            let (ra, rb) = (roc_curve(&s, &l).unwrap(), roc_curve(&t, &l).unwrap());
            let pa: Vec<(f64, f64)> = ra.iter().map(|p| (p.tpr, p.fpr)).collect();
            let pb: Vec<(f64, f64)> = rb.iter().map(|p| (p.tpr, p.fpr)).collect();
            prop_assert_eq!(pa, pb);
            prop_assert!((auc(&ra) - auc(&rb)).abs() < 1e-12);
            prop_assert!((best_accuracy(&s, &l).unwrap().0 - best_accuracy(&t, &l).unwrap().0).abs() < 1e-12);
        }
    }
}
