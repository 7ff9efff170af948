//! Binary classification metrics with Fake as the positive class.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(
    preds: &HashMap<String, Label>,
    truth: &HashMap<String, Label>,
    ids: &[String],
) -> Result<ConfusionCounts> {
    if ids.is_empty() {
        return Err(Error::data("evaluation set is empty"));
    }
    let mut c = ConfusionCounts::default();
    for id in ids {
        let (Some(&p), Some(&t)) = (preds.get(id), truth.get(id)) else {
            return Err(Error::data(format!("id `{id}` missing from predictions or truth")));
        };
        match (p, t) {
            (Label::Fake, Label::Fake) => c.tp += 1,
            (Label::Fake, Label::Real) => c.fp += 1,
            (Label::Real, Label::Real) => c.tn += 1,
            (Label::Real, Label::Fake) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a 0/0 ratio was reported as 0.
    pub zero_division: bool,
}

fn ratio(num: usize, den: usize, flagged: &mut bool) -> f64 {
    if den == 0 {
        *flagged = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F1; any 0/0 is reported as 0.
pub fn prf1(c: &ConfusionCounts) -> Scores {
    let mut zero_division = false;
    let accuracy = ratio(c.tp + c.tn, c.total(), &mut zero_division);
    let precision = ratio(c.tp, c.tp + c.fp, &mut zero_division);
    let recall = ratio(c.tp, c.tp + c.fn_, &mut zero_division);
    let f1 = if precision + recall == 0.0 {
        zero_division = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores {
        accuracy,
        precision,
        recall,
        f1,
        zero_division,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0,0)` to `(1,1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "fpr\ttpr")?;
        for (x, y) in &self.points {
            writeln!(w, "{x}\t{y}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Threshold sweep over distinct scores, highest first; tied scores move
/// together so the trapezoidal area equals the rank statistic with ties
/// counted half.
pub fn roc_auc(
    scores: &HashMap<String, f64>,
    truth: &HashMap<String, Label>,
    ids: &[String],
) -> Result<RocCurve> {
    let mut pairs = Vec::with_capacity(ids.len());
    for id in ids {
        let (Some(&s), Some(&t)) = (scores.get(id), truth.get(id)) else {
            return Err(Error::data(format!("id `{id}` missing from scores or truth")));
        };
        if s.is_nan() {
            return Err(Error::data(format!("score for `{id}` is NaN")));
        }
        pairs.push((s, t == Label::Fake));
    }
    let pos = pairs.iter().filter(|p| p.1).count();
    let neg = pairs.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::data("ROC needs both fake and real examples"));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let s = pairs[i].0;
        let (tp0, fp0) = (tp, fp);
        while i < pairs.len() && pairs[i].0 == s {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // Trapezoid in count space, normalized once at the end.
        auc += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(RocCurve {
        points,
        auc: auc / (pos as f64 * neg as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("n{i}")).collect()
    }

    fn labels(v: &[Label]) -> HashMap<String, Label> {
        v.iter().enumerate().map(|(i, &l)| (format!("n{i}"), l)).collect()
    }

    fn score_map(v: &[f64]) -> HashMap<String, f64> {
        v.iter().enumerate().map(|(i, &s)| (format!("n{i}"), s)).collect()
    }

    use Label::{Fake as F, Real as R};

    #[test]
    fn confusion_cases() {
        let truth: Vec<Label> = (0..20).map(|i| if i < 10 { F } else { R }).collect();
        let c = confusion(&labels(&truth), &labels(&truth), &ids(20)).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 10, fp: 0, tn: 10, fn_: 0 });

        let truth = [F, F, F, R, R, R, R, R, R, R];
        let c = confusion(&labels(&[F; 10]), &labels(&truth), &ids(10)).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 3, fp: 7, tn: 0, fn_: 0 });

        assert!(confusion(&labels(&[F]), &labels(&[F]), &[]).is_err());
        assert!(confusion(&labels(&[F]), &labels(&[F]), &ids(2)).is_err());
    }

    #[test]
    fn prf1_cases() {
        let s = prf1(&ConfusionCounts { tp: 1, fp: 1, tn: 0, fn_: 0 });
        assert_eq!((s.precision, s.recall), (0.5, 1.0));
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(!s.zero_division);

        let s = prf1(&ConfusionCounts { tp: 4, fp: 0, tn: 6, fn_: 0 });
        assert_eq!((s.accuracy, s.precision, s.recall, s.f1), (1.0, 1.0, 1.0, 1.0));

        let s = prf1(&ConfusionCounts { tp: 0, fp: 0, tn: 3, fn_: 2 });
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        assert!(s.zero_division);
    }

    #[test]
    fn roc_cases() {
        let roc = roc_auc(&score_map(&[0.9, 0.8, 0.3, 0.1]), &labels(&[F, F, R, R]), &ids(4)).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));

        let roc = roc_auc(&score_map(&[0.4; 6]), &labels(&[F, R, F, R, R, F]), &ids(6)).unwrap();
        assert_eq!(roc.auc, 0.5);
        assert_eq!(roc.points, vec![(0.0, 0.0), (1.0, 1.0)]);

        // Fake {0.9, 0.8, 0.6}, Real {0.7, 0.1}: 5 of 6 pairs ordered.
        let roc = roc_auc(
            &score_map(&[0.9, 0.8, 0.7, 0.1, 0.6]),
            &labels(&[F, F, R, R, F]),
            &ids(5),
        )
        .unwrap();
        assert!((roc.auc - 5.0 / 6.0).abs() < 1e-15);

        assert!(roc_auc(&score_map(&[0.1, 0.2]), &labels(&[F, F]), &ids(2)).is_err());
    }

    #[test]
    fn roc_tsv_layout() {
        let roc = roc_auc(&score_map(&[0.9, 0.1]), &labels(&[F, R]), &ids(2)).unwrap();
        let mut buf = Vec::new();
        roc.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "fpr\ttpr\n0\t0\n0\t1\n1\t1\n");
    }
}
