//! Point-wise precision/recall/F1 at the F1-optimal threshold, and ROC-AUC.
//! No point adjustment is applied.

use std::cmp::Ordering;

use crate::error::{Result, VistaError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Predictions are `score > threshold`; may be `-inf`.
    pub threshold: f64,
    pub roc_auc: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let auc = self.roc_auc.map_or("n/a".to_string(), |a| format!("{a:.6}"));
        format!(
            "precision  {:.6}\nrecall     {:.6}\nf1         {:.6}\nthreshold  {}\nroc_auc    {auc}\n\
             tp {}  fp {}  tn {}  fn {}\n",
            self.precision, self.recall, self.f1, self.threshold, self.tp, self.fp, self.tn, self.fn_
        )
    }

    pub fn to_kv(&self) -> String {
        let auc = self.roc_auc.map_or("nan".to_string(), |a| a.to_string());
        format!(
            "precision = {}\nrecall = {}\nf1 = {}\nthreshold = {}\nroc_auc = {auc}\ntp = {}\nfp = {}\ntn = {}\nfn = {}\n",
            self.precision, self.recall, self.f1, self.threshold, self.tp, self.fp, self.tn, self.fn_
        )
    }
}

/// Evaluated `(score, is_positive)` pairs with the positive and negative counts.
type Evaluated = (Vec<(f64, bool)>, u64, u64);

fn evaluated(scores: &[f64], labels: &[u8], exclude: Option<&[bool]>) -> Result<Evaluated> {
    if scores.len() != labels.len() {
        return Err(VistaError::Data(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(m) = exclude {
        if m.len() != scores.len() {
            return Err(VistaError::Data("mask length differs from score length".into()));
        }
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(VistaError::Data(format!("score {s} is not comparable")));
    }
    let pairs: Vec<(f64, bool)> = scores
        .iter()
        .zip(labels)
        .enumerate()
        .filter(|(i, _)| !exclude.is_some_and(|m| m[*i]))
        .map(|(_, (&s, &l))| (s, l == 1))
        .collect();
    let pos = pairs.iter().filter(|p| p.1).count() as u64;
    let neg = pairs.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(VistaError::UndefinedMetric(format!(
            "need both classes among evaluated points, found {pos} positive and {neg} negative"
        )));
    }
    Ok((pairs, pos, neg))
}

#[derive(Clone, Copy)]
struct Counts {
    tp: u64,
    fp: u64,
}

/// Compares F1 = 2tp / (2tp + fp + fn) exactly, then precision.
fn better(a: Counts, b: Counts, pos: u64) -> Ordering {
    let f1_num = |c: Counts| 2 * c.tp as u128;
    let f1_den = |c: Counts| (2 * c.tp + c.fp + (pos - c.tp)) as u128;
    let by_f1 = (f1_num(a) * f1_den(b)).cmp(&(f1_num(b) * f1_den(a)));
    if by_f1 != Ordering::Equal {
        return by_f1;
    }
    // precision tp / (tp + fp), with 0/0 treated as 0
    let p_num = |c: Counts| c.tp as u128;
    let p_den = |c: Counts| ((c.tp + c.fp) as u128).max(1);
    (p_num(a) * p_den(b)).cmp(&(p_num(b) * p_den(a)))
}

fn report(c: Counts, pos: u64, neg: u64, threshold: f64) -> EvalReport {
    let fn_ = pos - c.tp;
    let tn = neg - c.fp;
    let precision = if c.tp + c.fp > 0 {
        c.tp as f64 / (c.tp + c.fp) as f64
    } else {
        0.0
    };
    let recall = c.tp as f64 / pos as f64;
    let f1 = if c.tp > 0 {
        2.0 * c.tp as f64 / (2 * c.tp + c.fp + fn_) as f64
    } else {
        0.0
    };
    EvalReport {
        precision,
        recall,
        f1,
        threshold,
        roc_auc: None,
        tp: c.tp,
        fp: c.fp,
        tn,
        fn_,
    }
}

/// Sweeps every observed score value (and `-inf`) as a strict threshold and
/// returns the F1-maximizing one; ties go to higher precision, then to the
/// lower threshold. Points with `exclude[i] == true` are ignored.
pub fn optimal_f1(scores: &[f64], labels: &[u8], exclude: Option<&[bool]>) -> Result<EvalReport> {
    let (mut pairs, pos, neg) = evaluated(scores, labels, exclude)?;
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Threshold = current group's value: only strictly larger scores are positive.
    let mut counts = Counts { tp: 0, fp: 0 };
    let mut best = (counts, pairs[0].0);
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            if pairs[i].1 {
                counts.tp += 1;
            } else {
                counts.fp += 1;
            }
            i += 1;
        }
        let threshold = if i < pairs.len() { pairs[i].0 } else { f64::NEG_INFINITY };
        // later thresholds are lower, so only a strict improvement replaces the best
        // unless the comparison ties, in which case the lower threshold wins
        if better(counts, best.0, pos) != Ordering::Less {
            best = (counts, threshold);
        }
    }
    Ok(report(best.0, pos, neg, best.1))
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half. Computed exactly from tie-grouped ranks.
pub fn roc_auc(scores: &[f64], labels: &[u8], exclude: Option<&[bool]>) -> Result<f64> {
    let (mut pairs, pos, neg) = evaluated(scores, labels, exclude)?;
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // numerator in half-pair units
    let mut half_pairs: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        let (mut gp, mut gn) = (0u128, 0u128);
        while i < pairs.len() && pairs[i].0 == v {
            if pairs[i].1 {
                gp += 1;
            } else {
                gn += 1;
            }
            i += 1;
        }
        half_pairs += gp * (2 * neg_below + gn);
        neg_below += gn;
    }
    Ok(half_pairs as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// Optimal-F1 report with ROC-AUC filled in.
pub fn evaluate(scores: &[f64], labels: &[u8], exclude: Option<&[bool]>) -> Result<EvalReport> {
    let mut r = optimal_f1(scores, labels, exclude)?;
    r.roc_auc = Some(roc_auc(scores, labels, exclude)?);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_scores() {
        let r = optimal_f1(&[0.9, 0.1, 0.8], &[1, 0, 1], None).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        assert!(r.threshold >= 0.1 && r.threshold < 0.8);
        assert_eq!((r.tp, r.fp, r.tn, r.fn_), (2, 0, 1, 0));
    }

    #[test]
    fn equal_scores_predict_all_positive() {
        let r = optimal_f1(&[0.4; 5], &[1, 0, 0, 1, 0], None).unwrap();
        assert_eq!(r.threshold, f64::NEG_INFINITY);
        assert!((r.precision - 0.4).abs() < 1e-15);
        assert_eq!(r.recall, 1.0);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(optimal_f1(&[0.1, 0.2], &[1, 1], None), Err(VistaError::UndefinedMetric(_))));
        assert!(matches!(roc_auc(&[0.1, 0.2], &[0, 0], None), Err(VistaError::UndefinedMetric(_))));
        // masking can remove a class
        let mask = [false, true];
        assert!(roc_auc(&[0.1, 0.2], &[0, 1], Some(&mask)).is_err());
    }

    #[test]
    fn auc_fixtures() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1], None).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[0, 1, 1, 0, 1, 0], None).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1], None).unwrap(), 0.75);
    }

    #[test]
    fn mask_excludes_points() {
        let scores = [0.9, 0.1, 0.95, 0.2];
        let labels = [1, 0, 0, 1];
        let mask = [false, false, true, true];
        assert_eq!(roc_auc(&scores, &labels, Some(&mask)).unwrap(), 1.0);
        let r = optimal_f1(&scores, &labels, Some(&mask)).unwrap();
        assert_eq!(r.tp + r.fp + r.tn + r.fn_, 2);
    }

    #[test]
    fn report_formats() {
        let r = evaluate(&[0.9, 0.1, 0.8], &[1, 0, 1], None).unwrap();
        assert!(r.to_text().contains("roc_auc    1.000000"));
        assert!(r.to_kv().contains("f1 = 1\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
            (2usize..40).prop_flat_map(|n| {
                (
                    proptest::collection::vec(0u8..8, n).prop_map(|v| v.into_iter().map(|x| x as f64 / 4.0).collect()),
                    proptest::collection::vec(0u8..2, n),
                )
            })
        }

        proptest! {
            #[test]
            fn auc_invariant_under_monotone_transform((s, l) in instance()) {
                prop_assume!(l.contains(&0) && l.contains(&1));
                let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
                prop_assert_eq!(roc_auc(&s, &l, None).unwrap(), roc_auc(&t, &l, None).unwrap());
            }

            #[test]
            fn complementing_labels_flips_auc((s, l) in instance()) {
                prop_assume!(l.contains(&0) && l.contains(&1));
                let flipped: Vec<u8> = l.iter().map(|v| 1 - v).collect();
                let a = roc_auc(&s, &l, None).unwrap();
                let b = roc_auc(&s, &flipped, None).unwrap();
                prop_assert!((a + b - 1.0).abs() < 1e-12);
            }
        }
    }
}
