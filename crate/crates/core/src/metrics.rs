//! Evaluation metrics: time efficiency, subtask-type recognition, grounding
//! over point masks, ROUGE-L, and the grounding-head query matching / mask
//! thresholding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{Kind, Minutes, PointMask};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("optimal time {t_opt} exceeds sequential time {t_worst}")]
    OptimalAboveWorst { t_opt: Minutes, t_worst: Minutes },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero vector at {0}")]
    ZeroVector(String),
    #[error("dimension mismatch: expected {expected}, got {got} at row {row}")]
    Dimension {
        expected: usize,
        got: usize,
        row: usize,
    },
}

/// Share of the achievable saving (sequential minus optimal) that the
/// predicted schedule realizes, in percent, clamped to `[0, 100]`.
pub fn time_efficiency(
    t_pred: Minutes,
    t_opt: Minutes,
    t_worst: Minutes,
) -> Result<f64, MetricError> {
    if t_opt > t_worst {
        return Err(MetricError::OptimalAboveWorst { t_opt, t_worst });
    }
    if t_worst == t_opt {
        return Ok(100.0);
    }
    let saved = f64::from(t_worst) - f64::from(t_pred);
    let possible = f64::from(t_worst - t_opt);
    Ok((100.0 * saved / possible).clamp(0.0, 100.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRecognitionReport {
    pub accuracy: f64,
    pub parallelizable: ClassScores,
    pub non_parallelizable: ClassScores,
    /// `confusion[truth][predicted]`, index 0 = P, 1 = NP.
    pub confusion: [[u64; 2]; 2],
}

impl TypeRecognitionReport {
    pub fn from_confusion(confusion: [[u64; 2]; 2]) -> Self {
        let total: u64 = confusion.iter().flatten().sum();
        let scores = |c: usize| {
            let tp = confusion[c][c];
            let predicted = confusion[0][c] + confusion[1][c];
            let actual = confusion[c][0] + confusion[c][1];
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, actual);
            ClassScores {
                precision,
                recall,
                f1: f1(precision, recall),
            }
        };
        TypeRecognitionReport {
            accuracy: ratio(confusion[0][0] + confusion[1][1], total),
            parallelizable: scores(0),
            non_parallelizable: scores(1),
            confusion,
        }
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

fn class_index(k: Kind) -> usize {
    match k {
        Kind::Parallelizable => 0,
        Kind::NonParallelizable => 1,
    }
}

/// Adds one task's labels to a running confusion matrix.
pub fn accumulate_confusion(
    confusion: &mut [[u64; 2]; 2],
    gt: &[Kind],
    pred: &[Kind],
) -> Result<(), MetricError> {
    if gt.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            left: gt.len(),
            right: pred.len(),
        });
    }
    for (&g, &p) in gt.iter().zip(pred) {
        confusion[class_index(g)][class_index(p)] += 1;
    }
    Ok(())
}

pub fn type_metrics(gt: &[Kind], pred: &[Kind]) -> Result<TypeRecognitionReport, MetricError> {
    let mut confusion = [[0; 2]; 2];
    accumulate_confusion(&mut confusion, gt, pred)?;
    Ok(TypeRecognitionReport::from_confusion(confusion))
}

/// Intersection over union of two point sets; 1 when both are empty.
pub fn mask_iou(pred: &PointMask, gt: &PointMask) -> f64 {
    if pred.is_empty() && gt.is_empty() {
        return 1.0;
    }
    let inter = pred.0.intersection(&gt.0).count();
    let union = pred.len() + gt.len() - inter;
    inter as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub miou: f64,
    pub acc_at_25: f64,
    pub acc_at_50: f64,
    pub per_step_iou: Vec<f64>,
}

impl GroundingReport {
    pub fn from_ious(per_step_iou: Vec<f64>) -> Self {
        let n = per_step_iou.len();
        let frac = |pred: &dyn Fn(f64) -> bool| {
            if n == 0 {
                0.0
            } else {
                per_step_iou.iter().filter(|&&x| pred(x)).count() as f64 / n as f64
            }
        };
        let miou = if n == 0 {
            0.0
        } else {
            per_step_iou.iter().sum::<f64>() / n as f64
        };
        GroundingReport {
            miou,
            acc_at_25: frac(&|x| x >= 0.25),
            acc_at_50: frac(&|x| x >= 0.5),
            per_step_iou,
        }
    }
}

pub fn grounding_metrics(
    pred: &[PointMask],
    gt: &[PointMask],
) -> Result<GroundingReport, MetricError> {
    if pred.len() != gt.len() {
        return Err(MetricError::LengthMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    Ok(GroundingReport::from_ious(
        pred.iter().zip(gt).map(|(p, g)| mask_iou(p, g)).collect(),
    ))
}

fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 over lowercased whitespace tokens.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let cand = candidate.to_lowercase();
    let refr = reference.to_lowercase();
    let c: Vec<&str> = cand.split_whitespace().collect();
    let r: Vec<&str> = refr.split_whitespace().collect();
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&c, &r) as f64;
    f1(lcs / c.len() as f64, lcs / r.len() as f64)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Index of the query with the highest cosine similarity to `g`; ties go to
/// the lowest index.
pub fn match_query(g: &[f64], queries: &[Vec<f64>]) -> Result<usize, MetricError> {
    let gn = norm(g);
    if gn == 0.0 {
        return Err(MetricError::ZeroVector("grounding vector".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, q) in queries.iter().enumerate() {
        if q.len() != g.len() {
            return Err(MetricError::Dimension {
                expected: g.len(),
                got: q.len(),
                row: i,
            });
        }
        let qn = norm(q);
        if qn == 0.0 {
            return Err(MetricError::ZeroVector(format!("query {i}")));
        }
        let cos = g.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / (gn * qn);
        if best.is_none_or(|(_, b)| cos > b) {
            best = Some((i, cos));
        }
    }
    best.map(|(i, _)| i)
        .ok_or(MetricError::LengthMismatch { left: 1, right: 0 })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Points whose sigmoid activation `σ(fᵢ · q*)` reaches `threshold`.
pub fn compute_mask(
    features: &[Vec<f64>],
    q_star: &[f64],
    threshold: f64,
) -> Result<PointMask, MetricError> {
    let mut out = PointMask::default();
    for (i, row) in features.iter().enumerate() {
        if row.len() != q_star.len() {
            return Err(MetricError::Dimension {
                expected: q_star.len(),
                got: row.len(),
                row: i,
            });
        }
        let logit: f64 = row.iter().zip(q_star).map(|(a, b)| a * b).sum();
        if sigmoid(logit) >= threshold {
            out.0.insert(i as u32);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::Kind::{NonParallelizable as NP, Parallelizable as P};
    use proptest::prelude::*;

    fn mask(v: &[u32]) -> PointMask {
        v.iter().copied().collect()
    }

    #[test]
    fn te_examples() {
        assert_eq!(time_efficiency(66, 39, 66).unwrap(), 0.0);
        assert_eq!(time_efficiency(39, 39, 66).unwrap(), 100.0);
        assert!((time_efficiency(52, 39, 66).unwrap() - 1400.0 / 27.0).abs() < 1e-12);
        assert_eq!(time_efficiency(30, 30, 30).unwrap(), 100.0);
        assert_eq!(time_efficiency(20, 39, 66).unwrap(), 100.0);
        assert_eq!(time_efficiency(70, 39, 66).unwrap(), 0.0);
        assert!(time_efficiency(10, 40, 30).is_err());
    }

    #[test]
    fn type_examples() {
        let r = type_metrics(&[P, NP, NP, P], &[P, NP, NP, P]).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.parallelizable.f1, 1.0);
        assert_eq!(r.non_parallelizable.f1, 1.0);

        let r = type_metrics(&[P, P, NP, NP], &[NP, NP, NP, NP]).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.parallelizable, ClassScores::default());
        assert_eq!(r.non_parallelizable.precision, 0.5);
        assert_eq!(r.non_parallelizable.recall, 1.0);
        assert!((r.non_parallelizable.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.confusion, [[0, 2], [0, 2]]);

        let r = type_metrics(&[P, NP], &[NP, P]).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.parallelizable.f1, 0.0);
        assert_eq!(r.non_parallelizable.f1, 0.0);

        assert!(type_metrics(&[P], &[]).is_err());
    }

    #[test]
    fn iou_examples() {
        assert_eq!(mask_iou(&mask(&[1, 2, 3]), &mask(&[1, 2, 3])), 1.0);
        assert_eq!(mask_iou(&mask(&[1, 2]), &mask(&[3, 4])), 0.0);
        assert_eq!(
            mask_iou(&mask(&[0, 1, 2, 3]), &mask(&[2, 3, 4, 5])),
            1.0 / 3.0
        );
        assert_eq!(mask_iou(&mask(&[]), &mask(&[])), 1.0);
        assert_eq!(mask_iou(&mask(&[]), &mask(&[7])), 0.0);
    }

    #[test]
    fn grounding_examples() {
        let a = mask(&[0, 1, 2, 3]);
        let b = mask(&[2, 3, 4, 5]);
        let r = grounding_metrics(&[a.clone(), b.clone()], &[a.clone(), b.clone()]).unwrap();
        assert_eq!((r.miou, r.acc_at_25, r.acc_at_50), (1.0, 1.0, 1.0));

        let r = grounding_metrics(&[a.clone(), b.clone()], &[b.clone(), b.clone()]).unwrap();
        assert_eq!(r.per_step_iou, vec![1.0 / 3.0, 1.0]);
        assert!((r.miou - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!((r.acc_at_25, r.acc_at_50), (1.0, 0.5));

        let r = grounding_metrics(&[mask(&[]), mask(&[])], &[a, b]).unwrap();
        assert_eq!((r.miou, r.acc_at_25, r.acc_at_50), (0.0, 0.0, 0.0));

        assert!(grounding_metrics(&[mask(&[1])], &[]).is_err());
    }

    #[test]
    fn rouge_examples() {
        assert_eq!(rouge_l("wipe the table", "Wipe the   table"), 1.0);
        assert_eq!(rouge_l("a b", "c d"), 0.0);
        assert!((rouge_l("a b c d", "a c d e") - 0.75).abs() < 1e-12);
        assert_eq!(rouge_l("", "a"), 0.0);
    }

    #[test]
    fn match_examples() {
        let q = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(match_query(&[1.0, 0.0], &q).unwrap(), 0);
        assert_eq!(match_query(&[2.0, 0.0], &q).unwrap(), 0);
        let q3 = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![3.0, 3.0]];
        assert_eq!(match_query(&[1.0, 1.0], &q3).unwrap(), 2);
        assert_eq!(match_query(&[1.0, 1.0], &q).unwrap(), 0);
        assert!(match_query(&[0.0, 0.0], &q).is_err());
        assert!(match_query(&[1.0, 0.0], &[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn mask_examples() {
        let f = vec![vec![10.0], vec![-10.0]];
        assert_eq!(compute_mask(&f, &[1.0], 0.5).unwrap(), mask(&[0]));
        assert!((sigmoid(10.0) - 0.9999546).abs() < 1e-6);
        assert!((sigmoid(-10.0) - 4.54e-5).abs() < 1e-7);
        assert_eq!(compute_mask(&f, &[0.0], 0.5).unwrap(), mask(&[0, 1]));
        assert!(compute_mask(&[], &[1.0], 0.5).unwrap().is_empty());
        assert!(compute_mask(&f, &[1.0, 2.0], 0.5).is_err());
    }

    fn arb_mask() -> impl Strategy<Value = PointMask> {
        prop::collection::btree_set(0u32..64, 0..20).prop_map(PointMask)
    }

    fn arb_kind() -> impl Strategy<Value = Kind> {
        prop_oneof![Just(P), Just(NP)]
    }

    proptest! {
        #[test]
        fn te_scales(pred in 0u32..100, opt in 0u32..100, extra in 1u32..100, k in 1u32..10) {
            let worst = opt + extra;
            let pred = pred.clamp(opt, worst);
            let a = time_efficiency(pred, opt, worst).unwrap();
            let b = time_efficiency(pred * k, opt * k, worst * k).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((0.0..=100.0).contains(&a));
        }

        #[test]
        fn confusion_consistency(pairs in prop::collection::vec((arb_kind(), arb_kind()), 0..30)) {
            let (gt, pred): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let r = type_metrics(&gt, &pred).unwrap();
            prop_assert_eq!(r.total() as usize, gt.len());
            let correct = gt.iter().zip(&pred).filter(|(a, b)| a == b).count();
            prop_assert_eq!(r.accuracy, if gt.is_empty() { 0.0 } else { correct as f64 / gt.len() as f64 });
            for c in [r.parallelizable, r.non_parallelizable] {
                prop_assert!((c.f1 - f1(c.precision, c.recall)).abs() < 1e-12);
            }
        }

        #[test]
        fn iou_symmetry(a in arb_mask(), b in arb_mask()) {
            prop_assert_eq!(mask_iou(&a, &b), mask_iou(&b, &a));
            prop_assert_eq!(mask_iou(&a, &a), 1.0);
            let v = mask_iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn grounding_bounds(pairs in prop::collection::vec((arb_mask(), arb_mask()), 0..8)) {
            let (p, g): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let r = grounding_metrics(&p, &g).unwrap();
            prop_assert!(r.acc_at_50 <= r.acc_at_25);
            for v in [r.miou, r.acc_at_25, r.acc_at_50] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn rouge_props(a in "[a-e]( [a-e]){0,8}", b in "[a-e]( [a-e]){0,8}") {
            prop_assert_eq!(rouge_l(&a, &a), 1.0);
            prop_assert!((rouge_l(&a, &b) - rouge_l(&b, &a)).abs() < 1e-12);
        }

        #[test]
        fn match_scale_invariant(
            g in prop::collection::vec(-5i32..5, 3),
            qs in prop::collection::vec(prop::collection::vec(-5i32..5, 3), 1..5),
            s in 1u32..8,
        ) {
            let g: Vec<f64> = g.into_iter().map(f64::from).collect();
            let qs: Vec<Vec<f64>> = qs.into_iter().map(|q| q.into_iter().map(f64::from).collect()).collect();
            prop_assume!(norm(&g) > 0.0 && qs.iter().all(|q| norm(q) > 0.0));
            let base = match_query(&g, &qs).unwrap();
            // Powers of two keep the float arithmetic exact.
            let k = f64::from(1u32 << s);
            let scaled: Vec<f64> = g.iter().map(|x| x * k).collect();
            prop_assert_eq!(match_query(&scaled, &qs).unwrap(), base);
        }

        #[test]
        fn mask_monotone(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 0..20),
            q in prop::collection::vec(-3.0f64..3.0, 2),
            lo in 0.01f64..0.99,
            hi in 0.01f64..0.99,
        ) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let a = compute_mask(&rows, &q, lo).unwrap();
            let b = compute_mask(&rows, &q, hi).unwrap();
            prop_assert!(b.0.is_subset(&a.0));
        }
    }
}
