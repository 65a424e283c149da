//! Classification metrics over predicted and true label vectors.

/// Fraction of exact matches.
pub fn accuracy(predictions: &[u32], labels: &[u32]) -> f64 {
    assert_eq!(predictions.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

fn per_class_f1(predictions: &[u32], labels: &[u32], classes: usize) -> Vec<f64> {
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p == l {
            tp[p as usize] += 1;
        } else {
            fp[p as usize] += 1;
            fn_[l as usize] += 1;
        }
    }
    (0..classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                // class absent from both predictions and labels
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .collect()
}

/// Unweighted mean of per-class F1 over all `classes` classes; classes
/// absent from both predictions and labels contribute 0.
pub fn macro_f1(predictions: &[u32], labels: &[u32], classes: usize) -> f64 {
    assert_eq!(predictions.len(), labels.len());
    assert!(classes > 0);
    per_class_f1(predictions, labels, classes).iter().sum::<f64>() / classes as f64
}

/// Support-weighted mean of per-class F1 (weights are true-label counts).
pub fn weighted_f1(predictions: &[u32], labels: &[u32], classes: usize) -> f64 {
    assert_eq!(predictions.len(), labels.len());
    assert!(classes > 0);
    if labels.is_empty() {
        return 0.0;
    }
    let f1 = per_class_f1(predictions, labels, classes);
    let mut support = vec![0usize; classes];
    for &l in labels {
        support[l as usize] += 1;
    }
    let total: usize = support.iter().sum();
    f1.iter().zip(&support).map(|(&f, &s)| f * s as f64).sum::<f64>() / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_one() {
        let labels = [0u32, 1, 2, 1, 0, 2];
        assert_eq!(macro_f1(&labels, &labels, 3), 1.0);
        assert_eq!(accuracy(&labels, &labels), 1.0);
        assert_eq!(weighted_f1(&labels, &labels, 3), 1.0);
    }

    #[test]
    fn binary_confusion_matrix_hand_check() {
        // positive class 1: TP = 3, FP = 1, FN = 2, TN = 4
        // class-1 F1 = 6/9; class-0 F1 = 8/11
        let labels = vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let predictions = vec![1, 1, 1, 0, 0, 1, 0, 0, 0, 0];
        let f1 = per_class_f1(&predictions, &labels, 2);
        assert!((f1[1] - 6.0 / 9.0).abs() < 1e-12);
        assert!((f1[0] - 8.0 / 11.0).abs() < 1e-12);
        let expected = (6.0 / 9.0 + 8.0 / 11.0) / 2.0;
        assert!((macro_f1(&predictions, &labels, 2) - expected).abs() < 1e-12);
    }

    #[test]
    fn constant_predictor_macro_f1_divides_by_k() {
        // every prediction is class 2 in a 6-class problem
        let labels: Vec<u32> = (0..24).map(|i| (i % 6) as u32).collect();
        let predictions = vec![2u32; 24];
        let f1 = per_class_f1(&predictions, &labels, 6);
        let macro_score = macro_f1(&predictions, &labels, 6);
        assert!((macro_score - f1[2] / 6.0).abs() < 1e-12);
    }

    #[test]
    fn absent_classes_contribute_zero() {
        let labels = [0u32, 0, 1, 1];
        let predictions = [0u32, 0, 1, 1];
        // classes 2 and 3 appear nowhere
        assert!((macro_f1(&predictions, &labels, 4) - 2.0 / 4.0).abs() < 1e-12);
    }
}
