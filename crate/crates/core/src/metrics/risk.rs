use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{Classifier, DriftEvaluator};
use crate::error::{Error, Result};
use crate::sde::LabeledDataset;

/// Empirical misclassification rate with its confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub error_rate: f64,
    pub n_test: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl RiskEstimate {
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<Self> {
        let n_test: usize = confusion.iter().flatten().sum();
        if n_test == 0 {
            return Err(Error::Empty("confusion matrix has no entries"));
        }
        let correct: usize = (0..confusion.len())
            .map(|k| confusion[k].get(k).copied().unwrap_or(0))
            .sum();
        Ok(RiskEstimate {
            error_rate: (n_test - correct) as f64 / n_test as f64,
            n_test,
            confusion,
        })
    }
}

/// Fraction of misclassified test paths.
pub fn misclassification_risk<C: Classifier + ?Sized>(classifier: &C, test: &LabeledDataset) -> Result<RiskEstimate> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let k = classifier.num_classes().max(test.num_classes());
    let items: Vec<_> = test.labeled().collect();
    let predictions = items
        .par_iter()
        .map(|(_, p)| classifier.predict(p))
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = vec![vec![0usize; k]; k];
    for ((truth, _), pred) in items.iter().zip(predictions) {
        confusion[*truth][pred] += 1;
    }
    RiskEstimate::from_confusion(confusion)
}

/// `R(g) - R(g*)`; not clamped at zero.
pub fn excess_risk(empirical: &RiskEstimate, bayes: &RiskEstimate) -> f64 {
    empirical.error_rate - bayes.error_rate
}

/// Which test paths enter an estimation-error average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    All,
    Class(usize),
}

/// Average over the selected paths of `(1/M) sum_m |b_hat(X_m) - b(X_m)|^2`.
pub fn estimation_error(
    estimator: &DriftEvaluator,
    truth: &DriftEvaluator,
    paths: &LabeledDataset,
    condition: Condition,
) -> Result<f64> {
    if estimator.dim() != paths.dim() || truth.dim() != paths.dim() {
        return Err(Error::DimensionMismatch {
            expected: paths.dim(),
            got: estimator.dim(),
        });
    }
    let selected: Vec<_> = match condition {
        Condition::All => paths.labeled().map(|(_, p)| p).collect(),
        Condition::Class(j) => {
            if j >= paths.num_classes() {
                return Err(Error::UnknownLabel {
                    label: j,
                    num_classes: paths.num_classes(),
                });
            }
            paths.class(j).iter().collect()
        }
    };
    if selected.is_empty() {
        return Err(Error::Empty("no paths under the selected condition"));
    }
    let per_path: Vec<f64> = selected
        .par_iter()
        .map(|p| {
            let xs = &p.states()[..p.steps() * p.dim()];
            let a = estimator.eval_rows(xs);
            let b = truth.eval_rows(xs);
            let sq: f64 = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum();
            sq / p.steps() as f64
        })
        .collect();
    Ok(per_path.iter().sum::<f64>() / per_path.len() as f64)
}

/// Writes `true, predicted, count` rows.
pub fn write_confusion(path: &Path, risk: &RiskEstimate) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["true", "predicted", "count"])?;
    for (t, row) in risk.confusion.iter().enumerate() {
        for (p, c) in row.iter().enumerate() {
            w.write_record([t.to_string(), p.to_string(), c.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::Trajectory;

    struct Constant(usize, usize);

    impl Classifier for Constant {
        fn num_classes(&self) -> usize {
            self.1
        }
        fn predict(&self, _: &Trajectory) -> Result<usize> {
            Ok(self.0)
        }
    }

    fn balanced(per_class: usize) -> LabeledDataset {
        let p = Trajectory::new(1, 1.0, vec![0.0, 1.0]).unwrap();
        LabeledDataset::from_classes(vec![vec![p; per_class]; 3], 0).unwrap()
    }

    #[test]
    fn constant_classifier_on_balanced_set() {
        let r = misclassification_risk(&Constant(1, 3), &balanced(5)).unwrap();
        assert!((r.error_rate - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.n_test, 15);
        assert_eq!(r.confusion[0][1], 5);
        assert_eq!(r.confusion[1][1], 5);
    }

    #[test]
    fn excess_values() {
        let a = RiskEstimate::from_confusion(vec![vec![50, 50], vec![0, 0]]).unwrap();
        assert_eq!(excess_risk(&a, &a), 0.0);
        let b = RiskEstimate::from_confusion(vec![vec![89, 11], vec![0, 0]]).unwrap();
        assert!((excess_risk(&a, &b) - 0.39).abs() < 1e-15);
    }

    #[test]
    fn empty_test_set() {
        let p = Trajectory::new(1, 1.0, vec![0.0, 1.0]).unwrap();
        let ds = LabeledDataset::from_classes(vec![vec![p], vec![]], 0).unwrap();
        let risk = misclassification_risk(&Constant(0, 2), &ds).unwrap();
        assert_eq!(risk.error_rate, 0.0);
    }
}
