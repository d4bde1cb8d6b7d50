use std::sync::Arc;

use super::kernel::{Gram, Kernel, KernelSpec};
use super::smo::{self, DualSolution, KernelMatrix, SolverConfig};
use crate::error::{Error, Result};

/// Kernel values restricted to a subset of a larger Gram matrix.
pub(crate) struct SubGram<'a> {
    pub gram: &'a Gram,
    pub idx: &'a [usize],
}

impl KernelMatrix for SubGram<'_> {
    fn size(&self) -> usize {
        self.idx.len()
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram.get(self.idx[i], self.idx[j])
    }
}

/// One binary machine of the one-vs-rest ensemble. `alpha` and `y` are
/// aligned with the training points the machine was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMachine {
    pub positive_class: usize,
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
    pub objective: f64,
    pub kkt_gap: f64,
    pub iterations: usize,
}

impl BinaryMachine {
    /// Σ αᵢyᵢ, zero at a feasible point.
    pub fn label_balance(&self) -> f64 {
        self.alpha.iter().zip(&self.y).map(|(a, y)| a * y).sum()
    }

    fn from_solution(positive_class: usize, y: Vec<f64>, s: DualSolution) -> Self {
        BinaryMachine {
            positive_class,
            alpha: s.alpha,
            y,
            rho: s.rho,
            objective: s.objective,
            kkt_gap: s.kkt_gap,
            iterations: s.iterations,
        }
    }

    /// The same dual solution read as the machine for the opposite labelling.
    fn mirrored(&self, positive_class: usize) -> Self {
        BinaryMachine {
            positive_class,
            alpha: self.alpha.clone(),
            y: self.y.iter().map(|v| -v).collect(),
            rho: -self.rho,
            ..self.clone()
        }
    }

    fn decision(&self, kernel_row: impl Fn(usize) -> f64) -> f64 {
        let mut s = 0.0;
        for (t, (&a, &y)) in self.alpha.iter().zip(&self.y).enumerate() {
            if a != 0.0 {
                s += a * y * kernel_row(t);
            }
        }
        s - self.rho
    }
}

/// Trains one machine per class (one-vs-rest). With exactly two classes a
/// single dual is solved and the second machine is its mirror image.
pub(crate) fn fit_ovr(
    q: &dyn KernelMatrix,
    labels: &[usize],
    c: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<usize>, Vec<BinaryMachine>)> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidInput(
            "training labels contain a single class; no decision boundary".into(),
        ));
    }
    let fit_one = |class: usize| -> Result<BinaryMachine> {
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let s = smo::solve(q, &y, c, cfg)?;
        Ok(BinaryMachine::from_solution(class, y, s))
    };
    let machines = if classes.len() == 2 {
        let first = fit_one(classes[0])?;
        let second = first.mirrored(classes[1]);
        vec![first, second]
    } else {
        classes
            .iter()
            .map(|&k| fit_one(k))
            .collect::<Result<Vec<_>>>()?
    };
    Ok((classes, machines))
}

/// Argmax over decision values; ties go to the earliest (lowest) class.
pub(crate) fn argmax_class(classes: &[usize], values: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..values.len() {
        if values[k] > values[best] {
            best = k;
        }
    }
    classes[best]
}

pub(crate) fn predict_with(
    classes: &[usize],
    machines: &[BinaryMachine],
    kernel_row: impl Fn(usize) -> f64 + Copy,
) -> usize {
    let values: Vec<f64> = machines.iter().map(|m| m.decision(kernel_row)).collect();
    argmax_class(classes, &values)
}

/// Trained one-vs-rest SVM.
#[derive(Clone)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub c: f64,
    pub classes: Vec<usize>,
    /// Training points, indexed like every machine's `alpha`.
    pub training_points: Vec<Vec<f64>>,
    pub machines: Vec<BinaryMachine>,
    kernel_impl: Arc<dyn Kernel>,
}

impl std::fmt::Debug for SvmModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SvmModel")
            .field("kernel", &self.kernel)
            .field("c", &self.c)
            .field("classes", &self.classes)
            .field("n_train", &self.training_points.len())
            .finish()
    }
}

impl SvmModel {
    pub fn dimension(&self) -> usize {
        self.training_points[0].len()
    }

    pub fn n_support_vectors(&self) -> usize {
        (0..self.training_points.len())
            .filter(|&t| self.machines.iter().any(|m| m.alpha[t] > 0.0))
            .count()
    }

    pub fn decision_values(&self, x: &[f64]) -> Vec<f64> {
        let k = |t: usize| self.kernel_impl.eval(&self.training_points[t], x);
        self.machines.iter().map(|m| m.decision(k)).collect()
    }
}

fn check_features(features: &[Vec<f64>]) -> Result<usize> {
    let dim = features
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidInput("no training points".into()))?;
    if dim == 0 {
        return Err(Error::InvalidInput("feature vectors are empty".into()));
    }
    for (i, f) in features.iter().enumerate() {
        if f.len() != dim {
            return Err(Error::VectorDimensions {
                left: dim,
                right: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature vector {i} is not finite"
            )));
        }
    }
    Ok(dim)
}

pub fn train_svm(
    features: &[Vec<f64>],
    labels: &[usize],
    kernel: KernelSpec,
    c: f64,
) -> Result<SvmModel> {
    train_svm_with(features, labels, kernel, c, &SolverConfig::default())
}

pub fn train_svm_with(
    features: &[Vec<f64>],
    labels: &[usize],
    kernel: KernelSpec,
    c: f64,
    cfg: &SolverConfig,
) -> Result<SvmModel> {
    check_features(features)?;
    if labels.len() != features.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} feature vectors",
            labels.len(),
            features.len()
        )));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
    }
    let kernel_impl: Arc<dyn Kernel> = Arc::from(kernel.build()?);
    let gram = Gram::of(features, kernel_impl.as_ref());
    let idx: Vec<usize> = (0..features.len()).collect();
    let (classes, machines) = fit_ovr(
        &SubGram {
            gram: &gram,
            idx: &idx,
        },
        labels,
        c,
        cfg,
    )?;
    Ok(SvmModel {
        kernel,
        c,
        classes,
        training_points: features.to_vec(),
        machines,
        kernel_impl,
    })
}

pub fn predict(model: &SvmModel, features: &[Vec<f64>]) -> Result<Vec<usize>> {
    let dim = model.dimension();
    features
        .iter()
        .map(|x| {
            if x.len() != dim {
                return Err(Error::VectorDimensions {
                    left: dim,
                    right: x.len(),
                });
            }
            Ok(argmax_class(&model.classes, &model.decision_values(x)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::smo::{dual_objective, kkt_violation};

    fn toy_separable() -> (Vec<Vec<f64>>, Vec<usize>) {
        // class 1 above the line x2 = x1 + 0.5, class 0 below
        let pts = vec![
            vec![0.0, 1.5],
            vec![1.0, 2.6],
            vec![-1.0, 0.9],
            vec![2.0, 3.0],
            vec![0.0, -0.5],
            vec![1.0, 0.0],
            vec![-1.0, -1.2],
            vec![2.0, 1.1],
        ];
        let labels = pts.iter().map(|p| usize::from(p[1] > p[0] + 0.5)).collect();
        (pts, labels)
    }

    #[test]
    fn linear_separable_toy() {
        let (pts, labels) = toy_separable();
        let m = train_svm(&pts, &labels, KernelSpec::Linear, 10.0).unwrap();
        assert_eq!(predict(&m, &pts).unwrap(), labels);
        for mach in &m.machines {
            assert!(mach.alpha.iter().all(|a| (0.0..=10.0).contains(a)));
            assert!(mach.label_balance().abs() <= 1e-6);
            assert!(mach.kkt_gap <= 1e-3);
        }
    }

    #[test]
    fn xor_with_rbf() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ];
        let labels = vec![0, 0, 1, 1];
        let m = train_svm(&pts, &labels, KernelSpec::Rbf { gamma: 1.0 }, 10.0).unwrap();
        assert_eq!(predict(&m, &pts).unwrap(), labels);
    }

    #[test]
    fn single_class_rejected() {
        let err = train_svm(&[vec![0.0], vec![1.0]], &[2, 2], KernelSpec::Linear, 1.0).unwrap_err();
        assert!(err.to_string().contains("single class"));
    }

    #[test]
    fn input_checks() {
        assert!(train_svm(
            &[vec![0.0, f64::NAN], vec![1.0, 0.0]],
            &[0, 1],
            KernelSpec::Linear,
            1.0
        )
        .is_err());
        assert!(train_svm(
            &[vec![0.0], vec![1.0, 0.0]],
            &[0, 1],
            KernelSpec::Linear,
            1.0
        )
        .is_err());
        assert!(train_svm(&[vec![0.0], vec![1.0]], &[0, 1], KernelSpec::Linear, 0.0).is_err());
        let m = train_svm(&[vec![0.0], vec![1.0]], &[0, 1], KernelSpec::Linear, 1.0).unwrap();
        assert!(predict(&m, &[vec![1.0, 2.0]]).is_err());
        assert!(predict(&m, &[]).unwrap().is_empty());
    }

    #[test]
    fn symmetric_tie_goes_to_lower_class() {
        let pts = vec![vec![-1.0, 0.0], vec![1.0, 0.0]];
        let m = train_svm(&pts, &[3, 7], KernelSpec::Linear, 1.0).unwrap();
        let dv = m.decision_values(&[0.0, 0.0]);
        assert_eq!(dv[0], dv[1]);
        assert_eq!(
            predict(&m, &[vec![0.0, 0.0], vec![0.0, 5.0]]).unwrap(),
            vec![3, 3]
        );
        assert_eq!(predict(&m, &pts).unwrap(), vec![3, 7]);
    }

    #[test]
    fn multiclass_machines_are_feasible_and_optimal() {
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let a = f64::from(i) * 0.7;
                vec![a.cos() * (1.0 + f64::from(i % 3)), a.sin()]
            })
            .collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let m = train_svm(&pts, &labels, KernelSpec::Rbf { gamma: 0.5 }, 5.0).unwrap();
        assert_eq!(m.machines.len(), 3);
        let gram = Gram::of(
            &pts,
            KernelSpec::Rbf { gamma: 0.5 }.build().unwrap().as_ref(),
        );
        let idx: Vec<usize> = (0..30).collect();
        let q = SubGram {
            gram: &gram,
            idx: &idx,
        };
        for mach in &m.machines {
            assert!(kkt_violation(&q, &mach.y, &mach.alpha, 5.0) <= 1e-3 + 1e-9);
            let direct = dual_objective(&q, &mach.y, &mach.alpha);
            assert!((direct - mach.objective).abs() <= 1e-9 * direct.abs().max(1.0));
        }
        assert!(m.n_support_vectors() > 0);
    }
}
