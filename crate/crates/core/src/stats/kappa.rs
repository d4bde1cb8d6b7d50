use crate::error::{Error, Result};

/// Square count matrix, rows = true class, columns = predicted class.
pub type ConfusionMatrix = Vec<Vec<u64>>;

/// Builds a `classes × classes` confusion matrix from paired labels.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize], classes: usize) -> ConfusionMatrix {
    assert_eq!(
        truth.len(),
        predicted.len(),
        "label vectors differ in length"
    );
    let mut m = vec![vec![0u64; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        m[t][p] += 1;
    }
    m
}

/// Cohen's kappa, (p_o − p_e) / (1 − p_e).
///
/// Evaluated as (N·trace − Σ rᵢcᵢ) / (N² − Σ rᵢcᵢ) in integer arithmetic so
/// that the only rounding is the final division.
pub fn cohen_kappa(confusion: &[Vec<u64>]) -> Result<f64> {
    let k = confusion.len();
    if k == 0 {
        return Err(Error::InvalidInput("empty confusion matrix".into()));
    }
    if confusion.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidInput("confusion matrix is not square".into()));
    }
    let total: u128 = confusion.iter().flatten().map(|&c| u128::from(c)).sum();
    if total == 0 {
        return Err(Error::InvalidInput(
            "confusion matrix has no observations".into(),
        ));
    }
    let trace: u128 = (0..k).map(|i| u128::from(confusion[i][i])).sum();
    let chance: u128 = (0..k)
        .map(|i| {
            let row: u128 = confusion[i].iter().map(|&c| u128::from(c)).sum();
            let col: u128 = confusion.iter().map(|r| u128::from(r[i])).sum();
            row * col
        })
        .sum();
    let denom = total * total - chance;
    if denom == 0 {
        return Err(Error::Degenerate(
            "chance agreement is 1 (constant labels); kappa undefined".into(),
        ));
    }
    let numer = (total * trace) as i128 - chance as i128;
    Ok(numer as f64 / denom as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_two_by_two() {
        // p_o = 0.8, p_e = 0.5
        assert_eq!(cohen_kappa(&[vec![45, 5], vec![15, 35]]).unwrap(), 0.6);
    }

    #[test]
    fn diagonal_and_chance() {
        assert_eq!(
            cohen_kappa(&[vec![3, 0, 0], vec![0, 7, 0], vec![0, 0, 1]]).unwrap(),
            1.0
        );
        assert_eq!(cohen_kappa(&[vec![25, 25], vec![25, 25]]).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(cohen_kappa(&[]).is_err());
        assert!(cohen_kappa(&[vec![0, 0], vec![0, 0]]).is_err());
        assert!(cohen_kappa(&[vec![1, 2]]).is_err());
        assert!(matches!(
            cohen_kappa(&[vec![10, 0], vec![0, 0]]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn negative_when_worse_than_chance() {
        assert!(cohen_kappa(&[vec![0, 5], vec![5, 0]]).unwrap() < 0.0);
    }

    #[test]
    fn builds_confusion() {
        let m = confusion_matrix(&[0, 1, 1, 2], &[0, 1, 2, 2], 3);
        assert_eq!(m, vec![vec![1, 0, 0], vec![0, 1, 1], vec![0, 0, 1]]);
    }

    proptest! {
        #[test]
        fn invariant_under_joint_permutation(
            counts in proptest::collection::vec(0u64..20, 16),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let m: Vec<Vec<u64>> = counts.chunks(4).map(|r| r.to_vec()).collect();
            let p: Vec<Vec<u64>> = (0..4).map(|i| (0..4).map(|j| m[perm[i]][perm[j]]).collect()).collect();
            match (cohen_kappa(&m), cohen_kappa(&p)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }

        #[test]
        fn matches_float_definition(counts in proptest::collection::vec(0u64..50, 9)) {
            let m: Vec<Vec<u64>> = counts.chunks(3).map(|r| r.to_vec()).collect();
            let n: f64 = counts.iter().sum::<u64>() as f64;
            prop_assume!(n > 0.0);
            let po = (0..3).map(|i| m[i][i] as f64).sum::<f64>() / n;
            let pe = (0..3).map(|i| {
                let r: f64 = m[i].iter().sum::<u64>() as f64;
                let c: f64 = (0..3).map(|j| m[j][i]).sum::<u64>() as f64;
                r * c
            }).sum::<f64>() / (n * n);
            prop_assume!((1.0 - pe).abs() > 1e-9);
            let k = cohen_kappa(&m).unwrap();
            prop_assert!((k - (po - pe) / (1.0 - pe)).abs() < 1e-12);
            prop_assert!(k <= 1.0);
        }
    }
}
