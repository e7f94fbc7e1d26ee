use itertools::Itertools;

use crate::model::ProbabilityVector;
use crate::{Error, Result};

/// Permutations are enumerated exhaustively, so the component count is capped.
pub const MAX_MATCHED_COMPONENTS: usize = 8;

/// Minimum over matchings of the average L1 distance between true and estimated components.
pub fn matched_l1_error(truth: &[ProbabilityVector], est: &[ProbabilityVector]) -> Result<f64> {
    let m = truth.len();
    if est.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{m} true components but {} estimates",
            est.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("no components to match".into()));
    }
    if m > MAX_MATCHED_COMPONENTS {
        return Err(Error::TooManyComponents {
            m,
            max: MAX_MATCHED_COMPONENTS,
        });
    }
    let d = truth[0].dim();
    if let Some(p) = truth.iter().chain(est).find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p.dim(),
        });
    }
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| {
            est.iter()
                .map(|e| {
                    t.as_slice()
                        .iter()
                        .zip(e.as_slice())
                        .map(|(a, b)| (a - b).abs())
                        .sum()
                })
                .collect()
        })
        .collect();
    let best = (0..m)
        .permutations(m)
        .map(|perm| {
            perm.iter()
                .enumerate()
                .map(|(i, &j)| cost[i][j])
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(x: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn examples() {
        let truth = vec![pv(&[1.0, 0.0]), pv(&[0.0, 1.0])];
        assert_eq!(matched_l1_error(&truth, &truth).unwrap(), 0.0);
        let swapped = vec![pv(&[0.0, 1.0]), pv(&[1.0, 0.0])];
        assert_eq!(matched_l1_error(&truth, &swapped).unwrap(), 0.0);
        let est = vec![pv(&[0.9, 0.1]), pv(&[0.2, 0.8])];
        assert!((matched_l1_error(&truth, &est).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_shapes() {
        let one = vec![pv(&[1.0, 0.0])];
        let two = vec![pv(&[1.0, 0.0]), pv(&[0.0, 1.0])];
        assert!(matched_l1_error(&one, &two).is_err());
        assert!(matched_l1_error(&[], &[]).is_err());
        assert!(matched_l1_error(&one, &[pv(&[1.0, 0.0, 0.0])]).is_err());
        let nine: Vec<_> = (0..9).map(|_| pv(&[0.5, 0.5])).collect();
        assert!(matches!(
            matched_l1_error(&nine, &nine),
            Err(Error::TooManyComponents { m: 9, max: 8 })
        ));
    }
}
