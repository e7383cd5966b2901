//! Classification and clustering scores. All land in `[0, 1]`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "label vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Unweighted mean of per-class F1 over every class seen in either vector.
/// A class with no true and no predicted positives scores 0.
pub fn macro_f1(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let mut counts: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            counts.entry(p).or_default().0 += 1;
        } else {
            counts.entry(p).or_default().1 += 1;
            counts.entry(t).or_default().2 += 1;
        }
    }
    if counts.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = counts
        .values()
        .map(|&(tp, fp, fn_)| {
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / counts.len() as f64)
}

/// Contingency counts between two partitions, keyed by cluster id pairs.
struct Contingency {
    n: usize,
    joint: BTreeMap<(usize, usize), usize>,
    a: BTreeMap<usize, usize>,
    b: BTreeMap<usize, usize>,
}

impl Contingency {
    fn new(a: &[usize], b: &[usize]) -> Self {
        let mut c = Contingency {
            n: a.len(),
            joint: BTreeMap::new(),
            a: BTreeMap::new(),
            b: BTreeMap::new(),
        };
        for (&x, &y) in a.iter().zip(b) {
            *c.joint.entry((x, y)).or_default() += 1;
            *c.a.entry(x).or_default() += 1;
            *c.b.entry(y).or_default() += 1;
        }
        c
    }
}

fn entropy(counts: &BTreeMap<usize, usize>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `I(a; b) / sqrt(H(a) H(b))`, natural logs.
/// Returns 0 when either partition has zero entropy.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    check_lengths(a, b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let c = Contingency::new(a, b);
    let n = c.n as f64;
    let (ha, hb) = (entropy(&c.a, n), entropy(&c.b, n));
    if ha <= 0.0 || hb <= 0.0 {
        return Ok(0.0);
    }
    let mi: f64 = c
        .joint
        .iter()
        .map(|(&(x, y), &nxy)| {
            let pxy = nxy as f64 / n;
            let px = c.a[&x] as f64 / n;
            let py = c.b[&y] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .sum();
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

fn pairs(c: usize) -> u64 {
    let c = c as u64;
    c * c.saturating_sub(1) / 2
}

/// Pairwise Jaccard index over unordered sample pairs: pairs grouped together
/// by both partitions, divided by pairs grouped together by either.
/// Defined as 1 when neither partition groups any pair.
pub fn jaccard(a: &[usize], b: &[usize]) -> Result<f64> {
    check_lengths(a, b)?;
    let c = Contingency::new(a, b);
    let both: u64 = c.joint.values().map(|&v| pairs(v)).sum();
    let in_a: u64 = c.a.values().map(|&v| pairs(v)).sum();
    let in_b: u64 = c.b.values().map(|&v| pairs(v)).sum();
    let union = in_a + in_b - both;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(both as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction() {
        let t = [0, 1, 2, 1, 0];
        assert_eq!(accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(macro_f1(&t, &t).unwrap(), 1.0);
        assert!((nmi(&t, &t).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(jaccard(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn hand_counted_classification() {
        let truth = [0, 0, 1, 1];
        assert_eq!(accuracy(&[0, 1, 0, 1], &truth).unwrap(), 0.5);
        assert_eq!(macro_f1(&[0, 1, 0, 1], &truth).unwrap(), 0.5);
        assert_eq!(accuracy(&[0, 0, 0, 0], &truth).unwrap(), 0.5);
        assert!((macro_f1(&[0, 0, 0, 0], &truth).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hand_counted_clustering() {
        let a = [0, 0, 1, 1];
        let b = [0, 1, 0, 1];
        assert_eq!(nmi(&a, &b).unwrap(), 0.0);
        assert_eq!(jaccard(&a, &b).unwrap(), 0.0);
        assert_eq!(nmi(&[3, 3, 3, 3], &b).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(accuracy(&[0], &[0, 1]), Err(Error::Shape(_))));
        assert!(matches!(macro_f1(&[0], &[0, 1]), Err(Error::Shape(_))));
        assert!(matches!(nmi(&[0], &[0, 1]), Err(Error::Shape(_))));
        assert!(matches!(jaccard(&[0], &[0, 1]), Err(Error::Shape(_))));
    }

    fn brute_jaccard(a: &[usize], b: &[usize]) -> f64 {
        let (mut both, mut either) = (0, 0);
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                both += usize::from(sa && sb);
                either += usize::from(sa || sb);
            }
        }
        if either == 0 {
            1.0
        } else {
            both as f64 / either as f64
        }
    }

    fn relabel(a: &[usize], perm: &[usize]) -> Vec<usize> {
        a.iter().map(|&x| perm[x]).collect()
    }

    proptest! {
        #[test]
        fn metric_properties(
            (a, b) in (1usize..40).prop_flat_map(|n| (
                proptest::collection::vec(0usize..4, n),
                proptest::collection::vec(0usize..4, n),
            ))
        ) {
            let perm = [2, 0, 3, 1];
            for v in [accuracy(&a, &b), macro_f1(&a, &b), nmi(&a, &b), jaccard(&a, &b)] {
                let v = v.unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert_eq!(accuracy(&a, &b).unwrap(), accuracy(&b, &a).unwrap());
            prop_assert!((nmi(&a, &b).unwrap() - nmi(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert_eq!(jaccard(&a, &b).unwrap(), jaccard(&b, &a).unwrap());
            prop_assert!((nmi(&relabel(&a, &perm), &b).unwrap() - nmi(&a, &b).unwrap()).abs() < 1e-12);
            prop_assert_eq!(jaccard(&relabel(&a, &perm), &b).unwrap(), jaccard(&a, &b).unwrap());
            prop_assert_eq!(jaccard(&a, &b).unwrap(), brute_jaccard(&a, &b));
        }
    }
}
