use crate::error::{Error, Result};
use crate::signal::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<Confusion> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    let mut c = Confusion::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        match (t.is_high(), p.is_high()) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// F1 of the high-engagement class; 0 when there are no predicted or no true
/// positives.
pub fn f1_score(y_true: &[Label], y_pred: &[Label]) -> Result<f64> {
    if y_true.is_empty() && y_pred.is_empty() {
        return Err(Error::Empty);
    }
    let c = confusion(y_true, y_pred)?;
    if c.tp == 0 {
        return Ok(0.0);
    }
    let precision = c.tp as f64 / (c.tp + c.fp) as f64;
    let recall = c.tp as f64 / (c.tp + c.fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|b| Label::from_bool(*b == 1)).collect()
    }

    #[test]
    fn worked_examples() {
        assert_eq!(f1_score(&l(&[1, 0, 1]), &l(&[1, 0, 1])).unwrap(), 1.0);
        assert_eq!(f1_score(&l(&[1, 1, 0, 0]), &l(&[1, 0, 1, 0])).unwrap(), 0.5);
        assert_eq!(f1_score(&l(&[1, 0, 1]), &l(&[0, 0, 0])).unwrap(), 0.0);
        assert!(matches!(f1_score(&[], &[]), Err(Error::Empty)));
        assert!(matches!(f1_score(&l(&[1]), &l(&[1, 0])), Err(Error::LengthMismatch { .. })));
    }

    proptest! {
        #[test]
        fn permutation_invariant(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..30), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let t: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let base = f1_score(&l(&t), &l(&p)).unwrap();
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let t2: Vec<u8> = order.iter().map(|&i| t[i]).collect();
            let p2: Vec<u8> = order.iter().map(|&i| p[i]).collect();
            prop_assert_eq!(base, f1_score(&l(&t2), &l(&p2)).unwrap());
        }
    }
}
