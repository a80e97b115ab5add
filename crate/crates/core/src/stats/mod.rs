//! Rating analytics: ground-truth labels from annotator means, the rating
//! histogram with its Gaussian fit, and attribute correlations under
//! Benjamini–Hochberg control.

mod ratings;

pub use ratings::{Attribute, RatingRecord, RatingTable, RATINGS_HEADER};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::signal::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingModel {
    pub ad_means: BTreeMap<String, f64>,
    /// Mean over every individual rating, so ads rated more often weigh more.
    pub grand_mean: f64,
    pub labels: BTreeMap<String, Label>,
}

impl LabelingModel {
    pub fn high_count(&self) -> usize {
        self.labels.values().filter(|l| l.is_high()).count()
    }
}

/// Per-ad means of one attribute over the records that carry it.
pub fn attribute_means(table: &RatingTable, attr: Attribute) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (i64, usize)> = BTreeMap::new();
    for r in &table.records {
        if let Some(v) = r.get(attr) {
            let e = acc.entry(r.ad_id.clone()).or_default();
            e.0 += v as i64;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(ad, (sum, n))| (ad, sum as f64 / n as f64)).collect()
}

/// Labels each ad high iff its mean engagement is at least the grand mean of
/// all individual ratings.
pub fn aggregate_labels(table: &RatingTable) -> Result<LabelingModel> {
    if table.is_empty() {
        return Err(Error::Empty);
    }
    let (sum, n) = table
        .records
        .iter()
        .fold((0i64, 0usize), |(s, n), r| (s + r.engagement as i64, n + 1));
    let grand_mean = sum as f64 / n as f64;
    let ad_means = attribute_means(table, Attribute::Engagement);
    let labels = ad_means
        .iter()
        .map(|(ad, m)| (ad.clone(), Label::from_bool(*m >= grand_mean)))
        .collect();
    Ok(LabelingModel { ad_means, grand_mean, labels })
}

/// As [`aggregate_labels`], but fails with the ads in `expected` that have
/// no rating at all.
pub fn aggregate_labels_for(table: &RatingTable, expected: &[String]) -> Result<LabelingModel> {
    let rated: std::collections::HashSet<&str> = table.records.iter().map(|r| r.ad_id.as_str()).collect();
    let missing: Vec<String> = expected.iter().filter(|a| !rated.contains(a.as_str())).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingRatings(missing));
    }
    aggregate_labels(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingHistogram {
    /// Ads whose mean engagement rounds to 0, 1, 2, 3, 4.
    pub counts: [usize; 5],
    pub mu: f64,
    /// Maximum-likelihood (population) standard deviation.
    pub sigma: f64,
}

pub fn rating_histogram(table: &RatingTable) -> Result<RatingHistogram> {
    if table.is_empty() {
        return Err(Error::Empty);
    }
    let means: Vec<f64> = attribute_means(table, Attribute::Engagement).into_values().collect();
    let mut counts = [0usize; 5];
    for m in &means {
        counts[(m.round() as usize).min(4)] += 1;
    }
    let n = means.len() as f64;
    let mu = means.iter().sum::<f64>() / n;
    let sigma = (means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RatingHistogram { counts, mu, sigma })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided, from the t-transform with n − 2 degrees of freedom.
    pub p: f64,
}

pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, available: n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(Correlation { r, p })
}

/// Benjamini–Hochberg step-up: with p sorted ascending, the largest `k`
/// where `p(k) ≤ k·q/m` marks the first `k` hypotheses significant.
pub fn bh_fdr(p_values: &[f64], q: f64) -> Result<Vec<bool>> {
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidP(p));
        }
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let cutoff = (1..=m)
        .rev()
        .find(|&k| p_values[order[k - 1]] <= k as f64 * q / m as f64)
        .unwrap_or(0);
    let mut out = vec![false; m];
    for &i in &order[..cutoff] {
        out[i] = true;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub attributes: [Attribute; 3],
    pub n_ads: usize,
    pub r: [[f64; 3]; 3],
    pub p: [[f64; 3]; 3],
    /// BH-corrected over the three off-diagonal pairs; the diagonal is false.
    pub significant: [[bool; 3]; 3],
    pub q: f64,
}

/// Pairwise Pearson correlations of per-ad attribute means over the ads
/// that have all three attributes.
pub fn correlation_matrix(table: &RatingTable, q: f64) -> Result<CorrelationMatrix> {
    let means: Vec<BTreeMap<String, f64>> = Attribute::ALL.iter().map(|&a| attribute_means(table, a)).collect();
    let common: Vec<&String> = means[0]
        .keys()
        .filter(|ad| means[1].contains_key(*ad) && means[2].contains_key(*ad))
        .collect();
    let columns: Vec<Vec<f64>> = means.iter().map(|m| common.iter().map(|ad| m[*ad]).collect()).collect();

    let pairs = [(0, 1), (0, 2), (1, 2)];
    let mut r = [[1.0; 3]; 3];
    let mut p = [[0.0; 3]; 3];
    let mut pvals = Vec::with_capacity(3);
    for &(a, b) in &pairs {
        let c = pearson_corr(&columns[a], &columns[b])?;
        r[a][b] = c.r;
        r[b][a] = c.r;
        p[a][b] = c.p;
        p[b][a] = c.p;
        pvals.push(c.p);
    }
    let sig = bh_fdr(&pvals, q)?;
    let mut significant = [[false; 3]; 3];
    for (&(a, b), s) in pairs.iter().zip(sig) {
        significant[a][b] = s;
        significant[b][a] = s;
    }
    Ok(CorrelationMatrix { attributes: Attribute::ALL, n_ads: common.len(), r, p, significant, q })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub fdr_q: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { fdr_q: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub grand_mean: f64,
    pub n_high: usize,
    pub n_low: usize,
    pub labels: BTreeMap<String, Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub config_fingerprint: String,
    pub n_ratings: usize,
    pub n_ads: usize,
    pub n_annotators: usize,
    pub histogram: RatingHistogram,
    pub labels: LabelSummary,
    /// Absent when valence or arousal ratings are missing.
    pub correlation: Option<CorrelationMatrix>,
}

pub fn stats_report(table: &RatingTable, config: &StatsConfig, fingerprint: &str) -> Result<StatsReport> {
    let labeling = aggregate_labels(table)?;
    let histogram = rating_histogram(table)?;
    let correlation = if table.has_attribute(Attribute::Valence) && table.has_attribute(Attribute::Arousal) {
        Some(correlation_matrix(table, config.fdr_q)?)
    } else {
        None
    };
    let n_high = labeling.high_count();
    Ok(StatsReport {
        config_fingerprint: fingerprint.to_string(),
        n_ratings: table.len(),
        n_ads: labeling.labels.len(),
        n_annotators: table.annotator_count(),
        histogram,
        labels: LabelSummary {
            grand_mean: labeling.grand_mean,
            n_high,
            n_low: labeling.labels.len() - n_high,
            labels: labeling.labels,
        },
        correlation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(annotator: &str, ad: &str, e: i8) -> RatingRecord {
        RatingRecord { annotator_id: annotator.into(), ad_id: ad.into(), engagement: e, valence: None, arousal: None }
    }

    #[test]
    fn symmetric_and_tie_cases() {
        let t = RatingTable::new(vec![rec("a", "x", 1), rec("a", "y", 3)]).unwrap();
        let m = aggregate_labels(&t).unwrap();
        assert_eq!(m.grand_mean, 2.0);
        assert_eq!(m.labels["x"], Label::Low);
        assert_eq!(m.labels["y"], Label::High);

        let single = RatingTable::new(vec![rec("a", "x", 1), rec("b", "x", 2)]).unwrap();
        assert_eq!(aggregate_labels(&single).unwrap().labels["x"], Label::High);
    }

    #[test]
    fn grand_mean_weights_by_rating() {
        let t = RatingTable::new(vec![rec("a", "A", 4), rec("a", "B", 0), rec("b", "B", 0)]).unwrap();
        let m = aggregate_labels(&t).unwrap();
        assert!((m.grand_mean - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.labels["A"], Label::High);
        assert_eq!(m.labels["B"], Label::Low);
    }

    #[test]
    fn missing_ads_are_listed() {
        let t = RatingTable::new(vec![rec("a", "A", 4)]).unwrap();
        let err = aggregate_labels_for(&t, &["A".into(), "B".into()]).unwrap_err();
        assert!(matches!(err, Error::MissingRatings(ref v) if v == &vec!["B".to_string()]));
    }

    #[test]
    fn histogram_examples() {
        let flat = RatingTable::new(vec![rec("a", "x", 2), rec("a", "y", 2)]).unwrap();
        let h = rating_histogram(&flat).unwrap();
        assert_eq!((h.mu, h.sigma, h.counts), (2.0, 0.0, [0, 0, 2, 0, 0]));
        let two = RatingTable::new(vec![rec("a", "x", 1), rec("a", "y", 3)]).unwrap();
        let h = rating_histogram(&two).unwrap();
        assert_eq!((h.mu, h.sigma), (2.0, 1.0));
    }

    #[test]
    fn pearson_edges() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_corr(&x, &x).unwrap().r - 1.0).abs() < 1e-15);
        assert!((pearson_corr(&x, &neg).unwrap().r + 1.0).abs() < 1e-15);
        assert!(matches!(pearson_corr(&x, &[1.0; 4]), Err(Error::ConstantInput)));
        assert!(matches!(pearson_corr(&x[..2], &x[..2]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn pearson_p_matches_reference() {
        // r = 0.5, n = 12: t = 0.5·sqrt(10/0.75) = 1.8257, two-sided p = 0.09785
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        let c = pearson_corr(&x, &x).unwrap();
        assert_eq!(c.p, 0.0);
        let t: f64 = 0.5 * (10.0f64 / 0.75).sqrt();
        let dist = StudentsT::new(0.0, 1.0, 10.0).unwrap();
        assert!((2.0 * dist.sf(t) - 0.09785).abs() < 5e-5);
    }

    #[test]
    fn bh_examples() {
        assert_eq!(bh_fdr(&[0.01], 0.05).unwrap(), vec![true]);
        assert_eq!(bh_fdr(&[0.01, 0.02, 0.04, 0.06], 0.05).unwrap(), vec![true, true, false, false]);
        assert_eq!(bh_fdr(&[], 0.05).unwrap(), Vec::<bool>::new());
        assert!(matches!(bh_fdr(&[1.5], 0.05), Err(Error::InvalidP(_))));
    }

    proptest! {
        #[test]
        fn bh_monotone_in_q(ps in prop::collection::vec(0.0f64..=1.0, 0..15), q1 in 0.0f64..0.5, dq in 0.0f64..0.5) {
            let a = bh_fdr(&ps, q1).unwrap();
            let b = bh_fdr(&ps, q1 + dq).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(!x || *y);
            }
        }

        #[test]
        fn pearson_affine_invariant(xs in prop::collection::vec(-10.0f64..10.0, 4..30), a in 0.1f64..10.0, b in -5.0f64..5.0, seed in 0u64..100) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.3 + ((i as u64 * 7 + seed) % 5) as f64).collect();
            let scaled: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            match (pearson_corr(&xs, &ys), pearson_corr(&scaled, &ys)) {
                (Ok(c1), Ok(c2)) => prop_assert!((c1.r - c2.r).abs() <= 1e-12),
                (Err(_), Err(_)) => {}
                _ => {}
            }
        }

        #[test]
        fn labels_ignore_record_order(ratings in prop::collection::vec((0usize..5, 0usize..8, 0i8..5), 1..40), seed in 0u64..100) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut seen = std::collections::HashSet::new();
            let records: Vec<RatingRecord> = ratings
                .iter()
                .filter(|(a, d, _)| seen.insert((*a, *d)))
                .map(|(a, d, e)| rec(&format!("a{a}"), &format!("ad{d}"), *e))
                .collect();
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let m1 = aggregate_labels(&RatingTable::new(records).unwrap()).unwrap();
            let m2 = aggregate_labels(&RatingTable::new(shuffled).unwrap()).unwrap();
            prop_assert_eq!(m1.labels, m2.labels);
        }
    }
}
