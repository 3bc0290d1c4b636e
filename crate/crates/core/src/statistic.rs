//! Observed test statistics and the transforms between their scales.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{domain, FncError, Result};
use crate::normal::{normal_quantile, normal_sf};

/// Smallest p-value kept after a z → p transform.
pub const P_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Raw,
    Z,
    P,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    #[default]
    OneSided,
    TwoSided,
}

/// A vector of `m >= 2` finite statistics with scale and sidedness tags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticVector {
    values: Vec<f64>,
    scale: Scale,
    sidedness: Sidedness,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ids: Option<Vec<String>>,
}

impl StatisticVector {
    pub fn new(values: Vec<f64>, scale: Scale, sidedness: Sidedness) -> Result<Self> {
        if values.len() < 2 {
            return domain(format!("need at least 2 statistics, got {}", values.len()));
        }
        for (j, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return domain(format!("statistic {j} is not finite ({v})"));
            }
            if scale == Scale::P && !(v > 0.0 && v <= 1.0) {
                return domain(format!("p-value {j} = {v} is outside (0, 1]"));
            }
        }
        Ok(Self { values, scale, sidedness, ids: None })
    }

    pub fn z(values: Vec<f64>, sidedness: Sidedness) -> Result<Self> {
        Self::new(values, Scale::Z, sidedness)
    }

    pub fn p(values: Vec<f64>, sidedness: Sidedness) -> Result<Self> {
        Self::new(values, Scale::P, sidedness)
    }

    /// Attach identifiers; they must be unique and one per statistic.
    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.values.len() {
            return domain(format!("{} ids for {} statistics", ids.len(), self.values.len()));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return domain(format!("duplicate id {id:?}"));
            }
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn sidedness(&self) -> Sidedness {
        self.sidedness
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Identifier of statistic `j`: the supplied id, or its 0-based index.
    pub fn id(&self, j: usize) -> String {
        match &self.ids {
            Some(ids) => ids[j].clone(),
            None => j.to_string(),
        }
    }

    /// Map raw statistics to the z-scale through `Φ⁻¹(F0(x))`.
    pub fn inverse_normal_transform(&self, f0_cdf: impl Fn(f64) -> f64) -> Result<Self> {
        if self.scale != Scale::Raw {
            return domain(format!("inverse normal transform expects raw statistics, got {:?}", self.scale));
        }
        let mut z = Vec::with_capacity(self.values.len());
        for (index, &x) in self.values.iter().enumerate() {
            let u = f0_cdf(x);
            if !(u > 0.0 && u < 1.0) {
                return Err(FncError::Saturation { index, value: u });
            }
            z.push(normal_quantile(u)?);
        }
        Ok(Self { values: z, scale: Scale::Z, sidedness: self.sidedness, ids: self.ids.clone() })
    }

    /// z → p. One-sided uses Φ̄(z), two-sided 2Φ̄(|z|).
    pub fn to_pvalues(&self) -> Result<PValueTransform> {
        if self.scale != Scale::Z {
            return domain(format!("z to p transform expects z statistics, got {:?}", self.scale));
        }
        let mut clamped = 0;
        let values = self
            .values
            .iter()
            .map(|&z| {
                let p = z_to_p(z, self.sidedness);
                if p < P_FLOOR {
                    clamped += 1;
                    P_FLOOR
                } else {
                    p
                }
            })
            .collect();
        let pvalues = Self { values, scale: Scale::P, sidedness: self.sidedness, ids: self.ids.clone() };
        Ok(PValueTransform { pvalues, clamped })
    }

    /// Indices from most to least significant.
    ///
    /// p-scale sorts by ascending p, z-scale by descending z (or |z| when
    /// two-sided); ties go to the smaller original index.
    pub fn significance_order(&self) -> Result<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        match self.scale {
            Scale::P => order.sort_by(|&a, &b| cmp_then_index(self.values[a], self.values[b], a, b)),
            Scale::Z => {
                let key = |j: usize| match self.sidedness {
                    Sidedness::OneSided => self.values[j],
                    Sidedness::TwoSided => self.values[j].abs(),
                };
                order.sort_by(|&a, &b| cmp_then_index(key(b), key(a), a, b));
            }
            Scale::Raw => return domain("raw statistics must be transformed before ranking"),
        }
        Ok(order)
    }

    /// Significance order together with the p-values in that order.
    pub fn ranked(&self) -> Result<Ranked> {
        let order = self.significance_order()?;
        let p_sorted = match self.scale {
            Scale::P => order.iter().map(|&j| self.values[j]).collect(),
            _ => order.iter().map(|&j| z_to_p(self.values[j], self.sidedness).max(P_FLOOR)).collect(),
        };
        Ok(Ranked { order, p_sorted })
    }
}

/// Result of [`StatisticVector::to_pvalues`]; `clamped` counts values raised to [`P_FLOOR`].
#[derive(Clone, Debug)]
pub struct PValueTransform {
    pub pvalues: StatisticVector,
    pub clamped: usize,
}

/// Statistics sorted from most to least significant.
#[derive(Clone, Debug)]
pub struct Ranked {
    /// `order[r]` is the original index of the statistic at 0-based rank `r`.
    pub order: Vec<usize>,
    /// Ascending p-values, aligned with `order`.
    pub p_sorted: Vec<f64>,
}

impl Ranked {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

pub fn z_to_p(z: f64, sidedness: Sidedness) -> f64 {
    match sidedness {
        Sidedness::OneSided => normal_sf(z),
        Sidedness::TwoSided => (2.0 * normal_sf(z.abs())).min(1.0),
    }
}

fn cmp_then_index(x: f64, y: f64, a: usize, b: usize) -> Ordering {
    x.partial_cmp(&y).unwrap_or(Ordering::Equal).then(a.cmp(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::normal_cdf;
    use proptest::prelude::*;

    #[test]
    fn rejects_invalid_vectors() {
        assert!(StatisticVector::z(vec![1.0], Sidedness::OneSided).is_err());
        assert!(StatisticVector::z(vec![1.0, f64::NAN], Sidedness::OneSided).is_err());
        assert!(StatisticVector::p(vec![0.5, 0.0], Sidedness::OneSided).is_err());
        assert!(StatisticVector::p(vec![0.5, 1.2], Sidedness::OneSided).is_err());
        assert!(StatisticVector::p(vec![0.5, 1.0], Sidedness::OneSided).is_ok());
        let v = StatisticVector::z(vec![1.0, 2.0], Sidedness::OneSided).unwrap();
        assert!(v.clone().with_ids(vec!["a".into(), "a".into()]).is_err());
        assert!(v.clone().with_ids(vec!["a".into()]).is_err());
        assert!(v.with_ids(vec!["a".into(), "b".into()]).is_ok());
    }

    #[test]
    fn identity_transform_under_normal_null() {
        let x = StatisticVector::new(vec![-1.0, 0.0, 2.0], Scale::Raw, Sidedness::TwoSided).unwrap();
        let z = x.inverse_normal_transform(normal_cdf).unwrap();
        assert_eq!(z.scale(), Scale::Z);
        assert_eq!(z.sidedness(), Sidedness::TwoSided);
        for (a, b) in z.values().iter().zip([-1.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_null_transform() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        let x = StatisticVector::new(vec![0.5, 0.975], Scale::Raw, Sidedness::OneSided).unwrap();
        let z = x.inverse_normal_transform(uniform).unwrap();
        assert!(z.values()[0].abs() < 1e-15);
        assert!((z.values()[1] - 1.959_96).abs() < 1e-5);
    }

    #[test]
    fn saturation_names_the_index() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        let x = StatisticVector::new(vec![0.5, 1.3, 0.2], Scale::Raw, Sidedness::OneSided).unwrap();
        match x.inverse_normal_transform(uniform) {
            Err(FncError::Saturation { index, value }) => {
                assert_eq!(index, 1);
                assert_eq!(value, 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn z_to_p_cases() {
        let z = StatisticVector::z(vec![0.0, 1.0], Sidedness::OneSided).unwrap();
        assert_eq!(z.to_pvalues().unwrap().pvalues.values()[0], 0.5);

        let z = StatisticVector::z(vec![-1.96, 0.0], Sidedness::TwoSided).unwrap();
        let p = z.to_pvalues().unwrap().pvalues;
        assert!((p.values()[0] - 0.049_995_790_296_440_87).abs() < 1e-14);
        assert_eq!(p.values()[1], 1.0);

        let z = StatisticVector::z(vec![3.0, 1.0, 2.0], Sidedness::OneSided).unwrap();
        let p = z.to_pvalues().unwrap().pvalues;
        assert_eq!(p.significance_order().unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn extreme_z_is_clamped_and_counted() {
        let z = StatisticVector::z(vec![40.0, 41.0, 0.0], Sidedness::OneSided).unwrap();
        let t = z.to_pvalues().unwrap();
        assert_eq!(t.clamped, 2);
        assert_eq!(t.pvalues.values()[0], P_FLOOR);
        // Ranking from z keeps the two clamped values apart.
        assert_eq!(z.significance_order().unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn ties_break_by_index() {
        let z = StatisticVector::z(vec![1.0, 2.0, 1.0, 2.0], Sidedness::OneSided).unwrap();
        assert_eq!(z.significance_order().unwrap(), vec![1, 3, 0, 2]);
        let p = StatisticVector::p(vec![0.3, 0.1, 0.3, 0.1], Sidedness::OneSided).unwrap();
        assert_eq!(p.significance_order().unwrap(), vec![1, 3, 0, 2]);
    }

    proptest! {
        #[test]
        fn monotone_transform_preserves_ranking(xs in prop::collection::vec(-5.0f64..5.0, 2..40)) {
            let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
            let raw = StatisticVector::new(xs.clone(), Scale::Raw, Sidedness::OneSided).unwrap();
            let z = raw.inverse_normal_transform(logistic).unwrap();
            let as_z = StatisticVector::z(xs, Sidedness::OneSided).unwrap();
            prop_assert_eq!(z.significance_order().unwrap(), as_z.significance_order().unwrap());
        }

        #[test]
        fn pvalue_order_matches_z_order(zs in prop::collection::vec(-6.0f64..6.0, 2..60), two in any::<bool>()) {
            let side = if two { Sidedness::TwoSided } else { Sidedness::OneSided };
            let z = StatisticVector::z(zs, side).unwrap();
            let p = z.to_pvalues().unwrap().pvalues;
            prop_assert_eq!(p.significance_order().unwrap(), z.significance_order().unwrap());
        }
    }
}
