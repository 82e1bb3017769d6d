use serde::Serialize;

use super::{Cohort, Label, Observation, N_PQ, PQ_ITEMS};
use crate::error::{Error, Result};

/// Per-item counts over severities 0..=4 for one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct SeverityHistogram {
    pub label: Label,
    pub observations: usize,
    pub counts: Vec<[u64; 5]>,
}

impl SeverityHistogram {
    pub(crate) fn from_observations<'a>(label: Label, obs: impl Iterator<Item = &'a Observation>) -> Self {
        let mut counts = vec![[0u64; 5]; N_PQ];
        let mut n = 0;
        for o in obs.filter(|o| o.label == label) {
            n += 1;
            for (j, &s) in o.features.pq().iter().enumerate() {
                counts[j][s as usize] += 1;
            }
        }
        SeverityHistogram {
            label,
            observations: n,
            counts,
        }
    }

    pub fn item(&self, name: &str) -> Option<&[u64; 5]> {
        PQ_ITEMS.iter().position(|&n| n == name).map(|j| &self.counts[j])
    }

    /// Percentage of observations at severity 0 for item `j`.
    pub fn percent_normal(&self, j: usize) -> f64 {
        if self.observations == 0 {
            return 0.0;
        }
        100.0 * self.counts[j][0] as f64 / self.observations as f64
    }
}

pub fn severity_distribution(cohort: &Cohort, label: Label) -> Result<SeverityHistogram> {
    let h = SeverityHistogram::from_observations(label, cohort.observations().iter());
    if h.observations == 0 {
        return Err(Error::ClassAbsent(label.name()));
    }
    Ok(h)
}

/// For each item: % of Normal observations at severity 0 minus % of PD
/// observations at severity 0.
pub fn normal_behavior_gap(cohort: &Cohort) -> Result<Vec<(&'static str, f64)>> {
    let normal = severity_distribution(cohort, Label::Normal)?;
    let pd = severity_distribution(cohort, Label::EarlyPd)?;
    Ok(PQ_ITEMS
        .iter()
        .enumerate()
        .map(|(j, &name)| (name, normal.percent_normal(j) - pd.percent_normal(j)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::test_observation;

    fn cohort(rows: &[(&str, Label, [u8; N_PQ])]) -> Cohort {
        Cohort::new(
            rows.iter()
                .map(|(s, l, pq)| test_observation(s, 0, *l, *pq))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn all_pd_tremor_one() {
        let mut pq = [0u8; N_PQ];
        pq[16] = 1;
        let c = cohort(&[("a", Label::EarlyPd, pq), ("b", Label::EarlyPd, pq), ("c", Label::Normal, [0; N_PQ])]);
        let h = severity_distribution(&c, Label::EarlyPd).unwrap();
        assert_eq!(h.item("P2_TRMR").unwrap(), &[0, 2, 0, 0, 0]);
        for bins in &h.counts {
            assert_eq!(bins.iter().sum::<u64>(), 2);
        }
    }

    #[test]
    fn absent_class_is_error() {
        let c = cohort(&[("a", Label::Normal, [0; N_PQ])]);
        assert!(severity_distribution(&c, Label::EarlyPd).is_err());
        assert!(normal_behavior_gap(&c).is_err());
    }

    #[test]
    fn gap_extremes() {
        let mut pd = [0u8; N_PQ];
        pd[0] = 2;
        let c = cohort(&[("a", Label::Normal, [0; N_PQ]), ("b", Label::EarlyPd, pd)]);
        let gap = normal_behavior_gap(&c).unwrap();
        assert_eq!(gap[0], ("P1_SLPN", 100.0));
        assert!(gap[1..].iter().all(|&(_, g)| g == 0.0));
    }
}
