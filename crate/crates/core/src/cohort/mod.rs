//! Observation data model: questionnaire severities, demographics, labels.

mod describe;
mod io;
mod synth;

pub use describe::{normal_behavior_gap, severity_distribution, SeverityHistogram};
pub use io::{load_cohort, read_cohort, write_cohort, write_cohort_to, ColumnMapping};
pub use synth::{
    fit_severity_pmf, moments_report, synthesize_cohort, synthesize_cohort_detailed, ClassMoments,
    FeatureMoments, GroupMoments, MomentsReportRow, SeverityFamily, SeverityPmf, SynthConfig,
    SynthOutput, AGE_MAX, AGE_MIN,
};

use std::collections::{HashMap, HashSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of questionnaire items (7 non-motor + 13 motor).
pub const N_PQ: usize = 20;
/// Questionnaire items plus gender and age.
pub const N_FEATURES: usize = 22;
pub const GENDER_INDEX: usize = 20;
pub const AGE_INDEX: usize = 21;

pub const PQ_ITEMS: [&str; N_PQ] = [
    "P1_SLPN", "P1_SLPD", "P1_PAIN", "P1_URIN", "P1_CNST", "P1_LTHD", "P1_FATG", "P2_SPCH",
    "P2_SALV", "P2_SWAL", "P2_EAT", "P2_DRES", "P2_HYGN", "P2_HWRT", "P2_HOBB", "P2_TURN",
    "P2_TRMR", "P2_RISE", "P2_WALK", "P2_FREZ",
];

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "P1_SLPN", "P1_SLPD", "P1_PAIN", "P1_URIN", "P1_CNST", "P1_LTHD", "P1_FATG", "P2_SPCH",
    "P2_SALV", "P2_SWAL", "P2_EAT", "P2_DRES", "P2_HYGN", "P2_HWRT", "P2_HOBB", "P2_TURN",
    "P2_TRMR", "P2_RISE", "P2_WALK", "P2_FREZ", "GENDER", "AGE",
];

/// Human-readable item titles, same order as [`PQ_ITEMS`].
pub const PQ_TITLES: [&str; N_PQ] = [
    "Sleep Problems",
    "Daytime Sleepiness",
    "Pain and other sensations",
    "Urinary problems",
    "Constipation problems",
    "Light Headedness on standing",
    "Fatigue",
    "Speech",
    "Saliva and Drooling",
    "Chewing and Swallowing",
    "Eating tasks",
    "Dressing",
    "Hygiene",
    "Handwriting",
    "Doing Hobbies and other activities",
    "Turning in bed",
    "Tremor",
    "Getting out of bed/car/deep chair",
    "Walking and balance",
    "Freezing",
];

pub const SEVERITY_CAPTIONS: [&str; 5] = ["normal", "slight", "mild", "moderate", "severe"];

pub const SBR_COLUMNS: [&str; 4] = ["SBR_RC", "SBR_LC", "SBR_RP", "SBR_LP"];

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Normal,
    EarlyPd,
}

impl Label {
    pub fn is_pd(self) -> bool {
        self == Label::EarlyPd
    }

    pub fn code(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::EarlyPd => 1,
        }
    }

    pub fn from_pd(is_pd: bool) -> Self {
        if is_pd {
            Label::EarlyPd
        } else {
            Label::Normal
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Normal => "Normal",
            Label::EarlyPd => "EarlyPD",
        }
    }

    pub fn other(self) -> Self {
        match self {
            Label::Normal => Label::EarlyPd,
            Label::EarlyPd => Label::Normal,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.code()
    }
}

impl TryFrom<u8> for Label {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Normal),
            1 => Ok(Label::EarlyPd),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

/// The 22 model inputs of one visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pq: [u8; N_PQ],
    age: f64,
    gender: u8,
}

impl FeatureVector {
    pub fn new(pq: [u8; N_PQ], age: f64, gender: u8) -> Result<Self> {
        if let Some(i) = pq.iter().position(|&s| s > 4) {
            return Err(Error::InvalidInput(format!(
                "{} severity {} outside 0..=4",
                PQ_ITEMS[i], pq[i]
            )));
        }
        if !(0.0..=130.0).contains(&age) {
            return Err(Error::InvalidInput(format!("AGE {age} outside [0, 130]")));
        }
        if gender > 1 {
            return Err(Error::InvalidInput(format!("GENDER {gender} must be 0 or 1")));
        }
        Ok(FeatureVector { pq, age, gender })
    }

    pub fn pq(&self) -> &[u8; N_PQ] {
        &self.pq
    }

    pub fn age(&self) -> f64 {
        self.age
    }

    pub fn gender(&self) -> u8 {
        self.gender
    }

    pub fn total_score(&self) -> u32 {
        self.pq.iter().map(|&s| s as u32).sum()
    }

    /// Canonical 22-value encoding (items, gender, age).
    pub fn to_values<F: Scalar>(&self) -> Vec<F> {
        let mut v: Vec<F> = self.pq.iter().map(|&s| F::lit(s as f64)).collect();
        v.push(F::lit(self.gender as f64));
        v.push(F::lit(self.age));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub subject_id: String,
    pub visit: u32,
    pub features: FeatureVector,
    pub label: Label,
    pub hy_stage: Option<u8>,
    pub sbr: Option<[f64; 4]>,
}

/// Validated, immutable observation table.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    observations: Vec<Observation>,
}

impl Cohort {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidInput("cohort is empty".into()));
        }
        let mut keys = HashSet::with_capacity(observations.len());
        let mut labels: HashMap<&str, Label> = HashMap::new();
        for o in &observations {
            if !keys.insert((o.subject_id.as_str(), o.visit)) {
                return Err(Error::DuplicateObservation {
                    subject: o.subject_id.clone(),
                    visit: o.visit,
                });
            }
            match labels.get(o.subject_id.as_str()) {
                Some(&l) if l != o.label => {
                    return Err(Error::ConflictingLabels(o.subject_id.clone()))
                }
                Some(_) => {}
                None => {
                    labels.insert(&o.subject_id, o.label);
                }
            }
        }
        Ok(Cohort { observations })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn feature_names(&self) -> &'static [&'static str; N_FEATURES] {
        &FEATURE_NAMES
    }

    pub fn labels(&self) -> Vec<Label> {
        self.observations.iter().map(|o| o.label).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.observations.iter().filter(|o| o.label == label).count()
    }

    pub fn has_both_classes(&self) -> bool {
        self.count(Label::Normal) > 0 && self.count(Label::EarlyPd) > 0
    }

    /// `n x 22` matrix in canonical feature order.
    pub fn design_matrix<F: Scalar>(&self) -> Array2<F> {
        let mut x = Array2::<F>::zeros((self.len(), N_FEATURES));
        for (i, o) in self.observations.iter().enumerate() {
            for (j, v) in o.features.to_values::<F>().into_iter().enumerate() {
                x[[i, j]] = v;
            }
        }
        x
    }

    /// Distinct subjects in first-appearance order and, per observation, the
    /// index of its subject.
    pub fn subjects(&self) -> (Vec<&str>, Vec<usize>) {
        let mut ids: Vec<&str> = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut of_obs = Vec::with_capacity(self.len());
        for o in &self.observations {
            let next = ids.len();
            let k = *index.entry(o.subject_id.as_str()).or_insert_with(|| {
                ids.push(o.subject_id.as_str());
                next
            });
            of_obs.push(k);
        }
        (ids, of_obs)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Cohort> {
        Cohort::new(indices.iter().map(|&i| self.observations[i].clone()).collect())
    }

    pub fn position(&self, subject_id: &str, visit: u32) -> Option<usize> {
        self.observations
            .iter()
            .position(|o| o.subject_id == subject_id && o.visit == visit)
    }

    pub fn has_hy(&self) -> bool {
        self.observations.iter().any(|o| o.hy_stage.is_some())
    }

    pub fn has_sbr(&self) -> bool {
        self.observations.iter().any(|o| o.sbr.is_some())
    }
}

#[cfg(test)]
pub(crate) fn test_observation(subject: &str, visit: u32, label: Label, pq: [u8; N_PQ]) -> Observation {
    Observation {
        subject_id: subject.to_string(),
        visit,
        features: FeatureVector::new(pq, 60.0, 0).unwrap(),
        label,
        hy_stage: None,
        sbr: None,
    }
}
