//! Stratified k-fold partitioning by record or by subject.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Label};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SubjectWise,
    RecordWise,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::SubjectWise => "subject_wise",
            Scheme::RecordWise => "record_wise",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subject" | "subject_wise" | "subject-wise" => Ok(Scheme::SubjectWise),
            "record" | "record_wise" | "record-wise" => Ok(Scheme::RecordWise),
            other => Err(Error::InvalidInput(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub scheme: Scheme,
    pub seed: u64,
    /// Test indices of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Training indices of fold `f`: everything not in its test set.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        let n: usize = self.folds.iter().map(Vec::len).sum();
        let mut in_test = vec![false; n];
        for &i in &self.folds[f] {
            in_test[i] = true;
        }
        (0..n).filter(|&i| !in_test[i]).collect()
    }
}

/// Fold index for every observation. Units (records, or groups when given)
/// are shuffled within each class and dealt round-robin, the dealing
/// counter carrying over from one class to the next.
pub fn stratified_assignment(labels: &[Label], groups: Option<&[usize]>, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::FoldPlan(format!("k must be at least 2, got {k}")));
    }
    let n = labels.len();
    let unit_of: Vec<usize> = match groups {
        Some(g) => {
            if g.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: g.len() });
            }
            g.to_vec()
        }
        None => (0..n).collect(),
    };
    // first-seen order keeps the result independent of group numbering gaps
    let mut unit_label: Vec<(usize, Label)> = Vec::new();
    let mut seen: HashMap<usize, Label> = HashMap::new();
    for (i, &u) in unit_of.iter().enumerate() {
        match seen.get(&u) {
            Some(&l) if l != labels[i] => {
                return Err(Error::FoldPlan(format!("unit {u} mixes both classes")));
            }
            Some(_) => {}
            None => {
                seen.insert(u, labels[i]);
                unit_label.push((u, labels[i]));
            }
        }
    }
    let mut rng = seed::rng(seed);
    let mut fold_of_unit: HashMap<usize, usize> = HashMap::with_capacity(unit_label.len());
    let mut counter = 0usize;
    for class in [Label::Normal, Label::EarlyPd] {
        let mut units: Vec<usize> = unit_label.iter().filter(|(_, l)| *l == class).map(|(u, _)| *u).collect();
        if units.len() < k {
            return Err(Error::FoldPlan(format!(
                "class {} has {} units, fewer than k = {k}",
                class.name(),
                units.len()
            )));
        }
        units.shuffle(&mut rng);
        for u in units {
            fold_of_unit.insert(u, counter % k);
            counter += 1;
        }
    }
    Ok(unit_of.iter().map(|u| fold_of_unit[u]).collect())
}

pub fn assignment_to_folds(assignment: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    for (i, &f) in assignment.iter().enumerate() {
        folds[f].push(i);
    }
    folds
}

/// Dense subject numbering in order of first appearance.
pub fn subject_groups(cohort: &Cohort) -> Vec<usize> {
    cohort.subjects().1
}

pub fn make_fold_plan(cohort: &Cohort, scheme: Scheme, k: usize, seed: u64) -> Result<FoldPlan> {
    let labels = cohort.labels();
    let groups = match scheme {
        Scheme::SubjectWise => Some(subject_groups(cohort)),
        Scheme::RecordWise => None,
    };
    let assignment = stratified_assignment(&labels, groups.as_deref(), k, seed)?;
    Ok(FoldPlan {
        scheme,
        seed,
        folds: assignment_to_folds(&assignment, k),
    })
}
