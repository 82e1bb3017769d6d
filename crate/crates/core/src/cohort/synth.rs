//! Synthetic cohort generation calibrated to published per-class moments.
//!
//! Each questionnaire item is drawn, independently within a class, from a
//! distribution on `{0,..,4}` whose mean and standard deviation match the
//! target. The family depends on the dispersion relative to a binomial with
//! the same mean:
//!
//! * equal: binomial(4, mean/4)
//! * under-dispersed: maximum-entropy pmf `p_k ∝ exp(a k + b k²)`
//! * over-dispersed: beta-binomial on 4 trials (method of moments)
//! * outside the feasible region of any distribution on `{0,..,4}`: a
//!   two-point law on `{0, m}` whose mean is moved by at most the
//!   moments' rounding tolerance.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{Cohort, FeatureVector, Label, Observation, AGE_INDEX, FEATURE_NAMES, GENDER_INDEX, N_FEATURES, N_PQ};
use crate::error::{Error, Result};
use crate::seed::{self, stream};

pub const AGE_MIN: f64 = 30.0;
pub const AGE_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMoments {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMoments {
    pub name: String,
    pub normal: ClassMoments,
    pub pd: ClassMoments,
}

impl FeatureMoments {
    pub fn class(&self, label: Label) -> ClassMoments {
        match label {
            Label::Normal => self.normal,
            Label::EarlyPd => self.pd,
        }
    }
}

/// Per-feature, per-class targets for all 22 features in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMoments {
    pub features: Vec<FeatureMoments>,
    /// How far a printed mean may be moved to reach a feasible distribution
    /// (half a unit in the last printed digit; 0 for exact targets).
    pub mean_tolerance: f64,
}

impl GroupMoments {
    pub fn new(features: Vec<FeatureMoments>, mean_tolerance: f64) -> Result<Self> {
        if features.len() != N_FEATURES {
            return Err(Error::InvalidInput(format!(
                "moments must cover {N_FEATURES} features, got {}",
                features.len()
            )));
        }
        for (f, want) in features.iter().zip(FEATURE_NAMES) {
            if f.name != want {
                return Err(Error::InvalidInput(format!(
                    "moments out of canonical order: expected {want}, got {}",
                    f.name
                )));
            }
            for m in [f.normal, f.pd] {
                if !(m.mean.is_finite() && m.sd.is_finite() && m.sd >= 0.0) {
                    return Err(Error::InfeasibleMoments {
                        feature: f.name.clone(),
                        message: format!("mean {} sd {} not finite/non-negative", m.mean, m.sd),
                    });
                }
            }
        }
        Ok(GroupMoments { features, mean_tolerance })
    }

    /// Healthy-control vs early-PD statistics of the 5704-visit PPMI cohort,
    /// as printed (two decimals, hence a 0.005 mean tolerance).
    pub fn table2() -> Self {
        const T: [(f64, f64, f64, f64); N_FEATURES] = [
            (0.77, 0.97, 1.03, 1.09),
            (0.57, 0.75, 0.95, 0.86),
            (0.49, 0.75, 0.80, 0.88),
            (0.33, 0.63, 0.75, 0.86),
            (0.13, 0.40, 0.55, 0.73),
            (0.11, 0.34, 0.39, 0.67),
            (0.35, 0.60, 0.77, 0.85),
            (0.03, 0.21, 0.61, 0.82),
            (0.09, 0.39, 0.73, 1.03),
            (0.02, 0.16, 0.22, 0.49),
            (0.01, 0.08, 0.48, 0.63),
            (0.02, 0.17, 0.59, 0.66),
            (0.00, 0.05, 0.35, 0.50),
            (0.08, 0.34, 1.05, 0.96),
            (0.03, 0.23, 0.62, 0.76),
            (0.04, 0.19, 0.41, 0.55),
            (0.06, 0.23, 1.17, 0.74),
            (0.08, 0.27, 0.59, 0.68),
            (0.07, 0.33, 0.52, 0.61),
            (0.00, 0.05, 0.09, 0.34),
            (0.62, 0.49, 0.66, 0.47),
            (66.42, 11.09, 66.61, 9.69),
        ];
        let features = T
            .iter()
            .zip(FEATURE_NAMES)
            .map(|(&(hm, hs, pm, ps), name)| FeatureMoments {
                name: name.to_string(),
                normal: ClassMoments { mean: hm, sd: hs },
                pd: ClassMoments { mean: pm, sd: ps },
            })
            .collect();
        GroupMoments {
            features,
            mean_tolerance: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityFamily {
    PointMass,
    Binomial,
    MaxEntropy,
    BetaBinomial,
    TwoPoint { upper: u8 },
}

impl SeverityFamily {
    pub fn name(&self) -> String {
        match self {
            SeverityFamily::PointMass => "point_mass".into(),
            SeverityFamily::Binomial => "binomial".into(),
            SeverityFamily::MaxEntropy => "max_entropy".into(),
            SeverityFamily::BetaBinomial => "beta_binomial".into(),
            SeverityFamily::TwoPoint { upper } => format!("two_point_0_{upper}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeverityPmf {
    pub family: SeverityFamily,
    pub pmf: [f64; 5],
}

impl SeverityPmf {
    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn sd(&self) -> f64 {
        let m = self.mean();
        let v: f64 = self.pmf.iter().enumerate().map(|(k, p)| (k as f64 - m).powi(2) * p).sum();
        v.max(0.0).sqrt()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in self.pmf.iter().enumerate() {
            acc += p;
            if u < acc {
                return k as u8;
            }
        }
        // rounding residue: last category with positive mass
        self.pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u8
    }
}

const FEAS_EPS: f64 = 1e-12;

fn binomial_pmf(p: f64) -> [f64; 5] {
    let q = 1.0 - p;
    [q.powi(4), 4.0 * p * q.powi(3), 6.0 * p * p * q * q, 4.0 * p.powi(3) * q, p.powi(4)]
}

fn beta_binomial_pmf(a: f64, b: f64) -> [f64; 5] {
    const BINOM: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
    let ln_beta = |x: f64, y: f64| ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y);
    let base = ln_beta(a, b);
    let mut pmf = [0.0; 5];
    for (k, slot) in pmf.iter_mut().enumerate() {
        let kf = k as f64;
        *slot = BINOM[k] * (ln_beta(kf + a, 4.0 - kf + b) - base).exp();
    }
    let s: f64 = pmf.iter().sum();
    pmf.map(|p| p / s)
}

/// Solves for `p_k ∝ exp(a k + b k²)` with the given first two moments by
/// damped Newton on the convex dual.
fn max_entropy_pmf(mean: f64, var: f64) -> Option<[f64; 5]> {
    let second = var + mean * mean;
    let pmf_of = |a: f64, b: f64| -> [f64; 5] {
        let logits: [f64; 5] = std::array::from_fn(|k| a * k as f64 + b * (k * k) as f64);
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = logits.map(|l| (l - mx).exp());
        let s: f64 = w.iter().sum();
        w.map(|x| x / s)
    };
    let dual = |a: f64, b: f64| -> f64 {
        let logits: [f64; 5] = std::array::from_fn(|k| a * k as f64 + b * (k * k) as f64);
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + logits.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
        lse - a * mean - b * second
    };
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let p = pmf_of(a, b);
        let m1: f64 = (0..5).map(|k| k as f64 * p[k]).sum();
        let m2: f64 = (0..5).map(|k| (k * k) as f64 * p[k]).sum();
        let m3: f64 = (0..5).map(|k| (k * k * k) as f64 * p[k]).sum();
        let m4: f64 = (0..5).map(|k| (k * k * k * k) as f64 * p[k]).sum();
        let (g1, g2) = (m1 - mean, m2 - second);
        if g1.abs() < 1e-13 && g2.abs() < 1e-13 {
            return Some(p);
        }
        let (h11, h12, h22) = (m2 - m1 * m1, m3 - m1 * m2, m4 - m2 * m2);
        let det = h11 * h22 - h12 * h12;
        if !(det > 0.0) {
            return None;
        }
        let da = -(h22 * g1 - h12 * g2) / det;
        let db = -(h11 * g2 - h12 * g1) / det;
        let f0 = dual(a, b);
        let mut t = 1.0;
        loop {
            let (na, nb) = (a + t * da, b + t * db);
            if dual(na, nb) <= f0 + 1e-4 * t * (g1 * da + g2 * db) || t < 1e-12 {
                a = na;
                b = nb;
                break;
            }
            t *= 0.5;
        }
    }
    None
}

fn two_point(mean: f64, var: f64, tol: f64) -> Option<SeverityPmf> {
    (1u8..=4).find_map(|m| {
        let mf = m as f64;
        let disc = mf * mf - 4.0 * var;
        if disc < 0.0 {
            return None;
        }
        let mu = (mf - disc.sqrt()) / 2.0;
        if (mu - mean).abs() > tol + FEAS_EPS || mu < 0.0 {
            return None;
        }
        let mut pmf = [0.0; 5];
        pmf[m as usize] = mu / mf;
        pmf[0] = 1.0 - mu / mf;
        Some(SeverityPmf {
            family: SeverityFamily::TwoPoint { upper: m },
            pmf,
        })
    })
}

/// Moment-matched distribution on `{0,..,4}`; `Err` carries the reason the
/// target is infeasible.
pub fn fit_severity_pmf(mean: f64, sd: f64, mean_tolerance: f64) -> std::result::Result<SeverityPmf, String> {
    if !(mean.is_finite() && sd.is_finite()) || sd < 0.0 {
        return Err(format!("mean {mean} / sd {sd} not finite or sd negative"));
    }
    if mean < -mean_tolerance || mean > 4.0 + mean_tolerance {
        return Err(format!("mean {mean} outside [0, 4]"));
    }
    let var = sd * sd;
    if var == 0.0 {
        let r = mean.round();
        if (mean - r).abs() <= mean_tolerance + FEAS_EPS && (0.0..=4.0).contains(&r) {
            let mut pmf = [0.0; 5];
            pmf[r as usize] = 1.0;
            return Ok(SeverityPmf {
                family: SeverityFamily::PointMass,
                pmf,
            });
        }
        return Err(format!("sd 0 requires an integer mean, got {mean}"));
    }
    let mu = mean.clamp(0.0, 4.0);
    let frac = mu - mu.floor();
    let lower = frac * (1.0 - frac);
    let upper = mu * (4.0 - mu);
    let fallback = || {
        two_point(mean, var, mean_tolerance).ok_or_else(|| {
            format!(
                "sd {sd} infeasible for mean {mean} on {{0..4}} (variance must lie in [{lower:.4}, {upper:.4}])"
            )
        })
    };
    if var < lower - FEAS_EPS || var > upper + FEAS_EPS {
        return fallback();
    }
    let p = mu / 4.0;
    let var_binom = 4.0 * p * (1.0 - p);
    if (var - var_binom).abs() <= 1e-12 {
        return Ok(SeverityPmf {
            family: SeverityFamily::Binomial,
            pmf: binomial_pmf(p),
        });
    }
    if var < var_binom {
        return match max_entropy_pmf(mu, var) {
            Some(pmf) => Ok(SeverityPmf {
                family: SeverityFamily::MaxEntropy,
                pmf,
            }),
            None => fallback(),
        };
    }
    let ratio = var / var_binom;
    if ratio < 4.0 * (1.0 - 1e-9) {
        let s = (4.0 - ratio) / (ratio - 1.0);
        return Ok(SeverityPmf {
            family: SeverityFamily::BetaBinomial,
            pmf: beta_binomial_pmf(p * s, (1.0 - p) * s),
        });
    }
    // limit of the beta-binomial: all mass on the extremes
    let mut pmf = [0.0; 5];
    pmf[4] = p;
    pmf[0] = 1.0 - p;
    Ok(SeverityPmf {
        family: SeverityFamily::TwoPoint { upper: 4 },
        pmf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_normal_subjects: usize,
    pub n_pd_subjects: usize,
    pub visits_normal: f64,
    pub visits_pd: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Subject counts and mean follow-up visits of the published cohort.
    pub fn paper_counts(seed: u64) -> Self {
        SynthConfig {
            n_normal_subjects: 198,
            n_pd_subjects: 474,
            visits_normal: 5.06,
            visits_pd: 9.92,
            seed,
        }
    }
}

/// Output of [`synthesize_cohort`] plus the fitted per-item families.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub cohort: Cohort,
    pub families: Vec<(String, Label, SeverityPmf)>,
}

/// Shifted-Poisson visit counts (minimum 1), then nudged one visit at a time
/// so the class total is `round(mean * subjects)`.
fn visit_counts<R: Rng>(n: usize, mean: f64, rng: &mut R) -> Result<Vec<usize>> {
    if !(mean >= 1.0) || !mean.is_finite() {
        return Err(Error::InvalidInput(format!("mean visit count {mean} must be >= 1")));
    }
    let lambda = mean - 1.0;
    let mut counts: Vec<usize> = if lambda > 0.0 {
        let pois = Poisson::new(lambda).map_err(|e| Error::InvalidInput(e.to_string()))?;
        (0..n).map(|_| 1 + pois.sample(rng) as usize).collect()
    } else {
        vec![1; n]
    };
    let target = (mean * n as f64).round() as usize;
    let mut total: usize = counts.iter().sum();
    while total < target {
        let i = rng.random_range(0..n);
        counts[i] += 1;
        total += 1;
    }
    while total > target {
        let i = rng.random_range(0..n);
        if counts[i] > 1 {
            counts[i] -= 1;
            total -= 1;
        }
    }
    Ok(counts)
}

struct ClassDraws {
    pq: Vec<[u8; N_PQ]>,
    gender: Vec<u8>,
    age: Vec<f64>,
}

fn draw_class(
    moments: &GroupMoments,
    label: Label,
    n_records: usize,
    seed: u64,
    pmfs: &[SeverityPmf],
) -> Result<ClassDraws> {
    let class = label.code() as u64;
    let mut pq = vec![[0u8; N_PQ]; n_records];
    for (j, pmf) in pmfs.iter().enumerate() {
        let mut rng = seed::rng(seed::derive_path(seed, &[stream::SYNTH_SUBJECT, class, j as u64]));
        for row in pq.iter_mut() {
            row[j] = pmf.sample(&mut rng);
        }
    }

    let mut rng = seed::rng(seed::derive_path(seed, &[stream::SYNTH_DEMOGRAPHICS, class]));
    let g = moments.features[GENDER_INDEX].class(label);
    if !(0.0..=1.0).contains(&g.mean) {
        return Err(Error::InfeasibleMoments {
            feature: "GENDER".into(),
            message: format!("proportion {} outside [0, 1]", g.mean),
        });
    }
    let ones = (g.mean * n_records as f64).round() as usize;
    let mut gender: Vec<u8> = (0..n_records).map(|i| u8::from(i < ones)).collect();
    gender.shuffle(&mut rng);

    let a = moments.features[AGE_INDEX].class(label);
    if !(AGE_MIN..=AGE_MAX).contains(&a.mean) {
        return Err(Error::InfeasibleMoments {
            feature: "AGE".into(),
            message: format!("mean {} outside [{AGE_MIN}, {AGE_MAX}]", a.mean),
        });
    }
    let mut age: Vec<f64> = if a.sd > 0.0 {
        let normal = Normal::new(a.mean, a.sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
        (0..n_records)
            .map(|_| loop {
                let v = normal.sample(&mut rng);
                if (AGE_MIN..=AGE_MAX).contains(&v) {
                    break v;
                }
            })
            .collect()
    } else {
        vec![a.mean; n_records]
    };
    // Rescale so the class's sample moments hit the target exactly.
    if n_records >= 2 && a.sd > 0.0 {
        let n = n_records as f64;
        let m = age.iter().sum::<f64>() / n;
        let s = (age.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if s > 0.0 {
            for v in age.iter_mut() {
                *v = (a.mean + a.sd * (*v - m) / s).clamp(AGE_MIN, AGE_MAX);
            }
        }
    }
    Ok(ClassDraws { pq, gender, age })
}

pub fn synthesize_cohort(moments: &GroupMoments, config: &SynthConfig) -> Result<Cohort> {
    synthesize_cohort_detailed(moments, config).map(|o| o.cohort)
}

pub fn synthesize_cohort_detailed(moments: &GroupMoments, config: &SynthConfig) -> Result<SynthOutput> {
    if config.n_normal_subjects == 0 || config.n_pd_subjects == 0 {
        return Err(Error::InvalidInput("subject counts must be positive".into()));
    }
    let moments = GroupMoments::new(moments.features.clone(), moments.mean_tolerance)?;
    let mut families = Vec::new();
    let mut observations = Vec::new();
    for label in [Label::Normal, Label::EarlyPd] {
        let (n_subjects, visits, prefix) = match label {
            Label::Normal => (config.n_normal_subjects, config.visits_normal, "HC"),
            Label::EarlyPd => (config.n_pd_subjects, config.visits_pd, "PD"),
        };
        let pmfs: Vec<SeverityPmf> = moments.features[..N_PQ]
            .iter()
            .map(|f| {
                let m = f.class(label);
                fit_severity_pmf(m.mean, m.sd, moments.mean_tolerance).map_err(|message| {
                    Error::InfeasibleMoments {
                        feature: format!("{} ({})", f.name, label.name()),
                        message,
                    }
                })
            })
            .collect::<Result<_>>()?;
        for (f, pmf) in moments.features.iter().zip(&pmfs) {
            families.push((f.name.clone(), label, *pmf));
        }
        let mut rng = seed::rng(seed::derive_path(config.seed, &[stream::SYNTH_VISITS, label.code() as u64]));
        let counts = visit_counts(n_subjects, visits, &mut rng)?;
        let n_records: usize = counts.iter().sum();
        let draws = draw_class(&moments, label, n_records, config.seed, &pmfs)?;
        let width = n_subjects.to_string().len().max(4);
        let mut r = 0;
        for (s, &c) in counts.iter().enumerate() {
            let subject_id = format!("{prefix}{:0width$}", s + 1);
            for visit in 0..c {
                observations.push(Observation {
                    subject_id: subject_id.clone(),
                    visit: visit as u32,
                    features: FeatureVector::new(draws.pq[r], draws.age[r], draws.gender[r])?,
                    label,
                    hy_stage: None,
                    sbr: None,
                });
                r += 1;
            }
        }
    }
    Ok(SynthOutput {
        cohort: Cohort::new(observations)?,
        families,
    })
}

/// Achieved vs target moments for one feature and class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsReportRow {
    pub feature: String,
    pub class: &'static str,
    pub target_mean: f64,
    pub target_sd: f64,
    pub achieved_mean: f64,
    pub achieved_sd: f64,
    pub n: usize,
}

pub fn moments_report(cohort: &Cohort, moments: &GroupMoments) -> Vec<MomentsReportRow> {
    let x = cohort.design_matrix::<f64>();
    let labels = cohort.labels();
    let mut rows = Vec::new();
    for label in [Label::Normal, Label::EarlyPd] {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        let n = idx.len();
        for (j, f) in moments.features.iter().enumerate() {
            let vals: Vec<f64> = idx.iter().map(|&i| x[[i, j]]).collect();
            let mean = vals.iter().sum::<f64>() / n.max(1) as f64;
            let sd = if n > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let t = f.class(label);
            rows.push(MomentsReportRow {
                feature: f.name.clone(),
                class: label.name(),
                target_mean: t.mean,
                target_sd: t.sd,
                achieved_mean: mean,
                achieved_sd: sd,
                n,
            });
        }
    }
    rows
}
