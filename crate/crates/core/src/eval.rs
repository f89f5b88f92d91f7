//! Sample-quality metrics: validity/uniqueness/novelty and MMD ratios.

use crate::datasets::{check_validity, FamilyParams};
use crate::error::{Error, Result};
use crate::graph::{canonical_hash, compute_statistics, is_isomorphic, Graph, GraphStatistics};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

fn default_sigma() -> f64 {
    1.0
}

fn default_sigma_spectrum() -> f64 {
    0.1
}

fn default_clustering_bins() -> usize {
    100
}

fn default_spectrum_bins() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    #[serde(default = "default_sigma")]
    pub sigma_degree: f64,
    #[serde(default = "default_sigma")]
    pub sigma_clustering: f64,
    #[serde(default = "default_sigma")]
    pub sigma_orbit: f64,
    #[serde(default = "default_sigma_spectrum")]
    pub sigma_spectrum: f64,
    #[serde(default = "default_clustering_bins")]
    pub clustering_bins: usize,
    #[serde(default = "default_spectrum_bins")]
    pub spectrum_bins: usize,
    /// Count a graph as unique only if no other valid sample is isomorphic
    /// to it (instead of keeping first occurrences).
    #[serde(default)]
    pub strict_uniqueness: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            sigma_degree: 1.0,
            sigma_clustering: 1.0,
            sigma_orbit: 1.0,
            sigma_spectrum: 0.1,
            clustering_bins: default_clustering_bins(),
            spectrum_bins: default_spectrum_bins(),
            strict_uniqueness: false,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.sigma_degree, self.sigma_clustering, self.sigma_orbit, self.sigma_spectrum];
        if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config(format!("kernel bandwidths must be positive: {sigmas:?}")));
        }
        if self.clustering_bins == 0 || self.spectrum_bins == 0 {
            return Err(Error::Config("histogram bin counts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VunReport {
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    pub vun: f64,
    pub num_generated: usize,
    pub num_valid: usize,
    pub num_unique: usize,
    pub num_novel: usize,
}

impl VunReport {
    /// Uniqueness times novelty.
    pub fn un(&self) -> f64 {
        self.uniqueness * self.novelty
    }
}

fn frac(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Buckets graphs by canonical hash so isomorphism checks only run on collisions.
struct IsoIndex<'a> {
    buckets: HashMap<u64, Vec<&'a Graph>>,
}

impl<'a> IsoIndex<'a> {
    fn new() -> Self {
        Self { buckets: HashMap::new() }
    }

    fn contains(&self, hash: u64, g: &Graph) -> bool {
        self.buckets
            .get(&hash)
            .is_some_and(|b| b.iter().any(|h| is_isomorphic(g, h)))
    }

    fn insert(&mut self, hash: u64, g: &'a Graph) {
        self.buckets.entry(hash).or_default().push(g);
    }
}

pub fn vun(
    generated: &[Graph],
    train: &[Graph],
    family: &FamilyParams,
    config: &MetricConfig,
) -> Result<VunReport> {
    if generated.is_empty() {
        return Err(Error::Argument("no generated graphs to score".into()));
    }
    let valid: Vec<&Graph> = generated
        .par_iter()
        .map(|g| check_validity(g, family))
        .collect::<Vec<bool>>()
        .into_iter()
        .zip(generated)
        .filter_map(|(ok, g)| ok.then_some(g))
        .collect();
    let hashes: Vec<u64> = valid.par_iter().map(|g| canonical_hash(g)).collect();

    let unique_flags: Vec<bool> = if config.strict_uniqueness {
        (0..valid.len())
            .into_par_iter()
            .map(|i| {
                !(0..valid.len())
                    .any(|j| j != i && hashes[j] == hashes[i] && is_isomorphic(valid[i], valid[j]))
            })
            .collect()
    } else {
        let mut seen = IsoIndex::new();
        valid
            .iter()
            .zip(&hashes)
            .map(|(g, &h)| {
                let fresh = !seen.contains(h, g);
                if fresh {
                    seen.insert(h, g);
                }
                fresh
            })
            .collect()
    };
    let num_unique = unique_flags.iter().filter(|&&u| u).count();

    let mut known = IsoIndex::new();
    for g in train {
        known.insert(canonical_hash(g), g);
    }
    let num_novel = valid
        .par_iter()
        .zip(&hashes)
        .filter(|(g, &h)| !known.contains(h, g))
        .count();

    let num_valid = valid.len();
    let validity = frac(num_valid, generated.len());
    let uniqueness = frac(num_unique, num_valid);
    let novelty = frac(num_novel, num_valid);
    Ok(VunReport {
        validity,
        uniqueness,
        novelty,
        vun: validity * uniqueness * novelty,
        num_generated: generated.len(),
        num_valid,
        num_unique,
        num_novel,
    })
}

/// Total-variation distance between two histograms after normalising each
/// to unit mass; the shorter one is zero-padded.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let norm = |h: &[f64]| {
        let s: f64 = h.iter().sum();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let (sa, sb) = (norm(a), norm(b));
    let len = a.len().max(b.len());
    let at = |h: &[f64], i: usize| h.get(i).copied().unwrap_or(0.0);
    0.5 * (0..len).map(|i| (at(a, i) / sa - at(b, i) / sb).abs()).sum::<f64>()
}

/// Biased squared MMD with kernel `exp(-TV² / 2σ²)`, clamped at zero.
pub fn mmd(set_a: &[Vec<f64>], set_b: &[Vec<f64>], sigma: f64) -> f64 {
    if set_a.is_empty() || set_b.is_empty() {
        return 0.0;
    }
    let k = |x: &Vec<f64>, y: &Vec<f64>| (-total_variation(x, y).powi(2) / (2.0 * sigma * sigma)).exp();
    let mean = |xs: &[Vec<f64>], ys: &[Vec<f64>]| {
        let s: f64 = xs
            .par_iter()
            .map(|x| ys.iter().map(|y| k(x, y)).sum::<f64>())
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        s / (xs.len() * ys.len()) as f64
    };
    (mean(set_a, set_a) + mean(set_b, set_b) - 2.0 * mean(set_a, set_b)).max(0.0)
}

/// One structural statistic turned into a per-graph histogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Degree,
    Clustering,
    Orbit,
    Spectrum,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Self::Degree, Self::Clustering, Self::Orbit, Self::Spectrum];

    pub fn sigma(self, config: &MetricConfig) -> f64 {
        match self {
            Self::Degree => config.sigma_degree,
            Self::Clustering => config.sigma_clustering,
            Self::Orbit => config.sigma_orbit,
            Self::Spectrum => config.sigma_spectrum,
        }
    }

    pub fn histogram(self, s: &GraphStatistics, config: &MetricConfig) -> Vec<f64> {
        let binned = |values: &[f64], lo: f64, hi: f64, bins: usize| {
            let mut h = vec![0.0; bins];
            for &v in values {
                let b = (((v - lo) / (hi - lo)) * bins as f64).floor();
                h[(b.max(0.0) as usize).min(bins - 1)] += 1.0;
            }
            h
        };
        match self {
            Self::Degree => s.degree_histogram.iter().map(|&c| c as f64).collect(),
            Self::Clustering => binned(&s.clustering_coefficients, 0.0, 1.0, config.clustering_bins),
            Self::Orbit => {
                let mut h = vec![0.0; crate::graph::NUM_ORBITS];
                for o in &s.orbit_counts {
                    for (acc, &c) in h.iter_mut().zip(o) {
                        *acc += c as f64;
                    }
                }
                h
            }
            Self::Spectrum => binned(&s.laplacian_spectrum, 0.0, 2.0, config.spectrum_bins),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticRatio {
    pub statistic: Statistic,
    pub mmd_generated_test: f64,
    pub mmd_train_test: f64,
    /// `None` when the train/test MMD is zero.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub statistics: Vec<StatisticRatio>,
    /// Mean over the statistics with a defined ratio; `None` if there are none.
    pub avg_ratio: Option<f64>,
}

fn histograms(graphs: &[Graph], config: &MetricConfig) -> Vec<Vec<Vec<f64>>> {
    let stats: Vec<GraphStatistics> = graphs.par_iter().map(compute_statistics).collect();
    Statistic::ALL
        .iter()
        .map(|st| stats.iter().map(|s| st.histogram(s, config)).collect())
        .collect()
}

pub fn avg_ratio(
    generated: &[Graph],
    train: &[Graph],
    test: &[Graph],
    config: &MetricConfig,
) -> Result<RatioReport> {
    if generated.is_empty() || train.is_empty() || test.is_empty() {
        return Err(Error::Argument("ratio metrics need non-empty generated, train and test sets".into()));
    }
    config.validate()?;
    let (hg, htr, hte) = (histograms(generated, config), histograms(train, config), histograms(test, config));
    let mut statistics = Vec::new();
    for (k, st) in Statistic::ALL.into_iter().enumerate() {
        let sigma = st.sigma(config);
        let gen_test = mmd(&hg[k], &hte[k], sigma);
        let train_test = mmd(&htr[k], &hte[k], sigma);
        let ratio = if train_test > 0.0 {
            Some(gen_test / train_test)
        } else {
            eprintln!("warning: train/test MMD is zero for {st:?}; dropping it from the average");
            None
        };
        statistics.push(StatisticRatio {
            statistic: st,
            mmd_generated_test: gen_test,
            mmd_train_test: train_test,
            ratio,
        });
    }
    let defined: Vec<f64> = statistics.iter().filter_map(|s| s.ratio).collect();
    let avg = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(RatioReport { statistics, avg_ratio: avg })
}
