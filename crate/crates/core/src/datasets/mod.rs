//! Synthetic graph families with deterministic generation and validity checks.

mod delaunay;
mod planarity;
mod sbm;

pub use delaunay::delaunay_edges;
pub use planarity::is_planar;
pub use sbm::{fit_sbm, is_sbm, SbmFit, SBM_SIGNIFICANCE};

use crate::error::{Error, Result};
use crate::graph::{apply_permutation, Graph, Permutation};
use crate::rng::{stream, StreamRng};
use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sbm,
    Planar,
    Tree,
    ErdosRenyi,
    BarabasiAlbert,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Sbm,
        Family::Planar,
        Family::Tree,
        Family::ErdosRenyi,
        Family::BarabasiAlbert,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Sbm => "sbm",
            Family::Planar => "planar",
            Family::Tree => "tree",
            Family::ErdosRenyi => "erdos_renyi",
            Family::BarabasiAlbert => "barabasi_albert",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "sbm" => Ok(Family::Sbm),
            "planar" => Ok(Family::Planar),
            "tree" => Ok(Family::Tree),
            "erdos_renyi" | "er" => Ok(Family::ErdosRenyi),
            "barabasi_albert" | "ba" => Ok(Family::BarabasiAlbert),
            _ => Err(Error::Config(format!("unknown graph family '{s}'"))),
        }
    }
}

/// Family tag plus the parameters only that family needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    Sbm {
        /// Inclusive range for the number of communities.
        communities: (usize, usize),
        /// Inclusive range for each community's size.
        community_size: (usize, usize),
        p_intra: f64,
        p_inter: f64,
    },
    Planar,
    Tree,
    ErdosRenyi {
        p: f64,
    },
    BarabasiAlbert {
        m: usize,
    },
}

impl FamilyParams {
    pub fn family(&self) -> Family {
        match self {
            FamilyParams::Sbm { .. } => Family::Sbm,
            FamilyParams::Planar => Family::Planar,
            FamilyParams::Tree => Family::Tree,
            FamilyParams::ErdosRenyi { .. } => Family::ErdosRenyi,
            FamilyParams::BarabasiAlbert { .. } => Family::BarabasiAlbert,
        }
    }
}

fn default_split() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub params: FamilyParams,
    /// Node-count bounds. For SBM the count follows from the community draws and
    /// these must bracket the attainable range.
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub count: usize,
    pub seed: u64,
    /// Train/val/test fractions, applied in generation order.
    #[serde(default = "default_split")]
    pub split: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Graph>,
    pub val: Vec<Graph>,
    pub test: Vec<Graph>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

impl DatasetSpec {
    pub fn family(&self) -> Family {
        self.params.family()
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_nodes == 0 || self.min_nodes > self.max_nodes {
            return Err(Error::Config(format!(
                "node range [{}, {}] is empty or contains zero",
                self.min_nodes, self.max_nodes
            )));
        }
        if self.split.iter().any(|f| !(0.0..=1.0).contains(f))
            || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!(
                "split fractions {:?} must be in [0,1] and sum to 1",
                self.split
            )));
        }
        match self.params {
            FamilyParams::Sbm {
                communities,
                community_size,
                p_intra,
                p_inter,
            } => {
                check_prob("p_intra", p_intra)?;
                check_prob("p_inter", p_inter)?;
                if p_intra <= p_inter {
                    return Err(Error::Config(format!(
                        "p_intra ({p_intra}) must exceed p_inter ({p_inter})"
                    )));
                }
                if communities.0 == 0 || communities.0 > communities.1 {
                    return Err(Error::Config(format!("bad community range {communities:?}")));
                }
                if community_size.0 == 0 || community_size.0 > community_size.1 {
                    return Err(Error::Config(format!(
                        "bad community size range {community_size:?}"
                    )));
                }
                let lo = communities.0 * community_size.0;
                let hi = communities.1 * community_size.1;
                if self.min_nodes > lo || self.max_nodes < hi {
                    return Err(Error::Config(format!(
                        "node range [{}, {}] does not cover SBM sizes [{lo}, {hi}]",
                        self.min_nodes, self.max_nodes
                    )));
                }
            }
            FamilyParams::ErdosRenyi { p } => check_prob("p", p)?,
            FamilyParams::BarabasiAlbert { m } => {
                if m == 0 || m >= self.min_nodes {
                    return Err(Error::Config(format!(
                        "attachment count m = {m} must satisfy 1 <= m < min_nodes = {}",
                        self.min_nodes
                    )));
                }
            }
            FamilyParams::Planar | FamilyParams::Tree => {}
        }
        Ok(())
    }

    /// Named presets: `sbm-desk`, `sbm`, `planar`, `tree`, `er`, `ba`.
    pub fn preset(name: &str) -> Result<Self> {
        let spec = |params, min_nodes, max_nodes, count| DatasetSpec {
            params,
            min_nodes,
            max_nodes,
            count,
            seed: 0,
            split: default_split(),
        };
        let sbm = |communities: (usize, usize), size: (usize, usize), count| {
            spec(
                FamilyParams::Sbm {
                    communities,
                    community_size: size,
                    p_intra: 0.3,
                    p_inter: 0.005,
                },
                communities.0 * size.0,
                communities.1 * size.1,
                count,
            )
        };
        Ok(match name {
            "sbm-desk" => sbm((2, 2), (10, 15), 160),
            "sbm" => sbm((2, 5), (20, 40), 200),
            "planar" => spec(FamilyParams::Planar, 64, 64, 200),
            "tree" => spec(FamilyParams::Tree, 64, 64, 200),
            "er" => spec(FamilyParams::ErdosRenyi { p: 0.6 }, 20, 80, 200),
            "ba" => spec(FamilyParams::BarabasiAlbert { m: 6 }, 64, 64, 200),
            _ => return Err(Error::Config(format!("unknown dataset preset '{name}'"))),
        })
    }

    pub const PRESETS: [&'static str; 6] = ["sbm-desk", "sbm", "planar", "tree", "er", "ba"];
}

fn sample_n(rng: &mut StreamRng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}

fn erdos_renyi(n: usize, p: f64, rng: &mut StreamRng) -> Graph {
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                g.set_edge(i, j, 1);
            }
        }
    }
    g
}

/// Seed clique of `m` nodes, then each new node links to `m` distinct existing
/// nodes drawn without replacement with weight equal to their degree.
fn barabasi_albert(n: usize, m: usize, rng: &mut StreamRng) -> Graph {
    let mut g = Graph::empty(n);
    for i in 0..m {
        for j in i + 1..m {
            g.set_edge(i, j, 1);
        }
    }
    let mut deg: Vec<usize> = g.degrees();
    for v in m..n {
        let existing: Vec<usize> = (0..v).collect();
        let total: usize = deg[..v].iter().sum();
        let targets: Vec<usize> = if total == 0 {
            existing.choose_multiple(rng, m).copied().collect()
        } else {
            existing
                .choose_multiple_weighted(rng, m, |&u| deg[u] as f64)
                .expect("degree weights are finite and non-negative")
                .copied()
                .collect()
        };
        for u in targets {
            g.set_edge(u, v, 1);
            deg[u] += 1;
            deg[v] += 1;
        }
    }
    g
}

/// Decodes a Prüfer sequence over `0..n` (length `n - 2`) into tree edges.
pub fn prufer_to_edges(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut leaves: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&v| degree[v] == 1)
        .map(std::cmp::Reverse)
        .collect();
    for &s in seq {
        let std::cmp::Reverse(leaf) = leaves.pop().expect("a Prüfer sequence always leaves a leaf");
        edges.push((leaf, s));
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.push(std::cmp::Reverse(s));
        }
    }
    let std::cmp::Reverse(a) = leaves.pop().unwrap();
    let std::cmp::Reverse(b) = leaves.pop().unwrap();
    edges.push((a, b));
    edges
}

fn random_tree(n: usize, rng: &mut StreamRng) -> Graph {
    let seq: Vec<usize> = (0..n.saturating_sub(2)).map(|_| rng.random_range(0..n)).collect();
    let g = Graph::from_edges(n, &prufer_to_edges(&seq, n));
    let perm = Permutation::random(n, rng);
    apply_permutation(&g, &perm).expect("permutation matches graph size")
}

fn random_planar(n: usize, rng: &mut StreamRng) -> Graph {
    loop {
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        let g = Graph::from_edges(n, &delaunay_edges(&pts));
        // collinear draws can leave isolated points; they have probability zero
        if g.is_connected() {
            return g;
        }
    }
}

fn sbm_graph(
    communities: (usize, usize),
    size: (usize, usize),
    p_intra: f64,
    p_inter: f64,
    rng: &mut StreamRng,
) -> Graph {
    let k = rng.random_range(communities.0..=communities.1);
    let mut block = Vec::new();
    for c in 0..k {
        let s = rng.random_range(size.0..=size.1);
        block.extend(std::iter::repeat_n(c, s));
    }
    let n = block.len();
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            let p = if block[i] == block[j] { p_intra } else { p_inter };
            if rng.random_bool(p) {
                g.set_edge(i, j, 1);
            }
        }
    }
    g
}

/// Generates the `index`-th graph of `spec` from its own RNG stream.
pub fn generate_one(spec: &DatasetSpec, index: usize) -> Graph {
    let mut rng = stream(spec.seed, "dataset", &[index as u64]);
    let (lo, hi) = (spec.min_nodes, spec.max_nodes);
    match spec.params {
        FamilyParams::Sbm {
            communities,
            community_size,
            p_intra,
            p_inter,
        } => sbm_graph(communities, community_size, p_intra, p_inter, &mut rng),
        FamilyParams::Planar => {
            let n = sample_n(&mut rng, lo, hi);
            random_planar(n, &mut rng)
        }
        FamilyParams::Tree => {
            let n = sample_n(&mut rng, lo, hi);
            random_tree(n, &mut rng)
        }
        FamilyParams::ErdosRenyi { p } => {
            let n = sample_n(&mut rng, lo, hi);
            erdos_renyi(n, p, &mut rng)
        }
        FamilyParams::BarabasiAlbert { m } => {
            let n = sample_n(&mut rng, lo, hi);
            barabasi_albert(n, m, &mut rng)
        }
    }
}

/// Sizes of the train/val/test splits for `count` graphs.
pub fn split_sizes(count: usize, split: [f64; 3]) -> [usize; 3] {
    let train = ((count as f64) * split[0]).round() as usize;
    let val = (((count as f64) * split[1]).round() as usize).min(count - train.min(count));
    let train = train.min(count);
    [train, val, count - train - val]
}

pub fn generate(spec: &DatasetSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    let graphs: Vec<Graph> = (0..spec.count)
        .into_par_iter()
        .map(|i| generate_one(spec, i))
        .collect();
    let [tr, va, _] = split_sizes(spec.count, spec.split);
    let mut it = graphs.into_iter();
    Ok(DatasetSplit {
        train: it.by_ref().take(tr).collect(),
        val: it.by_ref().take(va).collect(),
        test: it.collect(),
    })
}

/// Central 99% interval of Binomial(trials, p).
pub fn binomial_central_interval(trials: u64, p: f64) -> (u64, u64) {
    let b = Binomial::new(p, trials).expect("probability validated by caller");
    (b.inverse_cdf(0.005), b.inverse_cdf(0.995))
}

/// Edge count of a Barabási–Albert graph with a seed clique of `m` nodes.
pub fn barabasi_albert_edge_count(n: usize, m: usize) -> usize {
    m * (m - 1) / 2 + (n - m) * m
}

/// Family-specific validity. Only the binary edge structure is inspected.
pub fn check_validity(g: &Graph, params: &FamilyParams) -> bool {
    let n = g.num_nodes();
    match *params {
        FamilyParams::Tree => n >= 1 && g.is_connected() && g.edge_count() + 1 == n,
        FamilyParams::Planar => n >= 1 && g.is_connected() && is_planar(g),
        FamilyParams::Sbm {
            communities,
            community_size,
            p_intra,
            p_inter,
        } => is_sbm(g, communities, community_size, p_intra, p_inter),
        FamilyParams::ErdosRenyi { p } => {
            if !(0.0..=1.0).contains(&p) {
                return false;
            }
            let pairs = (n * n.saturating_sub(1) / 2) as u64;
            let (lo, hi) = binomial_central_interval(pairs, p);
            (lo..=hi).contains(&(g.edge_count() as u64))
        }
        FamilyParams::BarabasiAlbert { m } => {
            m >= 1
                && n > m
                && g.is_connected()
                && g.edge_count() == barabasi_albert_edge_count(n, m)
                && g.degrees().into_iter().min().unwrap_or(0) >= m
        }
    }
}
