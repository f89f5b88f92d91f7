//! Discrete flow matching over categorical graphs.
//!
//! Every node label and every unordered edge label is an independent
//! categorical variable interpolated linearly between a fixed prior (t = 0)
//! and the data (t = 1). Generation integrates a CTMC whose rates are the
//! posterior-weighted conditional rates, optionally with target guidance and a
//! detailed-balance noise term.

use crate::error::{Error, Result};
use crate::graph::Graph;
use ndarray::{Array2, Array3};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Upper bound on the time at which rates are evaluated.
pub const T_MAX: f64 = 1.0 - 1e-4;

/// Loss contribution used in place of `-ln 0`.
pub const SATURATED_NLL: f64 = 1e6;

fn check_simplex(name: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|&x| !(x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("{name} {p:?} is not a probability vector")));
    }
    Ok(())
}

/// Draws an index from `probs` (assumed normalised) with one uniform variate.
pub fn sample_categorical<R: RngCore + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding left u above the running sum: take the last class with mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseDistribution {
    pub node_probs: Vec<f64>,
    pub edge_probs: Vec<f64>,
}

impl NoiseDistribution {
    pub fn new(node_probs: Vec<f64>, edge_probs: Vec<f64>) -> Result<Self> {
        check_simplex("node prior", &node_probs)?;
        check_simplex("edge prior", &edge_probs)?;
        Ok(Self { node_probs, edge_probs })
    }

    pub fn uniform(node_classes: usize, edge_classes: usize) -> Self {
        Self {
            node_probs: vec![1.0 / node_classes as f64; node_classes],
            edge_probs: vec![1.0 / edge_classes as f64; edge_classes],
        }
    }

    /// Class frequencies of nodes and of unordered node pairs in `graphs`.
    ///
    /// Falls back to uniform for a kind with no observations.
    pub fn empirical(graphs: &[Graph], node_classes: usize, edge_classes: usize) -> Self {
        let mut nodes = vec![0u64; node_classes];
        let mut edges = vec![0u64; edge_classes];
        for g in graphs {
            let n = g.num_nodes();
            for i in 0..n {
                nodes[g.node(i)] += 1;
                for j in i + 1..n {
                    edges[g.edge(i, j)] += 1;
                }
            }
        }
        let norm = |c: Vec<u64>| {
            let total: u64 = c.iter().sum();
            if total == 0 {
                vec![1.0 / c.len() as f64; c.len()]
            } else {
                c.iter().map(|&x| x as f64 / total as f64).collect()
            }
        };
        Self {
            node_probs: norm(nodes),
            edge_probs: norm(edges),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_simplex("node prior", &self.node_probs)?;
        check_simplex("edge prior", &self.edge_probs)
    }

    pub fn node_classes(&self) -> usize {
        self.node_probs.len()
    }

    pub fn edge_classes(&self) -> usize {
        self.edge_probs.len()
    }

    /// Draws `G_0`: every node and unordered pair independently from the prior.
    pub fn sample_graph<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> Graph {
        let mut g = Graph::with_classes(n, self.node_classes() as u8, self.edge_classes() as u8);
        for i in 0..n {
            g.set_node(i, sample_categorical(&self.node_probs, rng));
        }
        for i in 0..n {
            for j in i + 1..n {
                g.set_edge(i, j, sample_categorical(&self.edge_probs, rng));
            }
        }
        g
    }
}

/// Monotone bijection of [0, 1] reshaping the sampling time grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distortion {
    Identity,
    Polynomial(f64),
    Cosine,
}

impl Distortion {
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Distortion::Identity => t,
            Distortion::Polynomial(k) => t.powf(k),
            Distortion::Cosine => (1.0 - (std::f64::consts::PI * t).cos()) / 2.0,
        }
    }
}

pub fn distort(t: f64, f: Distortion) -> f64 {
    f.apply(t)
}

impl fmt::Display for Distortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distortion::Identity => f.write_str("identity"),
            Distortion::Polynomial(k) => write!(f, "poly:{k}"),
            Distortion::Cosine => f.write_str("cosine"),
        }
    }
}

impl FromStr for Distortion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Distortion::Identity),
            "cosine" => Ok(Distortion::Cosine),
            _ => {
                let k = s
                    .strip_prefix("poly:")
                    .and_then(|k| k.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown distortion '{s}'")))?;
                if !(k > 0.0) || !k.is_finite() {
                    return Err(Error::Config(format!("polynomial distortion exponent {k} must be > 0")));
                }
                Ok(Distortion::Polynomial(k))
            }
        }
    }
}

impl Serialize for Distortion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Distortion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn default_steps() -> usize {
    100
}

fn default_distortion() -> Distortion {
    Distortion::Identity
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePolicy {
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "default_distortion")]
    pub distortion: Distortion,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

impl Default for RatePolicy {
    fn default() -> Self {
        Self {
            omega: 0.0,
            eta: 0.0,
            distortion: Distortion::Identity,
            steps: default_steps(),
        }
    }
}

impl RatePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0) || !(self.eta >= 0.0) || !self.omega.is_finite() || !self.eta.is_finite() {
            return Err(Error::Config(format!(
                "omega = {} and eta = {} must be finite and >= 0",
                self.omega, self.eta
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if let Distortion::Polynomial(k) = self.distortion {
            if !(k > 0.0) {
                return Err(Error::Config(format!("polynomial distortion exponent {k} must be > 0")));
            }
        }
        Ok(())
    }

    /// `f(k / steps)` for `k = 0..=steps`.
    pub fn time_grid(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|k| self.distortion.apply(k as f64 / self.steps as f64))
            .collect()
    }
}

/// Factorised model output `p(x_1 | G_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorPrediction {
    /// `N × X`, rows on the simplex.
    pub node_dists: Array2<f64>,
    /// `N × N × E`, symmetric in the first two axes. The diagonal is unused.
    pub edge_dists: Array3<f64>,
}

impl PosteriorPrediction {
    /// Point masses on the labels of `g`.
    pub fn one_hot(g: &Graph) -> Self {
        let n = g.num_nodes();
        let mut node_dists = Array2::zeros((n, g.node_classes()));
        let mut edge_dists = Array3::zeros((n, n, g.edge_classes()));
        for i in 0..n {
            node_dists[[i, g.node(i)]] = 1.0;
            for j in 0..n {
                edge_dists[[i, j, g.edge(i, j)]] = 1.0;
            }
        }
        Self { node_dists, edge_dists }
    }

    pub fn num_nodes(&self) -> usize {
        self.node_dists.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        let es = self.edge_dists.shape();
        if es[0] != n || es[1] != n {
            return Err(Error::Dimension(format!(
                "edge distributions {:?} for {n} nodes",
                es
            )));
        }
        for row in self.node_dists.rows() {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.sum() - 1.0).abs() > 1e-6 {
                return Err(Error::Domain(format!("node distribution {row} is not on the simplex")));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let a = self.edge_dists.slice(ndarray::s![i, j, ..]);
                let b = self.edge_dists.slice(ndarray::s![j, i, ..]);
                if a != b {
                    return Err(Error::Domain(format!("edge distributions at ({i},{j}) are not symmetric")));
                }
                if a.iter().any(|&p| !(p >= 0.0)) || (a.sum() - 1.0).abs() > 1e-6 {
                    return Err(Error::Domain(format!("edge distribution at ({i},{j}) is not on the simplex")));
                }
            }
        }
        Ok(())
    }
}

/// Anything that maps a noisy graph and time to a factorised posterior.
pub trait Predictor {
    fn predict(&self, g_t: &Graph, t: f64, rng: &mut dyn RngCore) -> Result<PosteriorPrediction>;
}

/// `p_{t|1}(· | x1) = t·δ(·, x1) + (1 − t)·prior`.
pub fn noising_marginal(x1: usize, t: f64, prior: &[f64]) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, 1]")));
    }
    Ok(prior
        .iter()
        .enumerate()
        .map(|(j, &p)| (1.0 - t) * p + if j == x1 { t } else { 0.0 })
        .collect())
}

/// Samples `G_t` given clean `g1`, independently per node and unordered pair.
pub fn noise_graph<R: RngCore + ?Sized>(
    g1: &Graph,
    t: f64,
    noise: &NoiseDistribution,
    rng: &mut R,
) -> Result<Graph> {
    let n = g1.num_nodes();
    let mut g = g1.clone();
    for i in 0..n {
        let p = noising_marginal(g1.node(i), t, &noise.node_probs)?;
        g.set_node(i, sample_categorical(&p, rng));
    }
    for i in 0..n {
        for j in i + 1..n {
            let p = noising_marginal(g1.edge(i, j), t, &noise.edge_probs)?;
            g.set_edge(i, j, sample_categorical(&p, rng));
        }
    }
    Ok(g)
}

fn balance(rate: &mut [f64], x_t: usize) {
    rate[x_t] = 0.0;
    let out: f64 = rate.iter().sum();
    rate[x_t] = -out;
}

/// Conditional rate row `R*(x_t, · | x1)` over `s` classes.
pub fn conditional_rate(x_t: usize, x1: usize, t: f64, s: usize) -> Result<Vec<f64>> {
    if !(t < 1.0) {
        return Err(Error::Domain(format!("conditional rate is singular at t = {t}")));
    }
    let mut r = vec![0.0; s];
    if x_t != x1 {
        r[x1] = 1.0 / (1.0 - t);
        r[x_t] = -r[x1];
    }
    Ok(r)
}

/// Adds the target-guidance term `ω δ(j, x1) / (Z p_{t|1}(x_t | x1))` to `base`.
pub fn guided_rate(
    base: &[f64],
    x_t: usize,
    x1: usize,
    t: f64,
    omega: f64,
    prior: &[f64],
) -> Result<Vec<f64>> {
    let mut r = base.to_vec();
    if omega == 0.0 || x_t == x1 {
        return Ok(r);
    }
    let p = noising_marginal(x1, t, prior)?;
    if !(p[x_t] > 0.0) {
        return Err(Error::NumericalDomain(format!(
            "guidance needs p_t|1(x_t = {x_t} | x1 = {x1}) > 0 at t = {t}"
        )));
    }
    let support = p.iter().filter(|&&q| q > 0.0).count() as f64;
    r[x1] += omega / (support * p[x_t]);
    balance(&mut r, x_t);
    Ok(r)
}

/// Detailed-balance rate row `R^DB(x_t, j | x1) = p_{t|1}(j | x1)` for `j ≠ x_t`.
pub fn db_rate(x_t: usize, x1: usize, t: f64, prior: &[f64]) -> Result<Vec<f64>> {
    let mut r = noising_marginal(x1, t, prior)?;
    balance(&mut r, x_t);
    Ok(r)
}

/// Posterior-weighted sum of conditional, guidance and detailed-balance rates.
pub fn expected_rate(
    x_t: usize,
    posterior: &[f64],
    t: f64,
    policy: &RatePolicy,
    prior: &[f64],
) -> Result<Vec<f64>> {
    let s = prior.len();
    if posterior.len() != s {
        return Err(Error::Dimension(format!(
            "posterior over {} classes, prior over {s}",
            posterior.len()
        )));
    }
    let mut out = vec![0.0; s];
    for (x1, &w) in posterior.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let mut r = conditional_rate(x_t, x1, t, s)?;
        if policy.omega > 0.0 {
            r = guided_rate(&r, x_t, x1, t, policy.omega, prior)?;
        }
        if policy.eta > 0.0 {
            let db = db_rate(x_t, x1, t, prior)?;
            r.iter_mut().zip(&db).for_each(|(a, b)| *a += policy.eta * b);
        }
        out.iter_mut().zip(&r).for_each(|(a, b)| *a += w * b);
    }
    balance(&mut out, x_t);
    Ok(out)
}

/// One-step Euler kernel for a rate row: `R dt` off the diagonal, clamped at
/// zero, renormalised if the jump mass exceeds one.
pub fn jump_probabilities(rate: &[f64], x_t: usize, dt: f64) -> Vec<f64> {
    let mut p: Vec<f64> = rate
        .iter()
        .enumerate()
        .map(|(j, &r)| if j == x_t { 0.0 } else { (r * dt).max(0.0) })
        .collect();
    let jump: f64 = p.iter().sum();
    if jump > 1.0 {
        p.iter_mut().for_each(|x| *x /= jump);
    } else {
        p[x_t] = 1.0 - jump;
    }
    p
}

/// Advances `g_t` from `t` to `t + dt` given the model's posterior.
pub fn euler_step<R: RngCore + ?Sized>(
    g_t: &Graph,
    prediction: &PosteriorPrediction,
    t: f64,
    dt: f64,
    policy: &RatePolicy,
    noise: &NoiseDistribution,
    rng: &mut R,
) -> Result<Graph> {
    let n = g_t.num_nodes();
    if prediction.num_nodes() != n {
        return Err(Error::Dimension(format!(
            "prediction for {} nodes, graph has {n}",
            prediction.num_nodes()
        )));
    }
    let te = t.min(T_MAX);
    let mut g = g_t.clone();
    for i in 0..n {
        let post = prediction.node_dists.row(i).to_vec();
        let rate = expected_rate(g_t.node(i), &post, te, policy, &noise.node_probs)?;
        g.set_node(i, sample_categorical(&jump_probabilities(&rate, g_t.node(i), dt), rng));
    }
    for i in 0..n {
        for j in i + 1..n {
            let post = prediction.edge_dists.slice(ndarray::s![i, j, ..]).to_vec();
            let x = g_t.edge(i, j);
            let rate = expected_rate(x, &post, te, policy, &noise.edge_probs)?;
            g.set_edge(i, j, sample_categorical(&jump_probabilities(&rate, x, dt), rng));
        }
    }
    Ok(g)
}

/// Draws one graph with `n_nodes` nodes by integrating the CTMC from `t = 0`.
pub fn sample<P: Predictor + ?Sized, R: RngCore>(
    model: &P,
    n_nodes: usize,
    noise: &NoiseDistribution,
    policy: &RatePolicy,
    rng: &mut R,
) -> Result<Graph> {
    policy.validate()?;
    let mut g = noise.sample_graph(n_nodes, rng);
    let grid = policy.time_grid();
    for w in grid.windows(2) {
        let (t, dt) = (w[0], w[1] - w[0]);
        if dt <= 0.0 {
            continue;
        }
        let pred = model.predict(&g, t, rng)?;
        g = euler_step(&g, &pred, t, dt, policy, noise, rng)?;
    }
    Ok(g)
}

/// Cross-entropy of `g1` under a prediction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Some true class had zero predicted mass; its term was replaced by
    /// [`SATURATED_NLL`].
    pub saturated: bool,
}

/// `−Σ_n ln p(x_n) − w Σ_{i<j} 2 ln p(e_ij)`.
pub fn loss(prediction: &PosteriorPrediction, g1: &Graph, edge_weight: f64) -> Result<LossValue> {
    let n = g1.num_nodes();
    if prediction.num_nodes() != n
        || prediction.node_dists.ncols() != g1.node_classes()
        || prediction.edge_dists.shape()[2] != g1.edge_classes()
    {
        return Err(Error::Dimension("prediction does not match the target graph".into()));
    }
    let mut saturated = false;
    let mut nll = |p: f64| {
        if p > 0.0 {
            -p.ln()
        } else {
            saturated = true;
            SATURATED_NLL
        }
    };
    let mut node_term = 0.0;
    for i in 0..n {
        node_term += nll(prediction.node_dists[[i, g1.node(i)]]);
    }
    let mut edge_term = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            edge_term += 2.0 * nll(prediction.edge_dists[[i, j, g1.edge(i, j)]]);
        }
    }
    Ok(LossValue {
        value: node_term + edge_weight * edge_term,
        saturated,
    })
}
