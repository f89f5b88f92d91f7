//! Positional encodings (RRWP, sinusoidal) and λ symmetry modulation.
//!
//! Node features are split as `p_i = ⟨p⟩ + (p_i − ⟨p⟩)` where `⟨p⟩` is the
//! per-channel mean over nodes. The mean is permutation invariant; the residual
//! is what breaks equivariance. Modulation rescales the invariant part by λ.

use crate::error::{Error, Result};
use crate::graph::Graph;
use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncodingConfig {
    /// Random-walk probabilities `M^0..M^K` with `M = D^{-1} A`.
    Rrwp {
        #[serde(rename = "K")]
        k: usize,
    },
    /// Index-based sinusoidal features, modulated by `lambda`.
    Sinusoidal {
        d: usize,
        lambda: f64,
        #[serde(default)]
        normalized: bool,
        #[serde(default = "one")]
        coverage: f64,
    },
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EncodingConfig::Rrwp { .. } => Ok(()),
            EncodingConfig::Sinusoidal {
                d,
                lambda,
                normalized,
                coverage,
            } => {
                if d < 2 || d % 2 != 0 {
                    return Err(Error::Config(format!("sinusoidal d = {d} must be even and >= 2")));
                }
                if !(lambda >= 0.0) || !lambda.is_finite() {
                    return Err(Error::Config(format!("lambda = {lambda} must be >= 0")));
                }
                if normalized && lambda == 0.0 {
                    return Err(Error::Config("normalized modulation needs lambda > 0".into()));
                }
                if !(coverage > 0.0 && coverage <= 1.0) {
                    return Err(Error::Config(format!("coverage = {coverage} must lie in (0, 1]")));
                }
                Ok(())
            }
        }
    }

    pub fn node_dim(&self) -> usize {
        match *self {
            EncodingConfig::Rrwp { k } => k + 1,
            EncodingConfig::Sinusoidal { d, .. } => d,
        }
    }

    pub fn pair_dim(&self) -> usize {
        match *self {
            EncodingConfig::Rrwp { k } => k + 1,
            EncodingConfig::Sinusoidal { .. } => 0,
        }
    }

    /// Whether the encoding commutes with node relabelling.
    pub fn is_equivariant(&self) -> bool {
        matches!(self, EncodingConfig::Rrwp { .. })
    }

    /// Builds the encoding of `g`. `rng` is only consumed when coverage < 1.
    pub fn encode<R: Rng + ?Sized>(&self, g: &Graph, rng: &mut R) -> Result<EncodingMatrix> {
        self.validate()?;
        match *self {
            EncodingConfig::Rrwp { k } => Ok(rrwp(g, k)),
            EncodingConfig::Sinusoidal {
                d,
                lambda,
                normalized,
                coverage,
            } => {
                let base = sinusoidal(g.num_nodes(), d);
                let enc = if normalized {
                    modulate_normalized(&base, lambda)?
                } else {
                    modulate(&base, lambda)
                };
                Ok(if coverage < 1.0 {
                    apply_coverage(&enc, coverage, rng)
                } else {
                    enc
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodingMatrix {
    /// `N × d_node`.
    pub node_features: Array2<f64>,
    /// `N × N × d_pair`, present for RRWP only.
    pub pair_features: Option<Array3<f64>>,
}

impl EncodingMatrix {
    pub fn num_nodes(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn node_dim(&self) -> usize {
        self.node_features.ncols()
    }

    pub fn pair_dim(&self) -> usize {
        self.pair_features.as_ref().map_or(0, |p| p.shape()[2])
    }

    /// Per-channel average over nodes; zeros for an empty graph.
    pub fn channel_mean(&self) -> Array1<f64> {
        self.node_features
            .mean_axis(Axis(0))
            .unwrap_or_else(|| Array1::zeros(self.node_dim()))
    }

    pub fn is_finite(&self) -> bool {
        self.node_features.iter().all(|x| x.is_finite())
            && self
                .pair_features
                .as_ref()
                .is_none_or(|p| p.iter().all(|x| x.is_finite()))
    }
}

/// Relative random-walk probabilities up to `k` hops.
///
/// Rows of `M` for isolated nodes are zero, so their powers stay zero. Each
/// entry of `M^{h+1} = M^h M` sums its terms in sorted order, so relabelling
/// the graph permutes the output bit for bit.
pub fn rrwp(g: &Graph, k: usize) -> EncodingMatrix {
    let n = g.num_nodes();
    let adj = g.adjacency_lists();
    let inv_deg: Vec<f64> = adj
        .iter()
        .map(|a| if a.is_empty() { 0.0 } else { 1.0 / a.len() as f64 })
        .collect();
    let mut pair = Array3::<f64>::zeros((n, n, k + 1));
    let mut power = Array2::<f64>::eye(n);
    pair.index_axis_mut(Axis(2), 0).assign(&power);
    let mut terms = Vec::with_capacity(n);
    for hop in 1..=k {
        let mut next = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                // M[l, j] is 1/deg(l) exactly when l is adjacent to j
                terms.clear();
                terms.extend(adj[j].iter().map(|&l| power[[i, l]] * inv_deg[l]));
                terms.sort_by(f64::total_cmp);
                next[[i, j]] = terms.iter().sum();
            }
        }
        power = next;
        pair.index_axis_mut(Axis(2), hop).assign(&power);
    }
    let mut node = Array2::<f64>::zeros((n, k + 1));
    for i in 0..n {
        node.row_mut(i).assign(&pair.slice(ndarray::s![i, i, ..]));
    }
    EncodingMatrix {
        node_features: node,
        pair_features: Some(pair),
    }
}

/// Transformer-style sinusoidal features of the node index.
pub fn sinusoidal(n: usize, d: usize) -> EncodingMatrix {
    assert!(d % 2 == 0, "sinusoidal encodings need an even channel count");
    let mut node = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for j in 0..d / 2 {
            let angle = i as f64 / 10000f64.powf(2.0 * j as f64 / d as f64);
            node[[i, 2 * j]] = angle.sin();
            node[[i, 2 * j + 1]] = angle.cos();
        }
    }
    EncodingMatrix {
        node_features: node,
        pair_features: None,
    }
}

/// `λ·⟨p⟩ + (p_i − ⟨p⟩)` row by row.
pub fn modulate(enc: &EncodingMatrix, lambda: f64) -> EncodingMatrix {
    let mean = enc.channel_mean();
    let mut node = enc.node_features.clone();
    let shift = &mean * (lambda - 1.0);
    for mut row in node.rows_mut() {
        row += &shift;
    }
    EncodingMatrix {
        node_features: node,
        pair_features: enc.pair_features.clone(),
    }
}

/// `⟨p⟩ + (p_i − ⟨p⟩)/λ`: the modulated encoding divided by λ, which keeps the mean.
pub fn modulate_normalized(enc: &EncodingMatrix, lambda: f64) -> Result<EncodingMatrix> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "normalized modulation is undefined for lambda = {lambda}"
        )));
    }
    let mean = enc.channel_mean();
    let mut node = enc.node_features.clone();
    for mut row in node.rows_mut() {
        row.zip_mut_with(&mean, |x, &m| *x = m + (*x - m) / lambda);
    }
    Ok(EncodingMatrix {
        node_features: node,
        pair_features: enc.pair_features.clone(),
    })
}

/// Keeps a random `⌈coverage·N⌉` rows and replaces the others by the mean row.
pub fn apply_coverage<R: Rng + ?Sized>(
    enc: &EncodingMatrix,
    coverage: f64,
    rng: &mut R,
) -> EncodingMatrix {
    let n = enc.num_nodes();
    let keep = ((coverage * n as f64).ceil() as usize).min(n);
    if keep == n {
        return enc.clone();
    }
    let mean = enc.channel_mean();
    let mut retained = vec![false; n];
    for i in rand::seq::index::sample(rng, n, keep) {
        retained[i] = true;
    }
    let mut node = enc.node_features.clone();
    for (i, mut row) in node.rows_mut().into_iter().enumerate() {
        if !retained[i] {
            row.assign(&mean);
        }
    }
    EncodingMatrix {
        node_features: node,
        pair_features: enc.pair_features.clone(),
    }
}
