//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Set `SYMFLOW_ACCEPT=3,7` to run a subset.

use ndarray::Axis;
use rand::{Rng, RngCore};
use std::path::Path;
use std::process::Command;
use std::time::Instant;
use symflow_core::datasets::{generate, DatasetSpec};
use symflow_core::denoiser::{forward, loss_and_grad, loss_value, Parameters};
use symflow_core::encodings::{modulate, modulate_normalized, rrwp, sinusoidal};
use symflow_core::eval::{avg_ratio, mmd, vun};
use symflow_core::flow::{
    conditional_rate, db_rate, noise_graph, noising_marginal, sample, Predictor,
};
use symflow_core::graph::{apply_permutation, is_isomorphic, Graph, Permutation};
use symflow_core::rng::stream;
use symflow_core::training::{desk_model, MetricsRow, RampFamily, TrainConfig, Trainer};
use symflow_core::{
    Distortion, EncodingConfig, FamilyParams, MetricConfig, ModelConfig, NoiseDistribution,
    PermutationSchedule, PosteriorPrediction, RatePolicy, Result as CoreResult,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// ---------------------------------------------------------------- 1

fn noising() -> Verdict {
    let noise = NoiseDistribution::new(vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]).unwrap();
    let mut g1 = Graph::with_classes(2, 3, 3);
    g1.set_node(0, 2);
    g1.set_node(1, 0);
    g1.set_edge(0, 1, 1);
    let draws = 100_000;
    let mut worst: f64 = 0.0;
    for (k, &t) in [0.1, 0.3, 0.7].iter().enumerate() {
        let mut rng = stream(1, "accept-noise", &[k as u64]);
        let mut node_counts = [[0usize; 3]; 2];
        let mut edge_counts = [0usize; 3];
        for _ in 0..draws {
            let g = noise_graph(&g1, t, &noise, &mut rng).unwrap();
            node_counts[0][g.node(0)] += 1;
            node_counts[1][g.node(1)] += 1;
            edge_counts[g.edge(0, 1)] += 1;
        }
        let mut check = |counts: &[usize], x1: usize, prior: &[f64]| {
            let want = noising_marginal(x1, t, prior).unwrap();
            for c in 0..counts.len() {
                worst = worst.max((counts[c] as f64 / draws as f64 - want[c]).abs());
            }
        };
        check(&node_counts[0], 2, &noise.node_probs);
        check(&node_counts[1], 0, &noise.node_probs);
        check(&edge_counts, 1, &noise.edge_probs);
    }
    verdict(worst <= 0.005, format!("max class-frequency error {worst:.5} (tolerance 0.005)"))
}

// ---------------------------------------------------------------- 2

fn kolmogorov() -> Verdict {
    let dt = 1e-3;
    let mut worst: f64 = 0.0;
    for s in [2usize, 3, 5] {
        for x1 in 0..s {
            let mut p = vec![1.0 / s as f64; s];
            let mut t = 0.0;
            while t + dt < 1.0 - dt / 2.0 {
                let mut next = p.clone();
                for (i, &pi) in p.iter().enumerate() {
                    let r = conditional_rate(i, x1, t, s).unwrap();
                    for j in 0..s {
                        next[j] += dt * pi * r[j];
                    }
                }
                p = next;
                t += dt;
            }
            let tv = 0.5 * (0..s).map(|j| (p[j] - (j == x1) as u8 as f64).abs()).sum::<f64>();
            worst = worst.max(tv);
        }
    }
    verdict(worst < 0.02, format!("max TV to the target one-hot {worst:.2e} (tolerance 0.02)"))
}

// ---------------------------------------------------------------- 3

fn detailed_balance() -> Verdict {
    let mut rng = stream(3, "accept-db", &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s = rng.random_range(2..7);
        let raw: Vec<f64> = (0..s).map(|_| rng.random_range(0.01..1.0)).collect();
        let z: f64 = raw.iter().sum();
        let prior: Vec<f64> = raw.iter().map(|x| x / z).collect();
        let x1 = rng.random_range(0..s);
        let t = rng.random_range(0.001..0.999);
        let p = noising_marginal(x1, t, &prior).unwrap();
        for i in 0..s {
            let ri = db_rate(i, x1, t, &prior).unwrap();
            for j in 0..s {
                if i != j {
                    let rj = db_rate(j, x1, t, &prior).unwrap();
                    worst = worst.max((p[i] * ri[j] - p[j] * rj[i]).abs());
                }
            }
        }
    }
    verdict(worst <= 1e-12, format!("max |p_i R_ij - p_j R_ji| = {worst:.2e} over 1000 configurations"))
}

// ---------------------------------------------------------------- 4

fn gradient() -> Verdict {
    let enc_cfg = EncodingConfig::Rrwp { k: 2 };
    let cfg = ModelConfig::for_encoding(&enc_cfg, 1, 2, 8, 1, 2, 4);
    let params = Parameters::init(&cfg, &mut stream(4, "accept-init", &[])).unwrap();
    let mut rng = stream(4, "accept-grad", &[]);
    let noise = NoiseDistribution::uniform(1, 2);
    let g1 = noise.sample_graph(3, &mut rng);
    let gt = noise.sample_graph(3, &mut rng);
    let enc = rrwp(&gt, 2);
    let (_, grad) = loss_and_grad(&gt, 0.4, &enc, &g1, 5.0, &params, &cfg).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(0..params.len());
        let mut p = params.clone();
        p.values[k] += h;
        let up = loss_value(&gt, 0.4, &enc, &g1, 5.0, &p, &cfg).unwrap();
        p.values[k] -= 2.0 * h;
        let down = loss_value(&gt, 0.4, &enc, &g1, 5.0, &p, &cfg).unwrap();
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6));
    }
    verdict(worst < 1e-4, format!("max relative error {worst:.2e} on 50 parameters (tolerance 1e-4)"))
}

// ---------------------------------------------------------------- 5

fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
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

fn equivariance() -> Verdict {
    let mut rng = stream(5, "accept-equi", &[]);
    let enc_cfg = EncodingConfig::Rrwp { k: 4 };
    let cfg = ModelConfig::for_encoding(&enc_cfg, 1, 2, 16, 2, 2, 8);
    let params = Parameters::init(&cfg, &mut stream(5, "accept-init", &[])).unwrap();
    let mut encoding_exact = true;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(2..12);
        let g = random_graph(n, 0.35, &mut rng);
        let perm = Permutation::random(n, &mut rng);
        let h = apply_permutation(&g, &perm).unwrap();
        let (eg, eh) = (rrwp(&g, 4), rrwp(&h, 4));
        let (pg, ph) = (eg.pair_features.as_ref().unwrap(), eh.pair_features.as_ref().unwrap());
        for a in 0..n {
            let pa = perm.apply_index(a);
            encoding_exact &= eg.node_features.row(a) == eh.node_features.row(pa);
            for b in 0..n {
                let pb = perm.apply_index(b);
                encoding_exact &= pg.index_axis(Axis(0), a).row(b) == ph.index_axis(Axis(0), pa).row(pb);
            }
        }
        let (fg, fh) = (forward(&g, 0.5, &eg, &params, &cfg).unwrap(), forward(&h, 0.5, &eh, &params, &cfg).unwrap());
        for a in 0..n {
            let pa = perm.apply_index(a);
            for b in 0..n {
                let pb = perm.apply_index(b);
                for c in 0..2 {
                    worst = worst.max((fg.edge_dists[[a, b, c]] - fh.edge_dists[[pa, pb, c]]).abs());
                }
            }
            worst = worst.max((fg.node_dists[[a, 0]] - fh.node_dists[[pa, 0]]).abs());
        }
    }

    // sinusoidal witness: λ-modulated index encodings on a frozen model
    let sin_cfg = EncodingConfig::Sinusoidal { d: 8, lambda: 3.0, normalized: false, coverage: 1.0 };
    let scfg = ModelConfig::for_encoding(&sin_cfg, 1, 2, 16, 2, 2, 8);
    let sparams = Parameters::init(&scfg, &mut stream(5, "accept-sin", &[])).unwrap();
    let path = Graph::from_edges(3, &[(0, 1), (1, 2)]);
    let swap = Permutation::new(vec![1, 0, 2]).unwrap();
    let swapped = apply_permutation(&path, &swap).unwrap();
    let enc = |g: &Graph| sin_cfg.encode(g, &mut stream(0, "unused", &[])).unwrap();
    let la = loss_value(&path, 0.5, &enc(&path), &path, 5.0, &sparams, &scfg).unwrap();
    let lb = loss_value(&swapped, 0.5, &enc(&swapped), &swapped, 5.0, &sparams, &scfg).unwrap();
    let witness = (la - lb).abs();

    verdict(
        encoding_exact && worst <= 1e-6 && witness > 1e-6,
        format!(
            "RRWP encodings exact: {encoding_exact}; forward max deviation {worst:.2e} on 20 pairs; \
             sinusoidal loss change under relabeling {witness:.2e}"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn modulation() -> Verdict {
    let enc = sinusoidal(9, 16);
    let mean = enc.channel_mean();
    let identity = modulate(&enc, 1.0) == enc;
    let mut mean_err: f64 = 0.0;
    let mut diff_err: f64 = 0.0;
    for (l, l2) in [(0.5, 2.0), (3.0, 0.0), (10.0, 1.0)] {
        let norm = modulate_normalized(&enc, l).unwrap();
        mean_err = mean_err.max((&norm.channel_mean() - &mean).iter().map(|x| x.abs()).fold(0.0, f64::max));
        let (a, b) = (modulate(&enc, l), modulate(&enc, l2));
        let d = &a.node_features - &b.node_features;
        for row in d.rows() {
            let e = (&row - &(&mean * (l - l2))).iter().map(|x| x.abs()).fold(0.0, f64::max);
            diff_err = diff_err.max(e);
        }
    }
    verdict(
        identity && mean_err <= 1e-12 && diff_err <= 1e-12,
        format!("λ=1 identity: {identity}; normalized mean drift {mean_err:.2e}; (λ−λ′)·mean residual {diff_err:.2e}"),
    )
}

// ---------------------------------------------------------------- 7

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn isomorphism() -> Verdict {
    let mut rng = stream(7, "accept-iso", &[]);
    let perms: Vec<Vec<Vec<usize>>> = (0..=7).map(permutations).collect();
    let mut disagreements = 0;
    let mut positives = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=7);
        let a = random_graph(n, 0.45, &mut rng);
        let mut b = apply_permutation(&a, &Permutation::random(n, &mut rng)).unwrap();
        if n > 1 && rng.random_bool(0.5) {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            if i != j {
                b.set_edge(i, j, 1 - b.edge(i, j));
            }
        }
        let brute = perms[n].iter().any(|m| apply_permutation(&a, &Permutation::new(m.clone()).unwrap()).unwrap() == b);
        positives += brute as usize;
        disagreements += (brute != is_isomorphic(&a, &b)) as usize;
    }
    verdict(
        disagreements == 0,
        format!("{disagreements} disagreements on 200 pairs ({positives} isomorphic)"),
    )
}

// ---------------------------------------------------------------- 8

fn metric_trivia() -> Verdict {
    let cfg = MetricConfig::default();
    let tree = FamilyParams::Tree;
    let path = |n: usize| Graph::from_edges(n, &(1..n).map(|i| (i - 1, i)).collect::<Vec<_>>());
    let star = |n: usize| Graph::from_edges(n, &(1..n).map(|i| (0, i)).collect::<Vec<_>>());
    let dup = vun(&vec![path(7); 5], &[star(7)], &tree, &cfg).unwrap();
    let copies = vun(&[path(6), star(6)], &[star(6), path(6)], &tree, &cfg).unwrap();
    let perfect = vun(&[path(6), star(6), path(5)], &[star(5)], &tree, &cfg).unwrap();
    let split = generate(&DatasetSpec::preset("sbm-desk").unwrap()).unwrap();
    let hist: Vec<Vec<f64>> = vec![vec![1.0, 3.0, 2.0], vec![0.0, 5.0]];
    let self_mmd = mmd(&hist, &hist, 1.0);
    let ratio = avg_ratio(&split.train, &split.train, &split.test, &cfg).unwrap();
    let pass = dup.uniqueness == 0.2
        && dup.novelty == 1.0
        && copies.novelty == 0.0
        && perfect.vun == 1.0
        && self_mmd == 0.0
        && ratio.avg_ratio == Some(1.0);
    verdict(
        pass,
        format!(
            "duplicates U={} (want 0.2); train copies N={}; perfect VUN={}; mmd(A,A)={self_mmd}; \
             avg_ratio(train,train,test)={:?}",
            dup.uniqueness, copies.novelty, perfect.vun, ratio.avg_ratio
        ),
    )
}

// ---------------------------------------------------------------- 9

/// Single edge present with probability `q` in the data; exact posterior.
struct ExactPosterior {
    q: f64,
    prior: Vec<f64>,
}

impl Predictor for ExactPosterior {
    fn predict(&self, g: &Graph, t: f64, _: &mut dyn RngCore) -> CoreResult<PosteriorPrediction> {
        let mut pred = PosteriorPrediction::one_hot(g);
        let data = [1.0 - self.q, self.q];
        let x = g.edge(0, 1);
        let w: Vec<f64> = (0..2).map(|x1| data[x1] * noising_marginal(x1, t, &self.prior).unwrap()[x]).collect();
        let z = w[0] + w[1];
        for (i, j) in [(0, 1), (1, 0)] {
            pred.edge_dists[[i, j, 0]] = w[0] / z;
            pred.edge_dists[[i, j, 1]] = w[1] / z;
        }
        Ok(pred)
    }
}

fn exact_posterior() -> Verdict {
    let prior = vec![0.5, 0.5];
    let q = 0.3;
    let model = ExactPosterior { q, prior: prior.clone() };
    let noise = NoiseDistribution::new(vec![1.0], prior).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for (k, d) in [Distortion::Identity, Distortion::Polynomial(2.0), Distortion::Cosine].into_iter().enumerate() {
        let policy = RatePolicy { distortion: d, ..RatePolicy::default() };
        let runs = 10_000;
        let hits = (0..runs)
            .filter(|&r| {
                let mut rng = stream(9, "accept-toy", &[k as u64, r as u64]);
                sample(&model, 2, &noise, &policy, &mut rng).unwrap().has_edge(0, 1)
            })
            .count();
        let rate = hits as f64 / runs as f64;
        pass &= (rate - q).abs() <= 0.02;
        parts.push(format!("{d}: {rate:.4}"));
    }
    verdict(pass, format!("terminal edge rate vs data {q}: {} (tolerance 0.02)", parts.join(", ")))
}

// ---------------------------------------------------------------- 10, 11

const DESK_EPOCHS: usize = 2000;

fn desk_trainer(encoding: EncodingConfig, schedule: PermutationSchedule, seed: u64) -> Trainer {
    let spec = DatasetSpec::preset("sbm-desk").unwrap();
    let split = generate(&spec).unwrap();
    let cfg = TrainConfig::desk(encoding.clone(), schedule, DESK_EPOCHS, seed);
    Trainer::new(cfg, &split, spec.params, desk_model(&encoding)).unwrap()
}

fn sinusoidal_cfg(lambda: f64) -> EncodingConfig {
    EncodingConfig::Sinusoidal { d: 16, lambda, normalized: false, coverage: 1.0 }
}

/// UN is only defined when some sample was valid.
fn un(row: &MetricsRow) -> Option<f64> {
    (row.vun.num_valid > 0).then(|| row.vun.un())
}

fn fmt_rows(rows: &[MetricsRow]) -> String {
    rows.iter()
        .map(|r| format!("{}:V{:.2}/UN{}", r.epoch, r.vun.validity, un(r).map_or("-".into(), |u| format!("{u:.2}"))))
        .collect::<Vec<_>>()
        .join(" ")
}

enum Outcome {
    Pass,
    Fail,
    Open,
}

/// Sinusoidal reaches V ≥ 0.6 strictly first, and later its UN drops below 0.9
/// while the baseline's UN never has.
fn judge_tradeoff(sin: &[MetricsRow], base: &[MetricsRow], finished: bool) -> Outcome {
    let first_valid = |rows: &[MetricsRow]| rows.iter().find(|r| r.vun.validity >= 0.6).map(|r| r.epoch);
    let Some(v_sin) = first_valid(sin) else {
        return if finished { Outcome::Fail } else { Outcome::Open };
    };
    if first_valid(base).is_some_and(|v| v <= v_sin) {
        return Outcome::Fail;
    }
    for (s, b) in sin.iter().zip(base) {
        if base.iter().take_while(|r| r.epoch <= b.epoch).any(|r| un(r).is_some_and(|u| u < 0.9)) {
            return Outcome::Fail;
        }
        if s.epoch > v_sin && un(s).is_some_and(|u| u < 0.9) {
            return Outcome::Pass;
        }
    }
    if finished {
        Outcome::Fail
    } else {
        Outcome::Open
    }
}

fn directional() -> Verdict {
    let start = Instant::now();
    let mut passes = 0;
    let mut fails = 0;
    let mut notes = Vec::new();
    for seed in 0..3u64 {
        if passes >= 2 || fails >= 2 {
            break;
        }
        let mut base = desk_trainer(EncodingConfig::Rrwp { k: 8 }, PermutationSchedule::Never, seed);
        let mut sin = desk_trainer(sinusoidal_cfg(1.0), PermutationSchedule::Never, seed);
        let (mut rb, mut rs) = (Vec::new(), Vec::new());
        let outcome = loop {
            let finished = base.is_finished();
            if let Outcome::Pass | Outcome::Fail = judge_tradeoff(&rs, &rb, finished) {
                break judge_tradeoff(&rs, &rb, finished);
            }
            if finished {
                break Outcome::Fail;
            }
            if let (_, Some(r)) = base.step().unwrap() {
                rb.push(r);
            }
            if let (_, Some(r)) = sin.step().unwrap() {
                rs.push(r);
            }
        };
        let ok = matches!(outcome, Outcome::Pass);
        passes += ok as usize;
        fails += (!ok) as usize;
        notes.push(format!(
            "seed {seed} {} at epoch {} [sin {}] [rrwp {}]",
            if ok { "pass" } else { "fail" },
            sin.epoch(),
            fmt_rows(&rs),
            fmt_rows(&rb)
        ));
        eprintln!("  criterion 10: {}", notes.last().unwrap());
    }
    verdict(
        passes >= 2,
        format!("{passes} of 3 seeds agree ({:.0}s on this machine)", start.elapsed().as_secs_f64()),
    )
}

fn breaking_restoring() -> Verdict {
    let start = Instant::now();
    let ramp = PermutationSchedule::TimeDependent(RampFamily::SmoothRamp { start: RAMP_START, end: RAMP_END, chi_final: RAMP_CHI });
    let step = PermutationSchedule::TimeDependent(RampFamily::Step { at: RAMP_START, chi: RAMP_CHI });
    let mut recovered = 0;
    let mut notes = Vec::new();
    for seed in 0..3u64 {
        if recovered >= 2 || (recovered + (3 - seed as usize)) < 2 {
            break;
        }
        let mut run = desk_trainer(sinusoidal_cfg(RAMP_LAMBDA), ramp, seed);
        let mut rows = Vec::new();
        let mut dipped = false;
        let mut ok = false;
        while !run.is_finished() {
            if let (_, Some(r)) = run.step().unwrap() {
                let u = un(&r);
                if dipped && u.is_some_and(|u| u >= 0.95) {
                    ok = true;
                }
                dipped |= u.is_some_and(|u| u < 0.9);
                rows.push(r);
                if ok {
                    break;
                }
            }
        }
        recovered += ok as usize;
        notes.push(format!("seed {seed}: dipped {dipped}, recovered {ok} [{}]", fmt_rows(&rows)));
        eprintln!("  criterion 11: {}", notes.last().unwrap());
    }

    // reported only: validity around the step switch
    let mut run = desk_trainer(sinusoidal_cfg(RAMP_LAMBDA), step, 0);
    let mut rows = Vec::new();
    while run.epoch() < RAMP_START as usize + 2 * run.config.eval_every {
        if let (_, Some(r)) = run.step().unwrap() {
            rows.push(r);
        }
    }
    let before = rows.iter().rev().find(|r| r.epoch <= RAMP_START as usize).map(|r| r.vun.validity);
    let after = rows.iter().find(|r| r.epoch > RAMP_START as usize).map(|r| r.vun.validity);
    eprintln!(
        "  criterion 11 (reported): step schedule validity {before:?} before the switch at epoch {RAMP_START}, {after:?} after [{}]",
        fmt_rows(&rows)
    );
    verdict(
        recovered >= 2,
        format!(
            "smooth-ramp UN recovery on {recovered} of 3 seeds; step validity {before:?} -> {after:?} across the switch ({:.0}s)",
            start.elapsed().as_secs_f64()
        ),
    )
}

const RAMP_LAMBDA: f64 = 1.0;
const RAMP_START: u64 = 1000;
const RAMP_END: u64 = 1600;
const RAMP_CHI: f64 = 5.0;

// ---------------------------------------------------------------- 12

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_symflow"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let cfg = p("train.json");
    std::fs::write(
        &cfg,
        r#"{
          "epochs": 6, "eval_every": 3, "samples_per_eval": 6,
          "encoding": { "kind": "sinusoidal", "d": 16, "lambda": 3.0 },
          "schedule": { "kind": "time_dependent", "family": "smooth_ramp", "start": 0, "end": 4, "chi_final": 1.0 },
          "policy": { "steps": 10, "omega": 0.1, "eta": 0.5, "distortion": "cosine" },
          "model": { "hidden_dim": 16, "num_layers": 2, "num_heads": 2, "pair_dim": 8 }
        }"#,
    )
    .unwrap();
    let mut ok = run_cli(&["--out", &s(&p("data")), "--seed", "5", "dataset", "--preset", "sbm-desk"]);
    ok &= run_cli(&["--out", &s(&p("data2")), "dataset", "--spec", &s(&p("data/manifest.json"))]);
    ok &= run_cli(&["--out", &s(&p("run")), "train", "--config", &s(&cfg), "--data", &s(&p("data"))]);
    ok &= run_cli(&["--out", &s(&p("rerun")), "train", "--config", &s(&p("run/manifest.json"))]);
    ok &= run_cli(&["--out", &s(&p("rerun2")), "--jobs", "1", "train", "--config", &s(&p("run/manifest.json"))]);
    let read = |q: &str| std::fs::read(p(q)).unwrap_or_default();
    let data_same = ["train.jsonl", "val.jsonl", "test.jsonl"]
        .iter()
        .all(|f| read(&format!("data/{f}")) == read(&format!("data2/{f}")));
    let csv = read("run/metrics.csv");
    let same = !csv.is_empty() && csv == read("rerun/metrics.csv") && csv == read("rerun2/metrics.csv");
    verdict(
        ok && data_same && same,
        format!(
            "commands succeeded: {ok}; dataset rerun identical: {data_same}; metrics CSV identical over 3 runs: {same} ({} rows)",
            String::from_utf8_lossy(&csv).lines().count().saturating_sub(1)
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 12] = [
        (1, "noising marginals", noising),
        (2, "Kolmogorov transport", kolmogorov),
        (3, "detailed balance", detailed_balance),
        (4, "gradient fidelity", gradient),
        (5, "equivariance suite", equivariance),
        (6, "modulation algebra", modulation),
        (7, "isomorphism oracle", isomorphism),
        (8, "metric trivia", metric_trivia),
        (9, "exact-posterior sampler", exact_posterior),
        (10, "early validity vs. later UN collapse (desk SBM)", directional),
        (11, "breaking-restoring with a smooth ramp", breaking_restoring),
        (12, "manifest rerun determinism", determinism),
    ];
    let only: Option<Vec<u32>> = std::env::var("SYMFLOW_ACCEPT")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        failed += (!v.pass) as usize;
        println!(
            "{} criterion {id:>2} ({name}): {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
