use crate::config::{load_dataset_dir, load_spec, load_train_file, resolve_dataset, SweepGrid};
use crate::{EvalArgs, SampleArgs};
use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use std::fs;
use std::io::Write;
use std::path::Path;
use symflow_core::datasets::{generate, DatasetSpec};
use symflow_core::denoiser::{load_checkpoint, Denoiser};
use symflow_core::eval::{avg_ratio, vun};
use symflow_core::flow::sample as flow_sample;
use symflow_core::graph::{read_jsonl, write_jsonl, Graph};
use symflow_core::rng::stream;
use symflow_core::training::{train as run_training, RunManifest};
use symflow_core::{MetricConfig, NoiseDistribution, RatePolicy};

fn check_jsonl(path: &Path, expected: usize) -> Result<()> {
    let n = read_jsonl(path, 1, 2)?.len();
    ensure!(n == expected, "{} holds {n} graphs, expected {expected}", path.display());
    Ok(())
}

pub fn dataset(out: &Path, seed: Option<u64>, spec: Option<&Path>, preset: Option<&str>) -> Result<()> {
    let mut spec = match (spec, preset) {
        (Some(path), _) => load_spec(path)?,
        (None, Some(name)) => DatasetSpec::preset(name)?,
        (None, None) => bail!("pass --spec FILE or --preset NAME"),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    let split = generate(&spec)?;
    for (name, graphs) in [("train.jsonl", &split.train), ("val.jsonl", &split.val), ("test.jsonl", &split.test)] {
        write_jsonl(&out.join(name), graphs)?;
        check_jsonl(&out.join(name), graphs.len())?;
    }
    let mut manifest = RunManifest::new("dataset", spec.seed);
    manifest.family = Some(spec.params.clone());
    manifest.dataset = Some(spec);
    manifest.outputs = vec!["train.jsonl".into(), "val.jsonl".into(), "test.jsonl".into()];
    manifest.write(out)?;
    eprintln!(
        "wrote {}/{}/{} graphs to {}",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        out.display()
    );
    Ok(())
}

pub fn train(
    out: &Path,
    seed: Option<u64>,
    config: &Path,
    data: Option<&Path>,
    epochs: Option<usize>,
    resume: bool,
) -> Result<()> {
    let mut file = load_train_file(config)?;
    if let Some(dir) = data {
        file.data = Some(dir.to_path_buf());
    }
    if let Some(s) = seed {
        file.train.seed = s;
    }
    if let Some(e) = epochs {
        file.train.epochs = e;
        file.train.eval_every = file.train.eval_every.min(e.max(1));
    }
    let (spec, split) = resolve_dataset(&file)?;
    let model = file.model.build(&file.train.encoding);
    let mut manifest = RunManifest::new("train", file.train.seed);
    manifest.dataset = Some(spec.clone());
    let outcome = run_training(&file.train, &split, &spec.params, &model, out, &manifest, resume)?;
    let csv = fs::read_to_string(out.join("metrics.csv"))?;
    ensure!(
        csv.lines().next() == Some(symflow_core::training::METRICS_HEADER),
        "metrics file has an unexpected header"
    );
    match outcome.rows.last() {
        Some(r) => eprintln!("epoch {}: {}", r.epoch, r.to_csv()),
        None => eprintln!("no evaluation rows written"),
    }
    Ok(())
}

pub fn sample(out: &Path, seed: Option<u64>, args: &SampleArgs) -> Result<()> {
    let (params, config, encoding) =
        load_checkpoint(&args.checkpoint, None).with_context(|| format!("loading {}", args.checkpoint.display()))?;
    config.ensure_classes(1, 2)?;
    let policy = RatePolicy {
        omega: args.omega,
        eta: args.eta,
        distortion: args.distortion,
        steps: args.steps,
    };
    policy.validate()?;
    let train = match &args.data {
        Some(dir) => Some(load_dataset_dir(dir)?.1.train),
        None => None,
    };
    let sizes: Vec<usize> = match (args.nodes, &train) {
        (Some(n), _) => vec![n],
        (None, Some(t)) => t.iter().map(Graph::num_nodes).collect(),
        (None, None) => bail!("pass --nodes N or --data DIR to fix sample sizes"),
    };
    ensure!(sizes.iter().all(|&n| n > 0), "node counts must be positive");
    let noise = match (&train, args.uniform_noise) {
        (Some(t), false) => NoiseDistribution::empirical(t, 1, 2),
        _ => NoiseDistribution::uniform(1, 2),
    };
    let seed = seed.unwrap_or(0);
    let model = Denoiser { params, config, encoding };
    let graphs: Vec<Graph> = (0..args.count)
        .into_par_iter()
        .map(|k| {
            use rand::Rng;
            let mut rng = stream(seed, "cli-sample", &[k as u64]);
            let n = sizes[rng.random_range(0..sizes.len())];
            flow_sample(&model, n, &noise, &policy, &mut rng)
        })
        .collect::<symflow_core::Result<_>>()?;
    let path = out.join("samples.jsonl");
    write_jsonl(&path, &graphs)?;
    check_jsonl(&path, args.count)?;
    let mut manifest = RunManifest::new("sample", seed);
    manifest.model = Some(model.config.clone());
    manifest.policy = Some(policy);
    manifest.extra = Some(serde_json::json!({
        "checkpoint": args.checkpoint,
        "count": args.count,
        "data": args.data,
        "nodes": args.nodes,
        "noise": noise,
        "encoding": model.encoding,
    }));
    manifest.outputs = vec!["samples.jsonl".into()];
    manifest.write(out)?;
    eprintln!("wrote {} samples to {}", args.count, path.display());
    Ok(())
}

pub fn eval(out: &Path, args: &EvalArgs) -> Result<()> {
    let generated = read_jsonl(&args.generated, 1, 2).with_context(|| format!("reading {}", args.generated.display()))?;
    let (spec, mut train, mut test) = match &args.data {
        Some(dir) => {
            let (spec, split) = load_dataset_dir(dir)?;
            (Some(spec), split.train, split.test)
        }
        None => (None, Vec::new(), Vec::new()),
    };
    if let Some(p) = &args.train {
        train = read_jsonl(p, 1, 2)?;
    }
    if let Some(p) = &args.test {
        test = read_jsonl(p, 1, 2)?;
    }
    let spec = match (&args.spec, spec) {
        (Some(p), _) => load_spec(p)?,
        (None, Some(s)) => s,
        (None, None) => bail!("pass --data DIR or --spec FILE to name the graph family"),
    };
    let metrics = MetricConfig {
        strict_uniqueness: args.strict_uniqueness,
        ..MetricConfig::default()
    };
    let vun_report = vun(&generated, &train, &spec.params, &metrics)?;
    let ratio = avg_ratio(&generated, &train, &test, &metrics)?;
    let report = serde_json::json!({
        "vun": vun_report,
        "ratio": ratio,
        "metrics": metrics,
        "family": spec.params,
        "validity_note": match spec.params {
            symflow_core::FamilyParams::ErdosRenyi { .. } | symflow_core::FamilyParams::BarabasiAlbert { .. } =>
                "validity for this family is a statistical test of our own construction",
            _ => "",
        },
    });
    let path = out.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    serde_json::from_str::<serde_json::Value>(&fs::read_to_string(&path)?)?;
    let mut manifest = RunManifest::new("eval", 0);
    manifest.dataset = Some(spec);
    manifest.metrics = Some(metrics);
    manifest.extra = Some(serde_json::json!({ "generated": args.generated, "train": args.train, "test": args.test, "data": args.data }));
    manifest.outputs = vec!["report.json".into()];
    manifest.write(out)?;
    println!(
        "validity {:.4} uniqueness {:.4} novelty {:.4} vun {:.4} avg_ratio {}",
        vun_report.validity,
        vun_report.uniqueness,
        vun_report.novelty,
        vun_report.vun,
        ratio.avg_ratio.map_or("n/a".into(), |r| format!("{r:.4}"))
    );
    Ok(())
}

/// Minimum of uniqueness·novelty over a run's metrics rows.
fn min_un(rows: &[symflow_core::training::MetricsRow]) -> Option<f64> {
    rows.iter().map(|r| r.vun.un()).reduce(f64::min)
}

pub fn sweep(out: &Path, seed: Option<u64>, grid_path: &Path) -> Result<()> {
    let grid = SweepGrid::load(grid_path)?;
    let seed = seed.unwrap_or(0);
    let (spec, split) = match (&grid.data, &grid.dataset) {
        (Some(dir), _) => load_dataset_dir(dir)?,
        (None, Some(s)) => (s.clone(), generate(s)?),
        (None, None) => {
            let s = DatasetSpec::preset("sbm-desk")?;
            (s.clone(), generate(&s)?)
        }
    };
    let cells: Vec<(usize, usize)> = (0..grid.lambdas.len())
        .flat_map(|i| (0..grid.schedules.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(i, j)| -> Result<Option<f64>> {
            let cfg = grid.cell_config(grid.lambdas[i], grid.schedules[j], seed);
            let model = grid.model.build(&cfg.encoding);
            let dir = out.join(format!("cell_{i}_{j}"));
            let mut manifest = RunManifest::new("train", seed);
            manifest.dataset = Some(spec.clone());
            let outcome = run_training(&cfg, &split, &spec.params, &model, &dir, &manifest, false)?;
            Ok(min_un(&outcome.rows))
        })
        .collect::<Result<_>>()?;

    let header: Vec<String> = std::iter::once("lambda".to_string())
        .chain(grid.schedules.iter().map(|s| s.to_string()))
        .collect();
    let mut values = fs::File::create(out.join("sweep.csv"))?;
    let mut phases = fs::File::create(out.join("phase.csv"))?;
    writeln!(values, "{}", header.join(","))?;
    writeln!(phases, "{}", header.join(","))?;
    for (i, lambda) in grid.lambdas.iter().enumerate() {
        let row = &results[i * grid.schedules.len()..(i + 1) * grid.schedules.len()];
        let fmt = |v: &Option<f64>| v.map_or("nan".to_string(), |x| x.to_string());
        let label = |v: &Option<f64>| match v {
            Some(x) if *x >= 1.0 => "stable",
            Some(_) => "broken",
            None => "unevaluated",
        };
        writeln!(values, "{lambda},{}", row.iter().map(fmt).collect::<Vec<_>>().join(","))?;
        writeln!(phases, "{lambda},{}", row.iter().map(label).collect::<Vec<_>>().join(","))?;
    }
    let mut manifest = RunManifest::new("sweep", seed);
    manifest.dataset = Some(spec);
    manifest.extra = Some(serde_json::to_value(&grid)?);
    manifest.outputs = vec!["sweep.csv".into(), "phase.csv".into()];
    manifest.outputs.extend(cells.iter().map(|(i, j)| format!("cell_{i}_{j}")));
    manifest.write(out)?;
    let written = fs::read_to_string(out.join("sweep.csv"))?;
    ensure!(written.lines().count() == grid.lambdas.len() + 1, "sweep table is incomplete");
    eprintln!("{written}");
    Ok(())
}
