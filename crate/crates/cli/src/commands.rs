use std::path::Path;

use geoc::dataio::{read_dataset, write_dataset};
use geoc::metrics::evaluate_fitted;
use geoc::model::TrainConfig;
use geoc::pipeline::{eighth_ratio_splits, load_reducer, save_reducer, FitOptions, FittedReducer};
use geoc::sweep::{run_sweep, sweep_csv, SweepPlan};
use geoc::synth::{gen_lifted_moons, gen_line, gen_swiss_roll, train_eval_split};
use geoc::{
    DatasetSplit, EmbeddingDataset, Error, EvalReport, Execution, Format, ReducerSpec, Result,
};

use crate::{
    Cli, Command, EvalArgs, GenArgs, Generator, KindArg, ReduceArgs, SpecArgs, SplitFamily,
    SweepArgs, SweepKind, TrainArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let io = Io {
        format: cli.global.format.map(Format::from),
    };
    let seed = cli.global.seed;
    match &cli.command {
        Command::Reduce(a) => reduce(a, &io),
        Command::Eval(a) => eval(a, &io, seed),
        Command::Sweep(a) => sweep(a, &io, seed),
        Command::Gen(a) => generate(a, &io, seed),
    }
}

struct Io {
    format: Option<Format>,
}

impl Io {
    fn format(&self, path: &Path) -> Format {
        self.format.unwrap_or_else(|| Format::from_path(path))
    }

    fn read(&self, path: &Path) -> Result<EmbeddingDataset> {
        read_dataset(path, self.format(path))
    }

    fn write(&self, ds: &EmbeddingDataset, path: &Path) -> Result<()> {
        write_dataset(ds, path, self.format(path))
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn spec_from(a: &SpecArgs) -> Result<ReducerSpec> {
    let kind = a
        .kind
        .ok_or_else(|| invalid("--kind is required when no reducer file is given"))?;
    let mut spec = match kind {
        KindArg::Pca | KindArg::Isomap => {
            if a.isomap_dim.is_some() || a.pca_dim.is_some() {
                return Err(invalid(
                    "--isomap-dim/--pca-dim only apply to --kind concat; use --dim",
                ));
            }
            let dim = a
                .dim
                .ok_or_else(|| invalid("--dim is required for pca and isomap"))?;
            if kind == KindArg::Pca {
                ReducerSpec::pca(dim)
            } else {
                ReducerSpec::isomap(dim, a.k)
            }
        }
        KindArg::Concat => {
            let (iso, pca) = match (a.isomap_dim, a.pca_dim) {
                (Some(i), Some(p)) => (i, p),
                _ => return Err(invalid("--kind concat needs --isomap-dim and --pca-dim")),
            };
            if a.dim.is_some_and(|d| d != iso + pca) {
                return Err(invalid("--dim must equal --isomap-dim + --pca-dim"));
            }
            ReducerSpec::concat(iso, pca, a.k)
        }
    };
    spec.k_neighbors = a.k;
    spec.entry_k = a.entry_k;
    spec.zscore = a.zscore;
    spec.validate()?;
    Ok(spec)
}

fn fit_options(memory_limit: u64) -> FitOptions {
    FitOptions {
        memory_limit,
        ..FitOptions::default()
    }
}

fn train_config(t: &TrainArgs, seed: u64) -> Result<TrainConfig> {
    if t.runs == 0 {
        return Err(invalid("--runs must be at least 1"));
    }
    Ok(TrainConfig {
        learning_rate: t.lr,
        epochs: t.epochs,
        batch_size: t.batch_size,
        seed,
        ..TrainConfig::default()
    })
}

fn load_split(io: &Io, train: &Path, eval: &Path) -> Result<DatasetSplit> {
    let train = io.read(train)?;
    train.require_labels()?;
    let eval = io.read(eval)?;
    eval.require_labels()?;
    DatasetSplit::new(train, eval)
}

fn reduce(a: &ReduceArgs, io: &Io) -> Result<()> {
    let spec = spec_from(&a.spec)?;
    let train = io.read(&a.train)?;
    let reducer = FittedReducer::fit_with(&spec, &train, &fit_options(a.spec.memory_limit))?;
    save_reducer(&reducer, &a.out)?;

    if let Some(path) = &a.train_out {
        io.write(&reducer.transform(&train)?, path)?;
    }
    if let (Some(input), Some(output)) = (&a.apply, &a.apply_out) {
        let ds = io.read(input)?;
        io.write(&reducer.transform(&ds)?, output)?;
    }
    if a.dump_graph.is_some() || a.dump_geodesics.is_some() {
        let iso = reducer
            .isomap()
            .ok_or_else(|| invalid("--dump-graph/--dump-geodesics need an Isomap block"))?;
        if let Some(path) = &a.dump_graph {
            iso.graph().write_edge_csv(path)?;
        }
        if let Some(path) = &a.dump_geodesics {
            io.write(&iso.geodesics().to_dataset()?, path)?;
        }
    }

    println!("reducer    {}", a.out.display());
    println!("kind       {}", spec.kind);
    println!("train      n={} d={}", train.n(), train.d());
    let (iso_dim, pca_dim) = spec.block_dims();
    println!(
        "output     {} dims (isomap {iso_dim}, pca {pca_dim}){}",
        reducer.output_dim(),
        if spec.zscore { ", z-scored" } else { "" }
    );
    if let Some(iso) = reducer.isomap() {
        let ev = iso.eigenvalues();
        println!(
            "graph      k={} edges={} bridged={}",
            iso.k(),
            iso.graph().edge_count(),
            iso.graph().bridged_edges().len()
        );
        println!(
            "spectrum   {} positive eigenvalues kept, {:.6e} .. {:.6e}",
            ev.len(),
            ev[0],
            ev[ev.len() - 1]
        );
    }
    if let Some(pca) = reducer.pca() {
        let ev = pca.explained_variance();
        println!(
            "pca        explained variance {:.6e} total",
            ev.iter().sum::<f64>()
        );
    }
    Ok(())
}

fn print_report(report: &EvalReport) {
    println!("{:>6}  {:>9}  {:>9}", "seed", "accuracy", "matthews");
    for r in &report.runs {
        println!("{:>6}  {:>9.4}  {:>9.4}", r.seed, r.accuracy, r.matthews);
    }
    println!(
        "{:>6}  {:>9.4}  {:>9.4}",
        "mean", report.mean_accuracy, report.mean_matthews
    );
}

fn eval(a: &EvalArgs, io: &Io, seed: u64) -> Result<()> {
    let cfg = train_config(&a.training, seed)?;
    let split = load_split(io, &a.train, &a.eval)?;
    let reducer = match &a.reducer {
        Some(path) => {
            if a.spec.kind.is_some() {
                return Err(invalid("give either --reducer or --kind, not both"));
            }
            load_reducer(path)?
        }
        None => FittedReducer::fit_with(
            &spec_from(&a.spec)?,
            &split.train,
            &fit_options(a.spec.memory_limit),
        )?,
    };
    let seeds: Vec<u64> = (0..a.training.runs as u64)
        .map(|r| seed.wrapping_add(r))
        .collect();
    let report = evaluate_fitted(&reducer, &split, &cfg, &seeds, Execution::default())?;
    if let Some(path) = &a.report {
        report.write_csv(path)?;
    }
    let spec = reducer.spec();
    let (iso, pca) = spec.block_dims();
    println!(
        "{} isomap={iso} pca={pca} k={}",
        spec.kind, spec.k_neighbors
    );
    print_report(&report);
    Ok(())
}

fn parse_split(s: &str) -> Result<(usize, usize)> {
    let bad = || invalid(format!("split `{s}` is not of the form ISO/PCA"));
    let (i, p) = s.split_once('/').ok_or_else(bad)?;
    Ok((
        i.trim().parse().map_err(|_| bad())?,
        p.trim().parse().map_err(|_| bad())?,
    ))
}

fn sweep(a: &SweepArgs, io: &Io, seed: u64) -> Result<()> {
    let cfg = train_config(&a.training, seed)?;
    let plan = match a.kind {
        SweepKind::PcaDims => SweepPlan::PcaDims(a.dims.clone()),
        SweepKind::ConcatSplits if !a.custom_splits.is_empty() => SweepPlan::ConcatSplits(
            a.custom_splits
                .iter()
                .map(|s| parse_split(s))
                .collect::<Result<_>>()?,
        ),
        SweepKind::ConcatSplits => match a.splits {
            SplitFamily::Quarters => SweepPlan::default_concat_splits(a.total),
            SplitFamily::Eighths => SweepPlan::ConcatSplits(eighth_ratio_splits(a.total)),
        },
    };
    let split = load_split(io, &a.train, &a.eval)?;
    let rows = run_sweep(
        &plan,
        a.k,
        a.zscore,
        &split,
        &cfg,
        a.training.runs,
        &fit_options(a.memory_limit),
    );
    std::fs::write(&a.out, sweep_csv(&rows)).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;

    println!("{:>8}  {:>9}  {:>9}", "point", "accuracy", "matthews");
    for row in &rows {
        match &row.outcome {
            Ok(r) => println!(
                "{:>8}  {:>9.4}  {:>9.4}",
                row.label, r.mean_accuracy, r.mean_matthews
            ),
            Err(e) => {
                println!("{:>8}  {:>9}  {:>9}", row.label, "failed", "-");
                eprintln!("warning: {}: {e}", row.label);
            }
        }
    }
    // Partial failures are reported but only fail the sweep when nothing
    // succeeded.
    if rows.iter().all(|r| r.outcome.is_err()) {
        if let Some(row) = rows.into_iter().next() {
            row.outcome?;
        }
    }
    Ok(())
}

fn generate(a: &GenArgs, io: &Io, seed: u64) -> Result<()> {
    let sample = match a.kind {
        Generator::SwissRoll => gen_swiss_roll(a.n, a.noise, seed)?,
        Generator::Moons => gen_lifted_moons(a.n, a.dim, seed)?,
        Generator::Line => gen_line(a.n, a.dim, seed)?,
    };
    if let Some(path) = &a.latent {
        sample.write_latent_csv(path)?;
    }
    match (&a.eval_out, a.eval_fraction) {
        (Some(eval_path), Some(fraction)) => {
            let split = train_eval_split(&sample.dataset, fraction, seed)?;
            io.write(&split.train, &a.out)?;
            io.write(&split.eval, eval_path)?;
            println!(
                "wrote {} (n={}) and {} (n={}), d={}",
                a.out.display(),
                split.train.n(),
                eval_path.display(),
                split.eval.n(),
                sample.dataset.d()
            );
        }
        _ => {
            io.write(&sample.dataset, &a.out)?;
            println!(
                "wrote {} (n={}, d={})",
                a.out.display(),
                sample.dataset.n(),
                sample.dataset.d()
            );
        }
    }
    Ok(())
}
