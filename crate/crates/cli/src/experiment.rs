use std::path::Path;

use fuzzkd::config::{DataSource, ExperimentConfig, FitnessKind, TeacherKind};
use fuzzkd::dataset::{balance, split as split_tree, DatasetManifest, SplitName};
use fuzzkd::ga::{run as run_ga, Fitness, GaOutcome, GenomeSpec, OneMax, Sphere, StopReason};
use fuzzkd::loss::{argmax, softmax_rows};
use fuzzkd::metrics::{confusion, per_class_auc, summarize, MetricsReport, Predictions};
use fuzzkd::nn::data::load_image_split;
use fuzzkd::nn::{
    decode_genome, gaussian_blobs, genome_spec, split_dataset, train_distill, train_teacher,
    Checkpoint, Dataset, NetKind, NetworkSpec, ProxyDistill, Region, Splits, SyntheticTeacher,
    Teacher,
};
use fuzzkd::{Error, Result};
use serde::Serialize;

struct Prepared {
    splits: Splits,
    class_names: Vec<String>,
    manifest: Option<DatasetManifest>,
}

fn prepare_data(cfg: &ExperimentConfig) -> Result<Prepared> {
    match cfg.data.source {
        DataSource::Blobs => {
            let data = gaussian_blobs(&cfg.data.blobs, cfg.seed)?;
            Ok(Prepared {
                splits: split_dataset(&data, &cfg.data.ratios, cfg.seed)?,
                class_names: (0..data.classes).map(|c| format!("class_{c}")).collect(),
                manifest: None,
            })
        }
        DataSource::Images => {
            let root = cfg
                .data
                .root
                .as_deref()
                .ok_or_else(|| Error::Config(vec!["data.root is not set".into()]))?;
            let mut m = split_tree(root, &cfg.data.ratios, cfg.seed)?;
            if cfg.data.balance {
                m = balance(&m, SplitName::Train, cfg.seed)?;
                m = balance(&m, SplitName::Valid, cfg.seed)?;
            }
            let size = cfg.data.image_size;
            let splits = Splits {
                train: load_image_split(root, &m, SplitName::Train, size)?,
                valid: load_image_split(root, &m, SplitName::Valid, size)?,
                test: load_image_split(root, &m, SplitName::Test, size)?,
            };
            Ok(Prepared {
                splits,
                class_names: m.classes.clone(),
                manifest: Some(m),
            })
        }
    }
}

fn student_spec(cfg: &ExperimentConfig, data: &Dataset) -> Result<NetworkSpec> {
    let spec = match (cfg.train.student_kind, cfg.train.conv) {
        (NetKind::MicroCnn, Some(conv)) => {
            NetworkSpec::micro_cnn(data.shape, conv, &cfg.train.student_hidden, data.classes)
        }
        _ => NetworkSpec {
            input: data.shape,
            ..NetworkSpec::mlp(
                data.shape.features(),
                &cfg.train.student_hidden,
                data.classes,
            )
        },
    };
    spec.validate()?;
    Ok(spec)
}

fn class_means(data: &Dataset) -> Vec<Vec<f64>> {
    let d = data.features.cols();
    let mut sums = vec![vec![0.0; d]; data.classes];
    let mut counts = vec![0usize; data.classes];
    for (row, &y) in data.features.iter_rows().zip(&data.labels) {
        counts[y] += 1;
        for (s, v) in sums[y].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    }
    sums
}

fn build_teacher(cfg: &ExperimentConfig, data: &Splits) -> Result<Teacher> {
    let train = &data.train;
    match cfg.train.teacher {
        TeacherKind::Network => {
            let spec = NetworkSpec {
                input: train.shape,
                ..NetworkSpec::mlp(
                    train.shape.features(),
                    &cfg.train.teacher_hidden,
                    train.classes,
                )
            };
            let out = train_teacher(&spec, data, &cfg.train_config())?;
            log::info!("teacher val accuracy {:.4}", out.history.best_val_accuracy);
            Ok(Teacher::Network(out.best))
        }
        TeacherKind::Synthetic => {
            let regions = class_means(train)
                .into_iter()
                .enumerate()
                .map(|(class, center)| Region {
                    center,
                    class,
                    confidence: cfg.train.teacher_confidence,
                })
                .collect();
            Ok(Teacher::Synthetic(SyntheticTeacher::new(
                train.classes,
                regions,
            )?))
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

pub fn train(cfg: &ExperimentConfig, output: &Path) -> Result<()> {
    let data = prepare_data(cfg)?;
    let teacher = build_teacher(cfg, &data.splits)?;
    let spec = student_spec(cfg, &data.splits.train)?;
    let mut out = train_distill(
        &teacher,
        &spec,
        &data.splits,
        &cfg.train_config(),
        &cfg.fuzzy,
    )?;
    out.checkpoint.metadata.class_names = data.class_names;
    out.checkpoint.save(&output.join("checkpoint.fkdm"))?;
    write_text(
        &output.join("history.json"),
        &(out.history.to_json() + "\n"),
    )?;
    if let Some(m) = data.manifest {
        m.save(&output.join("manifest.json"))?;
    }
    let h = &out.history;
    let test = h
        .test_accuracy
        .map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
    println!(
        "best_epoch={} val_accuracy={:.4} test_accuracy={test}",
        h.best_epoch, h.best_val_accuracy
    );
    Ok(())
}

#[derive(Serialize)]
struct SelectSummary {
    fitness: FitnessKind,
    genes: Vec<i64>,
    best_fitness: f64,
    stop_reason: StopReason,
    generations: usize,
    evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    candidate: Option<NetworkSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    learning_rate: Option<f64>,
}

pub fn select(cfg: &ExperimentConfig, output: &Path) -> Result<()> {
    let ga = cfg.ga.ga_config(cfg.seed);
    let stop = cfg.ga.stopping();
    let builtin = || GenomeSpec::uniform(cfg.ga.genome_length, cfg.ga.gene_min, cfg.ga.gene_max);
    let run = |spec: &GenomeSpec, f: &dyn Fitness| run_ga(spec, &ga, &stop, f);
    let (outcome, decoded): (GaOutcome, Option<(NetworkSpec, f64)>) = match cfg.ga.fitness {
        FitnessKind::Onemax => (run(&builtin()?, &OneMax)?, None),
        FitnessKind::Sphere => (run(&builtin()?, &Sphere)?, None),
        FitnessKind::ProxyDistill => {
            let data = prepare_data(cfg)?;
            let teacher = build_teacher(cfg, &data.splits)?;
            let proxy = ProxyDistill {
                data: &data.splits,
                teacher: &teacher,
                engine: cfg.fuzzy,
                base: cfg.train_config(),
                budget_epochs: cfg.ga.budget_epochs,
            };
            let outcome = run(&genome_spec(), &proxy)?;
            let train = &data.splits.train;
            let decoded = decode_genome(&outcome.best.genes, train.shape, train.classes)?;
            (outcome, Some(decoded))
        }
    };
    let summary = SelectSummary {
        fitness: cfg.ga.fitness,
        genes: outcome.best.genes.clone(),
        best_fitness: outcome.best.fitness.unwrap_or(f64::NEG_INFINITY),
        stop_reason: outcome.stop_reason,
        generations: outcome.history.len(),
        evaluations: outcome.evaluations,
        candidate: decoded.as_ref().map(|d| d.0.clone()),
        learning_rate: decoded.map(|d| d.1),
    };
    write_text(&output.join("best.json"), &to_json(&summary))?;
    write_text(&output.join("ga_history.json"), &to_json(&outcome.history))?;
    println!(
        "best_fitness={} generations={}",
        summary.best_fitness, summary.generations
    );
    Ok(())
}

fn save_report(report: &MetricsReport, output: &Path) -> Result<()> {
    write_text(output, &(report.to_json() + "\n"))?;
    println!(
        "accuracy={:.4} macro_f1={:.4}",
        report.accuracy, report.macro_avg.f1
    );
    Ok(())
}

pub fn evaluate_checkpoint(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    split: SplitName,
    output: &Path,
) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let net = ck.to_network()?;
    let data = prepare_data(cfg)?;
    let set = match split {
        SplitName::Train => &data.splits.train,
        SplitName::Valid => &data.splits.valid,
        SplitName::Test => &data.splits.test,
    };
    if set.is_empty() {
        return Err(Error::Dataset(format!("{} split is empty", split.name())));
    }
    if net.spec().input != set.shape || net.spec().classes != set.classes {
        return Err(Error::Dataset(format!(
            "checkpoint expects {:?} with {} classes, data has {:?} with {}",
            net.spec().input,
            net.spec().classes,
            set.shape,
            set.classes
        )));
    }
    let logits = net.forward(&set.features)?;
    let predicted: Vec<usize> = logits.iter_rows().map(argmax).collect();
    let scores: Vec<Vec<f64>> = softmax_rows(&logits, 1.0)?
        .iter_rows()
        .map(<[f64]>::to_vec)
        .collect();
    let mut report = summarize(&confusion(&set.labels, &predicted, set.classes)?);
    report.auc = per_class_auc(&scores, &set.labels, set.classes)?;
    if ck.metadata.class_names.len() == set.classes {
        report.class_names = ck.metadata.class_names.clone();
    } else {
        report.class_names = data.class_names;
    }
    save_report(&report, output)
}

pub fn evaluate_predictions(csv: &Path, output: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv).map_err(|e| Error::Io {
        path: csv.to_path_buf(),
        source: e,
    })?;
    save_report(&Predictions::parse_csv(&text)?.report()?, output)
}

pub fn report(input: &Path, output: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::Io {
        path: input.to_path_buf(),
        source: e,
    })?;
    let rendered = MetricsReport::from_json(&text)?.render();
    match output {
        Some(path) => write_text(path, &rendered),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}
