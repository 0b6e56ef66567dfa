use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use tssn_core::embed::{export_embeddings, import_embeddings, sgd_train_tied, EmbeddingMatrix};
use tssn_core::eval::{
    evaluate_embeddings, fit_link_scorer, parameter_sweep, recommend, run_experiment, write_sweep_table,
    ExperimentConfig, LinkScorer, SweepGrid,
};
use tssn_core::ingest::{apply_alias_map, clean_and_index, parse_aliases, parse_events, parse_roles, EventFormat};
use tssn_core::sampler::{generate_corpus, read_corpus, token_labels, write_corpus, TokenMode};
use tssn_core::stats::{generate_synthetic_log, role_ttest, tendency_ratio};
use tssn_core::tssn::build_tssn;
use tssn_core::{rng, RoleTable, TemporalEdgeList, TssnGraph};

use crate::args::{Command, Common, EvalArgs, Input, Snapshots, TrainArgs, WalkArgs};
use crate::error::CliError;

/// Files a command read and wrote, for the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub artifacts: Vec<String>,
}

const CLASSIFIER_STREAM: u64 = 5;

pub fn execute(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Ingest { common, input } => ingest(common, input),
        Command::Stats { common, input } => stats(common, input),
        Command::Build {
            common,
            input,
            snapshots,
        } => build(common, input, snapshots),
        Command::Walk {
            common,
            input,
            snapshots,
            walk,
        } => walk_cmd(common, input, snapshots, walk),
        Command::Embed {
            common,
            train,
            corpus,
            tokens,
        } => embed(common, train, corpus, tokens),
        Command::Evaluate {
            common,
            input,
            snapshots,
            walk,
            train,
            eval,
            embeddings,
        } => evaluate(common, input, snapshots, walk, train, eval, embeddings.as_deref()),
        Command::Sweep {
            common,
            input,
            snapshots,
            walk,
            train,
            eval,
            grid_r,
            grid_q,
            grid_alpha,
            grid_beta,
            grid_role_mode,
        } => {
            let grid = SweepGrid {
                r: grid_r.clone(),
                q: grid_q.clone(),
                alpha: grid_alpha.clone(),
                beta: grid_beta.clone(),
                role_mode: grid_role_mode.clone(),
            };
            sweep(common, input, snapshots, walk, train, eval, &grid)
        }
        Command::FitClassifier {
            common,
            input,
            eval,
            embeddings,
        } => fit_classifier(common, input, eval, embeddings),
        Command::Recommend {
            common,
            input,
            embeddings,
            classifier,
            target,
            k,
            cross_role_only,
        } => recommend_cmd(common, input, embeddings, classifier, target, *k, *cross_role_only),
        Command::Synth { common, synth } => {
            let log = generate_synthetic_log(&synth.spec(common.seed))?;
            let mut out = Outcome::default();
            out.artifacts
                .push(write_artifact(common, "events.tsv", |w| log.edges.write_events(w))?);
            out.artifacts.push(write_artifact(common, "roles.tsv", |w| {
                log.roles.write_roles(&log.edges, w)
            })?);
            out.artifacts.push(write_artifact(common, "communities.tsv", |w| {
                writeln!(w, "key\tsnapshot\tcommunity")?;
                for (snap, members) in log.communities.iter().enumerate() {
                    let sorted: BTreeMap<_, _> = members.iter().collect();
                    for (key, c) in sorted {
                        writeln!(w, "{key}\t{snap}\t{c}")?;
                    }
                }
                Ok(())
            })?);
            eprintln!(
                "{} events among {} individuals",
                log.edges.len(),
                log.edges.vertex_count()
            );
            Ok(out)
        }
        Command::Rerun { .. } => unreachable!("rerun is resolved before execution"),
    }
}

fn open(path: &Path, hint: &str) -> Result<BufReader<File>, CliError> {
    if !path.exists() {
        return Err(CliError::missing(path, hint));
    }
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

/// Writes `<out>/<name>` and returns `name`.
fn write_artifact<F>(common: &Common, name: &str, body: F) -> Result<String, CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    fs::create_dir_all(&common.out).map_err(|e| CliError::write(&common.out, e))?;
    let path = common.artifact(name);
    let file = File::create(&path).map_err(|e| CliError::write(&path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::write(&path, e))?;
    Ok(name.to_string())
}

fn load(input: &Input) -> Result<(TemporalEdgeList, RoleTable), CliError> {
    let hint = "pass an existing file (see `tssn ingest --help`)";
    let raw = parse_events(open(&input.events, hint)?, &EventFormat::default())?;
    let roles = parse_roles(open(&input.roles, hint)?)?;
    let raw = match &input.aliases {
        Some(p) => apply_alias_map(raw, &parse_aliases(open(p, hint)?)?),
        None => raw,
    };
    let (edges, table) = clean_and_index(raw, &roles)?;
    if edges.is_empty() {
        return Err(CliError::Data(format!(
            "{} holds no usable events",
            input.events.display()
        )));
    }
    Ok((edges, table))
}

fn inputs_of(input: &Input) -> Vec<PathBuf> {
    input.paths().into_iter().map(Path::to_path_buf).collect()
}

fn ingest(common: &Common, input: &Input) -> Result<Outcome, CliError> {
    let (edges, roles) = load(input)?;
    let mut out = Outcome {
        inputs: inputs_of(input),
        ..Outcome::default()
    };
    out.artifacts
        .push(write_artifact(common, "events.tsv", |w| edges.write_events(w))?);
    out.artifacts
        .push(write_artifact(common, "roles.tsv", |w| roles.write_roles(&edges, w))?);
    eprintln!("{} events among {} individuals", edges.len(), edges.vertex_count());
    Ok(out)
}

fn stats(common: &Common, input: &Input) -> Result<Outcome, CliError> {
    let (edges, roles) = load(input)?;
    let ttest = role_ttest(&edges, &roles)?.render();
    let tendency = tendency_ratio(&edges, &roles)?.render();
    print!("{ttest}\n{tendency}");
    let mut out = Outcome {
        inputs: inputs_of(input),
        ..Outcome::default()
    };
    out.artifacts
        .push(write_artifact(common, "ttest.tsv", |w| w.write_all(ttest.as_bytes()))?);
    out.artifacts.push(write_artifact(common, "tendency.tsv", |w| {
        w.write_all(tendency.as_bytes())
    })?);
    Ok(out)
}

fn graph(input: &Input, snapshots: &Snapshots) -> Result<(TemporalEdgeList, TssnGraph), CliError> {
    let cfg = snapshots.config();
    cfg.validate()?;
    let (edges, roles) = load(input)?;
    let g = build_tssn(&edges, &roles, &cfg)?;
    Ok((edges, g))
}

fn build(common: &Common, input: &Input, snapshots: &Snapshots) -> Result<Outcome, CliError> {
    let (_, g) = graph(input, snapshots)?;
    let mut out = Outcome {
        inputs: inputs_of(input),
        ..Outcome::default()
    };
    out.artifacts
        .push(write_artifact(common, "tssn.tsv", |w| g.write_dump(w))?);
    out.artifacts.push(write_artifact(common, "snapshots.tsv", |w| {
        writeln!(w, "snapshot\tvertices\tedges\ttotal_weight")?;
        for s in g.snapshot_stats() {
            writeln!(w, "{}\t{}\t{}\t{}", s.snapshot, s.vertices, s.edges, s.total_weight)?;
        }
        Ok(())
    })?);
    eprintln!("{} snapshots, {} vertex states", g.snapshot_count(), g.state_count());
    Ok(out)
}

fn walk_cmd(common: &Common, input: &Input, snapshots: &Snapshots, walk: &WalkArgs) -> Result<Outcome, CliError> {
    let cfg = walk.config(common.seed);
    cfg.validate()?;
    let (edges, g) = graph(input, snapshots)?;
    let corpus = generate_corpus(&g, &cfg)?;
    let labels = token_labels(&g, cfg.token_mode, edges.keys());
    let mut out = Outcome {
        inputs: inputs_of(input),
        ..Outcome::default()
    };
    out.artifacts
        .push(write_artifact(common, "corpus.txt", |w| write_corpus(&corpus, w))?);
    out.artifacts.push(write_artifact(common, "tokens.tsv", |w| {
        writeln!(w, "token\tlabel\tkey\tsnap")?;
        for (t, label) in labels.iter().enumerate() {
            match cfg.token_mode {
                TokenMode::BaseId => writeln!(w, "{t}\t{label}\t{label}\t-")?,
                TokenMode::SnapshotId => {
                    let v = g.vertex(t as u32);
                    writeln!(w, "{t}\t{label}\t{}\t{}", edges.key(v.base), v.snap)?
                }
            }
        }
        Ok(())
    })?);
    eprintln!("{} walks, {} tokens", corpus.len(), corpus.token_count());
    Ok(out)
}

/// One row of tokens.tsv.
struct TokenRow {
    label: String,
    key: String,
    snap: Option<u32>,
}

fn read_tokens(path: &Path) -> Result<Vec<TokenRow>, CliError> {
    let reader = open(path, "run `tssn walk` first to produce it")?;
    let bad = |line: usize, m: &str| CliError::Data(format!("{}:{line}: {m}", path.display()));
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate().skip(1) {
        let line = line.map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [token, label, key, snap] = f[..] else {
            return Err(bad(i + 1, "expected token, label, key and snap"));
        };
        if token.parse::<usize>().ok() != Some(rows.len()) {
            return Err(bad(i + 1, "tokens must be numbered 0, 1, 2, ... in order"));
        }
        let snap = match snap {
            "-" => None,
            s => Some(s.parse::<u32>().map_err(|_| bad(i + 1, "bad snapshot index"))?),
        };
        rows.push(TokenRow {
            label: label.to_string(),
            key: key.to_string(),
            snap,
        });
    }
    Ok(rows)
}

fn embed(
    common: &Common,
    train: &TrainArgs,
    corpus: &Option<PathBuf>,
    tokens: &Option<PathBuf>,
) -> Result<Outcome, CliError> {
    let cfg = train.config(common);
    cfg.validate()?;
    let corpus_path = common.or_artifact(corpus, "corpus.txt");
    let tokens_path = common.or_artifact(tokens, "tokens.tsv");
    let walks = read_corpus(open(&corpus_path, "run `tssn walk` first to produce it")?)
        .map_err(|e| CliError::Data(format!("{}: {e}", corpus_path.display())))?;
    let rows = read_tokens(&tokens_path)?;
    if let Some(t) = walks.iter().flatten().find(|&&t| t as usize >= rows.len()) {
        return Err(CliError::Data(format!(
            "token {t} of {} is missing from {}",
            corpus_path.display(),
            tokens_path.display()
        )));
    }

    let slot: HashMap<(&str, u32), u32> = rows
        .iter()
        .enumerate()
        .filter_map(|(t, r)| r.snap.map(|s| ((r.key.as_str(), s), t as u32)))
        .collect();
    let ties: Vec<(u32, u32)> = rows
        .iter()
        .enumerate()
        .filter_map(|(t, r)| {
            let s = r.snap.filter(|&s| s > 0)?;
            slot.get(&(r.key.as_str(), s - 1)).map(|&earlier| (t as u32, earlier))
        })
        .collect();

    let (m, report) = sgd_train_tied(&walks, &cfg, &ties)?;
    check_finite(&m)?;
    let labels: Vec<String> = rows.iter().map(|r| r.label.clone()).collect();
    let mut out = Outcome {
        inputs: vec![corpus_path, tokens_path],
        ..Outcome::default()
    };
    out.artifacts.push(write_artifact(common, "embeddings.txt", |w| {
        export_embeddings(&m, &labels, w)
    })?);
    if rows.iter().any(|r| r.snap.is_some()) {
        let mut keys: Vec<String> = Vec::new();
        let mut index: HashMap<&str, u32> = HashMap::new();
        let base: Vec<u32> = rows
            .iter()
            .map(|r| {
                *index.entry(r.key.as_str()).or_insert_with(|| {
                    keys.push(r.key.clone());
                    keys.len() as u32 - 1
                })
            })
            .collect();
        let collapsed = m.collapse(|t| base[t as usize]);
        out.artifacts.push(write_artifact(common, "base_embeddings.txt", |w| {
            export_embeddings(&collapsed, &keys, w)
        })?);
    }
    if let Some(loss) = report.epoch_losses.last() {
        eprintln!("{} tokens embedded, final epoch loss {loss:.4}", report.vocab_size);
    }
    Ok(out)
}

fn check_finite(m: &EmbeddingMatrix) -> Result<(), CliError> {
    if (0..m.len()).any(|r| m.row(r).iter().any(|x| !x.is_finite())) {
        return Err(CliError::Runtime(
            "training produced non-finite embeddings; lower --lr".into(),
        ));
    }
    Ok(())
}

/// Reads an embedding file and keys it by vertex id. `key@snapshot`
/// labels are averaged into their vertex.
fn load_embeddings(path: &Path, edges: &TemporalEdgeList) -> Result<EmbeddingMatrix, CliError> {
    let imported = import_embeddings(open(path, "run `tssn embed` first to produce it")?)?;
    let (m, skipped) = imported.into_matrix(|label| {
        edges.id(label).or_else(|| {
            let (key, snap) = label.rsplit_once('@')?;
            snap.parse::<u32>().ok()?;
            edges.id(key)
        })
    });
    if skipped > 0 {
        log::warn!("{skipped} embedding rows name no individual of the event log");
    }
    if m.is_empty() {
        return Err(CliError::Data(format!(
            "no row of {} matches an individual of the event log",
            path.display()
        )));
    }
    check_finite(&m)?;
    Ok(m.collapse(|t| t))
}

fn experiment_config(
    common: &Common,
    snapshots: &Snapshots,
    walk: &WalkArgs,
    train: &TrainArgs,
    eval: &EvalArgs,
) -> Result<ExperimentConfig, CliError> {
    let cfg = ExperimentConfig {
        tssn: snapshots.config(),
        walk: walk.config(common.seed),
        train: train.config(common),
        split: eval.split(common.seed),
        feature: eval.feature,
        logreg: eval.logreg(),
        holdout_fraction: eval.holdout,
        walk_threads: common.threads,
    };
    cfg.tssn.validate()?;
    cfg.walk.validate()?;
    cfg.train.validate()?;
    cfg.split.validate()?;
    if !(eval.holdout > 0.0 && eval.holdout < 1.0) {
        return Err(CliError::Usage(format!(
            "--holdout must lie in (0, 1), got {}",
            eval.holdout
        )));
    }
    if eval.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    Ok(cfg)
}

fn to_json<T: serde::Serialize>(value: &T) -> impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()> + '_ {
    move |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    common: &Common,
    input: &Input,
    snapshots: &Snapshots,
    walk: &WalkArgs,
    train: &TrainArgs,
    eval: &EvalArgs,
    embeddings: Option<&Path>,
) -> Result<Outcome, CliError> {
    let cfg = experiment_config(common, snapshots, walk, train, eval)?;
    let (edges, roles) = load(input)?;
    let seeds = eval.seed_list(common.seed);
    let mut inputs = inputs_of(input);
    let report = match embeddings {
        Some(p) => {
            let m = load_embeddings(p, &edges)?;
            inputs.push(p.to_path_buf());
            evaluate_embeddings(&edges, &roles, &m, &cfg, &seeds)
        }
        None => run_experiment(&edges, &roles, &cfg, &seeds),
    };
    let mut out = Outcome {
        inputs,
        ..Outcome::default()
    };
    out.artifacts
        .push(write_artifact(common, "report.tsv", |w| report.write_table(w))?);
    out.artifacts
        .push(write_artifact(common, "report.json", to_json(&report))?);
    match (report.mean, report.std) {
        (Some(mean), Some(std)) => {
            println!(
                "{} AUC {mean:.4} ± {std:.4} over {} seeds",
                report.protocol.as_str(),
                report.aucs().len()
            );
            Ok(out)
        }
        _ => Err(CliError::Data(format!(
            "every seed failed; first error: {}",
            report.seeds[0].error.as_deref().unwrap_or("unknown")
        ))),
    }
}

fn sweep(
    common: &Common,
    input: &Input,
    snapshots: &Snapshots,
    walk: &WalkArgs,
    train: &TrainArgs,
    eval: &EvalArgs,
    grid: &SweepGrid,
) -> Result<Outcome, CliError> {
    let cfg = experiment_config(common, snapshots, walk, train, eval)?;
    for cell in grid.cells(&cfg.walk) {
        cell.validate()?;
    }
    let (edges, roles) = load(input)?;
    let cells = parameter_sweep(&edges, &roles, &cfg, grid, &eval.seed_list(common.seed));
    let mut out = Outcome {
        inputs: inputs_of(input),
        ..Outcome::default()
    };
    out.artifacts
        .push(write_artifact(common, "sweep.tsv", |w| write_sweep_table(&cells, w))?);
    out.artifacts
        .push(write_artifact(common, "sweep.json", to_json(&cells))?);
    let mut table = Vec::new();
    write_sweep_table(&cells, &mut table).map_err(|e| CliError::Runtime(e.to_string()))?;
    print!("{}", String::from_utf8_lossy(&table));
    Ok(out)
}

fn fit_classifier(
    common: &Common,
    input: &Input,
    eval: &EvalArgs,
    embeddings: &Option<PathBuf>,
) -> Result<Outcome, CliError> {
    let (edges, roles) = load(input)?;
    let path = common.or_artifact(embeddings, "embeddings.txt");
    let m = load_embeddings(&path, &edges)?;
    let scorer = fit_link_scorer(
        &edges,
        &roles,
        &m,
        eval.feature,
        &eval.logreg(),
        eval.cross_role,
        &mut rng::stream(common.seed, &[CLASSIFIER_STREAM]),
    )?;
    let mut inputs = inputs_of(input);
    inputs.push(path);
    let mut out = Outcome {
        inputs,
        ..Outcome::default()
    };
    out.artifacts
        .push(write_artifact(common, "classifier.json", to_json(&scorer))?);
    eprintln!(
        "classifier fit in {} iterations (gradient norm {:.2e})",
        scorer.model.iterations, scorer.model.gradient_norm
    );
    Ok(out)
}

fn recommend_cmd(
    common: &Common,
    input: &Input,
    embeddings: &Option<PathBuf>,
    classifier: &Option<PathBuf>,
    target: &str,
    k: usize,
    cross_role_only: bool,
) -> Result<Outcome, CliError> {
    let (edges, roles) = load(input)?;
    let emb_path = common.or_artifact(embeddings, "embeddings.txt");
    let m = load_embeddings(&emb_path, &edges)?;
    let cls_path = common.or_artifact(classifier, "classifier.json");
    let text = fs::read_to_string(&cls_path)
        .map_err(|_| CliError::missing(&cls_path, "run `tssn fit-classifier` first to produce it"))?;
    let scorer: LinkScorer = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{} is not a classifier: {e}", cls_path.display())))?;
    let id = edges
        .id(target)
        .ok_or_else(|| CliError::Data(format!("unknown target `{target}`")))?;
    let role = roles.role(id);
    let candidates: Vec<u32> = (0..edges.vertex_count() as u32)
        .filter(|&c| !cross_role_only || roles.role(c) != role)
        .collect();
    let linked: HashSet<(u32, u32)> = edges.distinct_pairs().into_iter().collect();
    let recs = recommend(&m, &scorer, id, &candidates, &linked, k)?;
    let render = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "rank\tkey\trole\tscore")?;
        for (i, r) in recs.iter().enumerate() {
            writeln!(
                w,
                "{}\t{}\t{}\t{:.6}",
                i + 1,
                edges.key(r.vertex),
                roles.role(r.vertex),
                r.score
            )?;
        }
        Ok(())
    };
    render(&mut std::io::stdout().lock()).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut out = Outcome {
        inputs: {
            let mut v = inputs_of(input);
            v.extend([emb_path, cls_path]);
            v
        },
        ..Outcome::default()
    };
    out.artifacts
        .push(write_artifact(common, "recommendations.tsv", |w| render(w))?);
    Ok(out)
}
