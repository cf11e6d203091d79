use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dbap::agreement::{corpus_agreement, to_tsv, RstVariantSet};
use dbap::argeval::{
    compare, cross_validate, dev_split, evaluate, kfold_splits, load_splits, report_markdown,
    report_tsv, save_splits, Counts, CvConfig, Dataset, EvalReport, ReportRow, Split, DEV_FRACTION,
};
use dbap::corpus::{load_arggraph_xml, simplify_functions, write_document};
use dbap::encoder::{EmbeddingMatrix, HashEncoder};
use dbap::parser::{
    aggregate_coefficients, coefficients_tsv, export_coefficients, load_model, save_model,
    train as train_model, Instance, Mode, Model, SegmentationMode,
};
use dbap::synth::{generate, SynthConfig};
use dbap::{ArgumentFunction, ArgumentTree, Language, RelationInventory, Role};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{AgreeArgs, ConvertArgs, EvalArgs, ExportArgs, ParseArgs, SynthArgs, TrainArgs};
use crate::config::{parse_decoder, parse_mode, Settings};
use crate::data::{
    corpus_language, emit, files_with_extension, load_documents, load_groups, load_rst_dir,
    prepare, provider, segment, unit_dependencies, write_text, DependencyFile,
};
use crate::error::{CliError, Result};

pub fn convert(args: &ConvertArgs) -> Result<()> {
    let mut files = Vec::new();
    for input in &args.inputs {
        if input.is_dir() {
            files.extend(files_with_extension(input, "xml")?);
        } else {
            files.push(input.clone());
        }
    }
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    for path in &files {
        let (doc, raw) = load_arggraph_xml(path)?;
        let tree = if args.raw_functions {
            raw
        } else {
            simplify_functions(&raw)?
        };
        write_document(
            &args.out.join(format!("{}.json", doc.id)),
            &doc,
            Some(&tree),
        )?;
    }
    eprintln!(
        "converted {} documents into {}",
        files.len(),
        args.out.display()
    );
    Ok(())
}

pub fn agree(args: &AgreeArgs) -> Result<()> {
    let docs = load_documents(&args.corpus)?;
    let rst = load_rst_dir(&args.rst_dir)?;
    let mut sets: BTreeMap<(String, Language), Vec<_>> = BTreeMap::new();
    for (doc, _) in &docs {
        let Some(sources) = rst.get(&doc.id) else {
            continue;
        };
        let key = (
            doc.source_doc_id.clone().unwrap_or_else(|| doc.id.clone()),
            doc.language,
        );
        let slot = sets.entry(key).or_default();
        for src in sources {
            slot.push(unit_dependencies(src, doc)?);
        }
    }
    let sets: Vec<RstVariantSet> = sets
        .into_iter()
        .map(|((group_id, language), variants)| RstVariantSet {
            group_id,
            language,
            variants,
        })
        .collect();
    emit(args.out.as_deref(), &to_tsv(&corpus_agreement(&sets)?))
}

/// Corpus loaded and embedded for one run.
struct Prepared {
    data: Dataset,
    language: Language,
}

fn prepare_run(s: &Settings, modes: &[Mode]) -> Result<Prepared> {
    if s.segmentation == SegmentationMode::EndToEnd && s.augmented {
        return Err(CliError::usage(
            "--augmented is not supported with end-to-end segmentation",
        ));
    }
    let needs_rst =
        modes.iter().any(|m| m.uses_rst()) || s.segmentation == SegmentationMode::EndToEnd;
    if needs_rst && s.rst_dir.is_none() {
        return Err(CliError::usage(
            "discourse-driven modes and end-to-end segmentation need --rst-dir",
        ));
    }
    let groups = load_groups(s.corpus()?)?;
    let language = corpus_language(&groups)?;
    let rst = s.rst_dir.as_deref().map(load_rst_dir).transpose()?;
    let (groups, deps) = prepare(groups, rst.as_ref(), s.segmentation)?;
    let provider = provider(&s.embeddings, s.hash_dim)?;
    let data = Dataset::new(
        groups,
        provider.as_ref(),
        deps,
        RelationInventory::for_language(language),
    )?;
    Ok(Prepared { data, language })
}

fn cv_config(s: &Settings, mode: Mode, p: &Prepared, exclude_same_arg: bool) -> CvConfig {
    let mut model = s.model_config(mode, p.data.dim);
    model.language = p.language;
    let mut cfg = CvConfig::new(model);
    cfg.train = s.train.clone();
    cfg.augmented = s.augmented;
    cfg.exclude_same_arg = exclude_same_arg;
    cfg.decoder = s.decoder;
    cfg.jobs = s.jobs;
    cfg.seed = s.seed;
    cfg
}

fn history_path(args: &TrainArgs) -> PathBuf {
    args.history.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".history.json");
        PathBuf::from(p)
    })
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let s = Settings::resolve(&args.run)?;
    let p = prepare_run(&s, &[s.mode])?;
    let ids = match args.fold {
        None => p.data.original_ids(),
        Some(f) => {
            let path = s
                .splits
                .as_deref()
                .ok_or_else(|| CliError::usage("--fold needs --splits"))?;
            let splits = load_splits(path)?;
            splits
                .get(f)
                .ok_or_else(|| {
                    CliError::usage(format!(
                        "--fold {f}: the splits file has {} folds",
                        splits.len()
                    ))
                })?
                .train
                .clone()
        }
    };
    let by_id: BTreeMap<&str, _> = p
        .data
        .groups
        .iter()
        .map(|g| (g.original.id.as_str(), g))
        .collect();
    let (train_ids, dev_ids) = dev_split(&ids, DEV_FRACTION, s.seed);
    let with_rst = s.mode.uses_rst();
    let group = |id: &str| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| CliError::data(format!("{id}: not an annotated original in the corpus")))
    };
    let mut train_set = Vec::new();
    for id in &train_ids {
        let g = group(id)?;
        train_set.push(p.data.instance(&g.original, &g.tree, with_rst)?);
        if s.augmented {
            for v in &g.variants {
                train_set.push(p.data.instance(v, &g.tree, with_rst)?);
            }
        }
    }
    let mut dev_set = Vec::new();
    for id in &dev_ids {
        let g = group(id)?;
        dev_set.push(p.data.instance(&g.original, &g.tree, with_rst)?);
    }

    let cfg = cv_config(&s, s.mode, &p, false);
    let mut model = Model::new(cfg.model)?;
    let history = train_model(&mut model, &train_set, &dev_set, &s.train)?;
    let extra = json!({
        "train": s.train,
        "train_ids": train_ids,
        "dev_ids": dev_ids,
        "augmented": s.augmented,
        "hash_dim": if s.embeddings.is_empty() { Some(s.hash_dim) } else { None },
    });
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    save_model(&model, &args.out, Some(&extra))?;
    let text = serde_json::to_string_pretty(&history).expect("history serializes");
    write_text(&history_path(args), &(text + "\n"))?;
    eprintln!(
        "trained {} on {} instances ({} dev), best epoch {} of {}",
        s.mode,
        train_set.len(),
        dev_set.len(),
        history.best_epoch,
        history.epochs.len()
    );
    Ok(())
}

/// One line of `parse` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseLine {
    pub doc_id: String,
    pub heads: Vec<usize>,
    pub functions: Vec<ArgumentFunction>,
    #[serde(default)]
    pub roles: Option<Vec<Role>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<Vec<f64>>>,
}

impl ParseLine {
    fn tree(&self) -> ArgumentTree {
        ArgumentTree::new_unchecked(
            self.doc_id.clone(),
            self.heads.clone(),
            self.functions.clone(),
        )
    }
}

pub fn parse(args: &ParseArgs) -> Result<()> {
    let decoder = parse_decoder(&args.decoder)?;
    let (model, _) = load_model(&args.model)?;
    let mc = &model.config;
    let rst = args.rst_dir.as_deref().map(load_rst_dir).transpose()?;
    if (mc.mode.uses_rst() || mc.segmentation == SegmentationMode::EndToEnd) && rst.is_none() {
        return Err(CliError::usage(format!(
            "a {} {} model needs --rst-dir",
            mc.mode, mc.segmentation
        )));
    }
    let provider = if args.embeddings.is_empty() {
        Box::new(HashEncoder::new(mc.d_lm, 0)?)
    } else {
        provider(&args.embeddings, mc.d_lm)?
    };
    if provider.dim() != mc.d_lm {
        return Err(CliError::data(format!(
            "embeddings have dimension {}, the model expects {}",
            provider.dim(),
            mc.d_lm
        )));
    }
    let mut docs = load_documents(&args.corpus)?;
    if !args.doc.is_empty() {
        for id in &args.doc {
            if !docs.iter().any(|(d, _)| &d.id == id) {
                return Err(CliError::data(format!("{id}: not in the corpus")));
            }
        }
        docs.retain(|(d, _)| args.doc.contains(&d.id));
    }
    docs.sort_by(|a, b| a.0.id.cmp(&b.0.id));

    let mut out = String::new();
    for (doc, _) in &docs {
        let (doc, deps) = segment(doc, rst.as_ref(), mc.segmentation)?;
        let deps = if mc.mode.uses_rst() {
            Some(deps.ok_or_else(|| {
                CliError::data(format!("{}: no discourse structure in --rst-dir", doc.id))
            })?)
        } else {
            None
        };
        let rows = provider.embed(&doc)?;
        let emb = EmbeddingMatrix::new(&vec![0.0; mc.d_lm], &rows)?;
        let inst = Instance::new(doc.id.clone(), emb, deps.as_ref(), &model.inventory, None)?;
        let (tree, scored) = model.parse(&inst, decoder)?;
        let line = ParseLine {
            doc_id: doc.id.clone(),
            heads: tree.heads,
            functions: tree.functions,
            roles: tree.roles,
            scores: args.scores.then(|| scored.modulated.to_rows()),
        };
        out.push_str(&serde_json::to_string(&line).expect("parse line serializes"));
        out.push('\n');
    }
    emit(args.out.as_deref(), &out)
}

fn read_predictions(path: &Path) -> Result<Vec<ParseLine>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn render(rows: &[ReportRow], format: &str) -> String {
    match format {
        "markdown" => report_markdown(rows),
        "json" => {
            let v: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "name": r.name,
                        "report": r.report,
                        "p_values": r.versus.map(|t| t.iter().map(|x| x.p).collect::<Vec<_>>()),
                    })
                })
                .collect();
            serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
        }
        _ => report_tsv(rows),
    }
}

fn eval_predictions(args: &EvalArgs, pred: &Path) -> Result<String> {
    let s = Settings::resolve(&args.run)?;
    let exclude = s.segmentation == SegmentationMode::EndToEnd && !args.keep_same_arg;
    let groups = load_groups(s.corpus()?)?;
    let rst = s.rst_dir.as_deref().map(load_rst_dir).transpose()?;
    let (groups, _) = prepare(groups, rst.as_ref(), s.segmentation)?;
    let gold: BTreeMap<&str, &ArgumentTree> = groups
        .iter()
        .flat_map(|g| g.documents().map(move |d| (d.id.as_str(), &g.tree)))
        .collect();
    let mut counts = Counts::default();
    let lines = read_predictions(pred)?;
    if lines.is_empty() {
        return Err(CliError::data(format!(
            "{}: no predictions",
            pred.display()
        )));
    }
    for line in &lines {
        let g = gold.get(line.doc_id.as_str()).ok_or_else(|| {
            CliError::data(format!("{}: no gold tree for this prediction", line.doc_id))
        })?;
        counts += &evaluate(&line.tree(), g, exclude)?;
    }
    let row = ReportRow {
        name: pred
            .file_stem()
            .map_or("pred".into(), |n| n.to_string_lossy().into_owned()),
        report: EvalReport::from_folds(vec![counts.scores()]),
        versus: None,
    };
    Ok(render(&[row], &args.format))
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    if let Some(pred) = &args.pred {
        let text = eval_predictions(args, pred)?;
        return emit(args.out.as_deref(), &text);
    }
    let s = Settings::resolve(&args.run)?;
    let modes = if args.modes.is_empty() {
        vec![s.mode]
    } else {
        args.modes
            .iter()
            .map(|m| parse_mode(m))
            .collect::<Result<Vec<_>>>()?
    };
    let exclude = s.segmentation == SegmentationMode::EndToEnd && !args.keep_same_arg;
    let p = prepare_run(&s, &modes)?;
    let splits: Vec<Split> = match (&s.splits, args.folds) {
        (Some(_), Some(_)) => return Err(CliError::usage("--splits and --folds are exclusive")),
        (Some(path), None) => load_splits(path)?,
        (None, k) => kfold_splits(&p.data.original_ids(), k.unwrap_or(5), s.seed)?,
    };
    if let Some(path) = &args.save_splits {
        save_splits(path, &splits)?;
    }
    let mut rows: Vec<ReportRow> = Vec::with_capacity(modes.len());
    for &mode in &modes {
        let outcome = cross_validate(&p.data, &splits, &cv_config(&s, mode, &p, exclude))?;
        let versus = match rows.first() {
            Some(base) if splits.len() >= 2 => Some(compare(&base.report, &outcome.report)?),
            _ => None,
        };
        let mut name = mode.to_string();
        if s.augmented {
            name.push_str("+aug");
        }
        let mut summary = format!("{name}:");
        for f in &outcome.folds {
            let _ = write!(
                summary,
                " fold {} UAS {:.1} LAS {:.1};",
                f.fold + 1,
                f.scores.uas,
                f.scores.las
            );
        }
        eprintln!("{}", summary.trim_end_matches(';'));
        rows.push(ReportRow {
            name,
            report: outcome.report,
            versus,
        });
    }
    emit(args.out.as_deref(), &render(&rows, &args.format))
}

pub fn export_coeffs(args: &ExportArgs) -> Result<()> {
    let mut runs = Vec::with_capacity(args.models.len());
    for path in &args.models {
        let (model, _) = load_model(path)?;
        runs.push(export_coefficients(&model)?);
    }
    emit(
        args.out.as_deref(),
        &coefficients_tsv(&aggregate_coefficients(&runs, args.threshold)?),
    )
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    if args.docs == 0 {
        return Err(CliError::usage("--docs must be positive"));
    }
    for (name, v) in [
        ("--agreement", args.agreement),
        ("--attack-rate", args.attack_rate),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::usage(format!("{name} must lie in [0, 1]")));
        }
    }
    let corpus = generate(&SynthConfig {
        docs: args.docs,
        rst_agreement: args.agreement,
        attack_rate: args.attack_rate,
        paraphrases: args.paraphrases,
        seed: args.seed,
        ..SynthConfig::default()
    });
    let (docs_dir, rst_dir) = (args.out.join("corpus"), args.out.join("rst"));
    for dir in [&docs_dir, &rst_dir] {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    for g in &corpus.groups {
        write_document(
            &docs_dir.join(format!("{}.json", g.original.id)),
            &g.original,
            Some(&g.tree),
        )?;
        for v in &g.variants {
            write_document(&docs_dir.join(format!("{}.json", v.id)), v, None)?;
        }
    }
    for (id, deps) in &corpus.rst {
        let file = DependencyFile {
            doc_id: id.clone(),
            dependencies: deps.clone(),
        };
        let text = serde_json::to_string_pretty(&file).expect("dependencies serialize");
        write_text(&rst_dir.join(format!("{id}.json")), &(text + "\n"))?;
    }
    eprintln!(
        "wrote {} documents ({} with paraphrases), measured agreement {:.3}",
        corpus.groups.iter().map(|g| g.len()).sum::<usize>(),
        corpus
            .groups
            .iter()
            .filter(|g| !g.variants.is_empty())
            .count(),
        corpus.measured_agreement()
    );
    Ok(())
}
