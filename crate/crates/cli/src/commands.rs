use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nullspace_unlearn::dataio::synthetic::{random_projection, separability_certificate};
use nullspace_unlearn::dataio::{
    load_bank, load_dataset, load_manifest, load_matrix, save_bank, save_dataset, save_manifest, save_matrix, Dtype,
    ModeKind, SuiteConfig, SyntheticGenConfig,
};
use nullspace_unlearn::rng::derive_seed;
use nullspace_unlearn::synthesis::gradient_audit;
use nullspace_unlearn::{
    evaluate, mia_score, unlearn, Encoder, Error, EvaluationReport, ForgetContext, GlobalTarget, ProjectionBank,
    RowKind, SynthesisConfig, ToyEncoder, ToyEncoderConfig, ToyVariant, UnlearnMode, UnlearnOptions,
};

use crate::args::{
    Command, EvalArgs, GenArgs, GlobalTargetArg, GradcheckArgs, MiaArgs, ModeArg, ReportArgs, Storage, UnlearnArgs,
    VariantArg,
};
use crate::report;
use crate::{AtPath, CliError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATA_FILE: &str = "data.bin";
pub const PROJECTION_FILE: &str = "projection.bin";
pub const UNLEARN_RECORD: &str = "unlearn.json";

type CmdResult = Result<(), CliError>;

pub fn dispatch(cmd: Command, out: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::Gen(a) => gen(a, out),
        Command::Unlearn(a) => unlearn_cmd(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Mia(a) => mia(a, out),
        Command::Gradcheck(a) => gradcheck(a, out),
        Command::Report(a) => report_cmd(a, out),
    }
}

fn sibling(manifest: &Path, name: &str) -> PathBuf {
    manifest.parent().map_or_else(|| PathBuf::from(name), |p| p.join(name))
}

fn gen(a: GenArgs, out: &mut dyn Write) -> CmdResult {
    let generator = SyntheticGenConfig {
        classes: a.classes,
        domains: a.domains,
        samples_per_cell: a.samples,
        max_prototype_cosine: a.max_prototype_cosine,
        domain_offset: a.domain_offset,
        sample_noise: a.sample_noise,
        seed: a.seed,
        forget_count: a.forget_count,
    };
    generator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = SuiteConfig {
        generator,
        input_dim: a.input_dim,
        feature_dim: a.feature_dim,
        embedding_dim: a.embedding_dim,
    };
    if a.embedding_dim == 0 || a.embedding_dim > a.feature_dim || a.feature_dim > a.input_dim {
        return Err(CliError::Usage("dimensions must satisfy 1 <= embedding <= feature <= input".into()));
    }
    let desk = cfg.build()?;
    let suite = &desk.suite;
    let dtype = match a.storage {
        Storage::F32 => Dtype::F32,
        Storage::F64 => Dtype::F64,
    };

    fs::create_dir_all(&a.out)?;
    let path = a.out.join(MANIFEST_FILE);
    save_manifest(&path, &suite.manifest).at(&path)?;
    let path = a.out.join(DATA_FILE);
    save_dataset(&path, &suite.data, dtype).at(&path)?;
    let path = a.out.join(PROJECTION_FILE);
    save_matrix(&path, &desk.projection, Dtype::F64).at(&path)?;

    let m = &suite.manifest;
    let cells = separability_certificate(&suite.data, &desk.projection, &suite.prototypes.prototypes, m.domains.len())?;
    let separable = cells.iter().filter(|c| c.separable()).count();
    let margin = cells.iter().map(|c| c.own_cosine - c.best_other_cosine).fold(f64::INFINITY, f64::min);
    writeln!(
        out,
        "generated {} samples: {} domains x {} classes x {} per cell (seed {})",
        suite.data.len(),
        a.domains,
        a.classes,
        a.samples,
        a.seed
    )?;
    writeln!(out, "domains: {}", m.domains.join(", "))?;
    writeln!(out, "forget classes: {}", m.forget_classes.join(", "))?;
    writeln!(out, "max prototype cosine: {:.4}", suite.prototypes.max_pairwise_cosine())?;
    writeln!(out, "separability: {separable}/{} cells separable, min margin {margin:.4}", cells.len())?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(())
}

/// Provenance written next to a bank and echoed into eval reports.
#[derive(Debug, Serialize, Deserialize)]
struct UnlearnRecord {
    mode: String,
    unlearn_domains: Vec<String>,
    forget_classes: Vec<String>,
    flags: BTreeMap<String, String>,
    matrices: Vec<MatrixRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixRecord {
    domains: Vec<String>,
    text_rows: usize,
    visual_rows: usize,
    residual_rows: usize,
    rank_removed: usize,
}

fn unlearn_cmd(a: UnlearnArgs, out: &mut dyn Write) -> CmdResult {
    if !(a.rel_tol > 0.0 && a.rel_tol < 1.0) {
        return Err(CliError::Usage(format!("--rel-tol must lie in (0, 1), got {}", a.rel_tol)));
    }
    let mut manifest = load_manifest(&a.manifest).at(&a.manifest)?;
    let wpath = a.projection.clone().unwrap_or_else(|| sibling(&a.manifest, PROJECTION_FILE));
    let projection = load_matrix(&wpath).at(&wpath)?;

    let kind = match a.mode {
        Some(ModeArg::Global) => ModeKind::Global,
        Some(ModeArg::Selective) => ModeKind::Selective,
        Some(ModeArg::Complete) => ModeKind::Complete,
        Some(ModeArg::TextOnly) => ModeKind::TextOnly,
        None => manifest.mode,
    };
    let domains: BTreeSet<String> =
        a.domains.clone().unwrap_or_else(|| manifest.unlearn_domains.clone()).into_iter().collect();
    let mode = match kind {
        ModeKind::Global => UnlearnMode::Global,
        ModeKind::TextOnly => UnlearnMode::TextOnly,
        ModeKind::Selective | ModeKind::Complete if domains.is_empty() => {
            return Err(CliError::Usage("selective and complete modes need --domains".into()));
        }
        ModeKind::Selective => UnlearnMode::SelectiveDomain(domains),
        ModeKind::Complete => UnlearnMode::CompleteSelectiveDomain(domains),
    };
    let forget = if a.all_classes {
        manifest.classes.clone()
    } else {
        a.forget.clone().unwrap_or_else(|| manifest.forget_classes.clone())
    };
    if forget.is_empty() {
        return Err(CliError::Usage("forget set is empty; pass --forget or --all-classes".into()));
    }

    let synthesis = SynthesisConfig {
        max_iters: a.max_iters,
        initial_step: a.initial_step,
        backtrack: a.backtrack,
        growth: a.growth,
        min_step: a.min_step,
        init_seed: 0,
        target_cosine: a.target_cosine,
    };
    synthesis.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(s) = a.synthesis_seed {
        manifest.seeds.synthesis = s;
    }
    let options = UnlearnOptions {
        rel_tol: a.rel_tol,
        pooled: a.pooled,
        global_target: match a.global_target {
            GlobalTargetArg::Neutral => GlobalTarget::Neutral,
            GlobalTargetArg::DomainMean => GlobalTarget::DomainMean,
        },
    };

    let text = manifest.text_embedder()?;
    let encoder = manifest.encoder.map(ToyEncoder::new).transpose()?;
    let ctx = ForgetContext::from_manifest(
        &manifest,
        &text,
        encoder.as_ref().map(|e| e as &dyn Encoder),
        &projection,
        synthesis,
        options,
    )?;
    let outcome = unlearn(&ctx, &mode, &forget)?;
    save_bank(&a.out, &outcome.bank).at(&a.out)?;

    let mut flags = BTreeMap::new();
    flags.insert("rel_tol".into(), format!("{:e}", a.rel_tol));
    flags.insert("pooled".into(), a.pooled.to_string());
    flags.insert("global_target".into(), format!("{:?}", options.global_target).to_lowercase());
    flags.insert("synthesis_seed".into(), manifest.seeds.synthesis.to_string());
    flags.insert("max_iters".into(), a.max_iters.to_string());
    flags.insert("initial_step".into(), a.initial_step.to_string());
    flags.insert("backtrack".into(), a.backtrack.to_string());
    flags.insert("growth".into(), a.growth.to_string());
    flags.insert("min_step".into(), a.min_step.to_string());
    flags.insert("target_cosine".into(), a.target_cosine.to_string());
    flags.insert(
        "visual_source".into(),
        if manifest.canonical_embeddings.is_some() { "precomputed" } else { "synthesized" }.into(),
    );
    let matrices: Vec<MatrixRecord> = outcome
        .matrices
        .iter()
        .map(|s| MatrixRecord {
            domains: s.domains.clone(),
            text_rows: s.matrix.count(RowKind::Text),
            visual_rows: s.matrix.count(RowKind::Visual),
            residual_rows: s.matrix.count(RowKind::Residual),
            rank_removed: outcome.projectors[&s.domains[0]].rank_removed(),
        })
        .collect();
    let record = UnlearnRecord {
        mode: mode.label().into(),
        unlearn_domains: mode.domains().map(|d| d.iter().cloned().collect()).unwrap_or_default(),
        forget_classes: forget.clone(),
        flags,
        matrices,
    };
    let mut json = serde_json::to_string_pretty(&record).expect("record serializes");
    json.push('\n');
    fs::write(a.out.join(UNLEARN_RECORD), json)?;

    writeln!(out, "mode {} | forget {}", mode.label(), forget.join(", "))?;
    for m in &record.matrices {
        writeln!(
            out,
            "{}: {} rows ({} text, {} visual, {} residual), rank removed {}",
            m.domains.join(";"),
            m.text_rows + m.visual_rows + m.residual_rows,
            m.text_rows,
            m.visual_rows,
            m.residual_rows,
            m.rank_removed
        )?;
    }
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(())
}

fn read_record(dir: &Path) -> Result<Option<UnlearnRecord>, CliError> {
    let path = dir.join(UNLEARN_RECORD);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(Error::from).at(&path)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::Format(nullspace_unlearn::FormatError::Manifest(e.to_string())))
        .at(&path)
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> CmdResult {
    let mut manifest = load_manifest(&a.manifest).at(&a.manifest)?;
    let dpath = a.data.clone().unwrap_or_else(|| sibling(&a.manifest, DATA_FILE));
    let data = load_dataset(&dpath).at(&dpath)?;
    let (bank, record) = match &a.bank {
        Some(dir) => (load_bank(dir).at(dir)?, read_record(dir)?),
        None => {
            let wpath = sibling(&a.manifest, PROJECTION_FILE);
            let w = load_matrix(&wpath).at(&wpath)?;
            (ProjectionBank::untouched(w, &manifest.domains), None)
        }
    };
    if bank.domains() != manifest.domains.as_slice() {
        return Err(Error::InvalidConfig("bank domains differ from the manifest's".into()).into());
    }
    if let Some(r) = &record {
        manifest.forget_classes = r.forget_classes.clone();
    }
    let text = manifest.text_embedder()?;
    let mut rep = evaluate(&data, &bank, &manifest, &text)?;
    if let Some(r) = record {
        rep.config.extend(r.flags.into_iter().map(|(k, v)| (format!("unlearn.{k}"), v)));
    }

    match &a.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, rep.to_json())?;
            fs::write(path.with_extension("csv"), rep.to_csv())?;
            write!(out, "{}", report::summary(&rep))?;
            writeln!(out, "wrote {}", path.display())?;
        }
        None => write!(out, "{}", rep.to_json())?,
    }
    Ok(())
}

fn read_report(path: &Path) -> Result<EvaluationReport, CliError> {
    let text = fs::read_to_string(path).map_err(Error::from).at(path)?;
    EvaluationReport::from_json(&text).at(path)
}

fn mia(a: MiaArgs, out: &mut dyn Write) -> CmdResult {
    if let (Some(bf_f), Some(af_f), Some(bf_r), Some(af_r)) = (a.bf_forget, a.af_forget, a.bf_retain, a.af_retain) {
        writeln!(out, "{:.2}", mia_score(bf_f, af_f, bf_r, af_r)?)?;
        return Ok(());
    }
    let path = a.report.as_ref().ok_or_else(|| CliError::Usage("pass four accuracies or --report".into()))?;
    let rep = read_report(path)?;
    let value = |d: &nullspace_unlearn::DomainReport| -> Result<f64, CliError> {
        match (d.forget.bf, d.forget.af, d.retain.bf, d.retain.af) {
            (Some(a), Some(b), Some(c), Some(e)) => Ok(mia_score(a, b, c, e)?),
            _ => Err(Error::InvalidConfig(format!("domain {:?} lacks a forget or retain set", d.domain)).into()),
        }
    };
    match &a.domain {
        Some(name) => {
            let d = rep.domain(name).ok_or_else(|| Error::UnknownLabel(format!("domain {name:?}")))?;
            writeln!(out, "{:.2}", value(d)?)?;
        }
        None => {
            for d in &rep.domains {
                match value(d) {
                    Ok(v) => writeln!(out, "{} {v:.2}", d.domain)?,
                    Err(_) => writeln!(out, "{} -", d.domain)?,
                }
            }
        }
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> CmdResult {
    if a.feature_dim == 0 || a.feature_dim > a.input_dim || a.embedding_dim == 0 || a.embedding_dim > a.feature_dim {
        return Err(CliError::Usage("dimensions must satisfy 1 <= embedding <= feature <= input".into()));
    }
    let variants: &[ToyVariant] = match a.variant {
        VariantArg::Linear => &[ToyVariant::Linear],
        VariantArg::Tanh => &[ToyVariant::Tanh],
        VariantArg::Both => &[ToyVariant::Linear, ToyVariant::Tanh],
    };
    let w = random_projection(a.feature_dim, a.embedding_dim, derive_seed(a.seed, 2, 0))?;
    let mut failed = Vec::new();
    for &variant in variants {
        let encoder = ToyEncoder::new(ToyEncoderConfig {
            variant,
            input_dim: a.input_dim,
            feature_dim: a.feature_dim,
            seed: derive_seed(a.seed, 1, 0),
        })?;
        let audit = gradient_audit(&encoder, &w, a.probes, derive_seed(a.seed, 3, 0), a.step)
            .map_err(|e| match e {
                Error::InvalidConfig(m) => CliError::Usage(m),
                other => other.into(),
            })?;
        let name = format!("{variant:?}").to_lowercase();
        let ok = audit.encoder_max_rel_err <= a.tol && audit.objective_max_rel_err <= a.tol;
        writeln!(
            out,
            "{name}: encoder max rel err {:.3e}, objective max rel err {:.3e} over {} probes (tol {:e}) {}",
            audit.encoder_max_rel_err,
            audit.objective_max_rel_err,
            audit.probes,
            a.tol,
            if ok { "ok" } else { "FAIL" }
        )?;
        if !ok {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!("gradient audit exceeded tolerance for {}", failed.join(", "))))
    }
}

fn report_cmd(a: ReportArgs, out: &mut dyn Write) -> CmdResult {
    let reports = a.inputs.iter().map(|p| read_report(p)).collect::<Result<Vec<_>, _>>()?;
    let table = report::table(&reports);
    match &a.out {
        Some(path) => {
            fs::write(path, &table)?;
            writeln!(out, "wrote {} rows to {}", table.lines().count() - 1, path.display())?;
        }
        None => write!(out, "{table}")?,
    }
    Ok(())
}
