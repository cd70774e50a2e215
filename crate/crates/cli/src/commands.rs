use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use isenet::beats::{
    build_splits_from_dir, exclude_records, load_dataset, save_dataset, Beat, DenoiseScope, LeadMode, PreparedDataset,
};
use isenet::eval::{
    binary_metrics, capture_excitations, confusion, confusion_csv, default_sites, display_percent, excitation_csv, filter_beats,
    metrics_csv, msd_csv, msd_table, segment_finetune_eval, table4_text, ExcitationTrace, FusionPolicy, Subset,
};
use isenet::model::{Attention, HeadInit, Network};
use isenet::train::{load_checkpoint, stratified_holdout, train_loop, LabeledBeats, OptimizerKind, Schedule};
use isenet::wfdb::{AamiClass, FetchConfig, Fetcher, MITDB_RECORDS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, EFFECTIVE_CONFIG};
use crate::exit::{ConfigError, DataError, NumericError};
use crate::output::Staged;
use crate::{AnalyzeArgs, EvalArgs, FetchArgs, GradcheckArgs, PrepareArgs, SegmentArgs, TrainArgs};

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn parse_class(s: &str) -> Result<AamiClass> {
    AamiClass::from_symbol(s.trim()).ok_or_else(|| config_err(format!("unknown class {s:?}")))
}

fn parse_with<T, E: std::fmt::Display>(s: &str, what: &str, r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| config_err(format!("invalid {what} {s:?}: {e}")))
}

fn write_effective(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    isenet::eval::write_atomic(&dir.join(EFFECTIVE_CONFIG), cfg.to_toml()?.as_bytes())?;
    Ok(())
}

pub fn fetch(mut cfg: RunConfig, a: FetchArgs) -> Result<()> {
    if let Some(url) = a.base_url {
        cfg.fetch.base_url = url;
    }
    let ids: Vec<String> = if a.records.is_empty() || a.records.iter().any(|r| r == "all") {
        MITDB_RECORDS.iter().map(|s| s.to_string()).collect()
    } else {
        a.records
    };
    let fetcher = Fetcher::new(FetchConfig {
        base_url: cfg.fetch.base_url.clone(),
        cache_dir: cfg.paths.cache_dir.clone(),
        timeout_secs: cfg.fetch.timeout_secs,
    })?;
    let (mut ok, mut failed, mut downloads) = (Vec::new(), Vec::new(), 0);
    for id in &ids {
        match fetcher.fetch_record(id) {
            Ok(r) => {
                downloads += usize::from(r.downloaded);
                println!("{id}: {} dat={}", if r.downloaded { "downloaded" } else { "cached" }, r.sha256["dat"]);
                ok.push(id.clone());
            }
            Err(e) => {
                println!("{id}: failed: {e}");
                failed.push((id.clone(), e));
            }
        }
    }
    let usable = exclude_records(ok.iter().map(String::as_str));
    println!("{} cached ({downloads} downloaded), {} usable, {} failed", ok.len(), usable.len(), failed.len());
    if let Some((id, e)) = failed.into_iter().next() {
        return Err(anyhow::Error::new(e).context(format!("fetching record {id}")));
    }
    Ok(())
}

pub fn prepare(mut cfg: RunConfig, a: PrepareArgs) -> Result<()> {
    if let Some(d) = a.dataset_dir {
        cfg.paths.dataset_dir = d;
    }
    if let Some(l) = &a.lead {
        cfg.prepare.lead_mode = parse_with(l, "lead mode", l.parse::<LeadMode>())?;
    }
    if let Some(s) = a.seed {
        cfg.prepare.seed = s;
        cfg.balance.seed = s;
    }
    if let Some(s) = &a.denoise_scope {
        cfg.prepare.denoise_scope = match s.as_str() {
            "record" => DenoiseScope::Record,
            "window" => DenoiseScope::Window,
            _ => return Err(config_err(format!("denoise scope must be record or window, got {s:?}"))),
        };
    }
    if !a.balance_targets.is_empty() {
        cfg.balance.targets = a.balance_targets.try_into().map_err(|_| config_err("balance targets need five counts"))?;
    }
    let ids: Vec<String> = MITDB_RECORDS.iter().map(|s| s.to_string()).collect();
    let split = build_splits_from_dir(&cfg.paths.cache_dir, &ids, &cfg.prepare)
        .with_context(|| format!("reading records from {}", cfg.paths.cache_dir.display()))?;
    let data = PreparedDataset::from_split(split, &cfg.prepare, &cfg.balance)?;

    // assemble next to the destination so a failed run leaves no partial dataset
    let dest = &cfg.paths.dataset_dir;
    let parent = dest.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let staging = tempfile::Builder::new().prefix(".dataset").tempdir_in(parent)?;
    let manifest = save_dataset(staging.path(), &data)?;
    write_effective(staging.path(), &cfg)?;
    if dest.exists() {
        fs::remove_dir_all(dest).with_context(|| format!("replacing {}", dest.display()))?;
    }
    fs::rename(staging.keep(), dest)?;

    let c = &manifest.counts;
    let r = &manifest.records;
    println!("records: {} ({} DS1, {} DS2)", r.ds1.len() + r.ds2.len(), r.ds1.len(), r.ds2.len());
    println!("train natural  {:?}", c.train_natural);
    println!("test           {:?}", c.test);
    println!("rejected       {:?}", c.rejected);
    println!("train balanced {:?}", c.train_balanced);
    let r = &manifest.balance_report;
    println!(
        "smote synthetic {:?}, tomek removed {:?}, duplicated {:?}, subsampled out {:?}",
        r.smote_synthetic, r.tomek_removed, r.duplicated, r.subsampled_out
    );
    println!("dataset written to {}", dest.display());
    Ok(())
}

pub fn train(mut cfg: RunConfig, a: TrainArgs) -> Result<()> {
    if let Some(d) = a.dataset_dir {
        cfg.paths.dataset_dir = d;
    }
    if let Some(d) = a.out {
        cfg.paths.train_dir = d;
    }
    if let Some(d) = a.depth {
        cfg.model.depth = d;
    }
    if let Some(s) = &a.attention {
        cfg.model.attention = parse_with(s, "attention", s.parse::<Attention>())?;
    }
    if let Some(s) = &a.optimizer {
        cfg.train.optimizer = match s.as_str() {
            "momentum" => OptimizerKind::Momentum,
            "adam" => OptimizerKind::Adam,
            _ => return Err(config_err(format!("optimizer must be momentum or adam, got {s:?}"))),
        };
    }
    if let Some(s) = &a.schedule {
        cfg.train.schedule = match s.as_str() {
            "piecewise" => Schedule::piecewise(),
            "exponential" => Schedule::exponential(),
            _ => return Err(config_err(format!("schedule must be piecewise or exponential, got {s:?}"))),
        };
    }
    if let Some(v) = a.lr {
        cfg.train.base_lr = v;
    }
    if let Some(v) = a.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = a.max_epochs {
        cfg.train.max_epochs = v;
    }
    if let Some(v) = a.patience {
        cfg.train.patience = v;
    }
    if let Some(s) = a.seed {
        cfg.model.seed = s;
        cfg.train.seed = s;
    }
    cfg.train.validate()?;
    cfg.model.validate()?;

    let data = load_dataset(&cfg.paths.dataset_dir)
        .with_context(|| format!("loading dataset {}", cfg.paths.dataset_dir.display()))?;
    cfg.model.lead_mode = data.manifest.lead_mode;
    let mut net = Network::build(&cfg.model)?;
    let all = LabeledBeats::from_beats(&data.train);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let (tr, va) = stratified_holdout(&all.labels, cfg.train.val_fraction, &mut rng);
    println!(
        "{}: {} trainable values, {} training and {} validation beats",
        cfg.model.name(),
        net.params.n_trainable_values(),
        tr.len(),
        va.len()
    );
    write_effective(&cfg.paths.train_dir, &cfg)?;
    let outcome = train_loop(&mut net, &all.select(&tr), &all.select(&va), &cfg.train, Some(&cfg.paths.train_dir))?;
    let epochs = outcome.history.len() - 1;
    println!(
        "ran {epochs} epochs{}; selected epoch {} -> {}",
        if outcome.stopped_early { " (early stop)" } else { "" },
        outcome.selected_epoch,
        cfg.paths.train_dir.join(format!("checkpoints/epoch_{:04}", outcome.selected_epoch)).display()
    );
    Ok(())
}

/// A checkpoint directory, or a training directory pointing at one.
fn resolve_checkpoint(path: &Path) -> Result<PathBuf> {
    if path.join("manifest.json").is_file() {
        return Ok(path.to_path_buf());
    }
    let sel = path.join("selected.json");
    if sel.is_file() {
        let v: serde_json::Value = serde_json::from_slice(&fs::read(&sel)?)?;
        let rel = v["checkpoint"].as_str().ok_or_else(|| DataError(format!("{} lacks a checkpoint entry", sel.display())))?;
        return Ok(path.join(rel));
    }
    Err(DataError(format!("{} is neither a checkpoint nor a training directory", path.display())).into())
}

fn load_model(cfg: &RunConfig, path: Option<PathBuf>) -> Result<(PathBuf, Network)> {
    let dir = resolve_checkpoint(&path.unwrap_or_else(|| cfg.paths.train_dir.clone()))?;
    let ck = load_checkpoint(&dir).with_context(|| format!("loading checkpoint {}", dir.display()))?;
    Ok((dir, ck.network))
}

fn check_leads(net: &Network, data: &PreparedDataset) -> Result<()> {
    if net.spec.lead_mode != data.manifest.lead_mode {
        return Err(config_err(format!(
            "model uses {} leads, dataset holds {}",
            net.spec.lead_mode.as_str(),
            data.manifest.lead_mode.as_str()
        )));
    }
    Ok(())
}

fn all_beats(data: &PreparedDataset) -> Vec<&Beat> {
    data.train_natural.iter().chain(&data.test).collect()
}

pub fn eval(mut cfg: RunConfig, a: EvalArgs) -> Result<()> {
    if let Some(d) = a.dataset_dir.clone() {
        cfg.paths.dataset_dir = d;
    }
    if !a.subset.is_empty() {
        cfg.eval.subsets = a.subset.iter().map(|s| parse_with(s, "subset", s.parse::<Subset>())).collect::<Result<_>>()?;
    }
    if !a.positive.is_empty() {
        cfg.eval.positives = a.positive.iter().map(|s| parse_class(s)).collect::<Result<_>>()?;
    }
    if let Some(p) = &a.fusion_policy {
        cfg.eval.fusion_policy = match p.as_str() {
            "negative" => FusionPolicy::Negative,
            "not_false_positive" => FusionPolicy::NotFalsePositive,
            _ => return Err(config_err(format!("fusion policy must be negative or not_false_positive, got {p:?}"))),
        };
    }
    if let Some(c) = &a.confusion {
        cfg.eval.confusion = match c.as_str() {
            "full" => true,
            "none" => false,
            _ => return Err(config_err(format!("confusion must be full or none, got {c:?}"))),
        };
    }
    let (ck_dir, net) = load_model(&cfg, a.checkpoint)?;
    if net.is_truncated() {
        return Err(config_err("eval expects a five-class model; use segment for pair models"));
    }
    let data = load_dataset(&cfg.paths.dataset_dir)?;
    check_leads(&net, &data)?;
    let name = net.spec.name();
    let batch = cfg.eval.batch;

    let out_dir = cfg.paths.report_dir.join("eval");
    let mut staged = Staged::new(&out_dir)?;
    let mut rows = Vec::new();
    let mut matrices = Vec::new();
    for &subset in &cfg.eval.subsets {
        let beats = filter_beats(&data.test, subset);
        let cm = confusion(&net, &beats, subset.as_str(), batch)?;
        staged.add(&format!("confusion_test_{}.csv", subset.as_str()), confusion_csv(&cm))?;
        for &positive in &cfg.eval.positives {
            rows.push((name.clone(), binary_metrics(&cm, positive, cfg.eval.fusion_policy)));
        }
        matrices.push(cm);
    }
    println!("{:<8} {:<3} {:>6} {:>6} {:>6} {:>6} {:>7}", "subset", "pos", "Acc", "Sen", "Spe", "Ppr", "MCC");
    for (_, r) in &rows {
        println!(
            "{:<8} {:<3} {:>6} {:>6} {:>6} {:>6} {:>7}",
            r.subset_id,
            r.positive_class.symbol(),
            display_percent(r.acc_f64()),
            display_percent(r.sen_f64()),
            display_percent(r.spe_f64()),
            display_percent(r.ppr_f64()),
            r.mcc.map_or_else(|| "-".into(), |m| format!("{m:.4}"))
        );
    }
    staged.add("metrics.csv", metrics_csv(&rows))?;
    let reports: Vec<_> = rows.iter().map(|(_, r)| r).collect();
    staged.add("metrics.json", serde_json::to_vec_pretty(&reports)?)?;
    if cfg.eval.confusion {
        let everything = all_beats(&data);
        let full = confusion(&net, &everything, "full", batch)?;
        let ds2 = confusion(&net, &everything.iter().copied().filter(|b| Subset::Ds2.contains(&b.record_id)).collect::<Vec<_>>(), "ds2", batch)?;
        let table = table4_text(&full, Some(&ds2), &[]);
        print!("{table}");
        staged.add("table4.txt", &table)?;
        staged.add("confusion_full.csv", confusion_csv(&full))?;
        staged.add("confusion_ds2.csv", confusion_csv(&ds2))?;
        matrices.push(full);
        matrices.push(ds2);
    }
    staged.add("confusion.json", serde_json::to_vec_pretty(&matrices)?)?;
    staged.add(
        "source.json",
        serde_json::to_vec_pretty(&serde_json::json!({ "checkpoint": ck_dir, "dataset": cfg.paths.dataset_dir }))?,
    )?;
    staged.add(EFFECTIVE_CONFIG, cfg.to_toml()?)?;
    for p in staged.commit()? {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn max_drift(a: &[ExcitationTrace], b: &[ExcitationTrace]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.mean.iter().zip(&y.mean).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

pub fn analyze(mut cfg: RunConfig, a: AnalyzeArgs) -> Result<()> {
    if let Some(d) = a.dataset_dir.clone() {
        cfg.paths.dataset_dir = d;
    }
    if let Some(v) = a.per_class {
        cfg.analyze.per_class = v;
    }
    if let Some(v) = a.repeats {
        cfg.analyze.repeats = v;
    }
    if let Some(v) = a.seed {
        cfg.analyze.seed = v;
    }
    if cfg.analyze.repeats == 0 {
        return Err(config_err("repeats must be positive"));
    }
    let (_, net) = load_model(&cfg, a.checkpoint)?;
    let data = load_dataset(&cfg.paths.dataset_dir)?;
    check_leads(&net, &data)?;
    let test: Vec<&Beat> = data.test.iter().collect();
    let sites = default_sites(&net);

    let out_dir = cfg.paths.report_dir.join("analyze");
    let mut staged = Staged::new(&out_dir)?;
    let mut first: Option<Vec<ExcitationTrace>> = None;
    let mut drift_rows = String::from("repeat,seed,max_abs_drift\n");
    for r in 0..cfg.analyze.repeats {
        let seed = cfg.analyze.seed + r as u64;
        let (traces, notes) = capture_excitations(&net, &test, &sites, cfg.analyze.per_class, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let table = msd_table(&traces)?;
        let suffix = if r == 0 { String::new() } else { format!("_repeat{r}") };
        staged.add(&format!("excitation{suffix}.csv"), excitation_csv(&traces))?;
        staged.add(&format!("msd{suffix}.csv"), msd_csv(&table))?;
        if r == 0 {
            staged.add("sampling.json", serde_json::to_vec_pretty(&notes)?)?;
            println!("{:<6} {:<5} {:>9}", "block", "pair", "msd");
            for row in &table {
                println!("{:<6} {:<5} {:>9.3}", row.block, row.pair, row.msd);
            }
        }
        let drift = first.as_ref().map_or(0.0, |f| max_drift(f, &traces));
        drift_rows.push_str(&format!("{r},{seed},{drift:.6}\n"));
        if first.is_none() {
            first = Some(traces);
        }
    }
    if cfg.analyze.repeats > 1 {
        staged.add("drift.csv", drift_rows)?;
    }
    staged.add(EFFECTIVE_CONFIG, cfg.to_toml()?)?;
    staged.commit()?;
    println!("reports written to {}", out_dir.display());
    Ok(())
}

pub fn segment(mut cfg: RunConfig, a: SegmentArgs) -> Result<()> {
    if let Some(d) = a.dataset_dir.clone() {
        cfg.paths.dataset_dir = d;
    }
    if let Some(c) = a.cut {
        cfg.segment.cut_block = c;
    }
    if !a.classes.is_empty() {
        let classes: Vec<AamiClass> = a.classes.iter().map(|s| parse_class(s)).collect::<Result<_>>()?;
        let [x, y] = classes[..] else {
            bail!(ConfigError(format!("expected two classes, got {}", classes.len())));
        };
        cfg.segment.classes = [x, y];
    }
    if let Some(v) = a.max_epochs {
        cfg.segment.train.max_epochs = v;
    }
    if let Some(s) = a.seed {
        cfg.segment.seed = s;
        cfg.segment.train.seed = s;
    }
    let (_, base) = load_model(&cfg, a.checkpoint)?;
    if let Some(h) = &a.head_init {
        cfg.segment.head_init = match h.as_str() {
            "random" => HeadInit::Random,
            "identity" => HeadInit::Identity {
                classes: cfg.segment.classes.iter().map(|c| c.index().expect("scored class")).collect(),
            },
            _ => return Err(config_err(format!("head init must be random or identity, got {h:?}"))),
        };
    }
    let data = load_dataset(&cfg.paths.dataset_dir)?;
    check_leads(&base, &data)?;
    let everything = all_beats(&data);
    let result = segment_finetune_eval(&base, &data.train, &everything, &cfg.segment)?;
    let full = confusion(&base, &everything, "full", cfg.eval.batch)?;
    let table = table4_text(&full, None, &[&result]);

    let [p, q] = result.classes.map(|c| c.symbol());
    println!("cut after block {}, pair {p}-{q}, {} beats re-decided", result.cut_block, result.n_scored);
    for (label, cm) in [("base", &result.base), ("refined", &result.refined)] {
        println!(
            "{label:<8} {p}->{p} [{}] {p}->{q} [{}] {q}->{p} [{}] {q}->{q} [{}]",
            cm.get(0, 0),
            cm.get(0, 1),
            cm.get(1, 0),
            cm.get(1, 1)
        );
    }
    print!("{table}");

    let out_dir = cfg.paths.report_dir.join("segment");
    let mut staged = Staged::new(&out_dir)?;
    let stem = format!("{p}{q}_cut{}", result.cut_block);
    staged.add(&format!("segment_{stem}.json"), serde_json::to_vec_pretty(&result)?)?;
    staged.add(&format!("table4_{stem}.txt"), &table)?;
    staged.add(&format!("pair_confusion_{stem}.csv"), {
        let mut s = String::from("model,label,predicted,count\n");
        for (label, cm) in [("base", &result.base), ("refined", &result.refined)] {
            for (i, t) in [p, q].iter().enumerate() {
                for (j, pr) in [p, q].iter().enumerate() {
                    s.push_str(&format!("{label},{t},{pr},{}\n", cm.get(i, j)));
                }
            }
        }
        s
    })?;
    staged.add(EFFECTIVE_CONFIG, cfg.to_toml()?)?;
    staged.commit()?;
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs) -> Result<()> {
    if a.cases == 0 {
        return Err(config_err("cases must be positive"));
    }
    let results = isenet::gradsuite::run(a.cases, a.seed);
    println!("{:<22} {:>5} {:>7} {:>9} {:>12}  status", "op", "cases", "checked", "elements", "max_rel_err");
    let mut failed = Vec::new();
    for r in &results {
        // cases whose probe straddles a kink are skipped; most must remain
        let ok = r.passes(r.cases.div_ceil(2), a.tolerance);
        println!(
            "{:<22} {:>5} {:>7} {:>9} {:>12.3e}  {}",
            r.op,
            r.cases,
            r.checked_cases(),
            r.elements,
            r.max_rel_error,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failed.push(r.op);
        }
    }
    if !failed.is_empty() {
        return Err(NumericError(format!("gradient check failed for {}", failed.join(", "))).into());
    }
    Ok(())
}
