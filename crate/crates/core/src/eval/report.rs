//! CSV, JSON and text renderings of evaluation results.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::confusion::ConfusionMatrix;
use super::excitation::ExcitationTrace;
use super::finetune::FinetuneResult;
use super::metrics::{display_percent, MetricsReport};
use super::msd::MsdRow;
use super::Result;
use crate::wfdb::AamiClass;

pub const METRICS_HEADER: &str = "model,subset,positive,fusion_policy,tp,tn,fp,fn,acc,sen,spe,ppr,mcc";

/// Writes through a temporary file in the same directory, so readers see
/// either the old content or the new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(write_atomic(path, &bytes)?)
}

fn symbol(i: usize, n: usize) -> String {
    match AamiClass::from_index(i) {
        Some(c) if n == 5 => c.symbol().to_string(),
        _ => i.to_string(),
    }
}

/// `label,<predicted...>,sum` rows followed by a column-sum row.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let n = cm.n_classes;
    let names: Vec<String> = (0..n).map(|i| symbol(i, n)).collect();
    let mut out = format!("label,{},sum\n", names.join(","));
    let rows = cm.row_sums();
    for t in 0..n {
        let cells: Vec<String> = (0..n).map(|p| cm.get(t, p).to_string()).collect();
        out.push_str(&format!("{},{},{}\n", names[t], cells.join(","), rows[t]));
    }
    let cols: Vec<String> = cm.col_sums().iter().map(u64::to_string).collect();
    out.push_str(&format!("sum,{},{}\n", cols.join(","), cm.total()));
    out
}

/// One row per `(model name, report)`; rates in percent with one decimal,
/// `-` where undefined.
pub fn metrics_csv(rows: &[(String, MetricsReport)]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for (model, r) in rows {
        let c = r.counts;
        let policy = serde_json::to_value(r.fusion_policy).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        out.push_str(&format!(
            "{model},{},{},{policy},{},{},{},{},{},{},{},{},{}\n",
            r.subset_id,
            r.positive_class.symbol(),
            c.tp,
            c.tn,
            c.fp,
            c.fn_,
            display_percent(r.acc_f64()),
            display_percent(r.sen_f64()),
            display_percent(r.spe_f64()),
            display_percent(r.ppr_f64()),
            r.mcc.map_or_else(|| "-".to_string(), |m| format!("{m:.4}")),
        ));
    }
    out
}

/// Long format: one row per channel value.
pub fn excitation_csv(traces: &[ExcitationTrace]) -> String {
    let mut out = String::from("block,unit,class,n_samples,with_replacement,channel,value\n");
    for t in traces {
        for (c, v) in t.mean.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{c},{v:.9}\n",
                t.block,
                t.unit,
                t.class.symbol(),
                t.n_samples,
                t.with_replacement
            ));
        }
    }
    out
}

pub fn msd_csv(rows: &[MsdRow]) -> String {
    let mut out = String::from("block,unit,pair,msd\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{:.6}\n", r.block, r.unit, r.pair, r.msd));
    }
    out
}

/// Plain-text confusion table: `full (subset)` in every cell, and
/// `[refined]` after the cells covered by a fine-tuned pair model.
pub fn table4_text(full: &ConfusionMatrix, subset: Option<&ConfusionMatrix>, refined: &[&FinetuneResult]) -> String {
    let n = full.n_classes;
    let bracket = |t: usize, p: usize| -> Option<u64> {
        refined.iter().find_map(|r| {
            let (a, b) = (r.classes[0].index()?, r.classes[1].index()?);
            let i = [a, b].iter().position(|&c| c == t)?;
            let j = [a, b].iter().position(|&c| c == p)?;
            Some(r.refined.get(i, j))
        })
    };
    let cell = |f: u64, s: Option<u64>, b: Option<u64>| {
        let mut c = f.to_string();
        if let Some(s) = s {
            c.push_str(&format!(" ({s})"));
        }
        if let Some(b) = b {
            c.push_str(&format!(" [{b}]"));
        }
        c
    };
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["Label".to_string()];
    header.extend((0..n).map(|i| symbol(i, n)));
    header.push("Sum".into());
    rows.push(header);
    let (fr, sr) = (full.row_sums(), subset.map(|s| s.row_sums()));
    for t in 0..n {
        let mut row = vec![symbol(t, n)];
        row.extend((0..n).map(|p| cell(full.get(t, p), subset.map(|s| s.get(t, p)), bracket(t, p))));
        row.push(cell(fr[t], sr.as_ref().map(|r| r[t]), None));
        rows.push(row);
    }
    let (fc, sc) = (full.col_sums(), subset.map(|s| s.col_sums()));
    let mut last = vec!["Sum".to_string()];
    last.extend((0..n).map(|p| cell(fc[p], sc.as_ref().map(|c| c[p]), None)));
    last.push(cell(full.total(), subset.map(|s| s.total()), None));
    rows.push(last);

    let widths: Vec<usize> = (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(v, w)| format!("{v:>w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
