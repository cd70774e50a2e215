use serde::{Deserialize, Serialize};

use super::excitation::ExcitationTrace;
use super::{EvalError, Result};
use crate::wfdb::AamiClass;

pub const MSD_SCALE: f64 = 100.0;

pub const CLASS_PAIRS: [(AamiClass, AamiClass); 6] = [
    (AamiClass::N, AamiClass::S),
    (AamiClass::N, AamiClass::V),
    (AamiClass::N, AamiClass::F),
    (AamiClass::S, AamiClass::V),
    (AamiClass::S, AamiClass::F),
    (AamiClass::V, AamiClass::F),
];

/// `scale / C * sum (m_i - n_i)^2`.
pub fn msd(m: &[f64], n: &[f64], scale: f64) -> Result<f64> {
    if m.len() != n.len() || m.is_empty() {
        return Err(EvalError::Shape(format!("mean square deviation of {} vs {} channels", m.len(), n.len())));
    }
    let ss: f64 = m.iter().zip(n).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(scale / m.len() as f64 * ss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdRow {
    pub block: usize,
    pub unit: usize,
    pub pair: String,
    pub msd: f64,
}

/// MSD for every class pair present at every captured site, sorted by
/// site and then pair order.
pub fn msd_table(traces: &[ExcitationTrace]) -> Result<Vec<MsdRow>> {
    let mut sites: Vec<(usize, usize)> = traces.iter().map(|t| (t.block, t.unit)).collect();
    sites.sort_unstable();
    sites.dedup();
    let mut rows = Vec::new();
    for (block, unit) in sites {
        let find = |c: AamiClass| traces.iter().find(|t| t.block == block && t.unit == unit && t.class == c);
        for (a, b) in CLASS_PAIRS {
            if let (Some(ta), Some(tb)) = (find(a), find(b)) {
                rows.push(MsdRow {
                    block,
                    unit,
                    pair: format!("{}-{}", a.symbol(), b.symbol()),
                    msd: msd(&ta.mean, &tb.mean, MSD_SCALE)?,
                });
            }
        }
    }
    Ok(rows)
}
