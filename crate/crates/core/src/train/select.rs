use std::cmp::Ordering;

/// `Sen + Ppr` of the selection class; undefined terms count as 0.
pub fn selection_index(sen: Option<f64>, ppr: Option<f64>) -> f64 {
    sen.unwrap_or(0.0) + ppr.unwrap_or(0.0)
}

/// Orders by larger index first, then earlier epoch.
pub(crate) fn by_index(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Picks an epoch from `(epoch, index, mcc)` candidates: the `top_k`
/// largest indices are kept and the one with the largest MCC wins, earlier
/// epochs breaking ties. The result does not depend on input order.
pub fn select_checkpoint(candidates: &[(usize, f64, Option<f64>)], top_k: usize) -> Option<usize> {
    let mut ranked: Vec<&(usize, f64, Option<f64>)> = candidates.iter().collect();
    ranked.sort_by(|a, b| by_index(&(a.0, a.1), &(b.0, b.1)));
    ranked.truncate(top_k);
    ranked
        .into_iter()
        .min_by(|a, b| {
            let (ma, mb) = (a.2.unwrap_or(f64::NEG_INFINITY), b.2.unwrap_or(f64::NEG_INFINITY));
            mb.total_cmp(&ma).then(a.0.cmp(&b.0))
        })
        .map(|c| c.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mcc_decides_within_top_k() {
        let c = [(1, 1.5, Some(0.9)), (2, 1.8, Some(0.5)), (3, 1.7, Some(0.6)), (4, 0.2, Some(0.99))];
        assert_eq!(select_checkpoint(&c, 3), Some(1));
        assert_eq!(select_checkpoint(&c, 2), Some(3));
        assert_eq!(select_checkpoint(&c, 1), Some(2));
        assert_eq!(select_checkpoint(&c, 10), Some(4));
    }

    #[test]
    fn ties_go_to_the_earliest_epoch() {
        let c = [(5, 1.0, Some(0.5)), (2, 1.0, Some(0.5)), (9, 1.0, None)];
        assert_eq!(select_checkpoint(&c, 10), Some(2));
        assert_eq!(select_checkpoint(&[], 10), None);
    }
}
