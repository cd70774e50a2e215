use rand::seq::SliceRandom;
use rand::Rng;

/// Splits sample indices into `(train, validation)` so that each label
/// contributes `round(fraction * n)` samples to validation, while keeping at
/// least one sample of every label in training. Both lists are sorted.
pub fn stratified_holdout<R: Rng + ?Sized>(labels: &[usize], fraction: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for (i, &l) in labels.iter().enumerate() {
        by_label[l].push(i);
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for mut idx in by_label {
        idx.shuffle(rng);
        let take = ((fraction * idx.len() as f64).round() as usize).min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..take]);
        train.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}
