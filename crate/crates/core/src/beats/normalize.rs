pub const NORMALIZE_EPS: f64 = 1e-8;

/// Z-score `(x - mean) / (std + eps)` with the population standard
/// deviation. A constant series maps to zeros.
pub fn normalize_lead(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    if x.iter().all(|v| *v == x[0]) {
        return vec![0.0; x.len()];
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + NORMALIZE_EPS;
    x.iter().map(|v| (v - mean) / denom).collect()
}

/// Normalizes each lead independently.
pub fn normalize_beat(leads: &[Vec<f64>]) -> Vec<Vec<f64>> {
    leads.iter().map(|l| normalize_lead(l)).collect()
}
