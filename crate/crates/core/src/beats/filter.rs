use serde::{Deserialize, Serialize};

/// Baseline removal by a two-stage median filter followed by a moving
/// average low-pass. Window lengths are given in milliseconds and rounded
/// to the nearest odd sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    pub sampling_rate: f64,
    pub baseline_short_ms: f64,
    pub baseline_long_ms: f64,
    pub smooth_taps: usize,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            sampling_rate: 360.0,
            baseline_short_ms: 200.0,
            baseline_long_ms: 600.0,
            smooth_taps: 9,
        }
    }
}

impl DenoiseConfig {
    fn odd_len(&self, ms: f64) -> usize {
        let n = (ms * self.sampling_rate / 1000.0).round() as usize;
        n | 1
    }

    pub fn short_window(&self) -> usize {
        self.odd_len(self.baseline_short_ms)
    }

    pub fn long_window(&self) -> usize {
        self.odd_len(self.baseline_long_ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoised {
    pub values: Vec<f64>,
    /// Set when the input was too short to filter and was returned as is.
    pub passthrough: bool,
}

/// Index into `0..n` under repeated mirror reflection about the end
/// samples (`x[-k] = x[k]`, `x[n-1+k] = x[n-1-k]`).
fn mirror(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn padded(x: &[f64], half: usize) -> impl Iterator<Item = f64> + '_ {
    let n = x.len();
    (-(half as isize)..(n + half) as isize).map(move |i| x[mirror(i, n)])
}

/// Sliding median over an odd window with mirrored edges.
pub fn median_filter(x: &[f64], window: usize) -> Vec<f64> {
    assert!(window % 2 == 1, "median window must be odd");
    if x.is_empty() {
        return Vec::new();
    }
    let half = window / 2;
    let ext: Vec<f64> = padded(x, half).collect();
    let mut sorted: Vec<f64> = ext[..window].to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(x.len());
    out.push(sorted[half]);
    for i in 1..x.len() {
        let leaving = ext[i - 1];
        let pos = sorted.partition_point(|v| v.total_cmp(&leaving).is_lt());
        sorted.remove(pos);
        let entering = ext[i + window - 1];
        let pos = sorted.partition_point(|v| v.total_cmp(&entering).is_lt());
        sorted.insert(pos, entering);
        out.push(sorted[half]);
    }
    out
}

/// Centered moving average with mirrored edges.
pub fn moving_average(x: &[f64], taps: usize) -> Vec<f64> {
    assert!(taps % 2 == 1, "moving average length must be odd");
    if x.is_empty() {
        return Vec::new();
    }
    let half = taps / 2;
    let ext: Vec<f64> = padded(x, half).collect();
    ext.windows(taps).map(|w| w.iter().sum::<f64>() / taps as f64).collect()
}

/// Removes baseline wander and high-frequency noise. Output length equals
/// input length.
pub fn denoise(x: &[f64], cfg: &DenoiseConfig) -> Denoised {
    if x.len() < cfg.smooth_taps.max(1) {
        return Denoised {
            values: x.to_vec(),
            passthrough: true,
        };
    }
    let stage1 = median_filter(x, cfg.short_window());
    let baseline = median_filter(&stage1, cfg.long_window());
    let detrended: Vec<f64> = x.iter().zip(&baseline).map(|(v, b)| v - b).collect();
    Denoised {
        values: moving_average(&detrended, cfg.smooth_taps | 1),
        passthrough: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_median(x: &[f64], window: usize) -> Vec<f64> {
        let half = window / 2;
        (0..x.len())
            .map(|i| {
                let mut w: Vec<f64> = (0..window)
                    .map(|k| x[mirror(i as isize + k as isize - half as isize, x.len())])
                    .collect();
                w.sort_by(f64::total_cmp);
                w[half]
            })
            .collect()
    }

    #[test]
    fn window_lengths() {
        let c = DenoiseConfig::default();
        assert_eq!(c.short_window(), 73);
        assert_eq!(c.long_window(), 217);
    }

    #[test]
    fn mirror_reflects_about_end_samples() {
        let idx: Vec<usize> = (-3..8).map(|i| mirror(i, 5)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
    }

    #[test]
    fn sliding_median_matches_sorting() {
        let x: Vec<f64> = (0..60).map(|i| ((i * 37) % 11) as f64 - (i % 3) as f64 * 0.5).collect();
        for w in [1, 3, 7, 21, 73] {
            assert_eq!(median_filter(&x, w), naive_median(&x, w), "window {w}");
        }
    }

    #[test]
    fn constant_becomes_zero() {
        let d = denoise(&[2.5; 400], &DenoiseConfig::default());
        assert!(d.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ramp_is_removed_in_the_centre() {
        let n = 2000;
        let drift = 3.0;
        let x: Vec<f64> = (0..n).map(|i| drift * i as f64 / n as f64).collect();
        let d = denoise(&x, &DenoiseConfig::default());
        let worst = d.values[n / 4..3 * n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 0.05 * drift, "residual {worst}");
    }

    #[test]
    fn nyquist_impulses_are_attenuated() {
        let x: Vec<f64> = (0..720).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let d = denoise(&x, &DenoiseConfig::default());
        let amp = d.values[100..620].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(amp <= 0.5, "amplitude {amp}");
    }

    #[test]
    fn short_input_passes_through() {
        let d = denoise(&[1.0, 2.0, 3.0], &DenoiseConfig::default());
        assert!(d.passthrough);
        assert_eq!(d.values, vec![1.0, 2.0, 3.0]);
    }
}
