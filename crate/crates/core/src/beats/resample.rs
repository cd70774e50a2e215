use rand::Rng;

/// Samples per lead of every emitted beat.
pub const BEAT_LEN: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum Resampled {
    /// One `BEAT_LEN` series per input lead.
    Beat(Vec<Vec<f64>>),
    /// Window length outside the accepted bounds.
    Rejected { len: usize },
}

/// Natural cubic spline through `(i, x[i])`, evaluated at `out_len`
/// uniformly spaced positions spanning `[0, len-1]`. End values are copied
/// exactly.
pub fn spline_resample(x: &[f64], out_len: usize) -> Vec<f64> {
    let n = x.len();
    match (n, out_len) {
        (_, 0) => return Vec::new(),
        (0, _) => return vec![0.0; out_len],
        (1, _) => return vec![x[0]; out_len],
        (_, 1) => return vec![x[0]],
        _ => {}
    }
    // second derivatives M with M[0] = M[n-1] = 0 on a unit grid:
    // M[i-1] + 4 M[i] + M[i+1] = 6 (x[i+1] - 2 x[i] + x[i-1])
    let mut m = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut c = vec![0.0; k];
        let mut d = vec![0.0; k];
        for j in 0..k {
            let rhs = 6.0 * (x[j + 2] - 2.0 * x[j + 1] + x[j]);
            let (cp, dp) = if j == 0 { (0.0, 0.0) } else { (c[j - 1], d[j - 1]) };
            let denom = 4.0 - cp;
            c[j] = 1.0 / denom;
            d[j] = (rhs - dp) / denom;
        }
        for j in (0..k).rev() {
            let next = if j + 1 < k { m[j + 2] } else { 0.0 };
            m[j + 1] = d[j] - c[j] * next;
        }
    }
    let step = (n - 1) as f64 / (out_len - 1) as f64;
    let mut out: Vec<f64> = (0..out_len)
        .map(|t| {
            let pos = t as f64 * step;
            let i = (pos.floor() as usize).min(n - 2);
            let s = pos - i as f64;
            let r = 1.0 - s;
            r * x[i] + s * x[i + 1] + ((r * r * r - r) * m[i] + (s * s * s - s) * m[i + 1]) / 6.0
        })
        .collect();
    out[0] = x[0];
    out[out_len - 1] = x[n - 1];
    out
}

/// Sorted random subset of `0..len` of size `out_len` that always keeps the
/// first and last index.
pub fn resample_indices<R: Rng + ?Sized>(len: usize, out_len: usize, rng: &mut R) -> Vec<usize> {
    assert!(len >= out_len && out_len >= 2);
    let mut idx: Vec<usize> = rand::seq::index::sample(rng, len - 2, out_len - 2)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    idx.sort_unstable();
    let mut out = Vec::with_capacity(out_len);
    out.push(0);
    out.extend(idx);
    out.push(len - 1);
    out
}

/// Brings every lead of a window to `BEAT_LEN` samples: spline upsampling
/// when shorter, random index subsampling (shared across leads) when
/// longer. Windows outside `bounds` (inclusive) are rejected.
pub fn resample_to_512<R: Rng + ?Sized>(leads: &[&[f64]], bounds: (usize, usize), rng: &mut R) -> Resampled {
    let len = leads.first().map_or(0, |l| l.len());
    debug_assert!(leads.iter().all(|l| l.len() == len));
    if len < bounds.0 || len > bounds.1 || len < 2 {
        return Resampled::Rejected { len };
    }
    let out = match len.cmp(&BEAT_LEN) {
        std::cmp::Ordering::Equal => leads.iter().map(|l| l.to_vec()).collect(),
        std::cmp::Ordering::Less => leads.iter().map(|l| spline_resample(l, BEAT_LEN)).collect(),
        std::cmp::Ordering::Greater => {
            let idx = resample_indices(len, BEAT_LEN, rng);
            leads.iter().map(|l| idx.iter().map(|&i| l[i]).collect()).collect()
        }
    };
    Resampled::Beat(out)
}
