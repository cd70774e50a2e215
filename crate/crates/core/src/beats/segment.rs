use crate::wfdb::{AamiClass, RawRecord};

/// One raw beat cut from a record, before filtering and resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatWindow {
    pub r_index: usize,
    pub mit_code: u8,
    pub aami_class: AamiClass,
    /// Inclusive sample range.
    pub start: usize,
    pub end: usize,
}

impl BeatWindow {
    pub fn n_samples(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Inclusive bounds `[R_j - floor(I_j/2), R_j + floor(I_{j+1}/2)]` for every
/// interior peak, where `I_j = R_j - R_{j-1}`. The first and last peaks only
/// serve as neighbours.
pub fn window_bounds(r_peaks: &[usize]) -> Vec<(usize, usize)> {
    r_peaks
        .windows(3)
        .map(|w| {
            let (prev, r, next) = (w[0], w[1], w[2]);
            (r - (r - prev) / 2, r + (next - r) / 2)
        })
        .collect()
}

/// Cuts a record at the midpoints between adjacent QRS annotations. Every
/// QRS annotation acts as a neighbour; only beats with an AAMI class are
/// returned.
pub fn segment_beats(record: &RawRecord) -> Vec<BeatWindow> {
    let beats: Vec<_> = record.beat_annotations().collect();
    let peaks: Vec<usize> = beats.iter().map(|a| a.sample_index).collect();
    window_bounds(&peaks)
        .into_iter()
        .zip(&beats[1.min(beats.len())..])
        .filter(|(_, a)| a.aami_class != AamiClass::Excluded)
        .map(|((start, end), a)| BeatWindow {
            r_index: a.sample_index,
            mit_code: a.mit_code,
            aami_class: a.aami_class,
            start,
            end,
        })
        .collect()
}
