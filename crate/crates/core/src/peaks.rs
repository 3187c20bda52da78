//! Peak location on the interest series, ranking, thumbnail choice and the
//! per-peak candidate windows.
//!
//! Peaks sit where the first difference changes sign from positive to
//! negative. A flat top between the rise and the fall is one peak, reported at
//! the middle of the flat run (lower middle for even lengths).

use serde::Serialize;
use thiserror::Error;

use crate::series::ActivitySeries;

/// Default look-back from a peak to where its segment likely starts.
pub const DEFAULT_CANDIDATE_WINDOW_S: u32 = 60;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PeakError {
    #[error("series too short: {len} cells, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("no peaks found: not enough replay activity")]
    NoPeaks,
}

/// A local maximum, in time order as found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub time_s: u32,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankedPeak {
    pub time_s: u32,
    pub value: f64,
    /// 1 is the most watched-again moment.
    pub rank: u32,
}

impl From<RankedPeak> for Peak {
    fn from(p: RankedPeak) -> Self {
        Peak { time_s: p.time_s, value: p.value }
    }
}

/// Closed interval `[start_s, end_s]` in which the segment start is expected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CandidateWindow {
    pub start_s: u32,
    pub end_s: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeResult {
    pub peaks: Vec<RankedPeak>,
    /// One per peak, same order.
    pub windows: Vec<CandidateWindow>,
    pub thumbnail_time_s: u32,
}

/// First difference: `d[t] = cells[t+1] - cells[t]`.
pub fn derivative(cells: &[f64]) -> Result<Vec<f64>, PeakError> {
    if cells.len() < 2 {
        return Err(PeakError::TooShort { len: cells.len(), min: 2 });
    }
    Ok(cells.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Finds peaks on a series. See [`find_peaks_in`].
pub fn find_peaks(series: &ActivitySeries, min_value: f64) -> Result<Vec<Peak>, PeakError> {
    find_peaks_in(series.cells(), min_value)
}

/// Time-ordered peaks with value strictly above `min_value`. Use `0.0` to keep
/// every positive peak. Runs touching either end of the series never count.
pub fn find_peaks_in(cells: &[f64], min_value: f64) -> Result<Vec<Peak>, PeakError> {
    if cells.len() < 3 {
        return Err(PeakError::TooShort { len: cells.len(), min: 3 });
    }
    let d = derivative(cells)?;
    let mut peaks = Vec::new();
    // First cell of the run entered by the latest rise, if no fall since.
    let mut rise_to: Option<usize> = None;
    for (i, &slope) in d.iter().enumerate() {
        if slope > 0.0 {
            rise_to = Some(i + 1);
        } else if slope < 0.0 {
            if let Some(a) = rise_to.take() {
                let t = (a + i) / 2;
                let value = cells[t];
                if value > min_value {
                    peaks.push(Peak { time_s: t as u32, value });
                }
            }
        }
    }
    Ok(peaks)
}

/// Orders by value descending, earlier time first on ties, and numbers 1..n.
pub fn rank_peaks(peaks: &[Peak]) -> Vec<RankedPeak> {
    let mut sorted = peaks.to_vec();
    sorted.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.time_s.cmp(&b.time_s)));
    sorted
        .into_iter()
        .zip(1..)
        .map(|(p, rank)| RankedPeak { time_s: p.time_s, value: p.value, rank })
        .collect()
}

/// The rank-1 peak. `NoPeaks` means the caller should fall back to time 0.
pub fn select_thumbnail(ranked: &[RankedPeak]) -> Result<RankedPeak, PeakError> {
    ranked.iter().copied().min_by_key(|p| p.rank).ok_or(PeakError::NoPeaks)
}

/// Attaches `[max(0, t - window_s), t]` to every ranked peak.
pub fn keyframe_windows(ranked: &[RankedPeak], window_s: u32) -> Result<KeyframeResult, PeakError> {
    let thumbnail = select_thumbnail(ranked)?;
    let windows = ranked
        .iter()
        .map(|p| CandidateWindow { start_s: p.time_s.saturating_sub(window_s), end_s: p.time_s })
        .collect();
    Ok(KeyframeResult { peaks: ranked.to_vec(), windows, thumbnail_time_s: thumbnail.time_s })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(peaks: &[Peak]) -> Vec<u32> {
        peaks.iter().map(|p| p.time_s).collect()
    }

    fn peaks(pairs: &[(u32, f64)]) -> Vec<Peak> {
        pairs.iter().map(|&(time_s, value)| Peak { time_s, value }).collect()
    }

    #[test]
    fn derivative_cases() {
        assert_eq!(derivative(&[0.0, 1.0, 2.0, 3.0]).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(derivative(&[4.0; 5]).unwrap(), vec![0.0; 4]);
        assert_eq!(derivative(&[1.0]), Err(PeakError::TooShort { len: 1, min: 2 }));
    }

    #[test]
    fn single_apex() {
        let p = find_peaks_in(&[0.0, 1.0, 2.0, 3.0, 2.0, 1.0, 0.0], 0.0).unwrap();
        assert_eq!(p, vec![Peak { time_s: 3, value: 3.0 }]);
    }

    #[test]
    fn plateau_midpoint() {
        assert_eq!(find_peaks_in(&[0.0, 1.0, 1.0, 1.0, 0.0], 0.0).unwrap(), vec![Peak { time_s: 2, value: 1.0 }]);
        // even-length plateau takes the lower middle
        assert_eq!(times(&find_peaks_in(&[0.0, 2.0, 2.0, 0.0], 0.0).unwrap()), vec![1]);
    }

    #[test]
    fn monotone_and_boundary_runs_are_not_peaks() {
        assert!(find_peaks_in(&[0.0, 1.0, 2.0, 3.0], 0.0).unwrap().is_empty());
        assert!(find_peaks_in(&[3.0, 2.0, 1.0], 0.0).unwrap().is_empty());
        assert!(find_peaks_in(&[2.0, 2.0, 1.0, 0.0], 0.0).unwrap().is_empty());
        assert!(find_peaks_in(&[0.0, 1.0, 2.0, 2.0], 0.0).unwrap().is_empty());
        assert_eq!(find_peaks_in(&[0.0, 1.0], 0.0), Err(PeakError::TooShort { len: 2, min: 3 }));
    }

    #[test]
    fn shoulder_is_not_a_peak() {
        // rise, flat, rise again: only the final top counts
        assert_eq!(times(&find_peaks_in(&[0.0, 1.0, 1.0, 2.0, 0.0], 0.0).unwrap()), vec![3]);
        // fall, flat, fall: nothing pending
        assert_eq!(times(&find_peaks_in(&[0.0, 3.0, 2.0, 2.0, 1.0, 0.0], 0.0).unwrap()), vec![1]);
    }

    #[test]
    fn min_value_filter() {
        let cells = [0.0, 1.0, 0.0, 5.0, 0.0];
        assert_eq!(times(&find_peaks_in(&cells, 0.0).unwrap()), vec![1, 3]);
        assert_eq!(times(&find_peaks_in(&cells, 1.0).unwrap()), vec![3]);
        assert!(find_peaks_in(&[0.0; 8], 0.0).unwrap().is_empty());
    }

    #[test]
    fn ranking_by_value_then_time() {
        let ranked = rank_peaks(&peaks(&[(73, 10.0), (158, 10.0), (398, 9.0), (555, 13.0)]));
        assert_eq!(ranked.iter().map(|p| p.time_s).collect::<Vec<_>>(), vec![555, 73, 158, 398]);
        assert_eq!(ranked.iter().map(|p| p.rank).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        let single = rank_peaks(&peaks(&[(42, 1.0)]));
        assert_eq!(single[0].rank, 1);
        let tie = rank_peaks(&peaks(&[(20, 3.0), (10, 3.0)]));
        assert_eq!(tie[0].time_s, 10);
    }

    #[test]
    fn thumbnail_is_rank_one() {
        let lecture = rank_peaks(&peaks(&[(73, 10.0), (158, 10.0), (398, 9.0), (555, 13.0)]));
        assert_eq!(select_thumbnail(&lecture).unwrap().time_s, 555);
        let howto = rank_peaks(&peaks(&[(150, 16.0), (251, 8.0), (361, 3.0), (496, 7.0)]));
        assert_eq!(select_thumbnail(&howto).unwrap().time_s, 150);
        assert_eq!(select_thumbnail(&rank_peaks(&peaks(&[(42, 1.0)]))).unwrap().time_s, 42);
        assert_eq!(select_thumbnail(&[]), Err(PeakError::NoPeaks));
    }

    #[test]
    fn windows_look_back_sixty_seconds() {
        let r = keyframe_windows(&rank_peaks(&peaks(&[(555, 13.0)])), DEFAULT_CANDIDATE_WINDOW_S).unwrap();
        assert_eq!(r.windows, vec![CandidateWindow { start_s: 495, end_s: 555 }]);
        assert_eq!(r.thumbnail_time_s, 555);
        let r = keyframe_windows(&rank_peaks(&peaks(&[(30, 1.0)])), 60).unwrap();
        assert_eq!(r.windows[0], CandidateWindow { start_s: 0, end_s: 30 });
        let r = keyframe_windows(&rank_peaks(&peaks(&[(73, 2.0), (158, 1.0)])), 60).unwrap();
        let w: Vec<_> = r.windows.iter().map(|w| (w.start_s, w.end_s)).collect();
        assert_eq!(w, vec![(13, 73), (98, 158)]);
        assert_eq!(keyframe_windows(&[], 60), Err(PeakError::NoPeaks));
    }
}
