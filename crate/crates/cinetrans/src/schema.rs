//! JSON shapes of the CLI artifacts that are not core types themselves.

use cinetrans_core::analysis::CaptureStats;
use cinetrans_core::curation::Segment;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// An artifact body with the run configuration attached under `"config"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithConfig<T> {
    #[serde(flatten)]
    pub body: T,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupJson {
    pub start: usize,
    pub end: usize,
    pub segment_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchJson {
    /// Index ranges into the input segment list.
    pub groups: Vec<GroupJson>,
    pub dropped: Vec<usize>,
}

impl StitchJson {
    pub fn new(segments: &[Segment], groups: &[std::ops::Range<usize>]) -> Self {
        let mut kept = vec![false; segments.len()];
        let groups = groups
            .iter()
            .map(|g| {
                kept[g.clone()].iter_mut().for_each(|k| *k = true);
                GroupJson {
                    start: g.start,
                    end: g.end,
                    segment_ids: segments[g.clone()].iter().map(|s| s.id).collect(),
                }
            })
            .collect();
        let dropped = segments.iter().zip(&kept).filter(|(_, &k)| !k).map(|(s, _)| s.id).collect();
        Self { groups, dropped }
    }
}

/// JSON has no infinity, so an infinite ratio is written as `null` with
/// the matching `*_infinite` flag set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapStatsJson {
    pub layer: usize,
    pub head: usize,
    pub intra_mean: f64,
    pub inter_mean: f64,
    pub ratio: Option<f64>,
    pub ratio_infinite: bool,
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsJson {
    pub maps: Vec<MapStatsJson>,
    pub mean_ratio: Option<f64>,
    pub mean_ratio_infinite: bool,
    pub mean_correlation: Option<f64>,
}

fn finite(v: f64) -> (Option<f64>, bool) {
    if v.is_infinite() {
        (None, true)
    } else {
        (Some(v), false)
    }
}

impl From<&CaptureStats> for StatsJson {
    fn from(s: &CaptureStats) -> Self {
        let maps = s
            .maps
            .iter()
            .map(|m| {
                let (ratio, ratio_infinite) = finite(m.ratio.ratio);
                MapStatsJson {
                    layer: m.layer,
                    head: m.head,
                    intra_mean: m.ratio.intra_mean,
                    inter_mean: m.ratio.inter_mean,
                    ratio,
                    ratio_infinite,
                    correlation: m.correlation,
                }
            })
            .collect();
        let (mean_ratio, mean_ratio_infinite) = finite(s.mean_ratio);
        Self {
            maps,
            mean_ratio,
            mean_ratio_infinite,
            mean_correlation: s.mean_correlation,
        }
    }
}
