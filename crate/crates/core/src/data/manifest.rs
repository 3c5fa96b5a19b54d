use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Application,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Test => "test",
            Self::Application => "application",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "test" => Ok(Self::Test),
            "application" => Ok(Self::Application),
            _ => Err(Error::parse("split tag", format!("unknown split {s:?}"))),
        }
    }
}

pub const TRAIN_IDS: [u32; 8] = [1, 4, 10, 11, 16, 19, 20, 30];
pub const TEST_IDS: [u32; 8] = [6, 8, 14, 15, 21, 22, 24, 26];
pub const APPLICATION_IDS: [u32; 15] = [2, 3, 5, 7, 9, 12, 13, 17, 18, 23, 25, 27, 28, 29, 31];

/// Split tag of a recorded dataset id.
pub fn split_of(id: u32) -> Option<Split> {
    if TRAIN_IDS.contains(&id) {
        Some(Split::Train)
    } else if TEST_IDS.contains(&id) {
        Some(Split::Test)
    } else if APPLICATION_IDS.contains(&id) {
        Some(Split::Application)
    } else {
        None
    }
}

/// Metadata of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub id: u32,
    /// ISO date.
    pub day: String,
    /// Local start time `hh:mm:ss`.
    pub start: String,
    pub duration_s: f64,
    pub passing_count: u32,
    pub passing_speed_kmh: f64,
    pub entering_count: u32,
    pub entering_speed_kmh: f64,
    pub split: Split,
    pub tau2: f64,
    pub tau3: f64,
}

impl DatasetManifest {
    /// Mean arrival rates `[ramp, main]` in vehicles/h.
    pub fn rates(&self) -> [f64; 2] {
        let h = self.duration_s / 3600.0;
        [self.entering_count as f64 / h, self.passing_count as f64 / h]
    }
}

const DAYS: [&str; 4] = ["2019-05-13", "2019-05-14", "2019-05-15", "2019-06-21"];

// id, day, start, duration (s), passing n, passing km/h, entering n, entering km/h, tau2, tau3
#[rustfmt::skip]
const RECORDINGS: [(u32, usize, &str, f64, u32, f64, u32, f64, f64, f64); 31] = [
    (1, 0, "05:10:30", 325.0, 281, 74.9, 52, 66.1, 0.75, 7.00),
    (2, 0, "05:15:57", 326.0, 301, 74.3, 71, 63.5, -0.25, 6.00),
    (3, 0, "05:21:24", 332.0, 298, 71.0, 71, 62.3, -0.25, 6.75),
    (4, 0, "05:43:57", 326.0, 312, 67.3, 73, 56.3, 0.50, 9.75),
    (5, 0, "05:49:25", 326.0, 288, 65.0, 76, 53.3, 0.00, 9.25),
    (6, 0, "05:54:52", 327.0, 286, 67.3, 68, 56.2, 0.00, 8.75),
    (7, 0, "06:00:22", 98.0, 28, 68.2, 3, 49.4, 4.50, 13.50),
    (8, 0, "06:04:34", 326.0, 282, 67.7, 89, 56.3, 1.25, 9.50),
    (9, 0, "06:38:58", 326.0, 269, 67.4, 64, 56.9, 0.00, 9.00),
    (10, 0, "06:44:26", 85.0, 63, 48.8, 11, 32.2, -5.00, 9.75),
    (11, 1, "15:10:37", 165.0, 85, 74.4, 18, 61.7, -0.50, 7.25),
    (12, 1, "15:26:35", 327.0, 215, 39.2, 33, 33.3, 5.00, 17.25),
    (13, 1, "15:44:39", 327.0, 233, 66.3, 50, 54.7, 0.00, 9.00),
    (14, 1, "15:50:07", 327.0, 235, 73.0, 54, 61.0, 0.00, 8.50),
    (15, 1, "15:55:34", 142.0, 107, 73.3, 29, 63.8, -0.25, 8.25),
    (16, 1, "16:02:44", 327.0, 250, 73.5, 69, 62.6, -0.25, 7.50),
    (17, 1, "16:08:13", 326.0, 244, 74.2, 59, 61.4, -0.25, 7.75),
    (18, 1, "16:19:24", 186.0, 149, 67.3, 37, 61.4, -0.25, 7.75),
    (19, 2, "06:07:22", 327.0, 300, 65.2, 89, 54.4, -0.75, 9.00),
    (20, 2, "06:12:51", 326.0, 278, 63.8, 83, 52.2, 4.50, 13.25),
    (21, 2, "07:26:13", 159.0, 66, 67.4, 7, 58.7, 0.75, 9.75),
    (22, 3, "15:28:14", 326.0, 221, 72.5, 27, 60.5, 0.00, 8.50),
    (23, 3, "15:33:42", 326.0, 247, 72.3, 20, 61.9, 0.00, 8.50),
    (24, 3, "15:39:09", 326.0, 230, 73.7, 15, 62.5, 0.00, 8.25),
    (25, 3, "15:44:36", 168.0, 76, 67.8, 4, 58.9, -4.50, 4.75),
    (26, 3, "16:06:02", 179.0, 79, 68.6, 9, 63.2, 0.00, 8.50),
    (27, 3, "16:11:53", 326.0, 231, 77.3, 31, 62.3, -5.00, 2.75),
    (28, 3, "16:33:19", 327.0, 231, 74.3, 29, 62.2, 0.00, 7.75),
    (29, 3, "16:38:47", 327.0, 244, 68.2, 38, 57.1, 0.00, 8.00),
    (30, 3, "16:44:15", 327.0, 248, 73.0, 34, 62.0, -3.00, 5.00),
    (31, 3, "16:49:45", 274.0, 171, 68.6, 14, 54.7, 0.00, 8.50),
];

/// The 31 drone recordings with their statistics, split tags and
/// estimated delays. The trajectories themselves are not distributed;
/// these rows parametrize the synthetic corpus.
pub fn recorded_manifest() -> Vec<DatasetManifest> {
    RECORDINGS
        .iter()
        .map(|&(id, day, start, duration_s, pn, pv, en, ev, tau2, tau3)| DatasetManifest {
            id,
            day: DAYS[day].to_string(),
            start: start.to_string(),
            duration_s,
            passing_count: pn,
            passing_speed_kmh: pv,
            entering_count: en,
            entering_speed_kmh: ev,
            split: split_of(id).expect("every recording has a split"),
            tau2,
            tau3,
        })
        .collect()
}

/// Dataset ids grouped by split.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<u32>,
    pub test: Vec<u32>,
    pub application: Vec<u32>,
}

/// Partitions the manifests by the fixed split lists. Unknown or repeated
/// ids are configuration errors, as is a tag that disagrees with the list.
pub fn split_datasets(manifests: &[DatasetManifest]) -> Result<DatasetSplit> {
    let mut seen = BTreeSet::new();
    let mut out = DatasetSplit::default();
    for m in manifests {
        if !seen.insert(m.id) {
            return Err(Error::config(format!("dataset {} listed twice", m.id)));
        }
        let split = split_of(m.id).ok_or_else(|| Error::config(format!("unknown dataset id {}", m.id)))?;
        if split != m.split {
            return Err(Error::config(format!(
                "dataset {} is tagged {} but belongs to {}",
                m.id, m.split, split
            )));
        }
        match split {
            Split::Train => out.train.push(m.id),
            Split::Test => out.test.push(m.id),
            Split::Application => out.application.push(m.id),
        }
    }
    Ok(out)
}
