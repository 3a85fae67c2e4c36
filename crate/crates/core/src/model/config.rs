use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Searchable channel widths; 12 widths × 5 block counts = 60 candidates.
pub const CHANNEL_GRID: [usize; 12] = [32, 64, 96, 128, 160, 192, 224, 256, 320, 384, 448, 512];
pub const OPS_GRID: [usize; 5] = [3, 4, 5, 6, 7];

/// Exit depth of the nested cascade.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Depth {
    Shallow,
    Medium,
    Deep,
}

impl Depth {
    pub const ALL: [Depth; 3] = [Depth::Shallow, Depth::Medium, Depth::Deep];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Depth> {
        Self::ALL.get(i).copied()
    }

    pub fn stages(self) -> usize {
        self.index() + 1
    }
}

impl std::str::FromStr for Depth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shallow" | "0" => Ok(Depth::Shallow),
            "medium" | "1" => Ok(Depth::Medium),
            "deep" | "2" => Ok(Depth::Deep),
            _ => Err(Error::Config(format!("unknown depth `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BackboneConfig {
    /// Channel width `L` shared by the stem and every block.
    pub channels: usize,
    /// Number of depthwise blocks `O`.
    pub ops: usize,
    /// `(C_in, H, W)` of one input.
    pub input_shape: [usize; 3],
    /// Number of events `C`.
    pub events: usize,
    /// Permits test-scale widths and block counts outside the search grid.
    #[serde(default)]
    pub off_grid: bool,
}

impl BackboneConfig {
    pub fn new(channels: usize, ops: usize, input_shape: [usize; 3], events: usize) -> Self {
        Self { channels, ops, input_shape, events, off_grid: false }
    }

    pub fn off_grid(mut self) -> Self {
        self.off_grid = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.events == 0 {
            return Err(Error::Config("event count must be >= 1".into()));
        }
        if self.input_shape.contains(&0) {
            return Err(Error::Config(format!("input shape {:?} has an empty axis", self.input_shape)));
        }
        if self.off_grid {
            if self.channels == 0 || self.ops == 0 {
                return Err(Error::Config("channels and ops must be >= 1".into()));
            }
        } else {
            if !CHANNEL_GRID.contains(&self.channels) {
                return Err(Error::Config(format!(
                    "channel width {} not in search grid {CHANNEL_GRID:?} (use the off-grid override)",
                    self.channels
                )));
            }
            if !OPS_GRID.contains(&self.ops) {
                return Err(Error::Config(format!(
                    "block count {} outside 3..=7 (use the off-grid override)",
                    self.ops
                )));
            }
        }
        Ok(())
    }

    /// Blocks per stage: `floor(O/3)` each, the remainder handed out one at a
    /// time starting from the deepest stage.
    pub fn stage_partition(&self) -> [usize; 3] {
        let base = self.ops / 3;
        let mut parts = [base; 3];
        for i in 0..self.ops % 3 {
            parts[2 - i] += 1;
        }
        parts
    }

    /// Block indices belonging to a stage.
    pub fn stage_blocks(&self, stage: usize) -> Range<usize> {
        let p = self.stage_partition();
        let start: usize = p[..stage].iter().sum();
        start..start + p[stage]
    }
}
