//! Inclusive integer ranges of the form `A`, `A..B` or `A..B:S`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SizeRange {
    pub start: u32,
    pub end: u32,
    pub step: u32,
}

impl SizeRange {
    pub fn values(&self) -> Vec<u32> {
        (self.start..=self.end).step_by(self.step as usize).collect()
    }
}

impl fmt::Display for SizeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.step == 1 {
            write!(f, "{}..{}", self.start, self.end)
        } else {
            write!(f, "{}..{}:{}", self.start, self.end, self.step)
        }
    }
}

impl FromStr for SizeRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (span, step) = match s.split_once(':') {
            Some((span, step)) => {
                let step: u32 = step
                    .parse()
                    .map_err(|_| format!("invalid step in range '{s}'"))?;
                if step == 0 {
                    return Err(format!("step must be positive in range '{s}'"));
                }
                (span, step)
            }
            None => (s, 1),
        };
        let (start, end) = match span.split_once("..") {
            Some((a, b)) => {
                let start: u32 = a
                    .parse()
                    .map_err(|_| format!("invalid range start in '{s}'"))?;
                let end: u32 = b
                    .parse()
                    .map_err(|_| format!("invalid range end in '{s}'"))?;
                (start, end)
            }
            None => {
                let single: u32 = span
                    .parse()
                    .map_err(|_| format!("invalid range '{s}' (expected A, A..B or A..B:S)"))?;
                (single, single)
            }
        };
        if end < start {
            return Err(format!("empty range '{s}' (end below start)"));
        }
        Ok(SizeRange { start, end, step })
    }
}
