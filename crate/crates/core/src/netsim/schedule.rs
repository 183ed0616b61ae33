use std::path::Path;

use crate::error::{Error, Result};

/// Piecewise-constant, right-continuous bottleneck capacity.
///
/// The last piece extends to `end` when one is set, otherwise forever.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySchedule {
    points: Vec<(f64, f64)>,
    end: Option<f64>,
}

impl CapacitySchedule {
    pub fn new(points: Vec<(f64, f64)>, end: Option<f64>) -> Result<Self> {
        let Some(&(t0, _)) = points.first() else {
            return Err(Error::validation("capacity", "schedule has no breakpoints"));
        };
        if t0 != 0.0 {
            return Err(Error::validation("capacity", "first breakpoint must be at t = 0"));
        }
        for (t, c) in &points {
            if !t.is_finite() {
                return Err(Error::validation("capacity", format!("breakpoint time {t}")));
            }
            if !(c.is_finite() && *c > 0.0) {
                return Err(Error::validation(
                    "capacity",
                    format!("capacity {c} kbps at t = {t} is not positive"),
                ));
            }
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::validation("capacity", "breakpoint times must be strictly increasing"));
        }
        if let Some(e) = end {
            let last = points[points.len() - 1].0;
            if !(e > last) {
                return Err(Error::validation("capacity.end", "must be after the last breakpoint"));
            }
        }
        Ok(Self { points, end })
    }

    pub fn constant(capacity_kbps: f64) -> Result<Self> {
        Self::new(vec![(0.0, capacity_kbps)], None)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn end(&self) -> Option<f64> {
        self.end
    }

    pub fn with_end(mut self, end: Option<f64>) -> Result<Self> {
        self.end = end;
        Self::new(self.points, self.end)
    }

    fn piece(&self, t: f64) -> usize {
        self.points.partition_point(|(s, _)| *s <= t).saturating_sub(1)
    }

    /// Capacity in effect at `t` (kbps).
    pub fn capacity_at(&self, t: f64) -> f64 {
        self.points[self.piece(t)].1
    }

    /// First breakpoint strictly after `t`.
    pub fn next_change_after(&self, t: f64) -> Option<f64> {
        self.points.get(self.piece(t) + 1).map(|p| p.0).filter(|s| *s > t)
    }

    /// `∫ c(t) dt` over `[t1, t2]`, kilobits.
    pub fn integral(&self, t1: f64, t2: f64) -> f64 {
        if t2 <= t1 {
            return 0.0;
        }
        let mut total = 0.0;
        let mut t = t1;
        while t < t2 {
            let seg_end = self.next_change_after(t).map_or(t2, |n| n.min(t2));
            total += self.capacity_at(t) * (seg_end - t);
            t = seg_end;
        }
        total
    }
}

/// Parses a two-column trace (`seconds, kbps`). Fields may be separated by
/// commas or whitespace, `#` starts a comment, and a non-numeric first data
/// line is taken as a header.
/// Two columns, seconds and kbps, separated by a comma or whitespace. `#`
/// starts a comment; one non-numeric header row is skipped. Error line
/// numbers refer to the file.
pub fn parse_trace(text: &str) -> Result<CapacitySchedule> {
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        let Some(nums) = parsed else {
            if !seen_data {
                seen_data = true;
                continue;
            }
            return Err(Error::TraceParse {
                line: line_no,
                reason: format!("non-numeric field in {line:?}"),
            });
        };
        seen_data = true;
        if nums.len() != 2 {
            return Err(Error::TraceParse {
                line: line_no,
                reason: format!("expected 2 columns, found {}", nums.len()),
            });
        }
        let (t, c) = (nums[0], nums[1]);
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::TraceParse {
                line: line_no,
                reason: format!("non-positive capacity {c}"),
            });
        }
        if let Some(&(prev, _)) = points.last() {
            if !(t > prev) {
                return Err(Error::TraceParse {
                    line: line_no,
                    reason: format!("time {t} does not follow {prev}"),
                });
            }
        } else if t != 0.0 {
            return Err(Error::TraceParse {
                line: line_no,
                reason: format!("trace must start at t = 0, found {t}"),
            });
        }
        points.push((t, c));
    }
    if points.is_empty() {
        return Err(Error::TraceParse {
            line: 0,
            reason: "trace has no data rows".into(),
        });
    }
    CapacitySchedule::new(points, None)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<CapacitySchedule> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text)
}
