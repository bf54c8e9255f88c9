use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::LoadAdjust;

/// How a fitted slowdown feeds the planner.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadMode {
    /// `delta = (slowdown - 1) * baseline`, added once per engine on a suffix.
    #[default]
    Additive,
    /// Each stage's latency increment is scaled by the engine's slowdown.
    Multiplicative,
}

/// Nondecreasing piecewise-linear map from queue depth to slowdown factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlowdownCurve {
    /// Latency of one invocation on an idle engine, seconds.
    pub baseline: f64,
    /// `(queue_depth, slowdown)` knots, depths strictly increasing.
    pub knots: Vec<(f64, f64)>,
    /// Root-mean-square gap between per-depth medians and the fit.
    pub residual: f64,
}

impl SlowdownCurve {
    /// Fitted slowdown at depth `n`: linear between knots, flat outside.
    pub fn raw(&self, n: f64) -> f64 {
        let k = &self.knots;
        if n <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if n <= x1 {
                return y0 + (y1 - y0) * (n - x0) / (x1 - x0);
            }
        }
        k[k.len() - 1].1
    }

    /// Slowdown relative to an empty queue, so depth 0 is exactly 1.
    pub fn slowdown(&self, n: f64) -> f64 {
        self.raw(n) / self.raw(0.0)
    }

    /// Expected extra seconds per invocation at depth `n`.
    pub fn delay(&self, n: f64) -> f64 {
        (self.slowdown(n) - 1.0) * self.baseline
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Pool-adjacent-violators with unit weight per point.
fn isotonic(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// Fits a slowdown curve to `(queue_depth, observed_latency)` samples: median
/// latency per depth over `baseline`, made monotone by isotonic regression.
pub fn fit_slowdown_curve(samples: &[(f64, f64)], baseline: f64) -> Result<SlowdownCurve> {
    if !(baseline > 0.0 && baseline.is_finite()) {
        return Err(Error::InvalidArgument(format!("baseline latency must be positive, got {baseline}")));
    }
    let mut by_depth: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for &(n, lat) in samples {
        if !(n >= 0.0 && n.is_finite() && lat.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad slowdown sample ({n}, {lat})")));
        }
        by_depth.entry(n.to_bits()).or_insert((n, Vec::new())).1.push(lat);
    }
    let mut points: Vec<(f64, f64)> =
        by_depth.into_values().map(|(n, mut lats)| (n, median(&mut lats) / baseline)).collect();
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "slowdown fit needs at least 2 distinct queue depths, got {}",
            points.len()
        )));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let raw: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fitted = isotonic(&raw);
    let residual = (raw.iter().zip(&fitted).map(|(r, f)| (r - f).powi(2)).sum::<f64>() / raw.len() as f64).sqrt();
    Ok(SlowdownCurve {
        baseline,
        knots: points.iter().zip(fitted).map(|(p, f)| (p.0, f)).collect(),
        residual,
    })
}

/// Fitted curves per engine id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadModel {
    #[serde(default)]
    pub mode: LoadMode,
    pub engines: BTreeMap<String, SlowdownCurve>,
}

#[derive(Debug, Deserialize)]
struct SampleRow {
    engine_id: String,
    queue_depth: f64,
    latency_s: f64,
}

impl LoadModel {
    /// Fits one curve per engine from `engine_id,queue_depth,latency_s` rows.
    /// An engine's baseline is taken from `baselines` or else the median
    /// latency at its smallest sampled depth.
    pub fn fit_csv(input: impl Read, baselines: &BTreeMap<String, f64>, mode: LoadMode) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut samples: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for row in rdr.deserialize() {
            let row: SampleRow = row?;
            samples.entry(row.engine_id).or_default().push((row.queue_depth, row.latency_s));
        }
        let mut engines = BTreeMap::new();
        for (engine, s) in samples {
            let baseline = match baselines.get(&engine) {
                Some(&b) => b,
                None => {
                    let min = s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
                    let mut at_min: Vec<f64> = s.iter().filter(|p| p.0 == min).map(|p| p.1).collect();
                    median(&mut at_min)
                }
            };
            let curve = fit_slowdown_curve(&s, baseline)
                .map_err(|e| Error::InvalidArgument(format!("engine `{engine}`: {e}")))?;
            engines.insert(engine, curve);
        }
        Ok(LoadModel { mode, engines })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        crate::workload::parse_json(text)
    }

    /// Planner adjustment for the given queue depths, indexed like
    /// `engine_ids`. Engines without a curve are unaffected.
    pub fn adjust(&self, engine_ids: &[String], queue_depths: &[f64]) -> LoadAdjust {
        let factor = |e: usize| {
            let n = queue_depths.get(e).copied().unwrap_or(0.0);
            self.engines.get(&engine_ids[e]).map(|c| (c.slowdown(n), c.delay(n)))
        };
        let mut adj = LoadAdjust::default();
        for e in 0..engine_ids.len() {
            let (s, d) = factor(e).unwrap_or((1.0, 0.0));
            match self.mode {
                LoadMode::Additive => adj.delay.push(d),
                LoadMode::Multiplicative => adj.multiplier.push(s),
            }
        }
        adj
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pav_pools_adjacent_violators() {
        assert_eq!(isotonic(&[1.0, 0.9, 1.4]), vec![0.95, 0.95, 1.4]);
        assert_eq!(isotonic(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic(&[1.0, 2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn interpolates_and_extrapolates_flat() {
        let c = fit_slowdown_curve(&[(0.0, 1.0), (8.0, 1.5), (16.0, 2.0)], 1.0).unwrap();
        assert_eq!(c.slowdown(8.0), 1.5);
        assert_eq!(c.slowdown(12.0), 1.75);
        assert_eq!(c.slowdown(100.0), 2.0);
        assert_eq!(c.delay(0.0), 0.0);
        assert_eq!(c.residual, 0.0);
    }

    #[test]
    fn medians_are_taken_per_depth() {
        let s = [(0.0, 2.0), (0.0, 2.2), (0.0, 9.0), (4.0, 3.0), (4.0, 5.0)];
        let c = fit_slowdown_curve(&s, 2.0).unwrap();
        assert_eq!(c.knots, vec![(0.0, 1.1), (4.0, 2.0)]);
    }

    #[test]
    fn rejects_single_depth() {
        assert!(fit_slowdown_curve(&[(1.0, 1.0), (1.0, 2.0)], 1.0).is_err());
        assert!(fit_slowdown_curve(&[(0.0, 1.0), (1.0, 2.0)], 0.0).is_err());
    }
}
