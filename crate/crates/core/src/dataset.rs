//! Min-max scaling, delay embedding into direct multi-output pairs, and
//! chronological splitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::seriesgen::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub min: f64,
    pub max: f64,
}

impl ScaleParams {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if max <= min || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scale requires finite max > min, got [{min}, {max}]"
            )));
        }
        Ok(ScaleParams { min, max })
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    #[inline]
    pub fn invert(&self, v: f64) -> f64 {
        v * (self.max - self.min) + self.min
    }
}

/// Scales a series onto `[0, 1]` using its own extremes.
pub fn fit_scale(series: &TimeSeries) -> Result<(TimeSeries, ScaleParams)> {
    fit_scale_on(series, series.len())
}

/// Scales the whole series with extremes taken from its first `fit_len` points.
pub fn fit_scale_on(series: &TimeSeries, fit_len: usize) -> Result<(TimeSeries, ScaleParams)> {
    let head = &series.values[..fit_len.clamp(1, series.len())];
    let (min, max) = head
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if max.is_nan() || min.is_nan() || max <= min {
        return Err(Error::DegenerateScale {
            name: series.name.clone(),
        });
    }
    let params = ScaleParams { min, max };
    let scaled = TimeSeries {
        name: series.name.clone(),
        values: series.values.iter().map(|&v| params.apply(v)).collect(),
        source: series.source.clone(),
    };
    Ok((scaled, params))
}

pub fn inverse_scale(values: &[f64], params: &ScaleParams) -> Vec<f64> {
    values.iter().map(|&v| params.invert(v)).collect()
}

/// Delay-embedded supervised pairs.
///
/// Row `i` (counted from the start of the full embedding, i.e. `first_row + local`)
/// holds inputs `x[i], x[i+T], ..., x[i+(D-1)T]` and the `H` values that
/// immediately follow the last input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedDataset {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub dim: usize,
    pub lag: usize,
    pub horizon: usize,
    pub first_row: usize,
}

impl EmbeddedDataset {
    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    /// Series index of the last input element of local row `row`.
    pub fn last_input_index(&self, row: usize) -> usize {
        self.first_row + row + (self.dim - 1) * self.lag
    }

    /// Series index of target column `h` (0-based) of local row `row`.
    pub fn target_index(&self, row: usize, h: usize) -> usize {
        self.last_input_index(row) + 1 + h
    }
}

pub fn min_series_len(dim: usize, lag: usize, horizon: usize) -> usize {
    (dim - 1) * lag + horizon + 1
}

pub fn embed(
    series: &TimeSeries,
    dim: usize,
    lag: usize,
    horizon: usize,
) -> Result<EmbeddedDataset> {
    if dim == 0 || lag == 0 || horizon == 0 {
        return Err(Error::InvalidArgument(format!(
            "embedding needs D, T, H >= 1 (got D={dim}, T={lag}, H={horizon})"
        )));
    }
    let x = &series.values;
    let required = min_series_len(dim, lag, horizon);
    if x.len() < required {
        return Err(Error::SeriesTooShort {
            required,
            actual: x.len(),
        });
    }
    let span = (dim - 1) * lag;
    let n = x.len() - span - horizon;
    let mut inputs = Vec::with_capacity(n * dim);
    let mut targets = Vec::with_capacity(n * horizon);
    for i in 0..n {
        inputs.extend((0..dim).map(|d| x[i + d * lag]));
        targets.extend_from_slice(&x[i + span + 1..i + span + 1 + horizon]);
    }
    Ok(EmbeddedDataset {
        inputs: Matrix::from_vec(n, dim, inputs)?,
        targets: Matrix::from_vec(n, horizon, targets)?,
        dim,
        lag,
        horizon,
        first_row: 0,
    })
}

/// Chronological split: the first `floor(train_frac * n)` rows train, the rest test.
pub fn split(
    dataset: &EmbeddedDataset,
    train_frac: f64,
) -> Result<(EmbeddedDataset, EmbeddedDataset)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_frac must lie in (0, 1), got {train_frac}"
        )));
    }
    let n = dataset.len();
    let cut = (train_frac * n as f64).floor() as usize;
    if cut == 0 || cut == n {
        return Err(Error::InvalidArgument(format!(
            "split of {n} samples at {train_frac} leaves an empty side"
        )));
    }
    let part = |start: usize, end: usize| EmbeddedDataset {
        inputs: dataset.inputs.slice_rows(start, end),
        targets: dataset.targets.slice_rows(start, end),
        dim: dataset.dim,
        lag: dataset.lag,
        horizon: dataset.horizon,
        first_row: dataset.first_row + start,
    };
    Ok((part(0, cut), part(cut, n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleFit {
    /// Extremes of the whole (truncated) series.
    #[default]
    Full,
    /// Extremes of the leading `train_frac` share of the series only.
    Train,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub dim: usize,
    pub lag: usize,
    pub horizon: usize,
    pub train_frac: f64,
    pub max_points: usize,
    pub scale_fit: ScaleFit,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 5,
            lag: 1,
            horizon: 10,
            train_frac: 0.6,
            max_points: 1000,
            scale_fit: ScaleFit::Full,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub series: TimeSeries,
    pub scale: ScaleParams,
    pub train: EmbeddedDataset,
    pub test: EmbeddedDataset,
}

/// truncate -> scale -> embed -> split.
pub fn prepare(series: &TimeSeries, cfg: &EmbedConfig) -> Result<Prepared> {
    let truncated = series.truncated(cfg.max_points);
    let fit_len = match cfg.scale_fit {
        ScaleFit::Full => truncated.len(),
        ScaleFit::Train => (cfg.train_frac * truncated.len() as f64).floor() as usize,
    };
    let (scaled, scale) = fit_scale_on(&truncated, fit_len)?;
    let all = embed(&scaled, cfg.dim, cfg.lag, cfg.horizon)?;
    let (train, test) = split(&all, cfg.train_frac)?;
    Ok(Prepared {
        series: scaled,
        scale,
        train,
        test,
    })
}
