//! Finite-volume sequences and their thermodynamic-limit estimates.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::region::Region;

/// Number of trailing points used by the `1/|Λ|` fit.
pub const DEFAULT_FIT_WINDOW: usize = 4;

/// Serializes non-finite floats as `"inf"`, `"-inf"` or `"nan"`.
pub fn finite_or_tag<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Text form used in CSV files, with the same tags for non-finite values.
pub fn format_value(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.17e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Point {
    pub volume: usize,
    #[serde(serialize_with = "finite_or_tag")]
    pub value: f64,
}

/// Values indexed by strictly increasing volumes, with a least-squares fit
/// of `value = limit + slope/|Λ|` over the last few points.
#[derive(Clone, Debug, Serialize)]
pub struct ExtrapolationSeries {
    label: String,
    points: Vec<Point>,
    #[serde(serialize_with = "finite_or_tag")]
    limit_estimate: f64,
    #[serde(serialize_with = "finite_or_tag")]
    slope: f64,
    #[serde(serialize_with = "finite_or_tag")]
    fit_residual: f64,
    method: String,
}

impl ExtrapolationSeries {
    pub fn new(label: impl Into<String>, points: Vec<(usize, f64)>) -> Result<Self> {
        Self::with_window(label, points, DEFAULT_FIT_WINDOW)
    }

    pub fn with_window(label: impl Into<String>, points: Vec<(usize, f64)>, window: usize) -> Result<Self> {
        let label = label.into();
        if points.is_empty() {
            return Err(Error::validation(format!("series {label} has no points")));
        }
        if window == 0 {
            return Err(Error::validation("fit window must be at least 1"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) || points[0].0 == 0 {
            return Err(Error::validation(format!("series {label}: volumes must be positive and strictly increasing")));
        }
        let k = window.min(points.len());
        let tail = &points[points.len() - k..];
        let (limit, slope) = if k == 1 {
            (tail[0].1, 0.0)
        } else {
            let xs: Vec<f64> = tail.iter().map(|p| 1.0 / p.0 as f64).collect();
            let ys: Vec<f64> = tail.iter().map(|p| p.1).collect();
            let mx = xs.iter().sum::<f64>() / k as f64;
            let my = ys.iter().sum::<f64>() / k as f64;
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let slope = sxy / sxx;
            (my - slope * mx, slope)
        };
        let fit_residual = tail
            .iter()
            .map(|p| (p.1 - (limit + slope / p.0 as f64)).abs())
            .fold(0.0f64, f64::max);
        if !limit.is_finite() {
            return Err(Error::domain(format!("series {label}: limit estimate is not finite")));
        }
        Ok(ExtrapolationSeries {
            label,
            points: points.into_iter().map(|(volume, value)| Point { volume, value }).collect(),
            limit_estimate: limit,
            slope,
            fit_residual,
            method: format!("least-squares value = limit + c/volume over last {k} points"),
        })
    }

    /// Evaluates `f` on every box (in parallel) and fits the result.
    pub fn from_boxes<F>(label: impl Into<String>, boxes: &[Region], f: F) -> Result<Self>
    where
        F: Fn(&Region) -> Result<f64> + Sync,
    {
        let label = label.into();
        if boxes.windows(2).any(|w| w[1].volume() <= w[0].volume()) {
            return Err(Error::validation(format!("series {label}: boxes must strictly increase in volume")));
        }
        let values: Vec<f64> = boxes.par_iter().map(&f).collect::<Result<_>>()?;
        let points = boxes.iter().map(Region::volume).zip(values).collect();
        ExtrapolationSeries::new(label, points)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> Vec<(usize, f64)> {
        self.points.iter().map(|p| (p.volume, p.value)).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn limit_estimate(&self) -> f64 {
        self.limit_estimate
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn last(&self) -> f64 {
        self.points.last().map(|p| p.value).unwrap_or(f64::NAN)
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].value < w[0].value)
    }

    /// CSV text with header `volume,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("volume,value\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.volume, format_value(p.value)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let pts: Vec<(usize, f64)> = [4usize, 6, 8, 10, 12].iter().map(|&n| (n, 1.5 - 2.0 / n as f64)).collect();
        let s = ExtrapolationSeries::new("line", pts).unwrap();
        assert!((s.limit_estimate() - 1.5).abs() < 1e-13);
        assert!((s.slope() + 2.0).abs() < 1e-12);
        assert!(s.fit_residual() < 1e-14);
    }

    #[test]
    fn only_last_window_is_fitted() {
        // The first point is off the line and must be ignored.
        let mut pts: Vec<(usize, f64)> = [4usize, 6, 8, 10, 12].iter().map(|&n| (n, 1.0 + 1.0 / n as f64)).collect();
        pts[0].1 = 100.0;
        let s = ExtrapolationSeries::new("w", pts).unwrap();
        assert!((s.limit_estimate() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn residual_is_max_deviation() {
        let pts = vec![(1, 0.0), (2, 1.0), (3, 0.0), (4, 1.0)];
        let s = ExtrapolationSeries::with_window("r", pts.clone(), 4).unwrap();
        let dev = pts
            .iter()
            .map(|p| (p.1 - s.limit_estimate() - s.slope() / p.0 as f64).abs())
            .fold(0.0, f64::max);
        assert_eq!(s.fit_residual(), dev);
        assert!(s.fit_residual() > 0.0);
    }

    #[test]
    fn rejects_bad_volumes() {
        assert!(ExtrapolationSeries::new("x", vec![(4, 1.0), (4, 1.0)]).is_err());
        assert!(ExtrapolationSeries::new("x", vec![]).is_err());
        assert!(ExtrapolationSeries::new("x", vec![(3, f64::INFINITY), (4, 1.0)]).is_err());
    }

    #[test]
    fn single_point() {
        let s = ExtrapolationSeries::new("one", vec![(5, 0.25)]).unwrap();
        assert_eq!(s.limit_estimate(), 0.25);
        assert_eq!(s.fit_residual(), 0.0);
    }

    #[test]
    fn csv_and_json_tags() {
        let s = ExtrapolationSeries::new("t", vec![(2, 1.0), (3, f64::INFINITY), (4, 2.0), (5, 2.0), (6, 2.0), (7, 2.0)]).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("volume,value\n"));
        assert!(csv.contains("3,inf\n"));
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"inf\""));
    }
}
