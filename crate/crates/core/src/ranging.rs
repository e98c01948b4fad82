//! Link distance from apparent blob size.
//!
//! Two estimators are provided. The conventional one inverts the pinhole
//! relation `D = f_L + S_r·f_L / (S_ip·S_p)` using the nominal camera
//! constants. The learned one fits `D = slope·φ(S_ip) + intercept` by
//! ordinary least squares on measured samples, which absorbs any constant
//! size gain the sensor adds (high ISO, blooming) that the closed form
//! cannot see.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraParams, TxParams};

#[derive(Debug, Error)]
pub enum RangingError {
    #[error("blob diameter must be > 0, got {0}")]
    NonPositiveDiameter(f64),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("all feature values are equal; the fit is undetermined")]
    DegenerateFit,
    #[error("length mismatch: {0} predictions vs {1} truths")]
    LengthMismatch(usize, usize),
    #[error("no values to compare")]
    Empty,
    #[error("invalid sample at row {row}: {reason}")]
    BadSample { row: usize, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSample {
    pub distance_m: f64,
    pub blob_diameter_px: f64,
    pub iso: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// `1 / diameter`; the pinhole relation is linear in it.
    #[default]
    ReciprocalDiameter,
    RawDiameter,
}

impl FeatureKind {
    pub fn apply(self, diameter_px: f64) -> f64 {
        match self {
            FeatureKind::ReciprocalDiameter => 1.0 / diameter_px,
            FeatureKind::RawDiameter => diameter_px,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeModel {
    pub slope: f64,
    pub intercept: f64,
    pub feature_kind: FeatureKind,
    /// ISO the training samples were taken at, when uniform.
    pub iso: Option<u32>,
    pub trained_on: usize,
}

impl RangeModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RangingError> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RangingError> {
        Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
    }
}

fn check_diameter(d: f64) -> Result<(), RangingError> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(RangingError::NonPositiveDiameter(d))
    }
}

/// Closed-form pinhole estimate, in metres.
pub fn conventional_distance(blob_diameter_px: f64, tx: &TxParams, cam: &CameraParams) -> Result<f64, RangingError> {
    check_diameter(blob_diameter_px)?;
    let f = cam.focal_length_m;
    Ok(f + tx.led_radius_m * f / (blob_diameter_px * cam.pixel_pitch_m))
}

/// Ordinary least squares of distance on the chosen feature.
pub fn fit_regression(samples: &[RangeSample], feature_kind: FeatureKind) -> Result<RangeModel, RangingError> {
    if samples.len() < 2 {
        return Err(RangingError::TooFewSamples(samples.len()));
    }
    for s in samples {
        check_diameter(s.blob_diameter_px)?;
    }
    let xs: Vec<f64> = samples.iter().map(|s| feature_kind.apply(s.blob_diameter_px)).collect();
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(RangingError::DegenerateFit);
    }
    let n = samples.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = samples.iter().map(|s| s.distance_m).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, s) in xs.iter().zip(samples) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (s.distance_m - my);
    }
    if sxx == 0.0 {
        return Err(RangingError::DegenerateFit);
    }
    let slope = sxy / sxx;
    let iso = samples[0].iso;
    Ok(RangeModel {
        slope,
        intercept: my - slope * mx,
        feature_kind,
        iso: samples.iter().all(|s| s.iso == iso).then_some(iso),
        trained_on: samples.len(),
    })
}

pub fn predict_distance(model: &RangeModel, blob_diameter_px: f64) -> Result<f64, RangingError> {
    check_diameter(blob_diameter_px)?;
    Ok(model.slope * model.feature_kind.apply(blob_diameter_px) + model.intercept)
}

pub fn mean_squared_error(predicted: &[f64], truth: &[f64]) -> Result<f64, RangingError> {
    if predicted.len() != truth.len() {
        return Err(RangingError::LengthMismatch(predicted.len(), truth.len()));
    }
    if predicted.is_empty() {
        return Err(RangingError::Empty);
    }
    Ok(predicted.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / predicted.len() as f64)
}

/// Sum of squared residuals of `slope·x + intercept` on the samples.
pub fn sum_squared_residuals(samples: &[RangeSample], feature_kind: FeatureKind, slope: f64, intercept: f64) -> f64 {
    samples
        .iter()
        .map(|s| {
            let r = slope * feature_kind.apply(s.blob_diameter_px) + intercept - s.distance_m;
            r * r
        })
        .sum()
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    distance_cm: f64,
    blob_diameter_px: f64,
    iso: u32,
}

/// Reads `distance_cm,blob_diameter_px,iso` rows.
pub fn read_samples(reader: impl Read) -> Result<Vec<RangeSample>, RangingError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["distance_cm", "blob_diameter_px", "iso"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(RangingError::BadSample {
            row: 0,
            reason: format!(
                "header must be {}, got {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = row?;
        if !(row.distance_cm > 0.0) {
            return Err(RangingError::BadSample {
                row: i + 1,
                reason: "distance_cm must be > 0".into(),
            });
        }
        if !(row.blob_diameter_px > 0.0) {
            return Err(RangingError::BadSample {
                row: i + 1,
                reason: "blob_diameter_px must be > 0".into(),
            });
        }
        out.push(RangeSample {
            distance_m: row.distance_cm / 100.0,
            blob_diameter_px: row.blob_diameter_px,
            iso: row.iso,
        });
    }
    Ok(out)
}

pub fn write_samples(writer: impl Write, samples: &[RangeSample]) -> Result<(), RangingError> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(CsvRow {
            distance_cm: s.distance_m * 100.0,
            blob_diameter_px: s.blob_diameter_px,
            iso: s.iso,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conventional_examples() {
        let tx = TxParams::default();
        let cam = CameraParams {
            pixel_pitch_m: 1.55e-6,
            ..Default::default()
        };
        // oracle: f_L + (0.0109 * 0.00028) / (100 * 1.55e-6)
        let expected = 0.00028 + 0.0109 * 0.00028 / (100.0 * 1.55e-6);
        let got = conventional_distance(100.0, &tx, &cam).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.019970322580645162).abs() < 1e-12);

        let huge = conventional_distance(1e12, &tx, &cam).unwrap();
        assert!((huge - cam.focal_length_m).abs() < 1e-9);
        assert!(conventional_distance(0.0, &tx, &cam).is_err());
        assert!(conventional_distance(-3.0, &tx, &cam).is_err());
    }

    #[test]
    fn exact_line_recovered() {
        let samples: Vec<RangeSample> = [10.0, 20.0, 40.0, 80.0]
            .iter()
            .map(|&d| RangeSample {
                distance_m: 3.0 / d + 0.25,
                blob_diameter_px: d,
                iso: 100,
            })
            .collect();
        let m = fit_regression(&samples, FeatureKind::ReciprocalDiameter).unwrap();
        assert!((m.slope - 3.0).abs() < 1e-12);
        assert!((m.intercept - 0.25).abs() < 1e-12);
        assert_eq!(m.iso, Some(100));
        assert_eq!(m.trained_on, 4);
        for s in &samples {
            assert!((predict_distance(&m, s.blob_diameter_px).unwrap() - s.distance_m).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_errors() {
        let s = |d: f64| RangeSample {
            distance_m: 0.5,
            blob_diameter_px: d,
            iso: 100,
        };
        assert!(matches!(
            fit_regression(&[s(10.0)], FeatureKind::default()),
            Err(RangingError::TooFewSamples(1))
        ));
        assert!(matches!(
            fit_regression(&[s(10.0), s(10.0)], FeatureKind::default()),
            Err(RangingError::DegenerateFit)
        ));
        let mixed = [s(10.0), RangeSample { iso: 800, ..s(20.0) }];
        assert_eq!(fit_regression(&mixed, FeatureKind::RawDiameter).unwrap().iso, None);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mean_squared_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mean_squared_error(&[3.0], &[1.0]).unwrap(), 4.0);
        assert!(matches!(mean_squared_error(&[], &[]), Err(RangingError::Empty)));
        assert!(matches!(
            mean_squared_error(&[1.0], &[1.0, 2.0]),
            Err(RangingError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn csv_round_trip_and_schema() {
        let samples = vec![
            RangeSample {
                distance_m: 0.125,
                blob_diameter_px: 348.5,
                iso: 400,
            },
            RangeSample {
                distance_m: 0.5,
                blob_diameter_px: 87.25,
                iso: 400,
            },
        ];
        let mut buf = Vec::new();
        write_samples(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("distance_cm,blob_diameter_px,iso\n"));
        assert_eq!(read_samples(buf.as_slice()).unwrap(), samples);

        assert!(read_samples("d,blob_diameter_px,iso\n1,2,100\n".as_bytes()).is_err());
        assert!(read_samples("distance_cm,blob_diameter_px,iso\n1,-2,100\n".as_bytes()).is_err());
        assert!(read_samples("distance_cm,blob_diameter_px,iso\n1,x,100\n".as_bytes()).is_err());
    }

    #[test]
    fn model_json_keys() {
        let m = RangeModel {
            slope: 0.5,
            intercept: 0.01,
            feature_kind: FeatureKind::ReciprocalDiameter,
            iso: Some(800),
            trained_on: 12,
        };
        let v: serde_json::Value = serde_json::to_value(m).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["feature_kind", "intercept", "iso", "slope", "trained_on"]);
        assert_eq!(v["feature_kind"], "reciprocal_diameter");
        let back: RangeModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }
}
