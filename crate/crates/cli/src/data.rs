//! Dataset ingestion and the synthetic two-cluster generator.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use gpc_core::rng::stream_rng;
use gpc_core::{Error, Result};

use crate::config::SyntheticConfig;

/// Loads `f1,...,fD,label` rows. Labels may be -1/+1 or 0/1 (0 maps to -1).
/// Malformed rows are rejected with their 1-based line number.
pub fn load_dataset(text: &str) -> Result<(Array2<f64>, Array1<f64>)> {
    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "line {line_no}: need at least one feature and a label"
            )));
        }
        let d = fields.len() - 1;
        match width {
            None => width = Some(d),
            Some(w) if w != d => {
                return Err(Error::InvalidInput(format!(
                    "line {line_no}: row has {d} features, expected {w}"
                )))
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(d);
        for (col, f) in fields[..d].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| {
                Error::InvalidInput(format!("line {line_no}: bad feature in column {}", col + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "line {line_no}: non-finite feature in column {}",
                    col + 1
                )));
            }
            row.push(v);
        }
        let label = match *fields.last().expect("nonempty") {
            "1" | "+1" => 1.0,
            "-1" => -1.0,
            "0" => -1.0,
            other => {
                let v: f64 = other.parse().map_err(|_| {
                    Error::InvalidInput(format!("line {line_no}: bad label '{other}'"))
                })?;
                if v == 1.0 {
                    1.0
                } else if v == -1.0 || v == 0.0 {
                    -1.0
                } else {
                    return Err(Error::InvalidInput(format!(
                        "line {line_no}: label must be -1/+1 or 0/1, got {other}"
                    )));
                }
            }
        };
        features.push(row);
        labels.push(label);
    }
    if features.is_empty() {
        return Err(Error::InvalidInput("dataset is empty".into()));
    }
    let n = features.len();
    let d = width.expect("rows seen");
    let mut x = Array2::zeros((n, d));
    for (i, row) in features.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    Ok((x, Array1::from_vec(labels)))
}

pub fn load_dataset_file(path: &std::path::Path) -> Result<(Array2<f64>, Array1<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    load_dataset(&text)
}

/// Two Gaussian clusters separated along the first axis, labels -1/+1 per
/// cluster, deterministic in the seed.
pub fn synthetic_clusters(cfg: &SyntheticConfig) -> (Array2<f64>, Array1<f64>) {
    let mut rng = stream_rng(cfg.seed, 0);
    let mut x = Array2::zeros((cfg.n, cfg.dim));
    let mut y = Array1::zeros(cfg.n);
    let half = cfg.separation / 2.0;
    for i in 0..cfg.n {
        let positive = i % 2 == 0;
        let centre = if positive { half } else { -half };
        for j in 0..cfg.dim {
            let noise: f64 = rng.sample(StandardNormal);
            x[[i, j]] = noise + if j == 0 { centre } else { 0.0 };
        }
        y[i] = if positive { 1.0 } else { -1.0 };
    }
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_rows() {
        let (x, y) = load_dataset("0.1,0.2,1\n0.3,0.4,-1\n").unwrap();
        assert_eq!(x.dim(), (2, 2));
        assert_eq!(y, Array1::from_vec(vec![1.0, -1.0]));
    }

    #[test]
    fn maps_zero_label_to_negative() {
        let (_, y) = load_dataset("1.0,0\n2.0,1\n").unwrap();
        assert_eq!(y, Array1::from_vec(vec![-1.0, 1.0]));
    }

    #[test]
    fn reports_line_numbers() {
        let err = load_dataset("0.1,0.2,1\n0.3,0.4,0.5,-1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = load_dataset("0.1,nan,1\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(load_dataset("").is_err());
        let err = load_dataset("0.5,7\n").unwrap_err();
        assert!(err.to_string().contains("label"), "{err}");
    }

    #[test]
    fn synthetic_generator_is_deterministic_and_balanced() {
        let cfg = SyntheticConfig {
            n: 30,
            dim: 3,
            separation: 3.0,
            seed: 9,
        };
        let (xa, ya) = synthetic_clusters(&cfg);
        let (xb, yb) = synthetic_clusters(&cfg);
        assert_eq!(xa, xb);
        assert_eq!(ya, yb);
        let pos = ya.iter().filter(|&&v| v == 1.0).count();
        assert_eq!(pos, 15);
        // Positive cluster sits to the right on average.
        let mean_pos: f64 = (0..30)
            .filter(|&i| ya[i] == 1.0)
            .map(|i| xa[[i, 0]])
            .sum::<f64>()
            / pos as f64;
        assert!(mean_pos > 0.5);
    }
}
