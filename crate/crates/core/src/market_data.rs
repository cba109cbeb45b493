//! Historical prices and the return statistics derived from them.

use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("price file not found: {0}")]
    MissingFile(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("non-positive price at row {row}, column {col}")]
    NonPositivePrice { row: usize, col: usize },
    #[error("need at least 3 price rows, found {0}")]
    TooFewRows(usize),
    #[error("need at least 2 assets, found {0}")]
    TooFewAssets(usize),
    #[error("need at least 2 return rows, found {0}")]
    TooFewReturnRows(usize),
    #[error("price grid is ragged: row {row} has {found} values, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// M×N closing prices: one row per time point, one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceMatrix {
    prices: Vec<Vec<f64>>,
    asset_names: Vec<String>,
    time_labels: Vec<String>,
}

impl PriceMatrix {
    pub fn new(
        prices: Vec<Vec<f64>>,
        asset_names: Vec<String>,
        time_labels: Vec<String>,
    ) -> Result<Self, MarketDataError> {
        let n = asset_names.len();
        if n < 2 {
            return Err(MarketDataError::TooFewAssets(n));
        }
        if prices.len() < 3 {
            return Err(MarketDataError::TooFewRows(prices.len()));
        }
        for (row, values) in prices.iter().enumerate() {
            if values.len() != n {
                return Err(MarketDataError::Ragged {
                    row,
                    found: values.len(),
                    expected: n,
                });
            }
            for (col, &v) in values.iter().enumerate() {
                if !(v.is_finite() && v > 0.0) {
                    return Err(MarketDataError::NonPositivePrice { row, col });
                }
            }
        }
        let time_labels = if time_labels.len() == prices.len() {
            time_labels
        } else {
            (0..prices.len()).map(|k| k.to_string()).collect()
        };
        Ok(Self {
            prices,
            asset_names,
            time_labels,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.asset_names.len()
    }

    pub fn n_periods(&self) -> usize {
        self.prices.len()
    }

    pub fn prices(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    pub fn time_labels(&self) -> &[String] {
        &self.time_labels
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date");
        for name in &self.asset_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (label, row) in self.time_labels.iter().zip(&self.prices) {
            out.push_str(label);
            for v in row {
                write!(out, ",{v:.6}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Expected returns and sample covariance of the return series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl AssetStats {
    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }
}

/// Reads `date,<name1>,...,<nameN>` followed by `label,v1,...,vN` rows.
/// Empty or non-numeric cells are rejected; nothing is imputed.
pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceMatrix, MarketDataError> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(MarketDataError::MissingFile(path.display().to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header = reader.headers()?.clone();
    if header.len() < 3 {
        return Err(MarketDataError::TooFewAssets(header.len().saturating_sub(1)));
    }
    let asset_names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let n = asset_names.len();

    let mut prices = Vec::new();
    let mut time_labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != n + 1 {
            return Err(MarketDataError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", n + 1, record.len()),
            });
        }
        let row = prices.len();
        let mut values = Vec::with_capacity(n);
        for (col, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| MarketDataError::MalformedRow {
                line,
                reason: format!("column {} is not a number: {cell:?}", col + 1),
            })?;
            if !(v.is_finite() && v > 0.0) {
                return Err(MarketDataError::NonPositivePrice { row, col });
            }
            values.push(v);
        }
        time_labels.push(record[0].to_owned());
        prices.push(values);
    }
    PriceMatrix::new(prices, asset_names, time_labels)
}

/// Simple returns `r[k][i] = (P[k+1][i] - P[k][i]) / P[k][i]`; M-1 rows.
pub fn compute_returns(p: &PriceMatrix) -> Vec<Vec<f64>> {
    p.prices
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(prev, next)| (next - prev) / prev)
                .collect()
        })
        .collect()
}

/// Column means and sample covariance (denominator rows − 1) of a return grid.
pub fn compute_stats(returns: &[Vec<f64>]) -> Result<AssetStats, MarketDataError> {
    let rows = returns.len();
    if rows < 2 {
        return Err(MarketDataError::TooFewReturnRows(rows));
    }
    let n = returns[0].len();
    for (row, r) in returns.iter().enumerate() {
        if r.len() != n {
            return Err(MarketDataError::Ragged {
                row,
                found: r.len(),
                expected: n,
            });
        }
    }
    let mut mu = vec![0.0; n];
    for r in returns {
        for (m, v) in mu.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mu {
        *m /= rows as f64;
    }

    let mut sigma = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = returns
                .iter()
                .map(|r| (r[i] - mu[i]) * (r[j] - mu[j]))
                .sum();
            let c = s / (rows - 1) as f64;
            sigma[i][j] = c;
            sigma[j][i] = c;
        }
    }
    Ok(AssetStats { mu, sigma })
}

/// Convenience: prices → returns → stats.
pub fn stats_from_prices(p: &PriceMatrix) -> Result<AssetStats, MarketDataError> {
    compute_stats(&compute_returns(p))
}

/// Seeded one-factor geometric random walk, used to produce committed test
/// fixtures and demo inputs. Asset `i` has its own drift, volatility and
/// market loading, all drawn from the seed.
pub fn synthetic_prices(n_assets: usize, n_periods: usize, seed: u64) -> PriceMatrix {
    let mut rng = rng::stream(rng::derive_seed(seed, &["synthetic-prices"]));
    let drift: Vec<f64> = (0..n_assets)
        .map(|_| rng.random_range(-0.0005..0.0015))
        .collect();
    let vol: Vec<f64> = (0..n_assets)
        .map(|_| rng.random_range(0.008..0.03))
        .collect();
    let beta: Vec<f64> = (0..n_assets).map(|_| rng.random_range(0.2..1.2)).collect();
    let start: Vec<f64> = (0..n_assets)
        .map(|_| round6(rng.random_range(10.0..200.0)))
        .collect();

    let mut prices = Vec::with_capacity(n_periods);
    prices.push(start);
    for _ in 1..n_periods {
        let market: f64 = rng.sample::<f64, _>(StandardNormal) * 0.01;
        let prev = prices.last().unwrap();
        let next = (0..n_assets)
            .map(|i| {
                let idio: f64 = rng.sample(StandardNormal);
                let r = drift[i] + beta[i] * market + vol[i] * idio;
                round6(prev[i] * r.exp())
            })
            .collect();
        prices.push(next);
    }
    let names = (0..n_assets).map(|i| format!("A{i:02}")).collect();
    let labels = (0..n_periods).map(|k| format!("t{k:03}")).collect();
    PriceMatrix::new(prices, names, labels).expect("synthetic prices are positive")
}

/// Six decimals, so the CSV form round-trips exactly.
fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}
