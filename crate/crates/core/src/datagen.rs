//! Synthetic sparse logistic regression data and a plain CSV format for
//! datasets.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64`, with
//! normals from `rand_distr::StandardNormal`, so a seed reproduces the same
//! dataset on every platform.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{sigmoid, Dataset};
use crate::scalar::Real;

/// `n × p` standard-normal design, a `s`-sparse standard-normal `θ*`, and
/// labels `Yᵢ ~ Bernoulli(σ(Xᵢᵀθ*))`.
pub fn gen_logistic<T: Real>(n: usize, p: usize, s: usize, seed: u64) -> Result<(Dataset<T>, Array1<T>)> {
    if s == 0 || s > p {
        return Err(Error::InvalidArgument(format!("sparsity {s} must lie in 1..={p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = Array1::<T>::zeros(p);
    let mut support = index::sample(&mut rng, p, s).into_vec();
    support.sort_unstable();
    for j in support {
        theta[j] = T::lit(rng.sample(StandardNormal));
    }
    let data = sample_with(&mut rng, n, &theta);
    Ok((data, theta))
}

/// As [`gen_logistic`] with a caller-chosen `θ*`.
pub fn gen_logistic_with_theta<T: Real>(n: usize, theta: &Array1<T>, seed: u64) -> Dataset<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(&mut rng, n, theta)
}

fn sample_with<T: Real>(rng: &mut ChaCha8Rng, n: usize, theta: &Array1<T>) -> Dataset<T> {
    let p = theta.len();
    let mut x = Array2::<T>::zeros((n, p));
    let mut y = Array1::<T>::zeros(n);
    for (mut row, label) in x.rows_mut().into_iter().zip(y.iter_mut()) {
        for v in row.iter_mut() {
            *v = T::lit(rng.sample(StandardNormal));
        }
        let prob = sigmoid(row.dot(theta)).as_f64();
        *label = if rng.random::<f64>() < prob { T::one() } else { T::zero() };
    }
    Dataset::new(x, y).expect("generated shapes agree")
}

/// Writes `y, x_1..x_p` with a header row. Values use the shortest decimal
/// form that parses back to the same float.
pub fn write_csv<T: Real>(data: &Dataset<T>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![data.y()[i].to_string()];
        rec.extend(data.x().row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_csv`]: the first column is the label,
/// the rest are features.
pub fn read_csv<T: Real + std::str::FromStr>(path: &Path) -> Result<Dataset<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let cols = r.headers()?.len();
    if cols < 2 {
        return Err(Error::InvalidArgument("dataset needs a label column and at least one feature".into()));
    }
    let p = cols - 1;
    let mut flat = Vec::new();
    let mut y = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != cols {
            return Err(Error::DimensionMismatch { expected: cols, got: rec.len() });
        }
        for (j, field) in rec.iter().enumerate() {
            let v: T = field
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("row {}: cannot parse {field:?}", line + 1)))?;
            if j == 0 {
                y.push(v);
            } else {
                flat.push(v);
            }
        }
    }
    let x = Array2::from_shape_vec((y.len(), p), flat).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Dataset::new(x, Array1::from(y))
}
