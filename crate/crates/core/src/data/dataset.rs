//! Labelled datasets and the synthetic blob generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// Feature matrix in `[0, 1]` with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S: Scalar> {
    pub features: Matrix<S>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(features: Matrix<S>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::Data("dataset needs at least one row".to_string()));
        }
        if features.rows() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if !features.is_finite() {
            return Err(Error::Data("non-finite feature value".to_string()));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Copies the given rows (in the given order) into a new matrix/label pair.
    pub fn gather(&self, rows: &[usize]) -> (Matrix<S>, Vec<usize>) {
        let mut data = Vec::with_capacity(rows.len() * self.dim());
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend_from_slice(self.features.row(r));
            labels.push(self.labels[r]);
        }
        (
            Matrix::from_vec(rows.len(), self.dim(), data).expect("sized above"),
            labels,
        )
    }
}

/// Seeded standard-normal source (Box-Muller over the uniform stream).
struct GaussianSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    fn new(rng: ChaCha8Rng) -> Self {
        GaussianSource { rng, spare: None }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1: f64 = 1.0 - self.rng.gen::<f64>(); // (0, 1]
        let u2: f64 = self.rng.gen();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Gaussian class blobs: class `c` is centered at `separation` times a
/// per-class unit direction, with isotropic noise `noise_sigma`. Features
/// are min-max scaled per column into `[0, 1]`. Rows are grouped by class
/// (all of class 0, then class 1, ...). Deterministic per seed.
///
/// Directions are the standard basis for `c < dim` and seeded random unit
/// vectors beyond that, so a handful of classes stay well separated.
pub fn synth_blobs<S: Scalar>(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    separation: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset<S>> {
    if dim < 1 {
        return Err(Error::config("synth_blobs: dim must be >= 1"));
    }
    if num_classes < 1 || per_class < 1 {
        return Err(Error::config("synth_blobs: counts must be >= 1"));
    }
    if separation <= 0.0 {
        return Err(Error::config("synth_blobs: separation must be > 0"));
    }
    let mut gauss = GaussianSource::new(ChaCha8Rng::seed_from_u64(seed));

    let mut directions = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let mut dir = vec![0.0f64; dim];
        if c < dim {
            dir[c] = 1.0;
        } else {
            let mut norm = 0.0;
            for v in dir.iter_mut() {
                *v = gauss.next();
                norm += *v * *v;
            }
            let norm = norm.sqrt().max(1e-12);
            for v in dir.iter_mut() {
                *v /= norm;
            }
        }
        directions.push(dir);
    }

    let n = num_classes * per_class;
    let mut raw = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (c, dir) in directions.iter().enumerate() {
        for _ in 0..per_class {
            for d in dir {
                raw.push(separation * d + noise_sigma * gauss.next());
            }
            labels.push(c);
        }
    }

    // Per-column min-max into [0, 1]; constant columns collapse to 0.
    for col in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in 0..n {
            let v = raw[row * dim + col];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        for row in 0..n {
            let v = &mut raw[row * dim + col];
            *v = if range > 0.0 { (*v - lo) / range } else { 0.0 };
        }
    }

    let data = raw.into_iter().map(S::from_f64_lossy).collect();
    Dataset::new(Matrix::from_vec(n, dim, data)?, labels, num_classes)
}
