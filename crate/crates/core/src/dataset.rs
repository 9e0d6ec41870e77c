//! Labeled sample sets and the canonical on-disk dataset format.
//!
//! A dataset directory holds `manifest.json` (schema, labels, split tags,
//! attribute matrix, counts) next to `x.f64`, the sample matrix as raw
//! little-endian IEEE-754 doubles in row-major order. The binary blob makes
//! save/load round trips bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attributes::{AttributeSchema, FaultAttributeMatrix};
use crate::error::{CoreError, Result};
use crate::seeds;
use crate::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Samples, labels, split tags and the category-attribute matrix.
#[derive(Clone, Debug)]
pub struct Dataset {
    x: Matrix,
    y: Vec<usize>,
    split: Vec<Split>,
    attributes: FaultAttributeMatrix,
}

impl Dataset {
    pub fn new(
        x: Matrix,
        y: Vec<usize>,
        split: Vec<Split>,
        attributes: FaultAttributeMatrix,
    ) -> Result<Self> {
        if x.rows() != y.len() || x.rows() != split.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "{} samples vs {} labels vs {} split tags",
                x.rows(),
                y.len(),
                split.len()
            )));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= attributes.categories()) {
            return Err(CoreError::InvalidInput(format!(
                "label {bad} has no attribute row (have {})",
                attributes.categories()
            )));
        }
        Ok(Self {
            x,
            y,
            split,
            attributes,
        })
    }

    pub fn samples(&self) -> usize {
        self.x.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn categories(&self) -> usize {
        self.attributes.categories()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    pub fn split_tags(&self) -> &[Split] {
        &self.split
    }

    pub fn attributes(&self) -> &FaultAttributeMatrix {
        &self.attributes
    }

    pub fn schema(&self) -> &AttributeSchema {
        self.attributes.schema()
    }

    pub fn train_count(&self) -> usize {
        self.split.iter().filter(|s| **s == Split::Train).count()
    }

    pub fn test_count(&self) -> usize {
        self.samples() - self.train_count()
    }

    fn indices_of(&self, split: Split, categories: Option<&[usize]>) -> Vec<usize> {
        (0..self.samples())
            .filter(|&i| self.split[i] == split)
            .filter(|&i| categories.map_or(true, |cats| cats.contains(&self.y[i])))
            .collect()
    }

    /// Training rows of the given categories, in dataset order.
    pub fn train_rows(&self, categories: &[usize]) -> (Matrix, Vec<usize>) {
        let idx = self.indices_of(Split::Train, Some(categories));
        let labels = idx.iter().map(|&i| self.y[i]).collect();
        (self.x.select_rows(&idx), labels)
    }

    /// Test rows of the given categories, in dataset order.
    pub fn test_rows(&self, categories: &[usize]) -> (Matrix, Vec<usize>) {
        let idx = self.indices_of(Split::Test, Some(categories));
        let labels = idx.iter().map(|&i| self.y[i]).collect();
        (self.x.select_rows(&idx), labels)
    }

    /// Writes the canonical directory layout.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = DatasetManifest {
            format: "zsfd-dataset".into(),
            version: 1,
            samples: self.samples(),
            input_dim: self.input_dim(),
            labels: self.y.clone(),
            split: self.split.clone(),
            attributes: self.attributes.clone(),
        };
        fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;

        let mut bytes = Vec::with_capacity(self.x.data().len() * 8);
        for &v in self.x.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(dir.join("x.f64"), bytes)?;
        Ok(())
    }

    /// Reads the canonical directory layout back, bit-exactly.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: DatasetManifest =
            serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        if manifest.format != "zsfd-dataset" {
            return Err(CoreError::Format(format!(
                "{} is not a dataset directory (format tag {})",
                dir.display(),
                manifest.format
            )));
        }
        let bytes = fs::read(dir.join("x.f64"))?;
        let expected = manifest.samples * manifest.input_dim * 8;
        if bytes.len() != expected {
            return Err(CoreError::Format(format!(
                "x.f64 holds {} bytes, expected {}",
                bytes.len(),
                expected
            )));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let x = Matrix::from_vec(manifest.samples, manifest.input_dim, data)?;
        Self::new(x, manifest.labels, manifest.split, manifest.attributes)
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetManifest {
    format: String,
    version: u32,
    samples: usize,
    input_dim: usize,
    labels: Vec<usize>,
    split: Vec<Split>,
    attributes: FaultAttributeMatrix,
}

/// Recipe for the deterministic synthetic benchmark.
///
/// Every category mean is the sum of one direction vector per attribute
/// group (the direction of its value in that group), so the attribute
/// structure is linearly decodable by construction. Samples are Gaussian
/// around the mean.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub cardinalities: Vec<usize>,
    pub categories: usize,
    pub feature_dim: usize,
    /// Explicit `[group][value][dim]` direction vectors; drawn from the seed
    /// when absent.
    #[serde(default)]
    pub directions: Option<Vec<Vec<Vec<f64>>>>,
    /// Std of seeded direction entries (ignored with explicit directions).
    #[serde(default = "default_direction_scale")]
    pub direction_scale: f64,
    pub noise_sigma: f64,
    pub train_per_category: usize,
    pub test_per_category: usize,
    pub seed: u64,
}

fn default_direction_scale() -> f64 {
    1.0
}

impl SyntheticSpec {
    fn combination_count(&self) -> usize {
        self.cardinalities.iter().product()
    }

    /// Resolved direction vectors, drawn from the seed when not explicit.
    pub fn resolve_directions(&self) -> Result<Vec<Vec<Vec<f64>>>> {
        if let Some(dirs) = &self.directions {
            if dirs.len() != self.cardinalities.len() {
                return Err(CoreError::InvalidInput(
                    "direction groups do not match schema".into(),
                ));
            }
            for (g, group) in dirs.iter().enumerate() {
                if group.len() != self.cardinalities[g] {
                    return Err(CoreError::InvalidInput(format!(
                        "group {g} has {} directions for {} values",
                        group.len(),
                        self.cardinalities[g]
                    )));
                }
                if group.iter().any(|d| d.len() != self.feature_dim) {
                    return Err(CoreError::InvalidInput("direction width mismatch".into()));
                }
            }
            return Ok(dirs.clone());
        }
        let mut rng = seeds::stream(self.seed, "synthetic-directions", 0);
        Ok(self
            .cardinalities
            .iter()
            .map(|&alpha| {
                (0..alpha)
                    .map(|_| {
                        (0..self.feature_dim)
                            .map(|_| {
                                let z: f64 = seeds::standard_normal(&mut rng);
                                z * self.direction_scale
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect())
    }

    /// Category attribute tuples: all combinations in mixed-radix order, or
    /// a seeded distinct subset when fewer categories are requested.
    pub fn category_tuples(&self) -> Result<Vec<Vec<usize>>> {
        let total = self.combination_count();
        if self.categories == 0 || self.categories > total {
            return Err(CoreError::InvalidInput(format!(
                "{} categories requested from {} attribute combinations",
                self.categories, total
            )));
        }
        let all: Vec<Vec<usize>> = (0..total)
            .map(|mut code| {
                let mut tuple = vec![0usize; self.cardinalities.len()];
                for (g, &alpha) in self.cardinalities.iter().enumerate().rev() {
                    tuple[g] = code % alpha;
                    code /= alpha;
                }
                tuple
            })
            .collect();
        if self.categories == total {
            return Ok(all);
        }
        let mut rng = seeds::stream(self.seed, "synthetic-categories", 0);
        let order = seeds::shuffled_indices(&mut rng, total);
        let mut picked: Vec<Vec<usize>> = order[..self.categories]
            .iter()
            .map(|&i| all[i].clone())
            .collect();
        picked.sort_unstable();
        Ok(picked)
    }

    /// True category mean in feature space (sum of its value directions).
    pub fn category_mean(directions: &[Vec<Vec<f64>>], tuple: &[usize], dim: usize) -> Vec<f64> {
        let mut mean = vec![0.0; dim];
        for (g, &v) in tuple.iter().enumerate() {
            for (m, d) in mean.iter_mut().zip(&directions[g][v]) {
                *m += d;
            }
        }
        mean
    }
}

/// Generates the synthetic dataset described by `spec`, deterministically.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.noise_sigma <= 0.0 {
        return Err(CoreError::InvalidInput("noise sigma must be positive".into()));
    }
    if spec.train_per_category == 0 || spec.test_per_category == 0 {
        return Err(CoreError::InvalidInput(
            "train and test sample counts must be positive".into(),
        ));
    }
    let schema = AttributeSchema::new(&spec.cardinalities)?;
    let tuples = spec.category_tuples()?;
    let directions = spec.resolve_directions()?;
    let attributes = FaultAttributeMatrix::from_raw_tuples(&tuples, schema)?;

    let per_cat = spec.train_per_category + spec.test_per_category;
    let n = tuples.len() * per_cat;
    let mut data = Vec::with_capacity(n * spec.feature_dim);
    let mut labels = Vec::with_capacity(n);
    let mut split = Vec::with_capacity(n);

    let mut rng = seeds::stream(spec.seed, "synthetic-samples", 0);
    for (cat, tuple) in tuples.iter().enumerate() {
        let mean = SyntheticSpec::category_mean(&directions, tuple, spec.feature_dim);
        for s in 0..per_cat {
            for &m in &mean {
                let z: f64 = seeds::standard_normal(&mut rng);
                data.push(m + spec.noise_sigma * z);
            }
            labels.push(cat);
            split.push(if s < spec.train_per_category {
                Split::Train
            } else {
                Split::Test
            });
        }
    }

    let x = Matrix::from_vec(n, spec.feature_dim, data)?;
    Dataset::new(x, labels, split, attributes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            cardinalities: vec![2, 2],
            categories: 4,
            feature_dim: 8,
            directions: None,
            direction_scale: 1.0,
            noise_sigma: 0.5,
            train_per_category: 25,
            test_per_category: 25,
            seed: 17,
        }
    }

    #[test]
    fn generation_is_bit_identical_per_seed() {
        let a = gen_synthetic(&small_spec()).unwrap();
        let b = gen_synthetic(&small_spec()).unwrap();
        assert_eq!(a.x().data(), b.x().data());
        assert_eq!(a.labels(), b.labels());
    }

    #[test]
    fn near_zero_noise_makes_nearest_mean_exact() {
        let mut spec = small_spec();
        spec.noise_sigma = 1e-6;
        let ds = gen_synthetic(&spec).unwrap();
        let dirs = spec.resolve_directions().unwrap();
        let tuples = spec.category_tuples().unwrap();
        let means: Vec<Vec<f64>> = tuples
            .iter()
            .map(|t| SyntheticSpec::category_mean(&dirs, t, spec.feature_dim))
            .collect();
        let (x, y) = ds.test_rows(&(0..4).collect::<Vec<_>>());
        let mut correct = 0;
        for i in 0..x.rows() {
            let row = x.row(i);
            let best = (0..means.len())
                .min_by(|&a, &b| {
                    let da: f64 = row.iter().zip(&means[a]).map(|(r, m)| (r - m).powi(2)).sum();
                    let db: f64 = row.iter().zip(&means[b]).map(|(r, m)| (r - m).powi(2)).sum();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            correct += usize::from(best == y[i]);
        }
        assert_eq!(correct, x.rows());
    }

    #[test]
    fn means_differ_by_exactly_one_direction_swap() {
        let spec = small_spec();
        let dirs = spec.resolve_directions().unwrap();
        // Categories (0,0) and (0,1) differ only in group 1.
        let m00 = SyntheticSpec::category_mean(&dirs, &[0, 0], spec.feature_dim);
        let m01 = SyntheticSpec::category_mean(&dirs, &[0, 1], spec.feature_dim);
        for i in 0..spec.feature_dim {
            let expected = dirs[1][0][i] - dirs[1][1][i];
            assert!((m00[i] - m01[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn bayes_oracle_accuracy_exceeds_ninety_percent() {
        // Equal spherical covariance: the likelihood rule is nearest-mean.
        let ds = gen_synthetic(&small_spec()).unwrap();
        let spec = small_spec();
        let dirs = spec.resolve_directions().unwrap();
        let tuples = spec.category_tuples().unwrap();
        let means: Vec<Vec<f64>> = tuples
            .iter()
            .map(|t| SyntheticSpec::category_mean(&dirs, t, spec.feature_dim))
            .collect();
        let (x, y) = ds.test_rows(&[0, 1, 2, 3]);
        let mut correct = 0;
        for i in 0..x.rows() {
            let row = x.row(i);
            let best = (0..means.len())
                .min_by(|&a, &b| {
                    let da: f64 = row.iter().zip(&means[a]).map(|(r, m)| (r - m).powi(2)).sum();
                    let db: f64 = row.iter().zip(&means[b]).map(|(r, m)| (r - m).powi(2)).sum();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            correct += usize::from(best == y[i]);
        }
        let acc = correct as f64 / x.rows() as f64;
        assert!(acc > 0.9, "bayes oracle accuracy {acc}");
    }

    #[test]
    fn save_load_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = gen_synthetic(&small_spec()).unwrap();
        ds.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(ds.x().data(), back.x().data());
        assert_eq!(ds.labels(), back.labels());
        assert_eq!(ds.split_tags(), back.split_tags());
        assert_eq!(
            ds.attributes().matrix().data(),
            back.attributes().matrix().data()
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = small_spec();
        s.noise_sigma = 0.0;
        assert!(gen_synthetic(&s).is_err());
        let mut s = small_spec();
        s.categories = 5; // only 4 combinations exist
        assert!(gen_synthetic(&s).is_err());
    }
}
