//! Deterministic PCA by eigendecomposition of the sample covariance.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{column_mean_f64, GeometryError};

pub const SPACE_MAGIC: [u8; 4] = *b"SPC1";
pub const SPACE_VERSION: u32 = 1;

const COVARIANCE_CHUNK: usize = 4096;

/// A fitted linear map `x -> basis . (x - mean)`.
///
/// `basis` has one orthonormal row per output dimension, ordered by
/// decreasing explained variance. Within a row, the entry of largest
/// magnitude (lowest index on ties) is nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticSpace {
    pub space_id: String,
    pub mean: Vec<f32>,
    pub basis: Array2<f32>,
    pub explained_variance: Vec<f64>,
    /// Seed of the sample the space was fitted on, when one was drawn.
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpaceHeader {
    space_id: String,
    input_dim: usize,
    output_dim: usize,
    seed: Option<u64>,
    explained_variance: Vec<f64>,
}

impl SemanticSpace {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Shifts the stored mean by `offset`; used when the fitting sample was
    /// already centered on `offset` by the caller.
    pub fn compose_mean(&mut self, offset: &[f32]) -> Result<(), GeometryError> {
        if offset.len() != self.mean.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.mean.len(),
                actual: offset.len(),
            });
        }
        for (m, &o) in self.mean.iter_mut().zip(offset) {
            *m = (*m as f64 + o as f64) as f32;
        }
        Ok(())
    }

    pub fn header_path(dir: &Path, space_id: &str) -> PathBuf {
        dir.join(format!("{space_id}.space.json"))
    }

    pub fn binary_path(dir: &Path, space_id: &str) -> PathBuf {
        dir.join(format!("{space_id}.space.bin"))
    }

    /// Writes `<space_id>.space.json` and `<space_id>.space.bin` into `dir`.
    ///
    /// The binary part is `"SPC1"`, u32 version, u32 D, u32 D', then the
    /// mean (D floats) and the basis (D' x D floats, row-major), all
    /// little-endian 32-bit.
    pub fn save(&self, dir: &Path) -> Result<(), GeometryError> {
        let header = SpaceHeader {
            space_id: self.space_id.clone(),
            input_dim: self.input_dim(),
            output_dim: self.output_dim(),
            seed: self.seed,
            explained_variance: self.explained_variance.clone(),
        };
        let json = serde_json::to_vec_pretty(&header).expect("header serializes");
        fs::write(Self::header_path(dir, &self.space_id), json)?;

        let mut w = BufWriter::new(File::create(Self::binary_path(dir, &self.space_id))?);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), GeometryError> {
        w.write_all(&SPACE_MAGIC)?;
        w.write_all(&SPACE_VERSION.to_le_bytes())?;
        w.write_all(&(self.input_dim() as u32).to_le_bytes())?;
        w.write_all(&(self.output_dim() as u32).to_le_bytes())?;
        for v in self.mean.iter().chain(self.basis.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, space_id: &str) -> Result<Self, GeometryError> {
        let header: SpaceHeader = serde_json::from_slice(&fs::read(Self::header_path(dir, space_id))?)
            .map_err(|e| GeometryError::Format(e.to_string()))?;
        let mut r = BufReader::new(File::open(Self::binary_path(dir, space_id))?);
        let (mean, basis) = read_binary(&mut r)?;
        if mean.len() != header.input_dim
            || basis.nrows() != header.output_dim
            || header.explained_variance.len() != header.output_dim
        {
            return Err(GeometryError::Format(
                "header dimensions disagree with binary payload".into(),
            ));
        }
        Ok(SemanticSpace {
            space_id: header.space_id,
            mean,
            basis,
            explained_variance: header.explained_variance,
            seed: header.seed,
        })
    }
}

fn read_binary<R: Read>(mut r: R) -> Result<(Vec<f32>, Array2<f32>), GeometryError> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if head[0..4] != SPACE_MAGIC {
        return Err(GeometryError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != SPACE_VERSION {
        return Err(GeometryError::Format(format!("unsupported version {version}")));
    }
    let d = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let d_out = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
    let mut payload = vec![0u8; 4 * (d + d_out * d)];
    r.read_exact(&mut payload)?;
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mean = values[..d].to_vec();
    let basis = Array2::from_shape_vec((d_out, d), values[d..].to_vec()).expect("sized above");
    Ok((mean, basis))
}

/// Sample covariance with 1/(N-1) normalization, accumulated in chunks.
fn covariance(sample: ArrayView2<f32>, mean: &[f64]) -> Array2<f64> {
    let d = sample.ncols();
    let mut cov = Array2::<f64>::zeros((d, d));
    for start in (0..sample.nrows()).step_by(COVARIANCE_CHUNK) {
        let end = (start + COVARIANCE_CHUNK).min(sample.nrows());
        let chunk = sample.slice(s![start..end, ..]);
        let centered = Array2::from_shape_fn(chunk.dim(), |(i, j)| chunk[[i, j]] as f64 - mean[j]);
        cov += &centered.t().dot(&centered);
    }
    cov /= (sample.nrows() - 1) as f64;
    cov
}

/// Fits the top `d_out` principal directions of `sample`.
///
/// The sample is re-centered on its own mean, which becomes the space's
/// mean; pass an already demeaned sample and use
/// [`SemanticSpace::compose_mean`] to fold the outer mean back in.
pub fn fit_pca(
    sample: ArrayView2<f32>,
    d_out: usize,
    space_id: &str,
) -> Result<SemanticSpace, GeometryError> {
    let (n, d) = sample.dim();
    if n == 0 {
        return Err(GeometryError::EmptySample);
    }
    let max = (n - 1).min(d);
    if d_out == 0 || d_out > max {
        return Err(GeometryError::Rank {
            requested: d_out,
            max,
        });
    }

    let mean = column_mean_f64(sample);
    let cov = covariance(sample, &mean);
    let eigen = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .total_cmp(&eigen.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut basis = Array2::<f32>::zeros((d_out, d));
    let mut explained_variance = Vec::with_capacity(d_out);
    for (row, &component) in order.iter().take(d_out).enumerate() {
        let vector = eigen.eigenvectors.column(component);
        let mut out = basis.row_mut(row);
        for (o, &v) in out.iter_mut().zip(vector.iter()) {
            *o = v as f32;
        }
        let pivot = out
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > out[best].abs() { i } else { best });
        if out[pivot] < 0.0 {
            out.mapv_inplace(|v| -v);
        }
        explained_variance.push(eigen.eigenvalues[component].max(0.0));
    }

    Ok(SemanticSpace {
        space_id: space_id.to_string(),
        mean: mean.iter().map(|&m| m as f32).collect(),
        basis,
        explained_variance,
        seed: None,
    })
}

/// Projects each row: `basis . (row - mean)`.
pub fn apply_pca(space: &SemanticSpace, vectors: ArrayView2<f32>) -> Result<Array2<f32>, GeometryError> {
    if vectors.ncols() != space.input_dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: space.input_dim(),
            actual: vectors.ncols(),
        });
    }
    let d_out = space.output_dim();
    let basis: Vec<Vec<f64>> = space
        .basis
        .axis_iter(Axis(0))
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect();
    let projected: Vec<f32> = (0..vectors.nrows())
        .into_par_iter()
        .flat_map_iter(|i| {
            let centered: Vec<f64> = vectors
                .row(i)
                .iter()
                .zip(&space.mean)
                .map(|(&x, &m)| x as f64 - m as f64)
                .collect();
            basis
                .iter()
                .map(move |b| b.iter().zip(&centered).map(|(a, c)| a * c).sum::<f64>() as f32)
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(Array2::from_shape_vec((vectors.nrows(), d_out), projected).expect("row-major output"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn line_data_has_one_direction() {
        let pts: Vec<f32> = [-2.0f32, -1.0, 1.0, 2.0]
            .iter()
            .flat_map(|t| [t * 0.6, t * 0.8])
            .collect();
        let sample = Array2::from_shape_vec((4, 2), pts).unwrap();
        let space = fit_pca(sample.view(), 2, "line").unwrap();
        assert!((space.basis[[0, 0]] - 0.6).abs() < 1e-6);
        assert!((space.basis[[0, 1]] - 0.8).abs() < 1e-6);
        assert!(space.explained_variance[1].abs() < 1e-12);
        // variance of t in {-2,-1,1,2} with 1/(N-1): 10/3
        assert!((space.explained_variance[0] - 10.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn rank_errors() {
        let sample = array![[0.0f32, 1.0, 2.0], [1.0, 0.0, 2.0], [3.0, 3.0, 3.0]];
        assert!(matches!(
            fit_pca(sample.view(), 3, "x"),
            Err(GeometryError::Rank { requested: 3, max: 2 })
        ));
        assert!(matches!(fit_pca(sample.view(), 0, "x"), Err(GeometryError::Rank { .. })));
        assert!(fit_pca(sample.view(), 2, "x").is_ok());
    }

    #[test]
    fn mean_maps_to_origin() {
        let sample = array![[1.0f32, 2.0, 0.5], [3.0, -1.0, 2.0], [0.0, 0.0, 1.0], [2.0, 5.0, -3.0]];
        let space = fit_pca(sample.view(), 2, "x").unwrap();
        let mu = Array2::from_shape_vec((1, 3), space.mean.clone()).unwrap();
        let out = apply_pca(&space, mu.view()).unwrap();
        assert_eq!(out, Array2::<f32>::zeros((1, 2)));
        assert!(matches!(
            apply_pca(&space, array![[1.0f32, 2.0]].view()),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn save_and_load() {
        let sample = array![[1.0f32, 2.0, 0.5], [3.0, -1.0, 2.0], [0.0, 0.0, 1.0], [2.0, 5.0, -3.0]];
        let mut space = fit_pca(sample.view(), 2, "roundtrip").unwrap();
        space.seed = Some(9);
        let dir = tempfile::tempdir().unwrap();
        space.save(dir.path()).unwrap();
        assert_eq!(SemanticSpace::load(dir.path(), "roundtrip").unwrap(), space);
        let bin = fs::read(SemanticSpace::binary_path(dir.path(), "roundtrip")).unwrap();
        assert_eq!(&bin[0..4], b"SPC1");
        assert_eq!(bin.len(), 16 + 4 * (3 + 2 * 3));
    }
}
