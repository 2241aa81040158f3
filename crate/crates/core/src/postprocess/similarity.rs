use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Binary co-clustering indicator matrix of one partition (row-major).
pub fn score_matrix(labels: &[u32]) -> Vec<u8> {
    let n = labels.len();
    let mut out = vec![0u8; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (labels[i] == labels[j]) as u8;
        }
    }
    out
}

/// Running sum of score matrices. Integer counts make the sum exact and
/// therefore independent of the order iterations are added or merged.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreAccumulator {
    n: usize,
    /// Pair counts for i < j at `i * n + j`.
    counts: Vec<u32>,
    iterations: u64,
}

impl ScoreAccumulator {
    pub fn new(n: usize) -> Self {
        ScoreAccumulator {
            n,
            counts: vec![0; n * n],
            iterations: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn add(&mut self, labels: &[u32]) -> Result<()> {
        if labels.len() != self.n {
            return Err(Error::Dimension(format!(
                "partition of {} subjects added to a {n}x{n} score sum",
                labels.len(),
                n = self.n
            )));
        }
        let max = labels.iter().copied().max().unwrap_or(0) as usize;
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); max + 1];
        for (i, &l) in labels.iter().enumerate() {
            groups[l as usize].push(i);
        }
        for g in &groups {
            for (a, &i) in g.iter().enumerate() {
                let row = &mut self.counts[i * self.n..(i + 1) * self.n];
                for &j in &g[a + 1..] {
                    row[j] += 1;
                }
            }
        }
        self.iterations += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ScoreAccumulator) -> Result<()> {
        if other.n != self.n {
            return Err(Error::Dimension("score sums of different sizes".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.iterations += other.iterations;
        Ok(())
    }

    /// Entrywise mean of the accumulated score matrices.
    pub fn similarity(&self) -> Result<SimilarityMatrix> {
        if self.iterations == 0 {
            return Err(Error::Data("similarity needs at least one iteration".into()));
        }
        let n = self.n;
        let t = self.iterations as f64;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in i + 1..n {
                let s = self.counts[i * n + j] as f64 / t;
                values[i * n + j] = s;
                values[j * n + i] = s;
            }
        }
        Ok(SimilarityMatrix {
            n,
            values,
            iterations: self.iterations,
        })
    }
}

/// Posterior co-clustering probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    pub iterations: u64,
}

/// Averages the score matrices of a sequence of partitions.
pub fn accumulate_similarity<'a>(partitions: impl IntoIterator<Item = &'a [u32]>) -> Result<SimilarityMatrix> {
    let mut it = partitions.into_iter().peekable();
    let n = it.peek().map_or(0, |p| p.len());
    let mut acc = ScoreAccumulator::new(n);
    for p in it {
        acc.add(p)?;
    }
    acc.similarity()
}

impl SimilarityMatrix {
    /// Validates a dense matrix: square, symmetric, unit diagonal, entries in [0, 1].
    pub fn from_dense(n: usize, values: Vec<f64>, iterations: u64) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension(format!("{} entries for a {n}x{n} matrix", values.len())));
        }
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(Error::Data(format!("similarity diagonal entry {} is not 1", i + 1)));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(0.0..=1.0).contains(&v) || v != values[j * n + i] {
                    return Err(Error::Data(format!(
                        "similarity entry ({}, {}) is not a symmetric probability",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { n, values, iterations })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dissimilarity `1 − S`, row-major.
    pub fn dissimilarity(&self) -> Vec<f64> {
        self.values.iter().map(|s| 1.0 - s).collect()
    }

    /// 8-byte little-endian n, then n² little-endian f64 in row-major order.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            w.write_all(&(self.n as u64).to_le_bytes())?;
            for v in &self.values {
                w.write_all(&v.to_le_bytes())?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: impl AsRef<Path>, iterations: u64) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 8 {
            return Err(Error::Data(format!("{}: truncated similarity header", path.display())));
        }
        let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
        let body = &bytes[8..];
        if body.len() != n.saturating_mul(n).saturating_mul(8) {
            return Err(Error::Data(format!(
                "{}: expected {n}x{n} matrix, found {} payload bytes",
                path.display(),
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::from_dense(n, values, iterations)
    }

    /// Plain CSV without header, one matrix row per line.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path.as_ref())?;
        for i in 0..self.n {
            w.write_record(self.values[i * self.n..(i + 1) * self.n].iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_partition_average() {
        let s = accumulate_similarity([&[1, 1, 2][..], &[1, 2, 2][..]]).unwrap();
        assert_eq!(s.get(0, 1), 0.5);
        assert_eq!(s.get(1, 2), 0.5);
        assert_eq!(s.get(0, 2), 0.0);
        assert_eq!(s.get(2, 0), 0.0);
        for i in 0..3 {
            assert_eq!(s.get(i, i), 1.0);
        }
    }

    #[test]
    fn single_partition_is_binary() {
        let s = accumulate_similarity([&[3, 1, 3, 2][..]]).unwrap();
        let score = score_matrix(&[3, 1, 3, 2]);
        for (v, b) in s.values().iter().zip(score) {
            assert_eq!(*v, b as f64);
        }
    }

    #[test]
    fn merge_matches_sequential() {
        let parts: Vec<Vec<u32>> = vec![vec![1, 1, 2, 2], vec![1, 2, 2, 3], vec![1, 1, 1, 1]];
        let mut a = ScoreAccumulator::new(4);
        parts.iter().for_each(|p| a.add(p).unwrap());
        let mut b = ScoreAccumulator::new(4);
        b.add(&parts[2]).unwrap();
        let mut c = ScoreAccumulator::new(4);
        c.add(&parts[1]).unwrap();
        c.add(&parts[0]).unwrap();
        b.merge(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        assert!(ScoreAccumulator::new(3).similarity().is_err());
        assert!(ScoreAccumulator::new(3).add(&[1, 2]).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let s = accumulate_similarity([&[1, 1, 2][..], &[1, 2, 2][..], &[1, 1, 1][..]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        s.write_binary(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 9 * 8);
        assert_eq!(&bytes[..8], &3u64.to_le_bytes());
        assert_eq!(SimilarityMatrix::read_binary(&path, 3).unwrap(), s);
    }
}
