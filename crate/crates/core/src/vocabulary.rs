//! Alphabets, word dictionary, word transitions and per-word dynamics.
//!
//! One GNG is trained per derivative order; its nodes form that order's
//! alphabet. A word picks one letter from every alphabet, and the dictionary
//! is the full Cartesian product, numbered row-major with order 0 as the most
//! significant digit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gng::{nearest_node, train_gng, GngGraph, GngParams};
use crate::linalg;
use crate::signal::GeneralizedSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub order: usize,
    pub dim: usize,
    /// One graph per derivative order `0..=order`.
    pub alphabets: Vec<GngGraph>,
    /// Sorted ids of words that occur in the training encoding.
    pub observed_words: Vec<usize>,
}

impl Vocabulary {
    pub fn alphabet_sizes(&self) -> Vec<usize> {
        self.alphabets.iter().map(GngGraph::len).collect()
    }

    pub fn word_count(&self) -> usize {
        self.alphabets.iter().map(GngGraph::len).product()
    }

    /// Dense id of a letter tuple (one node id per order).
    pub fn word_index(&self, letters: &[usize]) -> Option<usize> {
        if letters.len() != self.alphabets.len() {
            return None;
        }
        let mut id = 0;
        for (&l, a) in letters.iter().zip(&self.alphabets) {
            if l >= a.len() {
                return None;
            }
            id = id * a.len() + l;
        }
        Some(id)
    }

    pub fn letters(&self, word: usize) -> Result<Vec<usize>> {
        if word >= self.word_count() {
            return Err(Error::UnknownWord(word));
        }
        let mut rest = word;
        let mut out = vec![0; self.alphabets.len()];
        for (slot, a) in out.iter_mut().zip(&self.alphabets).rev() {
            *slot = rest % a.len();
            rest /= a.len();
        }
        Ok(out)
    }

    /// Every word's letters in id order.
    pub fn words(&self) -> Vec<Vec<usize>> {
        (0..self.word_count())
            .map(|w| self.letters(w).expect("in range"))
            .collect()
    }

    pub fn is_observed(&self, word: usize) -> bool {
        self.observed_words.binary_search(&word).is_ok()
    }

    /// Word of one generalized state vector.
    pub fn encode_state(&self, state: &[f64]) -> Result<usize> {
        let want = self.dim * (self.order + 1);
        if state.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                found: state.len(),
            });
        }
        let mut letters = Vec::with_capacity(self.order + 1);
        for (l, a) in self.alphabets.iter().enumerate() {
            letters.push(nearest_node(a, &state[l * self.dim..(l + 1) * self.dim])?.0);
        }
        Ok(self.word_index(&letters).expect("nearest nodes are valid letters"))
    }
}

/// Trains one alphabet per derivative block and marks the observed words.
pub fn build_vocabulary(gen: &GeneralizedSeries, params: &GngParams) -> Result<Vocabulary> {
    let mut alphabets = Vec::with_capacity(gen.order + 1);
    for l in 0..=gen.order {
        let p = GngParams {
            seed: params.seed.wrapping_add(l as u64),
            ..params.clone()
        };
        alphabets.push(train_gng(&gen.block_points(l), &p)?);
    }
    let mut vocab = Vocabulary {
        order: gen.order,
        dim: gen.dim,
        alphabets,
        observed_words: Vec::new(),
    };
    let mut seen = encode(gen, &vocab)?;
    seen.sort_unstable();
    seen.dedup();
    vocab.observed_words = seen;
    Ok(vocab)
}

/// Word id of every tick.
pub fn encode(gen: &GeneralizedSeries, vocab: &Vocabulary) -> Result<Vec<usize>> {
    if gen.dim != vocab.dim || gen.order != vocab.order {
        return Err(Error::DimensionMismatch {
            expected: vocab.dim * (vocab.order + 1),
            found: gen.state_dim(),
        });
    }
    gen.states.iter().map(|s| vocab.encode_state(s)).collect()
}

/// Laplace smoothing used when none is configured: `0.05·K/|words|`, at
/// least `1e-3`.
pub fn default_smoothing(sequence_len: usize, word_count: usize) -> f64 {
    (0.05 * sequence_len as f64 / word_count.max(1) as f64).max(1e-3)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    /// Row-stochastic, `matrix[from][to]`.
    pub matrix: Vec<Vec<f64>>,
    pub smoothing: f64,
}

impl TransitionModel {
    pub fn row(&self, from: usize) -> &[f64] {
        &self.matrix[from]
    }

    /// Inclusive prefix sums per row, last entry forced to 1.
    pub fn cumulative(&self) -> Vec<Vec<f64>> {
        self.matrix
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                let mut c: Vec<f64> = row
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                if let Some(last) = c.last_mut() {
                    *last = 1.0;
                }
                c
            })
            .collect()
    }
}

/// First-order transition frequencies with Laplace smoothing `alpha`.
///
/// Rows of words never left during training are uniform.
pub fn learn_transitions(seq: &[usize], vocab: &Vocabulary, alpha: f64) -> Result<TransitionModel> {
    if seq.len() < 2 {
        return Err(Error::SequenceTooShort(seq.len()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParams(format!("smoothing {alpha} must be >= 0")));
    }
    let n = vocab.word_count();
    if let Some(&w) = seq.iter().find(|&&w| w >= n) {
        return Err(Error::UnknownWord(w));
    }
    let mut counts = vec![vec![0.0f64; n]; n];
    for w in seq.windows(2) {
        counts[w[0]][w[1]] += 1.0;
    }
    let matrix = counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            let denom = total + alpha * n as f64;
            if denom > 0.0 {
                row.into_iter().map(|c| (c + alpha) / denom).collect()
            } else {
                vec![1.0 / n as f64; n]
            }
        })
        .collect();
    Ok(TransitionModel {
        matrix,
        smoothing: alpha,
    })
}

/// Local linear model of one word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordDynamics {
    pub word: usize,
    /// Order-1 centroid (normalized units per second); empty when order is 0.
    pub drift: Vec<f64>,
    /// Centroids of orders `1..=L`, concatenated.
    pub derivative_centroids: Vec<f64>,
    /// Order-0 centroid.
    pub emission: Vec<f64>,
    /// Regularized covariance of the order-0 node, row-major.
    pub emission_cov: Vec<f64>,
    /// Block-diagonal process covariance over the whole generalized state, row-major.
    pub process_cov: Vec<f64>,
}

impl WordDynamics {
    pub fn process_cov_matrix(&self) -> DMatrix<f64> {
        let n = (self.process_cov.len() as f64).sqrt() as usize;
        DMatrix::from_row_slice(n, n, &self.process_cov)
    }

    pub fn emission_cov_matrix(&self) -> DMatrix<f64> {
        let n = self.emission.len();
        DMatrix::from_row_slice(n, n, &self.emission_cov)
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn word_dynamics(vocab: &Vocabulary, word: usize) -> Result<WordDynamics> {
    let letters = vocab.letters(word)?;
    let covs: Vec<DMatrix<f64>> = letters
        .iter()
        .zip(&vocab.alphabets)
        .map(|(&n, a)| a.regularized_cov(n))
        .collect();
    let refs: Vec<&DMatrix<f64>> = covs.iter().collect();
    let derivative_centroids: Vec<f64> = letters[1..]
        .iter()
        .zip(&vocab.alphabets[1..])
        .flat_map(|(&n, a)| a.centroid(n).iter().copied())
        .collect();
    Ok(WordDynamics {
        word,
        drift: derivative_centroids[..vocab.dim.min(derivative_centroids.len())].to_vec(),
        derivative_centroids,
        emission: vocab.alphabets[0].centroid(letters[0]).to_vec(),
        emission_cov: row_major(&covs[0]),
        process_cov: row_major(&linalg::block_diagonal(&refs)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gng::{GngEdge, GngNode, NodeStats};
    use crate::signal::{derive_generalized, Scaler, SensorSeries};

    fn graph(centroids: &[Vec<f64>]) -> GngGraph {
        let dim = centroids[0].len();
        GngGraph {
            dim,
            nodes: centroids
                .iter()
                .enumerate()
                .map(|(id, c)| GngNode {
                    id,
                    centroid: c.clone(),
                    error: 0.0,
                })
                .collect(),
            edges: vec![GngEdge { a: 0, b: 1, age: 0 }],
            node_stats: centroids
                .iter()
                .map(|c| NodeStats {
                    count: 1,
                    mean: c.clone(),
                    cov: (0..dim)
                        .map(|i| (0..dim).map(|j| if i == j { 0.04 } else { 0.0 }).collect())
                        .collect(),
                })
                .collect(),
            params: GngParams::default(),
        }
    }

    fn vocab(sizes: &[usize]) -> Vocabulary {
        Vocabulary {
            order: sizes.len() - 1,
            dim: 1,
            alphabets: sizes
                .iter()
                .map(|&n| graph(&(0..n).map(|i| vec![i as f64]).collect::<Vec<_>>()))
                .collect(),
            observed_words: vec![],
        }
    }

    #[test]
    fn dictionary_is_the_cartesian_product() {
        let v = vocab(&[3, 4]);
        assert_eq!(v.word_count(), 12);
        let words = v.words();
        assert_eq!(words.len(), 12);
        assert_eq!(words[0], vec![0, 0]);
        assert_eq!(words[5], vec![1, 1]);
        assert_eq!(words[11], vec![2, 3]);
        for (id, w) in words.iter().enumerate() {
            assert_eq!(v.word_index(w), Some(id));
        }
        assert_eq!(vocab(&[5]).word_count(), 5);
        let v22 = vocab(&[2, 2]);
        let ids: Vec<usize> = v22.words().iter().map(|w| v22.word_index(w).unwrap()).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn encode_exact_match() {
        let v = vocab(&[3, 4]);
        assert_eq!(v.encode_state(&[2.0, 1.0]).unwrap(), v.word_index(&[2, 1]).unwrap());
        assert!(matches!(
            v.encode_state(&[2.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    fn series(vals: &[f64]) -> SensorSeries {
        SensorSeries::new(
            (0..vals.len()).map(|i| i as f64 * 0.1).collect(),
            vec!["x".into()],
            vals.iter().map(|&v| vec![v]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_series_encodes_to_one_word() {
        let v = vocab(&[3, 4]);
        let g = derive_generalized(&series(&[1.0; 20]), 1, Some(&Scaler::identity(1))).unwrap();
        let seq = encode(&g, &v).unwrap();
        assert_eq!(seq.len(), 20);
        assert!(seq.iter().all(|&w| w == seq[0]));
    }

    #[test]
    fn built_vocabulary_is_consistent() {
        let vals: Vec<f64> = (0..400).map(|i| ((i as f64) * 0.05).sin()).collect();
        let g = derive_generalized(&series(&vals), 1, None).unwrap();
        let v = build_vocabulary(&g, &GngParams::default()).unwrap();
        assert_eq!(v.alphabets.len(), 2);
        let seq = encode(&g, &v).unwrap();
        assert_eq!(seq.len(), g.len());
        assert!(v.observed_words.len() <= v.word_count());
        for &w in &v.observed_words {
            assert!(seq.contains(&w));
        }
        // per-block nearest nodes reproduce the encoded tuple
        for (k, &w) in seq.iter().enumerate() {
            let letters = v.letters(w).unwrap();
            for l in 0..2 {
                assert_eq!(nearest_node(&v.alphabets[l], g.block(k, l)).unwrap().0, letters[l]);
            }
        }
    }

    #[test]
    fn transition_counts() {
        let v = vocab(&[3]);
        let t = learn_transitions(&[1, 1, 2], &v, 0.0).unwrap();
        assert_eq!(t.row(1), &[0.0, 0.5, 0.5]);
        let t = learn_transitions(&[2, 2, 2, 2], &v, 0.0).unwrap();
        assert_eq!(t.row(2), &[0.0, 0.0, 1.0]);
        let t = learn_transitions(&[2, 2, 2, 2], &v, 1.0).unwrap();
        assert_eq!(t.row(0), &[1.0 / 3.0; 3]);
        // alpha = 0 and an unvisited row falls back to uniform
        let t = learn_transitions(&[2, 2], &v, 0.0).unwrap();
        assert_eq!(t.row(0), &[1.0 / 3.0; 3]);
        assert!(matches!(learn_transitions(&[1], &v, 0.0), Err(Error::SequenceTooShort(1))));
        assert!(matches!(learn_transitions(&[1, 7], &v, 0.0), Err(Error::UnknownWord(7))));
    }

    #[test]
    fn rows_are_stochastic() {
        let v = vocab(&[4, 3]);
        let seq: Vec<usize> = (0..200).map(|i| (i * i + 3 * i) % 7).collect();
        for alpha in [0.0, 1e-3, 0.5, 3.0] {
            let t = learn_transitions(&seq, &v, alpha).unwrap();
            for row in &t.matrix {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn smoothing_default() {
        assert_eq!(default_smoothing(2000, 100), 1.0);
        assert_eq!(default_smoothing(1, 100), 1e-3);
    }

    #[test]
    fn dynamics_of_a_word() {
        let mut v = vocab(&[3, 4]);
        v.alphabets[1].nodes[0].centroid = vec![0.0];
        let d = word_dynamics(&v, v.word_index(&[2, 0]).unwrap()).unwrap();
        assert_eq!(d.drift, vec![0.0]);
        assert_eq!(d.emission, vec![2.0]);
        let q = d.process_cov_matrix();
        assert_eq!(q.nrows(), 2);
        assert_eq!(q[(0, 1)], 0.0);
        assert!(q[(0, 0)] > 0.04 && q[(1, 1)] > 0.04);
        assert!(linalg::cholesky(&q).is_some());

        let d = word_dynamics(&v, v.word_index(&[0, 3]).unwrap()).unwrap();
        assert_eq!(d.drift, vec![3.0]);

        let v0 = vocab(&[5]);
        let d = word_dynamics(&v0, 4).unwrap();
        assert!(d.drift.is_empty());
        assert_eq!(d.emission, vec![4.0]);
        assert!(matches!(word_dynamics(&v, 12), Err(Error::UnknownWord(12))));
    }
}
