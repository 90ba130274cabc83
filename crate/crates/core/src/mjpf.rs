//! Markov jump particle filter.
//!
//! Each particle carries a word hypothesis and a Gaussian over the
//! generalized state. Prediction samples the next word from the transition
//! row of the particle's current word and runs a Kalman time update with that
//! word's local linear model: the order-0 block moves by `dt · drift`, the
//! derivative blocks are reset to the word's centroids, and the covariance is
//! `A P Aᵀ + Q_word` with `A = [[I, dt·I, 0..], [0, ..]]`.
//!
//! With region anchoring enabled the predicted order-0 block is additionally
//! conditioned on the word's order-0 cluster Gaussian, so the prediction
//! reflects where the word's regime lives and not only how it moves.
//!
//! The update step applies the observation `z = H x + ω`, `H = [I 0 ..]`,
//! `ω ~ N(0, R)`, reweights particles by their predictive likelihood and
//! scores the tick with the Hellinger distance between each particle's
//! projected prediction and the evidence `N(z, R)`, averaged with the
//! pre-update weights. Systematic resampling runs when the effective sample
//! size drops below `N/2`.
//!
//! The filter works in normalized units; [`run_sequence`] applies the model's
//! scaler to raw series.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anomaly::{hellinger, GaussianDensity};
use crate::error::{Error, Result};
use crate::linalg;
use crate::signal::{FeatureCase, Scaler, SensorSeries};
use crate::vocabulary::{word_dynamics, TransitionModel, Vocabulary, WordDynamics};

pub const DEFAULT_PARTICLES: usize = 200;
/// Default observation noise standard deviation, normalized units.
pub const DEFAULT_R_STD: f64 = 0.08;
const LIKELIHOOD_FLOOR: f64 = 1e-300;

/// Everything the filter needs for one feature-case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub feature: String,
    pub channels: Vec<String>,
    pub scaler: Scaler,
    pub dt: f64,
    pub vocabulary: Vocabulary,
    pub transitions: TransitionModel,
    pub dynamics: Vec<WordDynamics>,
    /// Observation covariance `R`, row-major `d × d`.
    pub observation_cov: Vec<f64>,
    /// Condition predictions on the word's order-0 cluster.
    pub region_anchoring: bool,
}

impl ModelBundle {
    pub fn new(
        feature: String,
        channels: Vec<String>,
        scaler: Scaler,
        dt: f64,
        vocabulary: Vocabulary,
        transitions: TransitionModel,
        observation_cov: DMatrix<f64>,
        region_anchoring: bool,
    ) -> Result<Self> {
        let d = vocabulary.dim;
        if channels.len() != d || scaler.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: channels.len(),
            });
        }
        if observation_cov.nrows() != d || observation_cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: observation_cov.nrows(),
            });
        }
        if linalg::cholesky(&observation_cov).is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        if vocabulary.order > 0 && !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
        }
        let n = vocabulary.word_count();
        if transitions.matrix.len() != n || transitions.matrix.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: transitions.matrix.len(),
            });
        }
        let dynamics = (0..n)
            .map(|w| word_dynamics(&vocabulary, w))
            .collect::<Result<_>>()?;
        Ok(Self {
            feature,
            channels,
            scaler,
            dt,
            vocabulary,
            transitions,
            dynamics,
            observation_cov: observation_cov.transpose().as_slice().to_vec(),
            region_anchoring,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.vocabulary.dim
    }

    pub fn state_dim(&self) -> usize {
        self.vocabulary.dim * (self.vocabulary.order + 1)
    }

    pub fn observation_cov_matrix(&self) -> DMatrix<f64> {
        let d = self.obs_dim();
        DMatrix::from_row_slice(d, d, &self.observation_cov)
    }

    /// `H = [I | 0]`.
    pub fn observation_matrix(&self) -> DMatrix<f64> {
        let d = self.obs_dim();
        DMatrix::from_fn(d, self.state_dim(), |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// `A = [[I, dt·I, 0, ..], [0, ..]]`.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let d = self.obs_dim();
        let n = self.state_dim();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..d {
            a[(i, i)] = 1.0;
            if self.vocabulary.order >= 1 {
                a[(i, d + i)] = self.dt;
            }
        }
        a
    }
}

/// Per-word matrices cached for the filter loop.
#[derive(Debug, Clone)]
struct WordCache {
    derivative: DVector<f64>,
    drift: DVector<f64>,
    emission: DVector<f64>,
    emission_cov: DMatrix<f64>,
    process_cov: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct Prepared {
    d: usize,
    n: usize,
    dt: f64,
    a: DMatrix<f64>,
    r: DMatrix<f64>,
    cumulative: Vec<Vec<f64>>,
    words: Vec<WordCache>,
    anchoring: bool,
}

impl Prepared {
    fn new(model: &ModelBundle) -> Self {
        let words = model
            .dynamics
            .iter()
            .map(|w| WordCache {
                derivative: DVector::from_column_slice(&w.derivative_centroids),
                drift: DVector::from_column_slice(&w.drift),
                emission: DVector::from_column_slice(&w.emission),
                emission_cov: w.emission_cov_matrix(),
                process_cov: w.process_cov_matrix(),
            })
            .collect();
        Self {
            d: model.obs_dim(),
            n: model.state_dim(),
            dt: model.dt,
            a: model.transition_matrix(),
            r: model.observation_cov_matrix(),
            cumulative: model.transitions.cumulative(),
            words,
            anchoring: model.region_anchoring,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub word: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub tick: usize,
    /// Moment-matched predicted mixture projected to observation space.
    pub predicted_mean: Vec<f64>,
    pub predicted_cov: Vec<f64>,
    /// Weighted posterior mean of the generalized state.
    pub posterior_mean: Vec<f64>,
    pub map_word: usize,
    pub theta: f64,
    pub ess: f64,
    pub resampled: bool,
    /// Every particle likelihood underflowed; weights were reset.
    pub degenerate: bool,
}

pub struct FilterState {
    prep: Prepared,
    particles: Vec<Particle>,
    rng: ChaCha8Rng,
    tick: usize,
    predicted: bool,
}

/// Starts a filter at normalized observation `z0`: every particle takes the
/// word of `(z0, 0, ..)` with that word's process covariance.
pub fn init_filter(model: &ModelBundle, n_particles: usize, z0: &[f64], seed: u64) -> Result<FilterState> {
    if n_particles == 0 {
        return Err(Error::InvalidParams("n_particles must be at least 1".into()));
    }
    let prep = Prepared::new(model);
    if z0.len() != prep.d {
        return Err(Error::DimensionMismatch {
            expected: prep.d,
            found: z0.len(),
        });
    }
    let mut state = vec![0.0; prep.n];
    state[..prep.d].copy_from_slice(z0);
    let word = model.vocabulary.encode_state(&state)?;
    let mean = DVector::from_vec(state);
    let cov = prep.words[word].process_cov.clone();
    let w = 1.0 / n_particles as f64;
    let particles = (0..n_particles)
        .map(|_| Particle {
            word,
            mean: mean.clone(),
            cov: cov.clone(),
            weight: w,
        })
        .collect();
    Ok(FilterState {
        prep,
        particles,
        rng: ChaCha8Rng::seed_from_u64(seed),
        tick: 0,
        predicted: false,
    })
}

fn sample_row(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

fn chol_or_fail(m: &DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = linalg::cholesky(m) {
        return Ok(c);
    }
    let d = m.nrows();
    let jitter = 1e-12 * (1.0 + m.trace().abs() / d as f64);
    linalg::cholesky(&(m + DMatrix::identity(d, d) * jitter))
        .ok_or_else(|| Error::NumericalFailure(format!("{what} is not positive definite")))
}

/// Conditions the order-0 block of `(mean, cov)` on `N(target, noise)`;
/// returns the log predictive density of `target`.
fn condition_order0(
    mean: &mut DVector<f64>,
    cov: &mut DMatrix<f64>,
    d: usize,
    target: &DVector<f64>,
    noise: &DMatrix<f64>,
) -> Result<f64> {
    let s = cov.view((0, 0), (d, d)) + noise;
    let chol = chol_or_fail(&s, "innovation covariance")?;
    let residual = target - mean.rows(0, d);
    let loglik = linalg::gaussian_log_pdf(&chol, &residual);
    let pht = cov.columns(0, d).into_owned();
    // K = P Hᵀ S⁻¹
    let gain = chol.solve(&pht.transpose()).transpose();
    *mean += &gain * residual;
    *cov -= &gain * pht.transpose();
    *cov = linalg::symmetrize(cov);
    Ok(loglik)
}

impl FilterState {
    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    /// Time update of every particle; afterwards [`Self::particles`] holds
    /// the predicted mixture.
    pub fn predict(&mut self) -> Result<&[Particle]> {
        let p = &self.prep;
        let d = p.d;
        for part in self.particles.iter_mut() {
            let u: f64 = self.rng.random();
            let next = sample_row(&p.cumulative[part.word], u);
            let wc = &p.words[next];
            let mut mean = DVector::zeros(p.n);
            mean.rows_mut(0, d).copy_from(&part.mean.rows(0, d));
            if p.n > d {
                mean.rows_mut(0, d).axpy(p.dt, &wc.drift, 1.0);
                mean.rows_mut(d, p.n - d).copy_from(&wc.derivative);
            }
            let mut cov = &p.a * &part.cov * p.a.transpose() + &wc.process_cov;
            if p.anchoring {
                condition_order0(&mut mean, &mut cov, d, &wc.emission, &wc.emission_cov)?;
            }
            part.word = next;
            part.mean = mean;
            part.cov = cov;
        }
        self.tick += 1;
        self.predicted = true;
        Ok(&self.particles)
    }

    /// Measurement update with normalized observation `z`.
    pub fn update(&mut self, z: &[f64]) -> Result<StepResult> {
        if !self.predicted {
            return Err(Error::PredictRequired);
        }
        let p = &self.prep;
        let d = p.d;
        if z.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: z.len(),
            });
        }
        let zv = DVector::from_column_slice(z);
        let evidence = GaussianDensity {
            mean: zv.clone(),
            cov: p.r.clone(),
        };

        // predicted mixture summary and per-particle scores use prior weights
        let mut pred_mean = DVector::zeros(d);
        for part in &self.particles {
            pred_mean.axpy(part.weight, &part.mean.rows(0, d), 1.0);
        }
        let mut pred_cov = DMatrix::zeros(d, d);
        let mut theta = 0.0;
        let mut theta_max: f64 = 0.0;
        let mut loglik = Vec::with_capacity(self.particles.len());
        for part in self.particles.iter_mut() {
            let m0 = part.mean.rows(0, d).into_owned();
            let p00 = part.cov.view((0, 0), (d, d)).into_owned();
            let dev = &m0 - &pred_mean;
            pred_cov += (&p00 + &dev * dev.transpose()) * part.weight;

            let projected = GaussianDensity { mean: m0, cov: p00 };
            let db = crate::anomaly::bhattacharyya_distance(&projected, &evidence)
                .map_err(|_| Error::NumericalFailure("predicted covariance lost definiteness".into()))?;
            let th = hellinger((-db).exp())?;
            theta += part.weight * th;
            theta_max = theta_max.max(th);

            loglik.push(condition_order0(&mut part.mean, &mut part.cov, d, &zv, &p.r)?);
        }

        let max_ll = loglik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let likes: Vec<f64> = loglik.iter().map(|l| l.exp()).collect();
        let degenerate = likes.iter().all(|&l| l < LIKELIHOOD_FLOOR) || !max_ll.is_finite();
        let n = self.particles.len() as f64;
        if degenerate {
            self.particles.iter_mut().for_each(|q| q.weight = 1.0 / n);
            theta = theta_max;
        } else {
            let mut total = 0.0;
            for (q, l) in self.particles.iter_mut().zip(&likes) {
                q.weight *= l.max(LIKELIHOOD_FLOOR);
                total += q.weight;
            }
            self.particles.iter_mut().for_each(|q| q.weight /= total);
        }

        let mut post_mean = DVector::zeros(p.n);
        let mut mass = vec![0.0; p.words.len()];
        let mut sum_sq = 0.0;
        for q in &self.particles {
            post_mean.axpy(q.weight, &q.mean, 1.0);
            mass[q.word] += q.weight;
            sum_sq += q.weight * q.weight;
        }
        let map_word = mass
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (w, &m)| if m > b.1 { (w, m) } else { b })
            .0;
        let ess = 1.0 / sum_sq;
        let resampled = ess < n / 2.0;
        if resampled {
            self.resample();
        }
        self.predicted = false;

        Ok(StepResult {
            tick: self.tick,
            predicted_mean: pred_mean.as_slice().to_vec(),
            predicted_cov: pred_cov.transpose().as_slice().to_vec(),
            posterior_mean: post_mean.as_slice().to_vec(),
            map_word,
            theta: theta.clamp(0.0, 1.0),
            ess,
            resampled,
            degenerate,
        })
    }

    /// Systematic resampling with a single uniform draw.
    fn resample(&mut self) {
        let n = self.particles.len();
        let u0: f64 = self.rng.random::<f64>() / n as f64;
        let mut out = Vec::with_capacity(n);
        let mut cum = 0.0;
        let mut i = 0;
        for j in 0..n {
            let target = u0 + j as f64 / n as f64;
            while i < n - 1 && cum + self.particles[i].weight < target {
                cum += self.particles[i].weight;
                i += 1;
            }
            let mut p = self.particles[i].clone();
            p.weight = 1.0 / n as f64;
            out.push(p);
        }
        self.particles = out;
    }

    /// Weighted mean of the particle means.
    pub fn weighted_mean(&self) -> Vec<f64> {
        let mut m = DVector::zeros(self.prep.n);
        for q in &self.particles {
            m.axpy(q.weight, &q.mean, 1.0);
        }
        m.as_slice().to_vec()
    }

    #[cfg(test)]
    fn set_particles(&mut self, particles: Vec<Particle>) {
        self.particles = particles;
    }

    #[cfg(test)]
    fn force_resample(&mut self) {
        self.resample();
    }
}

/// Filters a raw series: tick 0 initializes, every later tick is one
/// predict/update pair.
pub fn run_sequence(
    model: &ModelBundle,
    series: &SensorSeries,
    n_particles: usize,
    seed: u64,
) -> Result<Vec<StepResult>> {
    if series.is_empty() {
        return Err(Error::SeriesTooShort { len: 0, needed: 1 });
    }
    let case = FeatureCase::parse(&model.channels.join("+"), series.channels())?;
    let selected = crate::signal::select_feature(series, &case)?;
    let obs: Vec<Vec<f64>> = selected.rows().iter().map(|r| model.scaler.apply(r)).collect();
    let mut filter = init_filter(model, n_particles, &obs[0], seed)?;
    let mut out = Vec::with_capacity(obs.len().saturating_sub(1));
    for z in &obs[1..] {
        filter.predict()?;
        out.push(filter.update(z)?);
    }
    Ok(out)
}
