//! Sensor series ingestion, feature-case selection and generalized states.
//!
//! A [`SensorSeries`] holds uniformly sampled, synchronized channels. A
//! [`FeatureCase`] picks a subset of channels; every non-empty subset is a
//! candidate model. [`derive_generalized`] z-scores the selected channels and
//! stacks them with their first `L` backward-difference derivatives.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DT_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSeries {
    timestamps: Vec<f64>,
    channels: Vec<String>,
    /// One row per tick, one column per channel.
    values: Vec<Vec<f64>>,
}

impl SensorSeries {
    pub fn new(timestamps: Vec<f64>, channels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::EmptyChannelSet);
        }
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: timestamps.len(),
                right: values.len(),
            });
        }
        for (row, r) in values.iter().enumerate() {
            if r.len() != channels.len() {
                return Err(Error::RaggedRow {
                    row,
                    found: r.len(),
                    expected: channels.len(),
                });
            }
            if let Some(c) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidValue {
                    row,
                    column: channels[c].clone(),
                    value: r[c].to_string(),
                });
            }
        }
        check_time_axis(&timestamps)?;
        Ok(Self {
            timestamps,
            channels,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[c]).collect()
    }

    /// Sampling period; 0 for series shorter than two ticks.
    pub fn dt(&self) -> f64 {
        let k = self.len();
        if k < 2 {
            0.0
        } else {
            (self.timestamps[k - 1] - self.timestamps[0]) / (k - 1) as f64
        }
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// Hex SHA-256 over channel names and the bit patterns of every value.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.channels {
            h.update(c.as_bytes());
            h.update([0u8]);
        }
        for (t, row) in self.timestamps.iter().zip(&self.values) {
            h.update(t.to_bits().to_le_bytes());
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t");
        for c in &self.channels {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (t, row) in self.timestamps.iter().zip(&self.values) {
            out.push_str(&t.to_string());
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn check_time_axis(timestamps: &[f64]) -> Result<()> {
    if let Some(row) = timestamps.iter().position(|t| !t.is_finite()) {
        return Err(Error::InvalidValue {
            row,
            column: "t".into(),
            value: timestamps[row].to_string(),
        });
    }
    for (i, w) in timestamps.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::NonMonotonicTime { row: i + 1 });
        }
    }
    let k = timestamps.len();
    if k > 2 {
        let expected = (timestamps[k - 1] - timestamps[0]) / (k - 1) as f64;
        for (i, w) in timestamps.windows(2).enumerate() {
            let step = w[1] - w[0];
            // Timestamps read from decimal text carry one ulp of rounding per value.
            let slack = DT_REL_TOL * expected + 4.0 * f64::EPSILON * w[1].abs().max(w[0].abs());
            if (step - expected).abs() > slack {
                return Err(Error::NonUniformSampling {
                    row: i + 1,
                    step,
                    expected,
                });
            }
        }
    }
    Ok(())
}

/// Reads a `t,<chan1>,...` CSV and returns the `schema` channels in schema order.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &[String]) -> Result<SensorSeries> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

/// Like [`ingest_csv`], but every non-time column is loaded in file order.
pub fn ingest_csv_all(path: impl AsRef<Path>) -> Result<SensorSeries> {
    let bytes = std::fs::read(path.as_ref())?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let schema: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .filter(|h| h != "t")
        .collect();
    read_csv(bytes.as_slice(), &schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &[String]) -> Result<SensorSeries> {
    if schema.is_empty() {
        return Err(Error::EmptyChannelSet);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col_of = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let t_col = col_of("t")?;
    let cols: Vec<usize> = schema.iter().map(|s| col_of(s)).collect::<Result<_>>()?;

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                found: rec.len(),
                expected: header.len(),
            });
        }
        let parse = |col: usize, name: &str| -> Result<f64> {
            let raw = rec[col].trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidValue {
                    row,
                    column: name.to_string(),
                    value: raw.to_string(),
                })
        };
        timestamps.push(parse(t_col, "t")?);
        values.push(
            cols.iter()
                .zip(schema)
                .map(|(&c, name)| parse(c, name))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    SensorSeries::new(timestamps, schema.to_vec(), values)
}

/// A subset of sensor channels that one model is trained on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureCase {
    pub id: String,
    /// Indices into the channel list the case was built from.
    pub indices: Vec<usize>,
    pub names: Vec<String>,
}

impl FeatureCase {
    /// Builds a case from channel indices into `channels`.
    pub fn from_indices(channels: &[String], indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyChannelSet);
        }
        for (i, &idx) in indices.iter().enumerate() {
            if idx >= channels.len() {
                return Err(Error::UnknownChannel(format!("#{idx}")));
            }
            if indices[..i].contains(&idx) {
                return Err(Error::InvalidParams(format!(
                    "duplicate channel `{}` in feature-case",
                    channels[idx]
                )));
            }
        }
        let labels = channel_labels(channels);
        let id = case_id(&labels, indices);
        Ok(Self {
            id,
            indices: indices.to_vec(),
            names: indices.iter().map(|&i| channels[i].clone()).collect(),
        })
    }

    /// Resolves a case id such as `SP` (one label letter per channel) or a
    /// `+`-joined list of channel names or labels.
    pub fn parse(id: &str, channels: &[String]) -> Result<Self> {
        let labels = channel_labels(channels);
        let lookup = |tok: &str| -> Result<usize> {
            labels
                .iter()
                .position(|l| l == tok)
                .or_else(|| channels.iter().position(|c| c == tok))
                .ok_or_else(|| Error::UnknownChannel(tok.to_string()))
        };
        let indices: Vec<usize> = if id.contains('+') {
            id.split('+').map(|t| lookup(t.trim())).collect::<Result<_>>()?
        } else if labels.iter().all(|l| l.chars().count() == 1) {
            match lookup(id) {
                Ok(i) => vec![i],
                Err(_) => id
                    .chars()
                    .map(|c| lookup(&c.to_string()))
                    .collect::<Result<_>>()?,
            }
        } else {
            vec![lookup(id)?]
        };
        Self::from_indices(channels, &indices)
    }
}

/// Short per-channel labels: upper-cased initials when those are unique,
/// otherwise the full channel names.
pub fn channel_labels(channels: &[String]) -> Vec<String> {
    let initials: Vec<String> = channels
        .iter()
        .map(|c| c.chars().next().map(|ch| ch.to_uppercase().to_string()).unwrap_or_default())
        .collect();
    let unique = initials
        .iter()
        .enumerate()
        .all(|(i, a)| !a.is_empty() && !initials[..i].contains(a));
    if unique {
        initials
    } else {
        channels.to_vec()
    }
}

fn case_id(labels: &[String], indices: &[usize]) -> String {
    let parts: Vec<&str> = indices.iter().map(|&i| labels[i].as_str()).collect();
    if parts.iter().all(|p| p.chars().count() == 1) {
        parts.concat()
    } else {
        parts.join("+")
    }
}

/// Returns a series restricted to the case's channels, in case order.
pub fn select_feature(series: &SensorSeries, case: &FeatureCase) -> Result<SensorSeries> {
    let cols: Vec<usize> = case
        .names
        .iter()
        .map(|n| series.channel_index(n).ok_or_else(|| Error::UnknownChannel(n.clone())))
        .collect::<Result<_>>()?;
    let values = series
        .values
        .iter()
        .map(|r| cols.iter().map(|&c| r[c]).collect())
        .collect();
    Ok(SensorSeries {
        timestamps: series.timestamps.clone(),
        channels: case.names.clone(),
        values,
    })
}

/// Every non-empty channel subset: larger subsets first, then lexicographic
/// by channel index tuple.
pub fn enumerate_cases(channels: &[String]) -> Result<Vec<FeatureCase>> {
    let s = channels.len();
    if s == 0 {
        return Err(Error::EmptyChannelSet);
    }
    if s > 16 {
        return Err(Error::TooManyChannels(s));
    }
    let mut out = Vec::with_capacity((1usize << s) - 1);
    for size in (1..=s).rev() {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            out.push(FeatureCase::from_indices(channels, &combo)?);
            // next combination in lexicographic order
            let mut i = size;
            while i > 0 && combo[i - 1] == s - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// Per-channel affine normalization `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// z-score fit; constant channels keep unit scale.
    pub fn fit(series: &SensorSeries) -> Self {
        let d = series.channels().len();
        let n = series.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in series.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in series.rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * (1.0 + sd) && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            mean: indices.iter().map(|&i| self.mean[i]).collect(),
            scale: indices.iter().map(|&i| self.scale[i]).collect(),
        }
    }
}

/// Normalized states stacked with their time derivatives.
///
/// Each tick holds `(order + 1)` blocks of `dim` values; block `l` is the
/// `l`-th derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedSeries {
    pub dt: f64,
    pub order: usize,
    pub dim: usize,
    pub states: Vec<Vec<f64>>,
    pub scaler: Scaler,
}

impl GeneralizedSeries {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.dim * (self.order + 1)
    }

    pub fn block(&self, k: usize, l: usize) -> &[f64] {
        &self.states[k][l * self.dim..(l + 1) * self.dim]
    }

    /// All ticks' values of derivative order `l`.
    pub fn block_points(&self, l: usize) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.block(k, l).to_vec()).collect()
    }
}

/// Builds generalized states of order `order`.
///
/// Without a scaler, one is fitted on `series` (training); otherwise the given
/// one is applied (testing). Derivatives are iterated backward differences of
/// the normalized signal, zero at tick 0.
pub fn derive_generalized(
    series: &SensorSeries,
    order: usize,
    scaler: Option<&Scaler>,
) -> Result<GeneralizedSeries> {
    let k = series.len();
    if k < order + 1 || k == 0 {
        return Err(Error::SeriesTooShort {
            len: k,
            needed: order + 1,
        });
    }
    let dim = series.channels().len();
    let scaler = match scaler {
        Some(s) if s.dim() != dim => {
            return Err(Error::DimensionMismatch {
                expected: s.dim(),
                found: dim,
            })
        }
        Some(s) => s.clone(),
        None => Scaler::fit(series),
    };
    let dt = series.dt();
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::with_capacity(order + 1);
    blocks.push(series.rows().iter().map(|r| scaler.apply(r)).collect());
    for l in 1..=order {
        let prev = &blocks[l - 1];
        let mut cur = vec![vec![0.0; dim]; k];
        for t in 1..k {
            for c in 0..dim {
                cur[t][c] = (prev[t][c] - prev[t - 1][c]) / dt;
            }
        }
        blocks.push(cur);
    }
    let states = (0..k)
        .map(|t| blocks.iter().flat_map(|b| b[t].iter().copied()).collect())
        .collect();
    Ok(GeneralizedSeries {
        dt,
        order,
        dim,
        states,
        scaler,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn svp() -> Vec<String> {
        names(&["steer", "vel", "power"])
    }

    fn series_1d(vals: &[f64], dt: f64) -> SensorSeries {
        SensorSeries::new(
            (0..vals.len()).map(|i| i as f64 * dt).collect(),
            names(&["x"]),
            vals.iter().map(|&v| vec![v]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn reads_three_rows() {
        let csv = "t,steer,vel,power\n0.0,0.1,2.0,100\n0.1,0.2,2.0,101\n0.2,0.1,2.1,99\n";
        let s = read_csv(csv.as_bytes(), &svp()).unwrap();
        assert_eq!(s.len(), 3);
        assert!((s.dt() - 0.1).abs() < 1e-12);
        assert_eq!(s.row(2), &[0.1, 2.1, 99.0]);
    }

    #[test]
    fn schema_order_wins_over_file_order() {
        let csv = "power,t,steer,vel\n5,0,1,2\n6,1,1,2\n";
        let s = read_csv(csv.as_bytes(), &svp()).unwrap();
        assert_eq!(s.row(1), &[1.0, 2.0, 6.0]);
    }

    #[test]
    fn missing_column() {
        let csv = "t,steer,vel\n0,1,2\n";
        let err = read_csv(csv.as_bytes(), &svp()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "power"));
    }

    #[test]
    fn non_monotonic_time() {
        let csv = "t,steer,vel,power\n0.0,0,0,0\n0.2,0,0,0\n0.1,0,0,0\n";
        let err = read_csv(csv.as_bytes(), &svp()).unwrap_err();
        assert!(matches!(err, Error::NonMonotonicTime { row: 2 }));
    }

    #[test]
    fn ragged_row() {
        let csv = "t,steer,vel,power\n0.0,0,0,0\n0.1,0,0\n";
        let err = read_csv(csv.as_bytes(), &svp()).unwrap_err();
        assert!(matches!(err, Error::RaggedRow { row: 1, found: 3, expected: 4 }));
    }

    #[test]
    fn non_uniform_and_missing_values_rejected() {
        let csv = "t,steer,vel,power\n0.0,0,0,0\n0.1,0,0,0\n0.3,0,0,0\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &svp()),
            Err(Error::NonUniformSampling { .. })
        ));
        let csv = "t,steer,vel,power\n0.0,0,,0\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &svp()),
            Err(Error::InvalidValue { .. })
        ));
    }

    #[test]
    fn ingest_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "t,steer,vel,power\n0.0,0.1,2.0,100\n0.1,0.2,2.0,101\n").unwrap();
        let s = ingest_csv(&p, &svp()).unwrap();
        assert_eq!(s.channels(), svp().as_slice());
        let all = ingest_csv_all(&p).unwrap();
        assert_eq!(all, s);
    }

    #[test]
    fn select_sp() {
        let s = SensorSeries::new(
            vec![0.0, 1.0],
            svp(),
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
        )
        .unwrap();
        let sp = FeatureCase::parse("SP", s.channels()).unwrap();
        let out = select_feature(&s, &sp).unwrap();
        assert_eq!(out.channels(), names(&["steer", "power"]).as_slice());
        assert_eq!(out.rows(), &[vec![1.0, 3.0], vec![4.0, 6.0]]);
        assert_eq!(out.timestamps(), s.timestamps());

        let all = FeatureCase::parse("SVP", s.channels()).unwrap();
        assert_eq!(select_feature(&s, &all).unwrap(), s);
    }

    #[test]
    fn select_unknown_channel() {
        let s = SensorSeries::new(vec![0.0], svp(), vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let case = FeatureCase {
            id: "X".into(),
            indices: vec![0],
            names: names(&["X"]),
        };
        assert!(matches!(select_feature(&s, &case), Err(Error::UnknownChannel(c)) if c == "X"));
        assert!(matches!(
            FeatureCase::parse("X", s.channels()),
            Err(Error::UnknownChannel(_))
        ));
    }

    #[test]
    fn seven_cases_for_three_channels() {
        let ids: Vec<String> = enumerate_cases(&svp()).unwrap().into_iter().map(|c| c.id).collect();
        assert_eq!(ids, ["SVP", "SV", "SP", "VP", "S", "V", "P"]);
        assert_eq!(enumerate_cases(&names(&["steer"])).unwrap().len(), 1);
        assert!(matches!(enumerate_cases(&[]), Err(Error::EmptyChannelSet)));
    }

    #[test]
    fn labels_fall_back_to_names_on_collision() {
        let ch = names(&["speed", "steer"]);
        assert_eq!(channel_labels(&ch), ch);
        let c = FeatureCase::parse("speed+steer", &ch).unwrap();
        assert_eq!(c.id, "speed+steer");
        assert_eq!(c.indices, vec![0, 1]);
    }

    #[test]
    fn constant_channel_has_zero_derivative() {
        let s = series_1d(&[5.0, 5.0, 5.0], 1.0);
        let g = derive_generalized(&s, 1, Some(&Scaler::identity(1))).unwrap();
        let d: Vec<f64> = (0..3).map(|k| g.block(k, 1)[0]).collect();
        assert_eq!(d, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn ramp_derivative() {
        let s = series_1d(&[0.0, 2.0, 4.0], 1.0);
        let g = derive_generalized(&s, 1, Some(&Scaler::identity(1))).unwrap();
        let d: Vec<f64> = (0..3).map(|k| g.block(k, 1)[0]).collect();
        assert_eq!(d, vec![0.0, 2.0, 2.0]);
    }

    #[test]
    fn order_zero_is_normalized_measurement() {
        let s = series_1d(&[1.0, 3.0, 5.0, 7.0], 0.5);
        let g = derive_generalized(&s, 0, None).unwrap();
        assert_eq!(g.state_dim(), 1);
        let sc = &g.scaler;
        for k in 0..4 {
            assert!((g.states[k][0] - (s.row(k)[0] - sc.mean[0]) / sc.scale[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn too_short() {
        let s = series_1d(&[1.0, 2.0], 1.0);
        assert!(matches!(
            derive_generalized(&s, 2, None),
            Err(Error::SeriesTooShort { len: 2, needed: 3 })
        ));
    }

    #[test]
    fn fitted_training_data_is_standardized() {
        let vals: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin() * 40.0 + 7.0).collect();
        let g = derive_generalized(&series_1d(&vals, 0.1), 1, None).unwrap();
        let x: Vec<f64> = (0..g.len()).map(|k| g.block(k, 0)[0]).collect();
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        assert!(m.abs() < 1e-6);
        assert!((sd - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn linear_signal_has_constant_slope(a in -10.0f64..10.0, b in -5.0f64..5.0, n in 3usize..40) {
            let vals: Vec<f64> = (0..n).map(|i| a + b * i as f64 * 0.25).collect();
            let g = derive_generalized(&series_1d(&vals, 0.25), 1, Some(&Scaler::identity(1))).unwrap();
            for k in 1..n {
                prop_assert!((g.block(k, 1)[0] - b).abs() < 1e-9 * (1.0 + b.abs() + a.abs()));
            }
        }

        #[test]
        fn select_commutes_with_derive(rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 4..30), order in 0usize..3) {
            let s = SensorSeries::new((0..rows.len()).map(|i| i as f64 * 0.1).collect(), svp(), rows).unwrap();
            let full = derive_generalized(&s, order, None).unwrap();
            let case = FeatureCase::parse("SP", s.channels()).unwrap();
            let sub = derive_generalized(&select_feature(&s, &case).unwrap(), order, Some(&full.scaler.select(&case.indices))).unwrap();
            for k in 0..s.len() {
                for l in 0..=order {
                    let fb = full.block(k, l);
                    let picked = [fb[0], fb[2]];
                    prop_assert_eq!(sub.block(k, l), &picked[..]);
                }
            }
        }

        #[test]
        fn case_count_is_two_to_the_s_minus_one(s in 1usize..9) {
            let ch: Vec<String> = (0..s).map(|i| format!("c{i}")).collect();
            let cases = enumerate_cases(&ch).unwrap();
            prop_assert_eq!(cases.len(), (1usize << s) - 1);
            let mut idx: Vec<Vec<usize>> = cases.iter().map(|c| c.indices.clone()).collect();
            idx.sort();
            idx.dedup();
            prop_assert_eq!(idx.len(), cases.len());
        }
    }
}
