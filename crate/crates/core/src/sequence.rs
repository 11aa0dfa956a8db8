//! Random-sequence sources that drive threshold decisions.
//!
//! Every sample is an integer signal level in `[-127, 128]`. Recorded chaos
//! traces are stored as offset-binary bytes (`sample = byte - 127`) or as one
//! integer per line. Synthetic stand-ins are generated from seeded PRNGs so
//! that every series is reproducible from `(parameters, seed)`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

pub const SAMPLE_MIN: i16 = -127;
pub const SAMPLE_MAX: i16 = 128;

/// Default duration of one raw sample, in picoseconds.
pub const DEFAULT_BASE_PERIOD_PS: f64 = 10.0;

/// Standard deviation of the uniform source, `sqrt((256^2 - 1) / 12)`.
pub const UNIFORM_SD: f64 = 73.900_270_635_499;

/// Standard deviation of synthetic chaos.
pub const SYNTHETIC_SIGMA: f64 = 40.0;

/// Default standard deviation of the normal source: the spread of the uniform
/// source scaled by the ratio of the tuned normal and uniform step sizes.
pub const DEFAULT_SIGMA: f64 = 32.57;

/// An immutable, non-empty series of signal levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    samples: Vec<i16>,
    base_period_ps: f64,
    label: String,
}

impl SampleSeries {
    pub fn new(samples: Vec<i16>, base_period_ps: f64, label: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(SAMPLE_MIN..=SAMPLE_MAX).contains(*s))
        {
            return Err(Error::SampleOutOfRange {
                index,
                value: value.into(),
            });
        }
        if !(base_period_ps.is_finite() && base_period_ps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "base period must be positive, got {base_period_ps}"
            )));
        }
        Ok(Self {
            samples,
            base_period_ps,
            label: label.into(),
        })
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn base_period_ps(&self) -> f64 {
        self.base_period_ps
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Decodes offset-binary bytes: each byte `u` becomes `u - 127`.
    pub fn from_offset_binary(bytes: &[u8], base_period_ps: f64) -> Result<Self> {
        let samples = bytes.iter().map(|&b| i16::from(b) - 127).collect();
        Self::new(samples, base_period_ps, "offset-binary")
    }

    pub fn to_offset_binary(&self) -> Vec<u8> {
        // range invariant guarantees 0..=255
        self.samples.iter().map(|&s| (s + 127) as u8).collect()
    }

    /// Parses one integer per line; blank lines are skipped.
    pub fn from_text(text: &str, base_period_ps: f64) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let value: i64 = line.parse().map_err(|_| Error::Parse {
                line: i + 1,
                text: line.to_string(),
            })?;
            if !(i64::from(SAMPLE_MIN)..=i64::from(SAMPLE_MAX)).contains(&value) {
                return Err(Error::SampleOutOfRange {
                    index: samples.len(),
                    value,
                });
            }
            samples.push(value as i16);
        }
        Self::new(samples, base_period_ps, "text")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 4);
        for s in &self.samples {
            let _ = writeln!(out, "{s}");
        }
        out
    }

    fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Reads a chaos trace from disk. `.txt` files hold one integer per line;
/// anything else is treated as raw offset-binary bytes.
pub fn load_chaos_file(path: &Path, base_period_ps: f64) -> Result<SampleSeries> {
    let bytes = std::fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let is_text = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("txt"));
    let series = if is_text {
        let text = String::from_utf8_lossy(&bytes);
        SampleSeries::from_text(&text, base_period_ps)?
    } else {
        SampleSeries::from_offset_binary(&bytes, base_period_ps)?
    };
    Ok(series.with_label(format!("file:{}", path.display())))
}

/// Writes a series using the format implied by the file extension.
pub fn save_series(series: &SampleSeries, path: &Path) -> std::io::Result<()> {
    let is_text = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("txt"));
    if is_text {
        std::fs::write(path, series.to_text())
    } else {
        std::fs::write(path, series.to_offset_binary())
    }
}

fn clamp_round(v: f64) -> i16 {
    v.round()
        .clamp(f64::from(SAMPLE_MIN), f64::from(SAMPLE_MAX)) as i16
}

/// Lag-differenced white noise `x_t = s * (w_t - w_{t-lag})`, rounded and
/// clamped. The autocorrelation is -0.5 at `lag` and zero at every other
/// non-zero lag, which mimics the negative-correlation dip of a laser trace.
pub fn gen_synthetic_chaos(length: usize, lag: usize, seed: u64) -> Result<SampleSeries> {
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be positive".into()));
    }
    if length <= lag {
        return Err(Error::InvalidArgument(format!(
            "length {length} must exceed lag {lag}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..length + lag)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    // Var(w_t - w_{t-lag}) = 2
    let scale = SYNTHETIC_SIGMA / std::f64::consts::SQRT_2;
    let samples = (0..length)
        .map(|t| clamp_round(scale * (white[t + lag] - white[t])))
        .collect();
    SampleSeries::new(samples, DEFAULT_BASE_PERIOD_PS, format!("synthetic:{lag}"))
}

/// Uniformly random permutation of the series (Fisher-Yates).
pub fn shuffle_surrogate(series: &SampleSeries, seed: u64) -> SampleSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = series.samples.clone();
    samples.shuffle(&mut rng);
    SampleSeries {
        samples,
        base_period_ps: series.base_period_ps,
        label: format!("surrogate:{}", series.label),
    }
}

pub fn gen_uniform(length: usize, seed: u64) -> Result<SampleSeries> {
    let mut stream = PrngStream::uniform(seed);
    let samples = (0..length).map(|_| stream.next_sample()).collect();
    SampleSeries::new(samples, DEFAULT_BASE_PERIOD_PS, "uniform")
}

pub fn gen_normal(length: usize, sigma: f64, seed: u64) -> Result<SampleSeries> {
    let mut stream = PrngStream::normal(sigma, seed)?;
    let samples = (0..length).map(|_| stream.next_sample()).collect();
    SampleSeries::new(samples, DEFAULT_BASE_PERIOD_PS, format!("normal:{sigma}"))
}

/// Sample autocorrelation at lags `1..=max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrelationProfile {
    pub lags: Vec<usize>,
    pub rho: Vec<f64>,
}

impl AutocorrelationProfile {
    /// Lag with the most negative coefficient.
    pub fn argmin(&self) -> Option<usize> {
        self.lags
            .iter()
            .zip(&self.rho)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&lag, _)| lag)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,rho\n");
        for (lag, rho) in self.lags.iter().zip(&self.rho) {
            let _ = writeln!(out, "{lag},{rho}");
        }
        out
    }
}

pub fn autocorrelation(series: &SampleSeries, max_lag: usize) -> Result<AutocorrelationProfile> {
    let x = series.samples();
    let n = x.len();
    if n <= max_lag + 1 {
        return Err(Error::InvalidArgument(format!(
            "series length {n} must exceed max_lag + 1 = {}",
            max_lag + 1
        )));
    }
    let mean = x.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
    let centred: Vec<f64> = x.iter().map(|&v| f64::from(v) - mean).collect();
    let denom: f64 = centred.iter().map(|d| d * d).sum();
    if denom <= 0.0 {
        return Err(Error::DegenerateSeries);
    }
    let rho = (1..=max_lag)
        .map(|k| {
            centred[..n - k]
                .iter()
                .zip(&centred[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect();
    Ok(AutocorrelationProfile {
        lags: (1..=max_lag).collect(),
        rho,
    })
}

/// Anything that yields one signal level per decision.
pub trait SampleSource {
    fn next_sample(&mut self) -> i16;
}

/// Reads every `stride`-th sample of a shared series, wrapping at the end.
#[derive(Debug, Clone)]
pub struct StridedCursor {
    series: Arc<SampleSeries>,
    stride: usize,
    position: usize,
}

impl StridedCursor {
    pub fn new(series: Arc<SampleSeries>, stride: usize, start: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        let position = start % series.len();
        Ok(Self {
            series,
            stride,
            position,
        })
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn stride(&self) -> usize {
        self.stride
    }
}

impl SampleSource for StridedCursor {
    fn next_sample(&mut self) -> i16 {
        let value = self.series.samples[self.position];
        self.position = (self.position + self.stride) % self.series.len();
        value
    }
}

/// Unbounded pseudorandom streams, one value per draw.
#[derive(Debug, Clone)]
pub enum PrngStream {
    Uniform(ChaCha8Rng),
    Normal(ChaCha8Rng, Normal<f64>),
}

impl PrngStream {
    pub fn uniform(seed: u64) -> Self {
        PrngStream::Uniform(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn normal(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let dist = Normal::new(0.0, sigma)
            .map_err(|e| Error::InvalidArgument(format!("normal distribution: {e}")))?;
        Ok(PrngStream::Normal(ChaCha8Rng::seed_from_u64(seed), dist))
    }

    pub(crate) fn from_rng_uniform(rng: ChaCha8Rng) -> Self {
        PrngStream::Uniform(rng)
    }

    pub(crate) fn from_rng_normal(rng: ChaCha8Rng, sigma: f64) -> Result<Self> {
        let PrngStream::Normal(_, dist) = Self::normal(sigma, 0)? else {
            unreachable!()
        };
        Ok(PrngStream::Normal(rng, dist))
    }
}

impl SampleSource for PrngStream {
    fn next_sample(&mut self) -> i16 {
        match self {
            PrngStream::Uniform(rng) => rng.random_range(SAMPLE_MIN..=SAMPLE_MAX),
            PrngStream::Normal(rng, dist) => clamp_round(dist.sample(rng)),
        }
    }
}

/// A source that repeats one value forever.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSource(pub i16);

impl SampleSource for ConstantSource {
    fn next_sample(&mut self) -> i16 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pbrl::PbrlParams;

    /// Independent brute-force estimator used as the oracle for the
    /// generator tests: Pearson correlation of the pairs (x_t, x_{t+k}).
    fn pearson_lag(x: &[i16], k: usize) -> f64 {
        let a: Vec<f64> = x[..x.len() - k].iter().map(|&v| v.into()).collect();
        let b: Vec<f64> = x[k..].iter().map(|&v| v.into()).collect();
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(&b).map(|(p, q)| (p - ma) * (q - mb)).sum();
        let va: f64 = a.iter().map(|p| (p - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|q| (q - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn default_sigma_follows_step_ratio() {
        // sd of 256 consecutive integers is sqrt((256^2 - 1) / 12)
        let uniform_sd = (65535.0f64 / 12.0).sqrt();
        assert!((uniform_sd - UNIFORM_SD).abs() < 1e-9);
        let sigma = uniform_sd * 2.151 / 4.881;
        assert!((sigma - DEFAULT_SIGMA).abs() < 5e-3, "{sigma}");
        assert!((PbrlParams::NORMAL.reference_spread() - sigma).abs() < 1e-9);
        let s = gen_uniform(1_000_000, 8).unwrap();
        let x: Vec<f64> = s.samples().iter().map(|&v| v.into()).collect();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
        assert!((sd - uniform_sd).abs() < 0.2, "{sd}");
    }

    #[test]
    fn offset_binary_bounds() {
        let s = SampleSeries::from_offset_binary(&[0x00, 0xFF], 10.0).unwrap();
        assert_eq!(s.samples(), &[-127, 128]);
        let mid = SampleSeries::from_offset_binary(&[127; 4], 10.0).unwrap();
        assert_eq!(mid.samples(), &[0, 0, 0, 0]);
        assert_eq!(mid.len(), 4);
    }

    #[test]
    fn empty_stream_is_rejected() {
        let err = SampleSeries::from_offset_binary(&[], 10.0).unwrap_err();
        assert_eq!(err.to_string(), "empty series");
        assert!(SampleSeries::from_text("\n\n", 10.0).is_err());
    }

    #[test]
    fn text_format_validates_range() {
        let s = SampleSeries::from_text("1\n-127\n\n128\n", 10.0).unwrap();
        assert_eq!(s.samples(), &[1, -127, 128]);
        assert!(matches!(
            SampleSeries::from_text("129\n", 10.0),
            Err(Error::SampleOutOfRange { value: 129, .. })
        ));
        assert!(matches!(
            SampleSeries::from_text("1\nabc\n", 10.0),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn synthetic_chaos_is_deterministic() {
        let a = gen_synthetic_chaos(5000, 5, 11).unwrap();
        let b = gen_synthetic_chaos(5000, 5, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_synthetic_chaos(5000, 5, 12).unwrap());
    }

    #[test]
    fn synthetic_chaos_requires_length_above_lag() {
        assert!(gen_synthetic_chaos(5, 5, 0).is_err());
        assert!(gen_synthetic_chaos(4, 5, 0).is_err());
        assert!(gen_synthetic_chaos(6, 5, 0).is_ok());
    }

    #[test]
    fn synthetic_chaos_correlation_dip() {
        let s = gen_synthetic_chaos(1_000_000, 5, 3).unwrap();
        let rho5 = pearson_lag(s.samples(), 5);
        assert!((rho5 + 0.5).abs() < 0.02, "rho(5) = {rho5}");
        for k in 1..5 {
            let r = pearson_lag(s.samples(), k);
            assert!(r.abs() < 0.02, "rho({k}) = {r}");
        }
        let sd = {
            let x: Vec<f64> = s.samples().iter().map(|&v| v.into()).collect();
            let m = x.iter().sum::<f64>() / x.len() as f64;
            (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
        };
        assert!((sd - 40.0).abs() < 1.0, "sd = {sd}");
        let profile = autocorrelation(&s, 10).unwrap();
        assert_eq!(profile.argmin(), Some(5));
    }

    #[test]
    fn surrogate_preserves_histogram() {
        let s = gen_synthetic_chaos(20_000, 5, 9).unwrap();
        let sur = shuffle_surrogate(&s, 1);
        let mut a = s.samples().to_vec();
        let mut b = sur.samples().to_vec();
        assert_ne!(a, b);
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn surrogate_destroys_correlation() {
        let s = gen_synthetic_chaos(100_000, 5, 21).unwrap();
        let sur = shuffle_surrogate(&s, 22);
        for k in 1..=10 {
            let r = pearson_lag(sur.samples(), k);
            assert!(r.abs() < 0.05, "rho({k}) = {r}");
        }
    }

    #[test]
    fn surrogate_of_singleton_is_identity() {
        let s = SampleSeries::new(vec![42], 10.0, "one").unwrap();
        assert_eq!(shuffle_surrogate(&s, 5).samples(), &[42]);
    }

    #[test]
    fn uniform_moments() {
        let s = gen_uniform(1_000_000, 4).unwrap();
        let mean = s.samples().iter().map(|&v| f64::from(v)).sum::<f64>() / 1e6;
        assert!((mean - 0.5).abs() < 0.5, "mean = {mean}");
        assert!(s.samples().iter().all(|v| (-127..=128).contains(v)));
        assert!(s.samples().contains(&-127) && s.samples().contains(&128));
    }

    #[test]
    fn normal_moments() {
        let s = gen_normal(1_000_000, 40.0, 4).unwrap();
        let mean = s.samples().iter().map(|&v| f64::from(v)).sum::<f64>() / 1e6;
        assert!(mean.abs() < 0.5, "mean = {mean}");
        let r1 = pearson_lag(s.samples(), 1);
        assert!(r1.abs() < 0.01, "rho(1) = {r1}");
    }

    #[test]
    fn normal_rejects_bad_sigma() {
        assert!(gen_normal(10, 0.0, 1).is_err());
        assert!(gen_normal(10, -3.0, 1).is_err());
    }

    #[test]
    fn alternating_series_is_anticorrelated() {
        let s = SampleSeries::new(
            (0..100).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect(),
            10.0,
            "alt",
        )
        .unwrap();
        let p = autocorrelation(&s, 2).unwrap();
        // ρ(1) = -(n-1)/n for a zero-mean ±1 series normalised by the full sum
        assert!((p.rho[0] + 0.99).abs() < 1e-12);
    }

    #[test]
    fn autocorrelation_of_long_alternating_series_tends_to_minus_one() {
        let s = SampleSeries::new(
            (0..1_000_000)
                .map(|i| if i % 2 == 0 { 1 } else { -1 })
                .collect(),
            10.0,
            "alt",
        )
        .unwrap();
        let p = autocorrelation(&s, 1).unwrap();
        assert!((p.rho[0] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let s = SampleSeries::new(vec![7; 50], 10.0, "c").unwrap();
        assert!(matches!(
            autocorrelation(&s, 3),
            Err(Error::DegenerateSeries)
        ));
    }

    #[test]
    fn autocorrelation_needs_enough_samples() {
        let s = SampleSeries::new(vec![1, 2, 3], 10.0, "short").unwrap();
        assert!(autocorrelation(&s, 2).is_err());
        assert!(autocorrelation(&s, 1).is_ok());
    }

    #[test]
    fn strided_cursor_wraps() {
        let s = Arc::new(SampleSeries::new(vec![0, 1, 2, 3, 4], 10.0, "ramp").unwrap());
        let mut c = StridedCursor::new(s.clone(), 2, 0).unwrap();
        let got: Vec<i16> = (0..6).map(|_| c.next_sample()).collect();
        assert_eq!(got, vec![0, 2, 4, 1, 3, 0]);
        let mut c = StridedCursor::new(s.clone(), 3, 7).unwrap();
        assert_eq!(c.position(), 2);
        assert_eq!(c.next_sample(), 2);
        assert_eq!(c.position(), 0);
        assert!(StridedCursor::new(s, 0, 0).is_err());
    }

    #[test]
    fn cursor_at_matching_stride_reads_anticorrelated_pairs() {
        let s = Arc::new(gen_synthetic_chaos(1_000_000, 5, 8).unwrap());
        let mut c = StridedCursor::new(s, 5, 0).unwrap();
        let reads: Vec<i16> = (0..199_999).map(|_| c.next_sample()).collect();
        let r = pearson_lag(&reads, 1);
        assert!((r + 0.5).abs() < 0.02, "consecutive-read correlation {r}");
    }

    #[test]
    fn autocorr_csv_layout() {
        let p = AutocorrelationProfile {
            lags: vec![1, 2],
            rho: vec![-0.5, 0.25],
        };
        assert_eq!(p.to_csv(), "lag,rho\n1,-0.5\n2,0.25\n");
    }

    #[test]
    fn load_and_save_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = gen_uniform(300, 2).unwrap();
        let bin = dir.path().join("trace.bin");
        let txt = dir.path().join("trace.txt");
        save_series(&s, &bin).unwrap();
        save_series(&s, &txt).unwrap();
        assert_eq!(load_chaos_file(&bin, 10.0).unwrap().samples(), s.samples());
        assert_eq!(load_chaos_file(&txt, 10.0).unwrap().samples(), s.samples());
        assert!(matches!(
            load_chaos_file(&dir.path().join("missing.bin"), 10.0),
            Err(Error::Read { .. })
        ));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn offset_binary_round_trip(bytes in proptest::collection::vec(any::<u8>(), 1..512)) {
                let s = SampleSeries::from_offset_binary(&bytes, 10.0).unwrap();
                prop_assert!(s.samples().iter().all(|v| (SAMPLE_MIN..=SAMPLE_MAX).contains(v)));
                prop_assert_eq!(s.to_offset_binary(), bytes);
            }

            #[test]
            fn generators_respect_range(seed in any::<u64>(), lag in 1usize..12) {
                let c = gen_synthetic_chaos(400, lag, seed).unwrap();
                let u = gen_uniform(400, seed).unwrap();
                let n = gen_normal(400, 90.0, seed).unwrap();
                for s in [&c, &u, &n, &shuffle_surrogate(&c, seed)] {
                    prop_assert!(s.samples().iter().all(|v| (SAMPLE_MIN..=SAMPLE_MAX).contains(v)));
                }
            }
        }
    }
}
