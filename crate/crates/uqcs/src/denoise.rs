//! Singular-spectrum renormalisation of sampled auto-correlation series.
//!
//! The complex series is embedded in a Hankel trajectory matrix, truncated to
//! its leading singular subspace and averaged back along anti-diagonals.
//! Uncorrelated gate/shot noise spreads over all singular directions while a
//! sum of `r` complex exponentials occupies exactly `r` of them, so the
//! truncation strips noise without dephasing spectral lines. The SVD runs on
//! the complex matrix directly; splitting real and imaginary parts would
//! double the model rank.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UqcsError};
use crate::linalg;
use crate::spectroscopy::AutocorrSeries;

/// Truncation rank selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rank {
    /// Keep components whose singular value exceeds 3x the median.
    #[default]
    Auto,
    Fixed(usize),
}

impl Serialize for Rank {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Rank::Auto => s.serialize_str("auto"),
            Rank::Fixed(r) => s.serialize_u64(*r as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Rank {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Num(u64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) if t == "auto" => Ok(Rank::Auto),
            Raw::Text(t) => Err(D::Error::custom(format!(
                "rank must be \"auto\" or a positive integer, got {t:?}"
            ))),
            Raw::Num(0) => Err(D::Error::custom("rank must be >= 1")),
            Raw::Num(n) => Ok(Rank::Fixed(n as usize)),
        }
    }
}

/// SSA settings; defaults follow the maximal-separability heuristic
/// `L = N/2` with automatic rank selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SSAConfig {
    /// Embedding window `L`; `N/2` when absent.
    #[serde(default)]
    pub embed_length: Option<usize>,
    #[serde(default)]
    pub rank: Rank,
    /// Rescale so the denoised series has `C(0) = 1` (identity-operator runs
    /// of Hermitian systems only; the scalar is reported for reuse on
    /// companion observable series).
    #[serde(default)]
    pub renormalize: bool,
}

impl Default for SSAConfig {
    fn default() -> Self {
        SSAConfig {
            embed_length: None,
            rank: Rank::Auto,
            renormalize: false,
        }
    }
}

/// What one denoising pass actually did.
#[derive(Debug, Clone, Serialize)]
pub struct SsaReport {
    pub embed_length: usize,
    pub rank_used: usize,
    /// Renormalisation factor applied (1.0 when disabled).
    pub scale: f64,
}

/// Hankel embed, SVD-truncate, diagonally average; optionally renormalise
/// the zero-lag value to 1.
pub fn ssa_denoise(series: &AutocorrSeries, cfg: &SSAConfig) -> Result<AutocorrSeries> {
    ssa_denoise_with_report(series, cfg).map(|(s, _)| s)
}

/// As [`ssa_denoise`], also reporting the chosen rank and the scalar
/// renormalisation factor so callers can apply the same factor to other
/// series from the same run.
pub fn ssa_denoise_with_report(
    series: &AutocorrSeries,
    cfg: &SSAConfig,
) -> Result<(AutocorrSeries, SsaReport)> {
    let n = series.values.len();
    if n < 8 {
        return Err(UqcsError::InvalidParameter(format!(
            "SSA needs a series of at least 8 points, got {n}"
        )));
    }
    let l = cfg.embed_length.unwrap_or(n / 2);
    if l < 2 || l > n - 1 {
        return Err(UqcsError::InvalidParameter(format!(
            "embed length {l} outside [2, {}]",
            n - 1
        )));
    }
    let k = n - l + 1;
    let max_rank = l.min(k);

    let trajectory = Array2::from_shape_fn((l, k), |(i, j)| series.values[i + j]);
    let (u, s, v) = linalg::svd(&trajectory)?;

    let rank = match cfg.rank {
        Rank::Fixed(r) => {
            if r == 0 || r > max_rank {
                return Err(UqcsError::InvalidParameter(format!(
                    "rank {r} outside [1, {max_rank}]"
                )));
            }
            r
        }
        Rank::Auto => {
            let mut sorted: Vec<f64> = s.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = sorted[sorted.len() / 2];
            let r = s.iter().filter(|sv| **sv > 3.0 * median).count();
            r.clamp(1, max_rank)
        }
    };

    // Rank-r reconstruction and anti-diagonal averaging in one pass.
    let mut acc = vec![C64::new(0.0, 0.0); n];
    let mut cnt = vec![0usize; n];
    for i in 0..l {
        for j in 0..k {
            let mut x = C64::new(0.0, 0.0);
            for c in 0..rank {
                x += s[c] * u[[i, c]] * v[[j, c]].conj();
            }
            acc[i + j] += x;
            cnt[i + j] += 1;
        }
    }
    let mut values: Vec<C64> = acc
        .into_iter()
        .zip(cnt)
        .map(|(a, c)| a / C64::new(c as f64, 0.0))
        .collect();

    let mut scale = 1.0;
    if cfg.renormalize {
        let zero_idx = series.t.iter().position(|t| t.abs() < 1e-12);
        if let Some(i0) = zero_idx {
            let c0 = values[i0].re;
            if c0 > 0.25 {
                scale = 1.0 / c0;
                for v in values.iter_mut() {
                    *v *= scale;
                }
            }
        }
    }

    Ok((
        AutocorrSeries {
            t: series.t.clone(),
            values,
            observable: series.observable.clone(),
        },
        SsaReport {
            embed_length: l,
            rank_used: rank,
            scale,
        },
    ))
}

/// Apply a previously derived renormalisation factor to a companion series
/// (the same scalar that anchored the identity run).
pub fn apply_scale(series: &AutocorrSeries, scale: f64) -> AutocorrSeries {
    AutocorrSeries {
        t: series.t.clone(),
        values: series.values.iter().map(|v| v * scale).collect(),
        observable: series.observable.clone(),
    }
}
