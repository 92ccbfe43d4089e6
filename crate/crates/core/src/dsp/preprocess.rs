use serde::{Deserialize, Serialize};

use super::{
    apply_iir, design_butterworth, emd_decompose, emd_remove_high_freq, median_filter,
    minmax_normalize, DspError, IirFilter, MedianConfig, SiftConfig,
};
use crate::csi::{select_subcarriers, SUBCARRIERS};
use crate::exec::Exec;
use crate::matrix::Matrix;

/// Knobs for the full denoising chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub median_radius: usize,
    pub filter_order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
    pub max_imfs: usize,
    pub sd_threshold: f64,
    pub max_sift_iters: usize,
    /// First IMF kept (1-based); `2` drops IMF 1 only.
    pub keep_from_k: usize,
    pub subcarriers_kept: usize,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            median_radius: 2,
            filter_order: 8,
            cutoff_hz: 10.0,
            sample_rate_hz: 100.0,
            max_imfs: 10,
            sd_threshold: 0.2,
            max_sift_iters: 50,
            keep_from_k: 2,
            subcarriers_kept: 49,
        }
    }
}

impl DspConfig {
    pub fn sift(&self) -> SiftConfig {
        SiftConfig {
            sd_threshold: self.sd_threshold,
            max_iters: self.max_sift_iters,
        }
    }
}

/// The per-subcarrier denoising chain with its filter designed once.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    cfg: DspConfig,
    median: MedianConfig,
    filter: IirFilter,
}

impl Preprocessor {
    pub fn new(cfg: DspConfig) -> Result<Self, DspError> {
        let median = MedianConfig::new(cfg.median_radius)?;
        let filter = design_butterworth(cfg.filter_order, cfg.cutoff_hz, cfg.sample_rate_hz)?;
        if cfg.keep_from_k == 0 {
            return Err(DspError::ImfIndex {
                k: 0,
                max: cfg.max_imfs + 1,
            });
        }
        if cfg.subcarriers_kept == 0 || cfg.subcarriers_kept > SUBCARRIERS {
            return Err(DspError::Design(format!(
                "subcarriers_kept must be in 1..={SUBCARRIERS}"
            )));
        }
        Ok(Self {
            cfg,
            median,
            filter,
        })
    }

    pub fn config(&self) -> &DspConfig {
        &self.cfg
    }

    pub fn filter(&self) -> &IirFilter {
        &self.filter
    }

    /// Denoises one amplitude series into `[0, 1]`.
    ///
    /// The low-pass runs on the series minus its first sample, which is added
    /// back afterwards; with unity DC gain this starts the filter in steady
    /// state instead of ringing up from zero.
    pub fn process_series(&self, x: &[f64]) -> Result<Vec<f64>, DspError> {
        let med = median_filter(x, self.median)?;
        let offset = med[0];
        let centred: Vec<f64> = med.iter().map(|v| v - offset).collect();
        let mut low = apply_iir(&self.filter, &centred)?;
        for v in &mut low {
            *v += offset;
        }
        let d = emd_decompose(&low, self.cfg.max_imfs, &self.cfg.sift())?;
        let keep = self.cfg.keep_from_k.min(d.imfs.len() + 1);
        let smooth = emd_remove_high_freq(&d, keep)?;
        Ok(minmax_normalize(&smooth)?.0)
    }

    /// `T x 52` amplitudes in, `T x subcarriers_kept` features in `[0, 1]` out.
    ///
    /// Columns are independent; only the retained ones are processed.
    pub fn process(&self, amplitudes: &Matrix<f64>, exec: Exec) -> Result<Matrix<f64>, DspError> {
        if amplitudes.rows() == 0 {
            return Err(DspError::EmptyInput);
        }
        let kept = select_subcarriers(amplitudes, self.cfg.subcarriers_kept)?;
        let columns: Vec<Vec<f64>> = (0..kept.cols()).map(|c| kept.column(c)).collect();
        let processed = exec.map(&columns, |col| self.process_series(col));
        let mut out = Matrix::zeros(kept.rows(), kept.cols());
        for (c, col) in processed.into_iter().enumerate() {
            out.set_column(c, &col?);
        }
        Ok(out)
    }
}
