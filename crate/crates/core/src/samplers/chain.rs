use nalgebra::{DMatrix, DVector};

use crate::draws::{DrawDiagnostics, DrawMatrix};
use crate::error::{Error, Result};

/// Length, burn-in, thinning and seed of one chain.
///
/// Retained draws are the 1-indexed iterations `burn_in + t·thin` for
/// `t = 1..=T`, with `T = (total_iters − burn_in) / thin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub total_iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            total_iters: 10_000,
            burn_in: 5_000,
            thin: 5,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn new(total_iters: usize, burn_in: usize, thin: usize, seed: u64) -> Result<Self> {
        let cfg = ChainConfig {
            total_iters,
            burn_in,
            thin,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        ChainConfig { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be >= 1".into()));
        }
        if self.burn_in >= self.total_iters {
            return Err(Error::InvalidArgument(format!(
                "burn-in ({}) must be smaller than the total iterations ({})",
                self.burn_in, self.total_iters
            )));
        }
        if self.retained() < 2 {
            return Err(Error::InsufficientDraws {
                needed: 2,
                got: self.retained(),
            });
        }
        Ok(())
    }

    /// Number of retained draws `T`.
    pub fn retained(&self) -> usize {
        self.total_iters.saturating_sub(self.burn_in) / self.thin.max(1)
    }

    /// Whether 1-indexed iteration `it` is kept.
    pub fn keeps(&self, it: usize) -> bool {
        it > self.burn_in
            && (it - self.burn_in).is_multiple_of(self.thin)
            && (it - self.burn_in) / self.thin <= self.retained()
    }
}

/// Keeps rows `burn_in + t·thin` (1-indexed) of a raw chain.
pub fn postprocess_chain(raw: &DrawMatrix, cfg: &ChainConfig) -> Result<DrawMatrix> {
    cfg.validate()?;
    if raw.n_draws() < cfg.total_iters {
        return Err(Error::InvalidArgument(format!(
            "raw chain has {} rows, configuration needs {}",
            raw.n_draws(),
            cfg.total_iters
        )));
    }
    let t = cfg.retained();
    let src = raw.matrix();
    let kept = DMatrix::from_fn(t, raw.dim(), |r, c| {
        src[(cfg.burn_in + (r + 1) * cfg.thin - 1, c)]
    });
    DrawMatrix::new(kept, raw.param_names().to_vec(), raw.diagnostics())
}

/// Collects the retained states of a running chain.
pub(crate) struct ChainRecorder {
    cfg: ChainConfig,
    rows: DMatrix<f64>,
    next: usize,
}

impl ChainRecorder {
    pub(crate) fn new(cfg: &ChainConfig, dim: usize) -> Self {
        ChainRecorder {
            cfg: *cfg,
            rows: DMatrix::zeros(cfg.retained(), dim),
            next: 0,
        }
    }

    pub(crate) fn offer(&mut self, it: usize, state: &DVector<f64>) {
        if self.cfg.keeps(it) {
            self.rows.row_mut(self.next).copy_from(&state.transpose());
            self.next += 1;
        }
    }

    pub(crate) fn finish(
        self,
        names: Vec<String>,
        diagnostics: DrawDiagnostics,
    ) -> Result<DrawMatrix> {
        debug_assert_eq!(self.next, self.rows.nrows());
        DrawMatrix::new(self.rows, names, diagnostics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::draws::indexed_names;

    fn counting_chain(n: usize) -> DrawMatrix {
        let m = DMatrix::from_fn(n, 2, |r, c| (r + 1) as f64 + 0.5 * c as f64);
        DrawMatrix::new(m, indexed_names("theta", 2), DrawDiagnostics::default()).unwrap()
    }

    #[test]
    fn default_protocol_keeps_one_thousand() {
        let cfg = ChainConfig::default();
        assert_eq!(cfg.retained(), 1000);
        let out = postprocess_chain(&counting_chain(10_000), &cfg).unwrap();
        assert_eq!(out.n_draws(), 1000);
        // row value equals its 1-indexed raw iteration
        for t in 1..=1000 {
            assert_eq!(out.matrix()[(t - 1, 0)], (5000 + 5 * t) as f64);
        }
    }

    #[test]
    fn no_burn_no_thin_is_identity() {
        let raw = counting_chain(37);
        let cfg = ChainConfig::new(37, 0, 1, 0).unwrap();
        assert_eq!(postprocess_chain(&raw, &cfg).unwrap(), raw);
    }

    #[test]
    fn invalid_configs() {
        assert!(ChainConfig::new(100, 100, 1, 0).is_err());
        assert!(ChainConfig::new(100, 10, 0, 0).is_err());
        assert!(ChainConfig::new(100, 99, 1, 0).is_err());
        let cfg = ChainConfig::new(100, 10, 3, 0).unwrap();
        assert!(postprocess_chain(&counting_chain(50), &cfg).is_err());
    }

    #[test]
    fn recorder_matches_postprocess() {
        let cfg = ChainConfig::new(103, 10, 7, 0).unwrap();
        let raw = counting_chain(103);
        let mut rec = ChainRecorder::new(&cfg, 2);
        for it in 1..=103 {
            rec.offer(it, &raw.row(it - 1));
        }
        let a = rec
            .finish(raw.param_names().to_vec(), DrawDiagnostics::default())
            .unwrap();
        assert_eq!(a, postprocess_chain(&raw, &cfg).unwrap());
    }
}
