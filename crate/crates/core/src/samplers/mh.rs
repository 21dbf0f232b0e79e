use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::chain::ChainRecorder;
use super::ChainConfig;
use crate::draws::{DrawDiagnostics, DrawMatrix};
use crate::error::{Error, Result};
use crate::glm::Posterior;
use crate::rng::{self, Stream};

/// Unnormalized log density on `R^d`; `−∞` marks points off the support.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &DVector<f64>) -> f64;
    /// Analytic gradient, when available. Enables mode-based preconditioning.
    fn gradient(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
}

impl LogDensity for Posterior<'_> {
    fn dim(&self) -> usize {
        self.layout().dim()
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        self.log_density_flat(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.gradient_flat(x)
            .ok()
            .filter(|g| g.iter().all(|v| v.is_finite()))
    }
}

/// Tuning of [`adaptive_mh_sampler`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhSettings {
    pub target_acceptance: f64,
    /// Start from the posterior mode with the inverse negative Hessian as the
    /// initial proposal shape (needs [`LogDensity::gradient`]).
    pub precondition: bool,
    /// Initial proposal covariance `σ² I` when no curvature is available.
    pub initial_variance: f64,
}

impl Default for MhSettings {
    fn default() -> Self {
        MhSettings {
            target_acceptance: 0.234,
            precondition: true,
            initial_variance: 0.01,
        }
    }
}

struct Mode {
    point: DVector<f64>,
    /// `(−∇²log π)⁻¹` at the mode, when negative definite there.
    covariance: Option<DMatrix<f64>>,
}

fn neg_hessian<L: LogDensity + ?Sized>(target: &L, x: &DVector<f64>) -> Option<DMatrix<f64>> {
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    for j in 0..d {
        let step = 1e-5 * x[j].abs().max(1.0);
        let mut up = x.clone();
        up[j] += step;
        let mut dn = x.clone();
        dn[j] -= step;
        let col = (target.gradient(&up)? - target.gradient(&dn)?) / (2.0 * step);
        h.set_column(j, &(-col));
    }
    Some((&h + h.transpose()) * 0.5)
}

/// Damped Newton ascent using the analytic gradient and a finite-difference Hessian.
fn find_mode<L: LogDensity + ?Sized>(target: &L, start: &DVector<f64>) -> Option<Mode> {
    let mut x = start.clone();
    let mut lp = target.log_density(&x);
    if !lp.is_finite() {
        return None;
    }
    for _ in 0..200 {
        let g = target.gradient(&x)?;
        let dir = match neg_hessian(target, &x).and_then(Cholesky::<f64, Dyn>::new) {
            Some(chol) => chol.solve(&g),
            None => &g / g.norm().max(1.0),
        };
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand = &x + &dir * alpha;
            let lc = target.log_density(&cand);
            if lc.is_finite() && lc >= lp {
                let gain = lc - lp;
                x = cand;
                lp = lc;
                moved = gain > 1e-12 || (dir.norm() * alpha) > 1e-10;
                break;
            }
            alpha *= 0.5;
        }
        if !moved || (dir.norm() * alpha) < 1e-9 {
            break;
        }
    }
    let covariance = neg_hessian(target, &x)
        .and_then(Cholesky::<f64, Dyn>::new)
        .map(|c| c.inverse());
    Some(Mode {
        point: x,
        covariance,
    })
}

fn regularized_cholesky(cov: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let d = cov.nrows();
    let jitter = 1e-10 * (cov.trace() / d as f64).max(1e-300);
    let reg = (cov + cov.transpose()) * 0.5 + DMatrix::identity(d, d) * jitter;
    Cholesky::<f64, Dyn>::new(reg).map(|c| c.l())
}

/// Running mean and covariance (Welford).
struct Moments {
    n: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Moments {
            n: 0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
        }
    }

    fn push(&mut self, x: &DVector<f64>) {
        self.n += 1;
        let delta = x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = x - &self.mean;
        self.m2.ger(1.0, &delta, &delta2, 1.0);
    }

    fn covariance(&self) -> DMatrix<f64> {
        &self.m2 / (self.n.max(2) - 1) as f64
    }
}

/// Adaptive random-walk Metropolis.
///
/// Proposals are `x + λ L z` with `L Lᵀ` the proposal shape. During burn-in
/// `log λ` follows a Robbins–Monro recursion toward the target acceptance rate
/// and the shape tracks the empirical covariance of the chain (scaled by
/// `2.38²/d`); both are frozen afterwards. With preconditioning enabled and a
/// gradient available the chain starts at the mode.
pub fn adaptive_mh_sampler<L: LogDensity + ?Sized>(
    target: &L,
    init: &DVector<f64>,
    names: Vec<String>,
    cfg: &ChainConfig,
    settings: &MhSettings,
) -> Result<DrawMatrix> {
    cfg.validate()?;
    let d = target.dim();
    if init.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "initial point has length {}, target has dimension {d}",
            init.len()
        )));
    }
    let mut lp = target.log_density(init);
    if !lp.is_finite() {
        return Err(Error::Numerical(
            "log density is not finite at the initial point".into(),
        ));
    }
    let mut x = init.clone();
    let base_scale = 2.38 / (d as f64).sqrt();
    let mut shape = DMatrix::identity(d, d) * settings.initial_variance.sqrt();
    let mut log_lambda = 0.0_f64;
    if settings.precondition {
        if let Some(mode) = find_mode(target, init) {
            let lm = target.log_density(&mode.point);
            if lm.is_finite() && lm >= lp {
                x = mode.point;
                lp = lm;
            }
            if let Some(l) = mode.covariance.as_ref().and_then(regularized_cholesky) {
                shape = l;
                log_lambda = base_scale.ln();
            }
        }
    }

    let mut rng = rng::seeded(cfg.seed, Stream::Chain);
    let mut rec = ChainRecorder::new(cfg, d);
    let mut moments = Moments::new(d);
    let collect_from = cfg.burn_in / 5;
    let min_for_shape = (20 * d).max(100);
    let mut accepted_after_burn = 0usize;
    let mut z = DVector::zeros(d);

    for it in 1..=cfg.total_iters {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let prop = &x + (&shape * &z) * log_lambda.exp();
        let lprop = target.log_density(&prop);
        let log_ratio = lprop - lp;
        let accept_prob = if log_ratio.is_nan() {
            0.0
        } else {
            log_ratio.min(0.0).exp()
        };
        let u: f64 = rng.gen();
        if u < accept_prob {
            x = prop;
            lp = lprop;
            if it > cfg.burn_in {
                accepted_after_burn += 1;
            }
        }
        if it <= cfg.burn_in {
            let gamma = (it as f64).powf(-0.6);
            log_lambda += gamma * (accept_prob - settings.target_acceptance);
            if it > collect_from {
                moments.push(&x);
                if moments.n >= min_for_shape && moments.n.is_multiple_of(100) {
                    if let Some(l) = regularized_cholesky(&moments.covariance()) {
                        // keep the overall step size continuous across shape updates
                        let old = (shape.norm_squared() / d as f64).sqrt();
                        let new = (l.norm_squared() / d as f64).sqrt();
                        if old > 0.0 && new > 0.0 {
                            log_lambda += (old / new).ln();
                        }
                        shape = l;
                    }
                }
            }
        }
        rec.offer(it, &x);
    }
    let rate = accepted_after_burn as f64 / (cfg.total_iters - cfg.burn_in) as f64;
    rec.finish(
        names,
        DrawDiagnostics {
            acceptance_rate: Some(rate),
            seed_used: cfg.seed,
        },
    )
}
