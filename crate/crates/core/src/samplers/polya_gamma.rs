//! Exact Pólya-Gamma draws.
//!
//! `PG(1, c)` is sampled as `J*(1, |c|/2) / 4` with the alternating-series
//! accept/reject scheme: a proposal mixing a truncated inverse Gaussian (left
//! of the truncation point 0.64) with an exponential tail (right of it), then
//! acceptance decided by partial sums of the Jacobi density series. `PG(b, c)`
//! for integer `b` is the sum of `b` independent `PG(1, c)` draws.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const TRUNC: f64 = 0.64;
const TRUNC_RECIP: f64 = 1.0 / TRUNC;
const PI_SQ_OVER_8: f64 = PI * PI / 8.0;
const LN_HALF_PI: f64 = 0.451_582_705_289_454_9;

fn ln_std_normal_cdf(x: f64) -> f64 {
    (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
}

/// Coefficients `a_n(x)` of the alternating series for the `J*(1, 0)` density,
/// with the `n`-independent parts hoisted.
struct Series {
    x: f64,
    left: bool,
    log_base: f64,
    inv_x: f64,
}

impl Series {
    fn at(x: f64) -> Self {
        let left = x <= TRUNC;
        Series {
            x,
            left,
            log_base: if left {
                -1.5 * (LN_HALF_PI + x.ln())
            } else {
                0.0
            },
            inv_x: 1.0 / x,
        }
    }

    fn coef(&self, n: usize) -> f64 {
        let h = n as f64 + 0.5;
        let k = h * PI;
        if self.left {
            k * (self.log_base - 2.0 * h * h * self.inv_x).exp()
        } else {
            k * (-0.5 * k * k * self.x).exp()
        }
    }
}

/// `PG(1, c)` sampler with the per-`c` constants precomputed.
#[derive(Debug, Clone, Copy)]
pub struct PgOne {
    z: f64,
    rate: f64,
    tail_mass: f64,
}

impl PgOne {
    pub fn new(c: f64) -> Self {
        let z = 0.5 * c.abs();
        let rate = PI_SQ_OVER_8 + 0.5 * z * z;
        // mixture probability of the exponential tail, p / (p + q)
        let sqrt_recip = TRUNC_RECIP.sqrt();
        let b = sqrt_recip * (TRUNC * z - 1.0);
        let a = -sqrt_recip * (TRUNC * z + 1.0);
        let x0 = rate.ln() + rate * TRUNC;
        let xb = x0 - z + ln_std_normal_cdf(b);
        let xa = x0 + z + ln_std_normal_cdf(a);
        let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
        PgOne {
            z,
            rate,
            tail_mass: 1.0 / (1.0 + q_over_p),
        }
    }

    /// Inverse Gaussian `IG(1/z, 1)` truncated to `(0, TRUNC]`.
    fn truncated_inv_gauss<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z = self.z;
        if z < TRUNC_RECIP {
            // mean beyond the truncation point: propose from the z = 0 law, accept by tilting
            loop {
                let e1 = loop {
                    let e1: f64 = Exp1.sample(rng);
                    let e2: f64 = Exp1.sample(rng);
                    if e1 * e1 <= 2.0 * e2 / TRUNC {
                        break e1;
                    }
                };
                let root = 1.0 + e1 * TRUNC;
                let x = TRUNC / (root * root);
                let u: f64 = rng.gen();
                if u <= (-0.5 * z * z * x).exp() {
                    return x;
                }
            }
        } else {
            let mu = 1.0 / z;
            loop {
                let n: f64 = StandardNormal.sample(rng);
                let y = n * n;
                let mu_y = mu * y;
                let mut x = mu + 0.5 * mu * mu_y - 0.5 * mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
                let u: f64 = rng.gen();
                if u > mu / (mu + x) {
                    x = mu * mu / x;
                }
                if x <= TRUNC {
                    return x;
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = rng.gen();
            let x = if u < self.tail_mass {
                let e: f64 = Exp1.sample(rng);
                TRUNC + e / self.rate
            } else {
                self.truncated_inv_gauss(rng)
            };
            let series = Series::at(x);
            let mut s = series.coef(0);
            let y = rng.gen::<f64>() * s;
            let mut n = 0;
            loop {
                n += 1;
                if n % 2 == 1 {
                    s -= series.coef(n);
                    if y <= s {
                        return 0.25 * x;
                    }
                } else {
                    s += series.coef(n);
                    if y > s {
                        break;
                    }
                }
            }
        }
    }
}

/// One draw from `PG(b, c)`.
pub fn sample_pg<R: Rng + ?Sized>(b: u32, c: f64, rng: &mut R) -> Result<f64> {
    if b == 0 {
        return Err(Error::InvalidArgument(
            "Pólya-Gamma shape b must be >= 1".into(),
        ));
    }
    if !c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Pólya-Gamma tilt must be finite, got {c}"
        )));
    }
    let one = PgOne::new(c);
    Ok((0..b).map(|_| one.sample(rng)).sum())
}

/// `E[PG(b, c)] = b/(2c) tanh(c/2)`, with limit `b/4` at `c = 0`.
pub fn pg_mean(b: f64, c: f64) -> f64 {
    if c.abs() < 1e-8 {
        b / 4.0
    } else {
        b / (2.0 * c) * (0.5 * c).tanh()
    }
}
