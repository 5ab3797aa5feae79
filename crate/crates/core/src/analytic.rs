//! Closed-form rate-distortion evaluators for the binary hidden Markov source
//! under Hamming distortion and the hidden Gauss-Markov source under squared
//! error, together with the test channels that achieve them.
//!
//! For delays 0 and 1 the returned rates are the rate-distortion function; for
//! larger delays they are achievable rates (upper bounds), and the
//! [`Exactness`] flag says which.

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::surprisal_term;
use crate::markov::binary_k_step_flip;

/// Whether a rate is known to be optimal or only achievable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    Exact,
    AchievableUpperBound,
}

impl Exactness {
    /// Single-letter optimality is established for delays 0 and 1 only.
    pub fn for_delay(d: u32) -> Self {
        if d <= 1 {
            Exactness::Exact
        } else {
            Exactness::AchievableUpperBound
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Exactness::Exact => "exact",
            Exactness::AchievableUpperBound => "achievable_upper_bound",
        }
    }
}

/// A rate (bits/symbol) at a distortion level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub distortion: f64,
    pub rate: f64,
    pub exactness: Exactness,
}

/// Binary symmetric chain with flip `eps`, BSC(`q`) emission, delay `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryHmmParams {
    pub eps: f64,
    pub q: f64,
    pub d: u32,
}

impl BinaryHmmParams {
    pub fn new(eps: f64, q: f64, d: u32) -> Result<Self> {
        for (name, v) in [("eps", eps), ("q", q)] {
            if !(0.0..=0.5).contains(&v) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    domain: "[0, 1/2]",
                });
            }
        }
        Ok(Self { eps, q, d })
    }

    /// `eps^(d) * q`: the flip probability between `Y_{i-d}` and `X_i`.
    pub fn effective_flip(&self) -> f64 {
        let k = binary_k_step_flip(self.eps, self.d).expect("eps validated at construction");
        convolve(k, self.q)
    }

    /// Upper end of the interval on which the rate is positive.
    pub fn critical_distortion(&self) -> f64 {
        let a = self.effective_flip();
        a.min(1.0 - a)
    }
}

/// Gauss-Markov state with unit power and lag-one correlation `rho`,
/// observed in additive Gaussian noise of variance `sigma2_n`, delay `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussMarkovParams {
    pub rho: f64,
    pub sigma2_n: f64,
    pub d: u32,
}

impl GaussMarkovParams {
    pub fn new(rho: f64, sigma2_n: f64, d: u32) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::Domain {
                name: "rho",
                value: rho,
                domain: "(-1, 1)",
            });
        }
        if !(sigma2_n >= 0.0 && sigma2_n.is_finite()) {
            return Err(Error::Domain {
                name: "sigma2_n",
                value: sigma2_n,
                domain: "[0, inf)",
            });
        }
        Ok(Self { rho, sigma2_n, d })
    }

    /// `rho^d`; equals 1 at `d = 0`.
    pub fn rho_d(&self) -> f64 {
        self.rho.powi(self.d as i32)
    }

    /// `Var(X | Y_{i-d}) = 1 - rho^{2d} + sigma_N^2`.
    pub fn conditional_variance(&self) -> f64 {
        1.0 - self.rho_d().powi(2) + self.sigma2_n
    }
}

fn convolve(p: f64, q: f64) -> f64 {
    p * (1.0 - q) + (1.0 - p) * q
}

/// `H_b(a)` in bits.
pub fn binary_entropy(a: f64) -> Result<f64> {
    Error::check_probability("a", a)?;
    Ok(surprisal_term(a) + surprisal_term(1.0 - a))
}

/// `p * q = p(1-q) + (1-p)q`.
pub fn binary_convolve(p: f64, q: f64) -> Result<f64> {
    Error::check_probability("p", p)?;
    Error::check_probability("q", q)?;
    Ok(convolve(p, q))
}

/// `H_b(eps^(d) * q) - H_b(D1)` on `[0, min(a, 1-a)]`, zero beyond.
pub fn binary_rd(params: &BinaryHmmParams, d1: f64) -> Result<RdPoint> {
    if !(d1 >= 0.0) {
        return Err(Error::Domain {
            name: "D1",
            value: d1,
            domain: "[0, inf)",
        });
    }
    let a = params.effective_flip();
    let rate = if d1 < params.critical_distortion() {
        (binary_entropy(a)? - binary_entropy(d1)?).max(0.0)
    } else {
        0.0
    };
    Ok(RdPoint {
        distortion: d1,
        rate,
        exactness: Exactness::for_delay(params.d),
    })
}

/// `p_{Z1}(1) = (eps^(d) * q - D1) / (1 - 2 D1)` for the channel
/// `X = Y_d xor S xor Z1` with `P(S = 1) = D1`.
pub fn binary_test_channel(params: &BinaryHmmParams, d1: f64) -> Result<f64> {
    let limit = params.critical_distortion();
    if !(0.0..=limit).contains(&d1) || d1 == 0.5 {
        return Err(Error::Domain {
            name: "D1",
            value: d1,
            domain: "[0, min(eps^(d)*q, 1 - eps^(d)*q)], excluding 1/2",
        });
    }
    Ok(((params.effective_flip() - d1) / (1.0 - 2.0 * d1)).clamp(0.0, 1.0))
}

/// Joint law `p(y_d, z1, x)` induced by the binary test channel, indexed
/// `[y_d][z1][x]`, with `Y_d` uniform and `Z1`, `S` independent of it.
pub fn binary_test_channel_joint(params: &BinaryHmmParams, d1: f64) -> Result<[[[f64; 2]; 2]; 2]> {
    let pz = binary_test_channel(params, d1)?;
    let mut joint = [[[0.0; 2]; 2]; 2];
    for (yd, by_z) in joint.iter_mut().enumerate() {
        for (z, by_x) in by_z.iter_mut().enumerate() {
            let p_z = if z == 1 { pz } else { 1.0 - pz };
            for s in 0..2 {
                let p_s = if s == 1 { d1 } else { 1.0 - d1 };
                by_x[yd ^ s ^ z] += 0.5 * p_z * p_s;
            }
        }
    }
    Ok(joint)
}

/// `1/2 log2((1 - rho^{2d} + sigma_N^2) / D1)` below the conditional variance, zero beyond.
pub fn gaussian_rd(params: &GaussMarkovParams, d1: f64) -> Result<RdPoint> {
    if !(d1 > 0.0) {
        return Err(Error::Domain {
            name: "D1",
            value: d1,
            domain: "(0, inf)",
        });
    }
    let v = params.conditional_variance();
    let rate = if d1 < v { 0.5 * (v / d1).log2() } else { 0.0 };
    Ok(RdPoint {
        distortion: d1,
        rate,
        exactness: Exactness::for_delay(params.d),
    })
}

/// The Gaussian test channel `X = rho^d Y_d + S + Z1`, `E[S^2] = D1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTestChannel {
    pub rho_d: f64,
    pub distortion: f64,
    /// `E[Z1^2]`
    pub z_variance: f64,
}

impl GaussianTestChannel {
    /// Covariance of `(X, Z1, Y_d)`.
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let x_var = self.rho_d * self.rho_d + self.distortion + self.z_variance;
        [
            [x_var, self.z_variance, self.rho_d],
            [self.z_variance, self.z_variance, 0.0],
            [self.rho_d, 0.0, 1.0],
        ]
    }
}

/// `E[Z1^2] = 1 - rho^{2d} + sigma_N^2 - D1`.
pub fn gaussian_test_channel(params: &GaussMarkovParams, d1: f64) -> Result<GaussianTestChannel> {
    let v = params.conditional_variance();
    if !(d1 > 0.0 && d1 <= v) {
        return Err(Error::Domain {
            name: "D1",
            value: d1,
            domain: "(0, 1 - rho^{2d} + sigma_N^2]",
        });
    }
    Ok(GaussianTestChannel {
        rho_d: params.rho_d(),
        distortion: d1,
        z_variance: balanced_remainder(v, d1),
    })
}

/// `v - d1`, nudged by at most a few ulps so that `z + d1 == v` in floating
/// point when some nearby value allows it (ties can rule that out).
fn balanced_remainder(v: f64, d1: f64) -> f64 {
    let mut z = (v - d1).max(0.0);
    for _ in 0..4 {
        let sum = z + d1;
        if sum == v {
            break;
        }
        z = if sum > v { z.next_down() } else { z.next_up() }.max(0.0);
    }
    z
}

/// `I(A; B | C)` in bits for jointly Gaussian `(A, B, C)` with covariance `cov`:
/// `1/2 log2(det S_AC det S_BC / (det S_ABC det S_C))`. A degenerate `B`
/// (zero variance) carries no information.
pub fn gaussian_conditional_mi(cov: &[[f64; 3]; 3]) -> f64 {
    if cov[1][1] == 0.0 {
        return 0.0;
    }
    let full = Matrix3::from_fn(|i, j| cov[i][j]);
    let ac = Matrix2::new(cov[0][0], cov[0][2], cov[2][0], cov[2][2]);
    let bc = Matrix2::new(cov[1][1], cov[1][2], cov[2][1], cov[2][2]);
    0.5 * ((ac.determinant() * bc.determinant()) / (full.determinant() * cov[2][2])).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert!((binary_entropy(0.1).unwrap() - 0.469).abs() < 5e-4);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.3).unwrap() - binary_entropy(0.7).unwrap()).abs() < 1e-15);
        assert!(binary_entropy(1.2).is_err());
    }

    #[test]
    fn convolution_values() {
        assert_eq!(binary_convolve(0.0, 0.37).unwrap(), 0.37);
        assert_eq!(binary_convolve(0.5, 0.37).unwrap(), 0.5);
        assert!((binary_convolve(0.18, 0.1).unwrap() - 0.244).abs() < 1e-15);
        assert_eq!(binary_convolve(0.2, 0.3).unwrap(), binary_convolve(0.3, 0.2).unwrap());
        assert!(binary_convolve(-0.1, 0.2).is_err());
    }

    #[test]
    fn binary_rd_feedforward_and_boundary() {
        for eps in [0.05, 0.1, 0.3] {
            let p = BinaryHmmParams::new(eps, 0.0, 1).unwrap();
            for d1 in [0.0, 0.01, 0.04] {
                let r = binary_rd(&p, d1).unwrap();
                let expect = binary_entropy(eps).unwrap() - binary_entropy(d1).unwrap();
                assert!((r.rate - expect).abs() < 1e-15);
                assert_eq!(r.exactness, Exactness::Exact);
            }
            assert_eq!(binary_rd(&p, eps).unwrap().rate, 0.0);
            assert_eq!(binary_rd(&p, 0.5).unwrap().rate, 0.0);
        }
        let p = BinaryHmmParams::new(0.1, 0.1, 2).unwrap();
        let r = binary_rd(&p, 0.05).unwrap();
        let expect = binary_entropy(0.244).unwrap() - binary_entropy(0.05).unwrap();
        assert!((r.rate - expect).abs() < 1e-12);
        assert_eq!(r.exactness, Exactness::AchievableUpperBound);
    }

    #[test]
    fn binary_test_channel_values() {
        let p = BinaryHmmParams::new(0.1, 0.1, 1).unwrap();
        assert!((binary_test_channel(&p, 0.0).unwrap() - 0.18).abs() < 1e-15);
        assert_eq!(binary_test_channel(&p, p.effective_flip()).unwrap(), 0.0);
        assert!((binary_test_channel(&p, 0.05).unwrap() - 0.13 / 0.9).abs() < 1e-14);
        assert!(binary_test_channel(&p, 0.2).is_err());
        // eps = q = 1/2: the interval reaches 1/2, where the formula is undefined
        let half = BinaryHmmParams::new(0.5, 0.5, 1).unwrap();
        assert!(binary_test_channel(&half, 0.5).is_err());
    }

    #[test]
    fn gaussian_values() {
        let p = GaussMarkovParams::new(0.9, 0.1, 1).unwrap();
        let r = gaussian_rd(&p, 0.1).unwrap();
        assert!((r.rate - 0.5 * (0.29f64 / 0.1).log2()).abs() < 1e-12);
        assert!((r.rate - 0.7680).abs() < 1e-4);
        assert_eq!(gaussian_rd(&p, p.conditional_variance()).unwrap().rate, 0.0);
        assert!(gaussian_rd(&p, 0.29).unwrap().rate < 1e-12);
        assert!(gaussian_rd(&p, 0.0).is_err());
        let memoryless = GaussMarkovParams::new(0.0, 0.1, 3).unwrap();
        assert!((gaussian_rd(&memoryless, 0.5).unwrap().rate - 0.5 * (1.1f64 / 0.5).log2()).abs() < 1e-12);

        let ch = gaussian_test_channel(&p, 0.1).unwrap();
        assert!((ch.z_variance - 0.19).abs() < 1e-12);
        assert_eq!(
            gaussian_test_channel(&p, p.conditional_variance()).unwrap().z_variance,
            0.0
        );
        let ff = GaussMarkovParams::new(0.9, 0.0, 1).unwrap();
        let ch = gaussian_test_channel(&ff, ff.conditional_variance()).unwrap();
        assert!(ch.z_variance.abs() < 1e-15);
        assert_eq!(gaussian_rd(&ff, 0.19).unwrap().rate, 0.0);
        assert!(gaussian_test_channel(&p, 0.3).is_err());
        assert!(GaussMarkovParams::new(1.0, 0.1, 1).is_err());
    }

    #[test]
    fn gaussian_power_balance_to_the_last_bit() {
        let mut exact = 0;
        let mut total = 0;
        for rho in [0.0, 0.3, 0.5, 0.9, -0.7] {
            for s2 in [0.0, 0.1, 0.37] {
                for d in 1..4 {
                    let p = GaussMarkovParams::new(rho, s2, d).unwrap();
                    let v = p.conditional_variance();
                    for k in 1..=97 {
                        let d1 = v * k as f64 / 97.0;
                        if d1 > v || d1 == 0.0 {
                            continue;
                        }
                        let ch = gaussian_test_channel(&p, d1).unwrap();
                        let sum = ch.z_variance + d1;
                        assert!((sum - v).abs() <= f64::EPSILON * v, "rho={rho} s2={s2} d={d} D1={d1}");
                        assert!((ch.z_variance - (v - d1)).abs() <= 4.0 * f64::EPSILON * v);
                        total += 1;
                        exact += usize::from(sum == v);
                    }
                }
            }
        }
        assert!(exact * 100 >= total * 95, "{exact} of {total} bit-exact");
    }
}
