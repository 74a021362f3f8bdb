//! Shannon rates, sum rate and α-fair throughput.
//!
//! The α-fair throughput reported here is the equally-distributed
//! equivalent: the total throughput of a perfectly even rate vector that has
//! the same α-fair utility as the actual one. It equals the sum rate at
//! `α = 0` and whenever all users are equal, and it decreases as `α` grows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rates below this are raised to it before evaluating α ≥ 1 utilities.
pub const RATE_FLOOR_BPS: f64 = 1.0;

const BISECTION_ITERS: usize = 200;

/// `bandwidth · log₂(1 + γ)` per user SINR.
pub fn per_user_rates(user_sinr: &[f64], bandwidth_hz: f64) -> Vec<f64> {
    user_sinr
        .iter()
        .map(|&g| bandwidth_hz * (1.0 + g.max(0.0)).log2())
        .collect()
}

pub fn sum_rate(rates: &[f64]) -> f64 {
    rates.iter().sum()
}

fn utility_of(r: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        r.ln()
    } else {
        r.powf(1.0 - alpha) / (1.0 - alpha)
    }
}

/// `Σ log r` at α = 1, `Σ r^{1-α}/(1-α)` otherwise.
pub fn alpha_utility(rates: &[f64], alpha: f64) -> f64 {
    rates.iter().map(|&r| utility_of(r, alpha)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairThroughput {
    pub utility: f64,
    pub fair_throughput: f64,
    /// Number of rates raised to [`RATE_FLOOR_BPS`].
    pub floored: usize,
}

pub fn alpha_fair_throughput(rates: &[f64], alpha: f64) -> Result<FairThroughput> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "fairness parameter must be finite and non-negative, got {alpha}"
        )));
    }
    if rates.is_empty() {
        return Err(Error::InvalidArgument("no rates to evaluate".into()));
    }
    if let Some(r) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::InvalidArgument(format!("rates must be finite and non-negative, got {r}")));
    }
    let mut floored = 0;
    let rates: Vec<f64> = if alpha >= 1.0 {
        rates
            .iter()
            .map(|&r| {
                if r < RATE_FLOOR_BPS {
                    floored += 1;
                    RATE_FLOOR_BPS
                } else {
                    r
                }
            })
            .collect()
    } else {
        rates.to_vec()
    };
    if floored > 0 {
        log::warn!("{floored} user rate(s) raised to {RATE_FLOOR_BPS} bit/s for alpha = {alpha}");
    }
    let utility = alpha_utility(&rates, alpha);
    let fair_throughput = if alpha == 0.0 {
        sum_rate(&rates)
    } else {
        rates.len() as f64 * equivalent_rate(&rates, alpha)
    };
    Ok(FairThroughput {
        utility,
        fair_throughput,
        floored,
    })
}

/// Finds the even per-user rate `x` with `U(x) = mean U(r)` by bisection.
/// Works on rates normalized by the largest one so `r^{1-α}` stays in range.
fn equivalent_rate(rates: &[f64], alpha: f64) -> f64 {
    let scale = rates.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let norm: Vec<f64> = rates.iter().map(|r| r / scale).collect();
    let mut lo = norm.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = 1.0;
    if lo == hi {
        return scale;
    }
    let target = alpha_utility(&norm, alpha) / norm.len() as f64;
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if utility_of(mid, alpha) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    scale * 0.5 * (lo + hi)
}

/// `100 (a - b) / b`.
pub fn improvement_percent(a: f64, b: f64) -> f64 {
    debug_assert!(b > 0.0, "improvement baseline must be positive");
    100.0 * (a - b) / b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub alpha: f64,
    pub utility: f64,
    pub fair_throughput: f64,
}

impl RateReport {
    pub fn new(user_sinr: &[f64], bandwidth_hz: f64, alpha: f64) -> Result<Self> {
        let per_user_rate = per_user_rates(user_sinr, bandwidth_hz);
        let fair = alpha_fair_throughput(&per_user_rate, alpha)?;
        Ok(Self {
            sum_rate: sum_rate(&per_user_rate),
            per_user_rate,
            alpha,
            utility: fair.utility,
            fair_throughput: fair.fair_throughput,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Closed form of the equal-utility throughput: K times the power mean of
    /// order 1-α (geometric mean at α = 1).
    fn power_mean_oracle(rates: &[f64], alpha: f64) -> f64 {
        let k = rates.len() as f64;
        if alpha == 1.0 {
            k * (rates.iter().map(|r| r.ln()).sum::<f64>() / k).exp()
        } else {
            let p = 1.0 - alpha;
            k * (rates.iter().map(|r| r.powf(p)).sum::<f64>() / k).powf(1.0 / p)
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(per_user_rates(&[1.0], 1.0), vec![1.0]);
        assert_eq!(per_user_rates(&[0.0], 400e6), vec![0.0]);
        assert_eq!(per_user_rates(&[1.0, 3.0], 400e6), vec![400e6, 800e6]);
    }

    #[test]
    fn alpha_zero_is_sum_rate() {
        let r = [1e7, 3e7, 2.5e6];
        let f = alpha_fair_throughput(&r, 0.0).unwrap();
        assert_eq!(f.fair_throughput, sum_rate(&r));
        assert_eq!(f.utility, sum_rate(&r));
    }

    #[test]
    fn equal_rates_are_fair_for_every_alpha() {
        let r = [2e7; 4];
        for alpha in [0.0, 0.5, 1.0, 2.0, 5.0] {
            assert_relative_eq!(alpha_fair_throughput(&r, alpha).unwrap().fair_throughput, 8e7, max_relative = 1e-12);
        }
    }

    #[test]
    fn matches_power_mean_closed_form() {
        let r = [4.1e7, 1.3e7, 2.2e7, 9.0e6];
        for alpha in [0.3, 1.0, 2.0, 4.0] {
            let got = alpha_fair_throughput(&r, alpha).unwrap().fair_throughput;
            assert_relative_eq!(got, power_mean_oracle(&r, alpha), max_relative = 1e-12);
        }
    }

    #[test]
    fn throughput_decreases_with_alpha() {
        let r = [4.1e7, 1.3e7, 2.2e7];
        let t: Vec<f64> = [0.0, 1.0, 2.0]
            .iter()
            .map(|&a| alpha_fair_throughput(&r, a).unwrap().fair_throughput)
            .collect();
        assert!(t[0] > t[1] && t[1] > t[2]);
    }

    #[test]
    fn zero_rates_are_floored_for_alpha_at_least_one() {
        let f = alpha_fair_throughput(&[0.0, 1e6], 1.0).unwrap();
        assert_eq!(f.floored, 1);
        assert!(f.utility.is_finite());
        let g = alpha_fair_throughput(&[0.0, 1e6], 0.5).unwrap();
        assert_eq!(g.floored, 0);
    }

    #[test]
    fn negative_alpha_is_rejected() {
        assert!(alpha_fair_throughput(&[1.0], -0.5).is_err());
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(improvement_percent(3.0, 3.0), 0.0);
        assert_relative_eq!(improvement_percent(4.293, 3.856), 11.33, epsilon = 5e-3);
        assert_relative_eq!(improvement_percent(4.048, 3.647), 11.0, epsilon = 5e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rates_are_monotone_in_sinr(a in 0.0f64..1e6, d in 1e-6f64..1e3) {
                let r = per_user_rates(&[a, a + d], 1e6);
                prop_assert!(r[1] > r[0]);
            }

            #[test]
            fn utility_is_midpoint_concave(
                x in proptest::collection::vec(1.0f64..1e8, 3),
                y in proptest::collection::vec(1.0f64..1e8, 3),
                alpha in 0.1f64..4.0,
            ) {
                prop_assume!(x.iter().zip(&y).any(|(a, b)| (a - b).abs() > 1e-3 * a.max(*b)));
                let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
                let lhs = alpha_utility(&mid, alpha);
                let rhs = 0.5 * (alpha_utility(&x, alpha) + alpha_utility(&y, alpha));
                prop_assert!(lhs > rhs - 1e-12 * rhs.abs(), "{} vs {}", lhs, rhs);
            }

            #[test]
            fn self_improvement_is_zero(a in 1e-3f64..1e12) {
                prop_assert_eq!(improvement_percent(a, a), 0.0);
            }
        }
    }
}
