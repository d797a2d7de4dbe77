use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Discount function `lambda(tau)` on `[0, T]` with `lambda(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscountFunction<S> {
    /// `exp(-rate * tau)`.
    Exponential { rate: S, horizon: S },
    /// `exp(-int_0^tau rate)` with a time-varying instantaneous rate.
    Karp { rate: Curve<S>, horizon: S },
    /// `(1 + k tau)^(-beta)`.
    Hyperbolic { k: S, beta: S, horizon: S },
    /// `sum_i w_i exp(-rate_i tau)`.
    Mixture {
        weights: Vec<S>,
        rates: Vec<S>,
        horizon: S,
    },
}

fn check_horizon<S: Real>(horizon: S) -> Result<()> {
    if !(horizon > S::zero()) || !horizon.is_finite() {
        return Err(Error::validation("horizon", format!("must be positive, got {horizon}")));
    }
    Ok(())
}

impl<S: Real> DiscountFunction<S> {
    pub fn exponential(rate: S, horizon: S) -> Result<Self> {
        check_horizon(horizon)?;
        if !rate.is_finite() || rate < S::zero() {
            return Err(Error::validation(
                "discount.rate",
                format!("must be finite and nonnegative, got {rate}"),
            ));
        }
        Ok(DiscountFunction::Exponential { rate, horizon })
    }

    pub fn karp(rate: Curve<S>, horizon: S) -> Result<Self> {
        check_horizon(horizon)?;
        let lo = rate.min_value();
        if !lo.is_finite() || !rate.max_value().is_finite() || lo < S::zero() {
            return Err(Error::validation(
                "discount.rate",
                format!("instantaneous rate must be finite and nonnegative, minimum is {lo}"),
            ));
        }
        Ok(DiscountFunction::Karp { rate, horizon })
    }

    pub fn hyperbolic(k: S, beta: S, horizon: S) -> Result<Self> {
        check_horizon(horizon)?;
        if !(k > S::zero()) || !k.is_finite() {
            return Err(Error::validation("discount.k", format!("must be positive, got {k}")));
        }
        if !(beta > S::zero()) || !beta.is_finite() {
            return Err(Error::validation("discount.beta", format!("must be positive, got {beta}")));
        }
        Ok(DiscountFunction::Hyperbolic { k, beta, horizon })
    }

    pub fn mixture(weights: Vec<S>, rates: Vec<S>, horizon: S) -> Result<Self> {
        check_horizon(horizon)?;
        if weights.is_empty() || weights.len() != rates.len() {
            return Err(Error::validation(
                "discount.weights",
                "need matching, nonempty weight and rate lists",
            ));
        }
        if weights.iter().any(|w| !(*w > S::zero()) || !w.is_finite()) {
            return Err(Error::validation("discount.weights", "weights must be positive"));
        }
        let total: S = weights.iter().copied().sum();
        if (total - S::one()).abs() > S::lit(1e-12).max(S::epsilon() * S::lit(8.0)) {
            return Err(Error::validation(
                "discount.weights",
                format!("weights must sum to 1, got {total}"),
            ));
        }
        if rates.iter().any(|r| !(*r > S::zero()) || !r.is_finite()) {
            return Err(Error::validation("discount.rates", "rates must be positive"));
        }
        Ok(DiscountFunction::Mixture {
            weights,
            rates,
            horizon,
        })
    }

    pub fn horizon(&self) -> S {
        match self {
            DiscountFunction::Exponential { horizon, .. }
            | DiscountFunction::Karp { horizon, .. }
            | DiscountFunction::Hyperbolic { horizon, .. }
            | DiscountFunction::Mixture { horizon, .. } => *horizon,
        }
    }

    /// `lambda(tau)` for `tau` in `[0, T]`.
    pub fn evaluate(&self, tau: S) -> Result<S> {
        let tol = self.horizon() * S::lit(1e-12);
        if !tau.is_finite() || tau < -tol || tau > self.horizon() + tol {
            return Err(Error::domain(
                "discount",
                format!("tau = {tau} outside [0, {}]", self.horizon()),
            ));
        }
        Ok(self.value(tau.max(S::zero())))
    }

    /// `lambda(tau)` without the domain check.
    #[inline]
    pub fn value(&self, tau: S) -> S {
        match self {
            DiscountFunction::Exponential { rate, .. } => (-*rate * tau).exp(),
            DiscountFunction::Karp { rate, .. } => (-rate.integral(S::zero(), tau)).exp(),
            DiscountFunction::Hyperbolic { k, beta, .. } => (S::one() + *k * tau).powf(-*beta),
            DiscountFunction::Mixture { weights, rates, .. } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| *w * (-*r * tau).exp())
                .sum(),
        }
    }

    /// Instantaneous discount rate `-lambda'(tau) / lambda(tau)`.
    pub fn rate(&self, tau: S) -> S {
        match self {
            DiscountFunction::Exponential { rate, .. } => *rate,
            DiscountFunction::Karp { rate, .. } => rate.eval(tau),
            DiscountFunction::Hyperbolic { k, beta, .. } => *k * *beta / (S::one() + *k * tau),
            DiscountFunction::Mixture { weights, rates, .. } => {
                let (num, den) = weights.iter().zip(rates).fold(
                    (S::zero(), S::zero()),
                    |(n, d), (w, r)| {
                        let e = *w * (-*r * tau).exp();
                        (n + *r * e, d + e)
                    },
                );
                num / den
            }
        }
    }

    /// Upper bound on the Lipschitz constant of `lambda` on `[0, T]`.
    pub fn lipschitz_bound(&self) -> S {
        match self {
            DiscountFunction::Exponential { rate, .. } => *rate,
            DiscountFunction::Karp { rate, .. } => rate.max_value(),
            DiscountFunction::Hyperbolic { k, beta, .. } => *k * *beta,
            DiscountFunction::Mixture { weights, rates, .. } => {
                weights.iter().zip(rates).map(|(w, r)| *w * *r).sum()
            }
        }
    }

    /// The constant rate, when discounting is exponential.
    pub fn constant_rate(&self) -> Option<S> {
        match self {
            DiscountFunction::Exponential { rate, .. } => Some(*rate),
            DiscountFunction::Karp {
                rate: Curve::Constant(r),
                ..
            } => Some(*r),
            DiscountFunction::Mixture { rates, .. } if rates.iter().all(|r| *r == rates[0]) => {
                Some(rates[0])
            }
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DiscountFunction::Exponential { .. } => "exponential",
            DiscountFunction::Karp { .. } => "karp",
            DiscountFunction::Hyperbolic { .. } => "hyperbolic",
            DiscountFunction::Mixture { .. } => "mixture",
        }
    }

    pub fn cast<T: Real>(&self) -> DiscountFunction<T> {
        let c = |v: S| T::lit(v.as_f64());
        match self {
            DiscountFunction::Exponential { rate, horizon } => DiscountFunction::Exponential {
                rate: c(*rate),
                horizon: c(*horizon),
            },
            DiscountFunction::Karp { rate, horizon } => DiscountFunction::Karp {
                rate: rate.cast(),
                horizon: c(*horizon),
            },
            DiscountFunction::Hyperbolic { k, beta, horizon } => DiscountFunction::Hyperbolic {
                k: c(*k),
                beta: c(*beta),
                horizon: c(*horizon),
            },
            DiscountFunction::Mixture {
                weights,
                rates,
                horizon,
            } => DiscountFunction::Mixture {
                weights: weights.iter().map(|w| c(*w)).collect(),
                rates: rates.iter().map(|r| c(*r)).collect(),
                horizon: c(*horizon),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperbolic_values() {
        let d = DiscountFunction::hyperbolic(1.0, 1.0, 1.0).unwrap();
        assert_eq!(d.evaluate(0.5).unwrap(), 1.0 / 1.5);
        assert_eq!(d.evaluate(0.0).unwrap(), 1.0);
        assert!(d.evaluate(1.5).is_err());
        assert!(d.evaluate(-0.1).is_err());
    }

    #[test]
    fn constant_karp_rate_matches_exponential() {
        let e = DiscountFunction::exponential(0.1, 2.0).unwrap();
        let k = DiscountFunction::karp(Curve::constant(0.1), 2.0).unwrap();
        for i in 0..=20 {
            let tau = 0.1 * i as f64;
            assert!((e.value(tau) - k.value(tau)).abs() < 1e-15);
        }
        assert_eq!(k.constant_rate(), Some(0.1));
    }

    #[test]
    fn linear_karp_rate() {
        let k = DiscountFunction::karp(Curve::affine(0.1, 0.1, 0.0, 1.0).unwrap(), 1.0).unwrap();
        assert!((k.value(1.0) - (-0.15f64).exp()).abs() < 1e-15);
        assert_eq!(k.constant_rate(), None);
    }

    #[test]
    fn mixture_normalization() {
        assert!(DiscountFunction::mixture(vec![0.5, 0.5], vec![0.05, 0.2], 1.0).is_ok());
        assert!(DiscountFunction::mixture(vec![0.5, 0.6], vec![0.05, 0.2], 1.0).is_err());
        assert!(DiscountFunction::mixture(vec![1.0], vec![0.0], 1.0).is_err());
        let m = DiscountFunction::mixture(vec![0.25, 0.75], vec![0.1, 0.3], 1.0).unwrap();
        let want = 0.25 * (-0.1f64).exp() + 0.75 * (-0.3f64).exp();
        assert!((m.value(1.0) - want).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DiscountFunction::exponential(-0.1, 1.0).is_err());
        assert!(DiscountFunction::hyperbolic(0.0, 1.0, 1.0).is_err());
        assert!(DiscountFunction::hyperbolic(1.0, -1.0, 1.0).is_err());
        assert!(DiscountFunction::exponential(0.1, 0.0).is_err());
    }

    #[test]
    fn instantaneous_rate_matches_log_derivative() {
        let d = DiscountFunction::<f64>::mixture(vec![0.3, 0.7], vec![0.05, 0.4], 2.0).unwrap();
        let h = 1e-6;
        for tau in [0.1, 0.7, 1.5] {
            let fd = -(d.value(tau + h).ln() - d.value(tau - h).ln()) / (2.0 * h);
            assert!((fd - d.rate(tau)).abs() < 1e-8);
        }
    }
}
