use crate::error::{Error, Result};
use crate::scalar::Real;

/// Wealth below which positive-wealth utilities treat a path as ruined.
pub const WEALTH_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UtilityFamily {
    Power,
    Log,
    Exponential,
}

impl UtilityFamily {
    pub fn name(self) -> &'static str {
        match self {
            UtilityFamily::Power => "power",
            UtilityFamily::Log => "log",
            UtilityFamily::Exponential => "exponential",
        }
    }
}

/// Running utility `phi` and bequest `h = a * phi` for one of three families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility<S> {
    /// `c^gamma / gamma`, `0 < gamma < 1`.
    Power { a: S, gamma: S },
    /// `ln c`.
    Log { a: S },
    /// `-exp(-gamma c) / gamma`, `gamma > 0`.
    Exponential { a: S, gamma: S },
}

fn positive<S: Real>(name: &str, v: S) -> Result<()> {
    if !(v > S::zero()) || !v.is_finite() {
        return Err(Error::validation(name, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

impl<S: Real> Utility<S> {
    pub fn power(a: S, gamma: S) -> Result<Self> {
        positive("utility.a", a)?;
        if !(gamma > S::zero() && gamma < S::one()) {
            return Err(Error::validation(
                "utility.gamma",
                format!("power utility needs 0 < gamma < 1, got {gamma}"),
            ));
        }
        Ok(Utility::Power { a, gamma })
    }

    pub fn log(a: S) -> Result<Self> {
        positive("utility.a", a)?;
        Ok(Utility::Log { a })
    }

    pub fn exponential(a: S, gamma: S) -> Result<Self> {
        positive("utility.a", a)?;
        positive("utility.gamma", gamma)?;
        Ok(Utility::Exponential { a, gamma })
    }

    pub fn family(&self) -> UtilityFamily {
        match self {
            Utility::Power { .. } => UtilityFamily::Power,
            Utility::Log { .. } => UtilityFamily::Log,
            Utility::Exponential { .. } => UtilityFamily::Exponential,
        }
    }

    /// Bequest weight `a`.
    pub fn weight(&self) -> S {
        match self {
            Utility::Power { a, .. } | Utility::Log { a } | Utility::Exponential { a, .. } => *a,
        }
    }

    /// Lowest admissible wealth, when wealth must stay positive.
    pub fn wealth_floor(&self) -> Option<S> {
        match self {
            Utility::Exponential { .. } => None,
            _ => Some(S::lit(WEALTH_FLOOR)),
        }
    }

    fn check(&self, what: &'static str, v: S) -> Result<()> {
        if !v.is_finite() {
            return Err(Error::domain(what, format!("non-finite argument {v}")));
        }
        if !matches!(self, Utility::Exponential { .. }) && v <= S::zero() {
            return Err(Error::domain(
                what,
                format!("{} utility needs a positive argument, got {v}", self.family().name()),
            ));
        }
        Ok(())
    }

    #[inline]
    fn raw(&self, c: S) -> S {
        match self {
            Utility::Power { gamma, .. } => c.powf(*gamma) / *gamma,
            Utility::Log { .. } => c.ln(),
            Utility::Exponential { gamma, .. } => -(-*gamma * c).exp() / *gamma,
        }
    }

    #[inline]
    fn raw_d1(&self, c: S) -> S {
        match self {
            Utility::Power { gamma, .. } => c.powf(*gamma - S::one()),
            Utility::Log { .. } => c.recip(),
            Utility::Exponential { gamma, .. } => (-*gamma * c).exp(),
        }
    }

    #[inline]
    fn raw_d2(&self, c: S) -> S {
        match self {
            Utility::Power { gamma, .. } => (*gamma - S::one()) * c.powf(*gamma - S::lit(2.0)),
            Utility::Log { .. } => -(c * c).recip(),
            Utility::Exponential { gamma, .. } => -*gamma * (-*gamma * c).exp(),
        }
    }

    /// Running utility `phi(c)`.
    pub fn phi(&self, c: S) -> Result<S> {
        self.check("utility", c)?;
        Ok(self.raw(c))
    }

    pub fn phi_c(&self, c: S) -> Result<S> {
        self.check("marginal utility", c)?;
        Ok(self.raw_d1(c))
    }

    pub fn phi_cc(&self, c: S) -> Result<S> {
        self.check("utility curvature", c)?;
        Ok(self.raw_d2(c))
    }

    /// Bequest utility `h(x) = a phi(x)`.
    pub fn h(&self, x: S) -> Result<S> {
        self.check("bequest utility", x)?;
        Ok(self.weight() * self.raw(x))
    }

    pub fn h_x(&self, x: S) -> Result<S> {
        self.check("marginal bequest utility", x)?;
        Ok(self.weight() * self.raw_d1(x))
    }

    pub fn h_xx(&self, x: S) -> Result<S> {
        self.check("bequest curvature", x)?;
        Ok(self.weight() * self.raw_d2(x))
    }

    /// Inverse of the marginal utility, `(phi_c)^{-1}(y)` for `y > 0`.
    pub fn inverse_marginal(&self, y: S) -> Result<S> {
        if !(y > S::zero()) || !y.is_finite() {
            return Err(Error::domain(
                "inverse marginal utility",
                format!("argument must be positive, got {y}"),
            ));
        }
        Ok(self.inverse_marginal_raw(y))
    }

    #[inline]
    pub(crate) fn inverse_marginal_raw(&self, y: S) -> S {
        match self {
            Utility::Power { gamma, .. } => y.powf((*gamma - S::one()).recip()),
            Utility::Log { .. } => y.recip(),
            Utility::Exponential { gamma, .. } => -y.ln() / *gamma,
        }
    }

    /// Derivative of the inverse marginal utility.
    #[inline]
    pub(crate) fn inverse_marginal_deriv(&self, y: S) -> S {
        match self {
            Utility::Power { gamma, .. } => {
                let e = (*gamma - S::one()).recip();
                e * y.powf(e - S::one())
            }
            Utility::Log { .. } => -(y * y).recip(),
            Utility::Exponential { gamma, .. } => -(*gamma * y).recip(),
        }
    }

    pub fn cast<T: Real>(&self) -> Utility<T> {
        let c = |v: S| T::lit(v.as_f64());
        match *self {
            Utility::Power { a, gamma } => Utility::Power { a: c(a), gamma: c(gamma) },
            Utility::Log { a } => Utility::Log { a: c(a) },
            Utility::Exponential { a, gamma } => Utility::Exponential { a: c(a), gamma: c(gamma) },
        }
    }
}
