use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// `alpha_k = alpha_bar`
    Constant,
    /// `alpha_k = 1/(c + sqrt(k))`, `eta_k = 1 + sqrt(k)`; for bounded domains.
    DiminishingBounded,
    /// `alpha_k = 1/(c + sqrt(K-1))`, `eta_k = 1 + sqrt(K-1)` for a fixed horizon `K`.
    DiminishingHorizon,
    /// `1/alpha_k = c + mu (k+1)`, `eta_k = mu (k+1)`.
    StronglyConvex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeSchedule {
    pub kind: ScheduleKind,
    pub c: f64,
    pub mu: Option<f64>,
    pub horizon: Option<usize>,
    /// Upper cap on every `alpha_k`; also the constant used in the dual metric.
    pub alpha_bar: f64,
}

impl StepsizeSchedule {
    pub fn constant(alpha: f64) -> Self {
        StepsizeSchedule { kind: ScheduleKind::Constant, c: 0.0, mu: None, horizon: None, alpha_bar: alpha }
    }

    /// Bounded-domain schedule with cap `1/c`.
    pub fn diminishing(c: f64) -> Self {
        StepsizeSchedule { kind: ScheduleKind::DiminishingBounded, c, mu: None, horizon: None, alpha_bar: 1.0 / c }
    }

    pub fn horizon(c: f64, k: usize) -> Self {
        StepsizeSchedule {
            kind: ScheduleKind::DiminishingHorizon,
            c,
            mu: None,
            horizon: Some(k),
            alpha_bar: 1.0 / c,
        }
    }

    /// Schedule for `mu`-strongly convex `f`, with cap `1/(c + mu)`.
    pub fn strongly_convex(c: f64, mu: f64) -> Self {
        StepsizeSchedule {
            kind: ScheduleKind::StronglyConvex,
            c,
            mu: Some(mu),
            horizon: None,
            alpha_bar: 1.0 / (c + mu),
        }
    }

    /// `c = 1 + L`, which satisfies both `c > 1 + L/2` and `c >= 1 + L`.
    pub fn default_c(lipschitz: f64) -> f64 {
        1.0 + lipschitz
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_bar > 0.0 && self.alpha_bar.is_finite()) {
            return Err(Error::InvalidParameter { name: "alpha_bar", value: self.alpha_bar, requirement: "alpha_bar > 0" });
        }
        match self.kind {
            ScheduleKind::Constant => Ok(()),
            ScheduleKind::DiminishingBounded | ScheduleKind::DiminishingHorizon | ScheduleKind::StronglyConvex => {
                if !(self.c > 0.0) {
                    return Err(Error::InvalidParameter { name: "c", value: self.c, requirement: "c > 0" });
                }
                match self.kind {
                    ScheduleKind::DiminishingHorizon => match self.horizon {
                        Some(k) if k >= 1 => Ok(()),
                        Some(_) => Err(Error::InvalidParameter { name: "horizon", value: 0.0, requirement: "K >= 1" }),
                        None => Err(Error::MissingScheduleField("horizon")),
                    },
                    ScheduleKind::StronglyConvex => match self.mu {
                        Some(mu) if mu > 0.0 => Ok(()),
                        Some(mu) => Err(Error::InvalidParameter { name: "mu", value: mu, requirement: "mu > 0" }),
                        None => Err(Error::MissingScheduleField("mu")),
                    },
                    _ => Ok(()),
                }
            }
        }
    }
}

/// Returns `(alpha_k, eta_k)`. The constant schedule reports `eta_k = 0`.
pub fn schedule_step(s: &StepsizeSchedule, k: usize) -> Result<(f64, f64)> {
    s.validate()?;
    let (alpha, eta) = match s.kind {
        ScheduleKind::Constant => (s.alpha_bar, 0.0),
        ScheduleKind::DiminishingBounded => {
            let r = libm::sqrt(k as f64);
            (1.0 / (s.c + r), 1.0 + r)
        }
        ScheduleKind::DiminishingHorizon => {
            let r = libm::sqrt((s.horizon.unwrap_or(1) - 1) as f64);
            (1.0 / (s.c + r), 1.0 + r)
        }
        ScheduleKind::StronglyConvex => {
            let t = s.mu.unwrap_or(0.0) * (k as f64 + 1.0);
            (1.0 / (s.c + t), t)
        }
    };
    Ok((alpha.min(s.alpha_bar), eta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        assert_eq!(schedule_step(&StepsizeSchedule::diminishing(2.0), 4).unwrap(), (0.25, 3.0));
        assert_eq!(schedule_step(&StepsizeSchedule::constant(0.3), 17).unwrap(), (0.3, 0.0));
        let (a, e) = schedule_step(&StepsizeSchedule::strongly_convex(2.0, 1.0), 0).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-16 && e == 1.0);
        let h = StepsizeSchedule::horizon(2.0, 10);
        assert_eq!(schedule_step(&h, 0).unwrap(), schedule_step(&h, 9).unwrap());
        assert_eq!(schedule_step(&h, 0).unwrap(), (0.2, 4.0));
    }

    #[test]
    fn missing_fields() {
        let mut s = StepsizeSchedule::strongly_convex(2.0, 1.0);
        s.mu = None;
        assert_eq!(schedule_step(&s, 0), Err(Error::MissingScheduleField("mu")));
        let mut h = StepsizeSchedule::horizon(2.0, 5);
        h.horizon = None;
        assert_eq!(schedule_step(&h, 0), Err(Error::MissingScheduleField("horizon")));
    }
}
