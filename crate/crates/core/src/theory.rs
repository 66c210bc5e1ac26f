//! Parameter-budget calculators for the asymptotic complexity bounds.
//!
//! Every bound has the shape `C · ε^(−p)`; the constant `C` is unknown in
//! general and supplied by the caller. The results illustrate how budgets
//! scale with `ε`, not absolute requirements.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityScenario {
    pub m1: u32,
    pub m2: u32,
    pub r: u32,
    pub eps: f64,
    pub c: f64,
}

impl ComplexityScenario {
    pub fn new(m1: u32, m2: u32, r: u32, eps: f64) -> Result<Self> {
        let s = Self { m1, m2, r, eps, c: 1.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn with_constant(mut self, c: f64) -> Result<Self> {
        self.c = c;
        self.validate()?;
        Ok(self)
    }

    pub fn m(&self) -> u32 {
        self.m1 + self.m2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if self.r < 1 || self.m1 < 1 || self.m2 < 1 {
            return Err(Error::invalid("r, m1 and m2 must be at least 1"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("constant C must be positive, got {}", self.c)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bound {
    /// A single network on the joint input: `ε^(−m/r)`.
    FullJoint,
    /// The primary network of a hypernetwork: `ε^(−m₁/r)`.
    HyperPrimary,
    /// Embedding method with a constant embedding size: `ε^(−(m₁+m₂))`.
    EmbedPrimaryConstK,
    /// Embedding method with a large embedding: `ε^(−min(m, 2m₁))`.
    EmbedPrimaryBigK,
    /// Hypernetwork overall: `ε^(−m₂/r) + ε^(−m₁/r)`.
    HyperTotal,
}

pub const ALL_BOUNDS: [Bound; 5] = [
    Bound::FullJoint,
    Bound::HyperPrimary,
    Bound::EmbedPrimaryConstK,
    Bound::EmbedPrimaryBigK,
    Bound::HyperTotal,
];

impl Bound {
    pub fn name(self) -> &'static str {
        match self {
            Bound::FullJoint => "full-joint",
            Bound::HyperPrimary => "hyper-primary",
            Bound::EmbedPrimaryConstK => "embed-primary-constk",
            Bound::EmbedPrimaryBigK => "embed-primary-bigk",
            Bound::HyperTotal => "hyper-total",
        }
    }

    /// Embedding bounds are only established for first-order smoothness.
    pub fn requires_r1(self) -> bool {
        matches!(self, Bound::EmbedPrimaryConstK | Bound::EmbedPrimaryBigK)
    }

    /// The exponent `p` of `ε^(−p)`; for [`Bound::HyperTotal`] the larger of
    /// the two terms' exponents.
    pub fn exponent(self, s: &ComplexityScenario) -> f64 {
        let (m1, m2, m, r) = (f64::from(s.m1), f64::from(s.m2), f64::from(s.m()), f64::from(s.r));
        match self {
            Bound::FullJoint => m / r,
            Bound::HyperPrimary => m1 / r,
            Bound::EmbedPrimaryConstK => m1 + m2,
            Bound::EmbedPrimaryBigK => m.min(2.0 * m1),
            Bound::HyperTotal => m1.max(m2) / r,
        }
    }
}

impl FromStr for Bound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_BOUNDS
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown bound {s:?}")))
    }
}

/// `ceil(v)`, except values within relative `1e-9` of an integer snap to it
/// so that e.g. `0.1^(−2)` gives 100 rather than 101.
fn ceil_count(v: f64) -> Result<u128> {
    if !v.is_finite() || v >= u128::MAX as f64 {
        return Err(Error::invalid(format!("parameter count {v:e} does not fit in an integer")));
    }
    let r = v.round();
    let out = if (v - r).abs() <= 1e-9 * v.max(1.0) { r } else { v.ceil() };
    Ok(out as u128)
}

pub fn predicted_min_params(s: &ComplexityScenario, bound: Bound) -> Result<u128> {
    s.validate()?;
    if bound.requires_r1() && s.r != 1 {
        return Err(Error::invalid(format!(
            "the {} bound is only established for r = 1 (got r = {})",
            bound.name(),
            s.r
        )));
    }
    let r = f64::from(s.r);
    let v = match bound {
        Bound::HyperTotal => {
            s.c * (s.eps.powf(-f64::from(s.m2) / r) + s.eps.powf(-f64::from(s.m1) / r))
        }
        b => s.c * s.eps.powf(-b.exponent(s)),
    };
    ceil_count(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRow {
    pub eps: f64,
    /// One entry per [`ALL_BOUNDS`]; `None` where the bound does not apply.
    pub counts: [Option<u128>; 5],
}

pub fn budget_table(s: &ComplexityScenario, eps_grid: &[f64]) -> Result<Vec<BudgetRow>> {
    if eps_grid.is_empty() {
        return Err(Error::invalid("empty eps grid"));
    }
    eps_grid
        .iter()
        .map(|&eps| {
            let sc = ComplexityScenario { eps, ..*s };
            let mut counts = [None; 5];
            for (slot, b) in counts.iter_mut().zip(ALL_BOUNDS) {
                if !(b.requires_r1() && s.r != 1) {
                    *slot = Some(predicted_min_params(&sc, b)?);
                }
            }
            Ok(BudgetRow { eps, counts })
        })
        .collect()
}

pub fn budget_csv(rows: &[BudgetRow]) -> String {
    let mut out = String::from("eps");
    for b in ALL_BOUNDS {
        out.push(',');
        out.push_str(b.name());
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{}", row.eps);
        for c in row.counts {
            match c {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let s = ComplexityScenario::new(1, 1, 1, 0.1).unwrap();
        assert_eq!(predicted_min_params(&s, Bound::HyperPrimary).unwrap(), 10);
        assert_eq!(predicted_min_params(&s, Bound::EmbedPrimaryConstK).unwrap(), 100);
        let s = ComplexityScenario::new(1, 3, 1, 0.1).unwrap();
        assert_eq!(predicted_min_params(&s, Bound::EmbedPrimaryBigK).unwrap(), 100);
        assert_eq!(predicted_min_params(&s, Bound::FullJoint).unwrap(), 10_000);
        assert_eq!(predicted_min_params(&s, Bound::HyperTotal).unwrap(), 1010);
    }

    #[test]
    fn embed_bounds_need_r1() {
        let s = ComplexityScenario::new(2, 2, 2, 0.1).unwrap();
        let err = predicted_min_params(&s, Bound::EmbedPrimaryConstK).unwrap_err();
        assert!(err.to_string().contains("r = 1"));
        assert!(predicted_min_params(&s, Bound::HyperPrimary).is_ok());
        let rows = budget_table(&s, &[0.1]).unwrap();
        assert_eq!(rows[0].counts[2], None);
    }

    #[test]
    fn invalid_scenarios() {
        assert!(ComplexityScenario::new(1, 1, 1, 1.0).is_err());
        assert!(ComplexityScenario::new(0, 1, 1, 0.5).is_err());
        assert!(ComplexityScenario::new(1, 1, 0, 0.5).is_err());
        assert!(budget_table(&ComplexityScenario::new(1, 1, 1, 0.5).unwrap(), &[]).is_err());
    }

    #[test]
    fn table_shape_and_monotonicity() {
        let s = ComplexityScenario::new(2, 3, 1, 0.5).unwrap();
        let rows = budget_table(&s, &[0.5, 0.1, 0.01]).unwrap();
        for w in rows.windows(2) {
            for (a, b) in w[0].counts.iter().zip(&w[1].counts) {
                assert!(b.unwrap() >= a.unwrap());
            }
        }
        let csv = budget_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("eps,full-joint,hyper-primary,"));
        assert_eq!(budget_table(&s, &[0.2]).unwrap().len(), 1);
    }

    #[test]
    fn hyper_total_vanishes_against_joint() {
        let s = ComplexityScenario::new(1, 1, 1, 0.5).unwrap();
        let ratio = |eps: f64| {
            let sc = ComplexityScenario { eps, ..s };
            predicted_min_params(&sc, Bound::HyperTotal).unwrap() as f64
                / predicted_min_params(&sc, Bound::FullJoint).unwrap() as f64
        };
        assert!(ratio(1e-4) < ratio(1e-2) && ratio(1e-2) < ratio(1e-1));
        assert!(ratio(1e-6) < 1e-5);
    }
}
