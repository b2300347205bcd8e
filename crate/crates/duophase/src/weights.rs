//! Minimization of the first Rayleigh threshold over a finite family of
//! bounded weights.
//!
//! Every member gets a full multi-start solve; the previous argmin is also
//! passed along as a warm start, which only speeds things up. The table keeps
//! family order, ties break toward the first-listed member.

use crate::energy::ProblemSpec;
use crate::error::{Error, Result};
use crate::mesh::GridFunction;
use crate::solver::{minimize_r1_warm, QuotientConfig};
use std::sync::Arc;

/// Named weights on a shared mesh with a finite uniform bound.
#[derive(Debug, Clone)]
pub struct WeightFamily {
    entries: Vec<(String, GridFunction)>,
}

impl WeightFamily {
    pub fn new(entries: Vec<(String, GridFunction)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("weight family must be nonempty".into()));
        }
        let mesh = entries[0].1.mesh();
        for (name, w) in &entries {
            if !Arc::ptr_eq(mesh, w.mesh()) {
                return Err(Error::Domain(format!(
                    "weight `{name}` lives on a different mesh"
                )));
            }
        }
        Ok(WeightFamily { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Uniform bound M: the largest nodal magnitude across the family.
    pub fn bound(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, w)| w.max_abs())
            .fold(0.0, f64::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &GridFunction)> {
        self.entries.iter().map(|(n, w)| (n.as_str(), w))
    }
}

/// lambda*(w): substitute the weight into the template problem and minimize
/// the first Rayleigh quotient.
pub fn lambda_star_of(
    w: &GridFunction,
    spec_template: &ProblemSpec,
    cfg: &QuotientConfig,
) -> Result<f64> {
    let spec = spec_template.with_weight(w.clone())?;
    Ok(minimize_r1_warm(&spec, cfg, None)?.value)
}

/// One table row of an optimization run.
#[derive(Debug, Clone)]
pub struct WeightRow {
    pub name: String,
    pub lambda_star: f64,
    pub iterations: usize,
    pub restarts_used: usize,
}

/// Optimization result: the argmin member and the full evaluation table in
/// family order.
#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub winner: String,
    pub value: f64,
    pub table: Vec<WeightRow>,
}

/// Evaluate lambda*(w) for every family member and return the argmin.
pub fn optimize(
    family: &WeightFamily,
    spec_template: &ProblemSpec,
    cfg: &QuotientConfig,
) -> Result<OptimizeOutcome> {
    let mut table = Vec::with_capacity(family.len());
    let mut best: Option<(usize, f64)> = None;
    let mut warm: Option<GridFunction> = None;
    for (idx, (name, w)) in family.iter().enumerate() {
        let spec = spec_template.with_weight(w.clone())?;
        let result = minimize_r1_warm(&spec, cfg, warm.as_ref())?;
        table.push(WeightRow {
            name: name.to_string(),
            lambda_star: result.value,
            iterations: result.iterations,
            restarts_used: result.restarts_used,
        });
        let improved = match best {
            None => true,
            Some((_, v)) => result.value < v,
        };
        if improved {
            best = Some((idx, result.value));
            warm = Some(result.minimizer);
        }
    }
    let (widx, value) = best.expect("nonempty family");
    Ok(OptimizeOutcome {
        winner: table[widx].name.clone(),
        value,
        table,
    })
}
