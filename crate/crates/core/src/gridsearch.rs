//! Enumeration of the (ξ, ω, α) grid.
//!
//! Every candidate triple is integrated, allocated and checked for validity
//! independently, so evaluation fans out across threads when the `parallel`
//! feature is on. Output order is always lexicographic in (ξ, ω, α).

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::archgen::{
    self, allocate, is_valid, keeps_mass, realize, ArchitectureSpec, FeatureAllocation,
    NetworkTemplate, ShapeClass, DEFAULT_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::par::{map_ordered, Execution};
use crate::skewnorm::{bin_masses_with, BinConvention, SkewNormalParams, DEFAULT_SUBDIVISIONS};

/// Inclusive arithmetic range `min, min + step, …, max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridRange {
    pub const fn new(min: f64, max: f64, step: f64) -> Self {
        GridRange { min, max, step }
    }

    pub fn single(value: f64) -> Self {
        GridRange {
            min: value,
            max: value,
            step: 1.0,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.step.is_finite()) {
            return Err(Error::domain(format!("{name} range must be finite")));
        }
        if self.step <= 0.0 {
            return Err(Error::domain(format!("{name} step must be positive")));
        }
        if self.min > self.max {
            return Err(Error::domain(format!("{name} range has min > max")));
        }
        Ok(())
    }

    #[allow(clippy::len_without_is_empty)] // never empty once validated
    pub fn len(&self) -> usize {
        // tolerate representation error in (max - min) / step
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    /// Values computed from integer indices, so no drift accumulates.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.min + k as f64 * self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub xi_range: GridRange,
    pub omega_range: GridRange,
    pub alpha_range: GridRange,
    pub budget: u64,
    pub tolerance: f64,
    pub template_name: String,
    pub subdivisions: usize,
    pub bins: BinConvention,
    /// Reject triples where a layer's scaled mass rounds to zero features.
    pub reject_collapsed: bool,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.xi_range.validate("xi")?;
        self.omega_range.validate("omega")?;
        self.alpha_range.validate("alpha")?;
        if self.omega_range.min <= 0.0 {
            return Err(Error::domain("omega range must be positive"));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::domain(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        if self.subdivisions == 0 {
            return Err(Error::domain("subdivisions must be at least 1"));
        }
        Ok(())
    }

    pub fn template(&self) -> Result<NetworkTemplate> {
        archgen::template_by_name(&self.template_name)
    }

    /// Every (ξ, ω, α) in lexicographic order.
    pub fn triples(&self) -> Vec<SkewNormalParams> {
        let mut out = Vec::with_capacity(self.candidate_count());
        for xi in self.xi_range.values() {
            for omega in self.omega_range.values() {
                for alpha in self.alpha_range.values() {
                    out.push(SkewNormalParams { xi, omega, alpha });
                }
            }
        }
        out
    }

    pub fn candidate_count(&self) -> usize {
        self.xi_range.len() * self.omega_range.len() * self.alpha_range.len()
    }

    fn accepts(&self, allocation: &FeatureAllocation) -> bool {
        if self.reject_collapsed {
            is_valid(allocation, self.tolerance)
        } else {
            keeps_mass(allocation, self.tolerance)
        }
    }
}

/// ξ over `[1, 16]` step 1, ω over `[0.5, 5.5]` step 0.5, α over
/// `[-40, 40]` step 4, on the 16-slot template with its VGG-D budget.
pub fn default_grid() -> GridSpec {
    grid_for_template(&archgen::default_vgg16_template())
        .expect("built-in template has a reference budget")
}

/// Default ω/α ranges with ξ spanning every layer of `template`.
pub fn grid_for_template(template: &NetworkTemplate) -> Result<GridSpec> {
    Ok(GridSpec {
        xi_range: GridRange::new(1.0, template.slot_count() as f64, 1.0),
        omega_range: GridRange::new(0.5, 5.5, 0.5),
        alpha_range: GridRange::new(-40.0, 40.0, 4.0),
        budget: archgen::vgg_budget(template)?,
        tolerance: DEFAULT_TOLERANCE,
        template_name: template.name.clone(),
        subdivisions: DEFAULT_SUBDIVISIONS,
        bins: BinConvention::default(),
        reject_collapsed: true,
    })
}

/// Outcome for one candidate triple, kept or not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub params: SkewNormalParams,
    pub allocation: FeatureAllocation,
    pub valid: bool,
}

fn prepare(grid: &GridSpec) -> Result<NetworkTemplate> {
    grid.validate()?;
    let template = grid.template()?;
    template.validate()?;
    if grid.budget < template.slot_count() as u64 {
        return Err(Error::domain(format!(
            "budget {} cannot cover the {} slots of `{}`",
            grid.budget,
            template.slot_count(),
            template.name
        )));
    }
    Ok(template)
}

fn evaluate_one(grid: &GridSpec, slots: usize, params: SkewNormalParams) -> Result<Candidate> {
    let masses = bin_masses_with(&params, slots, grid.subdivisions, grid.bins)?;
    let allocation = allocate(&masses, grid.budget)?;
    let valid = grid.accepts(&allocation);
    Ok(Candidate {
        params,
        allocation,
        valid,
    })
}

/// Evaluate every candidate triple, recording captured mass and the verdict.
pub fn evaluate(grid: &GridSpec) -> Result<Vec<Candidate>> {
    evaluate_with(grid, Execution::default())
}

pub fn evaluate_with(grid: &GridSpec, execution: Execution) -> Result<Vec<Candidate>> {
    let template = prepare(grid)?;
    let slots = template.slot_count();
    map_ordered(grid.triples(), execution, |params| {
        evaluate_one(grid, slots, params)
    })
    .into_iter()
    .collect()
}

/// Valid architectures of the grid, realized, in (ξ, ω, α) order.
pub fn enumerate(grid: &GridSpec) -> Result<Vec<ArchitectureSpec>> {
    enumerate_with(grid, Execution::default())
}

pub fn enumerate_with(grid: &GridSpec, execution: Execution) -> Result<Vec<ArchitectureSpec>> {
    let template = prepare(grid)?;
    let slots = template.slot_count();
    let outcomes = map_ordered(grid.triples(), execution, |params| {
        let candidate = evaluate_one(grid, slots, params)?;
        if candidate.valid {
            realize(&template, &candidate.params, &candidate.allocation).map(Some)
        } else {
            Ok(None)
        }
    });
    let mut specs = Vec::new();
    for outcome in outcomes {
        if let Some(spec) = outcome? {
            specs.push(spec);
        }
    }
    Ok(specs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub xi: f64,
    pub omega: f64,
    pub alpha: f64,
    pub arch_id: String,
    pub captured_mass: f64,
    pub parameter_count: u64,
    pub flop_count: u64,
    pub shape: ShapeClass,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub rows: Vec<SummaryRow>,
}

impl GridSummary {
    pub fn shape_tally(&self) -> BTreeMap<ShapeClass, usize> {
        let mut tally: BTreeMap<ShapeClass, usize> =
            ShapeClass::ALL.iter().map(|&s| (s, 0)).collect();
        for row in &self.rows {
            *tally.entry(row.shape).or_default() += 1;
        }
        tally
    }

    /// CSV with header
    /// `xi,omega,alpha,arch_id,captured_mass,parameter_count,flop_count,shape,counts`;
    /// `counts` is `;`-separated.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        out.write_record([
            "xi",
            "omega",
            "alpha",
            "arch_id",
            "captured_mass",
            "parameter_count",
            "flop_count",
            "shape",
            "counts",
        ])?;
        for row in &self.rows {
            let counts = row
                .counts
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(";");
            out.write_record([
                row.xi.to_string(),
                row.omega.to_string(),
                row.alpha.to_string(),
                row.arch_id.clone(),
                row.captured_mass.to_string(),
                row.parameter_count.to_string(),
                row.flop_count.to_string(),
                row.shape.to_string(),
                counts,
            ])?;
        }
        out.flush().map_err(|e| Error::io("<summary>", e))?;
        Ok(())
    }
}

pub(crate) fn cmp_params(a: &SkewNormalParams, b: &SkewNormalParams) -> std::cmp::Ordering {
    a.xi.total_cmp(&b.xi)
        .then(a.omega.total_cmp(&b.omega))
        .then(a.alpha.total_cmp(&b.alpha))
}

/// One row per architecture, sorted by (ξ, ω, α).
pub fn summarize(specs: &[ArchitectureSpec]) -> Result<GridSummary> {
    if specs.is_empty() {
        return Err(Error::Empty("cannot summarize an empty architecture list"));
    }
    let mut rows: Vec<SummaryRow> = specs
        .iter()
        .map(|spec| SummaryRow {
            xi: spec.params.xi,
            omega: spec.params.omega,
            alpha: spec.params.alpha,
            arch_id: spec.arch_id.clone(),
            captured_mass: spec.allocation.captured_mass,
            parameter_count: spec.parameter_count,
            flop_count: spec.flop_count,
            shape: spec.shape_class(),
            counts: spec.allocation.counts.clone(),
        })
        .collect();
    rows.sort_by(|a, b| {
        cmp_params(
            &SkewNormalParams {
                xi: a.xi,
                omega: a.omega,
                alpha: a.alpha,
            },
            &SkewNormalParams {
                xi: b.xi,
                omega: b.omega,
                alpha: b.alpha,
            },
        )
    });
    Ok(GridSummary { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let grid = default_grid();
        assert_eq!(grid.xi_range.len(), 16);
        assert_eq!(grid.omega_range.len(), 11);
        assert_eq!(grid.alpha_range.len(), 21);
        assert_eq!(grid.candidate_count(), 3696);
        assert_eq!(grid.triples().len(), 3696);
        assert_eq!(grid.budget, 16512);
        assert_eq!(grid.tolerance, 0.05);
        assert_eq!(grid.template_name, "vgg16");
    }

    #[test]
    fn range_values_are_drift_free() {
        let r = GridRange::new(0.5, 5.5, 0.5);
        let values: Vec<f64> = r.values().collect();
        assert_eq!(values.len(), 11);
        assert_eq!(values[10], 5.5);
        let tenth = GridRange::new(0.0, 1.0, 0.1);
        assert_eq!(tenth.len(), 11);
        assert_eq!(tenth.values().last().unwrap(), 1.0);
    }

    #[test]
    fn triples_are_lexicographic() {
        let grid = default_grid();
        let triples = grid.triples();
        assert!(triples
            .windows(2)
            .all(|w| cmp_params(&w[0], &w[1]) == std::cmp::Ordering::Less));
    }

    #[test]
    fn grid_validation() {
        let mut grid = default_grid();
        grid.tolerance = 1.0;
        assert!(grid.validate().is_err());
        let mut grid = default_grid();
        grid.alpha_range.step = 0.0;
        assert!(grid.validate().is_err());
        let mut grid = default_grid();
        grid.xi_range = GridRange::new(5.0, 1.0, 1.0);
        assert!(grid.validate().is_err());
        let mut grid = default_grid();
        grid.omega_range.min = 0.0;
        assert!(grid.validate().is_err());
    }

    #[test]
    fn template_budget_mismatch() {
        let mut grid = default_grid();
        grid.budget = 10;
        assert!(enumerate(&grid).is_err());
        let mut grid = default_grid();
        grid.template_name = "alexnet".into();
        assert!(matches!(enumerate(&grid), Err(Error::UnknownTemplate(_))));
    }

    #[test]
    fn negative_skew_at_first_layer_is_filtered() {
        let mut grid = default_grid();
        grid.xi_range = GridRange::single(1.0);
        grid.omega_range = GridRange::single(2.0);
        grid.alpha_range = GridRange::single(-40.0);
        let candidates = evaluate(&grid).unwrap();
        assert_eq!(candidates.len(), 1);
        assert!(!candidates[0].valid);
        assert!(candidates[0].allocation.captured_mass < 0.5);
        assert!(enumerate(&grid).unwrap().is_empty());
    }

    #[test]
    fn summarize_rejects_empty() {
        assert!(matches!(summarize(&[]), Err(Error::Empty(_))));
    }
}
