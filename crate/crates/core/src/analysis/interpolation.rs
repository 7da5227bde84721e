use std::fmt::Write as _;

use serde::Serialize;

use crate::balancer::{BalancingResult, Guarantee};
use crate::error::Result;
use crate::json;
use crate::linalg::C64;
use crate::system_model::{markov_parameters, moments, LtiSystem};
use crate::tableau::{ExpansionPointSet, PointLocation};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpolationEntry {
    pub point: PointLocation,
    /// Moment index at a finite point, Markov index (starting at 1) at ∞.
    pub derivative_order: usize,
    #[serde(with = "json::complex")]
    pub original_value: C64,
    #[serde(with = "json::complex")]
    pub reduced_value: C64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpolationReport {
    pub entries: Vec<InterpolationEntry>,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub guarantee: Guarantee,
}

impl InterpolationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<28} {:>5} {:>26} {:>26} {:>10}", "point", "order", "original", "reduced", "rel.err");
        for e in &self.entries {
            let point = match e.point {
                PointLocation::Finite(z) => format!("{:.6}{:+.6}i", z.re, z.im),
                PointLocation::Infinity => "inf".to_string(),
            };
            let _ = writeln!(
                out,
                "{:<28} {:>5} {:>26} {:>26} {:>10.2e}",
                point,
                e.derivative_order,
                format!("{:.6e}{:+.6e}i", e.original_value.re, e.original_value.im),
                format!("{:.6e}{:+.6e}i", e.reduced_value.re, e.reduced_value.im),
                e.relative_error
            );
        }
        let _ = writeln!(out, "max relative error {:.3e} (tol {:.1e}): {}", self.max_relative_error, self.tolerance, if self.passed { "PASS" } else { "FAIL" });
        if let Guarantee::OutsideGuarantees(reason) = &self.guarantee {
            let _ = writeln!(out, "outside interpolation guarantees: {reason}");
        }
        out
    }
}

fn rel_err(g: C64, gh: C64) -> f64 {
    (g - gh).norm() / g.norm().max(1.0)
}

/// Compares moments of the original and reduced model at every predicted
/// point, as many as the combined input/output multiplicity demands.
pub fn verify_interpolation(sys: &LtiSystem, result: &BalancingResult, points: &ExpansionPointSet, tol: f64) -> Result<InterpolationReport> {
    let mut entries = Vec::new();
    for (loc, mult) in points.combined() {
        match loc {
            PointLocation::Finite(s0) => {
                let full = moments(sys, s0, mult)?;
                let red = moments(&result.reduced, s0, mult)?;
                for (j, (g, gh)) in full.into_iter().zip(red).enumerate() {
                    entries.push(InterpolationEntry { point: loc, derivative_order: j, original_value: g, reduced_value: gh, relative_error: rel_err(g, gh) });
                }
            }
            PointLocation::Infinity => {
                let full = markov_parameters(sys, mult);
                let red = markov_parameters(&result.reduced, mult);
                for (j, (g, gh)) in full.into_iter().zip(red).enumerate() {
                    entries.push(InterpolationEntry { point: loc, derivative_order: j + 1, original_value: g, reduced_value: gh, relative_error: rel_err(g, gh) });
                }
            }
        }
    }
    let max_relative_error = entries.iter().map(|e| e.relative_error).fold(0.0, f64::max);
    Ok(InterpolationReport { entries, max_relative_error, tolerance: tol, passed: max_relative_error <= tol, guarantee: result.guarantee.clone() })
}
