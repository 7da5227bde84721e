//! Butcher tableaus, their validity checks, the multi-step composite
//! tableau and the predicted interpolation points.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::JsonComplex;
use crate::linalg::{self, CMat, CVec, C64};
use crate::system_model::LtiSystem;

const EIG_CONDITION_TOL: f64 = 1e-12;
/// Two points p, q are the same expansion point when |p - q| ≤ tol·max(1, |p|).
pub const POINT_MERGE_TOL: f64 = 1e-10;

/// Runge-Kutta data: stage matrix Λ, solution weights β, nonnegative gramian
/// weights β̃ and nodes γ.
///
/// γ is carried for completeness only. The gramian ODE is autonomous, so the
/// nodes never enter the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    lambda: CMat,
    beta: CVec,
    beta_tilde: DVector<f64>,
    gamma: DVector<f64>,
}

impl ButcherTableau {
    pub fn new(lambda: CMat, beta: CVec, beta_tilde: DVector<f64>, gamma: DVector<f64>) -> Result<Self> {
        let s = lambda.nrows();
        if s == 0 {
            return Err(Error::InvalidTableau("at least one stage required".into()));
        }
        if lambda.ncols() != s {
            return Err(Error::InvalidTableau(format!("stage matrix is {}x{}", s, lambda.ncols())));
        }
        if beta.len() != s || beta_tilde.len() != s || gamma.len() != s {
            return Err(Error::InvalidTableau(format!(
                "weight lengths β={}, β̃={}, γ={} do not match s={s}",
                beta.len(),
                beta_tilde.len(),
                gamma.len()
            )));
        }
        if beta_tilde.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidTableau("β̃ entries must be finite and nonnegative".into()));
        }
        if lambda.iter().chain(beta.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidTableau("non-finite entry".into()));
        }
        Ok(ButcherTableau { lambda, beta, beta_tilde, gamma })
    }

    /// β̃ := β, which requires β real and nonnegative.
    pub fn with_classical_weights(lambda: CMat, beta: CVec, gamma: DVector<f64>) -> Result<Self> {
        let beta_tilde = classical_beta_tilde(&beta)
            .ok_or_else(|| Error::InvalidTableau("β is not real nonnegative; β̃ must be given explicitly".into()))?;
        Self::new(lambda, beta, beta_tilde, gamma)
    }

    pub fn from_real(lambda: &[&[f64]], beta: &[f64], gamma: &[f64]) -> Result<Self> {
        let s = lambda.len();
        let lam = CMat::from_fn(s, s, |i, j| C64::new(lambda[i][j], 0.0));
        let b = CVec::from_iterator(beta.len(), beta.iter().map(|&x| C64::new(x, 0.0)));
        Self::with_classical_weights(lam, b, DVector::from_column_slice(gamma))
    }

    pub fn stages(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn lambda(&self) -> &CMat {
        &self.lambda
    }

    pub fn beta(&self) -> &CVec {
        &self.beta
    }

    pub fn beta_tilde(&self) -> &DVector<f64> {
        &self.beta_tilde
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    pub fn with_beta_tilde(&self, beta_tilde: DVector<f64>) -> Result<Self> {
        Self::new(self.lambda.clone(), self.beta.clone(), beta_tilde, self.gamma.clone())
    }

    /// Eigenvalues of Λ; exact for triangular Λ.
    pub fn eigenvalues(&self) -> Vec<C64> {
        linalg::eigenvalues(&self.lambda)
    }

    pub fn is_explicit(&self) -> bool {
        linalg::is_lower_triangular(&self.lambda) && self.lambda.diagonal().iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    pub fn to_json(&self) -> TableauJson {
        TableauJson {
            s: self.stages(),
            lambda: self
                .lambda
                .row_iter()
                .map(|r| r.iter().map(|&z| ComplexEntry::Complex(z.into())).collect())
                .collect(),
            beta: self.beta.iter().map(|&z| ComplexEntry::Complex(z.into())).collect(),
            beta_tilde: Some(self.beta_tilde.iter().copied().collect()),
            gamma: Some(self.gamma.iter().copied().collect()),
        }
    }

    pub fn from_json(j: &TableauJson) -> Result<Self> {
        let s = j.s;
        if j.lambda.len() != s || j.lambda.iter().any(|r| r.len() != s) {
            return Err(Error::InvalidTableau(format!("lambda must be {s}x{s}")));
        }
        let lambda = CMat::from_fn(s, s, |i, k| j.lambda[i][k].value());
        let beta = CVec::from_iterator(j.beta.len(), j.beta.iter().map(ComplexEntry::value));
        let gamma = DVector::from_vec(j.gamma.clone().unwrap_or_else(|| vec![0.0; s]));
        match &j.beta_tilde {
            Some(bt) => Self::new(lambda, beta, DVector::from_vec(bt.clone()), gamma),
            None => Self::with_classical_weights(lambda, beta, gamma),
        }
    }
}

fn classical_beta_tilde(beta: &CVec) -> Option<DVector<f64>> {
    beta.iter()
        .all(|z| z.im == 0.0 && z.re >= 0.0)
        .then(|| DVector::from_iterator(beta.len(), beta.iter().map(|z| z.re)))
}

/// Entry in the JSON tableau format: `{"re":..,"im":..}` or a bare number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexEntry {
    Complex(JsonComplex),
    Real(f64),
}

impl ComplexEntry {
    fn value(&self) -> C64 {
        match *self {
            ComplexEntry::Complex(z) => z.into(),
            ComplexEntry::Real(x) => C64::new(x, 0.0),
        }
    }
}

/// On-disk tableau: `{"s", "lambda", "beta", "beta_tilde", "gamma"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableauJson {
    pub s: usize,
    pub lambda: Vec<Vec<ComplexEntry>>,
    pub beta: Vec<ComplexEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_tilde: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinTableau {
    ExplicitEuler,
    BackwardEuler,
    ImplicitMidpoint,
    GaussLegendre2,
    RadauIA2,
}

impl BuiltinTableau {
    pub const ALL: [BuiltinTableau; 5] = [
        BuiltinTableau::ExplicitEuler,
        BuiltinTableau::BackwardEuler,
        BuiltinTableau::ImplicitMidpoint,
        BuiltinTableau::GaussLegendre2,
        BuiltinTableau::RadauIA2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinTableau::ExplicitEuler => "explicit-euler",
            BuiltinTableau::BackwardEuler => "backward-euler",
            BuiltinTableau::ImplicitMidpoint => "implicit-midpoint",
            BuiltinTableau::GaussLegendre2 => "gauss-legendre-2",
            BuiltinTableau::RadauIA2 => "radau-ia-2",
        }
    }

    pub fn tableau(self) -> ButcherTableau {
        let r3 = 3f64.sqrt();
        let t = match self {
            BuiltinTableau::ExplicitEuler => ButcherTableau::from_real(&[&[0.0]], &[1.0], &[0.0]),
            BuiltinTableau::BackwardEuler => ButcherTableau::from_real(&[&[1.0]], &[1.0], &[1.0]),
            BuiltinTableau::ImplicitMidpoint => ButcherTableau::from_real(&[&[0.5]], &[1.0], &[0.5]),
            BuiltinTableau::GaussLegendre2 => ButcherTableau::from_real(
                &[&[0.25, 0.25 - r3 / 6.0], &[0.25 + r3 / 6.0, 0.25]],
                &[0.5, 0.5],
                &[0.5 - r3 / 6.0, 0.5 + r3 / 6.0],
            ),
            BuiltinTableau::RadauIA2 => {
                ButcherTableau::from_real(&[&[0.25, -0.25], &[0.25, 5.0 / 12.0]], &[0.25, 0.75], &[0.0, 2.0 / 3.0])
            }
        };
        t.expect("built-in tableaus are valid")
    }
}

impl fmt::Display for BuiltinTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinTableau {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Ok(match key.as_str() {
            "explicit-euler" | "euler" | "forward-euler" => BuiltinTableau::ExplicitEuler,
            "backward-euler" | "implicit-euler" => BuiltinTableau::BackwardEuler,
            "implicit-midpoint" | "midpoint" | "gauss-legendre-1" | "gl1" => BuiltinTableau::ImplicitMidpoint,
            "gauss-legendre-2" | "gl2" | "hammer-hollingsworth" => BuiltinTableau::GaussLegendre2,
            "radau-ia-2" | "radau-ia2" | "radau2" | "radauia2" => BuiltinTableau::RadauIA2,
            _ => return Err(Error::UnknownTableau(s.to_string())),
        })
    }
}

/// Built-in tableau by name.
pub fn builtin(name: &str) -> Result<ButcherTableau> {
    Ok(name.parse::<BuiltinTableau>()?.tableau())
}

/// Built-in name, or a path to a JSON tableau file.
pub fn resolve_tableau(name_or_path: &str) -> Result<ButcherTableau> {
    match name_or_path.parse::<BuiltinTableau>() {
        Ok(b) => Ok(b.tableau()),
        Err(_) if Path::new(name_or_path).exists() => {
            let text = std::fs::read_to_string(name_or_path).map_err(|e| Error::io(name_or_path, e))?;
            ButcherTableau::from_json(&serde_json::from_str(&text)?)
        }
        Err(e) => Err(e),
    }
}

/// Lower triangular DIRK tableau whose single step reproduces low-rank ADI
/// with parameters α_i = -1/μ_i. Diagonal μ_i, column ℓ below the diagonal
/// filled with 2·Re μ_ℓ, and β = β̃ = 2·Re μ.
pub fn dirk_from_adi_params(mu: &[C64]) -> Result<ButcherTableau> {
    if mu.is_empty() {
        return Err(Error::InvalidTableau("at least one ADI parameter required".into()));
    }
    if let Some(bad) = mu.iter().find(|m| !(m.re > 0.0)) {
        return Err(Error::InvalidAdiParameter(*bad));
    }
    let s = mu.len();
    let weights: Vec<f64> = mu.iter().map(|m| 2.0 * m.re).collect();
    let lambda = CMat::from_fn(s, s, |i, l| match i.cmp(&l) {
        std::cmp::Ordering::Equal => mu[i],
        std::cmp::Ordering::Greater => C64::new(weights[l], 0.0),
        std::cmp::Ordering::Less => C64::new(0.0, 0.0),
    });
    let beta = CVec::from_iterator(s, weights.iter().map(|&w| C64::new(w, 0.0)));
    ButcherTableau::new(lambda, beta, DVector::from_vec(weights), DVector::zeros(s))
}

/// Triples (step j, tableau eigenvalue p, system eigenvalue q) with
/// 1 - ω_j μ_p λ_q = 0 to relative tolerance.
pub fn eig_condition_violations(t: &ButcherTableau, system_eigs: &[C64], steps: &[f64]) -> Vec<(usize, usize, usize)> {
    let mus = t.eigenvalues();
    let mut out = Vec::new();
    for (j, &w) in steps.iter().enumerate() {
        for (p, &mu) in mus.iter().enumerate() {
            for (q, &lam) in system_eigs.iter().enumerate() {
                let prod = mu * lam * w;
                if (C64::new(1.0, 0.0) - prod).norm() <= EIG_CONDITION_TOL * prod.norm().max(1.0) {
                    out.push((j, p, q));
                }
            }
        }
    }
    out
}

/// Whether every stage system I - ω_j μ_p A is nonsingular.
///
/// Above the eigenvalue cap this is decided by sign analysis: for stable A,
/// μ in the closed right half-plane can never satisfy μλ = 1/ω > 0.
/// Other tableaus get a warning and `true`.
pub fn check_eig_condition(t: &ButcherTableau, sys: &LtiSystem, steps: &[f64]) -> bool {
    match sys.eigenvalues() {
        Ok(eigs) => eig_condition_violations(t, eigs, steps).is_empty(),
        Err(_) => {
            if !t.eigenvalues().iter().all(|m| m.re >= 0.0) {
                log::warn!("eigenvalue condition unverified: n = {} above cap and tableau has Re μ < 0", sys.n());
            }
            true
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdiCondition {
    /// Frobenius norm of diag(β)·conj(Λ) + Λᵀ·diag(β) - ββᵀ.
    Residual(f64),
    /// β̃ ≠ β, so the ADI correspondence does not apply.
    NotApplicable,
}

impl AdiCondition {
    /// The residual, +∞ when not applicable.
    pub fn residual(self) -> f64 {
        match self {
            AdiCondition::Residual(r) => r,
            AdiCondition::NotApplicable => f64::INFINITY,
        }
    }
}

pub fn check_adi_condition(t: &ButcherTableau) -> AdiCondition {
    let applicable = t.beta.iter().zip(t.beta_tilde.iter()).all(|(b, bt)| b.im == 0.0 && b.re == *bt);
    if !applicable {
        return AdiCondition::NotApplicable;
    }
    let s = t.stages();
    let m = CMat::from_fn(s, s, |i, j| {
        t.beta[i] * t.lambda[(i, j)].conj() + t.lambda[(j, i)] * t.beta[j] - t.beta[i] * t.beta[j]
    });
    AdiCondition::Residual(m.norm())
}

/// The N-step iteration written as a single step of an Ns-stage method.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeTableau {
    /// Block upper triangular Ns×Ns matrix: ω_jΛᵀ on the diagonal blocks and
    /// ω_j[β,…,β] in every block to the right of them. This is the transpose
    /// of the composite stage matrix.
    pub lambda_hat_t: CMat,
    pub beta_tilde_hat: DVector<f64>,
    pub steps: Vec<f64>,
    pub stage_count: usize,
    pub step_count: usize,
    beta_hat: CVec,
}

impl CompositeTableau {
    /// The composite stage matrix (not transposed).
    pub fn lambda_hat(&self) -> CMat {
        self.lambda_hat_t.transpose()
    }

    /// One-step tableau for use with step size 1. Its β is vec(ω_1β, …, ω_Nβ),
    /// so the propagated solution after the step equals h_N of the N-step run.
    pub fn as_tableau(&self) -> ButcherTableau {
        let ns = self.lambda_hat_t.nrows();
        ButcherTableau::new(self.lambda_hat(), self.beta_hat.clone(), self.beta_tilde_hat.clone(), DVector::zeros(ns))
            .expect("composite of a valid tableau is valid")
    }

    /// Eigenvalues as the union over steps of eig(ω_jΛ) (block triangular spectrum).
    pub fn eigenvalues_by_block(&self, t: &ButcherTableau) -> Vec<C64> {
        let mus = t.eigenvalues();
        self.steps.iter().flat_map(|&w| mus.iter().map(move |&m| m * w)).collect()
    }
}

pub fn validate_steps(steps: &[f64]) -> Result<()> {
    match steps.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
        Some(&bad) => Err(Error::InvalidStepSize(bad)),
        None => Ok(()),
    }
}

pub fn assemble_composite(t: &ButcherTableau, steps: &[f64]) -> Result<CompositeTableau> {
    validate_steps(steps)?;
    let s = t.stages();
    let n_steps = steps.len();
    let ns = s * n_steps;
    let lt = t.lambda.transpose();
    let mut m = CMat::zeros(ns, ns);
    for (j, &w) in steps.iter().enumerate() {
        let r0 = j * s;
        for a in 0..s {
            for b in 0..s {
                m[(r0 + a, r0 + b)] = lt[(a, b)] * w;
            }
            for col in (j + 1) * s..ns {
                m[(r0 + a, col)] = t.beta[a] * w;
            }
        }
    }
    let beta_tilde_hat = DVector::from_iterator(ns, steps.iter().flat_map(|&w| t.beta_tilde.iter().map(move |&b| b * w)));
    let beta_hat = CVec::from_iterator(ns, steps.iter().flat_map(|&w| t.beta.iter().map(move |&b| b * w)));
    Ok(CompositeTableau { lambda_hat_t: m, beta_tilde_hat, steps: steps.to_vec(), stage_count: s, step_count: n_steps, beta_hat })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Input,
    Output,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Input => "input",
            Side::Output => "output",
        })
    }
}

/// A point of ℂ ∪ {∞}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointLocation {
    Finite(C64),
    Infinity,
}

impl PointLocation {
    /// 1/z with 1/0 = ∞.
    pub fn reciprocal(z: C64) -> Self {
        if z == C64::new(0.0, 0.0) {
            PointLocation::Infinity
        } else {
            PointLocation::Finite(C64::new(1.0, 0.0) / z)
        }
    }

    pub fn coincides(&self, other: &PointLocation) -> bool {
        match (self, other) {
            (PointLocation::Infinity, PointLocation::Infinity) => true,
            (PointLocation::Finite(p), PointLocation::Finite(q)) => (p - q).norm() <= POINT_MERGE_TOL * p.norm().max(1.0),
            _ => false,
        }
    }

    pub fn finite(&self) -> Option<C64> {
        match self {
            PointLocation::Finite(z) => Some(*z),
            PointLocation::Infinity => None,
        }
    }
}

impl Serialize for PointLocation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PointLocation::Finite(z) => JsonComplex::from(*z).serialize(s),
            PointLocation::Infinity => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionPoint {
    pub location: PointLocation,
    pub multiplicity: usize,
    pub side: Side,
}

/// Interpolation points with multiplicities. Output-side locations are the
/// actual interpolation points 1/conj(ν).
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ExpansionPointSet {
    pub points: Vec<ExpansionPoint>,
}

impl ExpansionPointSet {
    pub fn total_multiplicity(&self, side: Side) -> usize {
        self.points.iter().filter(|p| p.side == side).map(|p| p.multiplicity).sum()
    }

    pub fn finite_count(&self) -> usize {
        self.points.iter().filter(|p| p.location.finite().is_some()).count()
    }

    pub fn side(&self, side: Side) -> impl Iterator<Item = &ExpansionPoint> {
        self.points.iter().filter(move |p| p.side == side)
    }

    /// Distinct locations across both sides with the summed multiplicity,
    /// i.e. the number of moments (or Markov parameters) expected to match.
    pub fn combined(&self) -> Vec<(PointLocation, usize)> {
        merge_locations(self.points.iter().map(|p| (p.location, p.multiplicity)))
    }

    /// CSV with header `side,re,im,multiplicity`; ∞ is written as `inf,0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("side,re,im,multiplicity\n");
        for p in &self.points {
            match p.location {
                PointLocation::Finite(z) => out.push_str(&format!("{},{},{},{}\n", p.side, z.re, z.im, p.multiplicity)),
                PointLocation::Infinity => out.push_str(&format!("{},inf,0,{}\n", p.side, p.multiplicity)),
            }
        }
        out
    }
}

fn merge_locations(items: impl Iterator<Item = (PointLocation, usize)>) -> Vec<(PointLocation, usize)> {
    let mut merged: Vec<(PointLocation, usize)> = Vec::new();
    for (loc, m) in items {
        match merged.iter_mut().find(|(l, _)| l.coincides(&loc)) {
            Some(entry) => entry.1 += m,
            None => merged.push((loc, m)),
        }
    }
    merged.sort_by(|a, b| match (a.0, b.0) {
        (PointLocation::Finite(x), PointLocation::Finite(y)) => {
            if (x.re - y.re).abs() <= POINT_MERGE_TOL * x.norm().max(1.0) {
                x.im.total_cmp(&y.im)
            } else {
                x.re.total_cmp(&y.re)
            }
        }
        (PointLocation::Finite(_), PointLocation::Infinity) => std::cmp::Ordering::Less,
        (PointLocation::Infinity, PointLocation::Finite(_)) => std::cmp::Ordering::Greater,
        _ => std::cmp::Ordering::Equal,
    });
    merged
}

/// Input-side interpolation points 1/(ω_j μ) of one tableau and schedule.
pub fn side_points(t: &ButcherTableau, steps: &[f64], side: Side) -> Vec<ExpansionPoint> {
    let mus = t.eigenvalues();
    let raw = steps.iter().flat_map(|&w| {
        mus.iter().map(move |&m| {
            let loc = PointLocation::reciprocal(m * w);
            let loc = match (side, loc) {
                (Side::Output, PointLocation::Finite(z)) => PointLocation::Finite(z.conj()),
                _ => loc,
            };
            (loc, 1)
        })
    });
    merge_locations(raw).into_iter().map(|(location, multiplicity)| ExpansionPoint { location, multiplicity, side }).collect()
}

/// Interpolation points of the reduced model built from a controllability
/// run (`t_c`, `steps_c`) and an observability run (`t_o`, `steps_o`).
pub fn predict_expansion_points(t_c: &ButcherTableau, steps_c: &[f64], t_o: &ButcherTableau, steps_o: &[f64]) -> ExpansionPointSet {
    let mut points = side_points(t_c, steps_c, Side::Input);
    points.extend(side_points(t_o, steps_o, Side::Output));
    ExpansionPointSet { points }
}
