//! Marking and refinement orchestration.
//!
//! h-adaptivity uses the maximum strategy: an element is marked when its
//! squared indicator reaches theta times the largest one. hp-adaptivity
//! compares computed indicators with predicted ones: an element whose
//! computed indicator has not dropped below its prediction is h-refined
//! (children drop one degree and receive a decayed prediction), otherwise
//! its degree is raised, it is marked for h-coarsening, and the prediction
//! is damped by gamma_p. Initial predictions are infinite so that the
//! first pass attempts p-refinement everywhere.

use crate::estimator::EstimatorReport;
use crate::mesh::{Closure, Mesh, MeshError};
use std::collections::{BTreeMap, BTreeSet};

/// Marking parameters; defaults follow the reference runs.
#[derive(Clone, Copy, Debug)]
pub struct MarkingParams {
    pub theta: f64,
    pub sigma_mark: f64,
    pub gamma_h: f64,
    pub gamma_p: f64,
}

impl Default for MarkingParams {
    fn default() -> Self {
        Self {
            theta: 0.5,
            sigma_mark: 0.7,
            gamma_h: 3.0,
            gamma_p: 0.9,
        }
    }
}

impl MarkingParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(format!("theta = {} outside (0, 1]", self.theta));
        }
        if !(self.sigma_mark > 0.0 && self.sigma_mark <= 1.0) {
            return Err(format!("sigma_mark = {} outside (0, 1]", self.sigma_mark));
        }
        if !(self.gamma_h > 0.0) {
            return Err(format!("gamma_h = {} must be positive", self.gamma_h));
        }
        if !(self.gamma_p > 0.0 && self.gamma_p < 1.0) {
            return Err(format!("gamma_p = {} outside (0, 1)", self.gamma_p));
        }
        Ok(())
    }
}

/// Predicted squared indicators per active element (infinity allowed).
#[derive(Clone, Debug, Default)]
pub struct PredictedIndicators {
    values: BTreeMap<usize, f64>,
}

impl PredictedIndicators {
    /// Infinite predictions for every active element of a fresh mesh.
    pub fn infinite(mesh: &Mesh) -> Self {
        Self {
            values: mesh
                .active_ids()
                .into_iter()
                .map(|e| (e, f64::INFINITY))
                .collect(),
        }
    }

    pub fn get(&self, elem: usize) -> f64 {
        self.values[&elem]
    }

    pub fn insert(&mut self, elem: usize, value: f64) {
        self.values.insert(elem, value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, elem: usize) -> bool {
        self.values.contains_key(&elem)
    }
}

/// A marking decision; h- and p-marks are disjoint.
#[derive(Clone, Debug, Default)]
pub struct AdaptDecision {
    pub h_refine: BTreeSet<usize>,
    pub p_refine: BTreeSet<usize>,
    pub h_coarsen: BTreeSet<usize>,
    /// Prediction assigned to every child of an h-refined parent.
    pub child_predictions: BTreeMap<usize, f64>,
    /// New degree for the children of an h-refined parent.
    pub child_degrees: BTreeMap<usize, usize>,
    /// Updated predictions for elements that are not h-refined.
    pub surviving_predictions: BTreeMap<usize, f64>,
}

/// Relative slack when comparing squared indicators against the marking
/// threshold, so that symmetric elements at the threshold mark together.
const MARK_EPS: f64 = 1e-12;

/// Maximum strategy: marks K iff eta_K^2 >= theta * max eta^2.
pub fn mark_h(report: &EstimatorReport, theta: f64) -> BTreeSet<usize> {
    assert!(!report.elements.is_empty(), "marking needs a nonempty report");
    let max = report.max_eta_sq();
    let thresh = theta * max * (1.0 - MARK_EPS);
    report
        .elements
        .iter()
        .filter(|e| e.eta_sq() >= thresh)
        .map(|e| e.elem)
        .collect()
}

/// hp-marking: selection by the maximum strategy with parameter
/// sigma_mark, branch choice by comparing against the predicted indicator.
/// p-refinement is capped at p_max; an element at the cap is h-refined
/// instead.
pub fn mark_hp(
    report: &EstimatorReport,
    predicted: &PredictedIndicators,
    params: &MarkingParams,
    p_max: usize,
) -> AdaptDecision {
    assert!(p_max >= 2);
    let max = report.max_eta_sq();
    let thresh = params.sigma_mark * max * (1.0 - MARK_EPS);
    let mut decision = AdaptDecision::default();
    for e in &report.elements {
        let eta_sq = e.eta_sq();
        let pred = predicted.get(e.elem);
        if eta_sq >= thresh && max > 0.0 {
            let take_h = eta_sq >= pred || e.p + 1 > p_max;
            if take_h {
                // Children lose one degree (floor 2) and inherit the
                // decayed prediction gamma_h/N^K (1/2)^(2 p_K - 2) eta^2.
                let n_children = 4.0;
                decision.h_refine.insert(e.elem);
                decision.child_predictions.insert(
                    e.elem,
                    params.gamma_h / n_children * 0.5f64.powi(2 * e.p as i32 - 2) * eta_sq,
                );
                decision.child_degrees.insert(e.elem, (e.p - 1).max(2));
            } else {
                decision.p_refine.insert(e.elem);
                decision.h_coarsen.insert(e.elem);
                decision
                    .surviving_predictions
                    .insert(e.elem, params.gamma_p * eta_sq);
            }
        } else {
            decision.surviving_predictions.insert(e.elem, pred);
        }
    }
    debug_assert!(decision.h_refine.is_disjoint(&decision.p_refine));
    decision
}

/// Executes a decision: h-refinements, then p-increments, then best-effort
/// h-coarsening, then compatibility passes. Returns the predictions keyed
/// to the resulting active elements.
pub fn apply(
    mesh: &mut Mesh,
    decision: &AdaptDecision,
    closure: Closure,
) -> Result<PredictedIndicators, MeshError> {
    let outcome = mesh.refine(&decision.h_refine, closure)?;

    let mut predictions: BTreeMap<usize, f64> = BTreeMap::new();
    for (&parent, children) in &outcome.children_of {
        let pred = decision.child_predictions[&parent];
        let degree = decision.child_degrees[&parent];
        for &c in children {
            mesh.set_degree(c, degree);
            predictions.insert(c, pred);
        }
    }
    for &c in &outcome.closure_created {
        // Closure-created elements start from an infinite prediction so
        // the algorithm first tries p on them.
        predictions.insert(c, f64::INFINITY);
    }
    for (&elem, &pred) in &decision.surviving_predictions {
        if mesh.elements[elem].active {
            predictions.insert(elem, pred);
        }
    }
    // p-increments; elements swallowed by closure refinement are skipped.
    for &elem in &decision.p_refine {
        if mesh.elements[elem].active {
            let p = mesh.p(elem);
            mesh.set_degree(elem, p + 1);
        }
    }
    // Best-effort h-coarsening of the p-refined elements.
    let events = mesh.coarsen(&decision.h_coarsen);
    for ev in &events {
        let pred = ev
            .children
            .iter()
            .filter_map(|c| predictions.remove(c))
            .fold(f64::NEG_INFINITY, f64::max);
        predictions.insert(ev.parent, pred);
    }
    mesh.smooth_degrees();

    // Every active element carries exactly one prediction.
    let mut result = PredictedIndicators::default();
    for e in mesh.active_ids() {
        let value = *predictions
            .get(&e)
            .unwrap_or_else(|| panic!("element {e} has no prediction"));
        result.insert(e, value);
    }
    Ok(result)
}
