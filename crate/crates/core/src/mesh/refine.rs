//! Refinement, closure, and coarsening.

use super::{Mesh, MeshError};
use crate::basis::ElemKind;
use std::collections::{BTreeMap, BTreeSet};

/// How hanging nodes are treated after refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Closure {
    /// Refine neighbours until no face carries more than one hanging node.
    OneIrregular,
    /// Remove all hanging nodes by green bisection (triangles only).
    RedGreen,
}

/// What a refinement call did, keyed for prediction bookkeeping.
#[derive(Clone, Debug, Default)]
pub struct RefineOutcome {
    /// Children created for each element that was explicitly marked.
    pub children_of: BTreeMap<usize, Vec<usize>>,
    /// Elements created by closure (neighbour refinement or green splits).
    pub closure_created: Vec<usize>,
}

/// A sibling family merged back into its parent.
#[derive(Clone, Debug)]
pub struct CoarsenEvent {
    pub parent: usize,
    pub children: Vec<usize>,
}

impl Mesh {
    /// Sets the polynomial degree of an element.
    pub fn set_degree(&mut self, elem: usize, p: usize) {
        assert!(p >= 2, "polynomial degree must be at least 2");
        self.degree[elem] = p;
    }

    /// Number of faces currently carrying a hanging node.
    pub fn hanging_face_count(&self) -> usize {
        self.faces.iter().filter(|f| f.mortar.is_some()).count()
    }

    /// Splits every marked element into four similar children and restores
    /// the mesh invariants with the requested closure.
    pub fn refine(
        &mut self,
        marked: &BTreeSet<usize>,
        closure: Closure,
    ) -> Result<RefineOutcome, MeshError> {
        if closure == Closure::RedGreen && self.kind == ElemKind::Quad {
            return Err(MeshError::RedGreenOnQuads);
        }
        for &k in marked {
            if k >= self.elements.len() || !self.elements[k].active {
                return Err(MeshError::Invalid(format!(
                    "marked element {k} is not active"
                )));
            }
        }
        let mut outcome = RefineOutcome::default();

        // Replace marked green elements by a red refinement of their parent.
        let mut red_set: BTreeSet<usize> = BTreeSet::new();
        let mut green_sources: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &k in marked {
            if self.elements[k].green {
                let parent = self.elements[k].parent.expect("green element has a parent");
                self.dissolve_green(parent);
                red_set.insert(parent);
                green_sources.entry(parent).or_default().push(k);
            } else if self.elements[k].active {
                red_set.insert(k);
            }
            // A marked green whose sibling was already dissolved is inactive
            // by now; the parent is in the set either way.
        }
        for &k in &red_set {
            let children = self.red_refine(k);
            match green_sources.get(&k) {
                Some(sources) => {
                    for &g in sources {
                        outcome.children_of.insert(g, children.clone());
                    }
                }
                None => {
                    outcome.children_of.insert(k, children.clone());
                }
            }
        }

        match closure {
            Closure::OneIrregular => self.one_irregular_closure(&mut outcome),
            Closure::RedGreen => self.red_green_closure(&mut outcome),
        }
        self.rebuild_faces();
        Ok(outcome)
    }

    /// Merges marked sibling families into their parents where all four
    /// siblings are active and marked and no invariant would break.
    pub fn coarsen(&mut self, marked: &BTreeSet<usize>) -> Vec<CoarsenEvent> {
        let mut events = Vec::new();
        let mut parents: BTreeSet<usize> = BTreeSet::new();
        for &k in marked {
            if k < self.elements.len() {
                if let Some(p) = self.elements[k].parent {
                    parents.insert(p);
                }
            }
        }
        for parent in parents {
            let children = match &self.elements[parent].children {
                Some(c) => c.clone(),
                None => continue, // marked elements were greens
            };
            let all_eligible = children.iter().all(|&c| {
                self.elements[c].active && !self.elements[c].green && marked.contains(&c)
            });
            if !all_eligible || self.elements[parent].active {
                continue;
            }
            // Tentative merge.
            let p_new = children.iter().map(|&c| self.degree[c]).max().unwrap();
            let p_old = self.degree[parent];
            for &c in &children {
                self.elements[c].active = false;
            }
            self.elements[parent].active = true;
            self.degree[parent] = p_new;
            self.rebuild_faces();
            if self.merge_is_valid(parent) {
                events.push(CoarsenEvent {
                    parent,
                    children,
                });
            } else {
                // Roll back.
                for &c in &children {
                    self.elements[c].active = true;
                }
                self.elements[parent].active = false;
                self.degree[parent] = p_old;
                self.rebuild_faces();
            }
        }
        events
    }

    /// Raises degrees until |p+ - p-| <= 1 across every integration face.
    /// The lower neighbour is always the one raised.
    pub fn smooth_degrees(&mut self) {
        loop {
            let mut changed = false;
            let updates: Vec<(usize, usize)> = self
                .integration_faces()
                .filter_map(|f| {
                    let minus = f.minus_elem?;
                    let (pp, pm) = (self.degree[f.plus_elem], self.degree[minus]);
                    if pp + 1 < pm {
                        Some((f.plus_elem, pm - 1))
                    } else if pm + 1 < pp {
                        Some((minus, pp - 1))
                    } else {
                        None
                    }
                })
                .collect();
            for (elem, p) in updates {
                if self.degree[elem] < p {
                    self.degree[elem] = p;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn merge_is_valid(&self, parent: usize) -> bool {
        let mut edge_set: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for e in self.elements.iter().filter(|e| e.active) {
            for (a, b) in self.element_edges(e.id) {
                *edge_set.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        for e in self.elements.iter().filter(|e| e.active) {
            for (a, b) in self.element_edges(e.id) {
                if self.hanging_depth(a, b, &edge_set) > 1 {
                    return false;
                }
            }
        }
        for f in self.integration_faces() {
            if f.plus_elem != parent && f.minus_elem != Some(parent) {
                continue;
            }
            if let Some(minus) = f.minus_elem {
                if self.degree[f.plus_elem].abs_diff(self.degree[minus]) > 1 {
                    return false;
                }
                let (h1, h2) = (self.elements[f.plus_elem].h, self.elements[minus].h);
                if (h1 / h2).max(h2 / h1) > 4.0 + 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    /// Splits an element into its four red children, creating or
    /// reactivating the child records. Children inherit the parent degree.
    fn red_refine(&mut self, elem: usize) -> Vec<usize> {
        assert!(!self.elements[elem].green, "green elements are never refined");
        let p = self.degree[elem];
        if let Some(children) = self.elements[elem].children.clone() {
            self.elements[elem].active = false;
            for &c in &children {
                self.elements[c].active = true;
                self.elements[c].green_children = None;
                self.degree[c] = p;
            }
            return children;
        }
        let kind = self.elements[elem].kind;
        let vids = self.elements[elem].vertex_ids.clone();
        let level = self.elements[elem].level + 1;
        let children = match kind {
            ElemKind::Quad => {
                let [a, b, c, d] = [vids[0], vids[1], vids[2], vids[3]];
                let mab = self.midpoint(a, b);
                let mbc = self.midpoint(b, c);
                let mcd = self.midpoint(c, d);
                let mda = self.midpoint(d, a);
                let ctr = {
                    let pa = self.coords(mab);
                    let pb = self.coords(mcd);
                    self.push_vertex([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])])
                };
                vec![
                    self.push_element(kind, vec![a, mab, ctr, mda], level, Some(elem), p),
                    self.push_element(kind, vec![mab, b, mbc, ctr], level, Some(elem), p),
                    self.push_element(kind, vec![ctr, mbc, c, mcd], level, Some(elem), p),
                    self.push_element(kind, vec![mda, ctr, mcd, d], level, Some(elem), p),
                ]
            }
            ElemKind::Triangle => {
                let [a, b, c] = [vids[0], vids[1], vids[2]];
                let mab = self.midpoint(a, b);
                let mbc = self.midpoint(b, c);
                let mca = self.midpoint(c, a);
                vec![
                    self.push_element(kind, vec![a, mab, mca], level, Some(elem), p),
                    self.push_element(kind, vec![mab, b, mbc], level, Some(elem), p),
                    self.push_element(kind, vec![mca, mbc, c], level, Some(elem), p),
                    self.push_element(kind, vec![mab, mbc, mca], level, Some(elem), p),
                ]
            }
        };
        self.elements[elem].active = false;
        self.elements[elem].children = Some(children.clone());
        children
    }

    /// Removes a green pair, reactivating the parent.
    fn dissolve_green(&mut self, parent: usize) {
        if let Some([g1, g2]) = self.elements[parent].green_children.take() {
            self.elements[g1].active = false;
            self.elements[g2].active = false;
            self.elements[parent].active = true;
        }
    }

    fn active_edge_counts(&self) -> BTreeMap<(usize, usize), usize> {
        let mut edge_set: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for e in self.elements.iter().filter(|e| e.active) {
            for (a, b) in self.element_edges(e.id) {
                *edge_set.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edge_set
    }

    fn one_irregular_closure(&mut self, outcome: &mut RefineOutcome) {
        loop {
            let edge_set = self.active_edge_counts();
            let mut to_refine: BTreeSet<usize> = BTreeSet::new();
            for e in self.elements.iter().filter(|e| e.active) {
                for (a, b) in self.element_edges(e.id) {
                    if self.hanging_depth(a, b, &edge_set) > 1 {
                        to_refine.insert(e.id);
                    }
                }
            }
            if to_refine.is_empty() {
                break;
            }
            for k in to_refine {
                if self.elements[k].green {
                    let parent = self.elements[k].parent.unwrap();
                    self.dissolve_green(parent);
                    let children = self.red_refine(parent);
                    outcome.closure_created.extend(children);
                } else if self.elements[k].active {
                    let children = self.red_refine(k);
                    outcome.closure_created.extend(children);
                }
            }
        }
    }

    fn red_green_closure(&mut self, outcome: &mut RefineOutcome) {
        // Red phase: repeatedly red-refine elements with two or more hanging
        // edges, or any edge hanging at depth two. Green elements that would
        // need refining are dissolved and their parents refined red.
        loop {
            let edge_set = self.active_edge_counts();
            let mut reds: BTreeSet<usize> = BTreeSet::new();
            let mut dissolve: BTreeSet<usize> = BTreeSet::new();
            for e in self.elements.iter().filter(|e| e.active) {
                let mut hanging_edges = 0;
                let mut max_depth = 0;
                for (a, b) in self.element_edges(e.id) {
                    let d = self.hanging_depth(a, b, &edge_set);
                    if d > 0 {
                        hanging_edges += 1;
                        max_depth = max_depth.max(d);
                    }
                }
                if hanging_edges == 0 {
                    continue;
                }
                if e.green {
                    // Any hanging node on a green element forces red
                    // refinement of its parent.
                    dissolve.insert(e.parent.unwrap());
                } else if hanging_edges >= 2 || max_depth >= 2 {
                    reds.insert(e.id);
                }
            }
            if reds.is_empty() && dissolve.is_empty() {
                break;
            }
            for parent in dissolve {
                self.dissolve_green(parent);
                let children = self.red_refine(parent);
                outcome.closure_created.extend(children);
            }
            for k in reds {
                if self.elements[k].active {
                    let children = self.red_refine(k);
                    outcome.closure_created.extend(children);
                }
            }
        }
        // Green phase: every remaining hanging node sits alone on one edge
        // of a non-green element; bisect towards the opposite vertex.
        let edge_set = self.active_edge_counts();
        let greens: Vec<(usize, usize, usize, usize)> = self
            .elements
            .iter()
            .filter(|e| e.active)
            .flat_map(|e| {
                self.element_edges(e.id)
                    .into_iter()
                    .filter_map(|(a, b)| {
                        if self.hanging_depth(a, b, &edge_set) == 1 {
                            let opposite = *self.elements[e.id]
                                .vertex_ids
                                .iter()
                                .find(|&&v| v != a && v != b)
                                .unwrap();
                            Some((e.id, a, b, opposite))
                        } else {
                            None
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        for (elem, a, b, opposite) in greens {
            let m = self
                .existing_midpoint(a, b)
                .expect("hanging edge has a midpoint");
            let level = self.elements[elem].level + 1;
            let p = self.degree[elem];
            let g1 = self.push_element(ElemKind::Triangle, vec![a, m, opposite], level, Some(elem), p);
            let g2 = self.push_element(ElemKind::Triangle, vec![m, b, opposite], level, Some(elem), p);
            self.elements[g1].green = true;
            self.elements[g2].green = true;
            self.elements[elem].green_children = Some([g1, g2]);
            self.elements[elem].active = false;
            outcome.closure_created.push(g1);
            outcome.closure_created.push(g2);
        }
    }
}
