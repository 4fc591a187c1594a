//! Degree-of-freedom layouts.
//!
//! Trial space (exact sequence, order `p`):
//! - fields `p, u₁, u₂`: discontinuous, tensor order `p − 1` (`p²` each per element);
//! - trace `p̂`: continuous order `p` on the whole skeleton (vertices plus
//!   `p − 1` interior nodes per edge);
//! - flux `û·n`: order `p − 1` on interior edges only, discontinuous between edges.
//!
//! Global numbering: all fields (element-major, then component), then `p̂`
//! (vertices, then edge interiors), then `û·n` (interior edges in edge order).
//!
//! Test space: broken, `q, v₁, v₂` each of tensor order `p + dp` per element.

use crate::error::{Error, Result};
use crate::mesh::{Side, StructuredMesh};

/// Element-local view of the trial DOFs.
///
/// Local order: fields (`p`, then `u₁`, then `u₂`), then `p̂` at the four
/// corners (BL, BR, TR, TL), then `p̂` edge-interior nodes side by side, then
/// `û·n` on the interior sides.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementTrialDofs {
    pub global: Vec<usize>,
    pub n_fields: usize,
    /// Per side: local indices of the `p + 1` trace nodes in edge-parameter order.
    pub trace_nodes: [Vec<usize>; 4],
    /// Per side: local indices of the `p` flux DOFs, when the side is interior.
    pub flux_nodes: [Option<Vec<usize>>; 4],
}

impl ElementTrialDofs {
    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialDofLayout {
    pub p: usize,
    pub n_elements: usize,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_interior_edges: usize,
    pub trace_offset: usize,
    pub flux_offset: usize,
    pub total: usize,
    /// Position of each edge among the interior edges.
    pub flux_slot: Vec<Option<usize>>,
    pub elements: Vec<ElementTrialDofs>,
}

impl TrialDofLayout {
    /// Coefficients per field component per element.
    pub fn field_block(&self) -> usize {
        self.p * self.p
    }

    pub fn fields_per_element(&self) -> usize {
        3 * self.field_block()
    }

    /// Global index of field `component` (0 = p, 1 = u₁, 2 = u₂), coefficient `k`.
    pub fn field(&self, element: usize, component: usize, k: usize) -> usize {
        element * self.fields_per_element() + component * self.field_block() + k
    }

    pub fn trace_vertex(&self, vertex: usize) -> usize {
        self.trace_offset + vertex
    }

    /// Global `p̂` index of node `k ∈ 0..=p` along edge `e`.
    pub fn trace_edge_node(&self, mesh: &StructuredMesh, e: usize, k: usize) -> usize {
        let edge = &mesh.edges[e];
        if k == 0 {
            self.trace_vertex(edge.vertices[0])
        } else if k == self.p {
            self.trace_vertex(edge.vertices[1])
        } else {
            self.trace_offset + self.n_vertices + e * (self.p - 1) + (k - 1)
        }
    }

    pub fn edge_trace_dofs(&self, mesh: &StructuredMesh, e: usize) -> Vec<usize> {
        (0..=self.p)
            .map(|k| self.trace_edge_node(mesh, e, k))
            .collect()
    }

    /// Global `û·n` indices on an interior edge.
    pub fn edge_flux_dofs(&self, e: usize) -> Option<Vec<usize>> {
        self.flux_slot[e].map(|s| {
            (0..self.p)
                .map(|k| self.flux_offset + s * self.p + k)
                .collect()
        })
    }

    pub fn n_fields(&self) -> usize {
        self.trace_offset
    }

    pub fn n_traces(&self) -> usize {
        self.flux_offset - self.trace_offset
    }

    pub fn n_fluxes(&self) -> usize {
        self.total - self.flux_offset
    }

    /// `3p²·#elements + (#vertices + (p−1)·#edges) + p·#interior edges`.
    pub fn closed_form_total(p: usize, mesh: &StructuredMesh) -> usize {
        let interior = mesh.interior_edges().count();
        3 * p * p * mesh.n_elements() + mesh.n_vertices() + (p - 1) * mesh.n_edges() + p * interior
    }
}

pub fn build_trial_layout(mesh: &StructuredMesh, p: usize) -> Result<TrialDofLayout> {
    if p == 0 {
        return Err(Error::InvalidInput(
            "trial order p must be at least 1".into(),
        ));
    }
    let n_el = mesh.n_elements();
    let mut flux_slot = vec![None; mesh.n_edges()];
    let mut n_interior = 0;
    for e in mesh.interior_edges() {
        flux_slot[e] = Some(n_interior);
        n_interior += 1;
    }
    let trace_offset = 3 * p * p * n_el;
    let flux_offset = trace_offset + mesh.n_vertices() + (p - 1) * mesh.n_edges();
    let total = flux_offset + p * n_interior;
    let mut layout = TrialDofLayout {
        p,
        n_elements: n_el,
        n_vertices: mesh.n_vertices(),
        n_edges: mesh.n_edges(),
        n_interior_edges: n_interior,
        trace_offset,
        flux_offset,
        total,
        flux_slot,
        elements: Vec::with_capacity(n_el),
    };

    for (id, el) in mesh.elements.iter().enumerate() {
        let nf = 3 * p * p;
        let mut global: Vec<usize> = (0..nf).map(|k| id * nf + k).collect();
        for &v in &el.vertices {
            global.push(layout.trace_vertex(v));
        }
        let mut trace_nodes: [Vec<usize>; 4] = Default::default();
        // corners of each side in edge-parameter order (left→right / bottom→top)
        let corner_local = |side: Side| -> [usize; 2] {
            match side {
                Side::Bottom => [0, 1],
                Side::Right => [1, 2],
                Side::Top => [3, 2],
                Side::Left => [0, 3],
            }
        };
        for s in el.sides {
            let [c0, c1] = corner_local(s.side);
            let mut nodes = vec![nf + c0];
            for k in 1..p {
                nodes.push(global.len());
                global.push(layout.trace_edge_node(mesh, s.edge, k));
            }
            nodes.push(nf + c1);
            trace_nodes[s.side.index()] = nodes;
        }
        let mut flux_nodes: [Option<Vec<usize>>; 4] = Default::default();
        for s in el.sides {
            if let Some(dofs) = layout.edge_flux_dofs(s.edge) {
                let start = global.len();
                global.extend(dofs);
                flux_nodes[s.side.index()] = Some((start..start + p).collect());
            }
        }
        layout.elements.push(ElementTrialDofs {
            global,
            n_fields: nf,
            trace_nodes,
            flux_nodes,
        });
    }
    Ok(layout)
}

/// Polynomial family of the broken test space of order `k = p + dp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestFamily {
    /// `q, v₁, v₂ ∈ Q_{k,k}`
    Tensor,
    /// Exact-sequence pair: `q ∈ Q_{k,k}`, `v ∈ Q_{k,k−1} × Q_{k−1,k}`.
    #[default]
    RaviartThomas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestDofLayout {
    /// Order `k = p + dp` of the test space.
    pub order: usize,
    pub n_elements: usize,
    pub family: TestFamily,
}

impl TestDofLayout {
    /// `(x order, y order)` of `q`, `v₁`, `v₂`.
    pub fn component_orders(&self) -> [[usize; 2]; 3] {
        let k = self.order;
        match self.family {
            TestFamily::Tensor => [[k, k]; 3],
            TestFamily::RaviartThomas => [[k, k], [k, k - 1], [k - 1, k]],
        }
    }

    pub fn component_len(&self, c: usize) -> usize {
        let [a, b] = self.component_orders()[c];
        (a + 1) * (b + 1)
    }

    /// Local index of the first coefficient of component `c`.
    pub fn component_offset(&self, c: usize) -> usize {
        (0..c).map(|i| self.component_len(i)).sum()
    }

    /// Coefficients of the `q` block, `(p + dp + 1)²`.
    pub fn per_component(&self) -> usize {
        self.component_len(0)
    }

    /// `q`, then `v₁`, then `v₂`: `3 (k + 1)²` for the tensor family,
    /// `(k + 1)² + 2k(k + 1)` for the Raviart-Thomas family.
    pub fn per_element(&self) -> usize {
        (0..3).map(|c| self.component_len(c)).sum()
    }

    pub fn offset(&self, element: usize) -> usize {
        element * self.per_element()
    }

    pub fn total(&self) -> usize {
        self.n_elements * self.per_element()
    }
}

/// Test layout with the default family.
pub fn build_test_layout(mesh: &StructuredMesh, p: usize, dp: usize) -> Result<TestDofLayout> {
    build_test_layout_with(mesh, p, dp, TestFamily::default())
}

pub fn build_test_layout_with(
    mesh: &StructuredMesh,
    p: usize,
    dp: usize,
    family: TestFamily,
) -> Result<TestDofLayout> {
    if p == 0 {
        return Err(Error::InvalidInput(
            "trial order p must be at least 1".into(),
        ));
    }
    Ok(TestDofLayout {
        order: p + dp,
        n_elements: mesh.n_elements(),
        family,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use crate::spaces::NodalBasis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_examples() {
        let m = build_mesh(2, 2).unwrap();
        let l = build_trial_layout(&m, 3).unwrap();
        assert_eq!(
            (l.n_fields(), l.n_traces(), l.n_fluxes(), l.total),
            (108, 33, 12, 153)
        );
        let m = build_mesh(1, 1).unwrap();
        let l = build_trial_layout(&m, 1).unwrap();
        assert_eq!(
            (l.n_fields(), l.n_traces(), l.n_fluxes(), l.total),
            (3, 4, 0, 7)
        );
        assert!(build_trial_layout(&m, 0).is_err());
    }

    #[test]
    fn totals_match_closed_form_and_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let (nx, ny, p) = (
                rng.random_range(1..6),
                rng.random_range(1..6),
                rng.random_range(1..6),
            );
            let m = build_mesh(nx, ny).unwrap();
            let l = build_trial_layout(&m, p).unwrap();
            assert_eq!(l.total, TrialDofLayout::closed_form_total(p, &m));
            // bijection: every global index is reached by the element maps
            let mut hit = vec![false; l.total];
            for el in &l.elements {
                for &g in &el.global {
                    hit[g] = true;
                }
            }
            assert!(hit.iter().all(|&h| h), "nx={nx} ny={ny} p={p}");
        }
    }

    #[test]
    fn element_maps_have_no_duplicates() {
        let m = build_mesh(3, 2).unwrap();
        let l = build_trial_layout(&m, 4).unwrap();
        for el in &l.elements {
            let mut g = el.global.clone();
            g.sort_unstable();
            g.dedup();
            assert_eq!(g.len(), el.global.len());
        }
        // flux only on interior edges
        for e in 0..m.n_edges() {
            assert_eq!(l.edge_flux_dofs(e).is_some(), !m.edges[e].is_boundary);
        }
    }

    #[test]
    fn trace_is_continuous_at_vertices() {
        let m = build_mesh(3, 3).unwrap();
        let p = 3;
        let l = build_trial_layout(&m, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let coeff: Vec<f64> = (0..l.total).map(|_| rng.random()).collect();
        let basis = NodalBasis::new(p);
        let eval = |e: usize, t: f64| -> f64 {
            let v = basis.values(t);
            l.edge_trace_dofs(&m, e)
                .iter()
                .zip(&v)
                .map(|(&g, b)| coeff[g] * b)
                .sum()
        };
        for v in 0..m.n_vertices() {
            let mut vals = vec![];
            for (e, edge) in m.edges.iter().enumerate() {
                if edge.vertices[0] == v {
                    vals.push(eval(e, 0.0));
                }
                if edge.vertices[1] == v {
                    vals.push(eval(e, 1.0));
                }
            }
            assert!(vals.len() >= 2);
            assert!(vals.iter().all(|x| (x - vals[0]).abs() < 1e-14));
        }
    }

    #[test]
    fn element_trace_nodes_follow_edges() {
        let m = build_mesh(2, 2).unwrap();
        let l = build_trial_layout(&m, 3).unwrap();
        for (id, el) in m.elements.iter().enumerate() {
            let dofs = &l.elements[id];
            for s in el.sides {
                let local = &dofs.trace_nodes[s.side.index()];
                let global: Vec<usize> = local.iter().map(|&i| dofs.global[i]).collect();
                assert_eq!(global, l.edge_trace_dofs(&m, s.edge));
            }
        }
    }

    #[test]
    fn test_layout_sizes() {
        let m = build_mesh(2, 2).unwrap();
        let tensor = |p, dp| build_test_layout_with(&m, p, dp, TestFamily::Tensor).unwrap();
        assert_eq!(tensor(3, 2).per_element(), 108);
        assert_eq!(tensor(1, 0).per_element(), 12);
        for family in [TestFamily::Tensor, TestFamily::RaviartThomas] {
            let sizes: Vec<usize> = (0..5)
                .map(|dp| {
                    build_test_layout_with(&m, 3, dp, family)
                        .unwrap()
                        .per_element()
                })
                .collect();
            assert!(sizes.windows(2).all(|w| w[0] < w[1]));
        }
        let t = tensor(3, 1);
        assert_eq!(t.total(), 4 * 75);
        assert_eq!(t.offset(2), 150);
        let rt = build_test_layout(&m, 3, 1).unwrap();
        assert_eq!(rt.family, TestFamily::RaviartThomas);
        assert_eq!(rt.per_element(), 25 + 2 * 20);
        assert_eq!((rt.component_offset(1), rt.component_offset(2)), (25, 45));
        assert_eq!(build_test_layout(&m, 1, 0).unwrap().per_element(), 8);
    }
}
