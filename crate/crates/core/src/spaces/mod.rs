//! Quadrature, nodal polynomial bases and degree-of-freedom layouts.

mod basis;
mod layout;
mod quadrature;

pub use basis::{eval_basis, gll_nodes, BasisTable, NodalBasis};
pub use layout::{
    build_test_layout, build_test_layout_with, build_trial_layout, ElementTrialDofs, TestDofLayout,
    TestFamily, TrialDofLayout,
};
pub use quadrature::{gauss_rule, QuadratureRule, TensorRule};
