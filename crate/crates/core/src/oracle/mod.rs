//! Independent references: a grid-graph distance oracle and the discretised
//! index form.

pub mod grid;
pub mod index_form;

pub use grid::{GridOracle, GridSettings};
pub use index_form::{index_form_matrix, index_form_negative_count, IndexFormMatrix};
