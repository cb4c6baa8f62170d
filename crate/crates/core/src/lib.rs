//! Semistable-reduction toolkit for wild monodromy of superelliptic covers
//! `y^p = f(x)`: p-adic valuations, local fields, Kummer torsor analysis,
//! reduction graphs, ramification filtrations and `SL2(F_q)` group checks.

pub mod filtration;
pub mod graph;
pub mod group;
pub mod local_field;
pub mod pipeline;
pub mod series;
pub mod torsor;
pub mod valuation;
