//! Twisted K-theory at desk scale.
//!
//! The crate computes Dixmier–Douady classes of `Z_n` gerbes on simplicial
//! covers, manipulates projective vector bundle data (bundles whose
//! transition maps satisfy the cocycle law only up to a central scalar),
//! evaluates twisted Chern characters by Chern–Weil quadrature on patch
//! atlases, extracts analytic index bundles of projective families of
//! elliptic operators on circle fibres, and compares them with the
//! cohomological index formula.

pub mod atlas;
pub mod bundle;
pub mod chern_weil;
pub mod cohomology;
pub mod family;
pub mod forms;
pub mod gerbe;
pub mod index_theorem;
pub mod linalg;
pub mod scenario;
pub mod thom;
