//! Monomials, sparse polynomials, moment bases and pseudo-distributions.

mod basis;
mod monomial;
mod pseudo;

pub use basis::{basis_count, build_basis, MonomialBasis};
pub use monomial::{canonical_cmp, GroupId, Monomial, SparsePoly, VarGroup, VarId, VarKind, VarSpace};
pub use pseudo::{parse_moment_dump, uniform_moment, PseudoDistribution, ValidationReport};
