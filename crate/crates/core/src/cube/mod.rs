//! The matrix cube problem: vertex enumeration, certificate searches,
//! closed-form certificates, verification and the moment-side program.

pub mod certificate;
pub mod dual;
pub mod exact;
pub mod full;
pub mod instance;
pub mod search;

pub use certificate::{quad_basis, verify_certificate, Certificate, FullPath, VerifyReport};
pub use dual::{dual_solve, rank_one_extract, Atom, DualSolution, Extraction};
pub use exact::{definite_case_certificate, m2_certificate, quad_from_bental, simplex_test};
pub use full::{build_nm, construct_full_certificate, construct_full_certificate_with, monomial_basis_z, FullStrategy};
pub use instance::{g_poly, vertex_oracle, AffineSym, MatrixCubeInstance, VertexResult, VERTEX_LIMIT};
pub use search::{bental_margin, bental_test, quad_margin, quad_test, relaxation_margin, Relaxation, SearchResult};
