//! Numerical laboratory for thin elliptic shells.
//!
//! The crate discretizes a surface given by an analytic chart over the unit
//! disk and provides solvers for the linearized isometry equation, generation
//! of infinitesimal isometries, matching them to exact isometries, and the
//! bending and three-dimensional shell energies used to observe the thin-film
//! limit.

pub mod elliptic;
pub mod energy;
pub mod error;
pub mod fe;
pub mod geometry;
pub mod isospace;
pub mod jet;
pub mod loads;
pub mod matching;
pub mod mesh;
pub mod sparse;
pub mod surface;
pub mod symgrad;

pub use energy::{bending_energy, bending_form, gamma_sweep, shell_energy, GammaConfig, GammaRow, MaterialModel};
pub use error::{Error, Result};
pub use geometry::{check_ellipticity, geometry_at, ChartKind, GeometryFields, SurfaceChart, Vec3};
pub use fe::{FeSpace, ScalarField, SkewField3, SymTensorField2, VectorField3};
pub use matching::{contraction_rate, isometry_defect, match_isometry, MatchResult};
pub use mesh::{triangulate_disk, Mesh};
pub use isospace::{generate_iso, iso_basis, rigid_augmented_basis, skew_field, BoundaryMode, InfIsometry, IsoBasis};
pub use loads::{minimize_limit_energy, optimal_rotation, ForceProfile, ForceSpec, LimitSolution};
pub use surface::Surface;
pub use symgrad::{solve_sym_grad, Displacement, FramedField, Gauge, SymGradReport};
