//! Principal-eigenvalue optimal design for the weighted Neumann problem
//! `-Δu = λ m u` with a bang-bang weight `m = 1_D - β 1_{Ω∖D}`.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod asymptotics;
pub mod design;
pub mod eigen;
pub mod mesh;
pub mod ode;
pub mod optimizer;
pub mod quadrature;
pub mod radial;
pub mod special;

pub use radial::{
    check_identities, eval_profile, limit_constants, matching_mismatch, solve_limit, IdentityResiduals, LimitConfig,
    LimitConstants, LimitError, Method, RadialSolution,
};
pub use mesh::{generate, import_mesh, BoundaryFacet, BoundaryGeometry, Curvature, Mesh, MeshError, Shape};
pub use design::{admissible_bound, Design, DesignError};
pub use eigen::{assemble, principal_lambda, rho, Assembled, EigenError, EigenResult, EigenSettings, Operators, SymmetricCsc};
pub use optimizer::{bathtub_update, default_seeds, optimize, seed_designs, OptError, OptOutcome, OptSettings, OptState, SeedStrategy};
pub use asymptotics::{compose_expansions, competitor_expansions, decay_report, predicted_bound, sweep, DecayRow, ExpansionPair, SweepFailure, SweepRecord, SweepSettings};
