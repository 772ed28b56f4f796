//! Quantum preconditioning for classical global optimization.
//!
//! A small simulated register is trained per dimension to concentrate
//! probability on low-energy grid points of a discretized objective. The
//! sampled tail gives a seed point and a trust box, and a particle swarm
//! followed by BFGS searches inside that box.
//!
//! ```
//! use qprecond::{objectives, precond, refine};
//!
//! let f = objectives::rastrigin(2);
//! let cfg = precond::PrecondConfig {
//!     gradfree: qprecond::gradfree::GradFreeConfig::with_budget(200),
//!     ..Default::default()
//! };
//! let (seedbox, _) = precond::precondition(&f, &cfg, 42).unwrap();
//! let mut rng = qprecond::harness::refine_rng(42);
//! let pso = refine::PsoConfig { particles: 32, iterations: 50, ..Default::default() };
//! let out = refine::refine(&f, &seedbox, &pso, &mut rng).unwrap();
//! assert!(out.f_final < 1.0);
//! ```

pub mod encoding;
pub mod gradfree;
pub mod harness;
pub mod objectives;
pub mod precond;
pub mod qsim;
pub mod refine;
pub mod vqe;

pub use encoding::{DiagonalHamiltonian, DiscretizationGrid};
pub use harness::{run_battery, BatteryConfig, BatteryReport, Mode};
pub use objectives::Objective;
pub use precond::{precondition, PrecondConfig, SeedBox};
pub use qsim::{ShotHistogram, StateVector};
