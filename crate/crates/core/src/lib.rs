//! Spectral laboratory for Steklov-type eigenvalue problems on cylinders
//! `Σ × [-L, L]` carrying conformal (`h² g`) or warped (`h² g₀ + dt²`)
//! metrics whose factor `h` depends only on the axial coordinate.
//!
//! Every such problem separates into one-dimensional Sturm–Liouville
//! problems indexed by the Laplace eigenvalues of the cross-section `Σ`.
//! The crate is organised bottom-up:
//!
//! * [`cross_section`]: closed-form Laplace spectra and volumes of `Σ`.
//! * [`profile`]: the axial factor `h(t)` and the metric families built on it.
//! * [`mode`]: P1 finite elements for a single mode (Dirichlet-to-Neumann
//!   matrices, Steklov–Dirichlet and Neumann eigenvalues).
//! * [`spectrum`]: merging per-mode eigenvalues into a certified global spectrum.
//! * [`rayleigh`]: min-max upper bounds from explicit test functions,
//!   including tensor-grid evaluation for factors depending on `x`.
//! * [`harness`]: scenario configs, eigenvalue-inequality checks and reports.

// `!(x > 0.0)` style guards reject NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cross_section;
pub mod error;
pub mod harness;
pub mod mesh;
pub mod mode;
pub mod profile;
pub mod quadrature;
pub mod rayleigh;
pub mod spectrum;
pub mod tridiag;

pub use cross_section::{ComponentKind, CrossSection, CrossSectionComponent, SpectralLevel};
pub use error::{Error, Result};
pub use mesh::{Mesh1D, MeshControl};
pub use mode::{BoundaryCondition, DtnMatrix, ModeProblem};
pub use profile::{Family, MetricFamily, Profile, ProfileLabel};
pub use spectrum::{ProblemKind, SpectrumRequest, SpectrumResult};

/// Environment variable capping the worker pool used for per-mode solves.
pub const THREADS_ENV: &str = "STEKLOV_LAB_THREADS";

/// Run `f` inside a rayon pool sized by [`THREADS_ENV`] when it is set.
pub fn with_worker_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(err) => {
                log::warn!("could not build a {n}-thread pool ({err}); using the global pool");
                f()
            }
        },
        None => f(),
    }
}
