//! Strong approximation of the Rosenblatt process by uniform transport processes.
//!
//! The crate builds the three Brownian drivers, couples them to transport
//! processes, evaluates the kernel integrals exactly on piecewise-linear paths
//! and assembles the approximating process together with a Brownian reference
//! and an independent chaos-grid oracle.

pub mod error;
pub mod experiments;
pub mod integrate;
pub mod kernels;
pub mod oracle;
pub mod params;
pub mod paths;
pub mod quad;
pub mod rng;
pub mod rosenblatt;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
pub use kernels::{
    fbm_covariance, kernel_f, normalizing_constant, rosenblatt_kernel_g, segment_integral_f,
    segment_integral_weighted, KernelConstants,
};
pub use params::{alpha_n, beta_range, epsilon_n, validate_params, Params, RawParams};
pub use paths::{simulate_driver_bundle, sup_distance, DriverBundle, DriverMesh, GridPath, PiecewiseLinearPath};
pub use transport::{couple_transport, extract_gaps, simulate_transport, TransportPath};
pub use integrate::{graded_time_quadrature, riemann_weighted_pl, stieltjes_pl, wiener_grid_integral, QuadSpec};
pub use oracle::{estimate_remainder, grid_double_sum, simulate_chaos_grid, ChaosGrid, ChaosGridSpec, RemainderSummary};
pub use rosenblatt::{
    assemble_run, build_components, build_reference, eval_y1_approx, eval_y1_reference, eval_y3, Coupling, Driver,
    RosenblattRun, RunOptions, Y3Form,
};
pub use stats::{fit_loglog, ks_one_sample, ks_two_sample, KsResult, McSummary, RateFit};
pub use experiments::{
    config_hash, run_constants, run_coupling_rate, run_law_suite, run_oracle_suite, run_strong_rate, Check,
    ConstantsReport, CouplingReport, LawReport, OracleReport, ReportHeader, StrongReport,
};
