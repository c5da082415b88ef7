//! Primal-dual dynamical systems for `min f(x) + h(x) + g(Ax)`.
//!
//! The crate integrates the continuous-time primal-dual flow, runs its exact
//! discrete counterparts (proximal ADMM with variable metrics and
//! Chambolle–Pock), and certifies Lyapunov descent and ergodic `O(1/t)` rates
//! along computed trajectories.

pub mod diagnostics;
pub mod discrete;
pub mod error;
pub mod flow;
pub mod linops;
pub mod metric;
pub mod problem;
pub mod proxlib;
pub mod vector;

pub use diagnostics::{
    certify_rates, discrete_trace, flow_trace, lyapunov, sweep_summary, w0_norm_sq,
    RateCertificate, SweepEntry, SweepReport, TraceRecord,
};
pub use discrete::{
    admm_step, cp_step, primal_dual_step, run, run_chambolle_pock, DiscreteParams, DiscreteRun,
    IterateRecord, StopReason,
};
pub use error::{Error, Result};
pub use flow::{
    ergodic, integrate, rhs, ErgodicAccumulator, FlowParams, FlowSystem, Integrator,
    SystemState, Trajectory, Velocity,
};
pub use linops::{operator_norm, psd_floor, seminorm_sq, DenseMatrix, LinearMap, SelfAdjointPsd};
pub use metric::{
    certify, weight_w, BlockWeight, ConditionReport, MetricMode, MetricSchedule, TauSchedule,
};
pub use problem::{
    catalog, kkt_residual, lagrangian, objective, optimal_value, ProblemSpec, SaddleResidual,
};
pub use proxlib::{conjugate_prox, metric_prox, prox, ProxFunction, ScalarTerm, SmoothFunction};
