//! Day-ahead electricity market clearing with large-scale residential demand
//! response.
//!
//! The library models a transmission network with conventional generators and
//! demand-response aggregators, each serving many households with deferrable
//! appliances (PHEV charging). Clearing is organized as a Lagrangian dual
//! decomposition: the coupling between each aggregator's market-side
//! consumption and the sum of its users' schedules is priced by multipliers,
//! which splits the problem into a DC-OPF solved by the market operator and
//! closed-form per-appliance schedules solved at the smart meters. The
//! multipliers are driven by a disaggregated proximal bundle method, with
//! cutting-plane and projected-subgradient baselines.
//!
//! Modules follow the data flow:
//!
//! - [`model`]: network/generator/appliance data model and constant matrices,
//! - [`qp`]: dense convex QP solver (interior point) used everywhere,
//! - [`subproblems`]: the per-iteration Lagrangian minimizations,
//! - [`dual`]: cut storage, master problem, step logic and termination,
//! - [`orchestrator`]: the synchronous two-step loop and traces,
//! - [`scenario`]: scenario files, validation and the seeded generator.

// Link the system BLAS/LAPACK that the `lapack` bindings resolve against.
use netlib_src as _;

pub mod dual;
mod exec;
pub mod model;
pub mod orchestrator;
pub mod qp;
pub mod scenario;
pub mod subproblems;
