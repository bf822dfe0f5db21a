//! Optimal power flow relaxation toolkit.
//!
//! The crate parses Matpower case files, builds the nonconvex AC optimal
//! power flow problem and a family of convex relaxations of it, solves
//! both with in-crate interior-point methods, and reports lower-bound
//! quality: optimality gaps, dominance between relaxations, and whether
//! a relaxed solution can be certified as AC-feasible.
//!
//! Pipeline:
//!
//! ```text
//! case file --> Network --> { AC program      --> local solve  --> objective h
//!                           { relaxed programs --> conic solve --> bounds b_k
//!                                        gap_k = 100 * (h - b_k) / h
//! ```
//!
//! Relaxations are built in the lifted voltage-product space
//! (W_ii = |V_i|^2, per-branch W_b = V_f V_t* / T with T the complex tap):
//! a rotated second-order cone family in two equivalent shapes (cone on
//! the voltage products, or on the squared branch current), an
//! envelope-strengthened variant linking W back to polar magnitudes and
//! angles, a copper-plate bound that drops the network, and an
//! export-only semidefinite strengthening in SDPA sparse format.
//!
//! Unit conventions, used everywhere without further comment: network
//! quantities are in per-unit on the case MVA base, angles are radians,
//! and objective values are $/h with cost coefficients applied to MW.

pub mod analysis;
pub mod case_io;
pub mod envelopes;
pub mod formulations;
pub mod network;
pub mod solvers;
