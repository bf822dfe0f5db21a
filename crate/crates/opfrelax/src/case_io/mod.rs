//! Case input and result output.
//!
//! [`matpower`] reads and writes the Matpower case format; [`report`]
//! renders [`crate::analysis::CaseReport`] as JSON or CSV. Two study
//! cases ship embedded in the binary: a three-bus loop with loose
//! limits (`case3_base`) and the same loop with 18-degree
//! angle-difference bounds (`case3_sad18`), reachable by name through
//! [`builtin_case`] without touching the filesystem.

pub mod matpower;
pub mod report;

use crate::network::Network;
use thiserror::Error;

/// Embedded three-bus loop with 30-degree angle bounds.
pub const CASE3_BASE: &str = include_str!("cases/case3_base.m");
/// The same loop with all angle bounds tightened to 18 degrees.
pub const CASE3_SAD18: &str = include_str!("cases/case3_sad18.m");

/// Names accepted by [`builtin_case`].
pub const BUILTIN_NAMES: [&str; 2] = ["case3_base", "case3_sad18"];

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("unknown builtin case '{0}' (available: case3_base, case3_sad18)")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Parse(#[from] matpower::ParseError),
}

/// Returns one of the embedded cases by name.
pub fn builtin_case(name: &str) -> Result<Network, CaseError> {
    let text = match name {
        "case3_base" => CASE3_BASE,
        "case3_sad18" => CASE3_SAD18,
        other => return Err(CaseError::UnknownBuiltin(other.to_string())),
    };
    Ok(matpower::parse_matpower(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{branch_admittance, total_load};

    #[test]
    fn builtin_base_matches_published_data() {
        let net = builtin_case("case3_base").unwrap();
        assert_eq!(net.buses.len(), 3);
        assert_eq!(net.gens.len(), 3);
        assert_eq!(net.branches.len(), 3);

        // Loads sum to 315 MW + 130 MVar on the 100 MVA base.
        let load = total_load(&net);
        assert!((load.re - 3.15).abs() < 1e-12);
        assert!((load.im - 1.30).abs() < 1e-12);

        // Line 1-2 admittance from the complex reciprocal of z.
        let y = branch_admittance(&net.branches[0]);
        assert!((y.re - 0.051739).abs() < 1e-6, "g = {}", y.re);
        assert!((y.im + 1.108696).abs() < 1e-6, "b = {}", y.im);

        // Only line 2-3 is rated: 50 MVA -> 0.5 pu.
        assert!(net.branches[0].rate_a.is_infinite());
        assert_eq!(net.branches[1].rate_a, 0.5);
        assert!(net.branches[2].rate_a.is_infinite());

        // Generator 2 cost row.
        let g2 = &net.gens[1];
        assert_eq!(g2.bus, 2);
        assert_eq!(g2.cost.c2, 0.085);
        assert_eq!(g2.cost.c1, 1.2);
        assert_eq!(g2.cost.c0, 0.0);
        // Generator 3 can only provide reactive support.
        assert_eq!(net.gens[2].pmax, 0.0);
        assert!(net.gens[2].qmax.is_infinite());
    }

    #[test]
    fn sad_variant_differs_only_in_angle_bounds() {
        let base = builtin_case("case3_base").unwrap();
        let sad = builtin_case("case3_sad18").unwrap();
        for (a, b) in base.branches.iter().zip(&sad.branches) {
            assert_eq!(a.r, b.r);
            assert_eq!(a.x, b.x);
            assert_eq!(a.b_charge, b.b_charge);
            assert_eq!(a.rate_a, b.rate_a);
            assert_eq!(b.ang_min_deg, -18.0);
            assert_eq!(b.ang_max_deg, 18.0);
        }
        for (a, b) in base.buses.iter().zip(&sad.buses) {
            assert_eq!(a.pd, b.pd);
            assert_eq!(a.vmax, b.vmax);
        }
    }

    #[test]
    fn unknown_builtin_is_an_error() {
        assert!(matches!(builtin_case("case99"), Err(CaseError::UnknownBuiltin(_))));
    }
}
