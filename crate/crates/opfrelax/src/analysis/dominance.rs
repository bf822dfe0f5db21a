//! Ordering checks across the bound hierarchy.
//!
//! Every member of the hierarchy bounds the nonconvex optimum from
//! below, and strengthening a relaxation can only raise its bound:
//! copper plate <= SOC <= QC <= AC cost. Solvers return bounds with
//! residual-level noise, so each comparison carries a slack of
//! `1e-6 * max(1, |upper|)`; a violation beyond that slack indicates a
//! broken formulation rather than roundoff.

/// One pairwise comparison `lower <= upper` up to relative slack.
#[derive(Debug, Clone)]
pub struct ChainLink {
    pub lower_label: String,
    pub upper_label: String,
    pub lower: f64,
    pub upper: f64,
    /// `upper - lower`; negative beyond `slack` means violation.
    pub margin: f64,
    pub slack: f64,
    pub ok: bool,
}

/// Checks one dominance relation with the standard slack.
pub fn dominates(lower_label: &str, lower: f64, upper_label: &str, upper: f64) -> ChainLink {
    let slack = 1e-6 * upper.abs().max(1.0);
    ChainLink {
        lower_label: lower_label.to_string(),
        upper_label: upper_label.to_string(),
        lower,
        upper,
        margin: upper - lower,
        slack,
        ok: lower <= upper + slack,
    }
}

/// Checks every consecutive pair of an ascending bound chain, e.g.
/// `[("copper", b0), ("soc", b1), ("qc", b2), ("ac", h)]`.
pub fn dominance_chain(bounds: &[(&str, f64)]) -> Vec<ChainLink> {
    bounds
        .windows(2)
        .map(|w| dominates(w[0].0, w[0].1, w[1].0, w[1].1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascending_chain_passes() {
        let links = dominance_chain(&[("cp", 5470.0), ("soc", 5735.9), ("qc", 5740.2), ("ac", 5812.6)]);
        assert_eq!(links.len(), 3);
        assert!(links.iter().all(|l| l.ok));
    }

    #[test]
    fn violation_beyond_slack_is_flagged() {
        let link = dominates("soc", 100.001, "qc", 100.0);
        assert!(!link.ok);
        // Within slack: solver noise, accepted.
        let link = dominates("soc", 100.00000001, "qc", 100.0);
        assert!(link.ok);
    }
}
