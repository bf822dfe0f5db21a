//! Build/solve timing comparison between the two cone closures.
//!
//! The closures describe the same set but different matrices: the
//! current form carries one branch variable instead of two and three
//! linear rows instead of four, which shifts factorization cost. This
//! module measures both forms on one network under identical solver
//! settings. Timing uses the minimum over `repeats` runs, the usual
//! way to suppress scheduler noise; bounds and iteration counts are
//! identical across repeats because the solvers are deterministic.

use crate::formulations::relax::{build_qc, build_soc};
use crate::formulations::ConeVariant;
use crate::network::Network;
use crate::solvers::{conic::solve_conic, SolverConfig};
use std::time::Instant;

use super::AnalysisError;

/// Measurements for one closure on one network.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub variant: ConeVariant,
    pub n_vars: usize,
    pub n_rows: usize,
    pub build_s: f64,
    pub solve_s: f64,
    pub iterations: usize,
    pub bound: f64,
    pub status: String,
}

/// Benchmarks both closures. `with_envelopes` selects the QC shape.
pub fn bench_variants(
    net: &Network,
    with_envelopes: bool,
    repeats: usize,
    cfg: &SolverConfig,
) -> Result<Vec<BenchRow>, AnalysisError> {
    let repeats = repeats.max(1);
    let mut rows = Vec::new();
    for variant in [ConeVariant::VoltageProduct, ConeVariant::Current] {
        let mut build_s = f64::INFINITY;
        let mut solve_s = f64::INFINITY;
        let mut last = None;
        for _ in 0..repeats {
            let t0 = Instant::now();
            let lifted = if with_envelopes {
                build_qc(net, variant)?
            } else {
                build_soc(net, variant)?
            };
            build_s = build_s.min(t0.elapsed().as_secs_f64());
            let t1 = Instant::now();
            let sol = solve_conic(&lifted.program, cfg)?;
            solve_s = solve_s.min(t1.elapsed().as_secs_f64());
            last = Some((lifted, sol));
        }
        let (lifted, sol) = last.expect("repeats >= 1");
        rows.push(BenchRow {
            variant,
            n_vars: lifted.program.n_vars(),
            n_rows: lifted.program.rows.len()
                + lifted.program.quad_rows.len()
                + lifted.program.cone_rows.len(),
            build_s,
            solve_s,
            iterations: sol.iterations,
            bound: sol.objective,
            status: sol.status.to_string(),
        });
    }
    Ok(rows)
}
