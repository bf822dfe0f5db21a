//! Network data model: buses, generators, branches, and the whole-case
//! checks the rest of the crate relies on.
//!
//! All stored quantities are per-unit on `Network::base_mva` and radians,
//! except cost coefficients (which act on MW, see [`CostCurve`]) and the
//! raw `vm`/`va_deg`/`ang_min_deg`/`ang_max_deg` fields kept verbatim for
//! round-tripping case files.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use thiserror::Error;

/// Matpower bus type code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusType {
    /// Load bus (type 1).
    Pq,
    /// Generator bus (type 2).
    Pv,
    /// Reference bus (type 3); fixes the angle gauge.
    Reference,
    /// Isolated bus (type 4); rejected by [`validate`].
    Isolated,
}

impl BusType {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(BusType::Pq),
            2 => Some(BusType::Pv),
            3 => Some(BusType::Reference),
            4 => Some(BusType::Isolated),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        match self {
            BusType::Pq => 1,
            BusType::Pv => 2,
            BusType::Reference => 3,
            BusType::Isolated => 4,
        }
    }
}

/// One bus row. `id` is the external bus number from the case file; all
/// cross-references in [`Generator`] and [`Branch`] use external numbers.
#[derive(Debug, Clone)]
pub struct Bus {
    pub id: usize,
    pub bus_type: BusType,
    /// Active / reactive load, per-unit.
    pub pd: f64,
    pub qd: f64,
    /// Shunt admittance g_s + i b_s, per-unit (consumes |V|^2 * (g_s - i b_s)).
    pub gs: f64,
    pub bs: f64,
    pub area: i64,
    /// Voltage magnitude / angle from the case file, kept for round-trips.
    pub vm: f64,
    pub va_deg: f64,
    pub base_kv: f64,
    pub zone: i64,
    /// Voltage magnitude bounds, per-unit; every formulation uses these.
    pub vmax: f64,
    pub vmin: f64,
}

/// Quadratic generation cost c2*(P_MW)^2 + c1*P_MW + c0 in $/h.
///
/// Coefficients act on megawatts; builders multiply per-unit dispatch by
/// the MVA base before applying them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostCurve {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    /// Startup / shutdown columns, kept for round-trips.
    pub startup: f64,
    pub shutdown: f64,
}

/// One generator row, paired with its cost curve.
#[derive(Debug, Clone)]
pub struct Generator {
    /// External id of the bus this generator sits on.
    pub bus: usize,
    /// Dispatch from the case file, per-unit; used only as a start hint.
    pub pg: f64,
    pub qg: f64,
    pub qmax: f64,
    pub qmin: f64,
    pub vg: f64,
    pub mbase: f64,
    pub in_service: bool,
    pub pmax: f64,
    pub pmin: f64,
    pub cost: CostCurve,
}

/// One branch row: a line or transformer from `from` to `to`.
///
/// The branch is modelled as a series admittance y = 1/(r + ix), a total
/// charging susceptance `b_charge` split across the two ends, and an
/// ideal tap T = tap * exp(i * shift) on the `from` side, so the current
/// entering the series element there is (y + i b_charge/2) V_f / T - y V_t.
#[derive(Debug, Clone)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub b_charge: f64,
    /// Long-term MVA rating, per-unit; `f64::INFINITY` when unlimited.
    pub rate_a: f64,
    pub rate_b: f64,
    pub rate_c: f64,
    /// Tap ratio magnitude; parser maps the Matpower "0 means 1" default.
    pub tap: f64,
    /// Phase shift, radians.
    pub shift: f64,
    pub in_service: bool,
    /// Angle difference bounds from the case file, degrees, kept raw;
    /// use [`Branch::angle_limit`] for the symmetric bound in radians.
    pub ang_min_deg: f64,
    pub ang_max_deg: f64,
}

/// Largest usable symmetric angle bound: tan() must stay finite and the
/// trigonometric envelopes need an open interval below pi/2.
pub const MAX_ANGLE_LIMIT: f64 = FRAC_PI_2 * (1.0 - 1e-6);

impl Branch {
    /// Symmetric bound t on the shifted angle difference
    /// |theta_f - theta_t - shift| <= t, radians.
    ///
    /// `ang_min == ang_max == 0` means "no limit" in Matpower and maps to
    /// [`MAX_ANGLE_LIMIT`]. Otherwise the bound is
    /// min(|ang_min|, ang_max) clamped to at most [`MAX_ANGLE_LIMIT`];
    /// a nonpositive value is an error (the formulations assume the
    /// origin is admissible).
    pub fn angle_limit(&self) -> Result<f64, NetworkError> {
        if self.ang_min_deg == 0.0 && self.ang_max_deg == 0.0 {
            return Ok(MAX_ANGLE_LIMIT);
        }
        let t = self.ang_min_deg.abs().min(self.ang_max_deg).to_radians();
        if t <= 0.0 {
            return Err(NetworkError::UnusableAngleBounds {
                from: self.from,
                to: self.to,
                ang_min_deg: self.ang_min_deg,
                ang_max_deg: self.ang_max_deg,
            });
        }
        Ok(t.min(MAX_ANGLE_LIMIT))
    }

    /// Complex tap T = tap * exp(i * shift).
    pub fn tap_complex(&self) -> Complex64 {
        Complex64::from_polar(self.tap, self.shift)
    }
}

/// A parsed case: everything the formulations and the serializer need.
#[derive(Debug, Clone)]
pub struct Network {
    pub name: String,
    pub version: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub gens: Vec<Generator>,
    pub branches: Vec<Branch>,
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("branch {from}-{to}: angle bounds [{ang_min_deg}, {ang_max_deg}] deg leave no symmetric range")]
    UnusableAngleBounds {
        from: usize,
        to: usize,
        ang_min_deg: f64,
        ang_max_deg: f64,
    },
    #[error("network failed validation:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// The model is unusable; formulations refuse to build.
    Error,
    /// Suspicious but usable (e.g. disconnected graph, negative resistance).
    Warning,
}

/// One finding from [`audit`].
#[derive(Debug, Clone)]
pub struct Violation {
    pub severity: Severity,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

impl Network {
    /// External bus id -> index into `buses`.
    pub fn bus_index(&self) -> BTreeMap<usize, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    /// Indices of in-service generators.
    pub fn active_gens(&self) -> Vec<usize> {
        (0..self.gens.len()).filter(|&g| self.gens[g].in_service).collect()
    }

    /// Indices of in-service branches.
    pub fn active_branches(&self) -> Vec<usize> {
        (0..self.branches.len()).filter(|&b| self.branches[b].in_service).collect()
    }

    /// Index (into `buses`) of the reference bus, if any.
    pub fn reference_bus(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.bus_type == BusType::Reference)
    }
}

/// Series admittance y = 1/(r + ix) = (r - ix) / (r^2 + x^2).
///
/// A zero-impedance branch yields non-finite parts; [`audit`] reports it
/// as an error before any formulation divides by these values.
pub fn branch_admittance(branch: &Branch) -> Complex64 {
    let d = branch.r * branch.r + branch.x * branch.x;
    Complex64::new(branch.r / d, -branch.x / d)
}

/// Total complex load, per-unit: sum of pd + i qd over all buses.
pub fn total_load(net: &Network) -> Complex64 {
    net.buses
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, b| acc + Complex64::new(b.pd, b.qd))
}

/// Full consistency scan. Returns every finding; see [`validate`] for the
/// pass/fail wrapper the builders use.
pub fn audit(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    let err = |msg: String| Violation { severity: Severity::Error, message: msg };

    if !(net.base_mva > 0.0) {
        out.push(err(format!("base MVA must be positive, got {}", net.base_mva)));
    }

    let index = net.bus_index();
    if index.len() != net.buses.len() {
        let mut seen = BTreeMap::new();
        for b in &net.buses {
            *seen.entry(b.id).or_insert(0usize) += 1;
        }
        for (id, count) in seen {
            if count > 1 {
                out.push(err(format!("bus id {id} appears {count} times")));
            }
        }
    }

    for b in &net.buses {
        if b.bus_type == BusType::Isolated {
            out.push(err(format!("bus {}: isolated (type 4) buses are unsupported", b.id)));
        }
        if !(b.vmin > 0.0) || !(b.vmin <= b.vmax) {
            out.push(err(format!(
                "bus {}: voltage bounds [{}, {}] must satisfy 0 < vmin <= vmax",
                b.id, b.vmin, b.vmax
            )));
        }
    }

    let refs: Vec<usize> = net
        .buses
        .iter()
        .filter(|b| b.bus_type == BusType::Reference)
        .map(|b| b.id)
        .collect();
    if refs.is_empty() {
        out.push(err("no reference (type 3) bus".to_string()));
    } else if refs.len() > 1 {
        out.push(Violation {
            severity: Severity::Warning,
            message: format!("multiple reference buses {refs:?}; the first fixes the angle gauge"),
        });
    }

    for (k, g) in net.gens.iter().enumerate() {
        if !index.contains_key(&g.bus) {
            out.push(err(format!("generator {k}: unknown bus {}", g.bus)));
        }
        if g.pmin > g.pmax || g.qmin > g.qmax {
            out.push(err(format!(
                "generator {k} at bus {}: inverted bounds p [{}, {}], q [{}, {}]",
                g.bus, g.pmin, g.pmax, g.qmin, g.qmax
            )));
        }
        if g.cost.c2 < 0.0 {
            out.push(err(format!(
                "generator {k} at bus {}: concave cost (c2 = {})",
                g.bus, g.cost.c2
            )));
        }
    }

    for (k, br) in net.branches.iter().enumerate() {
        let ends_known = index.contains_key(&br.from) && index.contains_key(&br.to);
        if !ends_known {
            out.push(err(format!("branch {k}: unknown endpoint {}-{}", br.from, br.to)));
        }
        if br.from == br.to {
            out.push(err(format!("branch {k}: both ends on bus {}", br.from)));
        }
        if br.r == 0.0 && br.x == 0.0 {
            out.push(err(format!("branch {k} ({}-{}): zero series impedance", br.from, br.to)));
        }
        if !(br.tap > 0.0) {
            out.push(err(format!(
                "branch {k} ({}-{}): tap magnitude {} must be positive",
                br.from, br.to, br.tap
            )));
        }
        if br.rate_a < 0.0 {
            out.push(err(format!(
                "branch {k} ({}-{}): negative rating {}",
                br.from, br.to, br.rate_a
            )));
        }
        if br.in_service {
            if let Err(e) = br.angle_limit() {
                out.push(err(e.to_string()));
            }
        }
        if br.r < 0.0 {
            out.push(Violation {
                severity: Severity::Warning,
                message: format!("branch {k} ({}-{}): negative resistance {}", br.from, br.to, br.r),
            });
        }
    }

    if !connected(net, &index) {
        out.push(Violation {
            severity: Severity::Warning,
            message: "in-service branch graph does not connect all buses".to_string(),
        });
    }

    out
}

/// Pass/fail wrapper over [`audit`]: `Err` carries all findings when any
/// error-severity violation is present; warnings alone pass.
pub fn validate(net: &Network) -> Result<(), Vec<Violation>> {
    let findings = audit(net);
    if findings.iter().any(|v| v.severity == Severity::Error) {
        Err(findings)
    } else {
        Ok(())
    }
}

fn connected(net: &Network, index: &BTreeMap<usize, usize>) -> bool {
    let n = net.buses.len();
    if n == 0 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    for br in net.branches.iter().filter(|b| b.in_service) {
        if let (Some(&i), Some(&j)) = (index.get(&br.from), index.get(&br.to)) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(from: usize, to: usize, r: f64, x: f64) -> Branch {
        Branch {
            from,
            to,
            r,
            x,
            b_charge: 0.0,
            rate_a: f64::INFINITY,
            rate_b: f64::INFINITY,
            rate_c: f64::INFINITY,
            tap: 1.0,
            shift: 0.0,
            in_service: true,
            ang_min_deg: -30.0,
            ang_max_deg: 30.0,
        }
    }

    #[test]
    fn admittance_matches_complex_reciprocal() {
        let br = line(1, 2, 0.042, 0.9);
        let y = branch_admittance(&br);
        let oracle = Complex64::new(0.042, 0.9).inv();
        assert!((y - oracle).norm() < 1e-15);
        assert!((y.re - 0.051_739_2).abs() < 1e-6);
        assert!((y.im + 1.108_695_8).abs() < 1e-6);
    }

    #[test]
    fn angle_limit_rules() {
        let mut br = line(1, 2, 0.01, 0.1);
        assert!((br.angle_limit().unwrap() - 30f64.to_radians()).abs() < 1e-15);

        br.ang_min_deg = 0.0;
        br.ang_max_deg = 0.0;
        assert_eq!(br.angle_limit().unwrap(), MAX_ANGLE_LIMIT);

        br.ang_min_deg = -170.0;
        br.ang_max_deg = 170.0;
        assert_eq!(br.angle_limit().unwrap(), MAX_ANGLE_LIMIT);

        br.ang_min_deg = 10.0;
        br.ang_max_deg = 30.0;
        assert!((br.angle_limit().unwrap() - 10f64.to_radians()).abs() < 1e-15);

        br.ang_min_deg = 0.0;
        br.ang_max_deg = 30.0;
        assert!(br.angle_limit().is_err());

        br.ang_min_deg = -30.0;
        br.ang_max_deg = -5.0;
        assert!(br.angle_limit().is_err());
    }
}
