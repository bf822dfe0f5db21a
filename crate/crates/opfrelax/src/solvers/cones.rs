//! Cone layout, Jordan algebra, and Nesterov-Todd scaling for the
//! product cone R+^l x SOC(m_1) x ... x SOC(m_k).
//!
//! Conventions: an SOC vector s = (s0, s1) is inside when s0 >= ||s1||.
//! The Jordan product on the orthant is elementwise; on an SOC block it
//! is (u, v) -> (u'v, u0 v1 + v0 u1) with unit e = (1, 0, ..., 0).
//! The NT scaling point W is the unique symmetric cone automorphism with
//! W z = W^{-1} s =: lambda for strictly feasible (s, z); on the orthant
//! W = diag(sqrt(s/z)), on an SOC block W = eta (2 v v' - J) with
//! J = diag(1, -I), v'Jv = 1, so W^{-1} = (2 (Jv)(Jv)' - J) / eta.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanKind {
    Orthant,
    Soc,
}

#[derive(Debug, Clone, Copy)]
pub struct Span {
    pub kind: SpanKind,
    pub start: usize,
    pub len: usize,
}

/// Ordered block structure of the cone variables.
#[derive(Debug, Clone, Default)]
pub struct ConeLayout {
    pub spans: Vec<Span>,
    pub dim: usize,
}

impl ConeLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_orthant(&mut self, len: usize) {
        if len > 0 {
            self.spans.push(Span { kind: SpanKind::Orthant, start: self.dim, len });
            self.dim += len;
        }
    }

    pub fn push_soc(&mut self, len: usize) {
        assert!(len >= 2, "SOC block needs dimension >= 2");
        self.spans.push(Span { kind: SpanKind::Soc, start: self.dim, len });
        self.dim += len;
    }

    /// Barrier degree: orthant entries count 1 each, each SOC block 1.
    pub fn degree(&self) -> usize {
        self.spans
            .iter()
            .map(|s| match s.kind {
                SpanKind::Orthant => s.len,
                SpanKind::Soc => 1,
            })
            .sum()
    }

    /// Unit element e of the product cone.
    pub fn unit(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for span in &self.spans {
            match span.kind {
                SpanKind::Orthant => out[span.start..span.start + span.len].fill(1.0),
                SpanKind::Soc => out[span.start] = 1.0,
            }
        }
    }

    /// How far outside the cone s is: max over blocks of (-s_i) resp.
    /// ||s1|| - s0. Nonpositive means inside.
    pub fn outside_measure(&self, s: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for span in &self.spans {
            match span.kind {
                SpanKind::Orthant => {
                    for i in span.start..span.start + span.len {
                        worst = worst.max(-s[i]);
                    }
                }
                SpanKind::Soc => {
                    let head = s[span.start];
                    let tail = norm(&s[span.start + 1..span.start + span.len]);
                    worst = worst.max(tail - head);
                }
            }
        }
        worst.max(f64::NEG_INFINITY)
    }

    /// Shifts s to a safely interior point if needed: s += (1 + t) e
    /// where t is the outside measure, matching the usual cold start.
    pub fn shift_to_interior(&self, s: &mut [f64]) {
        let t = self.outside_measure(s);
        let scale = s.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
        if t >= -1e-8 * scale {
            for span in &self.spans {
                match span.kind {
                    SpanKind::Orthant => {
                        for i in span.start..span.start + span.len {
                            s[i] += 1.0 + t;
                        }
                    }
                    SpanKind::Soc => s[span.start] += 1.0 + t,
                }
            }
        }
    }

    /// Largest alpha with s + alpha ds in the cone (s strictly inside);
    /// may be infinite.
    pub fn max_step(&self, s: &[f64], ds: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for span in &self.spans {
            match span.kind {
                SpanKind::Orthant => {
                    for i in span.start..span.start + span.len {
                        if ds[i] < 0.0 {
                            alpha = alpha.min(-s[i] / ds[i]);
                        }
                    }
                }
                SpanKind::Soc => {
                    let (s0, s1) = (s[span.start], &s[span.start + 1..span.start + span.len]);
                    let (d0, d1) = (ds[span.start], &ds[span.start + 1..span.start + span.len]);
                    // Roots of (s0 + a d0)^2 - ||s1 + a d1||^2 = 0.
                    let a = d0 * d0 - dot(d1, d1);
                    let b = 2.0 * (s0 * d0 - dot(s1, d1));
                    let c = s0 * s0 - dot(s1, s1);
                    alpha = alpha.min(smallest_positive_root(a, b, c));
                }
            }
        }
        alpha
    }

    /// out = a o b (Jordan product).
    pub fn jordan_mul(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for span in &self.spans {
            let r = span.start..span.start + span.len;
            match span.kind {
                SpanKind::Orthant => {
                    for i in r {
                        out[i] = a[i] * b[i];
                    }
                }
                SpanKind::Soc => {
                    let (st, len) = (span.start, span.len);
                    let head = dot(&a[st..st + len], &b[st..st + len]);
                    for i in st + 1..st + len {
                        out[i] = a[st] * b[i] + b[st] * a[i];
                    }
                    out[st] = head;
                }
            }
        }
    }

    /// out = a \ b (solve a o out = b); a must be invertible in the
    /// Jordan algebra (interior points are).
    pub fn jordan_div(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for span in &self.spans {
            match span.kind {
                SpanKind::Orthant => {
                    for i in span.start..span.start + span.len {
                        out[i] = b[i] / a[i];
                    }
                }
                SpanKind::Soc => {
                    let (st, len) = (span.start, span.len);
                    let a0 = a[st];
                    let a1 = &a[st + 1..st + len];
                    let det = a0 * a0 - dot(a1, a1);
                    let x0 = (a0 * b[st] - dot(a1, &b[st + 1..st + len])) / det;
                    for i in st + 1..st + len {
                        out[i] = (b[i] - x0 * a[i]) / a0;
                    }
                    out[st] = x0;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Smallest positive root of a x^2 + b x + c = 0 given c > 0 (the ray
/// starts strictly inside); infinity when the ray never leaves.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    if a.abs() < 1e-300 {
        return if b < 0.0 { -c / b } else { f64::INFINITY };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return if a > 0.0 { f64::INFINITY } else { 0.0 };
    }
    let sq = disc.sqrt();
    // Citardauq-stable pairing of roots.
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = (q / a, if q != 0.0 { c / q } else { f64::INFINITY });
    let mut best = f64::INFINITY;
    for r in [r1, r2] {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct SocScaling {
    pub eta: f64,
    /// Scaling point with v'Jv = 1; W = eta (2 v v' - J).
    pub v: Vec<f64>,
}

/// NT scaling data per block, plus the scaled variable
/// lambda = W z = W^{-1} s.
#[derive(Debug, Clone)]
pub struct Scaling {
    /// w_i per orthant entry, indexed by cone position (unused slots 0).
    pub orthant_w: Vec<f64>,
    /// Per SOC span, in span order.
    pub soc: Vec<SocScaling>,
    pub lambda: Vec<f64>,
}

impl Scaling {
    /// Computes the NT scaling for strictly interior (s, z); `None` when
    /// either point is numerically on or outside the boundary.
    pub fn compute(layout: &ConeLayout, s: &[f64], z: &[f64]) -> Option<Scaling> {
        let mut orthant_w = vec![0.0; layout.dim];
        let mut soc = Vec::new();
        let mut lambda = vec![0.0; layout.dim];
        for span in &layout.spans {
            let (st, len) = (span.start, span.len);
            match span.kind {
                SpanKind::Orthant => {
                    for i in st..st + len {
                        if s[i] <= 0.0 || z[i] <= 0.0 {
                            return None;
                        }
                        orthant_w[i] = (s[i] / z[i]).sqrt();
                        lambda[i] = (s[i] * z[i]).sqrt();
                    }
                }
                SpanKind::Soc => {
                    let sb = &s[st..st + len];
                    let zb = &z[st..st + len];
                    let sj = sb[0] * sb[0] - dot(&sb[1..], &sb[1..]);
                    let zj = zb[0] * zb[0] - dot(&zb[1..], &zb[1..]);
                    if sj <= 0.0 || zj <= 0.0 || sb[0] <= 0.0 || zb[0] <= 0.0 {
                        return None;
                    }
                    let (snorm, znorm) = (sj.sqrt(), zj.sqrt());
                    // Normalized points and the geometric-mean half point.
                    let sbar: Vec<f64> = sb.iter().map(|&v| v / snorm).collect();
                    let zbar: Vec<f64> = zb.iter().map(|&v| v / znorm).collect();
                    let gamma2 = (1.0 + dot(&sbar, &zbar)) / 2.0;
                    if gamma2 <= 0.0 {
                        return None;
                    }
                    let gamma = gamma2.sqrt();
                    let mut wbar = vec![0.0; len];
                    wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
                    for i in 1..len {
                        wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
                    }
                    // v = (wbar + e) / sqrt(2 (1 + wbar0)); then v'Jv = 1.
                    let denom = (2.0 * (1.0 + wbar[0])).sqrt();
                    let mut v = wbar.clone();
                    v[0] += 1.0;
                    v.iter_mut().for_each(|x| *x /= denom);
                    let eta = (sj / zj).powf(0.25);

                    let block = SocScaling { eta, v };
                    block.apply_w(zb, &mut lambda[st..st + len]);
                    soc.push(block);
                }
            }
        }
        Some(Scaling { orthant_w, soc, lambda })
    }

    fn soc_blocks<'a>(&'a self, layout: &'a ConeLayout) -> impl Iterator<Item = (&'a Span, &'a SocScaling)> {
        layout
            .spans
            .iter()
            .filter(|sp| sp.kind == SpanKind::Soc)
            .zip(self.soc.iter())
    }

    /// out = W x.
    pub fn apply_w(&self, layout: &ConeLayout, x: &[f64], out: &mut [f64]) {
        for span in &layout.spans {
            if span.kind == SpanKind::Orthant {
                for i in span.start..span.start + span.len {
                    out[i] = self.orthant_w[i] * x[i];
                }
            }
        }
        for (span, block) in self.soc_blocks(layout) {
            block.apply_w(&x[span.start..span.start + span.len], &mut out[span.start..span.start + span.len]);
        }
    }

    /// out = W^{-1} x.
    pub fn apply_w_inv(&self, layout: &ConeLayout, x: &[f64], out: &mut [f64]) {
        for span in &layout.spans {
            if span.kind == SpanKind::Orthant {
                for i in span.start..span.start + span.len {
                    out[i] = x[i] / self.orthant_w[i];
                }
            }
        }
        for (span, block) in self.soc_blocks(layout) {
            block.apply_w_inv(&x[span.start..span.start + span.len], &mut out[span.start..span.start + span.len]);
        }
    }

    /// Dense W^2 = W'W for one SOC block, row-major len x len.
    pub fn soc_w_squared(&self, block_index: usize, len: usize) -> Vec<f64> {
        let block = &self.soc[block_index];
        let mut w = vec![0.0; len * len];
        // W = eta (2 v v' - J)
        for i in 0..len {
            for j in 0..len {
                let mut val = 2.0 * block.v[i] * block.v[j];
                if i == j {
                    val -= if i == 0 { 1.0 } else { -1.0 };
                }
                w[i * len + j] = block.eta * val;
            }
        }
        let mut w2 = vec![0.0; len * len];
        for i in 0..len {
            for j in 0..len {
                let mut acc = 0.0;
                for k in 0..len {
                    acc += w[i * len + k] * w[k * len + j];
                }
                w2[i * len + j] = acc;
            }
        }
        w2
    }
}

impl SocScaling {
    /// out = W x = eta (2 v (v'x) - J x).
    pub fn apply_w(&self, x: &[f64], out: &mut [f64]) {
        let vx = dot(&self.v, x);
        out[0] = self.eta * (2.0 * self.v[0] * vx - x[0]);
        for i in 1..x.len() {
            out[i] = self.eta * (2.0 * self.v[i] * vx + x[i]);
        }
    }

    /// out = W^{-1} x = (2 (Jv)((Jv)'x) - J x) / eta; uses R J R = J for
    /// reflectors R = 2 v v' - J.
    pub fn apply_w_inv(&self, x: &[f64], out: &mut [f64]) {
        let mut jvx = self.v[0] * x[0];
        for i in 1..x.len() {
            jvx -= self.v[i] * x[i];
        }
        out[0] = (2.0 * self.v[0] * jvx - x[0]) / self.eta;
        for i in 1..x.len() {
            out[i] = (-2.0 * self.v[i] * jvx + x[i]) / self.eta;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout_mixed() -> ConeLayout {
        let mut l = ConeLayout::new();
        l.push_orthant(3);
        l.push_soc(3);
        l.push_soc(4);
        l
    }

    fn interior_pair(layout: &ConeLayout) -> (Vec<f64>, Vec<f64>) {
        // Deterministic strictly interior points.
        let mut s = vec![0.0; layout.dim];
        let mut z = vec![0.0; layout.dim];
        for (i, (sv, zv)) in s.iter_mut().zip(z.iter_mut()).enumerate() {
            *sv = 0.3 + 0.17 * (i as f64 + 1.0).sin().abs();
            *zv = 0.4 + 0.11 * (2.3 * i as f64 + 0.7).cos().abs();
        }
        for span in &layout.spans {
            if span.kind == SpanKind::Soc {
                let tail: f64 = (span.start + 1..span.start + span.len).map(|i| s[i] * s[i]).sum::<f64>().sqrt();
                s[span.start] = tail + 0.9;
                let tail: f64 = (span.start + 1..span.start + span.len).map(|i| z[i] * z[i]).sum::<f64>().sqrt();
                z[span.start] = tail + 1.1;
            }
        }
        (s, z)
    }

    #[test]
    fn nt_scaling_maps_both_points_to_lambda() {
        let layout = layout_mixed();
        let (s, z) = interior_pair(&layout);
        let sc = Scaling::compute(&layout, &s, &z).unwrap();
        let mut wz = vec![0.0; layout.dim];
        sc.apply_w(&layout, &z, &mut wz);
        let mut winv_s = vec![0.0; layout.dim];
        sc.apply_w_inv(&layout, &s, &mut winv_s);
        for i in 0..layout.dim {
            assert!((wz[i] - winv_s[i]).abs() < 1e-12, "lambda mismatch at {i}");
            assert!((wz[i] - sc.lambda[i]).abs() < 1e-12);
        }
        // lambda o lambda must have the same block traces as s o z.
        let mut ll = vec![0.0; layout.dim];
        layout.jordan_mul(&sc.lambda, &sc.lambda, &mut ll);
        let mut sz = vec![0.0; layout.dim];
        layout.jordan_mul(&s, &z, &mut sz);
        for span in &layout.spans {
            match span.kind {
                SpanKind::Orthant => {
                    for i in span.start..span.start + span.len {
                        assert!((ll[i] - sz[i]).abs() < 1e-12);
                    }
                }
                SpanKind::Soc => {
                    assert!((ll[span.start] - sz[span.start]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn w_inverse_roundtrips() {
        let layout = layout_mixed();
        let (s, z) = interior_pair(&layout);
        let sc = Scaling::compute(&layout, &s, &z).unwrap();
        let x: Vec<f64> = (0..layout.dim).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut wx = vec![0.0; layout.dim];
        sc.apply_w(&layout, &x, &mut wx);
        let mut back = vec![0.0; layout.dim];
        sc.apply_w_inv(&layout, &wx, &mut back);
        for i in 0..layout.dim {
            assert!((back[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn w_squared_matches_double_application() {
        let layout = layout_mixed();
        let (s, z) = interior_pair(&layout);
        let sc = Scaling::compute(&layout, &s, &z).unwrap();
        let x: Vec<f64> = (0..layout.dim).map(|i| 1.0 - 0.3 * (i as f64)).collect();
        let mut wx = vec![0.0; layout.dim];
        sc.apply_w(&layout, &x, &mut wx);
        let mut wwx = vec![0.0; layout.dim];
        sc.apply_w(&layout, &wx, &mut wwx);
        for (bidx, (span, _)) in sc.soc_blocks(&layout).enumerate() {
            let w2 = sc.soc_w_squared(bidx, span.len);
            for i in 0..span.len {
                let mut acc = 0.0;
                for j in 0..span.len {
                    acc += w2[i * span.len + j] * x[span.start + j];
                }
                assert!((acc - wwx[span.start + i]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn jordan_div_inverts_mul() {
        let layout = layout_mixed();
        let (s, z) = interior_pair(&layout);
        let mut prod = vec![0.0; layout.dim];
        layout.jordan_mul(&s, &z, &mut prod);
        let mut back = vec![0.0; layout.dim];
        layout.jordan_div(&s, &prod, &mut back);
        for i in 0..layout.dim {
            assert!((back[i] - z[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn max_step_hits_the_boundary_exactly() {
        let layout = layout_mixed();
        let (s, _) = interior_pair(&layout);
        let ds: Vec<f64> = (0..layout.dim).map(|i| -0.2 - 0.05 * (i as f64).cos()).collect();
        let alpha = layout.max_step(&s, &ds);
        assert!(alpha.is_finite() && alpha > 0.0);
        let probe: Vec<f64> = s.iter().zip(&ds).map(|(a, d)| a + alpha * d).collect();
        assert!(layout.outside_measure(&probe).abs() < 1e-9);
        let safe: Vec<f64> = s.iter().zip(&ds).map(|(a, d)| a + 0.999 * alpha * d).collect();
        assert!(layout.outside_measure(&safe) < 0.0);
    }

    #[test]
    fn shift_moves_outside_points_inside() {
        let layout = layout_mixed();
        let mut s = vec![-1.0; layout.dim];
        layout.shift_to_interior(&mut s);
        assert!(layout.outside_measure(&s) < 0.0);
    }

    #[test]
    fn degree_counts_orthant_entries_and_blocks() {
        assert_eq!(layout_mixed().degree(), 5);
    }
}
