//! Convex envelopes for the nonconvex atoms of the polar power flow
//! equations: x^2, a bilinear product x*y, and sin/cos on a symmetric
//! angle interval.
//!
//! Each constructor returns an [`EnvelopeSet`]: a list of cuts over the
//! slots (X, Y, AUX), where AUX stands for the lifted value (x^2, x*y,
//! sin x, cos x). Cuts are normalized to "<= rhs" form:
//!
//! ```text
//! linear:     cx * X + cy * Y + ca * AUX <= rhs
//! quadratic:  q * X^2        + ca * AUX <= rhs      (q >= 0)
//! ```
//!
//! together with an interval for AUX. A point is inside the envelope when
//! every cut holds and AUX lies in its interval. Constructors guarantee
//! the set is valid (contains the graph of the true function over the
//! stated ranges) and tight (each cut touches the graph somewhere);
//! the test suite samples both claims.
//!
//! Formulation builders wire the slots to program variables or affine
//! expressions; this module never sees a program.

use thiserror::Error;

/// cx * X + cy * Y + ca * AUX <= rhs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCut {
    pub cx: f64,
    pub cy: f64,
    pub ca: f64,
    pub rhs: f64,
}

/// q * X^2 + ca * AUX <= rhs with q >= 0, so the cut is convex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCut {
    pub q: f64,
    pub ca: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    Square,
    Product,
    Sine,
    Cosine,
}

#[derive(Debug, Clone)]
pub struct EnvelopeSet {
    pub kind: EnvelopeKind,
    pub x_range: (f64, f64),
    /// Present only for product envelopes.
    pub y_range: Option<(f64, f64)>,
    pub aux_range: (f64, f64),
    pub linear: Vec<LinearCut>,
    pub quad: Vec<QuadCut>,
}

#[derive(Debug, Error, PartialEq)]
pub enum EnvelopeError {
    #[error("inverted bounds [{lo}, {hi}]")]
    InvertedBounds { lo: f64, hi: f64 },
    #[error("angle bound {0} outside (0, pi/2]")]
    BadAngleBound(f64),
}

fn check_bounds(lo: f64, hi: f64) -> Result<(), EnvelopeError> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        Err(EnvelopeError::InvertedBounds { lo, hi })
    } else {
        Ok(())
    }
}

/// Envelope of AUX = X^2 on [lo, hi]: the secant from above,
/// the function itself (a convex cut) from below.
pub fn square_envelope(lo: f64, hi: f64) -> Result<EnvelopeSet, EnvelopeError> {
    check_bounds(lo, hi)?;
    let aux_lo = if lo <= 0.0 && 0.0 <= hi { 0.0 } else { (lo * lo).min(hi * hi) };
    let aux_hi = (lo * lo).max(hi * hi);
    Ok(EnvelopeSet {
        kind: EnvelopeKind::Square,
        x_range: (lo, hi),
        y_range: None,
        aux_range: (aux_lo, aux_hi),
        // AUX <= (lo + hi) X - lo*hi
        linear: vec![LinearCut { cx: -(lo + hi), cy: 0.0, ca: 1.0, rhs: -lo * hi }],
        // X^2 <= AUX
        quad: vec![QuadCut { q: 1.0, ca: -1.0, rhs: 0.0 }],
    })
}

/// Envelope of AUX = X * Y on a box: the four corner planes. Exact
/// (equal to the convex hull of the bilinear graph) on a box.
pub fn mccormick(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<EnvelopeSet, EnvelopeError> {
    check_bounds(x_lo, x_hi)?;
    check_bounds(y_lo, y_hi)?;
    let corners = [x_lo * y_lo, x_lo * y_hi, x_hi * y_lo, x_hi * y_hi];
    let aux_lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
    let aux_hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(EnvelopeSet {
        kind: EnvelopeKind::Product,
        x_range: (x_lo, x_hi),
        y_range: Some((y_lo, y_hi)),
        aux_range: (aux_lo, aux_hi),
        linear: vec![
            // AUX >= y_lo X + x_lo Y - x_lo y_lo
            LinearCut { cx: y_lo, cy: x_lo, ca: -1.0, rhs: x_lo * y_lo },
            // AUX >= y_hi X + x_hi Y - x_hi y_hi
            LinearCut { cx: y_hi, cy: x_hi, ca: -1.0, rhs: x_hi * y_hi },
            // AUX <= y_hi X + x_lo Y - x_lo y_hi
            LinearCut { cx: -y_hi, cy: -x_lo, ca: 1.0, rhs: -x_lo * y_hi },
            // AUX <= y_lo X + x_hi Y - x_hi y_lo
            LinearCut { cx: -y_lo, cy: -x_hi, ca: 1.0, rhs: -x_hi * y_lo },
        ],
        quad: Vec::new(),
    })
}

/// Envelope of AUX = sin X on |X| <= bound, bound in (0, pi/2]:
/// tangents taken at +-bound/2. sin is odd with curvature changing sign
/// at 0, so the two tangents are valid on the whole symmetric interval
/// and touch the graph at the tangent points.
pub fn sine_envelope(bound: f64) -> Result<EnvelopeSet, EnvelopeError> {
    if !(bound > 0.0 && bound <= std::f64::consts::FRAC_PI_2) {
        return Err(EnvelopeError::BadAngleBound(bound));
    }
    let (s, c) = (bound / 2.0).sin_cos();
    let rhs = s - (bound / 2.0) * c;
    Ok(EnvelopeSet {
        kind: EnvelopeKind::Sine,
        x_range: (-bound, bound),
        y_range: None,
        aux_range: (-bound.sin(), bound.sin()),
        linear: vec![
            // AUX <= cos(b/2) (X - b/2) + sin(b/2)
            LinearCut { cx: -c, cy: 0.0, ca: 1.0, rhs },
            // AUX >= cos(b/2) (X + b/2) - sin(b/2)
            LinearCut { cx: c, cy: 0.0, ca: -1.0, rhs },
        ],
        quad: Vec::new(),
    })
}

/// Envelope of AUX = cos X on |X| <= bound, bound in (0, pi/2]:
/// constant cos(bound) from below; from above the even quadratic
/// 1 - k X^2 with k = (1 - cos bound) / bound^2, which matches cos at
/// X = 0 and X = +-bound and majorizes it in between because
/// t -> (1 - cos t) / t^2 is decreasing on (0, pi].
pub fn cosine_envelope(bound: f64) -> Result<EnvelopeSet, EnvelopeError> {
    if !(bound > 0.0 && bound <= std::f64::consts::FRAC_PI_2) {
        return Err(EnvelopeError::BadAngleBound(bound));
    }
    let k = (1.0 - bound.cos()) / (bound * bound);
    Ok(EnvelopeSet {
        kind: EnvelopeKind::Cosine,
        x_range: (-bound, bound),
        y_range: None,
        aux_range: (bound.cos(), 1.0),
        // AUX >= cos(bound)
        linear: vec![LinearCut { cx: 0.0, cy: 0.0, ca: -1.0, rhs: -bound.cos() }],
        // k X^2 + AUX <= 1
        quad: vec![QuadCut { q: k, ca: 1.0, rhs: 1.0 }],
    })
}

/// Envelope of the product of two already-enveloped values: McCormick
/// over their AUX ranges. The returned set's X slot is `a`'s AUX and its
/// Y slot is `b`'s AUX.
pub fn compose_product(a: &EnvelopeSet, b: &EnvelopeSet) -> Result<EnvelopeSet, EnvelopeError> {
    mccormick(a.aux_range.0, a.aux_range.1, b.aux_range.0, b.aux_range.1)
}

impl EnvelopeSet {
    /// Largest violation of any cut or of the AUX interval at the given
    /// point; <= 0 means the point is inside.
    pub fn max_violation(&self, x: f64, y: f64, aux: f64) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for cut in &self.linear {
            worst = worst.max(cut.cx * x + cut.cy * y + cut.ca * aux - cut.rhs);
        }
        for cut in &self.quad {
            worst = worst.max(cut.q * x * x + cut.ca * aux - cut.rhs);
        }
        worst = worst.max(self.aux_range.0 - aux);
        worst = worst.max(aux - self.aux_range.1);
        worst
    }

    pub fn contains(&self, x: f64, y: f64, aux: f64, tol: f64) -> bool {
        self.max_violation(x, y, aux) <= tol
    }

    /// X-interval admitted at a fixed AUX value, for envelopes without a
    /// Y slot; `None` when the slice is empty. Used to compare envelope
    /// geometry across parameter choices without solving anything.
    pub fn admits_x(&self, aux: f64) -> Option<(f64, f64)> {
        assert!(self.y_range.is_none(), "admits_x is for unary envelopes");
        let (mut lo, mut hi) = self.x_range;
        if aux < self.aux_range.0 || aux > self.aux_range.1 {
            return None;
        }
        for cut in &self.linear {
            let room = cut.rhs - cut.ca * aux;
            if cut.cx > 0.0 {
                hi = hi.min(room / cut.cx);
            } else if cut.cx < 0.0 {
                lo = lo.max(room / cut.cx);
            } else if room < 0.0 {
                return None;
            }
        }
        for cut in &self.quad {
            let room = cut.rhs - cut.ca * aux;
            if cut.q > 0.0 {
                if room < 0.0 {
                    return None;
                }
                let r = (room / cut.q).sqrt();
                lo = lo.max(-r);
                hi = hi.min(r);
            } else if room < 0.0 {
                return None;
            }
        }
        if lo <= hi {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// Cut coefficients as CSV (`type,cx,cy,ca,rhs`), for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("type,cx,cy,ca,rhs\n");
        for cut in &self.linear {
            out.push_str(&format!("linear,{},{},{},{}\n", cut.cx, cut.cy, cut.ca, cut.rhs));
        }
        for cut in &self.quad {
            out.push_str(&format!("quad_x2,{},0,{},{}\n", cut.q, cut.ca, cut.rhs));
        }
        out.push_str(&format!("aux_range,{},{},0,0\n", self.aux_range.0, self.aux_range.1));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_examples() {
        let env = square_envelope(0.9, 1.1).unwrap();
        // Upper cut at x = 1: aux <= 2*1 - 0.99 = 1.01.
        let cut = env.linear[0];
        assert!((-(cut.cx) * 1.0 + cut.rhs - 1.01).abs() < 1e-15);
        assert!(env.contains(1.0, 0.0, 1.0, 1e-12));
        assert!(env.contains(1.0, 0.0, 1.01, 1e-12));
        assert!(!env.contains(1.0, 0.0, 1.02, 1e-12));
        assert!(!env.contains(1.0, 0.0, 0.99, 1e-12));
        // Sign-spanning domain pins the lower aux bound at zero.
        let env = square_envelope(-1.0, 2.0).unwrap();
        assert_eq!(env.aux_range, (0.0, 4.0));
    }

    #[test]
    fn mccormick_examples() {
        assert!(mccormick(1.0, 0.0, 0.0, 1.0).is_err());
        let env = mccormick(0.9, 1.1, 0.9, 1.1).unwrap();
        // Corner points are exact.
        for &(x, y) in &[(0.9, 0.9), (0.9, 1.1), (1.1, 0.9), (1.1, 1.1)] {
            assert!(env.contains(x, y, x * y, 1e-12));
            // At corners the envelope collapses to the product value.
            assert!(!env.contains(x, y, x * y + 1e-6, 1e-9));
            assert!(!env.contains(x, y, x * y - 1e-6, 1e-9));
        }
        // Degenerate x-range collapses the cuts to AUX = x_fixed * Y.
        let env = mccormick(2.0, 2.0, -1.0, 3.0).unwrap();
        for &y in &[-1.0, 0.0, 1.5, 3.0] {
            assert!(env.contains(2.0, y, 2.0 * y, 1e-12));
            assert!(!env.contains(2.0, y, 2.0 * y + 1e-6, 1e-9));
            assert!(!env.contains(2.0, y, 2.0 * y - 1e-6, 1e-9));
        }
    }

    #[test]
    fn sine_examples() {
        let env = sine_envelope(std::f64::consts::FRAC_PI_2).unwrap();
        // Upper cut at x = 0: cos(pi/4)(0 - pi/4) + sin(pi/4) ~= 0.1517.
        let room = env.admits_x(0.0).unwrap();
        assert!(room.0 < 0.0 && room.1 > 0.0);
        let upper_at_zero = env.linear[0].rhs; // ca = 1, cx * 0 = 0
        assert!((upper_at_zero - 0.151_746_6).abs() < 1e-6);
        // Tangent points touch the graph.
        let half = std::f64::consts::FRAC_PI_2 / 2.0;
        assert!(env.max_violation(half, 0.0, half.sin()).abs() < 1e-12);
        assert!(env.max_violation(-half, 0.0, (-half).sin()).abs() < 1e-12);
        assert!(sine_envelope(0.0).is_err());
        assert!(sine_envelope(1.6).is_err());
    }

    #[test]
    fn cosine_examples() {
        let b = 30f64.to_radians();
        let env = cosine_envelope(b).unwrap();
        assert!(env.contains(0.0, 0.0, 1.0, 1e-12));
        assert!(!env.contains(0.0, 0.0, 1.0 + 1e-9, 1e-12));
        // At the boundary both cuts touch cos(bound).
        assert!(env.max_violation(b, 0.0, b.cos()).abs() < 1e-12);
        assert!(!env.contains(0.0, 0.0, b.cos() - 1e-9, 1e-12));
    }

    #[test]
    fn compose_collapses_when_one_factor_is_fixed() {
        let a = square_envelope(0.9, 1.1).unwrap();
        let mut b = cosine_envelope(0.5).unwrap();
        b.aux_range = (1.0, 1.0); // pin the second factor
        let prod = compose_product(&a, &b).unwrap();
        for &x in &[0.81, 1.0, 1.21] {
            assert!(prod.contains(x, 1.0, x, 1e-12));
            assert!(!prod.contains(x, 1.0, x + 1e-6, 1e-9));
            assert!(!prod.contains(x, 1.0, x - 1e-6, 1e-9));
        }
    }

    #[test]
    fn sine_aux_projection_shrinks_with_bound() {
        let tight = sine_envelope(0.6).unwrap();
        let loose = sine_envelope(0.7).unwrap();
        assert!(tight.aux_range.0 >= loose.aux_range.0);
        assert!(tight.aux_range.1 <= loose.aux_range.1);
    }
}
