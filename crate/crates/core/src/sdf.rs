//! Analytic stent field: a chain of capsules welded together with the
//! quadratic smooth minimum.
//!
//! Segment order matters. The union is folded strictly left to right, from
//! the most distal segment (index 0) to the most proximal one, because the
//! smooth minimum is not associative.

use thiserror::Error;

use crate::geom::{Aabb, Vec3};

/// Offsets from the axis at or below this are treated as on the axis (mm).
pub const GRADIENT_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdfError {
    #[error("capsule segment has zero length")]
    ZeroLengthSegment,
    #[error("consecutive segments {0} and {1} do not share an endpoint")]
    BrokenChain(usize, usize),
    #[error("a stent field needs at least one segment")]
    NoSegments,
    #[error("smoothing factor must be finite and non-negative, got {0}")]
    InvalidSmoothing(f64),
    #[error("gradient is undefined: query point lies on the stent axis")]
    DegenerateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapsuleSegment {
    a: Vec3,
    b: Vec3,
    ba: Vec3,
    inv_len2: f64,
}

impl CapsuleSegment {
    pub fn new(a: Vec3, b: Vec3) -> Result<Self, SdfError> {
        let ba = b - a;
        let len2 = ba.norm_squared();
        if len2 <= 0.0 || !len2.is_finite() {
            return Err(SdfError::ZeroLengthSegment);
        }
        Ok(Self {
            a,
            b,
            ba,
            inv_len2: 1.0 / len2,
        })
    }

    pub fn a(&self) -> Vec3 {
        self.a
    }

    pub fn b(&self) -> Vec3 {
        self.b
    }

    pub fn direction(&self) -> Vec3 {
        self.ba.normalize()
    }

    /// Vector from the nearest axis point to `p`.
    #[inline]
    fn offset(&self, p: &Vec3) -> Vec3 {
        let pa = p - self.a;
        let h = (pa.dot(&self.ba) * self.inv_len2).clamp(0.0, 1.0);
        pa - self.ba * h
    }

    #[inline]
    pub fn sdf(&self, p: &Vec3, r: f64) -> f64 {
        self.offset(p).norm() - r
    }

    /// Unit gradient of [`CapsuleSegment::sdf`]; independent of the radius.
    #[inline]
    pub fn grad(&self, p: &Vec3) -> Result<Vec3, SdfError> {
        let o = self.offset(p);
        let n = o.norm();
        if n <= GRADIENT_EPS {
            return Err(SdfError::DegenerateGradient);
        }
        Ok(o / n)
    }
}

pub fn capsule_sdf(p: &Vec3, seg: &CapsuleSegment, r: f64) -> f64 {
    seg.sdf(p, r)
}

pub fn capsule_grad(p: &Vec3, seg: &CapsuleSegment) -> Result<Vec3, SdfError> {
    seg.grad(p)
}

/// Quadratic smooth minimum with blend width `k`.
#[inline]
pub fn smin(alpha: f64, beta: f64, k: f64) -> f64 {
    let m = alpha.min(beta);
    if k <= 0.0 {
        return m;
    }
    let d = (alpha - beta).abs();
    if d > k {
        m
    } else {
        let t = 1.0 - d / k;
        m - 0.25 * k * t * t
    }
}

/// Gradient of [`smin`]: clamped linear interpolation of the two input
/// gradients. The blend branch is used on the seam `|beta - alpha| = k`.
#[inline]
pub fn smin_grad(alpha: f64, beta: f64, grad_a: &Vec3, grad_b: &Vec3, k: f64) -> Vec3 {
    if k <= 0.0 {
        return if alpha < beta {
            *grad_a
        } else if beta < alpha {
            *grad_b
        } else {
            (grad_a + grad_b) * 0.5
        };
    }
    let x = (beta - alpha) / k;
    if x > 1.0 {
        *grad_a
    } else if x < -1.0 {
        *grad_b
    } else {
        (grad_a * (x + 1.0) + grad_b * (1.0 - x)) * 0.5
    }
}

/// Capsule segment length that keeps at most two neighbouring capsules
/// blending at any point of a straight chain of radius `radius`, so that
/// the welded surface bulges by at most `k / 4`. Shorter segments let the
/// left fold accumulate several blends and overshoot that bound.
pub fn auto_segment_length(k: f64, radius: f64) -> f64 {
    (2.0 * (k.max(0.0) * radius.max(0.0)).sqrt()).max(0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StentField {
    segments: Vec<CapsuleSegment>,
    k: f64,
    nominal_radius: f64,
}

impl StentField {
    pub fn new(segments: Vec<CapsuleSegment>, k: f64, nominal_radius: f64) -> Result<Self, SdfError> {
        if segments.is_empty() {
            return Err(SdfError::NoSegments);
        }
        if !(k.is_finite() && k >= 0.0) {
            return Err(SdfError::InvalidSmoothing(k));
        }
        for i in 1..segments.len() {
            if segments[i - 1].b != segments[i].a {
                return Err(SdfError::BrokenChain(i - 1, i));
            }
        }
        Ok(Self {
            segments,
            k,
            nominal_radius,
        })
    }

    /// Chain of capsules through consecutive polyline points, first point
    /// most distal.
    pub fn from_polyline(points: &[Vec3], k: f64, nominal_radius: f64) -> Result<Self, SdfError> {
        let segments = points
            .windows(2)
            .map(|w| CapsuleSegment::new(w[0], w[1]))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(segments, k, nominal_radius)
    }

    pub fn segments(&self) -> &[CapsuleSegment] {
        &self.segments
    }

    pub fn smoothing(&self) -> f64 {
        self.k
    }

    pub fn nominal_radius(&self) -> f64 {
        self.nominal_radius
    }

    /// Radius to evaluate at so the welded surface does not exceed the
    /// nominal one: `nominal - k/4`, clamped at zero.
    pub fn effective_radius(&self) -> f64 {
        (self.nominal_radius - 0.25 * self.k).max(0.0)
    }

    pub fn eval(&self, p: &Vec3, r: f64) -> f64 {
        let mut acc = self.segments[0].sdf(p, r);
        for seg in &self.segments[1..] {
            acc = smin(acc, seg.sdf(p, r), self.k);
        }
        acc
    }

    /// Value and un-normalised gradient, folded together.
    pub fn eval_with_grad(&self, p: &Vec3, r: f64) -> Result<(f64, Vec3), SdfError> {
        let mut acc = self.segments[0].sdf(p, r);
        let mut grad = self.segments[0].grad(p)?;
        for seg in &self.segments[1..] {
            let v = seg.sdf(p, r);
            let g = seg.grad(p)?;
            grad = smin_grad(acc, v, &grad, &g, self.k);
            acc = smin(acc, v, self.k);
        }
        Ok((acc, grad))
    }

    /// Unit gradient of the folded field.
    pub fn grad(&self, p: &Vec3, r: f64) -> Result<Vec3, SdfError> {
        let (_, g) = self.eval_with_grad(p, r)?;
        let n = g.norm();
        if n <= GRADIENT_EPS {
            return Err(SdfError::DegenerateGradient);
        }
        Ok(g / n)
    }

    /// Box containing the zero level set at radius `r`, grown by `pad`.
    ///
    /// Each smooth-min step is monotone in its accumulated argument, so the
    /// fold never drops more than `k` below the plain minimum; segment
    /// endpoints grown by `r + k + pad` bound every point with value `<= pad`.
    pub fn aabb(&self, r: f64, pad: f64) -> Aabb {
        let mut bb = Aabb::empty();
        for s in &self.segments {
            bb.include(&s.a);
            bb.include(&s.b);
        }
        bb.inflated(r + self.k + pad)
    }

    /// Direction away from the nearest axis segment for points sitting on
    /// the axis, where the gradient is undefined. Fixed per segment: the
    /// segment direction crossed with the coordinate axis it is least
    /// aligned with (lowest index on ties).
    pub fn fallback_direction(&self, p: &Vec3) -> Vec3 {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, s) in self.segments.iter().enumerate() {
            let d = s.offset(p).norm();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let dir = self.segments[best].direction();
        let mut axis = 0;
        for i in 1..3 {
            if dir[i].abs() < dir[axis].abs() {
                axis = i;
            }
        }
        let mut e = Vec3::zeros();
        e[axis] = 1.0;
        dir.cross(&e).normalize()
    }
}
