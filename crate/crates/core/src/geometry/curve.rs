use std::f64::consts::{FRAC_PI_2, PI};

/// Boundary curve `offset + amplitude * sin(x - phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineCurve {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl SineCurve {
    pub const ZERO: SineCurve = SineCurve::flat(0.0);
    pub const ONE: SineCurve = SineCurve::flat(1.0);

    pub const fn new(offset: f64, amplitude: f64, phase: f64) -> Self {
        SineCurve {
            offset,
            amplitude,
            phase,
        }
    }

    pub const fn flat(offset: f64) -> Self {
        SineCurve::new(offset, 0.0, 0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if self.amplitude == 0.0 {
            self.offset
        } else {
            self.offset + self.amplitude * (x - self.phase).sin()
        }
    }

    pub fn is_flat(&self) -> bool {
        self.amplitude == 0.0
    }

    /// Exact integral over `[x0, x1]`.
    pub fn integral(&self, x0: f64, x1: f64) -> f64 {
        self.offset * (x1 - x0) + self.amplitude * ((x0 - self.phase).cos() - (x1 - self.phase).cos())
    }

    fn as_sinusoid(&self) -> Sinusoid {
        let (s, c) = self.phase.sin_cos();
        // A sin(x - d) = A cos d sin x - A sin d cos x
        Sinusoid {
            offset: self.offset,
            sin: self.amplitude * c,
            cos: -self.amplitude * s,
        }
    }

    /// `self - other` as a single sinusoid.
    pub(crate) fn minus(&self, other: &SineCurve) -> Sinusoid {
        let a = self.as_sinusoid();
        let b = other.as_sinusoid();
        Sinusoid {
            offset: a.offset - b.offset,
            sin: a.sin - b.sin,
            cos: a.cos - b.cos,
        }
    }

    /// Functional equality up to `tol` in offset and residual amplitude.
    pub fn same_as(&self, other: &SineCurve, tol: f64) -> bool {
        let d = self.minus(other);
        d.offset.abs() <= tol && d.amplitude() <= tol
    }

    pub fn min_on(&self, x0: f64, x1: f64) -> f64 {
        self.as_sinusoid().min_on(x0, x1)
    }

    pub fn max_on(&self, x0: f64, x1: f64) -> f64 {
        -self.as_sinusoid().negate().min_on(x0, x1)
    }
}

/// `offset + sin * sin(x) + cos * cos(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Sinusoid {
    pub offset: f64,
    pub sin: f64,
    pub cos: f64,
}

impl Sinusoid {
    pub fn amplitude(&self) -> f64 {
        self.sin.hypot(self.cos)
    }

    fn eval(&self, x: f64) -> f64 {
        self.offset + self.sin * x.sin() + self.cos * x.cos()
    }

    fn negate(&self) -> Sinusoid {
        Sinusoid {
            offset: -self.offset,
            sin: -self.sin,
            cos: -self.cos,
        }
    }

    /// Minimum over `[x0, x1]`, from the endpoints and the interior troughs.
    pub fn min_on(&self, x0: f64, x1: f64) -> f64 {
        let mut m = self.eval(x0).min(self.eval(x1));
        let amp = self.amplitude();
        if amp == 0.0 {
            return m;
        }
        // sin * sin x + cos * cos x = amp * sin(x + beta); troughs at x + beta = -pi/2 + 2k pi
        let beta = self.cos.atan2(self.sin);
        let first = -FRAC_PI_2 - beta;
        let k = ((x0 - first) / (2.0 * PI)).ceil();
        let mut x = first + k * 2.0 * PI;
        while x <= x1 {
            m = m.min(self.offset - amp);
            x += 2.0 * PI;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveKind {
    Rect,
    CurveBand,
}

impl PrimitiveKind {
    pub fn label(self) -> &'static str {
        match self {
            PrimitiveKind::Rect => "rect",
            PrimitiveKind::CurveBand => "curve",
        }
    }
}

/// Region `{x0 <= x < x1, lower(x) <= r < upper(x)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub x0: f64,
    pub x1: f64,
    pub lower: SineCurve,
    pub upper: SineCurve,
}

impl Primitive {
    pub fn new(x0: f64, x1: f64, lower: SineCurve, upper: SineCurve) -> Self {
        Primitive { x0, x1, lower, upper }
    }

    pub fn rect(x0: f64, x1: f64, r0: f64, r1: f64) -> Self {
        Primitive::new(x0, x1, SineCurve::flat(r0), SineCurve::flat(r1))
    }

    pub fn kind(&self) -> PrimitiveKind {
        if self.lower.is_flat() && self.upper.is_flat() {
            PrimitiveKind::Rect
        } else {
            PrimitiveKind::CurveBand
        }
    }

    pub fn area(&self) -> f64 {
        self.upper.integral(self.x0, self.x1) - self.lower.integral(self.x0, self.x1)
    }

    /// Thickness `upper - lower` at `x`, clamped at zero.
    pub fn height_at(&self, x: f64) -> f64 {
        (self.upper.eval(x) - self.lower.eval(x)).max(0.0)
    }

    pub fn contains(&self, x: f64, r: f64) -> bool {
        x >= self.x0 && x < self.x1 && r >= self.lower.eval(x) && r < self.upper.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_of_half_sine_sliver() {
        let s = SineCurve::new(0.0, PI / 8.0, 0.0);
        assert!((s.integral(0.0, PI) - PI / 4.0).abs() < 1e-15);
        let p = Primitive::new(0.0, PI, SineCurve::ZERO, s);
        assert_eq!(p.kind(), PrimitiveKind::CurveBand);
        assert!((p.area() - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn equal_curves_in_different_parametrisations() {
        let a = SineCurve::new(0.2, 0.3, 0.0);
        let b = SineCurve::new(0.2, -0.3, PI);
        assert!(a.same_as(&b, 1e-12));
        assert!(!a.same_as(&SineCurve::new(0.2, 0.3, 0.1), 1e-6));
    }

    #[test]
    fn extrema_over_intervals() {
        let s = SineCurve::new(0.0, 1.0, 0.0);
        assert!((s.min_on(0.0, PI)).abs() < 1e-15);
        assert!((s.min_on(PI, 2.0 * PI) + 1.0).abs() < 1e-15);
        assert!((s.max_on(0.0, PI) - 1.0).abs() < 1e-15);
        assert!((s.max_on(PI, 2.0 * PI)).abs() < 1e-15);
        let shifted = SineCurve::new(0.5, 0.25, 1.0);
        let brute = (0..=10_000)
            .map(|i| shifted.eval(2.0 + 3.0 * i as f64 / 10_000.0))
            .fold(f64::MAX, f64::min);
        assert!((shifted.min_on(2.0, 5.0) - brute).abs() < 1e-7);
    }
}
