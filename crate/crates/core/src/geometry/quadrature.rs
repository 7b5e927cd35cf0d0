//! Adaptive Simpson quadrature for vector-valued integrands.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SimpsonOptions {
    /// Absolute tolerance on every component of the integral.
    pub tol: f64,
    /// Subdivisions always performed before the error test.
    pub min_depth: u32,
    pub max_depth: u32,
}

impl Default for SimpsonOptions {
    fn default() -> Self {
        SimpsonOptions {
            tol: 1e-9,
            min_depth: 3,
            max_depth: 40,
        }
    }
}

struct State {
    /// Error estimates of pieces accepted at maximum depth.
    unresolved: f64,
    worst: (f64, f64, f64),
    evaluations: usize,
}

/// Integrates `f` over `[a, b]`; the error test is applied to the largest
/// component.
pub fn integrate<const N: usize, F>(f: &F, a: f64, b: f64, opts: &SimpsonOptions) -> Result<[f64; N]>
where
    F: Fn(f64) -> [f64; N],
{
    if b <= a {
        return Ok([0.0; N]);
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = simpson(a, b, &fa, &fm, &fb);
    let mut state = State {
        unresolved: 0.0,
        worst: (0.0, a, b),
        evaluations: 3,
    };
    let out = recurse(f, a, b, &fa, &fm, &fb, &whole, opts.tol, 0, opts, &mut state);
    if state.unresolved > opts.tol {
        let (_, lo, hi) = state.worst;
        return Err(Error::Quadrature {
            error: state.unresolved,
            tolerance: opts.tol,
            lo,
            hi,
        });
    }
    Ok(out)
}

fn simpson<const N: usize>(a: f64, b: f64, fa: &[f64; N], fm: &[f64; N], fb: &[f64; N]) -> [f64; N] {
    let h = (b - a) / 6.0;
    std::array::from_fn(|i| h * (fa[i] + 4.0 * fm[i] + fb[i]))
}

#[allow(clippy::too_many_arguments)]
fn recurse<const N: usize, F>(
    f: &F,
    a: f64,
    b: f64,
    fa: &[f64; N],
    fm: &[f64; N],
    fb: &[f64; N],
    whole: &[f64; N],
    tol: f64,
    depth: u32,
    opts: &SimpsonOptions,
    state: &mut State,
) -> [f64; N]
where
    F: Fn(f64) -> [f64; N],
{
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    state.evaluations += 2;
    let left = simpson(a, m, fa, &flm, fm);
    let right = simpson(m, b, fm, &frm, fb);
    let err = (0..N)
        .map(|i| (left[i] + right[i] - whole[i]).abs())
        .fold(0.0, f64::max)
        / 15.0;
    let refined: [f64; N] = std::array::from_fn(|i| left[i] + right[i] + (left[i] + right[i] - whole[i]) / 15.0);
    if depth >= opts.min_depth && err <= tol {
        return refined;
    }
    if depth >= opts.max_depth {
        state.unresolved += err;
        if err > state.worst.0 {
            state.worst = (err, a, b);
        }
        return refined;
    }
    let l = recurse(f, a, m, fa, &flm, fm, &left, 0.5 * tol, depth + 1, opts, state);
    let r = recurse(f, m, b, fm, &frm, fb, &right, 0.5 * tol, depth + 1, opts, state);
    std::array::from_fn(|i| l[i] + r[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_smooth_and_kinked_functions() {
        let opts = SimpsonOptions::default();
        let v = integrate(&|x: f64| [x.sin(), x * x], 0.0, PI, &opts).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-9);
        assert!((v[1] - PI.powi(3) / 3.0).abs() < 1e-9);
        let kink = integrate(&|x: f64| [(x - 1.0).abs().min(0.7)], 0.0, 3.0, &opts).unwrap();
        // 0.7^2/2 rising on each side of the kink, then flat at 0.7
        let exact = 2.0 * 0.245 + 0.7 * (0.3 + 1.3);
        assert!((kink[0] - exact).abs() < 1e-9, "{}", kink[0]);
    }

    #[test]
    fn reports_non_convergence() {
        let opts = SimpsonOptions {
            tol: 1e-14,
            min_depth: 0,
            max_depth: 4,
        };
        let err = integrate(&|x: f64| [(50.0 * x).sin().abs()], 0.0, 1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
