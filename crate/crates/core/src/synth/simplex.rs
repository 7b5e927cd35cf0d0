//! Nelder–Mead downhill simplex.

/// Result of one simplex run.
#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_evaluations: usize,
    /// Stop when the spread of values over the simplex falls below this.
    pub value_tol: f64,
    /// Stop when every vertex is this close to the best one.
    pub position_tol: f64,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimises `f` from the simplex `{start} ∪ {start + steps[i]}`.
///
/// Non-finite values are treated as infeasible and never accepted over a
/// finite one. `stop` is consulted after every improvement of the best vertex.
pub fn minimize<F, S>(
    f: &mut F,
    start: &[f64],
    steps: &[Vec<f64>],
    opts: &SimplexOptions,
    mut stop: S,
) -> SimplexOutcome
where
    F: FnMut(&[f64]) -> f64,
    S: FnMut(&[f64], f64) -> bool,
{
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(start, &mut evals);
    simplex.push((start.to_vec(), v0));
    for step in steps.iter().take(n) {
        let x: Vec<f64> = start.iter().zip(step).map(|(a, b)| a + b).collect();
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut simplex);
    if stop(&simplex[0].0, simplex[0].1) {
        return finish(simplex, evals);
    }

    while evals < opts.max_evaluations {
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if best.is_finite() && (worst - best).abs() <= opts.value_tol {
            break;
        }
        let spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.position_tol {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(REFLECT * EXPAND);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(REFLECT * CONTRACT);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-CONTRACT);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = x0.iter().zip(&vertex.0).map(|(a, b)| a + SHRINK * (b - a)).collect();
                    let v = eval(&x, &mut evals);
                    *vertex = (x, v);
                }
            }
        }
        let previous_best = simplex[0].1;
        order(&mut simplex);
        if simplex[0].1 < previous_best && stop(&simplex[0].0, simplex[0].1) {
            break;
        }
    }
    finish(simplex, evals)
}

fn finish(mut simplex: Vec<(Vec<f64>, f64)>, evaluations: usize) -> SimplexOutcome {
    let (x, value) = simplex.swap_remove(0);
    SimplexOutcome { x, value, evaluations }
}
