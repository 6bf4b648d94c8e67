//! Nelder–Mead simplex minimization inside a box.
//!
//! Trial points outside the box are clamped onto it, so every evaluated
//! point is feasible.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<const D: usize> {
    pub lower: [f64; D],
    pub upper: [f64; D],
}

impl<const D: usize> Bounds<D> {
    pub fn clamp(&self, mut x: [f64; D]) -> [f64; D] {
        for (k, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[k], self.upper[k]);
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iter: usize,
    /// Stop when every vertex lies within `xtol·(1+|x_k|)` of the best one
    /// in each coordinate...
    pub xtol: f64,
    /// ...and the function values spread less than `ftol·(1+|f_best|)`.
    pub ftol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexResult<const D: usize> {
    pub x: [f64; D],
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn add<const D: usize>(a: &[f64; D], b: &[f64; D], t: f64) -> [f64; D] {
    // a + t·(b − a)
    std::array::from_fn(|k| a[k] + t * (b[k] - a[k]))
}

/// Minimizes `f` from `start` with initial edge lengths `step`. Non-finite
/// values are treated as `+∞`.
pub fn minimize<const D: usize, F: FnMut(&[f64; D]) -> f64>(
    mut f: F,
    start: [f64; D],
    step: [f64; D],
    bounds: &Bounds<D>,
    opts: &SimplexOptions,
) -> SimplexResult<D> {
    let mut eval = |x: &[f64; D]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let start = bounds.clamp(start);
    let mut simplex: Vec<([f64; D], f64)> = Vec::with_capacity(D + 1);
    simplex.push((start, eval(&start)));
    for k in 0..D {
        let mut x = start;
        x[k] += step[k];
        if x[k] > bounds.upper[k] {
            x[k] = start[k] - step[k];
        }
        let x = bounds.clamp(x);
        simplex.push((x, eval(&x)));
    }

    let mut iterations = 0;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best_x, best_f) = simplex[0];
        let worst_f = simplex[D].1;
        let x_done = simplex[1..]
            .iter()
            .all(|(x, _)| (0..D).all(|k| (x[k] - best_x[k]).abs() <= opts.xtol * (1.0 + best_x[k].abs())));
        let f_done = (worst_f - best_f).abs() <= opts.ftol * (1.0 + best_f.abs());
        if x_done && f_done {
            return SimplexResult { x: best_x, f: best_f, iterations, converged: true };
        }
        if iterations >= opts.max_iter {
            return SimplexResult { x: best_x, f: best_f, iterations, converged: false };
        }
        iterations += 1;

        let mut centroid = [0.0; D];
        for (x, _) in &simplex[..D] {
            for k in 0..D {
                centroid[k] += x[k] / D as f64;
            }
        }
        let worst = simplex[D].0;
        let reflect = bounds.clamp(add(&centroid, &worst, -1.0));
        let fr = eval(&reflect);
        if fr < best_f {
            let expand = bounds.clamp(add(&centroid, &worst, -2.0));
            let fe = eval(&expand);
            simplex[D] = if fe < fr { (expand, fe) } else { (reflect, fr) };
            continue;
        }
        if fr < simplex[D - 1].1 {
            simplex[D] = (reflect, fr);
            continue;
        }
        let (contract, fc) = if fr < worst_f {
            let c = bounds.clamp(add(&centroid, &worst, -0.5));
            (c, eval(&c))
        } else {
            let c = bounds.clamp(add(&centroid, &worst, 0.5));
            (c, eval(&c))
        };
        if fc < worst_f.min(fr) {
            simplex[D] = (contract, fc);
            continue;
        }
        for v in simplex.iter_mut().skip(1) {
            let x = add(&best_x, &v.0, 0.5);
            *v = (x, eval(&x));
        }
    }
}
