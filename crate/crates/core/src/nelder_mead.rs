//! Box-constrained Nelder-Mead simplex search.
//!
//! Points live in the unit cube; callers map them onto their own bounds.
//! Trial points are projected back into the cube, which keeps the search
//! feasible without penalty terms.

pub(crate) struct Options {
    pub max_evals: usize,
    /// Edge length of the initial simplex in unit coordinates.
    pub initial_step: f64,
    /// Stop once the best value is at or below this.
    pub target: f64,
    /// Stop once the simplex diameter falls below this.
    pub x_tol: f64,
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub evals: usize,
    /// Best value after each completed iteration.
    pub history: Vec<f64>,
}

const ALPHA: f64 = 1.0;
const GAMMA: f64 = 2.0;
const RHO: f64 = 0.5;
const SIGMA: f64 = 0.5;

fn project(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

fn towards(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    let mut p: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect();
    project(&mut p);
    p
}

pub(crate) fn minimize<F>(mut f: F, x0: &[f64], opts: &Options) -> Outcome
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    let mut start = x0.to_vec();
    project(&mut start);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(&start, &mut evals);
    simplex.push((start.clone(), f0));
    for k in 0..n {
        let mut v = start.clone();
        // step inward when the start sits on the upper face
        v[k] += if v[k] + opts.initial_step <= 1.0 { opts.initial_step } else { -opts.initial_step };
        project(&mut v);
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    let mut history = Vec::new();
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if simplex[0].1 <= opts.target || evals + n + 2 > opts.max_evals || diameter < opts.x_tol || n == 0 {
            break;
        }

        let worst = simplex[n].clone();
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|(v, _)| v[k]).sum::<f64>() / n as f64).collect();

        let xr = towards(&centroid, &worst.0, -ALPHA);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = towards(&centroid, &worst.0, -GAMMA);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = towards(&centroid, &xr, RHO);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = towards(&centroid, &worst.0, RHO);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let v = towards(&best, &vertex.0, SIGMA);
            let fv = eval(&v, &mut evals);
            *vertex = (v, fv);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, _) = simplex.swap_remove(0);
    Outcome { x, evals, history }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> Options {
        Options { max_evals: 2000, initial_step: 0.1, target: 1e-14, x_tol: 1e-12 }
    }

    #[test]
    fn quadratic_bowl() {
        let out = minimize(|x| (x[0] - 0.3).powi(2) + 10.0 * (x[1] - 0.7).powi(2), &[0.9, 0.1], &opts());
        assert!((out.x[0] - 0.3).abs() < 1e-6 && (out.x[1] - 0.7).abs() < 1e-6);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn minimum_on_boundary() {
        let out = minimize(|x| (x[0] - 1.5).powi(2) + (x[1] + 0.2).powi(2), &[0.5, 0.5], &opts());
        assert!((out.x[0] - 1.0).abs() < 1e-6 && out.x[1].abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_scaled() {
        let f = |x: &[f64]| {
            let (a, b) = (2.0 * x[0], 2.0 * x[1]);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let out = minimize(f, &[0.1, 0.9], &Options { max_evals: 5000, ..opts() });
        assert!((out.x[0] - 0.5).abs() < 1e-4 && (out.x[1] - 0.5).abs() < 1e-4, "{:?}", out.x);
    }

    #[test]
    fn respects_eval_budget() {
        let out = minimize(|x| x[0].sin() + x[1].cos(), &[0.5, 0.5], &Options { max_evals: 10, ..opts() });
        assert!(out.evals <= 10);
    }
}
