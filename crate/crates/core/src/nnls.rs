//! Nonnegative least squares by the Lawson–Hanson active-set method.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimizes `‖G x − y‖²` subject to `x ≥ 0`.
///
/// The dual tolerance is `1e-12 ‖Gᵀy‖∞`. Subproblems on the passive set are
/// solved by SVD so that rank-deficient columns do not break the iteration.
pub fn nnls(g: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = g.shape();
    if y.len() != m {
        return Err(Error::Dimension {
            context: "nnls right-hand side",
            expected: m,
            found: y.len(),
        });
    }
    if g.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("nnls inputs must be finite".into()));
    }
    let mut x = DVector::zeros(n);
    if n == 0 {
        return Ok(x);
    }
    let gty = g.transpose() * y;
    let tol = 1e-12 * gty.amax();
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;
    let mut w = gty.clone();
    for _ in 0..max_outer {
        // most violated dual among the active (zero) variables
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let j = match candidate {
            Some(j) if w[j] > tol => j,
            _ => return Ok(x),
        };
        passive[j] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            if inner > 3 * n + 10 {
                return Err(Error::IterationLimit(inner));
            }
            let z = solve_subset(g, y, &passive);
            let infeasible: Vec<usize> = (0..n).filter(|&i| passive[i] && z[i] <= 0.0).collect();
            if infeasible.is_empty() {
                x = z;
                break;
            }
            let alpha = infeasible
                .iter()
                .map(|&i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            x += (&z - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= 1e-15 * x.amax().max(f64::MIN_POSITIVE) {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            // the entering variable may have been dropped immediately
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        w = g.transpose() * (y - g * &x);
    }
    Err(Error::IterationLimit(max_outer))
}

/// Unconstrained least squares restricted to the passive columns.
fn solve_subset(g: &DMatrix<f64>, y: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let sub = DMatrix::from_fn(g.nrows(), cols.len(), |r, c| g[(r, cols[c])]);
    let svd = sub.svd(true, true);
    let eps = 1e-13 * svd.singular_values.amax();
    let sol = svd.solve(y, eps).expect("singular vectors requested");
    let mut z = DVector::zeros(passive.len());
    for (k, &i) in cols.iter().enumerate() {
        z[i] = sol[k];
    }
    z
}

/// Least squares with a nonnegativity flag per unknown. Free unknowns are
/// split into positive and negative parts.
pub fn nnls_mixed(
    g: &DMatrix<f64>,
    y: &DVector<f64>,
    nonnegative: &[bool],
) -> Result<DVector<f64>> {
    let n = g.ncols();
    if nonnegative.len() != n {
        return Err(Error::Dimension {
            context: "nnls sign constraints",
            expected: n,
            found: nonnegative.len(),
        });
    }
    let free: Vec<usize> = (0..n).filter(|&i| !nonnegative[i]).collect();
    if free.is_empty() {
        return nnls(g, y);
    }
    let mut ext = DMatrix::zeros(g.nrows(), n + free.len());
    ext.view_mut((0, 0), (g.nrows(), n)).copy_from(g);
    for (k, &i) in free.iter().enumerate() {
        ext.set_column(n + k, &(-g.column(i)));
    }
    let z = nnls(&ext, y)?;
    let mut x = z.rows(0, n).into_owned();
    for (k, &i) in free.iter().enumerate() {
        x[i] -= z[n + k];
    }
    Ok(x)
}

/// Largest violation of the optimality conditions at `x`: negative entries,
/// positive gradient components at zero entries, and nonzero gradient
/// components at positive entries. Gradient here is `Gᵀ(y − Gx)`.
pub fn kkt_violation(g: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let w = g.transpose() * (y - g * x);
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        if x[i] < 0.0 {
            worst = worst.max(-x[i]);
        }
        if x[i] > 0.0 {
            worst = worst.max(w[i].abs());
        } else {
            worst = worst.max(w[i]);
        }
    }
    worst
}
