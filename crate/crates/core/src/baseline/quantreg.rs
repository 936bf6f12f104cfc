//! Linear quantile regression by a primal-dual interior-point method
//! (Frisch–Newton with a Mehrotra predictor-corrector step).
//!
//! The check-loss problem is solved through its bounded dual
//!
//! ```text
//! max y'a  s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1,
//! ```
//!
//! whose equality-constraint multipliers are the regression coefficients.
//! The interior-point iterate is finally snapped to the nearest basic
//! solution (an exact fit through `p` observations) when that does not
//! increase the loss, so degenerate and noiseless inputs come back exact.

use nalgebra::{DMatrix, DVector};

use crate::data::PredictorResponsePairs;
use crate::error::{invalid, GarError, Result};

const STEP_DAMPING: f64 = 0.99995;
const MAX_ITER: usize = 100;

/// `rho_tau(u) = u (tau - 1{u < 0})`.
pub fn check_loss(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

/// Total check loss of `beta` on `pairs`.
pub fn check_objective(pairs: &PredictorResponsePairs, beta: &[f64], tau: f64) -> f64 {
    (0..pairs.n_pairs())
        .map(|i| check_loss(pairs.y[i] - dot(pairs.x.row(i), beta), tau))
        .sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sum_i d_i x_i x_i'`.
fn weighted_gram(pairs: &PredictorResponsePairs, d: &[f64]) -> DMatrix<f64> {
    let p = pairs.dim_beta();
    let mut m = DMatrix::zeros(p, p);
    for (i, &di) in d.iter().enumerate() {
        let x = pairs.x.row(i);
        for a in 0..p {
            let s = di * x[a];
            for b in 0..=a {
                m[(a, b)] += s * x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            m[(b, a)] = m[(a, b)];
        }
    }
    m
}

/// `sum_i v_i x_i`.
fn weighted_sum(pairs: &PredictorResponsePairs, v: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(pairs.dim_beta());
    for (i, &vi) in v.iter().enumerate() {
        for (o, xj) in out.iter_mut().zip(pairs.x.row(i)) {
            *o += vi * xj;
        }
    }
    out
}

/// Largest step in `(0, 1e20]` keeping `v + t dv` positive.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1e20, f64::min)
}

/// Coefficient vector (intercept first) minimising the check loss at `tau`.
pub fn quantile_regression(pairs: &PredictorResponsePairs, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid("tau", format!("must lie in (0, 1), got {tau}")));
    }
    let n = pairs.n_pairs();
    let p = pairs.dim_beta();
    if n <= p {
        return Err(invalid(
            "pairs",
            format!("quantile regression needs more than {p} observations, got {n}"),
        ));
    }
    let gram = weighted_gram(pairs, &vec![1.0; n]);
    let scale = gram.diagonal().max().max(1.0);
    let Some(gram_chol) = gram.clone().cholesky() else {
        return Err(GarError::SingularCurvature("rank-deficient quantile regression design"));
    };
    if gram.clone().symmetric_eigenvalues().min() <= 1e-12 * scale {
        return Err(GarError::SingularCurvature("rank-deficient quantile regression design"));
    }

    let c: Vec<f64> = pairs.y.iter().map(|v| -v).collect();
    let y_scale = pairs.y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);

    // Primal a = x, slack s = 1 - x, dual y, bound multipliers z (lower), w (upper).
    let mut x = vec![1.0 - tau; n];
    let mut s = vec![tau; n];
    let mut y = gram_chol.solve(&weighted_sum(pairs, &c));
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let r = c[i] - dot(pairs.x.row(i), y.as_slice());
        let small = if r.abs() < 1e-6 * y_scale { 1e-6 * y_scale } else { 0.0 };
        z[i] = r.max(0.0) + small;
        w[i] = (-r).max(0.0) + small;
    }

    let tol = 1e-11 * y_scale * n as f64;
    let mut gap: f64 = (0..n).map(|i| z[i] * x[i] + w[i] * s[i]).sum();
    let mut iter = 0;
    while gap > tol && iter < MAX_ITER {
        iter += 1;
        let dual_res: Vec<f64> = (0..n)
            .map(|i| c[i] - dot(pairs.x.row(i), y.as_slice()) - z[i] + w[i])
            .collect();
        let q: Vec<f64> = (0..n).map(|i| 1.0 / (z[i] / x[i] + w[i] / s[i])).collect();
        let Some(chol) = weighted_gram(pairs, &q).cholesky() else {
            break;
        };

        // Affine-scaling predictor.
        let rho: Vec<f64> = (0..n).map(|i| dual_res[i] + z[i] - w[i]).collect();
        let qr: Vec<f64> = (0..n).map(|i| q[i] * rho[i]).collect();
        let mut dy = chol.solve(&weighted_sum(pairs, &qr));
        let mut dx: Vec<f64> = (0..n)
            .map(|i| q[i] * (dot(pairs.x.row(i), dy.as_slice()) - rho[i]))
            .collect();
        let mut ds: Vec<f64> = dx.iter().map(|v| -v).collect();
        let mut dz: Vec<f64> = (0..n).map(|i| -z[i] * (1.0 + dx[i] / x[i])).collect();
        let mut dw: Vec<f64> = (0..n).map(|i| -w[i] * (1.0 + ds[i] / s[i])).collect();
        let mut fp = (STEP_DAMPING * max_step(&x, &dx).min(max_step(&s, &ds))).min(1.0);
        let mut fd = (STEP_DAMPING * max_step(&z, &dz).min(max_step(&w, &dw))).min(1.0);

        if fp.min(fd) < 1.0 {
            // Centring and second-order correction.
            let mu = gap;
            let g: f64 = (0..n)
                .map(|i| (z[i] + fd * dz[i]) * (x[i] + fp * dx[i]) + (w[i] + fd * dw[i]) * (s[i] + fp * ds[i]))
                .sum();
            let mu = mu * (g / mu).powi(3) / (2 * n) as f64;
            let dxdz: Vec<f64> = (0..n).map(|i| dx[i] * dz[i]).collect();
            let dsdw: Vec<f64> = (0..n).map(|i| ds[i] * dw[i]).collect();
            let rho: Vec<f64> = (0..n)
                .map(|i| {
                    dual_res[i] + z[i] - w[i] - mu / x[i] + mu / s[i] + dxdz[i] / x[i] - dsdw[i] / s[i]
                })
                .collect();
            let qr: Vec<f64> = (0..n).map(|i| q[i] * rho[i]).collect();
            dy = chol.solve(&weighted_sum(pairs, &qr));
            dx = (0..n)
                .map(|i| q[i] * (dot(pairs.x.row(i), dy.as_slice()) - rho[i]))
                .collect();
            ds = dx.iter().map(|v| -v).collect();
            dz = (0..n)
                .map(|i| (mu - x[i] * z[i] - dxdz[i] - z[i] * dx[i]) / x[i])
                .collect();
            dw = (0..n)
                .map(|i| (mu - s[i] * w[i] - dsdw[i] - w[i] * ds[i]) / s[i])
                .collect();
            fp = (STEP_DAMPING * max_step(&x, &dx).min(max_step(&s, &ds))).min(1.0);
            fd = (STEP_DAMPING * max_step(&z, &dz).min(max_step(&w, &dw))).min(1.0);
        }

        for i in 0..n {
            x[i] += fp * dx[i];
            s[i] += fp * ds[i];
            z[i] += fd * dz[i];
            w[i] += fd * dw[i];
        }
        y += fd * dy;
        gap = (0..n).map(|i| z[i] * x[i] + w[i] * s[i]).sum();
    }

    let beta: Vec<f64> = y.iter().map(|v| -v).collect();
    Ok(snap_to_vertex(pairs, beta, tau))
}

/// Replace `beta` with the exact fit through the `p` observations closest
/// to its hyperplane when that fit has no larger loss.
fn snap_to_vertex(pairs: &PredictorResponsePairs, beta: Vec<f64>, tau: f64) -> Vec<f64> {
    let n = pairs.n_pairs();
    let p = pairs.dim_beta();
    let mut order: Vec<usize> = (0..n).collect();
    let resid = |i: usize| (pairs.y[i] - dot(pairs.x.row(i), &beta)).abs();
    order.sort_by(|&a, &b| resid(a).total_cmp(&resid(b)).then(a.cmp(&b)));

    let basis = &order[..p];
    let m = DMatrix::from_fn(p, p, |r, c| pairs.x.row(basis[r])[c]);
    let rhs = DVector::from_iterator(p, basis.iter().map(|&i| pairs.y[i]));
    let Some(exact) = m.lu().solve(&rhs) else {
        return beta;
    };
    let exact: Vec<f64> = exact.iter().copied().collect();
    if exact.iter().any(|v| !v.is_finite()) {
        return beta;
    }
    let current = check_objective(pairs, &beta, tau);
    let snapped = check_objective(pairs, &exact, tau);
    if snapped <= current * (1.0 + 1e-12) + 1e-300 {
        exact
    } else {
        beta
    }
}
