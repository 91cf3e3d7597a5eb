//! Damped Gauss–Newton (Levenberg–Marquardt) least squares for small
//! parameter counts, with box bounds, central-difference Jacobians and
//! curvature-based uncertainties.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math;

use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative step for central-difference Jacobians.
    pub jacobian_rel_step: f64,
    /// Stop when the sum of squares decreases by less than this fraction.
    pub ftol: f64,
    /// Stop when every parameter moves by less than this fraction of its scale.
    pub xtol: f64,
    /// Stop when the scaled gradient falls below this.
    pub gtol: f64,
    /// Initial damping.
    pub lambda0: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            jacobian_rel_step: 1e-6,
            ftol: 1e-12,
            xtol: 1e-10,
            gtol: 1e-10,
            lambda0: 1e-3,
        }
    }
}

/// Fitted parameters with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// One-sigma uncertainties from the local quadratic model; present only
    /// when the fit converged. Unidentifiable parameters carry infinity.
    pub stderr: Option<Vec<f64>>,
    /// Indices of parameters whose curvature is singular at the optimum.
    pub unidentifiable: Vec<usize>,
    /// Euclidean norm of the residual vector at the optimum.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

/// Minimize `‖residuals(x)‖²` over the box `lower ≤ x ≤ upper`.
///
/// `scales` carries the characteristic magnitude of each parameter (used for
/// difference steps and the step-size stop); pass the initial guess magnitude
/// when nothing better is known. Accepted steps strictly decrease the sum of
/// squares; damping grows on rejection and shrinks on acceptance.
/// Deterministic for identical inputs.
pub fn least_squares<F>(
    mut residuals: F,
    names: &[String],
    init: &[f64],
    lower: &[f64],
    upper: &[f64],
    scales: &[f64],
    opts: &FitOptions,
) -> Result<FitResult, FitError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let n = init.len();
    if n == 0 || lower.len() != n || upper.len() != n || names.len() != n || scales.len() != n {
        return Err(FitError::BadSpec(
            "parameter vectors must be non-empty and consistent",
        ));
    }
    for j in 0..n {
        if !(lower[j] <= init[j] && init[j] <= upper[j]) {
            return Err(FitError::BadSpec("initial guess outside bounds"));
        }
        if !(scales[j] > 0.0) || !scales[j].is_finite() {
            return Err(FitError::BadSpec(
                "parameter scales must be finite and positive",
            ));
        }
    }

    let mut x: Vec<f64> = init.to_vec();
    let scale: Vec<f64> = scales.to_vec();

    let mut r = residuals(&x)?;
    let m = r.len();
    if m < n {
        return Err(FitError::NotEnoughData {
            residuals: m,
            params: n,
        });
    }
    let mut ssq = dot(&r, &r);
    if !ssq.is_finite() {
        return Err(FitError::EvaluationFailed);
    }

    let mut lambda = opts.lambda0;
    let mut converged = false;
    let mut iterations = 0usize;

    while iterations < opts.max_iterations {
        iterations += 1;
        let jac = jacobian(&mut residuals, &x, lower, upper, &scale, opts, m)?;
        let (a, g) = normal_equations(&jac, &r, n, m);

        // scaled-gradient stop: already at a stationary point
        let grad = (0..n)
            .map(|j| math::abs(g[j]) * scale[j])
            .fold(0.0f64, f64::max);
        if grad <= opts.gtol * ssq.max(1e-300) {
            converged = true;
            break;
        }

        let mut stepped = false;
        let mut rejects = 0usize;
        while rejects < 60 {
            let mut damped = a.clone();
            for j in 0..n {
                damped[j * n + j] += lambda * a[j * n + j].max(1e-30 * ssq.max(1e-300));
            }
            if let Some(delta) = solve_sym(&damped, &g, n) {
                let mut x_new = x.clone();
                for j in 0..n {
                    x_new[j] = (x[j] - delta[j]).clamp(lower[j], upper[j]);
                }
                if let Ok(r_new) = residuals(&x_new) {
                    let ssq_new = dot(&r_new, &r_new);
                    if ssq_new.is_finite() && ssq_new < ssq {
                        // accepted: strict decrease
                        let max_move = (0..n)
                            .map(|j| math::abs(x_new[j] - x[j]) / scale[j])
                            .fold(0.0f64, f64::max);
                        let drop = (ssq - ssq_new) / ssq.max(1e-300);
                        x = x_new;
                        r = r_new;
                        ssq = ssq_new;
                        lambda = (lambda / 3.0).max(1e-14);
                        stepped = true;
                        if drop < opts.ftol || max_move < opts.xtol {
                            converged = true;
                        }
                        break;
                    }
                }
            }
            lambda = (lambda * 4.0).min(1e14);
            rejects += 1;
        }
        if !stepped {
            // damping exhausted without an acceptable step: no further
            // progress is possible from here
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    // curvature-based uncertainties at the optimum
    let jac = jacobian(&mut residuals, &x, lower, upper, &scale, opts, m)?;
    let (a, _) = normal_equations(&jac, &r, n, m);
    let (cov, unidentifiable) = invert_normalized(&a, n);
    let stderr = if converged && m > n {
        let sigma2 = ssq / (m - n) as f64;
        Some(
            (0..n)
                .map(|j| {
                    if unidentifiable.contains(&j) {
                        f64::INFINITY
                    } else {
                        math::sqrt((cov[j * n + j] * sigma2).max(0.0))
                    }
                })
                .collect(),
        )
    } else {
        None
    };

    Ok(FitResult {
        names: names.to_vec(),
        values: x,
        stderr,
        unidentifiable,
        residual_norm: math::sqrt(ssq),
        iterations,
        converged,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn jacobian<F>(
    residuals: &mut F,
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
    scale: &[f64],
    opts: &FitOptions,
    m: usize,
) -> Result<Vec<f64>, FitError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let n = x.len();
    let mut jac = alloc::vec![0.0f64; m * n];
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = opts.jacobian_rel_step * math::abs(x[j]).max(scale[j]);
        let hi = (x[j] + h).min(upper[j]);
        let lo = (x[j] - h).max(lower[j]);
        let span = hi - lo;
        if span == 0.0 {
            continue; // pinned by bounds: leave a zero column (reported singular)
        }
        xp[j] = hi;
        let rp = residuals(&xp)?;
        xp[j] = lo;
        let rm = residuals(&xp)?;
        xp[j] = x[j];
        for i in 0..m.min(rp.len()).min(rm.len()) {
            jac[i * n + j] = (rp[i] - rm[i]) / span;
        }
    }
    Ok(jac)
}

fn normal_equations(jac: &[f64], r: &[f64], n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = alloc::vec![0.0f64; n * n];
    let mut g = alloc::vec![0.0f64; n];
    for i in 0..m {
        for j in 0..n {
            let jij = jac[i * n + j];
            g[j] += jij * r[i];
            for k in j..n {
                a[j * n + k] += jij * jac[i * n + k];
            }
        }
    }
    for j in 0..n {
        for k in 0..j {
            a[j * n + k] = a[k * n + j];
        }
    }
    (a, g)
}

/// Gaussian elimination with partial pivoting for the (small, symmetric
/// positive semi-definite) damped system.
fn solve_sym(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if math::abs(m[row * n + col]) > math::abs(m[piv * n + col]) {
                piv = row;
            }
        }
        if m[piv * n + col] == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for row in (0..n).rev() {
        for k in row + 1..n {
            let xk = x[k];
            x[row] -= m[row * n + k] * xk;
        }
        x[row] /= m[row * n + row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// Invert the curvature matrix after normalizing it to unit diagonal, so
/// near-singular pivots reflect parameter correlations rather than raw
/// magnitude differences. The returned index list names the unidentifiable
/// parameters (zero curvature or fully degenerate); their rows and columns
/// are excluded from the inverse.
fn invert_normalized(a: &[f64], n: usize) -> (Vec<f64>, Vec<usize>) {
    let mut singular: Vec<usize> = Vec::new();
    let mut d = alloc::vec![0.0f64; n];
    for j in 0..n {
        let diag = a[j * n + j];
        if diag > 0.0 && diag.is_finite() {
            d[j] = math::sqrt(diag);
        } else {
            singular.push(j);
            d[j] = 1.0;
        }
    }
    // correlation-like matrix with unit diagonal
    let mut m = alloc::vec![0.0f64; n * n];
    for r in 0..n {
        for c in 0..n {
            m[r * n + c] = a[r * n + c] / (d[r] * d[c]);
        }
    }
    for &j in &singular {
        for k in 0..n {
            m[j * n + k] = 0.0;
            m[k * n + j] = 0.0;
        }
        m[j * n + j] = 1.0;
    }
    let mut inv = alloc::vec![0.0f64; n * n];
    for j in 0..n {
        inv[j * n + j] = 1.0;
    }
    const PIVOT_TOL: f64 = 1e-12;
    for col in 0..n {
        if math::abs(m[col * n + col]) <= PIVOT_TOL {
            if !singular.contains(&col) {
                singular.push(col);
            }
            for k in 0..n {
                m[col * n + k] = 0.0;
                m[k * n + col] = 0.0;
                inv[col * n + k] = 0.0;
            }
            m[col * n + col] = 1.0;
            continue;
        }
        let pivot = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= pivot;
            inv[col * n + k] /= pivot;
        }
        for row in 0..n {
            if row != col {
                let f = m[row * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        m[row * n + k] -= f * m[col * n + k];
                        inv[row * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    // undo the normalization: cov = D^{-1/2} C^{-1} D^{-1/2}
    let mut cov = alloc::vec![0.0f64; n * n];
    for r in 0..n {
        for c in 0..n {
            cov[r * n + c] = inv[r * n + c] / (d[r] * d[c]);
        }
    }
    singular.sort_unstable();
    (cov, singular)
}
