//! Adaptive integrators for the three-component rate-equation system.
//!
//! Two steppers behind one interface: an explicit Dormand–Prince 5(4) pair
//! with a continuous 4th-order interpolant (the default), and a semi-implicit
//! Rosenbrock 4(3) method with analytic Jacobian for stiff parameter regimes.
//! Accepted steps are stored with their interpolation polynomial so the
//! trajectory can be sampled densely at arbitrary times afterwards.

use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Right-hand side (and, for the semi-implicit method, Jacobian) of a
/// three-dimensional ODE system.
pub trait System3 {
    fn rhs(&self, t: f64, y: &[f64; 3]) -> [f64; 3];

    /// `(∂f/∂y, ∂f/∂t)`; only required by the semi-implicit method.
    fn jacobian(&self, t: f64, y: &[f64; 3]) -> ([[f64; 3]; 3], [f64; 3]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMethod {
    /// Dormand–Prince 5(4), explicit adaptive.
    ExplicitAdaptive,
    /// Rosenbrock 4(3), semi-implicit; uses the analytic Jacobian.
    SemiImplicit,
}

/// Step-size control and tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Relative tolerance per component.
    pub rel_tol: f64,
    /// Absolute tolerance floor in state units (densities).
    pub abs_tol: f64,
    /// Upper bound on the step size [s].
    pub max_step: f64,
    pub method: IntegrationMethod,
    /// Accepted-step budget before giving up.
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1.0,
            max_step: f64::INFINITY,
            method: IntegrationMethod::ExplicitAdaptive,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) || !(self.max_step > 0.0) {
            return Err(IntegrateError::InvalidConfig);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrateError {
    InvalidConfig,
    InvalidSpan,
    /// The controller drove the step below the resolvable size (stiffness
    /// failure for the explicit method).
    StepSizeUnderflow {
        t: f64,
    },
    /// A state component became NaN or infinite.
    NonFinite {
        t: f64,
    },
    /// A state component went below `-abs_tol`.
    NegativeState {
        t: f64,
        component: usize,
        value: f64,
    },
    MaxStepsExceeded {
        t: f64,
    },
    /// Singular Rosenbrock stage matrix.
    SingularStageMatrix {
        t: f64,
    },
}

impl fmt::Display for IntegrateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegrateError::InvalidConfig => write!(f, "integrator tolerances must be positive"),
            IntegrateError::InvalidSpan => {
                write!(f, "integration span must be finite with t1 > t0")
            }
            IntegrateError::StepSizeUnderflow { t } => {
                write!(f, "step size underflow at t = {t:e} s")
            }
            IntegrateError::NonFinite { t } => {
                write!(f, "state became non-finite at t = {t:e} s")
            }
            IntegrateError::NegativeState {
                t,
                component,
                value,
            } => write!(
                f,
                "component {component} fell to {value:e} (below -abs_tol) at t = {t:e} s"
            ),
            IntegrateError::MaxStepsExceeded { t } => {
                write!(f, "step budget exhausted at t = {t:e} s")
            }
            IntegrateError::SingularStageMatrix { t } => {
                write!(f, "singular stage matrix at t = {t:e} s")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for IntegrateError {}

/// One accepted step with its interpolation polynomial in θ = (t − t0)/h,
/// stored as coefficients of powers θ⁰..θ⁴ per component.
#[derive(Debug, Clone, Copy)]
struct DenseStep {
    t0: f64,
    h: f64,
    poly: [[f64; 3]; 5],
}

impl DenseStep {
    fn eval(&self, t: f64) -> [f64; 3] {
        let theta = (t - self.t0) / self.h;
        let mut y = [0.0; 3];
        for i in 0..3 {
            let c = &self.poly;
            y[i] = c[0][i]
                + theta * (c[1][i] + theta * (c[2][i] + theta * (c[3][i] + theta * c[4][i])));
        }
        y
    }
}

/// Densely queryable solution of one integration run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    steps: Vec<DenseStep>,
    t0: f64,
    t_end: f64,
    y_end: [f64; 3],
    clip_floor: f64,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn final_state(&self) -> [f64; 3] {
        self.y_end
    }

    /// State at an arbitrary `t` inside the span (clamped to the ends).
    /// Interpolant undershoots below the absolute tolerance are clipped to 0.
    pub fn sample(&self, t: f64) -> [f64; 3] {
        if self.steps.is_empty() {
            return self.y_end;
        }
        let t = t.clamp(self.t0, self.t_end);
        // binary search for the step containing t
        let mut lo = 0usize;
        let mut hi = self.steps.len() - 1;
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.steps[mid].t0 <= t {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let mut y = self.steps[lo].eval(t);
        for v in &mut y {
            if *v < 0.0 && *v > -self.clip_floor {
                *v = 0.0;
            }
        }
        y
    }

    /// Sample on a uniform grid of `n` points spanning `[a, b]`.
    pub fn sample_uniform(&self, a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<[f64; 3]>) {
        let n = n.max(2);
        let dt = (b - a) / (n - 1) as f64;
        let mut ts = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            let t = a + i as f64 * dt;
            ts.push(t);
            ys.push(self.sample(t));
        }
        (ts, ys)
    }
}

/// Integrate `sys` from `y0` over `[t0, t1]`.
pub fn integrate<S: System3>(
    sys: &S,
    y0: [f64; 3],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    cfg.validate()?;
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(IntegrateError::InvalidSpan);
    }
    match cfg.method {
        IntegrationMethod::ExplicitAdaptive => Dopri5::new(sys, cfg).run(y0, t0, t1),
        IntegrationMethod::SemiImplicit => Rosenbrock::new(sys, cfg).run(y0, t0, t1),
    }
}

fn err_norm(e: &[f64; 3], y: &[f64; 3], y_new: &[f64; 3], cfg: &IntegratorConfig) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        let sk = cfg.abs_tol + cfg.rel_tol * math::abs(y[i]).max(math::abs(y_new[i]));
        let r = e[i] / sk;
        acc += r * r;
    }
    math::sqrt(acc / 3.0)
}

fn check_state(y: &[f64; 3], t: f64, cfg: &IntegratorConfig) -> Result<[f64; 3], IntegrateError> {
    let mut out = *y;
    for (i, v) in out.iter_mut().enumerate() {
        if v.is_nan() || v.is_infinite() {
            return Err(IntegrateError::NonFinite { t });
        }
        if *v < 0.0 {
            if *v >= -cfg.abs_tol {
                *v = 0.0;
            } else {
                return Err(IntegrateError::NegativeState {
                    t,
                    component: i,
                    value: *v,
                });
            }
        }
    }
    Ok(out)
}

fn initial_step<S: System3>(
    sys: &S,
    y0: &[f64; 3],
    t0: f64,
    span: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    // Standard first-guess: h such that an Euler step moves each component by
    // a tolerance-sized amount; falls back to a small fraction of the span
    // when starting from a quiescent state.
    let f = sys.rhs(t0, y0);
    let mut h = span * 1e-6;
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for i in 0..3 {
        let sk = cfg.abs_tol + cfg.rel_tol * math::abs(y0[i]);
        d0 = d0.max(math::abs(y0[i]) / sk);
        d1 = d1.max(math::abs(f[i]) / sk);
    }
    if d1 > 0.0 && d0 > 0.0 {
        h = 0.01 * d0 / d1;
    }
    h.min(cfg.max_step).min(span)
}

// ---------------------------------------------------------------------------
// Dormand–Prince 5(4)
// ---------------------------------------------------------------------------

struct Dopri5<'a, S: System3> {
    sys: &'a S,
    cfg: &'a IntegratorConfig,
}

impl<'a, S: System3> Dopri5<'a, S> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    // difference between the 5th- and the embedded 4th-order weights
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    const D: [f64; 7] = [
        -12715105075.0 / 11282082432.0,
        0.0,
        87487479700.0 / 32700410799.0,
        -10690763975.0 / 1880347072.0,
        701980252875.0 / 199316789632.0,
        -1453857185.0 / 822651844.0,
        69997945.0 / 29380423.0,
    ];

    fn new(sys: &'a S, cfg: &'a IntegratorConfig) -> Self {
        Dopri5 { sys, cfg }
    }

    fn run(&self, y0: [f64; 3], t0: f64, t1: f64) -> Result<Trajectory, IntegrateError> {
        let cfg = self.cfg;
        let mut traj = Trajectory {
            steps: Vec::new(),
            t0,
            t_end: t1,
            y_end: y0,
            clip_floor: cfg.abs_tol,
            n_accepted: 0,
            n_rejected: 0,
        };
        let mut t = t0;
        let mut y = y0;
        let mut k1 = self.sys.rhs(t, &y);
        let mut h = initial_step(self.sys, &y, t, t1 - t0, cfg);
        let mut total = 0usize;

        while t < t1 {
            total += 1;
            if total > cfg.max_steps {
                return Err(IntegrateError::MaxStepsExceeded { t });
            }
            if h < 4.0 * f64::EPSILON * math::abs(t).max(math::abs(t1)) {
                return Err(IntegrateError::StepSizeUnderflow { t });
            }
            if t + h > t1 {
                h = t1 - t;
            }

            let mut k = [[0.0f64; 3]; 7];
            k[0] = k1;
            for s in 1..6 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = Self::A[s - 1][j];
                    if a != 0.0 {
                        for i in 0..3 {
                            ys[i] += h * a * kj[i];
                        }
                    }
                }
                k[s] = self.sys.rhs(t + Self::C[s - 1] * h, &ys);
            }
            // 5th-order solution; the last A row doubles as the weights (FSAL)
            let mut y_new = y;
            for (j, kj) in k.iter().enumerate().take(6) {
                let b = Self::A[5][j];
                if b != 0.0 {
                    for i in 0..3 {
                        y_new[i] += h * b * kj[i];
                    }
                }
            }
            k[6] = self.sys.rhs(t + h, &y_new);

            let mut e = [0.0f64; 3];
            for (j, kj) in k.iter().enumerate() {
                if Self::E[j] != 0.0 {
                    for i in 0..3 {
                        e[i] += h * Self::E[j] * kj[i];
                    }
                }
            }
            let err = err_norm(&e, &y, &y_new, cfg);

            if err <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
                let y_clipped = check_state(&y_new, t + h, cfg)?;
                traj.steps.push(self.dense_step(t, h, &y, &y_new, &k));
                traj.n_accepted += 1;
                t += h;
                y = y_clipped;
                k1 = if y_clipped == y_new {
                    k[6]
                } else {
                    self.sys.rhs(t, &y)
                };
                let scale = if err == 0.0 {
                    10.0
                } else {
                    (0.9 * math::powf(err, -0.2)).clamp(0.2, 10.0)
                };
                h = (h * scale).min(cfg.max_step);
            } else {
                traj.n_rejected += 1;
                if !y_new.iter().all(|v| v.is_finite()) || !err.is_finite() {
                    h *= 0.1;
                } else {
                    h *= (0.9 * math::powf(err, -0.2)).clamp(0.1, 0.9);
                }
            }
        }
        traj.t_end = t;
        traj.y_end = y;
        Ok(traj)
    }

    fn dense_step(
        &self,
        t: f64,
        h: f64,
        y: &[f64; 3],
        y_new: &[f64; 3],
        k: &[[f64; 3]; 7],
    ) -> DenseStep {
        // Continuous extension: r1 + θ r2 + θ(1−θ) r3 + θ²(1−θ) r4 + θ²(1−θ)² r5,
        // expanded into powers of θ.
        let mut poly = [[0.0f64; 3]; 5];
        for i in 0..3 {
            let ydiff = y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            let r1 = y[i];
            let r2 = ydiff;
            let r3 = bspl;
            let r4 = ydiff - h * k[6][i] - bspl;
            let mut r5 = 0.0;
            for (j, kj) in k.iter().enumerate() {
                r5 += Self::D[j] * kj[i];
            }
            r5 *= h;
            poly[0][i] = r1;
            poly[1][i] = r2 + r3;
            poly[2][i] = -r3 + r4 + r5;
            poly[3][i] = -r4 - 2.0 * r5;
            poly[4][i] = r5;
        }
        DenseStep { t0: t, h, poly }
    }
}

// ---------------------------------------------------------------------------
// Rosenbrock 4(3)
// ---------------------------------------------------------------------------

/// LU factorization of a 3×3 matrix with partial pivoting.
struct Lu3 {
    a: [[f64; 3]; 3],
    piv: [usize; 3],
}

impl Lu3 {
    #[allow(clippy::needless_range_loop)] // index form mirrors the elimination
    fn factor(mut a: [[f64; 3]; 3]) -> Option<Lu3> {
        let mut piv = [0usize, 1, 2];
        for col in 0..3 {
            let mut max_row = col;
            for row in col + 1..3 {
                if math::abs(a[row][col]) > math::abs(a[max_row][col]) {
                    max_row = row;
                }
            }
            if a[max_row][col] == 0.0 {
                return None;
            }
            if max_row != col {
                a.swap(col, max_row);
                piv.swap(col, max_row);
            }
            for row in col + 1..3 {
                let m = a[row][col] / a[col][col];
                a[row][col] = m;
                for c in col + 1..3 {
                    a[row][c] -= m * a[col][c];
                }
            }
        }
        Some(Lu3 { a, piv })
    }

    fn solve(&self, b: &[f64; 3]) -> [f64; 3] {
        let mut x = [b[self.piv[0]], b[self.piv[1]], b[self.piv[2]]];
        for row in 1..3 {
            for col in 0..row {
                x[row] -= self.a[row][col] * x[col];
            }
        }
        for row in (0..3).rev() {
            for col in row + 1..3 {
                x[row] -= self.a[row][col] * x[col];
            }
            x[row] /= self.a[row][row];
        }
        x
    }
}

struct Rosenbrock<'a, S: System3> {
    sys: &'a S,
    cfg: &'a IntegratorConfig,
}

#[allow(clippy::excessive_precision)]
impl<'a, S: System3> Rosenbrock<'a, S> {
    const GAM: f64 = 0.25;
    const C2: f64 = 0.386;
    const C3: f64 = 0.21;
    const C4: f64 = 0.63;
    const D1: f64 = 0.25;
    const D2: f64 = -0.1043;
    const D3: f64 = 0.1035;
    const D4: f64 = -0.03620000000000023;
    const A21: f64 = 1.544;
    const A31: f64 = 0.9466785280815826;
    const A32: f64 = 0.2557011698983284;
    const A41: f64 = 3.314825187068521;
    const A42: f64 = 2.896124015972201;
    const A43: f64 = 0.9986419139977817;
    const A51: f64 = 1.221224509226641;
    const A52: f64 = 6.019134481288629;
    const A53: f64 = 12.53708332932087;
    const A54: f64 = -0.687886036105895;
    const C21: f64 = -5.6688;
    const C31: f64 = -2.430093356833875;
    const C32: f64 = -0.2063599157091915;
    const C41: f64 = -0.1073529058151375;
    const C42: f64 = -9.594562251023355;
    const C43: f64 = -20.47028614809616;
    const C51: f64 = 7.496443313967647;
    const C52: f64 = -10.24680431464352;
    const C53: f64 = -33.99990352819905;
    const C54: f64 = 11.70890893206160;
    const C61: f64 = 8.083246795921522;
    const C62: f64 = -7.981132988064893;
    const C63: f64 = -31.52159432874371;
    const C64: f64 = 16.31930543123136;
    const C65: f64 = -6.058818238834054;
    const D21: f64 = 10.12623508344586;
    const D22: f64 = -7.487995877610167;
    const D23: f64 = -34.80091861555747;
    const D24: f64 = -7.992771707568823;
    const D25: f64 = 1.025137723295662;
    const D31: f64 = -0.6762803392801253;
    const D32: f64 = 6.087714651680015;
    const D33: f64 = 16.43084320892478;
    const D34: f64 = 24.76722511418386;
    const D35: f64 = -6.594389125716872;

    fn new(sys: &'a S, cfg: &'a IntegratorConfig) -> Self {
        Rosenbrock { sys, cfg }
    }

    fn run(&self, y0: [f64; 3], t0: f64, t1: f64) -> Result<Trajectory, IntegrateError> {
        let cfg = self.cfg;
        let mut traj = Trajectory {
            steps: Vec::new(),
            t0,
            t_end: t1,
            y_end: y0,
            clip_floor: cfg.abs_tol,
            n_accepted: 0,
            n_rejected: 0,
        };
        let mut t = t0;
        let mut y = y0;
        let mut h = initial_step(self.sys, &y, t, t1 - t0, cfg);
        let mut total = 0usize;

        while t < t1 {
            total += 1;
            if total > cfg.max_steps {
                return Err(IntegrateError::MaxStepsExceeded { t });
            }
            if h < 4.0 * f64::EPSILON * math::abs(t).max(math::abs(t1)) {
                return Err(IntegrateError::StepSizeUnderflow { t });
            }
            if t + h > t1 {
                h = t1 - t;
            }

            match self.try_step(t, h, &y)? {
                StepOutcome::Accepted {
                    y_new,
                    cont,
                    h_next,
                } => {
                    let y_clipped = check_state(&y_new, t + h, cfg)?;
                    traj.steps.push(Self::dense_step(t, h, &cont));
                    traj.n_accepted += 1;
                    t += h;
                    y = y_clipped;
                    h = h_next.min(cfg.max_step);
                }
                StepOutcome::Rejected { h_new } => {
                    traj.n_rejected += 1;
                    h = h_new;
                }
            }
        }
        traj.t_end = t;
        traj.y_end = y;
        Ok(traj)
    }

    fn try_step(&self, t: f64, h: f64, y: &[f64; 3]) -> Result<StepOutcome, IntegrateError> {
        let cfg = self.cfg;
        let f0 = self.sys.rhs(t, y);
        let (jac, dfdt) = self.sys.jacobian(t, y);
        let mut a = [[0.0f64; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] = -jac[r][c];
            }
            a[r][r] += 1.0 / (Self::GAM * h);
        }
        let lu = Lu3::factor(a).ok_or(IntegrateError::SingularStageMatrix { t })?;

        let axpy = |dst: &mut [f64; 3], c: f64, src: &[f64; 3]| {
            for i in 0..3 {
                dst[i] += c * src[i];
            }
        };

        let mut rhs = f0;
        axpy(&mut rhs, h * Self::D1, &dfdt);
        let k1 = lu.solve(&rhs);

        let mut ys = *y;
        axpy(&mut ys, Self::A21, &k1);
        let f = self.sys.rhs(t + Self::C2 * h, &ys);
        let mut rhs = f;
        axpy(&mut rhs, h * Self::D2, &dfdt);
        axpy(&mut rhs, Self::C21 / h, &k1);
        let k2 = lu.solve(&rhs);

        let mut ys = *y;
        axpy(&mut ys, Self::A31, &k1);
        axpy(&mut ys, Self::A32, &k2);
        let f = self.sys.rhs(t + Self::C3 * h, &ys);
        let mut rhs = f;
        axpy(&mut rhs, h * Self::D3, &dfdt);
        axpy(&mut rhs, Self::C31 / h, &k1);
        axpy(&mut rhs, Self::C32 / h, &k2);
        let k3 = lu.solve(&rhs);

        let mut ys = *y;
        axpy(&mut ys, Self::A41, &k1);
        axpy(&mut ys, Self::A42, &k2);
        axpy(&mut ys, Self::A43, &k3);
        let f = self.sys.rhs(t + Self::C4 * h, &ys);
        let mut rhs = f;
        axpy(&mut rhs, h * Self::D4, &dfdt);
        axpy(&mut rhs, Self::C41 / h, &k1);
        axpy(&mut rhs, Self::C42 / h, &k2);
        axpy(&mut rhs, Self::C43 / h, &k3);
        let k4 = lu.solve(&rhs);

        let mut ys = *y;
        axpy(&mut ys, Self::A51, &k1);
        axpy(&mut ys, Self::A52, &k2);
        axpy(&mut ys, Self::A53, &k3);
        axpy(&mut ys, Self::A54, &k4);
        let t_end = t + h;
        let f = self.sys.rhs(t_end, &ys);
        let mut rhs = f;
        axpy(&mut rhs, Self::C51 / h, &k1);
        axpy(&mut rhs, Self::C52 / h, &k2);
        axpy(&mut rhs, Self::C53 / h, &k3);
        axpy(&mut rhs, Self::C54 / h, &k4);
        let k5 = lu.solve(&rhs);

        let mut ys5 = ys;
        for i in 0..3 {
            ys5[i] += k5[i];
        }
        let f = self.sys.rhs(t_end, &ys5);
        let mut rhs = f;
        axpy(&mut rhs, Self::C61 / h, &k1);
        axpy(&mut rhs, Self::C62 / h, &k2);
        axpy(&mut rhs, Self::C63 / h, &k3);
        axpy(&mut rhs, Self::C64 / h, &k4);
        axpy(&mut rhs, Self::C65 / h, &k5);
        let yerr = lu.solve(&rhs);

        let mut y_new = ys5;
        for i in 0..3 {
            y_new[i] += yerr[i];
        }

        let err = err_norm(&yerr, y, &y_new, cfg);
        let finite = y_new.iter().all(|v| v.is_finite()) && err.is_finite();
        if err <= 1.0 && finite {
            let fac = (math::powf(err.max(1e-16), 0.25) / 0.9).clamp(1.0 / 6.0, 5.0);
            let mut cont = [[0.0f64; 3]; 4];
            cont[0] = *y;
            cont[1] = y_new;
            for i in 0..3 {
                cont[2][i] = Self::D21 * k1[i]
                    + Self::D22 * k2[i]
                    + Self::D23 * k3[i]
                    + Self::D24 * k4[i]
                    + Self::D25 * k5[i];
                cont[3][i] = Self::D31 * k1[i]
                    + Self::D32 * k2[i]
                    + Self::D33 * k3[i]
                    + Self::D34 * k4[i]
                    + Self::D35 * k5[i];
            }
            Ok(StepOutcome::Accepted {
                y_new,
                cont,
                h_next: h / fac,
            })
        } else if !finite {
            Ok(StepOutcome::Rejected { h_new: h * 0.1 })
        } else {
            let fac = (math::powf(err, 0.25) / 0.9).clamp(1.0 / 6.0, 5.0);
            Ok(StepOutcome::Rejected {
                h_new: h / fac.max(1.2),
            })
        }
    }

    fn dense_step(t: f64, h: f64, cont: &[[f64; 3]; 4]) -> DenseStep {
        // (1−θ)c1 + θ(c2 + (1−θ)(c3 + θ c4)) expanded into powers of θ.
        let mut poly = [[0.0f64; 3]; 5];
        for i in 0..3 {
            let (c1, c2, c3, c4) = (cont[0][i], cont[1][i], cont[2][i], cont[3][i]);
            poly[0][i] = c1;
            poly[1][i] = c2 - c1 + c3;
            poly[2][i] = c4 - c3;
            poly[3][i] = -c4;
            poly[4][i] = 0.0;
        }
        DenseStep { t0: t, h, poly }
    }
}

enum StepOutcome {
    Accepted {
        y_new: [f64; 3],
        cont: [[f64; 3]; 4],
        h_next: f64,
    },
    Rejected {
        h_new: f64,
    },
}
