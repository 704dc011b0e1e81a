//! Riemannian operations on a configuration manifold whose metric is the
//! joint-space mass-inertia matrix.
//!
//! Configurations live in a single global chart (ℝⁿ, no angle wrapping);
//! callers pass unwrapped joint angles.
//!
//! Geodesics solve `G(q) q̈ + c(q, q̇) = 0` with the Coriolis term built from
//! the Christoffel symbols of the first kind
//!
//! ```text
//! Γ_ijk = ½ (∂g_ij/∂q_k + ∂g_ik/∂q_j − ∂g_jk/∂q_i),    c_i = Σ_jk Γ_ijk q̇_j q̇_k
//! ```
//!
//! and are integrated with fixed-step classical RK4. Parallel transport along
//! a curve γ integrates `G(γ) v̇ + Γ(γ)[γ̇, v] = 0` the same way.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default number of RK4 steps per unit of geodesic time.
pub const DEFAULT_STEPS: usize = 1000;

/// Riemannian norm below which a tangent vector has no direction.
pub const NORM_FLOOR: f64 = 1e-12;

/// A smoothly varying symmetric positive-definite metric on ℝⁿ.
///
/// Implementations are read-only after construction, so one field can be
/// shared by concurrent evaluations.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;

    /// `G(q)`.
    fn metric(&self, q: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// `∂G/∂q_k` for `k = 0..dim`; each slice symmetric.
    fn metric_derivatives(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>>;

    /// `G(q)` together with its derivative slices. Implementations can share
    /// work between the two; the integrators call this once per stage.
    fn metric_and_derivatives(&self, q: &DVector<f64>) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        Ok((self.metric(q)?, self.metric_derivatives(q)?))
    }
}

impl<M: MetricField + ?Sized> MetricField for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        (**self).metric(q)
    }
    fn metric_derivatives(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        (**self).metric_derivatives(q)
    }
    fn metric_and_derivatives(&self, q: &DVector<f64>) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        (**self).metric_and_derivatives(q)
    }
}

/// A metric that does not depend on the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantMetric {
    matrix: DMatrix<f64>,
}

impl ConstantMetric {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument("metric matrix must be square".into()));
        }
        if (&matrix - matrix.transpose()).amax() > 1e-12 * matrix.amax().max(1.0) {
            return Err(Error::InvalidArgument("metric matrix must be symmetric".into()));
        }
        crate::chain::check_positive_definite(&matrix)?;
        Ok(Self { matrix })
    }

    /// The Euclidean metric on ℝⁿ.
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }
}

impl MetricField for ConstantMetric {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn metric(&self, _q: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.matrix.clone())
    }
    fn metric_derivatives(&self, _q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let n = self.dim();
        Ok(vec![DMatrix::zeros(n, n); n])
    }
}

fn check_len(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: v.len(),
        });
    }
    Ok(())
}

/// `⟨u, v⟩_q = uᵀ G(q) v`.
pub fn inner_product<M: MetricField + ?Sized>(
    metric: &M,
    q: &DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<f64> {
    let n = metric.dim();
    check_len(q, n)?;
    check_len(u, n)?;
    check_len(v, n)?;
    Ok(u.dot(&(metric.metric(q)? * v)))
}

pub fn norm<M: MetricField + ?Sized>(metric: &M, q: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    Ok(inner_product(metric, q, v, v)?.max(0.0).sqrt())
}

/// Angle in `[0, π]` between two tangent vectors at `q`.
pub fn angle<M: MetricField + ?Sized>(
    metric: &M,
    q: &DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<f64> {
    let n = metric.dim();
    check_len(q, n)?;
    check_len(u, n)?;
    check_len(v, n)?;
    let g = metric.metric(q)?;
    angle_with(&g, u, v)
}

pub(crate) fn angle_with(g: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let gu = g * u;
    let nu = u.dot(&gu).max(0.0).sqrt();
    let nv = v.dot(&(g * v)).max(0.0).sqrt();
    if nu <= NORM_FLOOR || nv <= NORM_FLOOR {
        return Err(Error::ZeroVector);
    }
    Ok((v.dot(&gu) / (nu * nv)).clamp(-1.0, 1.0).acos())
}

/// `½ q̇ᵀ G(q) q̇`.
pub fn kinetic_energy<M: MetricField + ?Sized>(
    metric: &M,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<f64> {
    Ok(0.5 * inner_product(metric, q, qdot, qdot)?)
}

/// `Σ_jk Γ_ijk a_j b_k` from the metric derivative slices.
pub fn christoffel_contract(derivs: &[DMatrix<f64>], a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.len();
    let mut da = DMatrix::zeros(n, n);
    let mut db = DMatrix::zeros(n, n);
    for (k, d) in derivs.iter().enumerate() {
        da += d * a[k];
        db += d * b[k];
    }
    let mut out = db * a + da * b;
    for (i, d) in derivs.iter().enumerate() {
        out[i] -= a.dot(&(d * b));
    }
    out * 0.5
}

/// Coriolis term `c(q, q̇)` of the geodesic equation.
pub fn coriolis_term<M: MetricField + ?Sized>(
    metric: &M,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = metric.dim();
    check_len(q, n)?;
    check_len(qdot, n)?;
    let d = metric.metric_derivatives(q)?;
    Ok(christoffel_contract(&d, qdot, qdot))
}

/// Cholesky factor, rejecting matrices with a pivot below `1e-12 · trace`.
fn spd_cholesky(g: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let floor = 1e-12 * g.trace().abs();
    match g.cholesky() {
        Some(ch) if ch.l_dirty().diagonal().iter().all(|&d| d * d > floor) => Ok(ch),
        _ => Err(Error::NotPositiveDefinite),
    }
}

fn solve_spd(g: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    Ok(spd_cholesky(g)?.solve(&rhs))
}

/// Geodesic acceleration `q̈ = −G⁻¹ c(q, q̇)`.
pub fn geodesic_acceleration<M: MetricField + ?Sized>(
    metric: &M,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (g, d) = metric.metric_and_derivatives(q)?;
    solve_spd(g, -christoffel_contract(&d, qdot, qdot))
}

/// A curve sampled at uniform time steps together with its velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub dt: f64,
    pub positions: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
}

impl SampledPath {
    pub fn new(dt: f64, positions: Vec<DVector<f64>>, velocities: Vec<DVector<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample period must be positive, got {dt}")));
        }
        if positions.is_empty() || positions.len() != velocities.len() {
            return Err(Error::InvalidArgument(
                "path needs matching, non-empty position and velocity samples".into(),
            ));
        }
        Ok(Self {
            dt,
            positions,
            velocities,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    /// The same curve traversed backwards.
    pub fn reversed(&self) -> Self {
        Self {
            dt: self.dt,
            positions: self.positions.iter().rev().cloned().collect(),
            velocities: self.velocities.iter().rev().map(|v| -v).collect(),
        }
    }

    /// Cubic Hermite interpolation of position and velocity at time `t`
    /// (clamped to the sampled interval).
    pub fn sample(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        if self.len() == 1 {
            return (self.positions[0].clone(), self.velocities[0].clone());
        }
        let last = self.len() - 1;
        let x = (t / self.dt).clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last - 1);
        hermite(
            &self.positions[i],
            &self.velocities[i],
            &self.positions[i + 1],
            &self.velocities[i + 1],
            self.dt,
            x - i as f64,
        )
    }
}

/// Cubic Hermite interpolant on one interval of length `h` at fraction `s ∈ [0, 1]`.
fn hermite(
    q0: &DVector<f64>,
    v0: &DVector<f64>,
    q1: &DVector<f64>,
    v1: &DVector<f64>,
    h: f64,
    s: f64,
) -> (DVector<f64>, DVector<f64>) {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let q = q0 * h00 + v0 * (h10 * h) + q1 * h01 + v1 * (h11 * h);
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    let v = q0 * d00 + v0 * d10 + q1 * d01 + v1 * d11;
    (q, v)
}

/// A geodesic integrated from its initial conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicCurve {
    pub path: SampledPath,
}

impl GeodesicCurve {
    pub fn start(&self) -> &DVector<f64> {
        &self.path.positions[0]
    }

    pub fn initial_velocity(&self) -> &DVector<f64> {
        &self.path.velocities[0]
    }

    pub fn endpoint(&self) -> &DVector<f64> {
        self.path.positions.last().expect("non-empty curve")
    }

    pub fn terminal_velocity(&self) -> &DVector<f64> {
        self.path.velocities.last().expect("non-empty curve")
    }

    /// Largest relative deviation of the kinetic energy from its initial value.
    pub fn energy_drift<M: MetricField + ?Sized>(&self, metric: &M) -> Result<f64> {
        let k0 = kinetic_energy(metric, self.start(), self.initial_velocity())?;
        if k0 == 0.0 {
            return Ok(0.0);
        }
        let mut worst: f64 = 0.0;
        for (q, v) in self.path.positions.iter().zip(&self.path.velocities) {
            worst = worst.max((kinetic_energy(metric, q, v)? - k0).abs() / k0);
        }
        Ok(worst)
    }
}

/// Integrates the geodesic from `(q0, v0)` over `[0, duration]` with `steps` RK4 steps.
pub fn integrate_geodesic<M: MetricField + ?Sized>(
    metric: &M,
    q0: &DVector<f64>,
    v0: &DVector<f64>,
    duration: f64,
    steps: usize,
) -> Result<GeodesicCurve> {
    let n = metric.dim();
    check_len(q0, n)?;
    check_len(v0, n)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one integration step is required".into()));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    let h = duration / steps as f64;
    let mut positions = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    let mut q = q0.clone();
    let mut v = v0.clone();
    positions.push(q.clone());
    velocities.push(v.clone());
    for step in 0..steps {
        let a1 = geodesic_acceleration(metric, &q, &v)?;
        let (q2, v2) = (&q + &v * (0.5 * h), &v + &a1 * (0.5 * h));
        let a2 = geodesic_acceleration(metric, &q2, &v2)?;
        let (q3, v3) = (&q + &v2 * (0.5 * h), &v + &a2 * (0.5 * h));
        let a3 = geodesic_acceleration(metric, &q3, &v3)?;
        let (q4, v4) = (&q + &v3 * h, &v + &a3 * h);
        let a4 = geodesic_acceleration(metric, &q4, &v4)?;
        q += (&v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
        v += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
        if !(q.iter().chain(v.iter()).all(|x| x.is_finite())) {
            return Err(Error::NonFinite { step });
        }
        positions.push(q.clone());
        velocities.push(v.clone());
    }
    Ok(GeodesicCurve {
        path: SampledPath {
            dt: h,
            positions,
            velocities,
        },
    })
}

/// Exponential map: the geodesic through `q0` with velocity `v0` on `[0, 1]`;
/// its endpoint is `Exp_q0(v0)`.
pub fn exp_map<M: MetricField + ?Sized>(
    metric: &M,
    q0: &DVector<f64>,
    v0: &DVector<f64>,
    steps: usize,
) -> Result<GeodesicCurve> {
    integrate_geodesic(metric, q0, v0, 1.0, steps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMapOptions {
    /// RK4 steps of each shot.
    pub steps: usize,
    /// Endpoint tolerance, ∞-norm (rad).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Perturbation used for the finite-difference endpoint sensitivity.
    pub fd_step: f64,
}

impl Default for LogMapOptions {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            tolerance: 1e-10,
            max_iterations: 100,
            fd_step: 1e-6,
        }
    }
}

/// Logarithmic map by single shooting: the initial velocity at `q0` whose
/// geodesic reaches `q1` at time 1.
pub fn log_map<M: MetricField + ?Sized>(
    metric: &M,
    q0: &DVector<f64>,
    q1: &DVector<f64>,
    opts: &LogMapOptions,
) -> Result<DVector<f64>> {
    let n = metric.dim();
    check_len(q0, n)?;
    check_len(q1, n)?;
    let shoot = |v: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(exp_map(metric, q0, v, opts.steps)?.endpoint() - q1)
    };
    let fd_jacobian = |v: &DVector<f64>, r: &DVector<f64>| -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut vp = v.clone();
            vp[i] += opts.fd_step;
            jac.set_column(i, &((shoot(&vp)? - r) / opts.fd_step));
        }
        Ok(jac)
    };
    let mut v = q1 - q0;
    let mut r = shoot(&v)?;
    let mut res = r.amax();
    // Jacobian from finite differences, then rank-one secant updates until a
    // line search stalls.
    let mut jac: Option<DMatrix<f64>> = None;
    let mut iterations = 0;
    while iterations < opts.max_iterations && res >= opts.tolerance {
        let fresh = jac.is_none();
        let j = match jac.take() {
            Some(j) => j,
            None => fd_jacobian(&v, &r)?,
        };
        iterations += 1;
        let step = j.clone().lu().solve(&(-&r));
        let mut accepted = None;
        if let Some(dv) = step {
            // A stale secant Jacobian gets a short search before a refresh.
            let halvings = if fresh { 30 } else { 4 };
            let mut alpha = 1.0;
            for _ in 0..halvings {
                let cand = &v + &dv * alpha;
                // A diverging trial shot counts as a residual increase.
                if let Ok(rc) = shoot(&cand) {
                    if rc.amax() < res {
                        accepted = Some((dv * alpha, rc));
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }
        match accepted {
            Some((s, rc)) => {
                let y = &rc - &r;
                let ss = s.dot(&s);
                let mut j = j;
                if ss > 0.0 {
                    j += (y - &j * &s) * s.transpose() / ss;
                }
                v += s;
                r = rc;
                res = r.amax();
                jac = Some(j);
            }
            None if fresh => break,
            None => {}
        }
    }
    if res < opts.tolerance {
        return Ok(v);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: res,
    })
}

/// Right-hand side of the transport equation at one point of the curve.
fn transport_rate<M: MetricField + ?Sized>(
    metric: &M,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (g, d) = metric.metric_and_derivatives(q)?;
    solve_spd(g, -christoffel_contract(&d, qdot, w))
}

/// One RK4 transport step across a single sample interval of length `h`,
/// with the curve interpolated by cubic Hermite between its end samples.
pub fn transport_step<M: MetricField + ?Sized>(
    metric: &M,
    (qa, va): (&DVector<f64>, &DVector<f64>),
    (qb, vb): (&DVector<f64>, &DVector<f64>),
    h: f64,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (qm, vm) = hermite(qa, va, qb, vb, h, 0.5);
    let k1 = transport_rate(metric, qa, va, w)?;
    // The midpoint metric is shared by the two middle stages.
    let (gm, dm) = metric.metric_and_derivatives(&qm)?;
    let chol = spd_cholesky(gm)?;
    let w2 = w + &k1 * (0.5 * h);
    let k2 = chol.solve(&-christoffel_contract(&dm, &vm, &w2));
    let w3 = w + &k2 * (0.5 * h);
    let k3 = chol.solve(&-christoffel_contract(&dm, &vm, &w3));
    let w4 = w + &k3 * h;
    let k4 = transport_rate(metric, qb, vb, &w4)?;
    Ok(w + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Parallel transport of `v` from the first to the last sample of `path`.
pub fn parallel_transport<M: MetricField + ?Sized>(
    metric: &M,
    path: &SampledPath,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(v, metric.dim())?;
    let mut w = v.clone();
    for i in 1..path.len() {
        w = transport_step(
            metric,
            (&path.positions[i - 1], &path.velocities[i - 1]),
            (&path.positions[i], &path.velocities[i]),
            path.dt,
            &w,
        )?;
        if !w.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { step: i });
        }
    }
    Ok(w)
}

/// Length of a sampled curve, trapezoidal rule over `‖q̇‖_q`.
pub fn curve_length<M: MetricField + ?Sized>(metric: &M, path: &SampledPath) -> Result<f64> {
    let speeds = path
        .positions
        .iter()
        .zip(&path.velocities)
        .map(|(q, v)| norm(metric, q, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(speeds
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]) * path.dt)
        .sum())
}
