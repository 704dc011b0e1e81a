//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use geosyn_core::geometry::{self, ConstantMetric, LogMapOptions, MetricField, SampledPath};
use geosyn_core::retarget::{self, RetargetOptions, ShootOptions};
use geosyn_core::segmentation::{segment_riemannian, JointTrajectory, SegmentBoundaryList};
use geosyn_core::synergy::{self, Mode, PlanOptions};
use geosyn_core::synth::{self, SynthesisOptions};
use geosyn_core::{KinematicModel, TaskPose};
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn planar2() -> KinematicModel {
    KinematicModel::planar("planar2", &[1.0, 1.0], &[1.0, 1.0]).unwrap()
}

fn spatial7() -> KinematicModel {
    synth::random_chain(7, &mut ChaCha8Rng::seed_from_u64(2024)).unwrap()
}

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit,
        format!("took {:.2} s, limit {limit} s", elapsed.as_secs_f64()),
    )
}

fn random_velocity<M: MetricField, R: Rng>(m: &M, q: &DVector<f64>, max_norm: f64, rng: &mut R) -> DVector<f64> {
    let d = DVector::from_fn(m.dim(), |_, _| rng.gen_range(-1.0..1.0));
    let n = geometry::norm(m, q, &d).unwrap();
    d * (rng.gen_range(0.05..=1.0) * max_norm / n)
}

fn mass_matrix_oracle() -> Check {
    let start = Instant::now();
    let m = planar2();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let q = synth::random_configuration(2, std::f64::consts::PI, &mut rng);
        let g = m.mass_matrix(&q).map_err(|e| e.to_string())?;
        let c = q[1].cos();
        let expected = DMatrix::from_row_slice(2, 2, &[3.0 + 2.0 * c, 1.0 + c, 1.0 + c, 1.0]);
        worst = worst.max((g - expected).amax());
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-10, format!("max |ΔG| = {worst:.2e}"))?;
    within(elapsed, 1.0)?;
    Ok(format!("max |ΔG| = {worst:.2e} over 1000 configurations in {:.3} s", elapsed.as_secs_f64()))
}

fn energy_conservation() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (seed, m) in [(2, planar2()), (3, spatial7())] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let q0 = synth::random_configuration(m.dof(), 1.5, &mut rng);
            let v0 = random_velocity(&m, &q0, 1.0, &mut rng);
            let curve = geometry::exp_map(&m, &q0, &v0, 1000).map_err(|e| e.to_string())?;
            worst = worst.max(curve.energy_drift(&m).map_err(|e| e.to_string())?);
        }
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-6, format!("max relative drift {worst:.2e}"))?;
    within(elapsed, 10.0)?;
    Ok(format!("max relative drift {worst:.2e} over 200 geodesics in {:.2} s", elapsed.as_secs_f64()))
}

fn exp_log_round_trip() -> Check {
    let (mut worst_v, mut worst_q): (f64, f64) = (0.0, 0.0);
    let (mut mismatches, mut shorter) = (0, 0);
    let opts = LogMapOptions::default();
    for (seed, m) in [(4, planar2()), (5, spatial7())] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let q0 = synth::random_configuration(m.dof(), 1.5, &mut rng);
            let v = random_velocity(&m, &q0, 1.0, &mut rng);
            let q1 = geometry::exp_map(&m, &q0, &v, 1000).map_err(|e| e.to_string())?.endpoint().clone();
            let back = geometry::log_map(&m, &q0, &q1, &opts).map_err(|e| e.to_string())?;
            let err = (&back - &v).amax();
            if err > 1e-5 {
                mismatches += 1;
                let len = |x: &DVector<f64>| geometry::norm(&m, &q0, x).unwrap();
                if len(&back) < len(&v) {
                    shorter += 1;
                }
            }
            worst_v = worst_v.max(err);
            let reached = geometry::exp_map(&m, &q0, &back, 1000).map_err(|e| e.to_string())?;
            worst_q = worst_q.max((reached.endpoint() - &q1).amax());
        }
    }
    ensure(
        worst_v < 1e-5 && worst_q < 1e-6,
        format!(
            "velocity error {worst_v:.2e}, endpoint error {worst_q:.2e}; {mismatches}/200 cases recover another velocity, {shorter} of them a shorter geodesic to the same endpoint"
        ),
    )?;
    Ok(format!("velocity error {worst_v:.2e}, endpoint error {worst_q:.2e} rad over 200 cases"))
}

/// Random cubic joint-space curve sampled with its exact velocities.
fn random_cubic<R: Rng>(q0: &DVector<f64>, samples: usize, dt: f64, rng: &mut R) -> SampledPath {
    let n = q0.len();
    let c: Vec<DVector<f64>> = (0..3).map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))).collect();
    let (mut qs, mut vs) = (Vec::new(), Vec::new());
    for k in 0..samples {
        let t = k as f64 * dt;
        qs.push(q0 + &c[0] * t + &c[1] * (t * t) + &c[2] * (t * t * t));
        vs.push(&c[0] + &c[1] * (2.0 * t) + &c[2] * (3.0 * t * t));
    }
    SampledPath::new(dt, qs, vs).unwrap()
}

fn transport_isometry() -> Check {
    let (mut worst_iso, mut worst_self): (f64, f64) = (0.0, 0.0);
    for (seed, m) in [(6, planar2()), (7, spatial7())] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let n = m.dof();
            let q0 = synth::random_configuration(n, 1.5, &mut rng);
            let path = random_cubic(&q0, 101, 0.01, &mut rng);
            let u = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let w = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let q1 = path.positions.last().unwrap();
            let tu = geometry::parallel_transport(&m, &path, &u).map_err(|e| e.to_string())?;
            let tw = geometry::parallel_transport(&m, &path, &w).map_err(|e| e.to_string())?;
            let ip = |q: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>| geometry::inner_product(&m, q, a, b).unwrap();
            let scale = (ip(&q0, &u, &u) * ip(&q0, &w, &w)).sqrt();
            for (before, after, s) in [
                (ip(&q0, &u, &u), ip(q1, &tu, &tu), ip(&q0, &u, &u)),
                (ip(&q0, &w, &w), ip(q1, &tw, &tw), ip(&q0, &w, &w)),
                (ip(&q0, &u, &w), ip(q1, &tu, &tw), scale),
            ] {
                worst_iso = worst_iso.max((after - before).abs() / s);
            }
            let v = random_velocity(&m, &q0, 1.0, &mut rng);
            let curve = geometry::exp_map(&m, &q0, &v, 1000).map_err(|e| e.to_string())?;
            let carried = geometry::parallel_transport(&m, &curve.path, &v).map_err(|e| e.to_string())?;
            worst_self = worst_self.max((carried - curve.terminal_velocity()).amax() / v.amax());
        }
    }
    ensure(
        worst_iso < 1e-6 && worst_self < 1e-6,
        format!("inner-product error {worst_iso:.2e}, self-transport error {worst_self:.2e}"),
    )?;
    Ok(format!(
        "relative inner-product error {worst_iso:.2e}, self-transport error {worst_self:.2e} over 100 curves"
    ))
}

fn flat_metric_reduction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 2;
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let g = ConstantMetric::new(&a * a.transpose() + DMatrix::identity(n, n)).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let q0 = synth::random_configuration(n, 1.0, &mut rng);
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let end = geometry::exp_map(&g, &q0, &v, 1000).map_err(|e| e.to_string())?;
        worst = worst.max((end.endpoint() - (&q0 + &v)).amax());
        let q1 = &q0 + &v;
        let back = geometry::log_map(&g, &q0, &q1, &LogMapOptions::default()).map_err(|e| e.to_string())?;
        worst = worst.max((back - &v).amax());
        let path = random_cubic(&q0, 51, 0.02, &mut rng);
        let w = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let tw = geometry::parallel_transport(&g, &path, &w).map_err(|e| e.to_string())?;
        worst = worst.max((tw - w).amax());
    }
    ensure(worst < 1e-12, format!("exp/log/transport deviation {worst:.2e}"))?;

    // Reconstructions under an isotropic constant metric and under the
    // Euclidean model coincide.
    let model = planar2();
    let iso = ConstantMetric::diagonal(&[2.5, 2.5]).unwrap();
    let mut recon_gap: f64 = 0.0;
    for _ in 0..5 {
        let q0 = synth::random_configuration(n, 1.0, &mut rng);
        let g_count = rng.gen_range(2..=4);
        let s = synth::piecewise_geodesic(&iso, &q0, g_count, &SynthesisOptions::default(), &mut rng)
            .map_err(|e| e.to_string())?;
        let b = boundaries_from_knots(&s.knots);
        let opts = PlanOptions::default();
        let r = synergy::reconstruct(&model, &iso, &s.trajectory, &b, Mode::Riemannian, &opts).map_err(|e| e.to_string())?;
        let e = synergy::reconstruct(&model, &iso, &s.trajectory, &b, Mode::Euclidean, &opts).map_err(|e| e.to_string())?;
        for (x, y) in r.trajectory.positions().iter().zip(e.trajectory.positions()) {
            recon_gap = recon_gap.max((x - y).amax());
        }
    }
    ensure(recon_gap < 1e-6, format!("reconstruction gap {recon_gap:.2e}"))?;
    Ok(format!("exp/log/transport deviation {worst:.2e}, Riemannian vs Euclidean gap {recon_gap:.2e}"))
}

fn boundaries_from_knots(knots: &[usize]) -> SegmentBoundaryList {
    let starts: Vec<usize> = std::iter::once(0)
        .chain(knots[1..knots.len() - 1].iter().map(|k| k + 1))
        .collect();
    SegmentBoundaryList::from_starts(&starts, *knots.last().unwrap()).unwrap()
}

fn segmentation_recovery() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let chains = [planar2(), synth::random_chain(4, &mut ChaCha8Rng::seed_from_u64(77)).unwrap()];
    let mut worst_shift = 0usize;
    for trial in 0..50 {
        let m = &chains[trial % 2];
        let g = rng.gen_range(2..=6);
        let q0 = synth::random_configuration(m.dof(), 1.0, &mut rng);
        let s = synth::piecewise_geodesic(m, &q0, g, &SynthesisOptions::default(), &mut rng).map_err(|e| e.to_string())?;
        let seg = segment_riemannian(m, &s.trajectory, 0.1).map_err(|e| e.to_string())?;
        let found = seg.boundaries.knots();
        ensure(
            found.len() == s.knots.len(),
            format!("trial {trial}: expected {g} synergies, found {}", found.len() - 1),
        )?;
        for (a, b) in found.iter().zip(&s.knots) {
            worst_shift = worst_shift.max(a.abs_diff(*b));
        }
    }
    let elapsed = start.elapsed();
    ensure(worst_shift <= 2, format!("boundary shift {worst_shift} samples"))?;
    within(elapsed, 30.0)?;
    Ok(format!(
        "50/50 synergy counts exact, max boundary shift {worst_shift} samples, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn temporal_profile() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_coef: f64 = 0.0;
    for _ in 0..100 {
        let l = rng.gen_range(0.0..3.0);
        let t = rng.gen_range(0.2..3.0);
        let (v0, v1) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        let p = synergy::temporal_profile(l, t, v0, v1).map_err(|e| e.to_string())?;
        let a = Matrix4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            1.0, t, t * t, t * t * t,
            0.0, 1.0, 2.0 * t, 3.0 * t * t,
        );
        let x = a.lu().solve(&Vector4::new(0.0, v0, l, v1)).ok_or("singular system")?;
        for i in 0..4 {
            worst_coef = worst_coef.max((x[i] - p.coefficients[i]).abs());
        }
    }
    ensure(worst_coef < 1e-10, format!("coefficient error {worst_coef:.2e}"))?;

    let mut worst_rest: f64 = 0.0;
    for _ in 0..20 {
        let l = rng.gen_range(0.1..3.0);
        let t = rng.gen_range(0.2..3.0);
        let p = synergy::temporal_profile(l, t, 0.0, 0.0).map_err(|e| e.to_string())?;
        for k in 0..=50 {
            let tau = k as f64 / 50.0;
            worst_rest = worst_rest.max((p.position(tau * t) - l * (3.0 * tau * tau - 2.0 * tau.powi(3))).abs());
        }
    }
    ensure(worst_rest < 1e-12, format!("rest-to-rest deviation {worst_rest:.2e}"))?;

    // Perturbations t²(T−t)²(c0 + c1 t) keep position and speed at both ends.
    let (l, t, v0, v1) = (1.3, 1.7, 0.4, 0.9);
    let p = synergy::temporal_profile(l, t, v0, v1).map_err(|e| e.to_string())?;
    let cost_of = |c0: f64, c1: f64| {
        // Simpson's rule on 2000 panels; exact for the degree-6 integrand up to rounding.
        let n = 2000;
        let h = t / n as f64;
        let f = |x: f64| {
            // d²/dx² of x²(T−x)²(c0 + c1 x), expanded.
            let dq = 2.0 * x * (t - x) * (t - 2.0 * x);
            let ddq = 2.0 * (t * t - 6.0 * t * x + 6.0 * x * x);
            let pp = ddq * (c0 + c1 * x) + 2.0 * dq * c1;
            let s = p.acceleration(x) + pp;
            s * s
        };
        let mut sum = f(0.0) + f(t);
        for i in 1..n {
            sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0
    };
    let base = cost_of(0.0, 0.0);
    ensure(
        (base - p.cost()).abs() < 1e-9 * p.cost().max(1.0),
        format!("analytic cost {} vs quadrature {base}", p.cost()),
    )?;
    let mut beaten = 0;
    for _ in 0..100 {
        let c0 = rng.gen_range(-2.0..2.0);
        let c1 = rng.gen_range(-2.0..2.0);
        if cost_of(c0, c1) < base {
            beaten += 1;
        }
    }
    ensure(beaten == 0, format!("{beaten} perturbations had lower cost"))?;
    Ok(format!(
        "coefficient error {worst_coef:.2e}, rest-to-rest error {worst_rest:.2e}, cubic cost {base:.4} minimal against 100 perturbations"
    ))
}

fn closed_loop_reconstruction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let chains = [planar2(), spatial7()];
    let opts = PlanOptions::default();
    let (mut worst_q, mut worst_p): (f64, f64) = (0.0, 0.0);
    let mut min_ratio = f64::INFINITY;
    for trial in 0..6 {
        let m = &chains[trial % 2];
        let q0 = synth::random_configuration(m.dof(), 1.0, &mut rng);
        let g = rng.gen_range(2..=4);
        let s = synth::piecewise_geodesic(m, &q0, g, &SynthesisOptions::default(), &mut rng).map_err(|e| e.to_string())?;
        let seg = segment_riemannian(m, &s.trajectory, 0.1).map_err(|e| e.to_string())?;
        let r = synergy::reconstruct(m, m, &s.trajectory, &seg.boundaries, Mode::Riemannian, &opts)
            .map_err(|e| e.to_string())?;
        let truth_poses = synergy::pose_trajectory(m, &s.trajectory).map_err(|e| e.to_string())?;
        for (a, b) in r.trajectory.positions().iter().zip(s.trajectory.positions()) {
            worst_q = worst_q.max((a - b).amax());
        }
        for (a, b) in r.poses.iter().zip(&truth_poses) {
            worst_p = worst_p.max((a.position - b.position).norm());
        }
        if trial % 2 == 0 {
            let e = synergy::reconstruct(m, m, &s.trajectory, &seg.boundaries, Mode::Euclidean, &opts)
                .map_err(|e| e.to_string())?;
            let er = synergy::joint_error(&r.trajectory, &s.trajectory).map_err(|e| e.to_string())?;
            let ee = synergy::joint_error(&e.trajectory, &s.trajectory).map_err(|e| e.to_string())?;
            min_ratio = min_ratio.min(ee / er.max(f64::MIN_POSITIVE));
        }
    }
    ensure(
        worst_q < 1e-3 && worst_p < 1e-3 && min_ratio >= 10.0,
        format!("joint {worst_q:.2e} rad, hand {worst_p:.2e} m, Euclidean/Riemannian {min_ratio:.1}"),
    )?;
    Ok(format!(
        "max joint error {worst_q:.2e} rad, max hand error {worst_p:.2e} m, Euclidean/Riemannian joint error ≥ {min_ratio:.3e}"
    ))
}

fn retarget_convergence() -> Check {
    // Identity transfer.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let m = planar2();
    let q0 = DVector::from_column_slice(&[0.3, 1.2]);
    let s = synth::piecewise_geodesic(&m, &q0, 4, &SynthesisOptions::default(), &mut rng).map_err(|e| e.to_string())?;
    let seg = segment_riemannian(&m, &s.trajectory, 0.1).map_err(|e| e.to_string())?;
    let opts = RetargetOptions {
        initial_configuration: Some(q0.clone()),
        ..Default::default()
    };
    let r = retarget::retarget_motion(&m, &s.trajectory, &seg.boundaries, &m, &opts).map_err(|e| e.to_string())?;
    let knots = r.boundaries.knots();
    for (g, rep) in r.reports.iter().enumerate() {
        let desired = m.forward_kinematics(&s.trajectory.positions()[knots[g + 1]]).unwrap();
        let got = &r.poses[knots[g + 1]];
        let dp = (desired.position - got.position).norm();
        let dr = geosyn_core::pose::orientation_distance(&desired.orientation, &got.orientation);
        ensure(
            rep.converged && dp < 1e-3 && dr < 1e-2,
            format!("identity transfer synergy {g}: {dp:.2e} m, {dr:.2e} rad"),
        )?;
    }
    let identity_count = r.reports.len();

    // 2-link to 3-link transfer through 50 reachable key poses.
    let source = planar2();
    let target = KinematicModel::planar("planar3", &[0.8, 0.8, 0.4], &[1.0, 1.0, 0.5]).unwrap();
    let (traj, boundaries) = key_pose_motion(50, &mut rng);
    let opts = RetargetOptions {
        merge_threshold: 0.0,
        ..Default::default()
    };
    let r = retarget::retarget_motion(&source, &traj, &boundaries, &target, &opts).map_err(|e| e.to_string())?;
    ensure(r.reports.len() == 50, format!("{} synergies", r.reports.len()))?;
    let worst_iter = r.reports.iter().map(|x| x.iterations).max().unwrap_or(0);
    let (mut worst_m, mut worst_rad): (f64, f64) = (0.0, 0.0);
    for rep in &r.reports {
        ensure(rep.converged, format!("synergy {} not converged ({:.2e} m)", rep.g, rep.residual_m))?;
        worst_m = worst_m.max(rep.residual_m);
        worst_rad = worst_rad.max(rep.residual_rad);
    }
    ensure(worst_iter <= 200, format!("{worst_iter} iterations"))?;

    // Descent property of the transported pull-back direction.
    let shoot = ShootOptions::default();
    let model = target;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let states: Vec<_> = (0..500)
        .map(|_| {
            let q0 = synth::random_configuration(3, 1.0, &mut rng);
            let v = random_velocity(&model, &q0, 0.5, &mut rng);
            let qt = &q0 + synth::random_configuration(3, 0.5, &mut rng);
            (q0, v, model.forward_kinematics(&qt).unwrap())
        })
        .collect();
    let agree = count_descent(&model, &states, &shoot)?;
    let share = agree as f64 / states.len() as f64;
    ensure(share >= 0.95, format!("descent agreement {agree}/500"))?;
    Ok(format!(
        "identity transfer {identity_count}/{identity_count} converged; 2→3-link 50/50 converged, ≤ {worst_iter} iterations, residual ≤ {worst_m:.2e} m / {worst_rad:.2e} rad; descent agreement {agree}/500"
    ))
}

/// Source motion through `count + 1` key configurations of the 2-link chain,
/// elbow bent within [0.6, 2.4] rad, 20 samples per synergy, straight joint
/// lines between keys.
fn key_pose_motion<R: Rng>(count: usize, rng: &mut R) -> (JointTrajectory, SegmentBoundaryList) {
    let mut keys = vec![DVector::from_column_slice(&[0.2, 1.2])];
    for _ in 0..count {
        let last = keys.last().unwrap();
        let q1: f64 = last[0] + rng.gen_range(-0.4..0.4);
        let q2: f64 = (last[1] + rng.gen_range(-0.4..0.4)).clamp(0.6, 2.4);
        keys.push(DVector::from_column_slice(&[q1, q2]));
    }
    let per = 20;
    let dt = 0.01;
    let (mut qs, mut vs) = (Vec::new(), Vec::new());
    for (g, w) in keys.windows(2).enumerate() {
        let v = (&w[1] - &w[0]) / (per as f64 * dt);
        let last = g + 2 == keys.len();
        for k in 0..per + usize::from(last) {
            qs.push(&w[0] + &v * (k as f64 * dt));
            vs.push(v.clone());
        }
    }
    let traj = JointTrajectory::new(dt, qs).unwrap().with_velocities(vs).unwrap();
    let starts: Vec<usize> = std::iter::once(0).chain((1..count).map(|g| g * per + 1)).collect();
    let b = SegmentBoundaryList::from_starts(&starts, count * per).unwrap();
    (traj, b)
}

/// Number of states where the approximate gradient has positive inner product
/// with the central finite-difference gradient of the shooting cost.
fn count_descent(model: &KinematicModel, states: &[(DVector<f64>, DVector<f64>, TaskPose)], shoot: &ShootOptions) -> Result<usize, String> {
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).min(16);
    let chunk = states.len().div_ceil(threads);
    let results: Vec<Result<usize, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = states
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    let mut agree = 0;
                    for (q0, v, target) in part {
                        let g = retarget::shooting_gradient(model, model, q0, v, target, shoot).map_err(|e| e.to_string())?;
                        let h = 1e-6;
                        let mut fd = DVector::zeros(v.len());
                        for i in 0..v.len() {
                            let mut vp = v.clone();
                            let mut vm = v.clone();
                            vp[i] += h;
                            vm[i] -= h;
                            let fp = retarget::shooting_cost(model, model, q0, &vp, target, shoot).map_err(|e| e.to_string())?;
                            let fm = retarget::shooting_cost(model, model, q0, &vm, target, shoot).map_err(|e| e.to_string())?;
                            fd[i] = (fp - fm) / (2.0 * h);
                        }
                        if g.dot(&fd) > 0.0 {
                            agree += 1;
                        }
                    }
                    Ok(agree)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    results.into_iter().sum()
}

fn cli_determinism() -> Check {
    let bin = env!("CARGO_BIN_EXE_geosyn");
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        ensure(
            out.status.success(),
            format!("geosyn {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)),
        )
    };
    let data = root.path().join("data");
    let d = data.to_str().unwrap();
    run(&["synthesize", "--seed", "21", "--synergies", "3", "--out", d])?;
    let model = format!("{d}/model.json");
    let target = format!("{d}/target.json");
    let traj = format!("{d}/trajectory.csv");
    let mut dirs = Vec::new();
    for pass in 0..2 {
        let out = root.path().join(format!("run{pass}"));
        let o = out.to_str().unwrap().to_owned();
        run(&["analyze", "--model", &model, "--trajectory", &traj, "--out", &format!("{o}/analyze")])?;
        for mode in ["riemannian", "euclidean", "ik"] {
            run(&["reconstruct", "--model", &model, "--trajectory", &traj, "--mode", mode, "--out", &format!("{o}/{mode}")])?;
        }
        run(&["compare", "--model", &model, "--trajectory", &traj, "--out", &format!("{o}/compare")])?;
        run(&["retarget", "--model", &model, "--target-model", &target, "--trajectory", &traj, "--out", &format!("{o}/retarget")])?;
        dirs.push(out);
    }
    let files = list_files(&dirs[0]);
    ensure(files.len() >= 10, format!("only {} output files", files.len()))?;
    ensure(files == list_files(&dirs[1]), "different file sets".into())?;
    for f in &files {
        let a = std::fs::read(dirs[0].join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].join(f)).map_err(|e| e.to_string())?;
        ensure(a == b, format!("{} differs", f.display()))?;
    }
    Ok(format!("{} output files byte-identical across two runs", files.len()))
}

fn list_files(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("mass-matrix oracle", mass_matrix_oracle),
        ("energy conservation", energy_conservation),
        ("exp/log round trip", exp_log_round_trip),
        ("parallel-transport isometry", transport_isometry),
        ("flat-metric reduction", flat_metric_reduction),
        ("segmentation recovery", segmentation_recovery),
        ("temporal profile", temporal_profile),
        ("closed-loop reconstruction", closed_loop_reconstruction),
        ("retarget convergence", retarget_convergence),
        ("CLI determinism", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name} [{secs:.2} s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} [{secs:.2} s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
