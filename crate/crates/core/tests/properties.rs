use geosyn_core::geometry::{self, ConstantMetric, LogMapOptions, SampledPath};
use geosyn_core::pose::{orientation_distance, pose_log, TaskPose};
use geosyn_core::retarget::merge_synergies;
use geosyn_core::segmentation::{JointTrajectory, SegmentBoundaryList};
use geosyn_core::synergy::temporal_profile;
use geosyn_core::KinematicModel;
use nalgebra::{DVector, UnitQuaternion, Vector3};
use proptest::prelude::*;

fn vec_of(n: usize, range: std::ops::Range<f64>) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(range, n).prop_map(DVector::from_vec)
}

fn pose() -> impl Strategy<Value = TaskPose> {
    (prop::array::uniform3(-2.0..2.0f64), prop::array::uniform3(-3.0..3.0f64)).prop_map(|(p, r)| {
        TaskPose::new(Vector3::from(p), UnitQuaternion::from_scaled_axis(Vector3::from(r)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn profile_meets_boundary_conditions(len in 0.01..5.0f64, dur in 0.05..3.0f64, v0 in 0.0..3.0f64, v1 in 0.0..3.0f64) {
        let p = temporal_profile(len, dur, v0, v1).unwrap();
        let tol = 1e-9 * (1.0 + len + v0 + v1);
        prop_assert!(p.position(0.0).abs() < tol);
        prop_assert!((p.position(dur) - len).abs() < tol);
        prop_assert!((p.speed(0.0) - v0).abs() < tol);
        prop_assert!((p.speed(dur) - v1).abs() < tol);
        prop_assert!(p.cost() >= -tol);
    }

    #[test]
    fn merge_returns_a_coarser_partition(
        steps in prop::collection::vec(-0.1..0.1f64, 12..40),
        cuts in prop::collection::btree_set(1usize..12, 0..6),
        threshold in 0.0..0.3f64,
    ) {
        let mut q = 0.0;
        let positions: Vec<DVector<f64>> = steps.iter().map(|s| { q += s; DVector::from_element(1, q) }).collect();
        let last = positions.len() - 1;
        let traj = JointTrajectory::new(0.01, positions.clone()).unwrap();
        let starts: Vec<usize> = cuts.into_iter().collect();
        let b = SegmentBoundaryList::from_starts(&starts, last).unwrap();
        let merged = merge_synergies(&b, &traj, threshold).unwrap();
        prop_assert!(merged.len() <= b.len());
        prop_assert_eq!(merged.last_sample(), last);
        let original: Vec<usize> = b.segments().iter().map(|s| s.start).collect();
        for s in merged.segments() {
            prop_assert!(original.contains(&s.start));
        }
        if merged.len() > 1 {
            for s in merged.segments() {
                prop_assert!((&positions[s.end] - &positions[s.start]).norm() >= threshold);
            }
        }
    }

    #[test]
    fn pose_log_is_antisymmetric_and_bounded(a in pose(), b in pose()) {
        let ab = pose_log(&a, &b);
        prop_assert!(ab.fixed_rows::<3>(3).norm() <= std::f64::consts::PI + 1e-12);
        prop_assert!((ab.fixed_rows::<3>(3).norm() - orientation_distance(&a.orientation, &b.orientation)).abs() < 1e-9);
        let ba = pose_log(&b, &a);
        prop_assert!((ab.fixed_rows::<3>(0) + ba.fixed_rows::<3>(0)).norm() < 1e-12);
        prop_assert!(pose_log(&a, &a).norm() < 1e-12);
    }

    #[test]
    fn constant_metric_maps_are_affine(q0 in vec_of(3, -2.0..2.0), v in vec_of(3, -1.0..1.0), diag in prop::array::uniform3(0.1..5.0f64)) {
        let m = ConstantMetric::diagonal(&diag).unwrap();
        let curve = geometry::exp_map(&m, &q0, &v, 50).unwrap();
        prop_assert!((curve.endpoint() - (&q0 + &v)).amax() < 1e-12);
        let back = geometry::log_map(&m, &q0, curve.endpoint(), &LogMapOptions::default()).unwrap();
        prop_assert!((back - &v).amax() < 1e-12);
    }

    #[test]
    fn transport_preserves_the_metric_norm(q0 in vec_of(2, -1.5..1.5), c in vec_of(2, -1.0..1.0), w in vec_of(2, -1.0..1.0)) {
        let m = KinematicModel::planar("planar2", &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        let dt = 0.01;
        let qs: Vec<_> = (0..51).map(|k| &q0 + &c * (k as f64 * dt) + DVector::from_element(2, (k as f64 * dt).powi(2))).collect();
        let vs: Vec<_> = (0..51).map(|k| &c + DVector::from_element(2, 2.0 * k as f64 * dt)).collect();
        let path = SampledPath::new(dt, qs, vs).unwrap();
        let tw = geometry::parallel_transport(&m, &path, &w).unwrap();
        let before = geometry::norm(&m, &q0, &w).unwrap();
        let after = geometry::norm(&m, path.positions.last().unwrap(), &tw).unwrap();
        prop_assert!((after - before).abs() <= 1e-7 * before.max(1e-3));
    }

    #[test]
    fn mass_matrix_is_symmetric_positive_definite(q in vec_of(3, -3.0..3.0)) {
        let m = KinematicModel::planar("planar3", &[0.8, 0.8, 0.4], &[1.0, 1.0, 0.5]).unwrap();
        let g = m.mass_matrix(&q).unwrap();
        prop_assert!((&g - g.transpose()).amax() < 1e-12);
        prop_assert!(g.cholesky().is_some());
    }
}
