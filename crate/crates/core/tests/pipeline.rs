use geosyn_core::io;
use geosyn_core::segmentation::segment_riemannian;
use geosyn_core::synergy::{self, Mode, PlanOptions};
use geosyn_core::synth::{self, SynthesisOptions};
use geosyn_core::KinematicModel;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn planar2() -> KinematicModel {
    KinematicModel::planar("planar2", &[1.0, 1.0], &[1.0, 1.0]).unwrap()
}

#[test]
fn synthetic_motion_is_segmented_and_rebuilt() {
    let m = planar2();
    let q0 = DVector::from_column_slice(&[0.4, 1.0]);
    let s = synth::piecewise_geodesic(&m, &q0, 3, &SynthesisOptions::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let seg = segment_riemannian(&m, &s.trajectory, 0.1).unwrap();
    assert_eq!(seg.boundaries.knots(), s.knots);

    let plan = PlanOptions::default();
    let r = synergy::reconstruct(&m, &m, &s.trajectory, &seg.boundaries, Mode::Riemannian, &plan).unwrap();
    assert_eq!(r.segments.len(), 3);
    assert!(synergy::joint_error(&s.trajectory, &r.trajectory).unwrap() < 1e-6);

    let e = synergy::reconstruct(&m, &m, &s.trajectory, &seg.boundaries, Mode::Euclidean, &plan).unwrap();
    let truth = synergy::pose_trajectory(&m, &s.trajectory).unwrap();
    let (p_riem, _) = synergy::pose_error(&truth, &r.poses).unwrap();
    let (p_eucl, _) = synergy::pose_error(&truth, &e.poses).unwrap();
    assert!(p_riem < p_eucl);
}

#[test]
fn trajectory_file_round_trip_keeps_velocities() {
    let m = planar2();
    let q0 = DVector::from_column_slice(&[0.1, 0.9]);
    let s = synth::piecewise_geodesic(&m, &q0, 2, &SynthesisOptions::default(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("motion.csv");
    io::write_trajectory(&path, &s.trajectory, 1.5).unwrap();
    let back = io::read_trajectory(&path).unwrap();
    assert_eq!(back.start_time, 1.5);
    assert_eq!(back.trajectory.len(), s.trajectory.len());
    let max_diff = back
        .trajectory
        .velocities()
        .unwrap()
        .iter()
        .zip(s.trajectory.velocities().unwrap())
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);
    assert!(max_diff < 1e-12, "{max_diff}");
}

#[test]
fn missing_trajectory_file_names_the_path() {
    let err = io::read_trajectory(std::path::Path::new("/nonexistent/motion.csv")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/motion.csv"), "{err}");
    assert!(!err.is_numerical());
}
