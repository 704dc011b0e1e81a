use std::fs;
use std::path::{Path, PathBuf};

use geosyn_core::geometry::{self, LogMapOptions};
use geosyn_core::io::{self, TrajectoryFile};
use geosyn_core::retarget::{self, RetargetOptions, ShootOptions};
use geosyn_core::segmentation::{
    estimate_velocities, segment_riemannian, segment_zero_velocity, JointTrajectory, RiemannianSegmentation,
    SegmentBoundaryList, DEFAULT_CROSSING_COUNT, DEFAULT_CROSSING_WINDOW, DEFAULT_SG_ORDER,
};
use geosyn_core::synergy::{self, IkOptions, Mode, PlanOptions, ReconstructedMotion};
use geosyn_core::synth::{self, SynthesisOptions};
use geosyn_core::KinematicModel;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::{InputArgs, ModeArg, ReconstructArgs, RetargetArgs, SynthesizeArgs};
use crate::report::*;
use crate::Failure;

type Outcome = Result<String, Failure>;

fn load_model(path: &Path) -> Result<KinematicModel, Failure> {
    let text = io::read_to_string(path)?;
    geosyn_core::load_model(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

struct Input {
    model: KinematicModel,
    start_time: f64,
    trajectory: JointTrajectory,
    velocity_source: &'static str,
}

fn load_input(args: &InputArgs) -> Result<Input, Failure> {
    if !(args.delta_theta > 0.0 && args.delta_theta < std::f64::consts::PI) {
        return Err(Failure::Validation(format!(
            "--delta-theta must lie in (0, π), got {}",
            args.delta_theta
        )));
    }
    if args.steps == 0 {
        return Err(Failure::Validation("--steps must be positive".into()));
    }
    let model = load_model(&args.model)?;
    let TrajectoryFile { start_time, trajectory } = io::read_trajectory(&args.trajectory)
        .map_err(|e| Failure::Validation(format!("{}: {e}", args.trajectory.display())))?;
    if trajectory.dof() != model.dof() {
        return Err(Failure::Validation(format!(
            "trajectory has {} joints, model `{}` has {}",
            trajectory.dof(),
            model.name(),
            model.dof()
        )));
    }
    let (trajectory, velocity_source) = if trajectory.velocities().is_some() {
        (trajectory, "file")
    } else {
        (estimate_velocities(&trajectory, args.sg_window, DEFAULT_SG_ORDER)?, "savitzky-golay")
    };
    Ok(Input {
        model,
        start_time,
        trajectory,
        velocity_source,
    })
}

fn plan_options(args: &InputArgs) -> PlanOptions {
    PlanOptions {
        steps: args.steps,
        log: LogMapOptions {
            steps: args.steps,
            tolerance: args.log_tolerance,
            ..LogMapOptions::default()
        },
    }
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Validation(format!("{}: {e}", dir.display())))
}

fn segmentation_doc(method: &'static str, b: &SegmentBoundaryList, input: &Input) -> SegmentationDoc {
    let time = |k: usize| input.start_time + input.trajectory.time(k);
    SegmentationDoc {
        method,
        count: b.len(),
        segments: b
            .segments()
            .iter()
            .enumerate()
            .map(|(g, s)| SegmentDoc {
                g,
                start: s.start,
                end: s.end,
                t_start: time(s.start),
                t_end: time(s.end),
            })
            .collect(),
    }
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn analyze(args: &InputArgs) -> Outcome {
    let input = load_input(args)?;
    let traj = &input.trajectory;
    let riem = segment_riemannian(&input.model, traj, args.delta_theta)?;
    let zero = segment_zero_velocity(traj, DEFAULT_CROSSING_COUNT, DEFAULT_CROSSING_WINDOW)?;
    prepare_out(&args.out)?;

    let vel = traj.velocities().expect("velocities present");
    let mut header = vec!["t".to_string()];
    header.extend(labels("dq", traj.dof()));
    header.push("speed".into());
    let mut rows = Vec::with_capacity(traj.len());
    for (k, (q, v)) in traj.positions().iter().zip(vel).enumerate() {
        let mut row = vec![input.start_time + traj.time(k)];
        row.extend(v.iter());
        row.push(geometry::norm(&input.model, q, v)?);
        rows.push(row);
    }
    io::write_atomic(&args.out.join("velocities.csv"), io::format_table(&header, rows)?.as_bytes())?;

    let mut segment_of = vec![0.0; traj.len()];
    for (g, s) in riem.boundaries.segments().iter().enumerate() {
        for slot in &mut segment_of[s.start..=s.end] {
            *slot = g as f64;
        }
    }
    let angle_rows: Vec<(String, Vec<Option<f64>>)> = riem
        .angles
        .iter()
        .enumerate()
        .map(|(k, a)| ((input.start_time + traj.time(k)).to_string(), vec![*a, Some(segment_of[k])]))
        .collect();
    let header = ["t", "angle_rad", "segment"].map(String::from);
    io::write_atomic(&args.out.join("angles.csv"), io::format_sparse_table(&header, &angle_rows)?.as_bytes())?;

    let doc = AnalyzeDoc {
        schema_version: SCHEMA_VERSION,
        command: "analyze",
        model: input.model.name().to_owned(),
        samples: traj.len(),
        dt: traj.dt(),
        delta_theta: args.delta_theta,
        velocity_source: input.velocity_source,
        riemannian: segmentation_doc("riemannian", &riem.boundaries, &input),
        zero_velocity: segmentation_doc("zero_velocity", &zero, &input),
        velocity_table: "velocities.csv",
        angle_table: "angles.csv",
    };
    io::write_json(&args.out.join("segments.json"), &doc)?;
    Ok(format!(
        "riemannian: {} synergies, zero-velocity: {} segments -> {}",
        riem.boundaries.len(),
        zero.len(),
        args.out.display()
    ))
}

struct ModeRun {
    motion: ReconstructedMotion,
    metrics: MetricsDoc,
    ik: Option<IkDoc>,
}

fn run_mode(input: &Input, seg: &RiemannianSegmentation, mode: Mode, opts: &PlanOptions) -> Result<ModeRun, Failure> {
    let reference = synergy::pose_trajectory(&input.model, &input.trajectory)?;
    let (motion, ik) = match mode {
        Mode::Riemannian | Mode::Euclidean => (
            synergy::reconstruct(&input.model, &input.model, &input.trajectory, &seg.boundaries, mode, opts)?,
            None,
        ),
        Mode::Ik => {
            let track = synergy::ik_track(
                &input.model,
                &reference,
                input.trajectory.dt(),
                &input.trajectory.positions()[0],
                &IkOptions::default(),
            )?;
            let doc = IkDoc {
                saturated: track.saturated,
                max_position_error_m: track.max_position_error,
                max_orientation_error_rad: track.max_orientation_error,
            };
            (track.motion, Some(doc))
        }
    };
    let joint = synergy::joint_error(&motion.trajectory, &input.trajectory)?;
    let (position, orientation) = synergy::pose_error(&motion.poses, &reference)?;
    Ok(ModeRun {
        motion,
        metrics: MetricsDoc {
            joint_error_rad: joint,
            position_error_m: position,
            orientation_error_rad: orientation,
        },
        ik,
    })
}

fn core_mode(m: ModeArg) -> Mode {
    match m {
        ModeArg::Riemannian => Mode::Riemannian,
        ModeArg::Euclidean => Mode::Euclidean,
        ModeArg::Ik => Mode::Ik,
    }
}

fn write_plot_tables(dir: &Path, input: &Input, motion: &ReconstructedMotion) -> Result<(), Failure> {
    let n = input.trajectory.dof();
    let time = |k: usize| input.start_time + input.trajectory.time(k);
    let mut header = vec!["t".to_string()];
    header.extend(labels("q", n));
    header.extend(labels("input_q", n));
    let rows = (0..motion.trajectory.len()).map(|k| {
        let mut row = vec![time(k)];
        row.extend(motion.trajectory.positions()[k].iter());
        row.extend(input.trajectory.positions()[k].iter());
        row
    });
    io::write_atomic(&dir.join("joints.csv"), io::format_table(&header, rows)?.as_bytes())?;

    let reference = synergy::pose_trajectory(&input.model, &input.trajectory)?;
    let header = ["t", "x", "y", "z", "input_x", "input_y", "input_z"].map(String::from);
    let rows = motion.poses.iter().zip(&reference).enumerate().map(|(k, (a, b))| {
        vec![time(k), a.position.x, a.position.y, a.position.z, b.position.x, b.position.y, b.position.z]
    });
    io::write_atomic(&dir.join("hand.csv"), io::format_table(&header, rows)?.as_bytes())?;
    Ok(())
}

pub fn reconstruct(args: &ReconstructArgs) -> Outcome {
    let input = load_input(&args.input)?;
    let mode = core_mode(args.mode);
    let seg = segment_riemannian(&input.model, &input.trajectory, args.input.delta_theta)?;
    let run = run_mode(&input, &seg, mode, &plan_options(&args.input))?;
    let out = &args.input.out;
    prepare_out(out)?;
    io::write_trajectory(&out.join("trajectory.csv"), &run.motion.trajectory, input.start_time)?;
    write_plot_tables(out, &input, &run.motion)?;
    let doc = ReconstructDoc {
        schema_version: SCHEMA_VERSION,
        command: "reconstruct",
        mode: mode.to_string(),
        model: input.model.name().to_owned(),
        delta_theta: args.input.delta_theta,
        velocity_source: input.velocity_source,
        segments: run
            .motion
            .segments
            .iter()
            .map(|s| SynergyDoc {
                g: s.index,
                t_i: input.start_time + s.t_start,
                t_f: input.start_time + s.t_end,
                length: s.length,
                speed_start: s.speed_start,
                speed_end: s.speed_end,
                monotone: s.profile.monotone,
            })
            .collect(),
        metrics: run.metrics,
        ik: run.ik,
    };
    io::write_json(&out.join("reconstruction.json"), &doc)?;
    Ok(format!(
        "{mode}: joint error {:.3e} rad, position error {:.3e} m, orientation error {:.3e} rad -> {}",
        run.metrics.joint_error_rad,
        run.metrics.position_error_m,
        run.metrics.orientation_error_rad,
        out.display()
    ))
}

pub fn compare(args: &InputArgs) -> Outcome {
    let input = load_input(args)?;
    let seg = segment_riemannian(&input.model, &input.trajectory, args.delta_theta)?;
    let opts = plan_options(args);
    let modes = [Mode::Riemannian, Mode::Euclidean, Mode::Ik];
    let runs: Vec<Result<MetricsDoc, Failure>> = std::thread::scope(|scope| {
        let handles: Vec<_> = modes
            .iter()
            .map(|&m| {
                let (input, seg, opts) = (&input, &seg, &opts);
                scope.spawn(move || run_mode(input, seg, m, opts).map(|r| r.metrics))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("mode worker panicked")).collect()
    });
    let mut failures = Vec::new();
    let mut metric = |i: usize| match &runs[i] {
        Ok(m) => Some(*m),
        Err(f) => {
            failures.push(ModeFailure {
                mode: modes[i].to_string(),
                error: f.message().to_owned(),
            });
            None
        }
    };
    let (r, e, k) = (metric(0), metric(1), metric(2));
    if r.is_none() && e.is_none() && k.is_none() {
        let detail: Vec<String> = failures.iter().map(|f| format!("{}: {}", f.mode, f.error)).collect();
        return Err(Failure::Numerical(format!("every model failed; {}", detail.join("; "))));
    }
    let motion = args
        .trajectory
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "motion".into());
    let row = CompareRow {
        motion,
        riemannian_joint_rad: r.map(|m| m.joint_error_rad),
        euclidean_joint_rad: e.map(|m| m.joint_error_rad),
        ik_joint_rad: k.map(|m| m.joint_error_rad),
        riemannian_position_m: r.map(|m| m.position_error_m),
        euclidean_position_m: e.map(|m| m.position_error_m),
        riemannian_orientation_rad: r.map(|m| m.orientation_error_rad),
        euclidean_orientation_rad: e.map(|m| m.orientation_error_rad),
    };
    prepare_out(&args.out)?;
    let header = CompareRow::HEADER.map(String::from);
    let table = io::format_sparse_table(&header, &[(row.motion.clone(), row.cells())])?;
    io::write_atomic(&args.out.join("compare.csv"), table.as_bytes())?;
    let cell = |x: Option<f64>| x.map_or("-".to_owned(), |v| format!("{v:.3e}"));
    let summary = format!(
        "joint error rad: riemannian {}, euclidean {}, ik {} ({} model failures) -> {}",
        cell(row.riemannian_joint_rad),
        cell(row.euclidean_joint_rad),
        cell(row.ik_joint_rad),
        failures.len(),
        args.out.display()
    );
    let doc = CompareDoc {
        schema_version: SCHEMA_VERSION,
        command: "compare",
        model: input.model.name().to_owned(),
        table: "compare.csv",
        rows: vec![row],
        failures,
    };
    io::write_json(&args.out.join("compare.json"), &doc)?;
    Ok(summary)
}

pub fn retarget(args: &RetargetArgs) -> Outcome {
    let input = load_input(&args.input)?;
    let target = load_model(&args.target_model)?;
    if !(args.merge_threshold >= 0.0) {
        return Err(Failure::Validation("--merge-threshold must be non-negative".into()));
    }
    let seg = segment_riemannian(&input.model, &input.trajectory, args.input.delta_theta)?;
    let plan = plan_options(&args.input);
    let opts = RetargetOptions {
        merge_threshold: args.merge_threshold,
        shoot: ShootOptions {
            steps: args.input.steps,
            position_tolerance: args.position_tolerance,
            orientation_tolerance: args.orientation_tolerance,
            ..ShootOptions::default()
        },
        plan,
        ..RetargetOptions::default()
    };
    let result = retarget::retarget_motion(&input.model, &input.trajectory, &seg.boundaries, &target, &opts)?;
    let out = &args.input.out;
    prepare_out(out)?;
    io::write_trajectory(&out.join("trajectory.csv"), &result.trajectory, input.start_time)?;
    let header = ["t", "x", "y", "z", "qw", "qx", "qy", "qz"].map(String::from);
    let rows = result.poses.iter().enumerate().map(|(k, p)| {
        let [w, x, y, z] = p.quat_wxyz();
        vec![input.start_time + result.trajectory.time(k), p.position.x, p.position.y, p.position.z, w, x, y, z]
    });
    io::write_atomic(&out.join("hand.csv"), io::format_table(&header, rows)?.as_bytes())?;
    let converged = result.reports.iter().filter(|r| r.converged).count();
    let total = result.reports.len();
    let doc = RetargetDoc {
        schema_version: SCHEMA_VERSION,
        command: "retarget",
        source_model: input.model.name().to_owned(),
        target_model: target.name().to_owned(),
        merge_threshold: args.merge_threshold,
        initial_residual_m: result.initial_residual.0,
        initial_residual_rad: result.initial_residual.1,
        converged,
        synergies: result.reports,
    };
    io::write_json(&out.join("retarget.json"), &doc)?;
    if converged == 0 && total > 0 {
        return Err(Failure::Numerical(format!(
            "none of {total} synergies reached its key pose; report written to {}",
            out.display()
        )));
    }
    Ok(format!("{converged}/{total} synergies converged -> {}", out.display()))
}

pub fn synthesize(args: &SynthesizeArgs) -> Outcome {
    if args.synergies == 0 || !(args.dt > 0.0) || args.steps == 0 {
        return Err(Failure::Validation(
            "--synergies, --dt and --steps must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (model, target, q0) = match args.random_dof {
        Some(dof) => {
            let m = synth::random_chain(dof, &mut rng)?;
            let q0 = synth::random_configuration(dof, 1.0, &mut rng);
            (m.clone(), m, q0)
        }
        None => {
            let m = KinematicModel::planar("planar2", &[1.0, 1.0], &[1.0, 1.0])?;
            let t = KinematicModel::planar("planar3", &[0.8, 0.8, 0.4], &[1.0, 1.0, 0.5])?;
            let q0 = DVector::from_column_slice(&[rng.gen_range(-1.0..1.0), rng.gen_range(0.6..1.8)]);
            (m, t, q0)
        }
    };
    let opts = SynthesisOptions {
        dt: args.dt,
        steps: args.steps,
        ..SynthesisOptions::default()
    };
    let motion = synth::piecewise_geodesic(&model, &q0, args.synergies, &opts, &mut rng)?;
    prepare_out(&args.out)?;
    let path = |name: &str| -> PathBuf { args.out.join(name) };
    io::write_atomic(&path("model.json"), format!("{}\n", model.to_json()).as_bytes())?;
    io::write_atomic(&path("target.json"), format!("{}\n", target.to_json()).as_bytes())?;
    io::write_trajectory(&path("trajectory.csv"), &motion.trajectory, 0.0)?;
    let doc = SynthesisDoc {
        schema_version: SCHEMA_VERSION,
        command: "synthesize",
        seed: args.seed,
        model: model.name().to_owned(),
        dt: args.dt,
        knots: motion.knots.clone(),
        turn_angles: motion.turn_angles.clone(),
    };
    io::write_json(&path("truth.json"), &doc)?;
    Ok(format!(
        "{} samples, {} synergies -> {}",
        motion.trajectory.len(),
        args.synergies,
        args.out.display()
    ))
}
