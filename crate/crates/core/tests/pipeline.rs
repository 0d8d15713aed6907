//! Cross-module integration checks on the bundled example systems
//! (everything here is fast; the heavy benchmark lives in `acceptance`).

use std::path::{Path, PathBuf};

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};

use sparsefb_core::config::SystemConfig;
use sparsefb_core::l1lp::SolveOptions;
use sparsefb_core::model::{
    max_abs, reachability_matrix, OutputBounds, SynthesisSpec, Variant,
};
use sparsefb_core::realization::realize;
use sparsefb_core::synthesis::{solve_open_loop, synthesize};
use sparsefb_core::tracking::{
    assemble_tracking, closed_loop_tracking, compensator_companion, feedforward_gains,
    steady_state, ReferenceSignal,
};

fn config(rel: &str) -> SystemConfig {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(rel);
    SystemConfig::load(path).expect("bundled config loads")
}

#[test]
fn cartpole_reachability_is_full_rank() {
    let sys = config("cartpole.json").system().unwrap();
    let (phi, rank) = reachability_matrix(&sys, 40).unwrap();
    assert_eq!(phi.ncols(), 40);
    assert_eq!(rank, 4);
}

#[test]
fn cartpole_discretization_matches_published_entries() {
    // The continuous model reproduces the published 4-decimal discrete
    // matrices under zero-order hold at 0.3 s.
    let sys = config("cartpole.json").system().unwrap();
    let a_ref = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.3, 0.1377, 0.0143, 0.0, 1.0, 0.8256, 0.1377, 0.0, 0.0, 0.4628, 0.2441, 0.0,
            0.0, -3.2198, 0.4628,
        ],
    );
    let b_ref = DMatrix::from_column_slice(4, 1, &[0.1514, 0.9850, -0.1404, -0.8416]);
    assert!(max_abs(&(sys.a() - a_ref)) <= 5e-4);
    assert!(max_abs(&(sys.b() - b_ref)) <= 5e-4);
}

#[test]
fn oscillator_pipeline_tracks_a_doubled_reference() {
    // Steady state scales linearly with the reference.
    let cfg = config("oscillator.json");
    let sys = cfg.system().unwrap();
    let spec = cfg.synthesis_spec().unwrap();
    let pair = synthesize(&sys, &spec, &SolveOptions::default()).unwrap();
    let data = realize(&pair, sys.n(), spec.horizon()).unwrap();
    let gains = feedforward_gains(&sys, data.compensator(), &pair.x_block(1)).unwrap();
    let tcomp =
        assemble_tracking(data.compensator(), gains.m_gain.clone(), gains.l_gain.clone())
            .unwrap();

    let one = steady_state(&sys, &tcomp, &DVector::from_element(1, 1.0)).unwrap();
    let two = steady_state(&sys, &tcomp, &DVector::from_element(1, 2.0)).unwrap();
    assert_relative_eq!(one.y_inf[0], 1.0, epsilon = 1e-9);
    assert_relative_eq!(two.y_inf[0], 2.0, epsilon = 1e-9);
    assert_relative_eq!(two.x_inf, 2.0 * &one.x_inf, epsilon = 1e-9);
    assert!(one.z_inf.amax() <= 1e-9);

    // det(I - F) agrees with the companion form built from the solution
    // blocks.
    let nz = tcomp.base().state_dim();
    let eye = DMatrix::identity(nz, nz);
    let det_direct = (&eye - tcomp.base().f()).determinant();
    let det_companion = (&eye - compensator_companion(&pair)).determinant();
    assert_relative_eq!(det_direct, det_companion, max_relative = 1e-6);
}

#[test]
fn oscillator_dims_at_longer_horizon() {
    // With n = 2 and N = 5 the reference input matrix of the augmented
    // tracking system is (n + n(N-1)) x m = 10 x 1.
    let cfg = config("oscillator.json");
    let sys = cfg.system().unwrap();
    let spec = SynthesisSpec::new(5, OutputBounds::unbounded(1), Variant::MinimumAttention)
        .unwrap();
    let pair = synthesize(&sys, &spec, &SolveOptions::default()).unwrap();
    let data = realize(&pair, 2, 5).unwrap();
    let gains = feedforward_gains(&sys, data.compensator(), &pair.x_block(1)).unwrap();
    let tcomp =
        assemble_tracking(data.compensator(), gains.m_gain.clone(), gains.l_gain.clone())
            .unwrap();
    let aug = closed_loop_tracking(&sys, &tcomp).unwrap();
    let mr = aug.mr().expect("tracking system has a reference input");
    assert_eq!((mr.nrows(), mr.ncols()), (10, 1));
    assert!(mr.iter().all(|v| v.is_finite()));
}

#[test]
fn mimo_open_loop_values_match_columns_of_the_minimizer() {
    // The entrywise program separates per basis column, so each column
    // block of the minimizer costs exactly the open-loop optimum.
    let cfg = config("mimo.json");
    let sys = cfg.system().unwrap();
    let spec = cfg.synthesis_spec().unwrap();
    let pair = synthesize(&sys, &spec, &SolveOptions::default()).unwrap();
    for i in 0..sys.n() {
        let mut e = DVector::zeros(sys.n());
        e[i] = 1.0;
        let open = solve_open_loop(&sys, &e, spec.horizon(), spec.bounds(), &SolveOptions::default())
            .unwrap();
        let column_cost: f64 = (0..spec.horizon())
            .map(|t| {
                pair.u_block(t)
                    .column(i)
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .sum();
        assert_relative_eq!(open.objective, column_cost, max_relative = 1e-6);
    }
}

#[test]
fn tracking_reference_signal_prefers_r_plus() {
    // r_minus is carried but never used by the steady-state machinery.
    let r = ReferenceSignal::new(
        DVector::from_element(1, -7.0),
        DVector::from_element(1, 1.0),
    )
    .unwrap();
    assert_eq!(r.r_plus[0], 1.0);
    assert_eq!(r.r_minus[0], -7.0);
}
