// Temporary calibration probe for the three benchmark systems.
use nalgebra::{DMatrix, DVector};
use sparsefb_core::l1lp::SolveOptions;
use sparsefb_core::model::{zoh_discretize, LtiSystem, OutputBounds, SynthesisSpec, Variant};
use sparsefb_core::realization::{closed_loop, realize, similarity_residual, verify_nilpotent};
use sparsefb_core::synthesis::{feasibility_report, synthesize};
use sparsefb_core::tracking::feedforward_gains;
use std::time::Instant;

fn mimo_system() -> LtiSystem {
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[
            1.1133, 0.0177, -0.1478, 0.0177, 1.4517, 0.2514, 0.0418, 0.2758, 0.9208,
        ],
    );
    let b = DMatrix::from_row_slice(3, 2, &[0.0031, 0.5218, 0.0121, 0.1486, 0.0957, 0.1202]);
    let c = DMatrix::zeros(2, 3);
    let d = DMatrix::identity(2, 2);
    LtiSystem::new(a, b, c, d).unwrap()
}

fn oscillator_system() -> LtiSystem {
    let ac = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let bc = DMatrix::from_row_slice(2, 1, &[-2.0, 1.0]);
    let (a, b) = zoh_discretize(&ac, &bc, 0.2).unwrap();
    let c = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
    let d = DMatrix::zeros(1, 1);
    LtiSystem::new(a, b, c, d).unwrap()
}

fn cartpole_system() -> LtiSystem {
    let m_cart = 0.29;
    let m_pole = 0.1;
    let len = 1.0;
    let g = 9.81;
    let a23 = m_pole * g / m_cart;
    let a43 = -(m_cart + m_pole) * g / (m_cart * len);
    let b2 = 1.0 / m_cart;
    let b4 = -1.0 / (m_cart * len);
    let ac = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 1.0, 0.0, 0.0, 0.0, 0.0, a23, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, a43, 0.0,
        ],
    );
    let bc = DMatrix::from_row_slice(4, 1, &[0.0, b2, 0.0, b4]);
    let (a, b) = zoh_discretize(&ac, &bc, 0.3).unwrap();
    println!("cart-pole A =\n{:.4}", a);
    println!("cart-pole B =\n{:.4}", b);
    let c = DMatrix::from_row_slice(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let d = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    LtiSystem::new(a, b, c, d).unwrap()
}

fn main() {
    let opts = SolveOptions::default();

    // ---- MIMO ----
    let sys = mimo_system();
    let spec = SynthesisSpec::new(4, OutputBounds::uniform(2, 10.0).unwrap(), Variant::Sparse)
        .unwrap();
    let t0 = Instant::now();
    let pair = synthesize(&sys, &spec, &opts).unwrap();
    println!(
        "MIMO: objective = {:.6} (target 24.1544), {} ms",
        pair.objective(),
        t0.elapsed().as_millis()
    );
    let rep = feasibility_report(&pair, &sys, &spec).unwrap();
    println!("MIMO residuals: {:?}", rep);
    let data = realize(&pair, 3, 4).unwrap();
    println!("MIMO K =\n{:.4}", data.compensator().k());
    println!("MIMO H =\n{:.4}", data.compensator().h());

    // ---- oscillator, try N = 4 and N = 5 ----
    let sys = oscillator_system();
    println!("osc A = {:.4}, B = {:.4}", sys.a(), sys.b());
    for n_steps in [4usize, 5] {
        let spec = SynthesisSpec::new(
            n_steps,
            OutputBounds::unbounded(1),
            Variant::MinimumAttention,
        )
        .unwrap();
        let t0 = Instant::now();
        let pair = synthesize(&sys, &spec, &opts).unwrap();
        let data = realize(&pair, 2, n_steps).unwrap();
        let gains = feedforward_gains(&sys, data.compensator(), &pair.x_block(1)).unwrap();
        println!(
            "osc N={}: obj={:.4} det_i={:.4} (0.2475?) det_ii={:.4} (2.4902?) M={:.4} (-3.0837?) {} ms",
            n_steps,
            pair.objective(),
            gains.det_state_loop,
            gains.det_compensator_loop,
            gains.m_gain[(0, 0)],
            t0.elapsed().as_millis()
        );
        println!("osc N={} L^T = {:.4}", n_steps, gains.l_gain.transpose());
        println!("osc N={} X =\n{:.4}", n_steps, pair.x());
        println!("osc N={} U =\n{:.4}", n_steps, pair.u());
        println!("osc N={} K = {:.4}", n_steps, data.compensator().k());
    }

    // ---- cart-pole ----
    let sys = cartpole_system();
    let bounds = OutputBounds::from_limits(vec![Some(1.0), Some(1.0)]).unwrap();
    let spec = SynthesisSpec::new(40, bounds, Variant::Sparse).unwrap();
    let t0 = Instant::now();
    let pair = synthesize(&sys, &spec, &opts).unwrap();
    let elapsed = t0.elapsed();
    println!(
        "cart-pole: objective = {:.6} (target 6.4204), {:.2} s",
        pair.objective(),
        elapsed.as_secs_f64()
    );
    let rep = feasibility_report(&pair, &sys, &spec).unwrap();
    println!("cart-pole residuals: {:?}", rep);
    let t0 = Instant::now();
    let data = realize(&pair, 4, 40).unwrap();
    let aug = closed_loop(&sys, data.compensator()).unwrap();
    println!(
        "cart-pole: similarity residual = {:.3e}, realize+cl {} ms",
        similarity_residual(&aug, &data),
        t0.elapsed().as_millis()
    );
    let nil = verify_nilpotent(&aug, 40);
    println!(
        "cart-pole: |Acl^40| = {:.3e}, rho = {:.3e}, passes = {}",
        nil.power_norm, nil.spectral_radius, nil.passes
    );
    // deadbeat from the benchmark x0
    let x0 = DVector::from_vec(vec![0.9453, 0.7465, 0.7506, 0.4026]);
    let traj =
        sparsefb_core::simulate::run_closed_loop(&sys, data.compensator(), &x0, 50).unwrap();
    println!("cart-pole: |x(40)| = {:.3e}", traj.x(40).amax());
    let audit = sparsefb_core::simulate::audit_constraints(&traj, spec.bounds());
    println!("cart-pole: audit worst = {:.3e}", audit.worst());
}
