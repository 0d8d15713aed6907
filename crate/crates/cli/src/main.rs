//! `sparsefb` — synthesize, realize, and verify sparse feedback controllers
//! for discrete-time LTI systems.
//!
//! Exit codes:
//!   0  success
//!   2  configuration / argument parse error
//!   3  the synthesis program is infeasible
//!   4  solver or numerical failure (iteration limit, divergence)
//!   5  violated assumption (rank condition, singular tracking condition,
//!      non-conforming data)
//!   6  property verification failed
//!   7  i/o failure

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use sparsefb_core::error::Error;
use sparsefb_core::io::{read_matrix_file, write_matrix_file};
use sparsefb_core::l1lp::SolveOptions;
use sparsefb_core::model::{max_abs, reachability_matrix, Compensator, TrackingCompensator};
use sparsefb_core::realization::{
    closed_loop, realize, similarity_residual, verify_nilpotent, RealizationData,
};
use sparsefb_core::simulate::{
    audit_constraints, check_equivalence, run_closed_loop, run_tracking,
};
use sparsefb_core::synthesis::{assemble_program, feasibility_report, synthesize};
use sparsefb_core::tracking::{
    assemble_tracking, feedforward_gains, steady_state, ReferenceSignal,
};
use sparsefb_core::{config::SystemConfig, Result, Variant};

use manifest::{matrix_to_rows, Dims, Manifest, ResidualRecord, SystemMatrices, Tolerances};

#[derive(Parser)]
#[command(
    name = "sparsefb",
    version,
    about = "Sparse (l1-optimal) feedback controller synthesis for discrete-time LTI systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct SolverArgs {
    /// Feasibility tolerance for the interior-point solver
    #[arg(long, default_value_t = 1e-8)]
    tol_feas: f64,
    /// Duality-gap tolerance for the interior-point solver
    #[arg(long, default_value_t = 1e-8)]
    tol_gap: f64,
    /// Iteration budget for the interior-point solver
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
}

impl SolverArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            tol_feas: self.tol_feas,
            tol_gap: self.tol_gap,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the sparse / minimum-attention program and write X.csv, U.csv
    /// and manifest.json
    Synthesize {
        /// System definition file (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: $SPARSEFB_OUT or ./sparsefb_out)
        #[arg(long, env = "SPARSEFB_OUT", default_value = "sparsefb_out")]
        out: PathBuf,
        /// Override the config's objective variant
        #[arg(long)]
        variant: Option<String>,
        /// Also write the assembled program in a plain-text dump (lp.txt)
        #[arg(long)]
        dump_lp: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Recover the compensator gains K, H, G, F from a solution directory
    Realize {
        /// Solution directory produced by `synthesize`
        #[arg(long)]
        solution: PathBuf,
    },
    /// Compute feedforward tracking gains M, L and the steady-state
    /// prediction
    Track {
        /// Solution directory with realized gains
        #[arg(long)]
        solution: PathBuf,
        /// Optional system definition file; defaults to the embedded system
        #[arg(long)]
        config: Option<PathBuf>,
        /// Step-reference value, comma-separated (default: config/manifest
        /// `r`, else all ones)
        #[arg(long, value_name = "R", allow_hyphen_values = true)]
        r#ref: Option<String>,
    },
    /// Run the closed loop and write a trajectory CSV
    Simulate {
        /// Solution directory with realized gains
        #[arg(long)]
        solution: PathBuf,
        /// Initial state, comma-separated (default: manifest x0, else 0)
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Track this step reference instead of regulating to the origin
        /// (requires `track` artifacts)
        #[arg(long, value_name = "R", allow_hyphen_values = true)]
        r#ref: Option<String>,
        /// Number of simulated transitions (default: ceil(5N/4))
        #[arg(long)]
        steps: Option<usize>,
        /// Trajectory file (default: <solution>/trajectory.csv)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check the closed-loop properties of a solution directory
    Verify {
        /// Solution directory (gains are re-realized if K/H/G/F are absent)
        #[arg(long)]
        solution: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse(_) => 2,
        Error::Infeasible => 3,
        Error::IterLimit { .. } | Error::Numerical(_) | Error::Divergence { .. } => 4,
        Error::Assumption(_)
        | Error::SingularCondition { .. }
        | Error::DcGainSingular
        | Error::RankDeficient { .. }
        | Error::X0Deviation { .. }
        | Error::RealizationResidual { .. }
        | Error::Dimension(_)
        | Error::NonFinite(_)
        | Error::InvalidArgument(_) => 5,
        Error::Io(_) => 7,
    }
}

/// Exit status used when `verify` finds a violated property.
const PROPERTY_FAILURE: u8 = 6;

fn parse_vector(text: &str, what: &str) -> Result<DVector<f64>> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{what}: {e}")))
        })
        .collect::<Result<_>>()?;
    if vals.is_empty() {
        return Err(Error::Parse(format!("{what}: empty vector")));
    }
    Ok(DVector::from_vec(vals))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synthesize {
            config,
            out,
            variant,
            dump_lp,
            solver,
        } => cmd_synthesize(&config, &out, variant.as_deref(), dump_lp, solver).map(|_| true),
        Command::Realize { solution } => cmd_realize(&solution).map(|_| true),
        Command::Track {
            solution,
            config,
            r#ref,
        } => cmd_track(&solution, config.as_deref(), r#ref.as_deref()).map(|_| true),
        Command::Simulate {
            solution,
            x0,
            r#ref,
            steps,
            out,
        } => cmd_simulate(&solution, x0.as_deref(), r#ref.as_deref(), steps, out).map(|_| true),
        Command::Verify { solution, solver } => cmd_verify(&solution, solver),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(PROPERTY_FAILURE),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn cmd_synthesize(
    config_path: &Path,
    out: &Path,
    variant_override: Option<&str>,
    dump_lp: bool,
    solver: SolverArgs,
) -> Result<()> {
    let start = Instant::now();
    let mut config = SystemConfig::load(config_path)?;
    if let Some(v) = variant_override {
        config.variant = Some(v.to_string());
    }
    let sys = config.system()?;
    let spec = config.synthesis_spec()?;
    config.x0_vector(sys.n())?; // validate early
    config.reference_vector(sys.m())?;

    std::fs::create_dir_all(out)?;
    if dump_lp {
        let prog = assemble_program(&sys, &spec)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(out.join("lp.txt"))?);
        prog.dump(&mut f)?;
    }

    let (_, rank) = reachability_matrix(&sys, spec.horizon())?;
    if rank < sys.n() {
        eprintln!(
            "warning: reachability matrix has rank {} < n = {}; regulation may be infeasible",
            rank,
            sys.n()
        );
    }

    let pair = synthesize(&sys, &spec, &solver.options())?;
    let report = feasibility_report(&pair, &sys, &spec)?;

    write_matrix_file(out.join("X.csv"), pair.x())?;
    write_matrix_file(out.join("U.csv"), pair.u())?;

    let mut artifacts = vec!["X.csv".to_string(), "U.csv".to_string()];
    if dump_lp {
        artifacts.push("lp.txt".to_string());
    }
    let manifest = Manifest {
        input: config_path.display().to_string(),
        name: config.name.clone(),
        variant: spec.variant().to_string(),
        tolerances: Tolerances {
            tol_feas: solver.tol_feas,
            tol_gap: solver.tol_gap,
            max_iter: solver.max_iter,
        },
        dims: Dims {
            n: sys.n(),
            m: sys.m(),
            p: sys.p(),
            horizon: spec.horizon(),
        },
        system: SystemMatrices {
            a: matrix_to_rows(sys.a()),
            b: matrix_to_rows(sys.b()),
            c: matrix_to_rows(sys.c()),
            d: matrix_to_rows(sys.d()),
        },
        bounds: if spec.bounds().is_unbounded() {
            None
        } else {
            Some(spec.bounds().limits().to_vec())
        },
        objective: pair.objective(),
        residuals: ResidualRecord {
            dynamics: report.dynamics_residual,
            init: report.init_residual,
            bound_violation: report.bound_violation,
        },
        reachability_rank: rank,
        artifacts,
        wall_seconds: start.elapsed().as_secs_f64(),
        x0: config.x0.clone(),
        r: config.r.clone(),
    };
    manifest.save(out.join("manifest.json"))?;

    println!("objective        {:.6}", pair.objective());
    println!("dynamics residual {:.3e}", report.dynamics_residual);
    println!("init residual     {:.3e}", report.init_residual);
    println!("bound violation   {:.3e}", report.bound_violation);
    println!("reachability rank {rank}");
    println!("wrote {}", out.display());
    Ok(())
}

fn load_pair(dir: &Path, manifest: &Manifest) -> Result<sparsefb_core::SolutionPair> {
    let x = read_matrix_file(dir.join("X.csv"))?;
    let u = read_matrix_file(dir.join("U.csv"))?;
    let variant = match manifest.variant.as_str() {
        "minimum-attention" => Variant::MinimumAttention,
        _ => Variant::Sparse,
    };
    let objective = sparsefb_core::synthesis::pair_objective(&u, manifest.dims.n, variant);
    sparsefb_core::SolutionPair::new(x, u, objective)
}

fn realize_dir(dir: &Path, manifest: &Manifest) -> Result<RealizationData> {
    let pair = load_pair(dir, manifest)?;
    realize(&pair, manifest.dims.n, manifest.dims.horizon)
}

fn cmd_realize(dir: &Path) -> Result<()> {
    let manifest = Manifest::load(dir.join("manifest.json"))?;
    let sys = manifest.system()?;
    let data = realize_dir(dir, &manifest)?;
    let comp = data.compensator();

    write_matrix_file(dir.join("K.csv"), comp.k())?;
    write_matrix_file(dir.join("H.csv"), comp.h())?;
    write_matrix_file(dir.join("G.csv"), comp.g())?;
    write_matrix_file(dir.join("F.csv"), comp.f())?;
    // Heat-map-ready magnitudes of the full gain [K H; G F].
    let kabs = comp.stacked_gain().map(f64::abs);
    write_matrix_file(dir.join("gain_magnitude.csv"), &kabs)?;

    let aug = closed_loop(&sys, comp)?;
    let sim_res = similarity_residual(&aug, &data);
    let nil = verify_nilpotent(&aug, manifest.dims.horizon);
    println!("realization residual   {:.3e}", data.residual());
    println!("Acl Psi - Psi (PxI)    {:.3e}", sim_res);
    println!(
        "|Acl^N|                {:.3e} (tolerance {:.3e}, {})",
        nil.power_norm,
        nil.tolerance,
        if nil.passes { "nilpotent" } else { "NOT nilpotent" }
    );
    println!("wrote K.csv H.csv G.csv F.csv gain_magnitude.csv in {}", dir.display());
    Ok(())
}

fn load_compensator(dir: &Path, manifest: &Manifest) -> Result<Compensator> {
    let gains: Vec<PathBuf> = ["K.csv", "H.csv", "G.csv", "F.csv"]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    if gains.iter().all(|p| p.exists()) {
        Compensator::new(
            read_matrix_file(&gains[3])?,
            read_matrix_file(&gains[2])?,
            read_matrix_file(&gains[1])?,
            read_matrix_file(&gains[0])?,
        )
    } else {
        Ok(realize_dir(dir, manifest)?.into_compensator())
    }
}

fn cmd_track(dir: &Path, config: Option<&Path>, reference: Option<&str>) -> Result<()> {
    let manifest = Manifest::load(dir.join("manifest.json"))?;
    let sys = match config {
        Some(path) => SystemConfig::load(path)?.system()?,
        None => manifest.system()?,
    };
    let comp = load_compensator(dir, &manifest)?;
    let pair = load_pair(dir, &manifest)?;
    let x1 = pair.x_block(1);

    let gains = feedforward_gains(&sys, &comp, &x1)?;
    write_matrix_file(dir.join("M.csv"), &gains.m_gain)?;
    write_matrix_file(dir.join("L.csv"), &gains.l_gain)?;

    let r_plus = match reference {
        Some(text) => parse_vector(text, "--ref")?,
        None => match &manifest.r {
            Some(r) => DVector::from_vec(r.clone()),
            None => DVector::from_element(sys.m(), 1.0),
        },
    };
    let tcomp = assemble_tracking(&comp, gains.m_gain.clone(), gains.l_gain.clone())?;
    let ss = steady_state(&sys, &tcomp, &r_plus)?;

    let record = serde_json::json!({
        "det_state_loop": gains.det_state_loop,
        "det_compensator_loop": gains.det_compensator_loop,
        "reference": r_plus.iter().copied().collect::<Vec<f64>>(),
        "steady_state": {
            "x_inf": ss.x_inf.iter().copied().collect::<Vec<f64>>(),
            "z_inf_max": ss.z_inf.amax(),
            "y_inf": ss.y_inf.iter().copied().collect::<Vec<f64>>(),
        },
        "artifacts": ["M.csv", "L.csv"],
    });
    std::fs::write(
        dir.join("tracking.json"),
        serde_json::to_string_pretty(&record).map_err(|e| Error::Parse(e.to_string()))? + "\n",
    )?;

    println!("det(I - (A+BK))  {:.4}", gains.det_state_loop);
    println!("det(I - F)       {:.4}", gains.det_compensator_loop);
    println!("M = {:.4}", gains.m_gain);
    println!("y_inf = {:.6}", ss.y_inf);
    println!("|z_inf| = {:.3e}", ss.z_inf.amax());
    println!("wrote M.csv L.csv tracking.json in {}", dir.display());
    Ok(())
}

fn cmd_simulate(
    dir: &Path,
    x0: Option<&str>,
    reference: Option<&str>,
    steps: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let manifest = Manifest::load(dir.join("manifest.json"))?;
    let sys = manifest.system()?;
    let comp = load_compensator(dir, &manifest)?;
    let horizon = manifest.dims.horizon;
    // Default horizon shows the post-deadbeat quiescence.
    let steps = steps.unwrap_or(horizon.max(1) * 5 / 4 + usize::from(horizon * 5 % 4 != 0));

    let x0 = match x0 {
        Some(text) => parse_vector(text, "--x0")?,
        None => match &manifest.x0 {
            Some(v) => DVector::from_vec(v.clone()),
            None => DVector::zeros(sys.n()),
        },
    };
    if x0.len() != sys.n() {
        return Err(Error::Dimension(format!(
            "x0 has {} entries, state dimension is {}",
            x0.len(),
            sys.n()
        )));
    }

    let traj = match reference {
        Some(text) => {
            let r_plus = parse_vector(text, "--ref")?;
            let m_path = dir.join("M.csv");
            let l_path = dir.join("L.csv");
            if !m_path.exists() || !l_path.exists() {
                return Err(Error::Parse(
                    "tracking gains M.csv/L.csv not found; run `track` first".into(),
                ));
            }
            let tcomp = TrackingCompensator::new(
                comp,
                read_matrix_file(&l_path)?,
                read_matrix_file(&m_path)?,
            )?;
            let reference = ReferenceSignal::step(r_plus)?;
            run_tracking(&sys, &tcomp, &x0, &reference, steps.max(horizon))?
        }
        None => run_closed_loop(&sys, &comp, &x0, steps)?,
    };

    let out = out.unwrap_or_else(|| dir.join("trajectory.csv"));
    let mut f = std::io::BufWriter::new(std::fs::File::create(&out)?);
    traj.write_csv(&mut f)?;
    drop(f);

    let spec = manifest.synthesis_spec()?;
    let audit = audit_constraints(&traj, spec.bounds());
    let final_x = traj.x(traj.steps()).amax();
    println!("steps             {}", traj.steps());
    println!("|x(T)|            {:.3e}", final_x);
    if horizon <= traj.steps() {
        println!("|x(N)|            {:.3e}", traj.x(horizon).amax());
    }
    println!("bound violation   {:.3e}", audit.worst());
    if reference.is_some() {
        let err = traj.error(traj.steps()).amax();
        println!("|y(T) - r|        {:.3e}", err);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_verify(dir: &Path, solver: SolverArgs) -> Result<bool> {
    let manifest = Manifest::load(dir.join("manifest.json"))?;
    let sys = manifest.system()?;
    let spec = manifest.synthesis_spec()?;
    let pair = load_pair(dir, &manifest)?;
    let comp = load_compensator(dir, &manifest)?;
    let horizon = manifest.dims.horizon;
    let n = sys.n();
    let mut all_pass = true;
    let mut summarize = |name: &str, value: f64, tol: f64| {
        let ok = value <= tol;
        all_pass &= ok;
        println!(
            "{} {:>12.3e} (tolerance {:.1e}): {}",
            format!("{name:<42}"),
            value,
            tol,
            if ok { "pass" } else { "FAIL" }
        );
    };

    // Nilpotency through the similarity identity.
    let data = realize(&pair, n, horizon)?;
    let aug = closed_loop(&sys, &comp)?;
    summarize(
        "similarity residual |Acl Psi - Psi (PxI)|",
        similarity_residual(&aug, &data),
        1e-8,
    );

    // Gains on disk must agree with the solution matrices.
    let gain_drift = max_abs(&(comp.stacked_gain() - data.compensator().stacked_gain()));
    summarize("stored gains vs re-realized gains", gain_drift, 1e-6);

    // Trajectory identities and deadbeat for each basis start.
    let mut identity_err = 0.0_f64;
    let mut deadbeat_err = 0.0_f64;
    let mut audit_worst = 0.0_f64;
    let sim_steps = horizon + horizon / 2 + 1;
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let traj = run_closed_loop(&sys, &comp, &e, sim_steps)?;
        for t in 0..horizon {
            identity_err = identity_err
                .max((traj.x(t) - pair.x_block(t).column(i)).amax())
                .max((traj.u(t) - pair.u_block(t).column(i)).amax());
        }
        for t in horizon..=sim_steps {
            deadbeat_err = deadbeat_err.max(traj.x(t).amax());
        }
        audit_worst = audit_worst.max(audit_constraints(&traj, spec.bounds()).worst());
    }
    if let Some(x0) = &manifest.x0 {
        let traj = run_closed_loop(&sys, &comp, &DVector::from_vec(x0.clone()), sim_steps)?;
        deadbeat_err = deadbeat_err.max(traj.x(horizon).amax());
        audit_worst = audit_worst.max(audit_constraints(&traj, spec.bounds()).worst());
    }
    summarize("trajectory identities x=X_t e, u=U_t e", identity_err, 1e-8);
    summarize("deadbeat |x(t)| for t >= N", deadbeat_err, 1e-6);
    summarize("output-bound audit", audit_worst, 1e-6);

    // Open/closed-loop value equivalence (sparse objective only).
    if spec.variant() == Variant::Sparse {
        let report = check_equivalence(&sys, &spec, &pair, &comp, &solver.options())?;
        let mut worst_input = 0.0_f64;
        let mut worst_value = 0.0_f64;
        for c in &report.checks {
            worst_input = worst_input.max(c.input_mismatch);
            worst_value = worst_value.max(
                (c.closed_loop_value - c.open_loop_value).abs()
                    / c.open_loop_value.abs().max(1e-12),
            );
        }
        summarize("equivalence: input sequence mismatch", worst_input, 1e-8);
        summarize("equivalence: value relative error", worst_value, 1e-6);
    } else {
        println!("equivalence check skipped (minimum-attention objective)");
    }

    println!("{}", if all_pass { "verify: PASS" } else { "verify: FAIL" });
    Ok(all_pass)
}
