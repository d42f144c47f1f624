use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use nonloc_lab::config::{self, ApplyFile, KernelCheckFile, ProfileFile, StudyFile};
use nonloc_lab::error::{Error, Result};
use nonloc_lab::kernel::{self, Certification, KernelFamily};
use nonloc_lab::moments;
use nonloc_lab::operators::{self, Route};
use nonloc_lab::{functions, harness, quadrature};

#[derive(Parser)]
#[command(
    name = "nonloc-lab",
    about = "Singular convolution kernels, nonlocal operators and their local limits",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for reports (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Random seed for sampling checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fail fast on precondition violations instead of downgrading.
    #[arg(long)]
    strict: bool,
    /// Validate the schema and print the plan without computing.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a kernel: integrability, growth bounds, Dirac family,
    /// momentum matrix, moment cancellation.
    KernelCheck(Common),
    /// Evaluate the nonlocal and local operators at one point.
    Apply(Common),
    /// Run an epsilon sweep and fit convergence rates.
    Study(Common),
    /// Pointwise error along a transect (boundary-layer profile).
    Profile(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&Common) -> Result<i32>) = match &cli.command {
        Command::KernelCheck(c) => (c, cmd_kernel_check),
        Command::Apply(c) => (c, cmd_apply),
        Command::Study(c) => (c, cmd_study),
        Command::Profile(c) => (c, cmd_profile),
    };
    if let Some(workers) = common.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: cannot configure worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(common) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_kernel_check(common: &Common) -> Result<i32> {
    let file: KernelCheckFile = config::parse_file(&common.config)?;
    let density = file.density.build()?;
    let cfg = file.quadrature.build()?;
    if common.dry_run {
        println!(
            "plan: kernel-check dim={} alpha={} delta={} dirac_epsilons={:?}",
            density.dim, density.alpha, file.delta, file.dirac_epsilons
        );
        return Ok(0);
    }
    let mut records: Vec<Certification> = Vec::new();
    records.push(kernel::check_integrability(&density, &cfg)?);
    records.push(kernel::check_growth_bounds(&density, 256)?);

    // Dirac family: mass invariance under scaling, shrinking tails.
    let base_mass = density.mass(&cfg)?;
    let mut worst_mass_dev = 0.0f64;
    for &eps in &file.dirac_epsilons {
        let fam = KernelFamily::new(density.clone(), eps)?;
        let far = fam.reach(&cfg);
        let qcfg = cfg.with_alpha(density.alpha).with_far(far);
        let mass_eps = quadrature::integrate_singular(
            density.dim,
            |x| fam.eval_scaled_density(x),
            &qcfg,
            Some(eps),
        )?
        .value;
        worst_mass_dev = worst_mass_dev.max((mass_eps - base_mass).abs() / base_mass.abs());
    }
    let tails = kernel::check_dirac_property(&density, file.delta, &file.dirac_epsilons, &cfg)?;
    let tails_ok = tails.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    records.push(Certification {
        check: "dirac_family".into(),
        pass: worst_mass_dev <= 1e-8 && tails_ok,
        value: worst_mass_dev,
        worst_ratio: tails.iter().cloned().fold(0.0, f64::max),
        detail: format!(
            "max relative mass deviation {worst_mass_dev:.3e}; tails beyond delta={} are {:?}",
            file.delta, tails
        ),
    });

    let m = moments::momentum_matrix(&density, &cfg)?;
    let spd = moments::require_spd(&m.m_fixed(), density.dim).is_ok();
    records.push(Certification {
        check: "momentum_matrix_spd".into(),
        pass: spd,
        value: moments::min_eigenvalue(&m.m_fixed(), density.dim).unwrap_or(f64::NAN),
        worst_ratio: 0.0,
        detail: format!("M = {:?}", m.m),
    });

    let worst_moment = moments::moment_cancellation_check(
        &density,
        &m.a_fixed(),
        &moments::default_rotations(density.dim),
        &moments::default_zn_samples(),
        &cfg,
    )?;
    let moment_tol = if density.is_radial { 1e-8 } else { 1e-6 };
    records.push(Certification {
        check: "moment_cancellation".into(),
        pass: worst_moment <= moment_tol,
        value: worst_moment,
        worst_ratio: worst_moment / moment_tol,
        detail: format!("worst tangential first moment {worst_moment:.3e} (tol {moment_tol:.1e})"),
    });

    let all_pass = records.iter().all(|r| r.pass);
    let dir = out_dir(common)?;
    write_json(&dir.join("certification.json"), &records)?;
    for r in &records {
        println!(
            "{} {}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.check,
            r.detail
        );
    }
    Ok(if all_pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct ApplyRecord {
    x: Vec<f64>,
    nonlocal: f64,
    local: f64,
    route: Route,
    err_est: f64,
}

fn cmd_apply(common: &Common) -> Result<i32> {
    let file: ApplyFile = config::parse_file(&common.config)?;
    let density = file.density.build()?;
    let domain = file.domain.build()?;
    let u = file.test_function.build(&domain)?;
    let cfg = file.quadrature.build()?;
    let dim = domain.dim();
    if file.x.len() != dim {
        return Err(Error::Config(format!("x must have {dim} components")));
    }
    let mut x = [0.0; 3];
    x[..dim].copy_from_slice(&file.x);
    if common.dry_run {
        println!(
            "plan: apply {} at {:?} (epsilon {}, route {:?})",
            u.name,
            file.x,
            file.epsilon,
            file.route
        );
        return Ok(0);
    }
    let fam = KernelFamily::new(density, file.epsilon)?;
    let m = moments::momentum_matrix(&fam.as_density(), &cfg)?;
    let est = operators::apply_nonlocal_domain(&u, &fam, &domain, &x, file.route, &cfg)?;
    let record = ApplyRecord {
        x: file.x.clone(),
        nonlocal: est.value,
        local: operators::apply_local(&u, &m.m_fixed(), &x),
        route: file.route,
        err_est: est.error,
    };
    println!("{}", serde_json::to_string(&record)?);
    Ok(0)
}

fn cmd_study(common: &Common) -> Result<i32> {
    let file: StudyFile = config::parse_file(&common.config)?;
    let spec = file.build()?;
    if common.dry_run {
        println!(
            "plan: study '{}' on {:?} grid cells, p {:?}, epsilons {:?} ({} operator evaluations est.)",
            spec.name,
            spec.grid_resolution,
            spec.p_values,
            spec.epsilons,
            spec.epsilons.len()
                * spec
                    .grid_resolution
                    .iter()
                    .product::<usize>()
                    .pow(if spec.grid_resolution.len() == 1 {
                        spec.domain.dim() as u32
                    } else {
                        1
                    })
        );
        return Ok(0);
    }
    let report = harness::convergence_study(&spec)?;
    let dir = out_dir(common)?;
    write_json(&dir.join("report.json"), &report)?;
    let csv = std::fs::File::create(dir.join("errors.csv"))?;
    harness::write_errors_csv(&report, csv)?;
    for r in &report.rates {
        println!(
            "p = {}: slope {:.3} (theory {:.3}) {}{}",
            r.p,
            r.raw_slope,
            r.theoretical_slope,
            if r.pass { "PASS" } else { "FAIL" },
            if r.superconvergent {
                " [superconvergent]"
            } else {
                ""
            }
        );
    }
    Ok(if report.all_pass { 0 } else { 1 })
}

fn cmd_profile(common: &Common) -> Result<i32> {
    let file: ProfileFile = config::parse_file(&common.config)?;
    let density = file.density.build()?;
    let domain = file.domain.build()?;
    let u = file.test_function.build(&domain)?;
    let cfg = file.quadrature.build()?;
    let transect = file.transect(domain.dim())?;
    if common.dry_run {
        println!(
            "plan: profile {} along {} points (epsilon {})",
            u.name,
            transect.len(),
            file.epsilon
        );
        return Ok(0);
    }
    if common.strict {
        let m = moments::momentum_matrix(&density, &cfg)?;
        if domain.has_boundary() {
            let flux = functions::neumann_compat_check(&u, &domain, &m.m_fixed(), 128)?;
            if flux > harness::COMPAT_TOL {
                return Err(Error::Certification(format!(
                    "test function violates the natural boundary condition (flux {flux:.3e})"
                )));
            }
        }
    }
    let fam = KernelFamily::new(density, file.epsilon)?;
    let m = moments::momentum_matrix(&fam.as_density(), &cfg)?;
    let profile = harness::boundary_layer_profile(&u, &fam, &domain, &m, &transect, &cfg)?;
    let dir = out_dir(common)?;
    let mut out = String::from("distance,abs_error\n");
    for (d, e) in &profile {
        out.push_str(&format!("{:.16e},{:.16e}\n", d, e));
    }
    std::fs::write(dir.join("profile.csv"), out)?;
    println!("wrote {} profile points", profile.len());
    Ok(0)
}
