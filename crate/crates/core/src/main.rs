use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};

use stefan_homog::config::{parse_config_with_overrides, render_config, RunConfig};
use stefan_homog::frontmetrics::{extract_front, hausdorff, sphere_deviation, FrontSet};
use stefan_homog::geometry::{InitialProfile, NodeKind};
use stefan_homog::grid::CartesianGrid;
use stefan_homog::harness::{
    audit_comparison_media, audit_enthalpy, audit_monotonicity, convergence_study, StudyConfig,
};
use stefan_homog::io::{self, Dump, FrontMetricsRow};
use stefan_homog::media::LatentHeatField;
use stefan_homog::obstacle::run;
use stefan_homog::reference::{
    cstar, radial_hele_shaw_front, radial_stefan_solve, rho, RadialStefanParams,
    SelfSimilarSolution,
};
use stefan_homog::rescale::{make_params, rescale_snapshot};

#[derive(Parser)]
#[command(
    name = "stefan-homog",
    version,
    about = "One-phase Stefan problem with inhomogeneous latent heat: runs, homogenization studies, audits"
)]
struct Cli {
    /// Worker threads (defaults to STEFAN_HOMOG_JOBS, then the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    config: PathBuf,
    /// Override a configuration key, e.g. `--set time.dt=0.01` (repeatable; wins over the file).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a configuration, then print the effective configuration.
    Validate(ConfigArgs),
    /// Single simulation with snapshots, step log, fronts and front metrics.
    Run(ConfigArgs),
    /// Convergence study along the configured lambda ladder.
    Study(ConfigArgs),
    /// Invariant audits (monotonicity, enthalpy balance, comparison of bounding media).
    Audit {
        #[command(flatten)]
        args: ConfigArgs,
        /// Corrupt the last snapshot before auditing (exercises the failure path).
        #[arg(long)]
        inject_fault: bool,
    },
    /// Reference quantities: front radius, point-source profile, radial fronts.
    #[command(group(ArgGroup::new("mode").required(true)))]
    Reference {
        /// rho(t) for `n= A= L= t=`.
        #[arg(long, group = "mode")]
        rho: bool,
        /// V and U of the point source on a radial table: `n= A= L= t= [r_max=] [points=]`.
        #[arg(long, group = "mode")]
        profile: bool,
        /// Radial Hele-Shaw front: `a= b= A= L= n= T= dt=`.
        #[arg(long, group = "mode")]
        hele_shaw: bool,
        /// Radial Stefan front: `a= b= A= L= n= T= dr= dt=`.
        #[arg(long, group = "mode")]
        radial_stefan: bool,
        /// Decimal digits for `--rho`.
        #[arg(long, default_value_t = 7)]
        digits: usize,
        /// Write the table to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// KEY=VALUE parameters.
        params: Vec<String>,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Audit(String),
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn numerical<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Numerical(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Err(e) = configure_jobs(cli.jobs) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Audit(summary)) => {
            eprintln!("audit failed:\n{summary}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn configure_jobs(flag: Option<usize>) -> Result<()> {
    let jobs = match flag {
        Some(j) => Some(j),
        None => match std::env::var("STEFAN_HOMOG_JOBS") {
            Ok(s) => Some(
                s.trim()
                    .parse::<usize>()
                    .with_context(|| format!("STEFAN_HOMOG_JOBS = {s:?} is not a count"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(j) = jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate(args) => {
            let (cfg, _) = load(&args)?;
            cfg.problem().map_err(usage)?;
            cfg.field().map_err(usage)?;
            print!("{}", render_config(&cfg));
            Ok(())
        }
        Command::Run(args) => cmd_run(&args),
        Command::Study(args) => cmd_study(&args),
        Command::Audit { args, inject_fault } => cmd_audit(&args, inject_fault),
        Command::Reference {
            rho,
            profile,
            hele_shaw,
            radial_stefan,
            digits,
            out,
            params,
        } => {
            let kv = parse_kv(&params).map_err(usage)?;
            let text = if rho {
                reference_rho(&kv, digits)
            } else if profile {
                reference_profile(&kv)
            } else if hele_shaw {
                reference_hele_shaw(&kv)
            } else {
                debug_assert!(radial_stefan);
                reference_radial_stefan(&kv)
            }?;
            match out {
                Some(path) => io::write_file(&path, text.as_bytes()).map_err(usage),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn load(args: &ConfigArgs) -> Result<(RunConfig, PathBuf), Failure> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))
        .map_err(usage)?;
    let cfg = parse_config_with_overrides(&text, &args.overrides).map_err(usage)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn write(out: &Path, name: &str, text: &str) -> Result<(), Failure> {
    io::write_file(&out.join(name), text.as_bytes())
        .with_context(|| format!("writing {}", out.join(name).display()))
        .map_err(usage)
}

fn write_manifest(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    extra: &[(&str, String)],
) -> Result<(), Failure> {
    let mut entries = vec![
        (
            "program",
            format!("stefan-homog {}", env!("CARGO_PKG_VERSION")),
        ),
        ("command", command.to_string()),
        ("schema_version", cfg.schema_version.to_string()),
    ];
    entries.extend(extra.iter().cloned());
    let mut text = io::manifest(&entries);
    text.push_str("\n# effective configuration\n");
    text.push_str(&render_config(cfg));
    write(out, "manifest.txt", &text)
}

fn homogenized(cfg: &RunConfig, field: &LatentHeatField<f64>) -> Result<f64, Failure> {
    field
        .averaged_latent_heat(
            (2.0 * cfg.grid.extent).max(50.0 * cfg.media.period),
            cfg.media.average_samples,
        )
        .map_err(usage)
}

fn cmd_run(args: &ConfigArgs) -> Result<(), Failure> {
    let (cfg, out) = load(args)?;
    let problem = cfg.problem().map_err(usage)?;
    let field = cfg.field().map_err(usage)?;
    let result = run(&problem, &field, &cfg.schedule(), &cfg.solver_params()).map_err(numerical)?;
    let n = cfg.grid.dimension;
    let l_hom = homogenized(&cfg, &field)?;
    let reference = SelfSimilarSolution::new(cstar(cfg.core.radius, cfg.core.datum, n), l_hom, n)
        .map_err(numerical)?;

    write(&out, "steps.csv", &io::step_log_csv(&result.log))?;
    let mut fronts = Vec::new();
    let mut metrics = Vec::new();
    for (k, s) in result.snapshots.iter().enumerate() {
        if cfg.output.write_dumps {
            Dump::from_grid(&s.u, &s.v, s.t, None)
                .write(&out.join(format!("snapshot_{k:03}.stfh")))
                .map_err(usage)?;
        }
        let front = extract_front(&s.u).with_time(s.t);
        if let Ok(dev) = sphere_deviation(&front, &[0.0; 3][..n]) {
            let sphere = FrontSet::sphere(n, reference.rho(s.t), problem.h() / 2.0, s.t);
            let hd = hausdorff(&front, &sphere).unwrap_or(f64::NAN);
            metrics.push(FrontMetricsRow {
                t: s.t,
                r_min: dev.r_min,
                r_max: dev.r_max,
                deviation: dev.deviation,
                hausdorff_to_reference: hd,
            });
        }
        fronts.push(front);
    }
    if cfg.output.write_fronts {
        write(&out, "fronts.csv", &io::front_csv(&fronts))?;
    }
    write(&out, "metrics.csv", &io::metrics_csv(&metrics))?;
    if let Some(lambda) = cfg.rescale.lambda {
        let params = make_params(lambda, n).map_err(usage)?;
        let target = CartesianGrid::covering(n, cfg.rescale.target_h, cfg.rescale.target_extent);
        for (k, s) in result.snapshots.iter().enumerate() {
            let (v_l, u_l) = rescale_snapshot(&s.u, &s.v, &params, &target).map_err(numerical)?;
            Dump::from_grid(&u_l, &v_l, s.t / params.time_factor, Some(lambda))
                .write(&out.join(format!("rescaled_{k:03}.stfh")))
                .map_err(usage)?;
        }
    }
    write_manifest(
        &out,
        "run",
        &cfg,
        &[
            ("steps", result.log.len().to_string()),
            ("L_hom", l_hom.to_string()),
            ("cstar", reference.amplitude.to_string()),
        ],
    )?;
    eprintln!(
        "run: {} steps, {} snapshots written to {}",
        result.log.len(),
        result.snapshots.len(),
        out.display()
    );
    Ok(())
}

fn cmd_study(args: &ConfigArgs) -> Result<(), Failure> {
    let (cfg, out) = load(args)?;
    let study = StudyConfig::from_run_config(&cfg).map_err(usage)?;
    let report = convergence_study(&study).map_err(numerical)?;
    write(&out, "study.csv", &report.to_csv())?;
    if !report.probes.is_empty() {
        write(&out, "probes.csv", &report.probes_csv())?;
    }
    let mut audits = String::new();
    for a in &report.audits {
        audits.push_str(&format!(
            "# lambda = {} ({} steps, {} sweeps)\n{}enthalpy_relative_error: {}\n",
            a.lambda,
            a.steps,
            a.iterations,
            a.monotonicity.summary(),
            a.enthalpy.relative_error()
        ));
    }
    write(&out, "audits.txt", &audits)?;
    let failures: Vec<String> = report
        .failures
        .iter()
        .map(|(l, m)| format!("lambda {l}: {m}"))
        .collect();
    write_manifest(
        &out,
        "study",
        &cfg,
        &[
            ("L_hom", report.l_hom.to_string()),
            ("cstar", report.cstar.to_string()),
            ("failures", failures.len().to_string()),
        ],
    )?;
    print!("{}", report.to_csv());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(anyhow!(failures.join("; "))))
    }
}

fn cmd_audit(args: &ConfigArgs, inject_fault: bool) -> Result<(), Failure> {
    let (cfg, out) = load(args)?;
    let problem = cfg.problem().map_err(usage)?;
    let field = cfg.field().map_err(usage)?;
    let schedule = cfg.schedule();
    let params = cfg.solver_params();
    let mut result = run(&problem, &field, &schedule, &params).map_err(numerical)?;
    if inject_fault {
        let last = result
            .snapshots
            .last_mut()
            .ok_or_else(|| usage(anyhow!("no snapshots to corrupt")))?;
        let node = problem
            .mask()
            .iter()
            .position(|k| *k == NodeKind::Fluid)
            .expect("a fluid node exists");
        last.v.values[node] = -1.0;
    }
    let mono = audit_monotonicity(&problem, &result.snapshots);
    let mut summary = mono.summary();
    let mut passed = mono.passed();
    if let Some(last) = result.snapshots.last() {
        let (check, balance) = audit_enthalpy(last, &problem, &field, 0.05);
        summary.push_str(&format!(
            "{}: {} (relative error {})\n",
            check.name,
            if check.passed { "pass" } else { "FAIL" },
            balance.relative_error()
        ));
        passed &= check.passed;
    }
    let n = cfg.grid.dimension;
    let g_low = LatentHeatField::constant(cfg.media.lower, n).map_err(usage)?;
    let g_high = LatentHeatField::constant(cfg.media.upper, n).map_err(usage)?;
    let cmp =
        audit_comparison_media(&problem, &g_low, &g_high, &schedule, &params).map_err(numerical)?;
    for c in &cmp.checks {
        summary.push_str(&format!(
            "comparison_{}: {}{}\n",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.witness
                .as_ref()
                .map(|w| format!(" ({w})"))
                .unwrap_or_default()
        ));
    }
    passed &= cmp.passed();
    write(&out, "audit.txt", &summary)?;
    write_manifest(&out, "audit", &cfg, &[("passed", passed.to_string())])?;
    if passed {
        print!("{summary}");
        Ok(())
    } else {
        Err(Failure::Audit(summary))
    }
}

type Kv = BTreeMap<String, f64>;

fn parse_kv(params: &[String]) -> Result<Kv> {
    let mut kv = Kv::new();
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| anyhow!("parameter `{p}` is not KEY=VALUE"))?;
        let value: f64 = v
            .trim()
            .parse()
            .with_context(|| format!("parameter `{k}` is not a number"))?;
        kv.insert(k.trim().to_string(), value);
    }
    Ok(kv)
}

fn get(kv: &Kv, key: &str) -> Result<f64, Failure> {
    kv.get(key)
        .copied()
        .ok_or_else(|| usage(anyhow!("missing parameter {key}=")))
}

fn get_dim(kv: &Kv) -> Result<usize, Failure> {
    let n = get(kv, "n")?;
    if n.fract() != 0.0 || n < 2.0 {
        return Err(usage(anyhow!("n must be an integer >= 2")));
    }
    Ok(n as usize)
}

fn reference_rho(kv: &Kv, digits: usize) -> Result<String, Failure> {
    let n = get_dim(kv)?;
    let (a, l, t) = (get(kv, "A")?, get(kv, "L")?, get(kv, "t")?);
    SelfSimilarSolution::new(a, l, n).map_err(usage)?;
    if t < 0.0 {
        return Err(usage(anyhow!("t must be non-negative")));
    }
    Ok(format!("{:.*}\n", digits, rho(a, l, n, t)))
}

fn reference_profile(kv: &Kv) -> Result<String, Failure> {
    let n = get_dim(kv)?;
    let (a, l, t) = (get(kv, "A")?, get(kv, "L")?, get(kv, "t")?);
    let s = SelfSimilarSolution::new(a, l, n).map_err(usage)?;
    let r_max = kv.get("r_max").copied().unwrap_or(1.5 * s.rho(t));
    let points = kv.get("points").copied().unwrap_or(101.0).max(2.0) as usize;
    let mut text = String::from("r,V,U\n");
    for i in 1..=points {
        let r = r_max * i as f64 / points as f64;
        text.push_str(&format!(
            "{},{},{}\n",
            r,
            s.v(r, t).map_err(numerical)?,
            s.u(r, t).map_err(numerical)?
        ));
    }
    Ok(text)
}

fn reference_hele_shaw(kv: &Kv) -> Result<String, Failure> {
    let n = get_dim(kv)?;
    let front = radial_hele_shaw_front(
        get(kv, "a")?,
        get(kv, "b")?,
        get(kv, "A")?,
        get(kv, "L")?,
        n,
        get(kv, "T")?,
        get(kv, "dt")?,
    )
    .map_err(numerical)?;
    Ok(io::radial_front_csv(&front))
}

fn reference_radial_stefan(kv: &Kv) -> Result<String, Failure> {
    let n = get_dim(kv)?;
    let (a, b, amp) = (get(kv, "a")?, get(kv, "b")?, get(kv, "A")?);
    let boundary = amp * a.powi(2 - n as i32);
    let theta0 = move |r: f64| InitialProfile::Linear.eval(r, a, b, boundary);
    let t_end = get(kv, "T")?;
    let out = radial_stefan_solve(&RadialStefanParams {
        dimension: n,
        a,
        b,
        amplitude: amp,
        latent: get(kv, "L")?,
        theta0: &theta0,
        t_end,
        dr: get(kv, "dr")?,
        dt: get(kv, "dt")?,
        snapshots: vec![t_end],
        r_max: kv.get("r_max").copied(),
        omega: None,
        tol: 1e-10,
    })
    .map_err(numerical)?;
    Ok(io::radial_front_csv(&out.front))
}
