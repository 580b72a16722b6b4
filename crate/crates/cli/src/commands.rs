use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use bindcap::simulate::decorrelation_stride;
use bindcap::{
    capacity_feedback, capacity_iid, estimate_mi, mi_rate_continuous, mi_rate_continuous_limit, mi_rate_discrete,
    occupancy_chi_squared, simulate_trajectory, stationary, verify_n_scaling, BirthDeathChannel, CapacityResult,
    ChannelKind, ChannelSpec, FeedbackPolicy, OptimizerConfig, SimulationConfig,
};
use rayon::prelude::*;

use crate::args::{
    CapacityArgs, ChannelArgs, Format, Mode, OutputArgs, ReplayArgs, ScalingArgs, SimulateArgs, SweepArgs,
};
use crate::report::{fmt_num, Field, Report, Table};
use crate::{CliError, Outcome, EXIT_NUMERICAL, EXIT_OK};

/// Significance level of the occupancy goodness-of-fit test.
pub const CHI_SQUARED_LEVEL: f64 = 1e-3;

fn resolve_spec(args: &ChannelArgs) -> Result<ChannelSpec, CliError> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            ChannelSpec::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => ChannelSpec::default(),
    };
    if let Some(kind) = args.kind {
        spec.kind = Some(kind.into());
    }
    if args.n.is_some() {
        spec.n = args.n;
    }
    if args.alpha_l.is_some() {
        spec.alpha_l = args.alpha_l;
    }
    if args.alpha_h.is_some() {
        spec.alpha_h = args.alpha_h;
    }
    if args.beta.is_some() {
        spec.beta = args.beta;
    }
    Ok(spec)
}

fn build_channel(spec: &ChannelSpec) -> Result<(BirthDeathChannel, OptimizerConfig), CliError> {
    let ch = spec.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = spec.optimizer();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((ch, cfg))
}

fn base_report(command: &str, recorded: &[String], ch: &BirthDeathChannel) -> Report {
    let mut r = Report::default();
    r.meta("command", command);
    r.meta("version", env!("CARGO_PKG_VERSION"));
    r.meta(
        "args",
        serde_json::to_string(recorded).expect("argument lists serialize"),
    );
    r.meta("kind", ch.kind().as_str());
    r.meta("n", ch.n().to_string());
    match ch.kinetics() {
        Some(kin) => {
            r.meta("alpha_l", fmt_num(kin.alpha_low()));
            r.meta("alpha_h", fmt_num(kin.alpha_high()));
            r.meta("beta", fmt_num(kin.beta()));
        }
        None => {
            let join = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(";");
            r.meta("up_h", join(ch.up_high()));
            r.meta("up_l", join(ch.up_low()));
            r.meta("down", join(ch.down()));
        }
    }
    r
}

struct Units {
    scale: f64,
    per_sec: &'static str,
    suffix: &'static str,
}

fn units(out: &OutputArgs) -> Units {
    if out.bits {
        Units {
            scale: std::f64::consts::LOG2_E,
            per_sec: "bits/s",
            suffix: "bits_per_sec",
        }
    } else {
        Units {
            scale: 1.0,
            per_sec: "nats/s",
            suffix: "nats_per_sec",
        }
    }
}

fn outcome(report: Report, out: &OutputArgs, default: Format, exit: u8) -> Outcome {
    Outcome {
        report,
        format: out.format.unwrap_or(default),
        output: out.output.clone(),
        exit,
        warnings: Vec::new(),
    }
}

fn optimize(ch: &BirthDeathChannel, cfg: &OptimizerConfig, mode: Mode) -> Result<CapacityResult, CliError> {
    Ok(match mode {
        Mode::Iid => capacity_iid(ch, cfg)?,
        Mode::Feedback => capacity_feedback(ch, cfg)?,
    })
}

pub(crate) fn capacity(a: &CapacityArgs, recorded: &[String]) -> Result<Outcome, CliError> {
    let spec = resolve_spec(&a.channel)?;
    let (ch, cfg) = build_channel(&spec)?;
    let res = optimize(&ch, &cfg, a.mode)?;
    let u = units(&a.output);

    let mut r = base_report("capacity", recorded, &ch);
    r.meta("mode", a.mode.as_str());
    r.meta("seed", cfg.seed.to_string());
    r.field("mode", Field::Text(a.mode.as_str().into()));
    r.field(&format!("capacity_{}", u.suffix), Field::Num(res.capacity * u.scale));
    r.field("argmax", Field::Nums(res.argmax.probs().to_vec()));
    if let Some(p) = res.iid_p {
        r.field("p_star", Field::Num(p));
    }
    r.field("iterations", Field::Int(res.iterations as u64));
    r.field("evaluations", Field::Int(res.evaluations as u64));
    r.field("final_step", Field::Num(res.final_step));
    r.field("converged", Field::Bool(res.converged));

    let exit = if res.converged { EXIT_OK } else { EXIT_NUMERICAL };
    let mut o = outcome(r, &a.output, Format::Text, exit);
    if !res.converged {
        o.warnings
            .push("optimizer did not converge; reporting the best point found".into());
    }
    Ok(o)
}

fn parse_grid(text: &str, axes: usize) -> Result<Vec<usize>, CliError> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--grid expects N or N,M, got `{text}`")))?;
    let counts = match (parts.len(), axes) {
        (1, _) => vec![parts[0]; axes],
        (l, a) if l == a => parts,
        (l, a) => {
            return Err(CliError::Usage(format!(
                "--grid has {l} counts but the sweep has {a} axes"
            )))
        }
    };
    if counts.contains(&0) {
        return Err(CliError::Usage("--grid counts must be positive".into()));
    }
    Ok(counts)
}

fn axis(count: usize) -> Vec<f64> {
    if count == 1 {
        vec![0.0]
    } else {
        (0..count).map(|i| i as f64 / (count - 1) as f64).collect()
    }
}

pub(crate) fn sweep(a: &SweepArgs, recorded: &[String]) -> Result<Outcome, CliError> {
    let spec = resolve_spec(&a.channel)?;
    let (ch, _) = build_channel(&spec)?;
    let n = ch.n();
    let axes = a.axes.unwrap_or(if n == 2 { 2 } else { 1 }) as usize;
    if axes == 2 && n != 2 {
        return Err(CliError::Usage(format!(
            "a 2-D (p_0, p_1) sweep needs n = 2 (got n = {n}); use --axes 1 for an IID sweep over p"
        )));
    }
    if !(1..=2).contains(&axes) {
        return Err(CliError::Usage("--axes must be 1 or 2".into()));
    }
    let counts = parse_grid(&a.grid, axes)?;
    let u = units(&a.output);

    let points: Vec<Vec<f64>> = if axes == 2 {
        let (xs, ys) = (axis(counts[0]), axis(counts[1]));
        xs.iter().flat_map(|&x| ys.iter().map(move |&y| vec![x, y])).collect()
    } else {
        axis(counts[0]).into_iter().map(|p| vec![p]).collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let values: Vec<f64> = pool.install(|| {
        points
            .par_iter()
            .map(|pt| {
                let policy = if axes == 2 {
                    FeedbackPolicy::new(pt.clone())?
                } else {
                    FeedbackPolicy::iid(n, pt[0])?
                };
                Ok(mi_rate_continuous_limit(&ch, &policy)?.value())
            })
            .collect::<Result<_, bindcap::Error>>()
    })?;

    let mut r = base_report("sweep", recorded, &ch);
    r.meta("axes", axes.to_string());
    r.meta(
        "grid",
        counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
    );
    let (best_i, best) = values.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
    );
    r.field(&format!("max_mi_{}", u.suffix), Field::Num(best * u.scale));
    r.field("argmax", Field::Nums(points[best_i].clone()));

    let mut columns: Vec<String> = if axes == 2 {
        vec!["p_0".into(), "p_1".into()]
    } else {
        vec!["p".into()]
    };
    columns.push(format!("mi_{}", u.suffix));
    let rows = points
        .into_iter()
        .zip(values)
        .map(|(mut pt, v)| {
            pt.push(v * u.scale);
            pt
        })
        .collect();
    r.table = Some(Table { columns, rows });
    Ok(outcome(r, &a.output, Format::Csv, EXIT_OK))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn simulate(a: &SimulateArgs, recorded: &[String]) -> Result<Outcome, CliError> {
    let spec = resolve_spec(&a.channel)?;
    let (ch, cfg) = build_channel(&spec)?;
    let policy = match &a.policy {
        Some(p) => {
            let pol = FeedbackPolicy::new(p.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
            ch.check_policy(&pol).map_err(|e| CliError::Usage(e.to_string()))?;
            pol
        }
        None => optimize(&ch, &cfg, a.mode)?.argmax,
    };
    let sim = SimulationConfig {
        steps: a.steps,
        tau: a.tau,
        seed: a.seed,
        burn_in: a.burn_in,
    };
    if a.steps.saturating_sub(a.burn_in) < bindcap::simulate::MIN_ESTIMATION_STEPS {
        return Err(CliError::Usage(format!(
            "need at least {} steps after burn-in, got {}",
            bindcap::simulate::MIN_ESTIMATION_STEPS,
            a.steps.saturating_sub(a.burn_in)
        )));
    }
    let traj = simulate_trajectory(&ch, &policy, &sim).map_err(|e| CliError::Usage(e.to_string()))?;
    let est = estimate_mi(&traj)?;
    let exact = mi_rate_discrete(&ch, &policy, a.tau)?.nats_per_second();
    let limit = mi_rate_continuous(&ch, &policy)?.value();
    let st = stationary(&ch, &policy)?;
    let z = if est.stderr > 0.0 {
        (est.mi_per_second - exact).abs() / est.stderr
    } else if est.mi_per_second == exact {
        0.0
    } else {
        f64::INFINITY
    };
    let agrees = z <= 3.0;
    let chi = decorrelation_stride(&ch, &policy, a.tau)
        .and_then(|stride| occupancy_chi_squared(&traj, &st, stride))
        .ok();

    if let Some(path) = &a.trajectory_out {
        let w = create(path)?;
        let io = if path.extension().is_some_and(|e| e == "bin") {
            traj.write_binary(w)
        } else {
            traj.write_csv(w)
        };
        io.map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
    }
    if let Some(path) = &a.counts_out {
        est.counts.write_csv(create(path)?).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
    }

    let u = units(&a.output);
    let mut r = base_report("simulate", recorded, &ch);
    r.meta("seed", a.seed.to_string());
    r.meta("tau", fmt_num(a.tau));
    r.meta("steps", a.steps.to_string());
    r.meta("burn_in", a.burn_in.to_string());
    r.meta("rng", "chacha8");
    r.field("policy", Field::Nums(policy.probs().to_vec()));
    r.field("unit", Field::Text(u.per_sec.into()));
    r.field("estimate", Field::Num(est.mi_per_second * u.scale));
    r.field("stderr", Field::Num(est.stderr * u.scale));
    r.field("exact_discrete", Field::Num(exact * u.scale));
    r.field("continuous_limit", Field::Num(limit * u.scale));
    r.field("z_score", Field::Num(z));
    r.field("within_3_stderr", Field::Bool(agrees));
    match &chi {
        Some(t) => {
            r.field("occupancy_chi2", Field::Num(t.statistic));
            r.field("occupancy_dof", Field::Int(t.dof as u64));
            r.field("occupancy_p_value", Field::Num(t.p_value));
            r.field("occupancy_samples", Field::Int(t.samples as u64));
            r.field("occupancy_pass", Field::Bool(t.passes(CHI_SQUARED_LEVEL)));
        }
        None => r.field("occupancy_pass", Field::Text("n/a".into())),
    }

    let exit = if a.check && !agrees { EXIT_NUMERICAL } else { EXIT_OK };
    let mut o = outcome(r, &a.output, Format::Text, exit);
    for (k, x, mass) in est.significant_unvisited(&st, &policy) {
        o.warnings.push(format!(
            "row (state {k}, input {x}) with stationary mass {} was never visited",
            fmt_num(mass)
        ));
    }
    if chi.is_none() {
        o.warnings
            .push("run too short for an occupancy chi-squared test".into());
    }
    Ok(o)
}

pub(crate) fn scaling(a: &ScalingArgs, recorded: &[String]) -> Result<Outcome, CliError> {
    let mut spec = resolve_spec(&a.channel)?;
    if spec.kind() != ChannelKind::Independent {
        return Err(CliError::Usage(format!(
            "scaling applies to independent receptors, not {} channels",
            spec.kind()
        )));
    }
    if a.n_max < 2 {
        return Err(CliError::Usage("--n-max must be at least 2".into()));
    }
    spec.n = Some(1);
    let (ch, cfg) = build_channel(&spec)?;
    let kin = *ch.kinetics().expect("independent channels carry kinetics");
    let report = verify_n_scaling(&kin, a.n_max, &cfg)?;
    let u = units(&a.output);

    let mut r = base_report("scaling", recorded, &ch);
    r.meta("n_max", a.n_max.to_string());
    r.meta("unit", u.per_sec);
    r.field("p_star", Field::Num(report.rows[0].argmax_p));
    r.field(
        &format!("c1_{}", u.suffix),
        Field::Num(report.rows[0].capacity * u.scale),
    );
    r.table = Some(Table {
        columns: vec!["n".into(), "capacity".into(), "ratio_to_n_times_c1".into()],
        rows: report
            .rows
            .iter()
            .map(|row| vec![row.n as f64, row.capacity * u.scale, row.ratio])
            .collect(),
    });
    Ok(outcome(r, &a.output, Format::Csv, EXIT_OK))
}

/// Argument vector recorded in a previous output's manifest.
pub(crate) fn replay_args(a: &ReplayArgs) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(&a.manifest).map_err(|source| CliError::Io {
        path: a.manifest.clone(),
        source,
    })?;
    let line = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# args=").map(str::to_string))
        .or_else(|| json_manifest_args(&text))
        .ok_or_else(|| CliError::Usage(format!("{}: no `args` manifest entry found", a.manifest.display())))?;
    let recorded: Vec<String> = serde_json::from_str(&line)
        .map_err(|e| CliError::Usage(format!("{}: malformed args entry: {e}", a.manifest.display())))?;
    let mut argv = vec!["bindcap".to_string()];
    argv.extend(recorded);
    if let Some(out) = &a.output {
        argv.push("--output".into());
        argv.push(out.display().to_string());
    }
    Ok(argv)
}

fn json_manifest_args(text: &str) -> Option<String> {
    let doc: serde_json::Value = serde_json::from_str(text).ok()?;
    doc["manifest"]["args"].as_str().map(str::to_string)
}
