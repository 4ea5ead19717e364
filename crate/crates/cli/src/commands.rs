use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use hawkes_regen::concentration::{self, ConcentrationInput};
use hawkes_regen::estimators::{self, PairKernelW, PairShape, WindowFunctional};
use hawkes_regen::queue::{self, ServiceCdf, ServiceKind};
use hawkes_regen::regen::{self, extract_cycles, regeneration_times};
use hawkes_regen::simulate::{simulate_path, Origin, PathRecord};
use hawkes_regen::validate::{self, THETA_STAR_TOL};
use hawkes_regen::{stream, TransferFunction};

use crate::config::{read_two_columns, Loaded};
use crate::error::CliError;
use crate::{BoundArgs, EstimateArgs, EstimateMethod, FunctionalKind, LaplaceArgs, MomentsArgs, ServiceArgs, Status};

const N_CHUNKS: usize = 64;

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json(loaded: &Loaded, value: &impl Serialize) -> Result<(), CliError> {
    let path = loaded.config.output.out.as_deref();
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::Output(e.to_string()))
}

/// The path shared by `sim` and `regen`: stream 0 of the master seed.
fn simulate(loaded: &Loaded) -> Result<PathRecord, CliError> {
    let c = &loaded.config;
    let mut rng = stream(c.seed, 0);
    Ok(simulate_path(c.lambda, &loaded.transfer, &c.init_points, c.horizon, &mut rng)?)
}

pub fn sim(loaded: &Loaded) -> Result<Status, CliError> {
    let path = simulate(loaded)?;
    let mut w = csv::Writer::from_writer(open_output(loaded.config.output.out.as_deref())?);
    w.write_record(["time", "cluster_id", "parent_id", "generation", "origin"])?;
    for e in &path.events {
        let origin = match e.origin {
            Origin::Immigrant => "immigrant",
            Origin::Initial => "initial",
        };
        w.write_record([
            format!("{:.16e}", e.time),
            e.cluster_id.to_string(),
            e.parent.map(|p| p.to_string()).unwrap_or_default(),
            e.generation.to_string(),
            origin.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))?;
    Ok(Status::Success)
}

pub fn regen(loaded: &Loaded) -> Result<Status, CliError> {
    let c = &loaded.config;
    let path = simulate(loaded)?;
    let report = regeneration_times(&path, c.window)?;
    let certified = regen::certify(&path, &report);
    write_json(
        loaded,
        &json!({
            "seed": c.seed,
            "lambda": c.lambda,
            "A": c.window,
            "T": c.horizon,
            "n_events": path.events.len(),
            "certified": certified,
            "report": report,
        }),
    )?;
    Ok(Status::Success)
}

/// `--theta` or `--degenerate`, else the empirical law of `reps` simulated cluster lengths.
fn service(loaded: &Loaded, args: &ServiceArgs) -> Result<ServiceCdf, CliError> {
    let c = &loaded.config;
    if let Some(theta) = args.theta {
        return Ok(ServiceCdf::exp_dom(theta, c.window)?);
    }
    if args.degenerate {
        return Ok(ServiceCdf::degenerate(c.window)?);
    }
    let lengths = validate::cluster_samples(&loaded.transfer, c.reps, c.seed, c.exec, N_CHUNKS)?
        .into_iter()
        .map(|(len, _)| len)
        .collect();
    Ok(ServiceCdf::empirical(lengths, c.window)?)
}

fn service_label(svc: &ServiceCdf) -> serde_json::Value {
    match &svc.kind {
        ServiceKind::Degenerate => json!({ "kind": "degenerate" }),
        ServiceKind::ExpDom { theta } => json!({ "kind": "exp_dom", "theta": theta }),
        ServiceKind::Empirical { lengths } => json!({ "kind": "empirical", "n": lengths.samples().len() }),
    }
}

pub fn laplace(loaded: &Loaded, args: &LaplaceArgs) -> Result<Status, CliError> {
    let c = &loaded.config;
    let svc = service(loaded, &args.service)?;
    let grid = args.s.clone().unwrap_or_else(|| c.s_grid.clone());
    let rows = grid
        .iter()
        .map(|&s| queue::laplace_tau(&svc, c.lambda, s).map(|r| (s, r)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = csv::Writer::from_writer(open_output(c.output.out.as_deref())?);
    w.write_record(["s", "value", "abs_error"])?;
    for (s, r) in rows {
        w.write_record([s.to_string(), r.value.to_string(), format!("{:e}", r.abs_error_estimate)])?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))?;
    Ok(Status::Success)
}

pub fn moments(loaded: &Loaded, args: &MomentsArgs) -> Result<Status, CliError> {
    let c = &loaded.config;
    let svc = service(loaded, &args.service)?;
    let exp_moment = match (args.alpha, &svc.kind) {
        (None, _) => None,
        (Some(alpha), ServiceKind::ExpDom { theta }) => Some(queue::exp_moment_tau(c.lambda, *theta, c.window, alpha)?),
        (Some(_), _) => {
            return Err(CliError::Domain {
                name: "QueueError::OutOfDomain".into(),
                message: "exponential moments are available for --theta services only".into(),
            })
        }
    };
    write_json(
        loaded,
        &json!({
            "seed": c.seed,
            "lambda": c.lambda,
            "A": c.window,
            "service": service_label(&svc),
            "mean": queue::mean_tau(c.lambda, svc.mean_length(), c.window)?,
            "second_moment": queue::second_moment_tau(c.lambda, &svc)?,
            "alpha": args.alpha,
            "exp_moment": exp_moment,
            "delay_bound": queue::delay_bound_for(c.lambda, &svc)?,
        }),
    )?;
    Ok(Status::Success)
}

/// Contents of `--mc-moments-file`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct McMoments {
    mean_tau: f64,
    exp_moment: f64,
    alpha_upper: Option<f64>,
}

fn theta_star(h: &TransferFunction) -> Result<f64, CliError> {
    Ok(h.theta_star(THETA_STAR_TOL)?)
}

pub fn bound(loaded: &Loaded, args: &BoundArgs) -> Result<Status, CliError> {
    let c = &loaded.config;
    let range = (args.a, args.b);
    let input = match (args.theta, &args.mc_moments_file) {
        (Some(theta), None) => {
            let ts = theta_star(&loaded.transfer)?;
            if theta > ts * (1.0 + 1e-9) {
                return Err(CliError::Domain {
                    name: "ValidateError::OutOfDomain".into(),
                    message: format!("theta = {theta} exceeds theta* = {ts} of the configured kernel"),
                });
            }
            ConcentrationInput::bound(c.lambda, theta, c.window, args.alpha, range, c.horizon)?
        }
        (None, Some(file)) => {
            let text = std::fs::read_to_string(file).map_err(|e| CliError::io(file, e))?;
            let m: McMoments =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?;
            let upper = match m.alpha_upper {
                Some(u) => u,
                None => theta_star(&loaded.transfer)?,
            };
            ConcentrationInput::exact(c.lambda, c.window, args.alpha, upper, range, c.horizon, m.mean_tau, m.exp_moment)?
        }
        _ => return Err(CliError::Config("bound needs exactly one of --theta and --mc-moments-file".into())),
    };
    let (v, cc) = concentration::bound_terms(&input);
    let mut report = json!({ "mode": input.mode, "v": v, "c": cc, "input": input });
    match (args.eta, args.epsilon) {
        (Some(eta), None) => {
            let eps = concentration::epsilon_eta(&input, eta)?;
            report["eta"] = json!(eta);
            report["epsilon_eta"] = json!(eps);
            report["bound"] = json!(concentration::deviation_bound(&input, eps));
        }
        (None, Some(eps)) => {
            report["epsilon"] = json!(eps);
            report["bound"] = json!(concentration::deviation_bound(&input, eps));
            report["bound_raw"] = json!(concentration::deviation_bound_raw(&input, eps));
        }
        _ => return Err(CliError::Config("bound needs exactly one of --eta and --epsilon".into())),
    }
    write_json(loaded, &report)?;
    Ok(Status::Success)
}

fn pair_kernel(descriptor: &str) -> Result<PairKernelW, CliError> {
    let bad = || CliError::Config(format!("--w `{descriptor}`: expected const:VALUE:SUPPORT or table:FILE"));
    let w = match descriptor.split_once(':') {
        Some(("const", rest)) => {
            let (value, support) = rest.split_once(':').ok_or_else(bad)?;
            let value: f64 = value.parse().map_err(|_| bad())?;
            let support: f64 = support.parse().map_err(|_| bad())?;
            PairKernelW::constant(value, support)
        }
        Some(("table", file)) => {
            let (grid, values) = read_two_columns(Path::new(file))?;
            let support = grid.first().map(|g| -g).ok_or_else(bad)?;
            PairKernelW::new(support, PairShape::Tabulated { grid, values })
        }
        _ => return Err(bad()),
    };
    w.map_err(|e| CliError::Config(format!("--w: {e}")))
}

fn functional(args: &EstimateArgs) -> Result<WindowFunctional, CliError> {
    let missing = |flag: &str| CliError::Config(format!("--kind {:?} needs {flag}", args.kind).to_lowercase());
    let f = match args.kind {
        FunctionalKind::Count => WindowFunctional::Count,
        FunctionalKind::Constant => WindowFunctional::Constant { value: args.value.ok_or_else(|| missing("--value"))? },
        FunctionalKind::Indicator => WindowFunctional::CountIndicator { k: args.k.ok_or_else(|| missing("--k"))? },
        FunctionalKind::Pair => WindowFunctional::PairKernel { w: pair_kernel(args.w.as_deref().ok_or_else(|| missing("--w"))?)? },
    };
    match args.clamp.as_deref() {
        None => Ok(f),
        Some(&[a, b]) => WindowFunctional::clamped(f, a, b).map_err(|e| CliError::Config(format!("--clamp: {e}"))),
        Some(_) => Err(CliError::Config("--clamp takes two values a,b".into())),
    }
}

pub fn estimate(loaded: &Loaded, args: &EstimateArgs) -> Result<Status, CliError> {
    let c = &loaded.config;
    let f = functional(args)?;
    f.check(c.window).map_err(|e| CliError::Config(e.to_string()))?;
    let (estimate, std_error, n_cycles, method) = match args.method {
        EstimateMethod::Cycles => {
            let cycles = validate::simulate_cycle_records(c.lambda, &loaded.transfer, c.window, c.reps, c.seed, c.exec, N_CHUNKS)?;
            let pi = estimators::estimate_pi_cycles(&cycles, &f, c.window)?;
            (pi.estimate, Some(pi.std_error), pi.n_cycles, "cycles")
        }
        EstimateMethod::Path => {
            let path = simulate(loaded)?;
            let avg = estimators::sliding_average(&path, &f, c.window, c.horizon)?;
            let report = regeneration_times(&path, c.window)?;
            let cycles = extract_cycles(&path, &report)?.cycles;
            // σ²(f)/T from the cycles of the same path, when there are enough of them
            let se = validate::clt_sigma2(&cycles, &f, c.window, avg).ok().map(|s| (s.value / c.horizon).sqrt());
            (avg, se, cycles.len(), "path")
        }
    };
    write_json(
        loaded,
        &json!({
            "seed": c.seed,
            "A": c.window,
            "T": c.horizon,
            "functional": f,
            "estimate": estimate,
            "std_error": std_error,
            "n_cycles": n_cycles,
            "method": method,
        }),
    )?;
    Ok(Status::Success)
}

pub fn validate(loaded: &Loaded) -> Result<Status, CliError> {
    let c = &loaded.config;
    let vc = c.validate_config(&loaded.transfer);
    vc.check().map_err(|e| CliError::Config(e.to_string()))?;
    let report = validate::full_report(&vc)?;
    write_json(loaded, &report)?;
    if let Some(p) = &c.output.cycles_csv {
        let lengths = validate::cycle_lengths(c.lambda, &loaded.transfer, c.window, c.reps, c.seed, c.exec, N_CHUNKS)?;
        let mut w = csv::Writer::from_writer(open_output(Some(p))?);
        w.write_record(["cycle_length"])?;
        for l in lengths {
            w.write_record([format!("{l:.16e}")])?;
        }
        w.flush().map_err(|e| CliError::Output(e.to_string()))?;
    }
    Ok(if report.passed { Status::Success } else { Status::ValidationFailed })
}
