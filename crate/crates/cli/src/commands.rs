use std::fs::File;
use std::path::Path;

use ftpath::bounds::{aux_norm_majorant, kappa_sum_partials, theorem31_check};
use ftpath::evolution::{evolve_many, EvolutionOptions};
use ftpath::lattice::covariance;
use ftpath::measure::{aux_norm, mu_total_mass, EstimateRow};
use ftpath::pairing::pair;
use ftpath::scattering::s_matrix;
use ftpath::verify::run_suite;
use ftpath::{
    Boundary, CouplingSchedule, CovarianceKernel, Estimate, MeasureConfig, PotentialModel,
    ScatterConfig, TabulatedPotential, TimeGrid, WaveFunction,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    CheckArgs, EvolveArgs, KernelArgs, MeasureArgs, PairArgs, PotentialArgs, PotentialKind,
    RegularizationArgs, ScatterArgs, ScheduleArgs,
};
use crate::output::{Outcome, ResolvedGlobals, Table};
use crate::CliError;

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(e.to_string()))
}

fn s<T: ToString>(v: T) -> String {
    v.to_string()
}

fn measure_config(
    g: &ResolvedGlobals,
    n: usize,
    reg: &RegularizationArgs,
) -> Result<MeasureConfig, CliError> {
    let mut cfg = MeasureConfig::new(n, reg.c, reg.delta, reg.gamma)
        .with_seed(g.seed)
        .with_samples(g.samples);
    cfg.batches = reg.batches;
    if let Some(b) = &reg.betas {
        cfg = cfg.with_betas(b.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn potential(args: &PotentialArgs) -> Result<PotentialModel, CliError> {
    let pot = match args.potential {
        PotentialKind::Zero => PotentialModel::Zero,
        PotentialKind::Cosine => PotentialModel::Cosine {
            amplitude: args.amplitude,
            frequency: args.frequency,
        },
        PotentialKind::GaussianBump => PotentialModel::GaussianBump {
            amplitude: args.amplitude,
            width: args.width,
        },
        PotentialKind::SoftQuartic => PotentialModel::SoftQuartic {
            amplitude: args.amplitude,
            scale: args.scale,
        },
        PotentialKind::Tabulated => {
            let path = args
                .table
                .as_ref()
                .ok_or_else(|| CliError::Config("--potential tabulated needs --table".into()))?;
            PotentialModel::Tabulated(TabulatedPotential::from_csv_path(path)?)
        }
    };
    pot.validate()?;
    Ok(pot)
}

fn schedule(args: &ScheduleArgs) -> CouplingSchedule {
    match &args.lambdas {
        Some(values) => CouplingSchedule::Custom {
            values: values.clone(),
        },
        None => CouplingSchedule::Exponential { eps: args.eps },
    }
}

const ESTIMATE_HEADER: [&str; 9] = [
    "quantity",
    "n",
    "delta",
    "gamma",
    "estimate_re",
    "estimate_im",
    "stderr",
    "samples",
    "seed",
];

fn estimate_cells(r: &EstimateRow) -> Vec<String> {
    vec![
        r.quantity.clone(),
        s(r.n),
        s(r.delta),
        s(r.gamma),
        s(r.estimate_re),
        s(r.estimate_im),
        s(r.stderr),
        s(r.samples),
        s(r.seed),
    ]
}

pub fn kernel(_g: &ResolvedGlobals, args: &KernelArgs) -> Result<(Value, Outcome), CliError> {
    let grid = match &args.grid {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            TimeGrid::from_json(&text)?
        }
        None => TimeGrid::unit(args.n, Boundary::Mixed { v_t: 0.0 })?,
    };
    let k = covariance(&grid);
    let n = k.dim();
    let matrix: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| k.get(i, j)).collect())
        .collect();
    let mut table = Table::new(&["i", "j", "value"]);
    for (i, row) in matrix.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            table.push([s(i + 1), s(j + 1), s(v)]);
        }
    }
    let results = json!({ "dim": n, "kind": k.kind(), "matrix": matrix });
    Ok((
        json!({ "grid": to_value(&grid)? }),
        Outcome {
            results,
            table,
            failed: false,
        },
    ))
}

pub fn mass(g: &ResolvedGlobals, args: &MeasureArgs) -> Result<(Value, Outcome), CliError> {
    let cfg = measure_config(g, args.n, &args.reg)?;
    let kernel = CovarianceKernel::min_kernel(args.n);
    let majorant = aux_norm_majorant(&cfg, &kernel)?;
    let exact = |v: f64| Estimate::exact(v.into(), cfg.samples);
    let rows = vec![
        EstimateRow::new("mu_total_mass", &cfg, &mu_total_mass(&cfg, &kernel)?),
        EstimateRow::new("aux_norm", &cfg, &aux_norm(&cfg, &kernel)?),
        EstimateRow::new("aux_norm_majorant_product", &cfg, &exact(majorant.product)),
        EstimateRow::new(
            "aux_norm_majorant_exponential",
            &cfg,
            &exact(majorant.exponential),
        ),
    ];
    let mut table = Table::new(&ESTIMATE_HEADER);
    for r in &rows {
        table.push(estimate_cells(r));
    }
    Ok((
        json!({ "measure": to_value(&cfg)? }),
        Outcome {
            results: json!({ "rows": to_value(&rows)? }),
            table,
            failed: false,
        },
    ))
}

fn dyadic(n_max: usize) -> Vec<usize> {
    let mut ns: Vec<usize> = std::iter::successors(Some(1usize), |n| n.checked_mul(2))
        .take_while(|&n| n < n_max)
        .collect();
    ns.push(n_max);
    ns
}

pub fn check(g: &ResolvedGlobals, args: &CheckArgs) -> Result<(Value, Outcome), CliError> {
    if args.n_max == 0 {
        return Err(CliError::Config("--n-max must be positive".into()));
    }
    let cfg = MeasureConfig::new(1, args.c, args.delta, args.gamma).with_seed(g.seed);
    cfg.validate()?;
    let report = theorem31_check(&cfg);
    let partials = kappa_sum_partials(&cfg, &dyadic(args.n_max));
    let verdict = if report.passed { "pass" } else { "fail" };
    let mut table = Table::new(&["kind", "name", "value", "detail"]);
    for c in &report.clauses {
        table.push([s("clause"), c.name.clone(), s(c.passed), c.detail.clone()]);
    }
    for (n, sum) in &partials {
        table.push([s("kappa_sum_partial"), s(n), s(sum), String::new()]);
    }
    table.push([s("verdict"), s("existence"), s(verdict), String::new()]);
    let partial_objs: Vec<Value> = partials
        .iter()
        .map(|(n, v)| json!({ "n": n, "sum": v }))
        .collect();
    let results = json!({
        "delta": report.delta,
        "gamma": report.gamma,
        "clauses": to_value(&report.clauses)?,
        "kappa_sum_partial": partial_objs,
        "verdict": verdict,
    });
    Ok((
        to_value(args)?,
        Outcome {
            results,
            table,
            failed: false,
        },
    ))
}

pub fn pair_cmd(g: &ResolvedGlobals, args: &PairArgs) -> Result<(Value, Outcome), CliError> {
    let cfg = measure_config(g, args.measure.n, &args.measure.reg)?;
    let pot = potential(&args.potential)?;
    let sched = schedule(&args.schedule);
    let kernel = CovarianceKernel::min_kernel(cfg.n);
    let r = pair(&cfg, &kernel, &sched, &pot)?;
    let row = EstimateRow::new("pair", &cfg, &r.estimate);
    let mut header = ESTIMATE_HEADER.to_vec();
    header.push("warning");
    let mut table = Table::new(&header);
    let mut cells = estimate_cells(&row);
    cells.push(r.warning.clone().unwrap_or_default());
    table.push(cells);
    let results = json!({
        "estimate": to_value(&r.estimate.mean)?,
        "stderr_re": r.estimate.stderr_re,
        "stderr_im": r.estimate.stderr_im,
        "stderr": r.estimate.stderr(),
        "samples": r.estimate.samples,
        "warning": r.warning,
        "theorem31": to_value(&r.theorem31)?,
    });
    Ok((
        json!({ "measure": to_value(&cfg)?, "potential": to_value(&pot)?, "schedule": to_value(&sched)? }),
        Outcome {
            results,
            table,
            failed: false,
        },
    ))
}

fn write_snapshot(dir: &Path, name: &str, psi: &WaveFunction) -> Result<(), CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    psi.to_csv_writer(std::io::BufWriter::new(file))?;
    Ok(())
}

pub fn evolve(_g: &ResolvedGlobals, args: &EvolveArgs) -> Result<(Value, Outcome), CliError> {
    let pot = potential(&args.potential)?;
    let sched = schedule(&args.schedule);
    let file = File::open(&args.input)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.input.display())))?;
    let psi = WaveFunction::from_csv_reader(std::io::BufReader::new(file))?;
    let opts = if args.periodic {
        EvolutionOptions::periodic()
    } else {
        EvolutionOptions {
            leak_threshold: args.leak_threshold,
            ..EvolutionOptions::default()
        }
    };
    let traj = evolve_many(&psi, &pot, &sched, args.steps, &opts)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out_dir.display())))?;
    let mut files = Vec::with_capacity(traj.states.len());
    for (step, state) in traj.states.iter().enumerate() {
        let name = format!("step_{step:04}.csv");
        write_snapshot(&args.out_dir, &name, state)?;
        files.push(name);
    }
    let mut table = Table::new(&[
        "step",
        "site",
        "lambda",
        "norm",
        "boundary_ratio",
        "leak_warning",
        "file",
    ]);
    for (d, f) in traj.diagnostics.iter().zip(files.iter().skip(1)) {
        table.push([
            s(d.step),
            s(d.site),
            s(d.lambda),
            s(d.norm),
            s(d.boundary_ratio),
            s(d.leak_warning),
            f.clone(),
        ]);
    }
    let results = json!({
        "grid": to_value(&psi.grid)?,
        "initial_norm": psi.norm(),
        "files": files,
        "diagnostics": to_value(&traj.diagnostics)?,
    });
    Ok((
        json!({
            "input": args.input,
            "out_dir": args.out_dir,
            "steps": args.steps,
            "options": to_value(&opts)?,
            "potential": to_value(&pot)?,
            "schedule": to_value(&sched)?,
        }),
        Outcome {
            results,
            table,
            failed: false,
        },
    ))
}

pub fn scatter(g: &ResolvedGlobals, args: &ScatterArgs) -> Result<(Value, Outcome), CliError> {
    let mc = measure_config(g, 2 * args.n_half.max(1), &args.reg)?;
    let cfg = ScatterConfig::new(args.n_half, args.k_in, args.k_out, args.x0, mc)
        .with_eps(args.eps_list.clone());
    cfg.validate()?;
    let pot = potential(&args.potential)?;
    let r = s_matrix(&cfg, &pot)?;
    let mut table = Table::new(&["kind", "eps", "estimate_re", "estimate_im", "stderr"]);
    for ((eps, z), se) in r.eps.iter().zip(&r.estimates).zip(&r.stderr) {
        table.push([s("estimate"), s(eps), s(z.re), s(z.im), s(se)]);
    }
    table.push([
        s("extrapolated"),
        s(0.0),
        s(r.extrapolated.re),
        s(r.extrapolated.im),
        s(r.extrapolated_stderr),
    ]);
    Ok((
        json!({ "scatter": to_value(&cfg)?, "potential": to_value(&pot)? }),
        Outcome {
            results: to_value(&r)?,
            table,
            failed: false,
        },
    ))
}

pub fn verify(g: &ResolvedGlobals) -> Result<(Value, Outcome), CliError> {
    let rows = run_suite(g.seed)?;
    let passed = rows.iter().all(|r| r.pass);
    let mut table = Table::new(&["name", "value", "limit", "status"]);
    for r in &rows {
        table.push([
            r.name.clone(),
            s(r.value),
            s(r.limit),
            s(if r.pass { "pass" } else { "fail" }),
        ]);
    }
    let out: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "name": r.name, "value": r.value, "limit": r.limit, "status": if r.pass { "pass" } else { "fail" } }))
        .collect();
    Ok((
        json!({}),
        Outcome {
            results: json!({ "rows": out, "passed": passed }),
            table,
            failed: !passed,
        },
    ))
}
