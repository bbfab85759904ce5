use log::info;
use qmem::kernel::symmetrize_kernels;
use qmem::storage::{classicality_check, CLASSICALITY_THRESHOLD};
use qmem::{
    build_cycle_kernel, build_half_kernel, optimized_cycle, schmidt_decompose, singular_decompose, CycleParams,
    MemoryCycle, Stage, StorageModel,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{Output, Table};
use crate::CliError;

/// Number of singular values per row of a duration sweep.
pub const SWEEP_MODES: usize = 5;

fn eigenvalue_table(values: &[f64]) -> Table {
    let mut t = Table::new("eigenvalues", vec!["i".into(), "s".into(), "lambda".into()]).integer_columns(&[0]);
    for (i, s) in values.iter().enumerate() {
        t.push(vec![(i + 1) as f64, *s, s * s]);
    }
    t
}

fn columns(n: usize, f: impl Fn(usize) -> Vec<f64>) -> Vec<Vec<f64>> {
    (0..n).map(f).collect()
}

fn build_cycle(cfg: &RunConfig) -> Result<MemoryCycle, CliError> {
    let params = cfg.params()?;
    Ok(MemoryCycle::build(&params, cfg.modes)?)
}

fn print_values(label: &str, values: &[f64]) {
    let shown: Vec<String> = values.iter().map(|v| format!("{v:.4}")).collect();
    println!("{label}: {}", shown.join(" "));
}

pub fn modes(cfg: &RunConfig) -> Result<(), CliError> {
    let params = cfg.params()?;
    let mut out = Output::create(cfg, "modes")?;
    let write = build_half_kernel(&params, Stage::Write)?;
    let m = cfg.modes.min(params.n_t);
    if params.has_equal_durations() {
        let g = build_cycle_kernel(&write, &write)?;
        let modes = schmidt_decompose(&g, m)?;
        let grid = modes.grid().points();
        out.table(&eigenvalue_table(modes.singular_values()))?;
        out.table(&Table::sampled(
            "modes",
            "t",
            "phi",
            &grid,
            &columns(modes.len(), |i| modes.values(i).to_vec()),
        ))?;
        print_values("singular values", modes.singular_values());
        out.finish(cfg, &json!({ "singular_values": modes.singular_values() }))?;
        return Ok(());
    }

    let read = build_half_kernel(&params, Stage::Read)?;
    let svd = singular_decompose(&build_cycle_kernel(&write, &read)?, m)?;
    let sym = symmetrize_kernels(&write, &read)?;
    let approx = schmidt_decompose(&sym.kernel, m)?;
    let mut table = Table::new(
        "eigenvalues",
        vec!["i".into(), "s".into(), "lambda".into(), "s_symmetrized".into()],
    )
    .integer_columns(&[0])
    .note("duration_ratio", sym.k)
    .note("rescaled_asymmetry", sym.asymmetry);
    for (i, s) in svd.left.singular_values().iter().enumerate() {
        table.push(vec![
            (i + 1) as f64,
            *s,
            s * s,
            sym.cycle_singular_value(approx.singular_value(i)),
        ]);
    }
    out.table(&table)?;
    let left = &svd.left;
    let right = &svd.right;
    out.table(&Table::sampled(
        "write_modes",
        "t",
        "phi",
        &left.grid().points(),
        &columns(left.len(), |i| left.values(i).to_vec()),
    ))?;
    out.table(&Table::sampled(
        "read_modes",
        "t",
        "phi_out",
        &right.grid().points(),
        &columns(right.len(), |i| right.values(i).to_vec()),
    ))?;
    print_values("singular values", left.singular_values());
    println!("rescaled kernel asymmetry: {:.4}", sym.asymmetry);
    out.finish(
        cfg,
        &json!({ "singular_values": left.singular_values(), "rescaled_asymmetry": sym.asymmetry }),
    )?;
    Ok(())
}

pub fn response(cfg: &RunConfig) -> Result<(), CliError> {
    let cycle = build_cycle(cfg)?;
    let mut out = Output::create(cfg, "response")?;
    let r = cycle.responses();
    let table = Table::sampled(
        "responses",
        "z",
        "r",
        &r.grid().points(),
        &columns(r.len(), |i| r.response(i).into_values()),
    );
    out.table(&table)?;
    out.table(&eigenvalue_table(cycle.modes().singular_values()))?;
    let areas: Vec<f64> = (0..r.len())
        .map(|i| r.grid().inner(r.response(i).values(), r.response(i).values()))
        .collect();
    print_values("response areas", &areas);
    out.finish(cfg, &json!({ "norm_factors": r.norm_factors(), "areas": areas }))?;
    Ok(())
}

pub fn store(cfg: &RunConfig) -> Result<(), CliError> {
    let cycle = build_cycle(cfg)?;
    let mut out = Output::create(cfg, "store")?;
    let plan = cycle.plan(cfg.storage)?;
    let r = cycle.responses();
    let stored = cycle.stored(&plan)?;
    out.table(&Table::sampled(
        "stored",
        "z",
        "psi",
        &stored.grid().points(),
        &columns(stored.len(), |i| stored.unit_values(i).to_vec()),
    ))?;
    if let Some(map) = plan.scaling_map() {
        let blurred: Vec<_> = (0..r.len()).filter_map(|i| plan.blurred(r.unit_values(i))).collect();
        if let Some(first) = blurred.first() {
            let grid = first.grid().points();
            let values = columns(blurred.len(), |i| blurred[i].values().to_vec());
            out.table(&Table::sampled("blurred", "z", "psi", &grid, &values))?;
        }
        let mut t = Table::new("scaling_map", vec!["z".into(), "concentration".into(), "f".into()]);
        for (j, z) in map.map().grid().points().into_iter().enumerate() {
            t.push(vec![z, map.concentration().values()[j], map.map().values()[j]]);
        }
        out.table(&t)?;
    }
    println!("stored {} response functions ({})", stored.len(), cfg.storage.label());
    out.finish(cfg, &json!({ "storage": cfg.storage }))?;
    Ok(())
}

pub fn overlap(cfg: &RunConfig) -> Result<(), CliError> {
    let cycle = build_cycle(cfg)?;
    let mut out = Output::create(cfg, "overlap")?;
    let q = cycle.overlap(&cycle.plan(cfg.storage)?)?;
    let m = q.dim();
    let mut cols = vec!["i".to_string()];
    cols.extend((1..=m).map(|j| format!("q_{j}")));
    let mut t = Table::new("overlap", cols)
        .integer_columns(&[0])
        .note("label", q.label())
        .note("max_asymmetry", q.max_asymmetry());
    for (i, row) in q.rows().iter().enumerate() {
        let mut r = vec![(i + 1) as f64];
        r.extend(row);
        t.push(r);
    }
    out.table(&t)?;
    for row in q.rows().iter().take(m.min(4)) {
        print_values("Q", &row[..m.min(4)]);
    }
    out.finish(cfg, &json!({ "label": q.label(), "max_asymmetry": q.max_asymmetry() }))?;
    Ok(())
}

pub fn cycle(cfg: &RunConfig) -> Result<(), CliError> {
    let cycle = build_cycle(cfg)?;
    let mut out = Output::create(cfg, "cycle")?;
    let report = cycle.report(cfg.storage)?;
    let grid = cycle.modes().grid().points();
    out.table(&Table::sampled(
        "output_profiles",
        "t",
        "out",
        &grid,
        &report.output_profiles,
    ))?;
    let optimized = report.optimized_efficiencies.as_ref();
    let mut cols = vec!["i".to_string(), "lambda".into(), "eta".into(), "eta_direct".into()];
    if optimized.is_some() {
        cols.push("eta_optimized".into());
    }
    let mut t = Table::new("efficiencies", cols).integer_columns(&[0]);
    for i in 0..report.efficiencies.len() {
        let mut row = vec![
            (i + 1) as f64,
            report.eigenvalues[i],
            report.efficiencies[i],
            report.efficiencies_direct[i],
        ];
        row.extend(optimized.map(|e| e.get(i).copied().unwrap_or(0.0)));
        t.push(row);
    }
    out.table(&t)?;
    out.document("report", &report)?;
    print_values("efficiencies", &report.efficiencies);
    out.finish(cfg, &json!({ "efficiencies": report.efficiencies }))?;
    Ok(())
}

pub fn optimize(cfg: &RunConfig) -> Result<(), CliError> {
    if !cfg.storage.is_linear() {
        return Err(qmem::Error::Parameter(format!(
            "{} storage with excitation-preserving levels is not linear; use --mix-norm amplitude to optimize",
            cfg.storage.label()
        ))
        .into());
    }
    let cycle = build_cycle(cfg)?;
    let mut out = Output::create(cfg, "optimize")?;
    let q = cycle.overlap(&cycle.plan(cfg.storage)?)?;
    let opt = optimized_cycle(&q, cycle.modes(), q.dim())?;
    let etas = opt.efficiencies();
    let mut t = Table::new(
        "optimized_eigenvalues",
        vec!["i".into(), "s".into(), "eta".into(), "eta_original".into()],
    )
    .integer_columns(&[0])
    .note("kernel_asymmetry", opt.asymmetry);
    for (i, s) in opt.modes.singular_values().iter().enumerate() {
        let original = qmem::efficiency_overlap(i, &q, cycle.modes())?;
        t.push(vec![(i + 1) as f64, *s, etas[i], original]);
    }
    out.table(&t)?;
    let modes = &opt.modes;
    out.table(&Table::sampled(
        "optimized_modes",
        "t",
        "phi",
        &modes.grid().points(),
        &columns(modes.len(), |i| modes.values(i).to_vec()),
    ))?;
    print_values("optimized efficiencies", &etas);
    out.finish(cfg, &json!({ "efficiencies": etas, "kernel_asymmetry": opt.asymmetry }))?;
    Ok(())
}

pub fn sweep(cfg: &RunConfig, durations: &[f64]) -> Result<(), CliError> {
    let base = cfg.params()?;
    let mut out = Output::create(cfg, "sweep")?;
    let rows = durations
        .par_iter()
        .map(|&t| {
            let p = CycleParams {
                write_duration: t,
                read_duration: t,
                ..base
            };
            p.validate()?;
            let half = build_half_kernel(&p, Stage::Write)?;
            let modes = schmidt_decompose(&build_cycle_kernel(&half, &half)?, SWEEP_MODES.min(p.n_t))?;
            info!("T = {t}: s_1 = {:.4}", modes.singular_value(0));
            let mut row = vec![t];
            row.extend((0..SWEEP_MODES).map(|i| modes.singular_values().get(i).copied().unwrap_or(0.0)));
            row.push(if p.out_of_model() { 1.0 } else { 0.0 });
            Ok(row)
        })
        .collect::<Result<Vec<_>, qmem::Error>>()?;
    let mut cols = vec!["T".to_string()];
    cols.extend((1..=SWEEP_MODES).map(|i| format!("s_{i}")));
    cols.push("out_of_model".into());
    let flag = cols.len() - 1;
    let mut t = Table::new("sweep", cols).integer_columns(&[flag]);
    for row in rows {
        println!(
            "T = {:>6.3}  s = {}",
            row[0],
            row[1..=SWEEP_MODES]
                .iter()
                .map(|s| format!("{s:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        );
        t.push(row);
    }
    out.table(&t)?;
    out.finish(cfg, &json!({ "durations": durations }))?;
    Ok(())
}

pub fn check(cfg: &RunConfig, temperature: f64, concentration: f64, mass: f64) -> Result<(), CliError> {
    let c = classicality_check(temperature, concentration, mass)?;
    let mut out = Output::create(cfg, "check")?;
    let mut t = Table::new(
        "classicality",
        vec![
            "temperature".into(),
            "concentration".into(),
            "mass".into(),
            "ratio".into(),
            "passed".into(),
        ],
    )
    .note("threshold", CLASSICALITY_THRESHOLD);
    t.push(vec![
        temperature,
        concentration,
        mass,
        c.ratio,
        if c.passed { 1.0 } else { 0.0 },
    ]);
    out.table(&t)?;
    println!(
        "{}: temperature over degeneracy temperature = {:.3e} (threshold {CLASSICALITY_THRESHOLD})",
        if c.passed { "PASS" } else { "FAIL" },
        c.ratio
    );
    out.finish(cfg, &c)?;
    if !c.passed {
        return Err(qmem::Error::Parameter(format!(
            "gas is too close to degeneracy (ratio {:.3e} < {CLASSICALITY_THRESHOLD})",
            c.ratio
        ))
        .into());
    }
    Ok(())
}

/// Storage models exercised by the self-test besides the configured one.
pub fn selftest_models(cfg: &RunConfig) -> Vec<StorageModel> {
    let mut models = vec![
        StorageModel::None,
        StorageModel::free_expansion(2.0),
        StorageModel::free_expansion(10.0),
        StorageModel::full_mixing(),
    ];
    if !models.contains(&cfg.storage) {
        models.push(cfg.storage);
    }
    models
}
