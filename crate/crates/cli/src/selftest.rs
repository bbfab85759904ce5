//! Invariant suite run against the configured resolution.

use qmem::numerics::SampledFunction;
use qmem::storage::{blur_function, blurred_concentration, scaling_map, StoragePlan};
use qmem::{efficiency_overlap, optimized_cycle, output_profile, MemoryCycle, StorageModel};
use serde::Serialize;
use serde_json::json;

use crate::commands::selftest_models;
use crate::config::RunConfig;
use crate::output::Output;
use crate::CliError;

/// `value <= limit` is a pass.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Default)]
struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        let name = name.into();
        let passed = value <= limit;
        println!(
            "{} {name}: {value:.3e} (limit {limit:e})",
            if passed { "PASS" } else { "FAIL" }
        );
        self.checks.push(Check {
            name,
            value,
            limit,
            passed,
        });
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let params = cfg.params()?;
    let cycle = MemoryCycle::build(&params, cfg.modes)?;
    let mut out = Output::create(cfg, "selftest")?;
    let mut suite = Suite::default();
    let modes = cycle.modes();
    let r = cycle.responses();
    let space = params.space_grid();

    suite.at_most("mode orthonormality", modes.orthonormality_error(), 1e-6);
    suite.at_most("response orthonormality", r.orthonormality_error(), 1e-5);
    let area = (0..r.len())
        .map(|i| (r.grid().inner(r.response(i).values(), r.response(i).values()) - modes.singular_value(i)).abs())
        .fold(0.0, f64::max);
    suite.at_most("response area equals singular value", area, 1e-5);

    let still = cycle.overlap(&cycle.plan(StorageModel::None)?)?;
    let mut dev = 0.0_f64;
    let mut eta_dev = 0.0_f64;
    let mut profile_dev = 0.0_f64;
    for i in 0..still.dim() {
        for j in 0..still.dim() {
            dev = dev.max((still.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs());
        }
        eta_dev = eta_dev.max((efficiency_overlap(i, &still, modes)? - modes.eigenvalue(i)).abs());
        let scaled: Vec<f64> = modes.values(i).iter().map(|v| v * modes.singular_value(i)).collect();
        profile_dev = profile_dev.max(max_abs_diff(output_profile(i, &still, modes)?.values(), &scaled));
    }
    suite.at_most("motionless overlap is the identity", dev, 1e-5);
    suite.at_most("motionless efficiency equals eigenvalue", eta_dev, 1e-5);
    suite.at_most("motionless output is the scaled mode", profile_dev, 1e-5);
    let opt = optimized_cycle(&still, modes, still.dim())?;
    let recovered = max_abs_diff(opt.modes.singular_values(), modes.singular_values());
    suite.at_most("motionless optimization recovers the modes", recovered, 1e-4);

    for model in selftest_models(cfg) {
        let label = model.label();
        let report = cycle.report(model)?;
        let q = &report.overlap;
        let bessel = (0..q.dim()).map(|i| q.row_norm_sq(i)).fold(0.0, f64::max);
        suite.at_most(format!("{label}: overlap row norms"), bessel, 1.0 + 1e-4);
        let agree = max_abs_diff(&report.efficiencies, &report.efficiencies_direct);
        suite.at_most(format!("{label}: overlap and direct efficiencies agree"), agree, 0.01);
        let energy = report
            .output_profiles
            .iter()
            .zip(&report.efficiencies)
            .map(|(p, eta)| (modes.grid().inner(p, p) - eta).abs())
            .fold(0.0, f64::max);
        suite.at_most(format!("{label}: output energy equals efficiency"), energy, 1e-3);
        if let Some(best) = report.optimized_efficiencies.as_ref().and_then(|e| e.first()) {
            let excess = report
                .efficiencies_direct
                .iter()
                .map(|e| e - best)
                .fold(f64::NEG_INFINITY, f64::max);
            suite.at_most(format!("{label}: optimized first mode dominates"), excess, 0.01);
        }
        if matches!(model, StorageModel::FreeExpansion { .. }) && q.dim() >= 2 {
            suite.at_most(
                format!("{label}: Q_12 against Q_21"),
                (q.get(0, 1) - q.get(1, 0)).abs(),
                0.02,
            );
        }
    }

    let box_map = scaling_map(&blurred_concentration(params.length, 0.0, params.n_z)?, params.length)?;
    let identity = max_abs_diff(box_map.map().values(), &space.points());
    suite.at_most("scaling map of an unexpanded column is the identity", identity, 1e-9);

    let plan = StoragePlan::new(StorageModel::free_expansion(2.0), space)?;
    let (a, b) = (r.unit_values(0), r.unit_values(1.min(r.len() - 1)));
    let combo: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.7 * x - 1.3 * y).collect();
    let (sa, sb) = (plan.apply(a), plan.apply(b));
    let expect: Vec<f64> = sa.iter().zip(&sb).map(|(x, y)| 0.7 * x - 1.3 * y).collect();
    suite.at_most("storage is linear", max_abs_diff(&plan.apply(&combo), &expect), 1e-10);

    let dl = 1e-3 * params.length;
    let psi = SampledFunction::new(space, a.to_vec())?;
    let blurred = blur_function(&psi, dl)?;
    let reach = qmem::storage::EXTENSION * dl;
    let near = space
        .points()
        .into_iter()
        .enumerate()
        .filter(|(_, z)| *z >= reach && *z <= params.length - reach)
        .map(|(j, z)| (blurred.eval_or_zero(z) - a[j]).abs())
        .fold(0.0, f64::max);
    suite.at_most("short expansion is nearly the identity", near, 1e-4);

    let failed: Vec<&str> = suite
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    let failed_count = failed.len();
    let summary = json!({ "checks": suite.checks.len(), "failed": failed });
    let failed_names = failed.join("; ");
    out.document("selftest", &suite.checks)?;
    out.finish(cfg, &summary)?;
    println!(
        "{} of {} checks passed",
        suite.checks.len() - failed_count,
        suite.checks.len()
    );
    if failed_count > 0 {
        return Err(CliError::Selftest(failed_names));
    }
    Ok(())
}
