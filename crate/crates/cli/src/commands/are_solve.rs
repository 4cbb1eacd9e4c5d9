use std::path::Path;

use riccati_geo::riccati::{solve_are_with, AreOptions};

use crate::config::ScenarioConfig;
use crate::error::CliResult;
use crate::generators::generate_scenario;
use crate::output::{fmt_value, write_csv, write_matrix, Summary};
use crate::svg;

pub fn run(config: &ScenarioConfig, out: &Path) -> CliResult<Summary> {
    let sys = generate_scenario(&config.system, config.seed)?;
    let mut opts = AreOptions { tol: config.are.tol, ..AreOptions::default() };
    if let Some(steps) = config.are.max_steps {
        opts.max_steps = steps;
    }
    let solution = solve_are_with(&sys, &opts)?;
    write_matrix(&out.join("are_solution.csv"), solution.q.as_matrix())?;
    let rows: Vec<Vec<String>> = solution
        .residual_history
        .iter()
        .enumerate()
        .map(|(k, r)| vec![k.to_string(), fmt_value(Some(*r))])
        .collect();
    write_csv(&out.join("are_residual.csv"), &["step", "residual"], &rows)?;
    if config.outputs.svg {
        let steps: Vec<f64> = (0..solution.residual_history.len()).map(|k| k as f64).collect();
        svg::write(
            &out.join("are_residual.svg"),
            "ARE residual",
            &[svg::Line { label: "residual", x: &steps, y: &solution.residual_history }],
            true,
        )?;
    }

    let mut summary = Summary::default();
    summary.value("n", sys.n());
    summary.number("residual", solution.residual);
    summary.value("steps", solution.steps);
    summary.number("flow_time", solution.t);
    summary.number("trace", solution.q.trace());
    summary.number("min_eigenvalue", solution.q.min_eigenvalue());
    summary.check("are-residual", solution.residual <= config.are.tol);
    Ok(summary)
}
