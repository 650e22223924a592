//! Rebuilds the headline simulation summaries at a chosen replicate count.
//!
//! Usage: cargo run --release --example simulation_tables [replicates] [survival]

use curecal::{render_table, run_scenario, run_survival_scenario, ScenarioSpec, DEFAULT_SURVIVAL_TIMES};

fn spec(n: usize, p: usize, a: f64, g: f64, shape: f64, replicates: usize) -> ScenarioSpec {
    ScenarioSpec {
        n,
        p,
        a,
        g,
        b: 0.5,
        shape,
        censor_log_scale: 5.5,
        truth_n: 100_000,
        trial_n: 300,
        replicates,
        seed: 1,
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let replicates: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let survival = args.iter().any(|a| a == "survival");

    if survival {
        let spec = spec(500, 3, 0.7, 0.3, 1.0, replicates);
        let result = run_survival_scenario(&spec, &DEFAULT_SURVIVAL_TIMES).unwrap();
        print!("{}", result.summary_csv());
        return;
    }

    let grid = [
        spec(500, 3, 0.7, -0.3, 1.0, replicates),
        spec(200, 3, 0.7, 0.3, 2.0, replicates),
        spec(200, 3, 0.35, 0.3, 0.5, replicates),
    ];
    let results: Vec<_> = grid.iter().map(|s| run_scenario(s).unwrap()).collect();
    print!("{}", render_table(&results).text);
}
