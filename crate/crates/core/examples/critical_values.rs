//! Simulate a small critical-value table and compare it with the built-in one.
//!
//! Pass a path to keep the table JSON and ECDF CSV.

use convex_lne::sim::{oracle_table, pivotal_table, simulate_samples, write_ecdf_file, SimulationConfig};
use convex_lne::{CriticalValueTable, Statistic};

fn main() -> convex_lne::Result<()> {
    let config = SimulationConfig {
        n: 2000,
        b: 1000,
        workers: std::thread::available_parallelism().map_or(1, usize::from),
        ..Default::default()
    };
    let samples = simulate_samples(&config)?;
    let table = pivotal_table(&config, &samples)?.overlay(&oracle_table(&config, &samples)?);
    let builtin = CriticalValueTable::builtin();

    println!("{:<10} {:>9} {:>9}", "statistic", "simulated", "builtin");
    for stat in [Statistic::AbsL0, Statistic::AbsL1, Statistic::AbsM, Statistic::AbsH2, Statistic::AbsH3, Statistic::AbsH2Mode] {
        println!("{:<10} {:>9.3} {:>9.3}", stat.name(), table.quantile(stat, 0.05)?, builtin.quantile(stat, 0.05)?);
    }

    if let Some(path) = std::env::args().nth(1) {
        table.write(path.as_ref())?;
        write_ecdf_file(&table, format!("{path}.ecdf.csv").as_ref())?;
        println!("wrote {path}");
    }
    Ok(())
}
