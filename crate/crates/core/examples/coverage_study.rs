//! Small coverage experiment for the log-concave mode, printed as CSV.

use convex_lne::coverage::{run_coverage, ExperimentConfig};
use convex_lne::CriticalValueTable;

const CONFIG: &str = "
model = log-concave
f0 = beta(2,3)
targets = value, mode
x0 = 0.4
n = 100, 400
reps = 200
level = 0.80, 0.95
seed = 11
";

fn main() -> convex_lne::Result<()> {
    let mut cfg = ExperimentConfig::from_kv(CONFIG)?;
    cfg.workers = std::thread::available_parallelism().map_or(1, usize::from);
    let report = run_coverage(&cfg, &CriticalValueTable::builtin())?;
    report.write_csv(std::io::stdout().lock())
}
