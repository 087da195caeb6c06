//! Runs the bundled benchmark suites and prints the summary tables.

use jointplan::sim::{run_suite, SuiteSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let report = run_suite(&SuiteSpec::bundled())?;
    print!("{}", report.to_text());
    let failures: Vec<_> = report
        .mode1_episodes
        .iter()
        .filter(|e| !e.success)
        .collect();
    if !failures.is_empty() {
        println!("\nFailed mode-1 episodes:");
        for e in failures {
            println!(
                "  {} ({}): {}",
                e.scenario,
                e.strategy,
                e.failure.as_deref().unwrap_or("?")
            );
        }
    }
    Ok(())
}
