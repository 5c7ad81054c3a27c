//! Every method on a stream with four kinds of drift in a row.

use kdrift::runner::{mean_f1, run, MethodVariant, RunConfig};
use kdrift::streams::DriftSchedule;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = RunConfig {
        schedule: DriftSchedule::sequential(100, 100),
        k: 11,
        seeds: vec![0, 1, 2],
        ..RunConfig::default()
    };
    println!("schedule: {}", serde_json::to_string(&base.schedule)?);
    for method in MethodVariant::ALL {
        let records = run(&base.with_method(method))?;
        let last = base.iterations - base.iterations / 3;
        println!(
            "{:<18} mean {:.4}  final third {:.4}",
            method.as_str(),
            mean_f1(&records, 0, base.iterations),
            mean_f1(&records, last, base.iterations)
        );
    }
    Ok(())
}
