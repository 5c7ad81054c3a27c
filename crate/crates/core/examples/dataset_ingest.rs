//! Stream a CSV data set with its hierarchy through the classifier.

use std::fs;

use kdrift::runner::{mean_f1, run, DatasetSource, MethodVariant, RunConfig, SourceConfig};
use kdrift::streams::load_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("kdrift-dataset-ingest");
    fs::create_dir_all(&dir)?;
    let (csv, hierarchy) = (dir.join("rows.csv"), dir.join("hierarchy.json"));

    fs::write(
        &hierarchy,
        r#"{"root": "root",
            "concepts": [{"id": "root", "name": "root"}, {"id": "vehicle", "name": "vehicle"},
                         {"id": "car", "name": "car"}, {"id": "bike", "name": "bike"}],
            "edges": [["vehicle", "root"], ["car", "vehicle"], ["bike", "vehicle"]]}"#,
    )?;
    let mut rows = String::from("f0,f1,y_vehicle,y_car,y_bike\n");
    for i in 0..120 {
        let (a, b) = ((i % 12) as f64 / 12.0, (i % 7) as f64 / 7.0);
        // the last row of every dozen omits the parent label and gets repaired
        let (car, bike) = (a > 0.5, b > 0.6 && a <= 0.5);
        let vehicle = (car || bike) && i % 12 != 11;
        rows.push_str(&format!(
            "{a},{b},{},{},{}\n",
            u8::from(vehicle),
            u8::from(car),
            u8::from(bike)
        ));
    }
    fs::write(&csv, rows)?;

    let ds = load_dataset(&csv, &hierarchy, true)?;
    println!("{} rows, {} repaired, dim {}", ds.examples.len(), ds.repaired, ds.dim());

    let cfg = RunConfig {
        source: SourceConfig::Dataset(DatasetSource {
            csv,
            hierarchy,
            repair: true,
        }),
        iterations: 200,
        seeds: vec![0, 1],
        ..RunConfig::default()
    };
    for method in [MethodVariant::KnnStatic, MethodVariant::TrckdInteractive] {
        let records = run(&cfg.with_method(method))?;
        println!(
            "{:<18} mean micro-F1 {:.4}",
            method.as_str(),
            mean_f1(&records, 0, cfg.iterations)
        );
    }
    Ok(())
}
