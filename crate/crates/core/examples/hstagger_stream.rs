//! Generate HSTAGGER, inject a relation addition and watch the labels move.

use kdrift::streams::{hstagger_generate, DriftKind, DriftSchedule, DriftStream, HstaggerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hcfg = HstaggerConfig::default();
    let gt = hstagger_generate(&hcfg)?;
    for c in gt.hierarchy.non_root_concepts() {
        match gt.rule(c) {
            Some(r) => println!("{c}: {r}  (rate {:.2})", r.positive_rate()),
            None => println!("{c}: union of children"),
        }
    }

    let schedule = DriftSchedule::single(50, DriftKind::RelationAddition);
    let plan = schedule.resolve(&gt, &hcfg, 1)?;
    let mut stream = DriftStream::new(gt, plan, 1);
    for t in [0, 49, 50, 51] {
        for ev in stream.advance_to(t)? {
            println!("t={t}: {}", serde_json::to_string(&ev)?);
        }
        let z = stream.example(t);
        println!("t={t}: positives {:?}", z.y.positives().collect::<Vec<_>>());
    }
    Ok(())
}
