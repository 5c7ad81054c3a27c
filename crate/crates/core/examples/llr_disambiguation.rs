//! Automatic disambiguation: after a relation addition the recent joint
//! labels show that the child now implies the parent.

use std::collections::BTreeMap;

use kdrift::disambiguation::{llr_disambiguate, DriftDescription, KdEdit, LlrConfig};
use kdrift::streams::{hstagger_generate, DriftKind, DriftSchedule, DriftStream, HstaggerConfig, KdEventKind};
use kdrift::windows::{init_windows, WindowConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hcfg = HstaggerConfig::default();
    let gt = hstagger_generate(&hcfg)?;
    let h0 = gt.hierarchy.clone();
    let plan = DriftSchedule::single(0, DriftKind::RelationAddition).resolve(&gt, &hcfg, 5)?;
    let mut stream = DriftStream::new(gt, plan, 5);

    let s1: Vec<_> = (0..70).map(|i| stream.example(i)).collect();
    let mut store = init_windows(&s1, &h0, WindowConfig::default())?;
    let events = stream.advance_to(0)?;
    let truth = match &events[0].kind {
        KdEventKind::Edit(e) => e.clone(),
        other => return Err(format!("unexpected event {other:?}").into()),
    };
    println!("hidden change: {}", serde_json::to_string(&truth)?);
    for i in 70..140 {
        store.push_example(&stream.example(i));
    }

    let KdEdit::RelationAddition { child, parent } = &truth else {
        unreachable!()
    };
    let desc = DriftDescription {
        iteration: 70,
        flagged: [child.clone(), parent.clone()].into_iter().collect(),
        scores: BTreeMap::new(),
        proposed_edits: Vec::new(),
        witnesses: BTreeMap::new(),
    };
    for beta in [None, Some(5.0)] {
        let edits = llr_disambiguate(&desc, &store, &h0, &LlrConfig { beta, recent: 70 });
        println!("beta {beta:?}: {}", serde_json::to_string(&edits)?);
    }
    Ok(())
}
