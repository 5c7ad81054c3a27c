//! Windows before and after a relation addition: the parent inherits the
//! child's positives instead of forgetting its data.

use kdrift::adaptation::{adapt, forget_adapt};
use kdrift::disambiguation::KdEdit;
use kdrift::hierarchy::ConceptId;
use kdrift::streams::{hstagger_generate, HstaggerConfig};
use kdrift::windows::{init_windows, WindowConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gt = hstagger_generate(&HstaggerConfig::default())?;
    let s1: Vec<_> = (0..70).map(|i| gt.next_example(i, 0)).collect();
    let wcfg = WindowConfig {
        capacity: 200,
        neg_fraction: 2.0 / 3.0,
    };
    let store = init_windows(&s1, &gt.hierarchy, wcfg)?;

    let (child, parent) = (ConceptId::from("c3"), ConceptId::from("c4"));
    let show = |label: &str, s: &kdrift::windows::WindowStore| {
        for c in [&child, &parent] {
            let p = s.pair(c).expect("tracked");
            println!(
                "{label:>8} {c}: past {} (+{}), current {}, capacity {}",
                p.w_old.len(),
                p.w_old.count(true),
                p.w_cur.len(),
                p.capacity()
            );
        }
    };
    show("before", &store);

    let (adapted, h, report) = adapt(&store, &gt.hierarchy, &[KdEdit::relation_addition("c3", "c4")])?;
    show("adapted", &adapted);
    println!("parents of c3 now {:?}", h.parents(&child));
    println!("{}", serde_json::to_string_pretty(&report)?);

    let forgot = forget_adapt(&store, &[child.clone(), parent.clone()].into_iter().collect());
    show("forget", &forgot);
    Ok(())
}
