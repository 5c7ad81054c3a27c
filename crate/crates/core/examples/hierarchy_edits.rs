//! Build a small concept DAG, close labels upward and apply edits.

use kdrift::hierarchy::{ConceptHierarchy, ConceptId, LabelVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let id = ConceptId::from;
    let h = ConceptHierarchy::new("root", "everything")
        .add_concept("animal", "animal", &[id("root")])?
        .add_concept("pet", "pet", &[id("root")])?
        .add_concept("dog", "dog", &[id("animal")])?
        .add_concept("cat", "cat", &[id("animal")])?;

    let y = LabelVector::from_positives(&h, [&id("dog")])?;
    let closed = h.closure(&y)?;
    println!("closure of {{dog}}: {:?}", closed.positives().collect::<Vec<_>>());

    // dogs become pets
    let h2 = h.add_relation(&id("dog"), &id("pet"))?;
    println!("after dog -> pet: ancestors(dog) = {:?}", h2.ancestors(&id("dog"))?);

    match h2.add_relation(&id("animal"), &id("dog")) {
        Ok(_) => println!("unexpected: cycle accepted"),
        Err(e) => println!("animal -> dog refused: {e}"),
    }

    let h3 = h2.remove_concept(&id("cat"))?;
    println!(
        "version {} -> {}, concepts {:?}",
        h.version(),
        h3.version(),
        h3.concepts().collect::<Vec<_>>()
    );
    println!("{}", serde_json::to_string_pretty(&h3)?);
    Ok(())
}
