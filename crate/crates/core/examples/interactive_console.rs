//! Answer drift questions from the terminal.
//!
//! At each prompt: empty line or `y` confirms, `n` rejects every highlighted
//! concept, anything else is parsed as an answer JSON such as
//! `{"edits":[{"kind":"relation_addition","child":"c3","parent":"c4"}]}`.
//! End of input confirms everything that follows.

use std::io::{self, BufRead, Write};

use kdrift::adaptation::AdaptationReport;
use kdrift::disambiguation::Answer;
use kdrift::error::{Error, Result};
use kdrift::events::NullSink;
use kdrift::runner::{Engine, RunConfig};
use kdrift::streams::{DriftKind, DriftSchedule};
use kdrift::supervisor::{Question, Supervisor};

struct Console {
    lines: io::Lines<io::StdinLock<'static>>,
}

impl Supervisor for Console {
    fn answer(&mut self, q: &Question<'_>) -> Result<Answer> {
        let d = q.description;
        println!("\n-- drift at t={} --", d.iteration);
        for c in &d.flagged {
            println!("  {c}: MMD^2 {:.4}", d.scores.get(c).copied().unwrap_or(0.0));
        }
        println!("  proposal: {}", serde_json::to_string(&d.proposed_edits)?);
        print!("answer> ");
        io::stdout().flush()?;
        let line = match self.lines.next() {
            Some(l) => l?,
            None => return Ok(Answer::confirm()),
        };
        Ok(match line.trim() {
            "" | "y" => Answer::confirm(),
            "n" => Answer::reject_all(d),
            json => serde_json::from_str(json)?,
        })
    }

    fn outcome(&mut self, result: std::result::Result<&AdaptationReport, &Error>) {
        match result {
            Ok(r) => println!("  applied {}", serde_json::to_string(&r.applied).unwrap_or_default()),
            Err(e) => println!("  refused: {e}; try again"),
        }
    }

    fn max_attempts(&self) -> Option<usize> {
        None
    }
}

fn main() -> Result<()> {
    let cfg = RunConfig {
        schedule: DriftSchedule::single(100, DriftKind::RelationAddition),
        iterations: 300,
        seeds: vec![0],
        ..RunConfig::default()
    };
    let engine = Engine::new(&cfg, 0)?;
    println!("hierarchy: {}", serde_json::to_string(engine.hierarchy())?);
    let mut user = Console {
        lines: io::stdin().lock().lines(),
    };
    let records = engine.run(&mut user, &mut NullSink)?;
    let last = records.last().expect("iterations > 0");
    println!(
        "\nfinal micro-F1 {:.4} after {} questions",
        last.micro_f1, last.questions
    );
    Ok(())
}
