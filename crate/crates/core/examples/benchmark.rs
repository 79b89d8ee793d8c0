//! Runs the planted synthetic benchmark and prints per-agenda scores along
//! with the similarity gap between gold positives and negatives.

use std::time::Instant;

use agenda_core::pipeline::{run_benchmark, BenchmarkConfig};
use agenda_core::synth::{generate, SynthConfig};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let synth = SynthConfig { seed, ..SynthConfig::default() };
    let config = BenchmarkConfig::default();
    let bench = generate(&synth);
    let start = Instant::now();
    let out = run_benchmark(&bench, &config).expect("benchmark runs");
    println!("seed {seed}: {:.1}s, vocabulary {}", start.elapsed().as_secs_f64(), out.embeddings.len());
    for o in &out.outcomes {
        let (mut pos, mut neg) = (f64::INFINITY, f64::NEG_INFINITY);
        for l in &o.labels {
            let s = l.best_similarity.unwrap_or(-1.0);
            match bench.gold.get(&l.doc_id, &o.query.label) {
                Some(true) => pos = pos.min(s),
                _ => neg = neg.max(s),
            }
        }
        println!("{:<20} lowest positive {pos:.3}  highest negative {neg:.3}", o.query.label);
    }
    print!("{}", out.metrics.to_table());
}
