//! Train the synthetic zero-shot suite with and without the dictionary term
//! and print the metrics of both runs.

use spanlink::lexicon::parse_medic;
use spanlink::pipeline::train_and_evaluate;
use spanlink::synthetic::SyntheticSuite;

fn main() -> spanlink::Result<()> {
    let suite = SyntheticSuite::generate(1);
    for lambda in [0.0, 0.9] {
        let mut config = SyntheticSuite::run_config(lambda);
        for kv in std::env::args().skip(1) {
            config.apply_override(&kv)?;
        }
        let inv = parse_medic(suite.medic_tsv(), "synthetic")?;
        let t = std::time::Instant::now();
        let out = train_and_evaluate(&config, inv, suite.train.clone(), suite.test.clone())?;
        println!("lambda = {lambda} ({:.1}s)", t.elapsed().as_secs_f64());
        println!("epoch losses: {:?}", out.train_report.epoch_losses);
        print!("{}", out.report.to_table());
        for p in &out.predictions {
            println!(
                "  {}\t{}\t{}\t{:.3}\t{:.3}",
                p.doc_id, p.surface, p.cui, p.context, p.dict
            );
        }
    }
    Ok(())
}
