//! Cycle-accurate loading at every configuration parallelism, with the
//! first few latch events of the P=4 load.

use lutstruction::bitgen::{encode, random_config};
use lutstruction::fabric::FabricParams;
use lutstruction::sim::FabricState;
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for p in [1, 2, 4, 8, 16] {
        let params = FabricParams::new(32, 32, 32, p)?;
        let config = random_config(params, &mut rng);
        let bs = encode(&config)?;
        let mut fabric = FabricState::new(params)?;
        let mut shown = 0;
        let report = fabric.load_bitstream_traced(&bs, |cycle| {
            if p == 4 && shown < 8 {
                for e in &cycle.latched {
                    println!(
                        "  cycle {:3}: segment {} word {:3} -> column {:2} slot {:2}",
                        cycle.cycle, e.segment, e.word, e.column, e.slot
                    );
                }
                shown += cycle.latched.len();
            }
        })?;
        println!(
            "P={p:2}: {} cycles, {} words of {} bits, trace {:016x}, loaded == source: {}",
            report.cycles,
            report.words,
            report.word_bits,
            report.trace_hash,
            fabric.config() == &config
        );
    }
    Ok(())
}
