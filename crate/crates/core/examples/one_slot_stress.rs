//! Alternating two instructions through one fabric slot reconfigures on
//! every call; a second slot removes all but the cold misses.

use lutstruction::sysmodel::{
    benchmark_manifest, execute_trace, make_benchmark_trace, BenchmarkKind, SystemConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "{:>3} {:>5} {:>8} {:>10} {:>12}",
        "P", "slots", "misses", "stall/call", "total"
    );
    for p in [1, 4, 16] {
        for slots in [1, 2] {
            let mut cfg = SystemConfig::default().with_parallelism(p)?;
            cfg.slots = slots;
            let trace = make_benchmark_trace(BenchmarkKind::Interleaved, 500, &cfg);
            let s = execute_trace(&trace, &cfg, &benchmark_manifest(&cfg))?;
            println!(
                "{p:>3} {slots:>5} {:>8} {:>10} {:>12}",
                s.slot_misses,
                s.reconfig_cycles_per_miss().unwrap_or(0),
                s.total_cycles
            );
        }
    }
    Ok(())
}
