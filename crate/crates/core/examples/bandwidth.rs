//! Configuration bandwidth for each parallelism against the reference
//! controller and the ICAP port.

use lutstruction::sysmodel::{bandwidth_report, SystemConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for p in [1, 2, 4, 8, 16] {
        let r = bandwidth_report(&SystemConfig::default().with_parallelism(p)?);
        println!(
            "P={p:2}: {:5} bits/cycle, {:5.1} GB/s ({:4.1}x reference), load {:3} cycles = {:.2} us; ICAP {} cycles = {:.2} us",
            r.bits_per_cycle, r.bandwidth_gbs, r.speedup_vs_reference, r.load_cycles, r.load_time_us, r.icap_cycles, r.icap_time_us
        );
    }
    Ok(())
}
