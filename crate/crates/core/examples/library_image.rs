//! Packs compiled instructions into a funct7-indexed library image and
//! resolves their addresses through the softcore memory map.

use lutstruction::bitgen::{build_library_image, encode, library_lookup};
use lutstruction::fabric::FabricParams;
use lutstruction::netlist::corpus;
use lutstruction::pnr::{compile, CompileOptions};
use lutstruction::sysmodel::MemoryMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = FabricParams::default();
    let mut entries = Vec::new();
    for (funct7, name) in [(1u8, "popcount"), (2, "permute_xor"), (9, "xor")] {
        let compiled = compile(
            &corpus(name, params.width, 0)?,
            params,
            &CompileOptions::default(),
        )?;
        entries.push((funct7, name.to_string(), encode(&compiled.config)?));
    }
    let map = MemoryMap::default();
    let (image, manifest) = build_library_image(map.library_base, &entries)?;
    println!("image: {} bytes", image.len());
    for e in &manifest.entries {
        println!(
            "  funct7 {:3} {:12} at {:#x} -> bus {:#x}",
            e.funct7,
            e.name,
            e.address,
            map.resolve_address(e.address)?
        );
    }
    let back = library_lookup(&image, &manifest, params, 2)?;
    println!("funct7 2 round-trips: {}", back == entries[1].2);
    println!("{}", serde_json::to_string(&manifest)?);
    Ok(())
}
