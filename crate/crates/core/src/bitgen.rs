//! Bitstream generation: configuration word ordering, the `.luts` file
//! format and multi-instruction library images.
//!
//! A configuration segment of `C` columns is loaded through its leftmost
//! column. Word `i` of a segment targets column `start + C - 1 - i / 16` and
//! carries slot `i % 16`, i.e. bits `4k..4k+3` of each row's 64 table bits.
//! Words reach their column after crossing the bypass cells in front of it,
//! so [`encode`] pre-applies the inverse of that lane permutation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fabric::{
    build_topology, bypass_permutation, CellConfig, FabricConfig, FabricError, FabricParams,
    LanePermutation, WiringTopology,
};

pub const MAGIC: &[u8; 4] = b"LUTS";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 16;
/// Words needed to fill one column.
pub const WORDS_PER_COLUMN: usize = 16;
pub const LIBRARY_SLOTS: usize = 128;
pub const DEFAULT_LIBRARY_BASE: u64 = 0x10_0000;

#[derive(Debug, Error)]
pub enum BitgenError {
    #[error("cell ({column}, {row}) is still in bypass mode")]
    Unprogrammed { column: usize, row: usize },
    #[error("malformed bitstream: {0}")]
    Format(String),
    #[error("library image: {0}")]
    Library(String),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl BitgenError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Unprogrammed { .. } => "unprogrammed-cell",
            Self::Format(_) => "format",
            Self::Library(_) => "library",
            Self::Fabric(_) => "parameter",
            Self::Io(_) => "io",
        }
    }
}

/// Where one configuration word lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordTarget {
    pub segment: usize,
    pub column: usize,
    pub slot: usize,
}

/// Target of word `index` in segment `segment`.
pub fn word_target(params: &FabricParams, segment: usize, index: usize) -> WordTarget {
    let c = params.segment_columns();
    let start = segment * c;
    WordTarget {
        segment,
        column: start + c - 1 - index / WORDS_PER_COLUMN,
        slot: index % WORDS_PER_COLUMN,
    }
}

/// Permutation a raw word must be pre-distorted with so that it arrives
/// intact at `column` (the inverse of the bypass path in front of it).
pub fn compensation_permutation(topology: &WiringTopology, column: usize) -> LanePermutation {
    let start = topology.params().segment_start(column);
    bypass_permutation(topology, start, column).inverse()
}

/// Slot `slot` of the 64-bit configuration of every row in a column.
fn raw_word(config: &FabricConfig, column: usize, slot: usize) -> Vec<u8> {
    config
        .column(column)
        .iter()
        .map(|cell| ((cell.tables >> (4 * slot)) & 0xF) as u8)
        .collect()
}

/// Ordered configuration words. Each word holds `P * W` nibbles; nibble
/// `p * W + r` is row `r` of segment `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    params: FabricParams,
    words: Vec<Vec<u8>>,
}

impl Bitstream {
    pub fn params(&self) -> &FabricParams {
        &self.params
    }

    pub fn words(&self) -> &[Vec<u8>] {
        &self.words
    }

    /// Nibbles of segment `segment` in word `index`.
    pub fn segment_word(&self, index: usize, segment: usize) -> &[u8] {
        let w = self.params.width;
        &self.words[index][segment * w..(segment + 1) * w]
    }

    /// Bits delivered per load cycle, `4 * W * P`.
    pub fn word_bits(&self) -> usize {
        4 * self.params.width * self.params.config_parallelism
    }

    /// Headerless payload: nibble stream, two per byte, low nibble first.
    pub fn payload(&self) -> Vec<u8> {
        let nibbles: Vec<u8> = self.words.iter().flatten().copied().collect();
        nibbles
            .chunks(2)
            .map(|p| p[0] | (p.get(1).copied().unwrap_or(0) << 4))
            .collect()
    }

    pub fn payload_len(params: &FabricParams) -> usize {
        params.bitstream_bits() / 8
    }

    pub fn from_payload(params: FabricParams, payload: &[u8]) -> Result<Self, BitgenError> {
        params.validate()?;
        let expected = Self::payload_len(&params);
        if payload.len() != expected {
            return Err(BitgenError::Format(format!(
                "payload is {} bytes, expected {expected}",
                payload.len()
            )));
        }
        let per_word = params.width * params.config_parallelism;
        let nibbles: Vec<u8> = payload.iter().flat_map(|b| [b & 0xF, b >> 4]).collect();
        let words = nibbles.chunks(per_word).map(<[u8]>::to_vec).collect();
        Ok(Self { params, words })
    }

    /// `.luts` file image: 16-byte header followed by the payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(HEADER_BYTES + Self::payload_len(p));
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        for v in [p.width, p.depth, p.reg_spacing, p.config_parallelism] {
            out.push(v as u8);
        }
        out.extend_from_slice(&[0u8; 7]);
        out.extend(self.payload());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BitgenError> {
        if bytes.len() < HEADER_BYTES {
            return Err(BitgenError::Format(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(BitgenError::Format("bad magic".into()));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(BitgenError::Format(format!(
                "unsupported version {}",
                bytes[4]
            )));
        }
        if bytes[9..HEADER_BYTES].iter().any(|b| *b != 0) {
            return Err(BitgenError::Format(
                "reserved header bytes are not zero".into(),
            ));
        }
        let params = FabricParams {
            width: bytes[5].into(),
            depth: bytes[6].into(),
            reg_spacing: bytes[7].into(),
            config_parallelism: bytes[8].into(),
        };
        params
            .validate()
            .map_err(|e| BitgenError::Format(format!("header geometry: {e}")))?;
        Self::from_payload(params, &bytes[HEADER_BYTES..])
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), BitgenError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, BitgenError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Serializes a fully programmed configuration into load order.
pub fn encode(config: &FabricConfig) -> Result<Bitstream, BitgenError> {
    let params = *config.params();
    let topology = build_topology(params)?;
    for c in 0..params.depth {
        if let Some(row) = config.column(c).iter().position(CellConfig::is_bypass) {
            return Err(BitgenError::Unprogrammed { column: c, row });
        }
    }
    let c = params.segment_columns();
    let segments = params.config_parallelism;
    let comp: Vec<LanePermutation> = (0..params.depth)
        .map(|col| compensation_permutation(&topology, col))
        .collect();
    let words = (0..WORDS_PER_COLUMN * c)
        .map(|i| {
            let mut word = Vec::with_capacity(segments * params.width);
            for p in 0..segments {
                let t = word_target(&params, p, i);
                word.extend(comp[t.column].apply(&raw_word(config, t.column, t.slot)));
            }
            word
        })
        .collect();
    Ok(Bitstream { params, words })
}

/// Reconstructs the configuration a bitstream programs.
pub fn decode(bitstream: &Bitstream) -> Result<FabricConfig, BitgenError> {
    let params = *bitstream.params();
    let topology = build_topology(params)?;
    let mut config = FabricConfig::zeroed(params);
    let paths: Vec<LanePermutation> = (0..params.depth)
        .map(|col| bypass_permutation(&topology, params.segment_start(col), col))
        .collect();
    for i in 0..bitstream.words.len() {
        for p in 0..params.config_parallelism {
            let t = word_target(&params, p, i);
            let raw = paths[t.column].apply(bitstream.segment_word(i, p));
            for (r, nib) in raw.iter().enumerate() {
                config.cell_mut(t.column, r).tables |= u64::from(*nib) << (4 * t.slot);
            }
        }
    }
    Ok(config)
}

/// One instruction placed in a library image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub funct7: u8,
    pub name: String,
    pub address: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryManifest {
    pub base: u64,
    pub slot_bytes: usize,
    pub entries: Vec<ManifestEntry>,
}

impl LibraryManifest {
    pub fn name_of(&self, funct7: u8) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.funct7 == funct7)
            .map(|e| e.name.as_str())
    }
}

/// Address of the payload for `funct7` in an image at `base`.
pub fn slot_address(base: u64, funct7: u8, slot_bytes: usize) -> u64 {
    base + u64::from(funct7) * slot_bytes as u64
}

/// Concatenates headerless payloads into a flat image indexed by `funct7`.
/// Unused slots are zero.
pub fn build_library_image(
    base: u64,
    entries: &[(u8, String, Bitstream)],
) -> Result<(Vec<u8>, LibraryManifest), BitgenError> {
    if entries.len() > LIBRARY_SLOTS {
        return Err(BitgenError::Library(format!(
            "{} entries exceed the {LIBRARY_SLOTS} funct7 slots",
            entries.len()
        )));
    }
    let Some(first) = entries.first() else {
        return Err(BitgenError::Library("no entries".into()));
    };
    let slot_bytes = Bitstream::payload_len(first.2.params());
    let mut image = vec![0u8; LIBRARY_SLOTS * slot_bytes];
    let mut placed: BTreeMap<u8, ManifestEntry> = BTreeMap::new();
    for (funct7, name, bs) in entries {
        let f = usize::from(*funct7);
        if f >= LIBRARY_SLOTS {
            return Err(BitgenError::Library(format!(
                "funct7 {funct7} is not a 7-bit value"
            )));
        }
        let payload = bs.payload();
        if payload.len() != slot_bytes {
            return Err(BitgenError::Library(format!(
                "`{name}` payload is {} bytes, slots hold {slot_bytes}",
                payload.len()
            )));
        }
        let entry = ManifestEntry {
            funct7: *funct7,
            name: name.clone(),
            address: slot_address(base, *funct7, slot_bytes),
        };
        if placed.insert(*funct7, entry).is_some() {
            return Err(BitgenError::Library(format!("funct7 {funct7} used twice")));
        }
        image[f * slot_bytes..(f + 1) * slot_bytes].copy_from_slice(&payload);
    }
    Ok((
        image,
        LibraryManifest {
            base,
            slot_bytes,
            entries: placed.into_values().collect(),
        },
    ))
}

/// Extracts the bitstream for `funct7` from a library image.
pub fn library_lookup(
    image: &[u8],
    manifest: &LibraryManifest,
    params: FabricParams,
    funct7: u8,
) -> Result<Bitstream, BitgenError> {
    let entry = manifest
        .entries
        .iter()
        .find(|e| e.funct7 == funct7)
        .ok_or_else(|| BitgenError::Library(format!("no instruction at funct7 {funct7}")))?;
    let off = (entry.address - manifest.base) as usize;
    let slice = image
        .get(off..off + manifest.slot_bytes)
        .ok_or_else(|| BitgenError::Library("image truncated".into()))?;
    Bitstream::from_payload(params, slice)
}

/// Random fully programmed configuration, for load and format checks.
pub fn random_config(params: FabricParams, rng: &mut impl rand::Rng) -> FabricConfig {
    let mut config = FabricConfig::zeroed(params);
    for c in 0..params.depth {
        for r in 0..params.width {
            config.cell_mut(c, r).tables = rng.gen();
        }
    }
    config
}
