//! Fabric geometry, wiring and per-cell configuration state.
//!
//! The fabric is a `depth × width` grid of LUT4_4 cells. Signals only move
//! left to right: every input port of column `c` is driven by exactly one
//! output port of column `c - 1`, and column 0 is driven by the instruction
//! operands. Ports 1 and 2 run straight along a row, ports 0 and 3 are
//! diagonals whose direction alternates with the column parity.
//!
//! A lane is one wire of a column boundary, indexed `4 * row + port`. Lane
//! words are stored as one nibble per row (bit `k` is port `k`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Configuration bits held by a single LUT4_4 cell.
pub const BITS_PER_CELL: usize = 64;

/// Ports (inputs and outputs) of one cell.
pub const PORTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FabricError {
    #[error("invalid fabric parameters: {0}")]
    InvalidParams(String),
}

/// Geometry and tuning knobs of one fabric instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FabricParams {
    /// Rows, equal to the operand bit width.
    pub width: usize,
    /// LUT columns.
    pub depth: usize,
    /// Columns per compulsory pipeline register stage.
    pub reg_spacing: usize,
    /// Number of equally sized configuration segments loaded in parallel.
    pub config_parallelism: usize,
}

impl Default for FabricParams {
    fn default() -> Self {
        Self {
            width: 32,
            depth: 32,
            reg_spacing: 32,
            config_parallelism: 1,
        }
    }
}

impl FabricParams {
    pub fn new(
        width: usize,
        depth: usize,
        reg_spacing: usize,
        config_parallelism: usize,
    ) -> Result<Self, FabricError> {
        let params = Self {
            width,
            depth,
            reg_spacing,
            config_parallelism,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), FabricError> {
        let bad = |msg: String| Err(FabricError::InvalidParams(msg));
        if self.width < 2 || self.depth < 2 {
            return bad(format!(
                "width and depth must be at least 2 (got {}x{})",
                self.width, self.depth
            ));
        }
        // The bitstream header stores the geometry in single bytes.
        if self.width > 255 || self.depth > 255 {
            return bad(format!(
                "width and depth must fit in a byte (got {}x{})",
                self.width, self.depth
            ));
        }
        if self.reg_spacing < 1 || self.reg_spacing > self.depth {
            return bad(format!(
                "register spacing {} outside 1..={}",
                self.reg_spacing, self.depth
            ));
        }
        let p = self.config_parallelism;
        if p == 0 || !p.is_power_of_two() {
            return bad(format!(
                "configuration parallelism {p} is not a power of two"
            ));
        }
        if p > self.depth / 2 || !self.depth.is_multiple_of(p) {
            return bad(format!(
                "configuration parallelism {p} must divide the depth {} and be at most half of it",
                self.depth
            ));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.width * self.depth
    }

    /// Bits carried by one column boundary.
    pub fn lanes(&self) -> usize {
        PORTS * self.width
    }

    pub fn bitstream_bits(&self) -> usize {
        self.cells() * BITS_PER_CELL
    }

    /// Columns in one configuration segment.
    pub fn segment_columns(&self) -> usize {
        self.depth / self.config_parallelism
    }

    /// First (injection) column of the segment containing `column`.
    pub fn segment_start(&self, column: usize) -> usize {
        column - column % self.segment_columns()
    }

    /// Cycles needed to shift a full bitstream into the fabric.
    pub fn load_cycles(&self) -> usize {
        16 * self.segment_columns()
    }

    /// Whether a pipeline register follows `column` in operation mode.
    pub fn is_stage_boundary(&self, column: usize) -> bool {
        column % self.reg_spacing == self.reg_spacing - 1 || column == self.depth - 1
    }

    /// Pipelined latency in cycles, `ceil(depth / reg_spacing)`.
    pub fn pipeline_latency(&self) -> usize {
        self.depth.div_ceil(self.reg_spacing)
    }

    pub(crate) fn cell_index(&self, column: usize, row: usize) -> usize {
        column * self.width + row
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMode {
    Programmed,
    Bypass,
}

/// Four 16-entry truth tables; table `t`, entry `e` is bit `16 * t + e`.
///
/// The entry index is the input nibble: `in3·8 + in2·4 + in1·2 + in0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellConfig {
    pub tables: u64,
    pub mode: CellMode,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self::bypass()
    }
}

impl CellConfig {
    /// The reset state.
    pub const fn bypass() -> Self {
        Self {
            tables: 0,
            mode: CellMode::Bypass,
        }
    }

    pub const fn programmed(tables: u64) -> Self {
        Self {
            tables,
            mode: CellMode::Programmed,
        }
    }

    pub fn from_tables(tables: [u16; 4]) -> Self {
        let bits = tables
            .iter()
            .enumerate()
            .fold(0u64, |acc, (t, &tt)| acc | (u64::from(tt) << (16 * t)));
        Self::programmed(bits)
    }

    pub fn table(&self, k: usize) -> u16 {
        (self.tables >> (16 * k)) as u16
    }

    pub fn set_table(&mut self, k: usize, table: u16) {
        let shift = 16 * k;
        self.tables = (self.tables & !(0xFFFFu64 << shift)) | (u64::from(table) << shift);
    }

    pub fn is_bypass(&self) -> bool {
        self.mode == CellMode::Bypass
    }

    /// Evaluates the four outputs for a 4-bit input nibble.
    #[inline]
    pub fn eval(&self, inputs: u8) -> u8 {
        match self.mode {
            CellMode::Bypass => inputs & 0xF,
            CellMode::Programmed => {
                let idx = u32::from(inputs & 0xF);
                let t = self.tables >> idx;
                ((t & 1) | ((t >> 15) & 2) | ((t >> 30) & 4) | ((t >> 45) & 8)) as u8
            }
        }
    }
}

/// Output bit `k` is table `k` indexed by `inputs`; bypass forwards inputs.
pub fn lut_eval(cell: &CellConfig, inputs: u8) -> u8 {
    cell.eval(inputs)
}

/// Truth table of the projection onto input `k`.
pub const fn projection_table(k: usize) -> u16 {
    match k {
        0 => 0xAAAA,
        1 => 0xCCCC,
        2 => 0xF0F0,
        _ => 0xFF00,
    }
}

/// Programmed tables that behave exactly like bypass mode.
pub fn bypass_cell_tables() -> CellConfig {
    CellConfig::from_tables([
        projection_table(0),
        projection_table(1),
        projection_table(2),
        projection_table(3),
    ])
}

/// `depth × width` grid of cell configurations, column-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FabricConfig {
    params: FabricParams,
    cells: Vec<CellConfig>,
}

impl FabricConfig {
    /// All cells in bypass mode.
    pub fn new(params: FabricParams) -> Self {
        Self {
            params,
            cells: vec![CellConfig::bypass(); params.cells()],
        }
    }

    /// All cells programmed to constant 0.
    pub fn zeroed(params: FabricParams) -> Self {
        Self {
            params,
            cells: vec![CellConfig::programmed(0); params.cells()],
        }
    }

    pub fn params(&self) -> &FabricParams {
        &self.params
    }

    pub fn cell(&self, column: usize, row: usize) -> &CellConfig {
        &self.cells[self.params.cell_index(column, row)]
    }

    pub fn cell_mut(&mut self, column: usize, row: usize) -> &mut CellConfig {
        let idx = self.params.cell_index(column, row);
        &mut self.cells[idx]
    }

    pub fn cells(&self) -> &[CellConfig] {
        &self.cells
    }

    pub fn column(&self, column: usize) -> &[CellConfig] {
        let w = self.params.width;
        &self.cells[column * w..(column + 1) * w]
    }

    pub fn is_fully_programmed(&self) -> bool {
        self.cells.iter().all(|c| !c.is_bypass())
    }

    /// Same cells under different tuning knobs (S and P do not change the grid).
    pub fn with_params(mut self, params: FabricParams) -> Result<Self, FabricError> {
        params.validate()?;
        if params.width != self.params.width || params.depth != self.params.depth {
            return Err(FabricError::InvalidParams(format!(
                "grid {}x{} does not match {}x{}",
                params.width, params.depth, self.params.width, self.params.depth
            )));
        }
        self.params = params;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Input,
    Output,
}

/// One port of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PortRef {
    pub column: usize,
    pub row: usize,
    pub port: usize,
    pub direction: Direction,
}

impl PortRef {
    pub fn input(column: usize, row: usize, port: usize) -> Self {
        Self {
            column,
            row,
            port,
            direction: Direction::Input,
        }
    }

    pub fn output(column: usize, row: usize, port: usize) -> Self {
        Self {
            column,
            row,
            port,
            direction: Direction::Output,
        }
    }
}

impl std::fmt::Display for PortRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let dir = match self.direction {
            Direction::Input => "in",
            Direction::Output => "out",
        };
        write!(f, "({}, {}).{}{}", self.column, self.row, dir, self.port)
    }
}

/// Signals available at the column-0 input ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "bit")]
pub enum ExternalInput {
    Rs1(usize),
    Rs2(usize),
    Funct3(usize),
    Zero,
}

/// The fixed wiring of a fabric instance.
#[derive(Debug, Clone)]
pub struct WiringTopology {
    params: FabricParams,
    // dest[(c * W + r) * 4 + k] = (row, port) of the column c+1 input fed by
    // output k of cell (c, r); meaningless for the last column.
    dest: Vec<(u16, u8)>,
    // src[(c * W + r) * 4 + k] = (row, port) of the column c-1 output feeding
    // input k of cell (c, r); meaningless for column 0.
    src: Vec<(u16, u8)>,
}

/// Where output `port` of a cell in a column of the given parity lands.
///
/// Diagonals that would leave the grid fold back onto the same row, into
/// the diagonal port freed at that edge.
fn wire_dest(even: bool, width: usize, row: usize, port: usize) -> (usize, usize) {
    let last = width - 1;
    match (even, port) {
        (_, 1) | (_, 2) => (row, port),
        (true, 0) if row == 0 => (0, 3),
        (true, 0) => (row - 1, 0),
        (true, _) if row == last => (last, 0),
        (true, _) => (row + 1, 3),
        (false, 0) if row == last => (last, 3),
        (false, 0) => (row + 1, 0),
        (false, _) if row == 0 => (0, 0),
        (false, _) => (row - 1, 3),
    }
}

impl WiringTopology {
    pub fn params(&self) -> &FabricParams {
        &self.params
    }

    fn slot(&self, column: usize, row: usize, port: usize) -> usize {
        (column * self.params.width + row) * PORTS + port
    }

    /// Input port of `column + 1` driven by output `port` of `(column, row)`.
    pub fn output_dest(&self, column: usize, row: usize, port: usize) -> Option<PortRef> {
        if column + 1 >= self.params.depth {
            return None;
        }
        let (r, p) = self.dest[self.slot(column, row, port)];
        Some(PortRef::input(column + 1, r as usize, p as usize))
    }

    /// Output port of `column - 1` driving input `port` of `(column, row)`.
    pub fn input_source(&self, column: usize, row: usize, port: usize) -> Option<PortRef> {
        if column == 0 {
            return None;
        }
        let (r, p) = self.src[self.slot(column, row, port)];
        Some(PortRef::output(column - 1, r as usize, p as usize))
    }

    /// Column-0 operand feeding input `port` of `row`.
    pub fn external_input(&self, row: usize, port: usize) -> ExternalInput {
        match port {
            0 => ExternalInput::Rs1(row),
            1 => ExternalInput::Rs2(row),
            2 => ExternalInput::Funct3(row % 3),
            _ => ExternalInput::Zero,
        }
    }

    /// Column-0 input nibble of `row` for the given operands.
    #[inline]
    pub fn external_nibble(&self, row: usize, rs1: u64, rs2: u64, funct3: u8) -> u8 {
        let b0 = (rs1 >> row) & 1;
        let b1 = (rs2 >> row) & 1;
        let b2 = u64::from(funct3 >> (row % 3)) & 1;
        (b0 | (b1 << 1) | (b2 << 2)) as u8
    }

    /// Output port carrying result bit `row`.
    pub fn result_port(&self, row: usize) -> PortRef {
        PortRef::output(self.params.depth - 1, row, 0)
    }

    /// Inputs of `column + 1` given the output nibbles of `column`.
    #[inline]
    pub fn propagate(&self, column: usize, outputs: &[u8], next_inputs: &mut [u8]) {
        let w = self.params.width;
        let base = column * w * PORTS;
        for (r, next) in next_inputs.iter_mut().enumerate().take(w) {
            let mut nibble = 0u8;
            for k in 0..PORTS {
                let (sr, sp) = self.src[base + w * PORTS + r * PORTS + k];
                nibble |= ((outputs[sr as usize] >> sp) & 1) << k;
            }
            *next = nibble;
        }
    }

    /// Lane permutation applied by bypass cells of one column and the wiring after it.
    pub fn column_permutation(&self, column: usize) -> LanePermutation {
        let w = self.params.width;
        let mut map = vec![0usize; w * PORTS];
        for r in 0..w {
            for k in 0..PORTS {
                let (dr, dp) = wire_dest(column.is_multiple_of(2), w, r, k);
                map[r * PORTS + k] = dr * PORTS + dp;
            }
        }
        LanePermutation { map }
    }
}

/// Builds the fixed wiring for `params`.
pub fn build_topology(params: FabricParams) -> Result<WiringTopology, FabricError> {
    params.validate()?;
    let (w, y) = (params.width, params.depth);
    let mut dest = vec![(0u16, 0u8); w * y * PORTS];
    let mut src = vec![(0u16, 0u8); w * y * PORTS];
    for c in 0..y.saturating_sub(1) {
        for r in 0..w {
            for k in 0..PORTS {
                let (dr, dp) = wire_dest(c % 2 == 0, w, r, k);
                dest[(c * w + r) * PORTS + k] = (dr as u16, dp as u8);
                src[((c + 1) * w + dr) * PORTS + dp] = (r as u16, k as u8);
            }
        }
    }
    Ok(WiringTopology { params, dest, src })
}

/// A permutation of lane bits: the bit on lane `i` moves to lane `map[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanePermutation {
    map: Vec<usize>,
}

impl LanePermutation {
    pub fn identity(lanes: usize) -> Self {
        Self {
            map: (0..lanes).collect(),
        }
    }

    pub fn lanes(&self) -> usize {
        self.map.len()
    }

    /// Destination lane of the bit currently on `lane`.
    pub fn dest(&self, lane: usize) -> usize {
        self.map[lane]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &d)| i == d)
    }

    pub fn inverse(&self) -> Self {
        let mut map = vec![0; self.map.len()];
        for (i, &d) in self.map.iter().enumerate() {
            map[d] = i;
        }
        Self { map }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &LanePermutation) -> Self {
        Self {
            map: self.map.iter().map(|&d| next.map[d]).collect(),
        }
    }

    /// Applies the permutation to a word stored as one nibble per row.
    pub fn apply(&self, word: &[u8]) -> Vec<u8> {
        let mut out = vec![0u8; word.len()];
        for (lane, &d) in self.map.iter().enumerate() {
            let bit = (word[lane / PORTS] >> (lane % PORTS)) & 1;
            out[d / PORTS] |= bit << (d % PORTS);
        }
        out
    }
}

/// Permutation a lane word undergoes crossing bypass columns `[from_col, to_col)`.
pub fn bypass_permutation(
    topology: &WiringTopology,
    from_col: usize,
    to_col: usize,
) -> LanePermutation {
    let lanes = topology.params.lanes();
    (from_col..to_col).fold(LanePermutation::identity(lanes), |acc, c| {
        acc.then(&topology.column_permutation(c))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(w: usize, y: usize, s: usize, p: usize) -> FabricParams {
        FabricParams::new(w, y, s, p).unwrap()
    }

    #[test]
    fn default_geometry() {
        let p = params(32, 32, 7, 16);
        let topo = build_topology(p).unwrap();
        assert_eq!(p.cells(), 1024);
        assert_eq!(p.bitstream_bits(), 65536);
        // Every input of columns 1.. has exactly one driver: 4096 wires per boundary.
        let mut wires = 0;
        for r in 0..32 {
            for k in 0..4 {
                assert!(topo.output_dest(0, r, k).is_some());
                wires += 1;
            }
        }
        assert_eq!(wires * 32, 4096);
    }

    #[test]
    fn parameter_validation() {
        assert!(FabricParams::new(32, 32, 32, 32).is_err());
        assert!(FabricParams::new(32, 32, 32, 3).is_err());
        assert!(FabricParams::new(32, 32, 0, 1).is_err());
        assert!(FabricParams::new(32, 32, 33, 1).is_err());
        assert!(FabricParams::new(1, 32, 1, 1).is_err());
        assert!(FabricParams::new(32, 6, 1, 4).is_err());
        assert!(FabricParams::new(2, 2, 1, 1).is_ok());
        assert!(FabricParams::new(32, 32, 1, 16).is_ok());
    }

    #[test]
    fn smallest_grid_folds_both_diagonals() {
        let topo = build_topology(params(2, 2, 1, 1)).unwrap();
        assert_eq!(topo.output_dest(0, 1, 0), Some(PortRef::input(1, 0, 0)));
        assert_eq!(topo.output_dest(0, 0, 0), Some(PortRef::input(1, 0, 3)));
        assert_eq!(topo.output_dest(0, 0, 3), Some(PortRef::input(1, 1, 3)));
        assert_eq!(topo.output_dest(0, 1, 3), Some(PortRef::input(1, 1, 0)));
        assert_eq!(topo.output_dest(1, 0, 0), None);
    }

    #[test]
    fn wiring_is_a_bijection_per_boundary() {
        for w in [2, 3, 5, 32] {
            let topo = build_topology(params(w, 4, 1, 1)).unwrap();
            for c in 0..3 {
                let mut seen = vec![false; w * 4];
                for r in 0..w {
                    for k in 0..4 {
                        let d = topo.output_dest(c, r, k).unwrap();
                        assert!(!seen[d.row * 4 + d.port]);
                        seen[d.row * 4 + d.port] = true;
                        assert_eq!(
                            topo.input_source(d.column, d.row, d.port),
                            Some(PortRef::output(c, r, k))
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn external_mapping() {
        let topo = build_topology(FabricParams::default()).unwrap();
        assert_eq!(topo.external_input(5, 0), ExternalInput::Rs1(5));
        assert_eq!(topo.external_input(5, 1), ExternalInput::Rs2(5));
        assert_eq!(topo.external_input(5, 2), ExternalInput::Funct3(2));
        assert_eq!(topo.external_input(5, 3), ExternalInput::Zero);
        assert_eq!(topo.external_nibble(4, 1 << 4, 0, 0b010), 0b0101);
        assert_eq!(topo.result_port(3), PortRef::output(31, 3, 0));
    }

    #[test]
    fn lut_eval_examples() {
        assert_eq!(lut_eval(&CellConfig::bypass(), 0b1010), 0b1010);
        for x in 0..16 {
            assert_eq!(lut_eval(&CellConfig::programmed(0), x), 0);
        }
        // AND, OR, XOR of in0/in1 and projection of in0, checked by enumeration.
        let and = (0..16u16)
            .filter(|e| e & 3 == 3)
            .fold(0u16, |t, e| t | 1 << e);
        let or = (0..16u16)
            .filter(|e| e & 3 != 0)
            .fold(0u16, |t, e| t | 1 << e);
        let xor = (0..16u16)
            .filter(|e| (e & 1) ^ ((e >> 1) & 1) == 1)
            .fold(0u16, |t, e| t | 1 << e);
        let cell = CellConfig::from_tables([and, or, xor, projection_table(0)]);
        for x in 0..16u8 {
            let (a, b) = (x & 1, (x >> 1) & 1);
            let expect = (a & b) | ((a | b) << 1) | ((a ^ b) << 2) | (a << 3);
            assert_eq!(lut_eval(&cell, x), expect);
        }
        assert_eq!(lut_eval(&cell, 0b0011), 0b1011);
    }

    #[test]
    fn bypass_tables_match_bypass_mode() {
        let cell = bypass_cell_tables();
        assert_eq!((cell.table(0) >> 0b0001) & 1, 1);
        assert_eq!((cell.table(3) >> 0b0111) & 1, 0);
        for x in 0..16 {
            assert_eq!(lut_eval(&cell, x), x);
            assert_eq!(lut_eval(&cell, x), lut_eval(&CellConfig::bypass(), x));
        }
    }

    #[test]
    fn bypass_permutation_spans() {
        let topo = build_topology(FabricParams::default()).unwrap();
        assert!(bypass_permutation(&topo, 7, 7).is_identity());
        let single = bypass_permutation(&topo, 0, 1);
        assert_eq!(single.dest(5 * 4), 4 * 4);
        assert_eq!(single.dest(5 * 4 + 3), 6 * 4 + 3);
        assert_eq!(single.dest(5 * 4 + 1), 5 * 4 + 1);
        let odd = bypass_permutation(&topo, 1, 2);
        assert_eq!(odd.dest(5 * 4), 6 * 4);
        for start in 0..6 {
            for k in 1..4 {
                assert!(bypass_permutation(&topo, start, start + 2 * k).is_identity());
            }
        }
    }

    #[test]
    fn permutation_apply_and_inverse() {
        let topo = build_topology(params(8, 8, 1, 1)).unwrap();
        let perm = bypass_permutation(&topo, 2, 5);
        let word: Vec<u8> = (0..8u8).map(|r| (r * 7 + 3) & 0xF).collect();
        let there = perm.apply(&word);
        assert_eq!(perm.inverse().apply(&there), word);
        assert!(perm.then(&perm.inverse()).is_identity());
    }

    #[test]
    fn load_and_latency_arithmetic() {
        for (p, cycles) in [(1, 512), (2, 256), (4, 128), (8, 64), (16, 32)] {
            assert_eq!(params(32, 32, 1, p).load_cycles(), cycles);
        }
        for (s, lat) in [(1, 32), (2, 16), (4, 8), (7, 5), (8, 4), (16, 2), (32, 1)] {
            assert_eq!(params(32, 32, s, 1).pipeline_latency(), lat);
        }
    }
}
