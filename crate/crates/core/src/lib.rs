pub mod bitgen;
pub mod cli;
pub mod fabric;
pub mod netlist;
pub mod pnr;
pub mod sim;
pub mod sysmodel;
