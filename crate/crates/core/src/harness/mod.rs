pub mod compare;
pub mod instances;
pub mod selftest;

pub use compare::{recompute_residual, run_compare, BenchRow, BenchmarkReport, CompareOptions, SolverKind, SystemKind};
pub use instances::{gen_instance, GeneratorKind, Instance, InstanceSpec};
pub use selftest::{run_selftest, SelftestCheck};
