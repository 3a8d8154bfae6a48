//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use polyside::setfn::{generate_instance, generate_sfm_instance, Family, PolymatroidInstance, SetFunctionOracle, SfmFamily};

pub fn lp_fixture(family: Family, n: usize) -> PolymatroidInstance {
    generate_instance(family, n, 0).expect("generator covers the benchmark sizes")
}

pub fn sfm_fixture(family: SfmFamily, n: usize) -> Arc<SetFunctionOracle> {
    Arc::new(generate_sfm_instance(family, n, 0).expect("generator covers the benchmark sizes"))
}
