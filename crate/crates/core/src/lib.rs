//! Monotonicity testing on the Boolean hypercube: samplers, testers, exact
//! metrics and verification harnesses for the structural lemmas behind the
//! path tester's analysis.

pub mod blue;
pub mod boolfn;
pub mod dichotomy;
pub mod error;
pub mod flow;
pub mod harness;
pub mod hypercube;
pub mod metrics;
pub mod rational;
pub mod testers;

pub use boolfn::{BooleanFunction, Family, QueryOracle, TruthTable};
pub use error::{Error, Result};
pub use hypercube::{make_params, PathSample, Point, Probability, TesterParams};
pub use metrics::{Matching, MetricsReport};
pub use testers::{combined_test, edge_test_once, path_test_once, sensitivity_test, TesterRun, Verdict};
