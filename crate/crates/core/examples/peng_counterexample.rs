//! Two independent draws from the same ambiguous urn. Exponential, MM and
//! Fubini independence all hold, but the iterated sublinear expectation of
//! `1{X != Y}` differs from the joint upper expectation.

use caplab::comonotone::GridFunction;
use caplab::independence::{
    ellsberg_pair, implication_suite, peng_check, DEFAULT_TOLERANCE, DEFAULT_TRIALS,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = ellsberg_pair();
    let suite = implication_suite(&m, DEFAULT_TRIALS, 1, DEFAULT_TOLERANCE)?;
    for r in suite.reports() {
        println!(
            "{:>6}: holds {} (max gap {:e})",
            r.kind.name(),
            r.holds,
            r.max_gap
        );
    }

    let differ = GridFunction::from_fn(m.range_axes(), |c| if c[0] != c[1] { 1.0 } else { 0.0 })?;
    let peng = peng_check(&m, &differ, DEFAULT_TOLERANCE)?;
    println!(
        "joint {} vs iterated {}: equal {}",
        peng.lhs, peng.rhs, peng.equal
    );
    Ok(())
}
