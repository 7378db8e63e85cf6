//! The dominating probability `P'` built from survival maxima. On a
//! 2-alternating envelope it lies in the core; on the four-atom example
//! below it does not.

use caplab::ellsberg::{build_pprime, verify_pprime, SortedUrn};
use caplab::independence::{ellsberg_urn, Urn};
use caplab::measure::{CredalSet, FiniteSpace, RandomVariable};

fn show(name: &str, urn: Urn) -> Result<(), Box<dyn std::error::Error>> {
    let sorted = SortedUrn::new(urn);
    let p = build_pprime(&sorted);
    let v = verify_pprime(&sorted, &p, 1e-12)?;
    println!(
        "{name}: P' = {:?}; probability {}, survival match {}, in core {} (witness {:?})",
        p.probs(),
        v.is_prob,
        v.survival_match,
        v.in_core,
        v.core_witness
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    show("ellsberg", ellsberg_urn())?;

    let space = FiniteSpace::indexed(4)?;
    let credal = CredalSet::from_rows(
        &space,
        vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.5]],
    )?;
    let x = RandomVariable::new(&space, vec![3.0, 0.0, 1.0, 2.0])?;
    show("split", Urn::new(credal, x)?)
}
