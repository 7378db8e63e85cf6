//! The greedy probability in the core of a 2-alternating capacity attains
//! the Choquet integral, and the Möbius transform of a distortion.

use caplab::measure::{Capacity, FiniteSpace, ProbabilityVector, RandomVariable, SubsetMask};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = FiniteSpace::indexed(3)?;
    let p = ProbabilityVector::new(&space, vec![0.2, 0.3, 0.5])?;
    let v = Capacity::distortion(&p, |t| 1.0 - (1.0 - t).powi(2))?;
    let x = RandomVariable::new(&space, vec![1.0, 4.0, -2.0])?;

    let best = v.core_sup_expectation(&x)?;
    println!(
        "choquet {:.6}, greedy core max {:.6}",
        v.choquet(&x),
        best.value
    );
    println!(
        "argmax {:?}, in core {}",
        best.argmax.probs(),
        v.core_contains(&best.argmax)
    );
    println!(
        "2-alternating violation: {:?}",
        v.two_alternating_violation(1e-12)?
    );

    for (mask, m) in v.mobius()?.iter().enumerate().skip(1) {
        let atoms: Vec<usize> = SubsetMask(mask as u32).atoms().collect();
        println!("mobius{atoms:?} = {m:+.4}");
    }
    Ok(())
}
