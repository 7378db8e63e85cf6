//! Upper and lower expectations of a bet on red in the classic two-colour
//! urn, computed three ways: credal envelopes, Choquet integrals of the
//! envelope capacities, and Choquet against a distorted probability.

use caplab::measure::{Capacity, CredalSet, FiniteSpace, ProbabilityVector, RandomVariable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let urn = FiniteSpace::new(["R", "B"])?;
    let priors = CredalSet::from_rows(&urn, vec![vec![0.5, 0.5], vec![0.3, 0.7]])?;
    let red = RandomVariable::new(&urn, vec![1.0, 0.0])?;

    println!(
        "envelope:  upper {} lower {}",
        priors.upper_envelope(&red),
        priors.lower_envelope(&red)
    );
    println!(
        "choquet:   upper {} lower {}",
        priors.upper_choquet(&red),
        priors.lower_choquet(&red)
    );

    let upper = priors.upper_capacity()?;
    println!(
        "V(R) = {}, V(B) = {}",
        upper.table()[0b01],
        upper.table()[0b10]
    );
    println!("conjugate V(R) = {}", upper.conjugate().table()[0b01]);

    // A concave distortion of a fair coin is 2-alternating.
    let die = FiniteSpace::indexed(4)?;
    let p = ProbabilityVector::uniform(&die);
    let v = Capacity::distortion(&p, f64::sqrt)?;
    let x = RandomVariable::new(&die, vec![3.0, 0.0, 1.0, 2.0])?;
    println!("sqrt-distorted choquet of (3,0,1,2) = {:.6}", v.choquet(&x));
    println!("classification: {:?}", v.classify()?);
    Ok(())
}
