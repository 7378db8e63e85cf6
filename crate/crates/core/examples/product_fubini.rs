//! Joint versus iterated upper probabilities of `{X_1 + X_2 >= α}` for two
//! independent ambiguous urns. The second urn's envelope is not
//! 2-alternating, and the two sides separate at `α = 2`.

use caplab::comonotone::BoundedFn;
use caplab::ellsberg::verify_product_fubini;
use caplab::independence::{Urn, UrnModel, DEFAULT_TOLERANCE};
use caplab::measure::{CredalSet, FiniteSpace, RandomVariable};

fn urn(values: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Urn, Box<dyn std::error::Error>> {
    let space = FiniteSpace::indexed(values.len())?;
    let x = RandomVariable::new(&space, values)?;
    Ok(Urn::new(CredalSet::from_rows(&space, rows)?, x)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let coin = urn(vec![0.0, 1.0], vec![vec![0.5, 0.5]])?;
    let split = urn(
        vec![0.0, 1.0, 2.0],
        vec![vec![0.5, 0.0, 0.5], vec![0.0, 1.0, 0.0]],
    )?;
    let m = UrnModel::product(vec![coin, split])?;
    let phis = (0..m.len())
        .map(|i| BoundedFn::new(&m.range_axis(i), m.ranges()[i].clone()))
        .collect::<Result<Vec<_>, _>>()?;

    let report = verify_product_fubini(&m, &phis, DEFAULT_TOLERANCE)?;
    println!("alpha  joint  iterated  via P'");
    for r in &report.rows {
        println!(
            "{:5}  {:5}  {:8}  {:6}",
            r.alpha, r.joint, r.iterated, r.pprime_route
        );
    }
    println!("holds {} (max gap {:.4})", report.holds, report.max_gap);
    Ok(())
}
