//! Exp-sum grids are slice-comonotone, and their dyadic chain
//! decomposition yields nested upper sets that rebuild the floored function.

use caplab::comonotone::{
    chain_decompose, choquet_via_chain, exp_sum_function, is_slice_comonotonic, BoundedFn,
};
use caplab::independence::{ellsberg_pair, RowSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = ellsberg_pair();
    let axes = m.range_axes();
    let phis = vec![
        BoundedFn::new(&axes[0], vec![0.0, 0.7])?,
        BoundedFn::new(&axes[1], vec![-0.4, 0.3])?,
    ];
    let f = exp_sum_function(&phis)?;
    println!("f = {:?}", f.values());
    println!("slice-comonotone: {}", is_slice_comonotonic(&f)?);

    let chain = chain_decompose(&f, 8)?;
    println!(
        "{} distinct levels, nested {}",
        chain.levels().len(),
        chain.is_nested()
    );
    for level in chain.levels() {
        println!(
            "  alpha {:.4} weight {:.4} set {:?}",
            level.alpha, level.weight, level.members
        );
    }
    let joint = RowSet(m.joint_rows());
    println!(
        "choquet(f_p) = {:.6}, via chain {:.6}",
        joint.choquet(chain.reconstruct().values()),
        choquet_via_chain(&joint, &chain)
    );
    Ok(())
}
