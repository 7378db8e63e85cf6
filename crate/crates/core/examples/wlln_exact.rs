//! Exact lower probability that the sample mean of `n` draws from the
//! two-colour urn stays within the band of possible means, widened by `ε`.

use caplab::independence::ellsberg_urn;
use caplab::wlln::{exact_band_probabilities, exp_markov_gap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let urn = ellsberg_urn();
    let eps = 0.25;
    println!("  n  band      mean<=hi+eps  mean>=lo-eps");
    for n in [1, 2, 4, 6, 8, 10, 12] {
        let b = exact_band_probabilities(&urn, n, eps)?;
        println!(
            "{n:3}  {:.6}  {:.6}      {:.6}",
            b.band, b.below_hi, b.above_lo
        );
    }
    let g = exp_markov_gap(&urn, 6, eps, 1.0)?;
    println!("exp Markov at n=6: {:.6} <= {:.6} ({})", g.lhs, g.rhs, g.ok);
    Ok(())
}
