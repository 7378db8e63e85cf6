//! Monte Carlo frequency of the sample mean landing in the mean band, under
//! each nature strategy, for normal draws with uncertain mean and variance.

use caplab::wlln::{frequency_curve, mc_simulate, Strategy, WllnScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for strategy in Strategy::ALL {
        let scenario = WllnScenario {
            name: strategy.name().to_string(),
            mean_lo: -1.0,
            mean_hi: 1.0,
            sigma_lo: 5.0,
            sigma_hi: 10.0,
            n_list: vec![10, 50, 100, 150, 200, 500],
            reps: 100,
            epsilon: 0.0,
            strategy,
            seed: 2025,
        };
        let report = mc_simulate(&scenario)?;
        let curve: Vec<String> = frequency_curve(&report)
            .iter()
            .map(|p| format!("{}:{:.2}", p.n, p.frequency))
            .collect();
        println!("{:>15}  {}", strategy.name(), curve.join("  "));
    }
    Ok(())
}
