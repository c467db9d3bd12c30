//! Which pool multipliers λ fit in the dataset for a few (τ_F, τ_S) pairs,
//! and how large the pool gets.
//!
//! ```text
//! cargo run --example lambda_sweep
//! ```

use hsgd::data::{pool_size, slow_total};
use hsgd::error::Error;

fn main() -> hsgd::Result<()> {
    let n = 50_000;
    let lambdas = [2.0, 4.0, 8.0, 16.0, 32.0];
    print!("{:>10}", "(τ_F,τ_S)");
    for l in lambdas {
        print!("{:>9}", format!("λ={l}"));
    }
    println!();
    for (tau_f, tau_s) in [(32, 16), (32, 4), (32, 1)] {
        let alpha = tau_f as f64 / tau_s as f64;
        print!("{:>10}", format!("({tau_f},{tau_s})"));
        for l in lambdas {
            match pool_size(n, 1, 1, alpha, l) {
                Ok(p) => print!("{p:>9}"),
                Err(Error::InvalidLambda { .. }) => print!("{:>9}", "NA"),
                Err(e) => return Err(e),
            }
        }
        println!("   slow share {}", slow_total(n, 1, 1, alpha)?);
    }
    Ok(())
}
