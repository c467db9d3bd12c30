//! The three aggregation rules on a fast and a slow local model.
//!
//! ```text
//! cargo run --example aggregation_rules
//! ```

use hsgd::aggregation::{aggregate, aggregation_weights, AggregationRule};
use hsgd::math::ParamVector;

fn main() -> hsgd::Result<()> {
    let start = ParamVector::new(vec![1.0, 1.0])?;
    // the fast worker (32 steps) travelled far, the slow one (1 step) barely moved
    let fast = ParamVector::new(vec![0.0, -2.0])?;
    let slow = ParamVector::new(vec![0.9, 0.8])?;
    let taus = [32, 1];
    for rule in [AggregationRule::Balanced, AggregationRule::TauWeighted, AggregationRule::FedNova] {
        let w = aggregation_weights(rule, &taus)?;
        let out = aggregate(rule, &[fast.clone(), slow.clone()], &taus, &start)?;
        println!("{:<13} weights fast {:.4} slow {:.4} -> {:?}", rule.to_string(), w[0], w[1], out.as_slice());
    }
    Ok(())
}
