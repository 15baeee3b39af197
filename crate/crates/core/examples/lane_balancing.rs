//! Splits uneven edge-task lists over four lanes, with and without
//! overflow balancing.

use hihgnn::schedule::balance_workloads;

fn main() -> hihgnn::Result<()> {
    // One dominant graph and several small ones.
    let sizes = [5000, 300, 800, 120, 2400, 60];
    let ideal = sizes.iter().sum::<usize>().div_ceil(4);

    for balance in [false, true] {
        let plan = balance_workloads(&sizes, 4, 256, balance);
        plan.check()?;
        let spilled: usize = plan.rounds.iter().map(|r| r.spilled).sum();
        let drawn: usize = plan.rounds.iter().map(|r| r.drawn).sum();
        println!(
            "balance={balance:<5} rounds {:>3}, lane totals {:?}, busiest lane {:.2}x ideal, spilled {spilled}, drawn {drawn}",
            plan.rounds.len(),
            plan.lane_totals(),
            plan.max_lane_total() as f64 / ideal as f64,
        );
    }
    Ok(())
}
