//! Runs the desk-scale experiment and prints every 50th cycle.

use coldstart::SimConfig;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let start = std::time::Instant::now();
    let series = coldstart::sim_engine::run_simulation(SimConfig::desk_scale(seed)).expect("valid config");
    for row in series.rows.iter().step_by(50) {
        println!(
            "{:>5} good {:>8.2} bad {:>8.2} liar {:>8.2} new {:>8.2} success {:?} penalties {}",
            row.cycle,
            row.avg_trust_good.unwrap_or(f64::NAN),
            row.avg_trust_bad.unwrap_or(f64::NAN),
            row.avg_trust_liar.unwrap_or(f64::NAN),
            row.avg_trust_newcomer_good.unwrap_or(f64::NAN),
            row.success_rate.map(|s| (s * 1000.0).round() / 1000.0),
            row.penalties
        );
    }
    eprintln!("elapsed {:?}", start.elapsed());
}
