use biped_core::config::ExperimentConfig;
use biped_core::sim::run;
use std::path::Path;

fn main() {
    let mut config = ExperimentConfig::default();
    if let Some(arg) = std::env::args().nth(1) {
        config.simulation.duration = arg.parse().unwrap();
    }
    let setup = config.build(Path::new(".")).unwrap();
    let t0 = std::time::Instant::now();
    let result = run(&setup).unwrap();
    println!("wall time: {:?}", t0.elapsed());
    print!("{}", result.summary_text());
    println!("always_one_foot_down: {}", result.stats.always_one_foot_down);
    let mut min_margin = f64::INFINITY;
    for r in &result.log.rows {
        if r.margin.is_finite() { min_margin = min_margin.min(r.margin); }
    }
    println!("min margin: {min_margin:.4}");
    for (i, r) in result.log.rows.iter().enumerate() {
        if i % 50 == 0 || i + 1 == result.log.rows.len() {
            println!(
                "t={:.3} base=({:+.4},{:.4}) pitch={:+.4} com_x={:+.4} cap={:+.4} margin={:+.4} cop={:+.4} qL=({:+.3},{:+.3},{:+.3}) qR=({:+.3},{:+.3},{:+.3})",
                r.t, r.base.0, r.base.1, r.base.2, r.com.0, r.capture_x, r.margin, r.cop_x,
                r.q[0], r.q[1], r.q[2], r.q[3], r.q[4], r.q[5]
            );
        }
    }
}
