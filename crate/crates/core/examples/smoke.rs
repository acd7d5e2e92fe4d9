use rainbench_core::bench::{climatology_baseline, run_benchmark, BenchConfig, DataSource};
use rainbench_core::timeseries::{chrono_split, fit_standardizer, lag_embed, standardize, synth_monsoon};
use std::time::Instant;

fn main() {
    let mut config = BenchConfig::new(DataSource::Synth { years: 87, seed: 7, sigma: 0.3 });
    config.out_dir = "/tmp/bench_smoke".into();
    let t = Instant::now();
    match run_benchmark(&config) {
        Ok(report) => {
            println!("total wall: {:.1}s", t.elapsed().as_secs_f64());
            for m in &report.models {
                println!("{}: train {:.4} test {:.4} iters {:?} ({:.1}s)",
                    m.name, m.train_rmse, m.test_rmse, m.iterations, m.wall_seconds);
            }
            println!("mars: selected {} terms {} knots {} gcv {:.5}",
                report.mars.selected_max_basis, report.mars.terms, report.mars.knots, report.mars.train_gcv);
            for p in &report.sweep { println!("sweep {} -> {:.4}", p.max_basis, p.test_rmse); }
            let series = synth_monsoon(87, 7, 0.3).unwrap();
            let st = fit_standardizer(&series, 0..480).unwrap();
            let z = standardize(&series.values, &st);
            let ds = lag_embed(&z, 12).unwrap();
            let split = chrono_split(&ds, 40).unwrap();
            let clim = climatology_baseline(&ds.month_index, &ds.targets, split.train.clone(), split.test.clone()).unwrap();
            println!("climatology test rmse: {:.4}", clim);
        }
        Err(e) => { eprintln!("error: {e}"); std::process::exit(1); }
    }
}
