use rainbench_core::least_squares_fit;
use rainbench_core::mars::{backward_prune, forward_pass, gcv_score, MarsFitConfig};
use rainbench_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exhaustive(overfit: &rainbench_core::mars::MarsModel, x: &Matrix, y: &[f64], penalty: f64) -> f64 {
    let n = y.len();
    let k = overfit.terms.len();
    let cols: Vec<Vec<f64>> = overfit.terms.iter()
        .map(|t| (0..n).map(|i| t.basis.eval(x.row(i)).unwrap()).collect())
        .collect();
    let mut best = f64::INFINITY;
    for mask in 0..(1u32 << k) {
        let subset: Vec<usize> = (0..k).filter(|&t| mask & (1 << t) != 0).collect();
        let mut rows = vec![vec![0.0; 1 + subset.len()]; n];
        for i in 0..n {
            rows[i][0] = 1.0;
            for (j, &t) in subset.iter().enumerate() { rows[i][j + 1] = cols[t][i]; }
        }
        let design = Matrix::from_rows(&rows).unwrap();
        let fit = least_squares_fit(&design, y).unwrap();
        let rank = design.cols() - fit.dropped.len();
        let mut knots: Vec<(usize, u64)> = Vec::new();
        for &t in &subset {
            for f in &overfit.terms[t].basis.factors {
                let key = (f.variable, f.knot.to_bits());
                if !knots.contains(&key) { knots.push(key); }
            }
        }
        let c = rank as f64 + penalty * knots.len() as f64;
        let g = gcv_score(fit.mse, n, c);
        if g < best { best = g; }
    }
    best
}

fn main() {
    for (n, cap, noise, label) in [
        (100usize, 8usize, 0.05f64, "n100 cap8 noise.05"),
        (100, 8, 0.1, "n100 cap8 noise.1"),
        (100, 6, 0.1, "n100 cap6 noise.1"),
        (60, 8, 0.05, "n60 cap8 noise.05"),
        (30, 6, 0.05, "n30 cap6 noise.05"),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(555);
        let mut misses = 0;
        let mut worst: f64 = 0.0;
        for _ in 0..25 {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let y: Vec<f64> = rows.iter()
                .map(|r| 1.5 * (r[0] - 0.2f64).max(0.0) - (0.4f64 - r[1]).max(0.0)
                    + noise * rng.random_range(-1.0..1.0))
                .collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let config = MarsFitConfig { max_basis_functions: cap, ..MarsFitConfig::default() };
            let (overfit, _) = forward_pass(&x, &y, &config).unwrap();
            let (pruned, _) = backward_prune(&overfit, &x, &y, &config).unwrap();
            let best = exhaustive(&overfit, &x, &y, config.gcv_penalty);
            let rel = (pruned.diagnostics.fit_gcv - best).abs() / best.abs().max(1e-300);
            if rel > 1e-10 { misses += 1; if rel > worst { worst = rel; } }
        }
        println!("{label}: {misses}/25 misses (worst rel {worst:.3})");
    }
}
