// Scratch harness used while pinning acceptance test constants. Not shipped.

use std::time::Instant;

use riesz_core::*;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn main() {
    // --- criterion 6 prototype: lasso vs rayleigh-l1 gap ---
    let cfg = AteDgpConfig {
        n: 500,
        p: 3,
        tau: 1.0,
        propensity_coefs: vec![0.8, -0.5, 0.3],
        propensity_clip: 0.05,
        outcome_coefs: vec![1.0, 1.0, 1.0],
        noise_sd: 1.0,
        seed: 0,
    };
    let data = generate_ate_dgp(&cfg).unwrap();
    let builder = FeatureBuilder::PolynomialWithTreatment { degree: 3 };
    let features = build_features(&data, &builder).unwrap();
    println!("criterion6 d = {}", features.dim());
    let g = gram(&features);
    let m = basis_moments(&data, &FunctionalSpec::AteDifference, &builder).unwrap();
    println!("cond = {:.3e}", condition_number(&g).unwrap());
    let lasso = solve_lasso(&g, &m, 0.1).unwrap();
    let ray = solve_rayleigh(&g, &m, 0.1).unwrap();
    let rep = equivalence_report(&lasso, &ray).unwrap();
    println!(
        "lasso vs rayleigh-l1: max_abs={:.4e} max_rel={:.4e} lasso_iters={} ray_iters={}",
        rep.max_abs_diff, rep.max_rel_diff, lasso.iterations, ray.iterations
    );
    let resid = &g.values.dot(&ray.theta) - &m.values;
    let _ = resid;
    println!(
        "rayleigh constraint residual: {:.3e}",
        (ray.gnorm_sq - ray.theta.dot(&m.values)).abs() / ray.gnorm_sq.max(1e-300)
    );

    // --- criterion 7 prototype: medians over 50 reps ---
    let t7 = Instant::now();
    let basis7 = FeatureBuilder::PolynomialWithTreatment { degree: 3 };
    for &n in &[250usize, 1000, 4000] {
        let mut mses = Vec::new();
        let mut west = Vec::new();
        for r in 0..50u64 {
            let d = generate_ate_dgp(&AteDgpConfig {
                n,
                p: 1,
                tau: 1.0,
                propensity_coefs: vec![1.0],
                propensity_clip: 0.05,
                outcome_coefs: vec![1.0],
                noise_sd: 1.0,
                seed: 1000 + r,
            })
            .unwrap();
            let phi = build_features(&d, &basis7).unwrap();
            let gg = gram(&phi);
            let mm = basis_moments(&d, &FunctionalSpec::AteDifference, &basis7).unwrap();
            let fit = solve_riesz_loss(&gg, &mm, 0.0).unwrap();
            let alpha = fit.predict(&phi).unwrap();
            mses.push(rr_mse(&alpha, d.oracle_alpha().unwrap()).unwrap());
            let y = d.outcome().unwrap();
            west.push(alpha.dot(y) / d.n() as f64);
        }
        let sd = {
            let mean = west.iter().sum::<f64>() / west.len() as f64;
            (west.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (west.len() - 1) as f64).sqrt()
        };
        println!(
            "n={n}: median rr_mse={:.5e} median west={:.4} sd={:.4} 3se={:.4}",
            median(mses.clone()),
            median(west.clone()),
            sd,
            3.0 * sd / (west.len() as f64).sqrt()
        );
    }
    println!("criterion7 time: {:?}", t7.elapsed());

    // --- criterion 9 prototype: neural vs closed form ---
    let dgp = |s: u64, n: usize| {
        generate_ate_dgp(&AteDgpConfig {
            n,
            p: 1,
            tau: 1.0,
            propensity_coefs: vec![0.0],
            propensity_clip: 0.05,
            outcome_coefs: vec![1.0],
            noise_sd: 1.0,
            seed: s,
        })
        .unwrap()
    };
    let spec = FunctionalSpec::AteDifference;
    let b = FeatureBuilder::PolynomialWithTreatment { degree: 1 };
    let test_data = dgp(99_999, 10_000);
    let phi_test = build_features(&test_data, &b).unwrap();
    let oracle_test = test_data.oracle_alpha().unwrap();

    for (hidden, lr, epochs) in [
        (vec![3usize], 0.1f64, 2000usize),
        (vec![4], 0.1, 2000),
        (vec![4], 0.05, 2000),
        (vec![8], 0.1, 2000),
    ] {
        let t9 = Instant::now();
        let mut ratios_riesz = Vec::new();
        let mut ratios_ray = Vec::new();
        let mut cf_mses = Vec::new();
        let mut nn_mses = Vec::new();
        let mut nnray_mses = Vec::new();
        for seed in 0..10u64 {
            let train_data = dgp(seed, 2000);
            let phi = build_features(&train_data, &b).unwrap();
            let gg = gram(&phi);
            let mm = basis_moments(&train_data, &spec, &b).unwrap();
            let cf = solve_riesz_loss(&gg, &mm, 0.0).unwrap();
            let cf_alpha = cf.predict(&phi_test).unwrap();
            let cf_mse = rr_mse(&cf_alpha, oracle_test).unwrap();
            cf_mses.push(cf_mse);

            let mlp = neural::MlpConfig {
                input_dim: 2,
                hidden_widths: hidden.clone(),
                activation: neural::Activation::Tanh,
                init_seed: seed,
            };
            let tcfg = neural::TrainConfig {
                learning_rate: lr,
                max_epochs: epochs,
                ..neural::TrainConfig::default()
            };
            let nn = train_riesz_loss(&train_data, &spec, &mlp, &tcfg).unwrap();
            let nn_mse = rr_mse(&predict_alpha(&nn, &test_data).unwrap(), oracle_test).unwrap();
            nn_mses.push(nn_mse);
            ratios_riesz.push(nn_mse / cf_mse);

            let nn2 = train_rayleigh_constrained(&train_data, &spec, &mlp, &tcfg).unwrap();
            let nn2_mse = rr_mse(&predict_alpha(&nn2, &test_data).unwrap(), oracle_test).unwrap();
            nnray_mses.push(nn2_mse);
            ratios_ray.push(nn2_mse / cf_mse);
        }
        println!(
            "hidden={hidden:?} lr={lr} epochs={epochs}: median cf={:.4e} nn={:.4e} ({:.3}x) nnray={:.4e} ({:.3}x) | ratio medians {:.3}/{:.3} | {:?}",
            median(cf_mses.clone()),
            median(nn_mses.clone()),
            median(nn_mses) / median(cf_mses.clone()),
            median(nnray_mses.clone()),
            median(nnray_mses) / median(cf_mses),
            median(ratios_riesz),
            median(ratios_ray),
            t9.elapsed()
        );
    }

    // --- criterion 10 prototype ---
    let t10 = Instant::now();
    let mut means = Vec::new();
    for seed in 0..20u64 {
        let d = generate_shift_dgp(&ShiftDgpConfig {
            n_source: 2000,
            n_target: 2000,
            mean_shift: 1.0,
            seed,
        })
        .unwrap();
        let b = FeatureBuilder::Polynomial { degree: 2 };
        let phi = build_features(&d, &b).unwrap();
        let gg = gram(&phi);
        let mm = basis_moments(&d, &FunctionalSpec::ShiftMean, &b).unwrap();
        let fit = solve_riesz_loss(&gg, &mm, 0.0).unwrap();
        let alpha = fit.predict(&phi).unwrap();
        means.push(alpha.sum() / d.n() as f64);
    }
    println!(
        "criterion10: median mean(alpha)={:.4} (min {:.4}, max {:.4}) time {:?}",
        median(means.clone()),
        means.iter().cloned().fold(f64::INFINITY, f64::min),
        means.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        t10.elapsed()
    );
}
