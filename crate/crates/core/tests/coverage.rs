use sfbreak::deltas::delta_set_at;
use sfbreak::frontier::{b_of_c, point_efficiency, soft_max};
use sfbreak::sampling::simulate_dataset;
use sfbreak::{bootstrap_frontier, fit_mle, BootstrapConfig, Error, OptimOptions, Theta};

// Pointwise 95% percentile band at c = 0.05 against the soft frontier of the
// data-generating θ, over 100 simulated samples.
#[test]
fn percentile_band_covers_true_soft_frontier() {
    let truth = Theta::new(vec![1.0, 0.5], 0.5, 0.3, 0.6).unwrap();
    let (u, c, rho) = (0.0, 0.05, 10.0);
    let d_true = delta_set_at(&truth, u).unwrap();
    let e0 = point_efficiency(&d_true) - 0.05;
    let target = soft_max(b_of_c(&d_true, c, e0).unwrap(), rho);

    let mut covered = 0;
    let mut usable = 0;
    for rep in 0..100u64 {
        let data = simulate_dataset(&truth, 500, 10_000 + rep).unwrap();
        let Ok(fit) = fit_mle(&data, &OptimOptions::default()) else { continue };
        if !fit.converged {
            continue;
        }
        let config = BootstrapConfig { replications: 100, seed: rep, rho, ..BootstrapConfig::default() };
        match bootstrap_frontier(&data, &fit, u, e0, &[c], &config) {
            Ok(bands) => {
                usable += 1;
                if bands.lower_band[0] <= target && target <= bands.upper_band[0] {
                    covered += 1;
                }
            }
            Err(Error::BootstrapFailures { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
    println!("covered {covered} of {usable} usable repetitions");
    assert!(covered >= 80, "covered {covered} of 100 (usable {usable})");
}
