//! Warm-started graphical-lasso path on the residual covariance of a simulated
//! band system: sparsity, objective and KKT residual at each penalty.
//!
//!     cargo run --release --example glasso_path

use fglasso::dgp::{simulate, DesignKind, PrecisionDesign, SimSpec};
use fglasso::glasso::{kkt_residual, regularization_path, GlassoConfig};
use fglasso::modelselect::default_lambda_grid;
use fglasso::sur::{fit_ols, residual_covariance};

fn main() -> fglasso::error::Result<()> {
    let sim = simulate(&SimSpec::new(PrecisionDesign::new(DesignKind::Band, 40), 200, 1))?;
    let sigma_hat = residual_covariance(&fit_ols(&sim.data)?);
    let truth = fglasso::glasso::edge_count(&sim.true_omega);

    let grid = default_lambda_grid(&sigma_hat, 12)?;
    println!("true edges: {truth}");
    println!("{:>10} {:>6} {:>7} {:>12} {:>10} {:>10}", "lambda", "edges", "sweeps", "objective", "kkt", "max err");
    for res in regularization_path(&sigma_hat, &grid, &GlassoConfig::default())? {
        let res = res?;
        let err = res.omega_hat.sub(&sim.true_omega)?.norm_max();
        println!(
            "{:>10.5} {:>6} {:>7} {:>12.5} {:>10.2e} {:>10.4}",
            res.lambda,
            res.edge_count(),
            res.sweeps_used,
            res.objective,
            kkt_residual(&sigma_hat, &res.omega_hat, res.lambda)?,
            err
        );
    }
    Ok(())
}
