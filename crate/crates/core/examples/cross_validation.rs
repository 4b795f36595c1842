//! Five-fold cross-validation of the graphical-lasso penalty: the full
//! validation-error trace and the selected λ, for random and contiguous folds.
//!
//!     cargo run --release --example cross_validation

use fglasso::dgp::{simulate, DesignKind, PrecisionDesign, SimSpec};
use fglasso::glasso::GlassoConfig;
use fglasso::modelselect::{cross_validate, default_lambda_grid, CvSpec, FoldScheme};
use fglasso::sur::{fit_ols, residual_covariance};

fn main() -> fglasso::error::Result<()> {
    let sim = simulate(&SimSpec::new(PrecisionDesign::new(DesignKind::Ar1, 30), 150, 3))?;
    let grid = default_lambda_grid(&residual_covariance(&fit_ols(&sim.data)?), 15)?;

    for scheme in [FoldScheme::Random, FoldScheme::Contiguous] {
        let spec = CvSpec { scheme, ..CvSpec::new(grid.clone(), 11) };
        let cv = cross_validate(&sim.data, &spec, &GlassoConfig::default())?;
        println!("{scheme:?} folds: best lambda {:.5}", cv.best_lambda);
        for (lambda, mse) in &cv.mse_by_lambda {
            let mark = if *lambda == cv.best_lambda { " <" } else { "" };
            println!("  {lambda:>9.5}  {mse:.6}{mark}");
        }
        for ex in &cv.excluded {
            println!("  excluded {:.5} on fold {}: {}", ex.lambda, ex.fold, ex.reason);
        }
    }
    Ok(())
}
