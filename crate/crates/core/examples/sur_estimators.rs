//! The four estimators on one simulated system, scored against the truth.
//!
//!     cargo run --release --example sur_estimators -- [N] [T] [design]

use fglasso::dgp::{simulate, DesignKind, PrecisionDesign, SimSpec};
use fglasso::harness::beta_errors;
use fglasso::modelselect::{fit_fglasso_cv, CvPlan};
use fglasso::glasso::GlassoConfig;
use fglasso::sur::{fit_fgls, fit_gls, fit_ols};

fn main() -> fglasso::error::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(30, |s| s.parse().expect("N"));
    let t: usize = args.get(1).map_or(100, |s| s.parse().expect("T"));
    let design: DesignKind = args
        .get(2)
        .map_or(DesignKind::Band, |s| serde_json::from_value(serde_json::json!(s)).expect("design"));

    let sim = simulate(&SimSpec::new(PrecisionDesign::new(design, n), t, 7))?;
    let cv = fit_fglasso_cv(&sim.data, &CvPlan::default(), 7, &GlassoConfig::default())?;
    let fits = [
        Ok(fit_ols(&sim.data)?),
        Ok(fit_gls(&sim.data, &sim.true_omega)?),
        fit_fgls(&sim.data),
        Ok(cv.fit),
    ];
    println!("{} design, N={n}, T={t}; CV picked lambda = {:.4}", design.label(), cv.cv.best_lambda);
    for (name, fit) in ["OLS", "GLS", "FGLS", "FGLasso"].into_iter().zip(fits) {
        match fit {
            Ok(fit) => {
                let (linf, rmse) = beta_errors(&fit.beta_hat, &sim.true_beta);
                println!("{name:>8}  l_inf x100 {:>7.2}  RMSE x100 {:>6.2}", linf * 100.0, rmse * 100.0);
            }
            Err(e) => println!("{name:>8}  unavailable: {e}"),
        }
    }
    Ok(())
}
