//! The `fit` command end to end: export a simulated system as CSV, then fit
//! it from disk exactly as `fglasso fit <dir>` would.
//!
//!     cargo run --release --example fit_from_csv -- [out_dir]

use std::path::PathBuf;

use fglasso::cli::{cmd_fit, export_dataset, FitOptions};
use fglasso::dgp::{simulate, DesignKind, PrecisionDesign, SimSpec};
use fglasso::sur::Estimator;

fn main() {
    let dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("fglasso_fit_demo"), PathBuf::from);
    let sim = simulate(&SimSpec::new(PrecisionDesign::new(DesignKind::Band, 12), 8, 5)).expect("simulate");
    export_dataset(&sim.data, &dir).expect("export");
    println!("wrote y.csv and x_1.csv .. x_12.csv to {}", dir.display());

    // T < N, so FGLS fails with a hint while FGLasso goes through
    for estimator in [Estimator::Fgls, Estimator::Fglasso] {
        let options = FitOptions { estimator, folds: 2, n_lambdas: 8, ..FitOptions::default() };
        match cmd_fit(&dir, &options) {
            Ok(out) => {
                for p in out.outputs {
                    println!("{estimator}: wrote {}", p.display());
                }
            }
            Err(e) => println!("{estimator}: {}", e.to_json()),
        }
    }
}
