//! A reduced Monte-Carlo table: l_inf and RMSE (x100) of all four estimators
//! and how often FGLasso beats FGLS, for band and lattice designs.
//!
//!     cargo run --release --example monte_carlo_table -- [reps]

use fglasso::dgp::DesignKind;
use fglasso::glasso::GlassoConfig;
use fglasso::harness::{render_table, run_sweep, Cell, SweepSpec, TableFormat};
use fglasso::modelselect::CvPlan;
use fglasso::sur::Estimator;

fn main() -> fglasso::error::Result<()> {
    let n_reps = std::env::args().nth(1).map_or(10, |s| s.parse().expect("reps"));
    let spec = SweepSpec {
        designs: vec![DesignKind::Band, DesignKind::Lattice4NN],
        cells: vec![Cell { n: 16, t: 100 }, Cell { n: 36, t: 100 }, Cell { n: 144, t: 100 }],
        n_reps,
        estimators: vec![Estimator::Ols, Estimator::Gls, Estimator::Fgls, Estimator::Fglasso],
        cv: CvPlan::default(),
        glasso: GlassoConfig::default(),
        seed: 42,
    };
    let report = run_sweep(&spec)?;
    print!("{}", render_table(&report, TableFormat::Text)?);
    Ok(())
}
