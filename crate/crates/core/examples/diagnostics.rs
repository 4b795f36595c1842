//! Small versions of the diagnostic experiments: the precision error rate in
//! T, interval coverage, and support recovery at the cross-validated λ.
//!
//!     cargo run --release --example diagnostics

use fglasso::dgp::{DesignKind, PrecisionDesign};
use fglasso::diagnostics::{
    coverage_experiment, rate_experiment, rate_slope, recovery_experiment, CoverageExperimentSpec,
    RateExperimentSpec, RecoveryExperimentSpec, ReplicationSettings,
};
use fglasso::glasso::GlassoConfig;
use fglasso::modelselect::CvPlan;

fn main() -> fglasso::error::Result<()> {
    let settings =
        |n_reps| ReplicationSettings { n_reps, seed: 1, cv: CvPlan::default(), glasso: GlassoConfig::default() };

    let rate = RateExperimentSpec {
        design: DesignKind::Band,
        sizes: vec![10, 20],
        t_grid: vec![100, 200, 400, 800],
        settings: settings(5),
    };
    let cells = rate_experiment(&rate)?;
    println!("{:>4} {:>5} {:>12} {:>12}", "N", "T", "max err", "gap vs GLS");
    for c in &cells {
        println!("{:>4} {:>5} {:>12.4} {:>12.5}", c.n, c.t, c.omega_error_mean, c.beta_gap_mean);
    }
    for n in &rate.sizes {
        println!("N={n}: log-log slope {:.3}", rate_slope(&cells, *n).unwrap_or(f64::NAN));
    }

    let cov = coverage_experiment(&CoverageExperimentSpec {
        design: PrecisionDesign::new(DesignKind::Band, 10),
        n_periods: 200,
        nominal_level: 0.95,
        settings: settings(100),
    })?;
    println!("coverage at 95%: true-omega SEs {:.3}, plug-in SEs {:.3}", cov.coverage_true_omega, cov.coverage_plugin);

    let rec = recovery_experiment(&RecoveryExperimentSpec {
        design: PrecisionDesign::new(DesignKind::Band, 20),
        n_periods: 400,
        strong_threshold: 0.3,
        settings: settings(5),
    })?;
    println!(
        "recovery: false-positive rate {:.3}, all strong edges kept in {:.0}% of replications",
        rec.false_positive_rate_mean,
        rec.all_strong_retained_fraction * 100.0
    );
    Ok(())
}
