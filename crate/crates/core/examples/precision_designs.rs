//! The four simulation designs: sparsity, spectrum bounds and incoherence.
//!
//!     cargo run --release --example precision_designs

use fglasso::dgp::{build_precision, DesignKind, PrecisionDesign};
use fglasso::diagnostics::incoherence;
use fglasso::glasso::edge_count;
use fglasso::linalg::cholesky;

fn main() -> fglasso::error::Result<()> {
    println!("{:<32} {:>4} {:>6} {:>9} {:>12} {:>8}", "design", "N", "edges", "logdet", "incoherence", "alpha");
    for kind in DesignKind::ALL {
        for n in [9, 25, 49] {
            let omega = build_precision(&PrecisionDesign::new(kind, n))?;
            let logdet = cholesky(&omega)?.log_det();
            let inc = incoherence(&omega)?;
            println!(
                "{:<32} {:>4} {:>6} {:>9.3} {:>12.4} {:>8.4}",
                kind.label(),
                n,
                edge_count(&omega),
                logdet,
                inc.incoherence,
                inc.alpha
            );
        }
    }
    Ok(())
}
