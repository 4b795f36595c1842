//! True precision-matrix designs and the simulated SUR data-generating process.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix};
use crate::rng::StreamRng;
use crate::sur::SurDataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DesignKind {
    /// Ω_ii = 1, first off-diagonal 0.6, second 0.3.
    #[serde(rename = "band")]
    Band,
    /// √N×√N grid, Ω_ij = 0.25 between horizontal/vertical neighbours.
    #[serde(rename = "lattice4nn")]
    Lattice4NN,
    /// Ω_ij = 0.6^|i−j|.
    #[serde(rename = "ar1")]
    Ar1,
    /// Ω = Σ⁻¹ with Σ tridiagonal (1 on the diagonal, 0.2 beside it).
    #[serde(rename = "dense")]
    DenseFromBandedSigma,
}

impl DesignKind {
    pub const ALL: [DesignKind; 4] =
        [DesignKind::Band, DesignKind::Lattice4NN, DesignKind::Ar1, DesignKind::DenseFromBandedSigma];

    pub fn key(self) -> &'static str {
        match self {
            DesignKind::Band => "band",
            DesignKind::Lattice4NN => "lattice4nn",
            DesignKind::Ar1 => "ar1",
            DesignKind::DenseFromBandedSigma => "dense",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DesignKind::Band => "Band",
            DesignKind::Lattice4NN => "Four-Nearest Neighbor Lattice",
            DesignKind::Ar1 => "AR(1)",
            DesignKind::DenseFromBandedSigma => "Dense",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            DesignKind::Band => 0,
            DesignKind::Lattice4NN => 1,
            DesignKind::Ar1 => 2,
            DesignKind::DenseFromBandedSigma => 3,
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "band" => Ok(DesignKind::Band),
            "lattice4nn" | "lattice" => Ok(DesignKind::Lattice4NN),
            "ar1" => Ok(DesignKind::Ar1),
            "dense" => Ok(DesignKind::DenseFromBandedSigma),
            other => Err(Error::InvalidArgument(format!(
                "unknown design {other:?} (expected band, lattice4nn, ar1 or dense)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionDesign {
    pub kind: DesignKind,
    pub n: usize,
}

impl PrecisionDesign {
    pub fn new(kind: DesignKind, n: usize) -> Self {
        Self { kind, n }
    }
}

fn lattice_side(n: usize) -> Option<usize> {
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}

/// Builds the true precision matrix of a design.
pub fn build_precision(design: &PrecisionDesign) -> Result<Matrix> {
    let n = design.n;
    if n == 0 {
        return Err(Error::InvalidArgument("design size must be positive".into()));
    }
    let omega = match design.kind {
        DesignKind::Band => Matrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 1.0,
            1 => 0.6,
            2 => 0.3,
            _ => 0.0,
        }),
        DesignKind::Lattice4NN => {
            let side = lattice_side(n).ok_or(Error::NotPerfectSquare { n })?;
            Matrix::from_fn(n, n, |i, j| {
                let (ri, ci) = (i / side, i % side);
                let (rj, cj) = (j / side, j % side);
                if i == j {
                    1.0
                } else if ri.abs_diff(rj) + ci.abs_diff(cj) == 1 {
                    0.25
                } else {
                    0.0
                }
            })
        }
        DesignKind::Ar1 => Matrix::from_fn(n, n, |i, j| 0.6f64.powi(i.abs_diff(j) as i32)),
        DesignKind::DenseFromBandedSigma => {
            let sigma = banded_sigma(n);
            cholesky(&sigma)?.inverse()
        }
    };
    cholesky(&omega)?;
    Ok(omega)
}

fn banded_sigma(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.2,
        _ => 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub design: PrecisionDesign,
    pub n_periods: usize,
    pub k_per_equation: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(design: PrecisionDesign, n_periods: usize, seed: u64) -> Self {
        Self { design, n_periods, k_per_equation: 1, seed }
    }
}

/// A simulated system together with the truth it was drawn from.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub data: SurDataset,
    pub true_beta: Vec<f64>,
    pub true_omega: Matrix,
}

/// Seed of one Monte-Carlo replication, fixed by its coordinates alone so
/// results do not depend on scheduling.
pub fn replication_seed(master: u64, kind: DesignKind, n: usize, t: usize, rep: usize) -> u64 {
    crate::rng::derive_seed(master, &[kind.index(), n as u64, t as u64, rep as u64])
}

/// Draws X ~ N(0,1) entries, β ~ U[−1,1] and U_t ~ N(0, Ω⁻¹), in that order.
pub fn simulate(spec: &SimSpec) -> Result<Simulation> {
    if spec.n_periods < 2 {
        return Err(Error::InvalidArgument(format!("T must be >= 2, got {}", spec.n_periods)));
    }
    if spec.k_per_equation == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    let omega = build_precision(&spec.design)?;
    let sigma = match spec.design.kind {
        DesignKind::DenseFromBandedSigma => banded_sigma(spec.design.n),
        _ => cholesky(&omega)?.inverse(),
    };
    let chol = cholesky(&sigma)?;
    let l = chol.lower();
    let (n, t, k) = (spec.design.n, spec.n_periods, spec.k_per_equation);
    let mut rng = StreamRng::new(spec.seed);

    let x_blocks: Vec<Matrix> = (0..n)
        .map(|_| Matrix::from_fn(t, k, |_, _| rng.standard_normal()))
        .collect();
    let beta: Vec<f64> = (0..n * k).map(|_| rng.uniform_range(-1.0, 1.0)).collect();

    let mut y = Matrix::zeros(n, t);
    let mut z = vec![0.0; n];
    for s in 0..t {
        z.iter_mut().for_each(|v| *v = rng.standard_normal());
        for i in 0..n {
            let u: f64 = l.row(i)[..=i].iter().zip(&z).map(|(a, b)| a * b).sum();
            let xb: f64 = x_blocks[i].row(s).iter().zip(&beta[i * k..(i + 1) * k]).map(|(a, b)| a * b).sum();
            y[(i, s)] = xb + u;
        }
    }
    Ok(Simulation { data: SurDataset::new(x_blocks, y)?, true_beta: beta, true_omega: omega })
}
