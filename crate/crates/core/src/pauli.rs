//! Pauli matrices, Bloch coordinates and k-local Pauli observables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::{Ket2, Mat2, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    /// Position in `(x, y, z)` order.
    pub fn index(self) -> usize {
        match self {
            PauliAxis::X => 0,
            PauliAxis::Y => 1,
            PauliAxis::Z => 2,
        }
    }

    pub fn matrix(self) -> Mat2 {
        match self {
            PauliAxis::X => Mat2::new(ZERO, ONE, ONE, ZERO),
            PauliAxis::Y => Mat2::new(ZERO, -I, I, ZERO),
            PauliAxis::Z => Mat2::new(ONE, ZERO, ZERO, -ONE),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            PauliAxis::X => 'x',
            PauliAxis::Y => 'y',
            PauliAxis::Z => 'z',
        }
    }
}

impl FromStr for PauliAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(PauliAxis::X),
            "y" | "Y" => Ok(PauliAxis::Y),
            "z" | "Z" => Ok(PauliAxis::Z),
            _ => Err(invalid(format!("unknown Pauli axis `{s}`"))),
        }
    }
}

pub fn identity2() -> Mat2 {
    Mat2::identity()
}

/// Bloch coordinates `(x0, r_x, r_y, r_z)` of the Hermitian part of `m`, so
/// that `m = x0·I + r·σ` when `m` is Hermitian.
pub fn bloch_coords(m: &Mat2) -> [f64; 4] {
    let x0 = 0.5 * (m[(0, 0)] + m[(1, 1)]).re;
    let rx = 0.5 * (m[(0, 1)] + m[(1, 0)]).re;
    // tr(σ_y m) = i·m01 - i·m10
    let ry = 0.5 * (I * m[(0, 1)] - I * m[(1, 0)]).re;
    let rz = 0.5 * (m[(0, 0)] - m[(1, 1)]).re;
    [x0, rx, ry, rz]
}

/// Inverse of [`bloch_coords`].
pub fn from_bloch(c: [f64; 4]) -> Mat2 {
    let [x0, rx, ry, rz] = c;
    Mat2::new(
        C64::new(x0 + rz, 0.0),
        C64::new(rx, -ry),
        C64::new(rx, ry),
        C64::new(x0 - rz, 0.0),
    )
}

/// Unit ket whose Bloch vector is the unit vector `n`.
///
/// The two branches keep the poles exact: `(0,0,1)` gives `|0⟩` and
/// `(0,0,-1)` gives `|1⟩` with no rounding residue.
pub fn ket_along(n: [f64; 3]) -> Ket2 {
    let [nx, ny, nz] = n;
    if nz >= 0.0 {
        let a = ((1.0 + nz) / 2.0).sqrt();
        let d = (2.0 * (1.0 + nz)).sqrt();
        Ket2::new(C64::new(a, 0.0), C64::new(nx / d, ny / d))
    } else {
        let b = ((1.0 - nz) / 2.0).sqrt();
        let d = (2.0 * (1.0 - nz)).sqrt();
        Ket2::new(C64::new(nx / d, -ny / d), C64::new(b, 0.0))
    }
}

/// Projector `|v⟩⟨v|`.
pub fn projector(v: &Ket2) -> Mat2 {
    v * v.adjoint()
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &Mat2, b: &Mat2) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A k-local Pauli string with a real coefficient, e.g. `0.5·σ_z^0 σ_z^3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliObservable {
    coefficient: f64,
    support: Vec<(usize, PauliAxis)>,
}

impl PauliObservable {
    /// Sites must be distinct and the support non-empty. The support is kept
    /// sorted by site.
    pub fn new(coefficient: f64, mut support: Vec<(usize, PauliAxis)>) -> Result<Self> {
        if support.is_empty() {
            return Err(invalid("a Pauli observable needs at least one site"));
        }
        if !coefficient.is_finite() {
            return Err(invalid("observable coefficient must be finite"));
        }
        support.sort_by_key(|&(site, _)| site);
        if support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(invalid("observable sites must be distinct"));
        }
        Ok(Self {
            coefficient,
            support,
        })
    }

    /// `σ_α^i σ_α^j` with unit coefficient.
    pub fn two_point(i: usize, j: usize, axis: PauliAxis) -> Result<Self> {
        Self::new(1.0, vec![(i, axis), (j, axis)])
    }

    pub fn single(site: usize, axis: PauliAxis) -> Self {
        Self {
            coefficient: 1.0,
            support: vec![(site, axis)],
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn support(&self) -> &[(usize, PauliAxis)] {
        &self.support
    }

    pub fn locality(&self) -> usize {
        self.support.len()
    }

    /// Highest site index touched.
    pub fn max_site(&self) -> usize {
        self.support.last().map(|&(s, _)| s).unwrap_or(0)
    }

    pub(crate) fn check_support(&self, n: usize) -> Result<()> {
        if self.max_site() >= n {
            return Err(invalid(format!(
                "observable touches site {} but the state has {n} qubits",
                self.max_site()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for PauliObservable {
    /// Formats the support as e.g. `z0 z3`; the coefficient is omitted.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (site, axis)) in self.support.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}{}", axis.symbol(), site)?;
        }
        Ok(())
    }
}

impl FromStr for PauliObservable {
    type Err = Error;

    /// Parses `z0 z3` or `x1,y2` (unit coefficient).
    fn from_str(s: &str) -> Result<Self> {
        let support = s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                let (axis, site) = t.split_at(1);
                let site = site
                    .parse::<usize>()
                    .map_err(|_| invalid(format!("bad Pauli factor `{t}`")))?;
                Ok((site, axis.parse()?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(1.0, support)
    }
}

/// `P|b⟩ = phase(b)·|b ^ flip⟩` for a Pauli string `P`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PauliMasks {
    pub flip: usize,
    pub sign: usize,
    pub y_count: u32,
}

impl PauliMasks {
    pub fn new(n: usize, support: &[(usize, PauliAxis)]) -> Self {
        let mut m = PauliMasks {
            flip: 0,
            sign: 0,
            y_count: 0,
        };
        for &(site, axis) in support {
            let bit = 1usize << (n - 1 - site);
            match axis {
                PauliAxis::X => m.flip |= bit,
                PauliAxis::Y => {
                    m.flip |= bit;
                    m.sign |= bit;
                    m.y_count += 1;
                }
                PauliAxis::Z => m.sign |= bit,
            }
        }
        m
    }

    /// Phase acquired by basis state `b`: `i^{#Y}·(-1)^{popcount(b & sign)}`.
    pub fn phase(&self, b: usize) -> C64 {
        let base = match self.y_count % 4 {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        };
        if (b & self.sign).count_ones() % 2 == 1 {
            -base
        } else {
            base
        }
    }

    /// Real phase; only valid when the number of `Y` factors is even.
    pub fn real_phase(&self, b: usize) -> f64 {
        let base = if self.y_count % 4 == 0 { 1.0 } else { -1.0 };
        if (b & self.sign).count_ones() % 2 == 1 {
            -base
        } else {
            base
        }
    }
}
