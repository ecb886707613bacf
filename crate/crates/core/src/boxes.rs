//! Two-party, two-setting, two-outcome correlation boxes `P(ab|xy)`.
//!
//! Settings are `off` and `on`. For vertex arithmetic `off` maps to 0 and
//! `on` maps to 1. Tables are stored as `[x][y][a][b]`.

use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Off,
    On,
}

impl Setting {
    pub const BOTH: [Setting; 2] = [Setting::Off, Setting::On];

    pub fn bit(self) -> usize {
        match self {
            Setting::Off => 0,
            Setting::On => 1,
        }
    }

    pub fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Setting::Off
        } else {
            Setting::On
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::Off => "off",
            Setting::On => "on",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One 2x2 cell `[a][b]` of a box for a fixed setting pair.
pub type Cell = [[f64; 2]; 2];

/// A conditional distribution `P(ab|xy)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorrelationBox {
    table: [[Cell; 2]; 2],
}

/// Index of entry `(x, y, a, b)` in the flattened 16-vector.
pub fn flat_index(x: usize, y: usize, a: usize, b: usize) -> usize {
    ((x * 2 + y) * 2 + a) * 2 + b
}

impl CorrelationBox {
    pub fn from_fn(mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut table = [[[[0.0; 2]; 2]; 2]; 2];
        for (x, row) in table.iter_mut().enumerate() {
            for (y, cell) in row.iter_mut().enumerate() {
                for (a, line) in cell.iter_mut().enumerate() {
                    for (b, p) in line.iter_mut().enumerate() {
                        *p = f(x, y, a, b);
                    }
                }
            }
        }
        Self { table }
    }

    /// Builds a box from its four cells.
    pub fn from_cells(off_off: Cell, off_on: Cell, on_off: Cell, on_on: Cell) -> Self {
        Self {
            table: [[off_off, off_on], [on_off, on_on]],
        }
    }

    pub fn from_vector(v: &[f64; 16]) -> Self {
        Self::from_fn(|x, y, a, b| v[flat_index(x, y, a, b)])
    }

    pub fn to_vector(&self) -> [f64; 16] {
        let mut v = [0.0; 16];
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        v[flat_index(x, y, a, b)] = self.table[x][y][a][b];
                    }
                }
            }
        }
        v
    }

    /// `P(ab|xy)` with settings given as bits.
    pub fn p(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.table[x][y][a][b]
    }

    pub fn prob(&self, a: usize, b: usize, x: Setting, y: Setting) -> f64 {
        self.table[x.bit()][y.bit()][a][b]
    }

    pub fn cell(&self, x: Setting, y: Setting) -> Cell {
        self.table[x.bit()][y.bit()]
    }

    pub fn set_cell(&mut self, x: Setting, y: Setting, cell: Cell) {
        self.table[x.bit()][y.bit()] = cell;
    }

    /// Alice's marginal `P_A(a|x)` computed from the cell with Bob's setting `y`.
    pub fn marginal_a(&self, a: usize, x: Setting, y: Setting) -> f64 {
        let c = self.cell(x, y);
        c[a][0] + c[a][1]
    }

    /// Bob's marginal `P_B(b|y)` computed from the cell with Alice's setting `x`.
    pub fn marginal_b(&self, b: usize, x: Setting, y: Setting) -> f64 {
        let c = self.cell(x, y);
        c[0][b] + c[1][b]
    }

    /// Largest deviation of any cell sum from 1.
    pub fn normalization_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in Setting::BOTH {
            for y in Setting::BOTH {
                let c = self.cell(x, y);
                let s = c[0][0] + c[0][1] + c[1][0] + c[1][1];
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }

    pub fn l1_distance(&self, other: &CorrelationBox) -> f64 {
        self.to_vector()
            .iter()
            .zip(other.to_vector().iter())
            .map(|(p, q)| (p - q).abs())
            .sum()
    }

    pub fn max_abs_diff(&self, other: &CorrelationBox) -> f64 {
        self.to_vector()
            .iter()
            .zip(other.to_vector().iter())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    }

    /// Swaps the roles of Alice and Bob: `P'(ab|xy) = P(ba|yx)`.
    pub fn swap_parties(&self) -> CorrelationBox {
        CorrelationBox::from_fn(|x, y, a, b| self.table[y][x][b][a])
    }

    /// Convex (or arbitrary linear) combination of boxes.
    pub fn mix<'a>(terms: impl IntoIterator<Item = (f64, &'a CorrelationBox)>) -> CorrelationBox {
        let mut acc = [0.0; 16];
        for (w, bx) in terms {
            for (slot, v) in acc.iter_mut().zip(bx.to_vector()) {
                *slot += w * v;
            }
        }
        CorrelationBox::from_vector(&acc)
    }

    /// Parses the JSON box format.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("box serialization is infallible")
    }

    pub fn validate_entries(&self) -> Result<()> {
        for v in self.to_vector() {
            if !v.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "box entry {v} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for CorrelationBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in Setting::BOTH {
            for y in Setting::BOTH {
                let c = self.cell(x, y);
                writeln!(
                    f,
                    "({x:>3},{y:>3})  P00={:.6}  P01={:.6}  P10={:.6}  P11={:.6}",
                    c[0][0], c[0][1], c[1][0], c[1][1]
                )?;
            }
        }
        Ok(())
    }
}

// JSON layout: {"off": {"off": [[P00, P01], [P10, P11]], "on": ...}, "on": {...}}
// with the outer key Alice's setting x, the inner key Bob's setting y and
// the 2x2 array indexed [a][b].

#[derive(Serialize, Deserialize)]
struct BySetting<T> {
    off: T,
    on: T,
}

impl Serialize for CorrelationBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut outer = serializer.serialize_map(Some(2))?;
        for x in Setting::BOTH {
            let inner = BySetting {
                off: self.cell(x, Setting::Off),
                on: self.cell(x, Setting::On),
            };
            outer.serialize_entry(x.name(), &inner)?;
        }
        outer.end()
    }
}

impl<'de> Deserialize<'de> for CorrelationBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw: BySetting<BySetting<Cell>> = BySetting::deserialize(deserializer)?;
        let bx = CorrelationBox::from_cells(raw.off.off, raw.off.on, raw.on.off, raw.on.on);
        if bx.to_vector().iter().any(|v| !v.is_finite()) {
            return Err(de::Error::custom("non-finite box entry"));
        }
        Ok(bx)
    }
}
