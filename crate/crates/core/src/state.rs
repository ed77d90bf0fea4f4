//! The ten-field state vector and initial-data presets.

use std::f64::consts::PI;
use std::path::Path;

use thiserror::Error;

use crate::grid::{write_field_csv, Field, Grid, GridError};

/// Components of the state, in storage order.
///
/// `Z*` are in-plane rotation rates, `Y` the deflection rate, `Theta` the
/// temperature (rate of thermal displacement `Tau`) and `P` the chemical
/// potential (rate of `Wp`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateField {
    V1,
    V2,
    Z1,
    Z2,
    W,
    Y,
    Tau,
    Theta,
    Wp,
    P,
}

impl StateField {
    pub const ALL: [StateField; 10] = [
        StateField::V1,
        StateField::V2,
        StateField::Z1,
        StateField::Z2,
        StateField::W,
        StateField::Y,
        StateField::Tau,
        StateField::Theta,
        StateField::Wp,
        StateField::P,
    ];

    /// Displacement-like fields (v1, v2, w, τ, ℘).
    pub const POSITIONS: [StateField; 5] = [
        StateField::V1,
        StateField::V2,
        StateField::W,
        StateField::Tau,
        StateField::Wp,
    ];

    /// Their rates (z1, z2, y, θ, P), paired index-wise with [`Self::POSITIONS`].
    pub const RATES: [StateField; 5] = [
        StateField::Z1,
        StateField::Z2,
        StateField::Y,
        StateField::Theta,
        StateField::P,
    ];

    pub fn slot(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            StateField::V1 => "v1",
            StateField::V2 => "v2",
            StateField::Z1 => "z1",
            StateField::Z2 => "z2",
            StateField::W => "w",
            StateField::Y => "y",
            StateField::Tau => "tau",
            StateField::Theta => "theta",
            StateField::Wp => "wp",
            StateField::P => "P",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        StateField::ALL.iter().copied().find(|f| f.name() == s)
    }

    pub fn is_rate(self) -> bool {
        StateField::RATES.contains(&self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    grid: Grid,
    time: f64,
    data: Vec<f64>,
}

impl State {
    pub fn zeros(grid: Grid) -> Self {
        State {
            grid,
            time: 0.0,
            data: vec![0.0; 10 * grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, time: f64, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != 10 * grid.len() {
            return Err(GridError::LengthMismatch {
                expected: 10 * grid.len(),
                got: data.len(),
            });
        }
        Ok(State { grid, time, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn field(&self, f: StateField) -> &[f64] {
        let n = self.grid.len();
        &self.data[f.slot() * n..(f.slot() + 1) * n]
    }

    pub fn field_mut(&mut self, f: StateField) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[f.slot() * n..(f.slot() + 1) * n]
    }

    pub fn to_field(&self, f: StateField) -> Field {
        Field::from_values(self.grid, self.field(f).to_vec()).expect("state holds finite values")
    }

    pub fn set_field(&mut self, f: StateField, values: &Field) -> Result<(), GridError> {
        if values.grid() != &self.grid {
            return Err(GridError::Mismatch);
        }
        self.field_mut(f).copy_from_slice(values.values());
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Flips the sign of every rate field (the t → −t reflection).
    pub fn reflect_rates(&mut self) {
        for f in StateField::RATES {
            self.field_mut(f).iter_mut().for_each(|v| *v = -*v);
        }
    }

    pub fn write_field_csv(&self, f: StateField, path: &Path) -> Result<(), GridError> {
        write_field_csv(&self.grid, self.field(f), path)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitialError {
    #[error("bump width must be positive, got {0}")]
    InvalidWidth(f64),
    #[error("mode numbers must be at least 1")]
    InvalidMode,
    #[error("amplitude must be finite")]
    NonFinite,
}

/// Initial-data presets; every unlisted field starts at zero.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Zero,
    /// amplitude · sin(mπx/Lx) sin(nπy/Ly)
    SineMode {
        field: StateField,
        amplitude: f64,
        modes: (u32, u32),
    },
    /// amplitude · exp(−|x − c|²/(2σ²)), set to zero where |x − c| > cutoff.
    GaussianBump {
        field: StateField,
        amplitude: f64,
        center: (f64, f64),
        width: f64,
        cutoff: Option<f64>,
    },
}

impl InitialCondition {
    pub fn build(&self, grid: &Grid) -> Result<State, InitialError> {
        let mut s = State::zeros(*grid);
        match *self {
            InitialCondition::Zero => {}
            InitialCondition::SineMode {
                field,
                amplitude,
                modes: (m, n),
            } => {
                if m == 0 || n == 0 {
                    return Err(InitialError::InvalidMode);
                }
                if !amplitude.is_finite() {
                    return Err(InitialError::NonFinite);
                }
                let kx = m as f64 * PI / grid.lx;
                let ky = n as f64 * PI / grid.ly;
                let f = Field::from_fn(*grid, |x, y| amplitude * (kx * x).sin() * (ky * y).sin());
                s.field_mut(field).copy_from_slice(f.values());
            }
            InitialCondition::GaussianBump {
                field,
                amplitude,
                center,
                width,
                cutoff,
            } => {
                if !(width > 0.0 && width.is_finite()) {
                    return Err(InitialError::InvalidWidth(width));
                }
                if !amplitude.is_finite() {
                    return Err(InitialError::NonFinite);
                }
                let f = Field::from_fn(*grid, |x, y| {
                    let r2 = (x - center.0).powi(2) + (y - center.1).powi(2);
                    match cutoff {
                        Some(rc) if r2 > rc * rc => 0.0,
                        _ => amplitude * (-r2 / (2.0 * width * width)).exp(),
                    }
                });
                s.field_mut(field).copy_from_slice(f.values());
            }
        }
        Ok(s)
    }
}
