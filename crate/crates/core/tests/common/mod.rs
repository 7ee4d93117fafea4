// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use janglab_core::barrier::{default_candidates, find_r0};
use janglab_core::geometry::{make_dataset, select_capillary_config, CapillaryConfig, Family, RadialInitialData};
use janglab_core::grid::{build_grid, RadialGrid, Spacing};

pub struct Setup {
    pub data: RadialInitialData,
    pub grid: RadialGrid,
    pub r0: f64,
    pub config: CapillaryConfig,
}

pub fn perturbed(n: usize, seed: u64, intervals: usize, stretch: f64, r_max: f64) -> Setup {
    perturbed_amp(n, seed, intervals, stretch, r_max, janglab_core::geometry::data::default_amplitude())
}

pub fn perturbed_amp(n: usize, seed: u64, intervals: usize, stretch: f64, r_max: f64, amplitude: f64) -> Setup {
    let grid = build_grid(r_max, intervals, Spacing::Geometric { stretch }).unwrap();
    let data = make_dataset(&Family::PerturbedDec { amplitude }, n, &grid, Some(seed)).unwrap();
    let r0 = find_r0(&data, &grid, &default_candidates(&data, 8)).unwrap();
    let config = select_capillary_config(&data, r0, &grid).unwrap();
    Setup { data, grid, r0, config }
}

pub fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
