// SPDX-License-Identifier: Apache-2.0

pub mod capillary;
pub mod curvature;
pub mod data;

pub use capillary::{check_capillary_config, select_capillary_config, CapillaryConfig};
pub use curvature::{constraint_fields, geodesic_distance, scalar_curvature, ConstraintFields};
pub use data::{make_dataset, DatasetSpec, Extrinsic, Family, GridSpec, Local, RadialInitialData};
