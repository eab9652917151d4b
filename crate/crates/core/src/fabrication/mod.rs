//! Printable parts: thickened class patches with connector holes, hinge
//! connectors and the per-class export.

mod export;
mod hinge;
mod patch;
mod placement;
mod solid;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use export::{export_parts, write_solid_stl, ClassEntry, HingeEntry, Manifest, TransformEntry};
pub use hinge::{make_hinge, HingeConnector};
pub use patch::{
    cut_holes_curved, cut_holes_planar, thicken, thicken_class, thicken_curved_class, HoleCavity, PatchLayers,
    ThickenedPatch,
};
pub use placement::{
    canonical_triangle, kabsch, place_face, place_triangle, placement_residual, rank_corners, reflect, Placement,
};
pub use solid::Solid;

/// Part dimensions in model units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FabConfig {
    pub thickness: f64,
    /// Hole extent along the patch edge.
    pub hole_width: f64,
    /// Hole extent across the patch thickness.
    pub hole_height: f64,
    /// Hole extent into the patch.
    pub hole_depth: f64,
    pub clearance: f64,
    pub rod_diameter: f64,
}

impl Default for FabConfig {
    /// Sized for models with a mean edge near 0.2, printed at 100 mm per unit.
    fn default() -> Self {
        FabConfig {
            thickness: 0.03,
            hole_width: 0.03,
            hole_height: 0.01,
            hole_depth: 0.02,
            clearance: 0.0015,
            rod_diameter: 0.003,
        }
    }
}

impl FabConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("thickness", self.thickness),
            ("hole_width", self.hole_width),
            ("hole_height", self.hole_height),
            ("hole_depth", self.hole_depth),
            ("rod_diameter", self.rod_diameter),
        ];
        for (name, v) in dims {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.clearance >= 0.0 && self.clearance.is_finite()) {
            return Err(Error::Config(format!(
                "clearance must be non-negative, got {}",
                self.clearance
            )));
        }
        for (name, v) in &dims[1..4] {
            if self.clearance >= v / 2.0 {
                return Err(Error::Config(format!(
                    "clearance {} must be below half of {name} ({v})",
                    self.clearance
                )));
            }
        }
        Ok(())
    }

    /// Tongue dimensions `[width, height, depth]`: the hole shrunk by the
    /// clearance on both sides of every axis.
    pub fn tongue(&self) -> [f64; 3] {
        let c2 = 2.0 * self.clearance;
        [self.hole_width - c2, self.hole_height - c2, self.hole_depth - c2]
    }

    pub fn channel_diameter(&self) -> f64 {
        self.rod_diameter + self.clearance
    }
}
