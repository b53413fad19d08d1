//! On-disk layouts for signature and occluder libraries.
//!
//! A signature database is a directory of view directories, one per
//! (vehicle, aspect):
//!
//! ```text
//! signatures/
//!   mbt_070deg/
//!     ta.png          # ambient-state chip (16-bit gray + .meta sidecar)
//!     tf.png          # operating-state chip
//!     regions.png     # 8-bit label codes: 0 none, 1 engine, 2 body,
//!                     # 3 exhaust, 4 windows, 5 running_gear
//!     silhouette.png  # 8-bit mask, 0/255
//!     meta.json       # vehicle_id, aspect_azimuth_deg, calibration note
//! ```
//!
//! Occluders use the same shape minus the two-state pairing: a single
//! `chip.png` + `silhouette.png` + `meta.json`. Expanded (pre-blended)
//! variants are written the same way with their draw provenance in meta.json.

use crate::compositing::Occluder;
use crate::error::{Error, Result};
use crate::io;
use crate::thermal::{LambdaMap, SignatureVariant, ThermalSignature};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// meta.json of one signature view directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignatureMeta {
    pub vehicle_id: String,
    /// View azimuth in degrees: 0 = frontal, clockwise.
    pub aspect_azimuth_deg: f64,
    /// Optional gray-level / kelvin conversion note for the chips.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gl_per_kelvin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// meta.json of one occluder directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccluderMeta {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// meta.json of one expanded-variant directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantMeta {
    pub vehicle_id: String,
    pub aspect_azimuth_deg: f64,
    pub configuration: String,
    pub variant_index: u32,
    pub seed: u64,
    pub lambdas: LambdaMap,
}

/// An in-memory signature database, sorted by (vehicle, azimuth) so lookups
/// and random picks are independent of directory read order.
#[derive(Debug, Clone)]
pub struct SignatureDb {
    entries: Vec<ThermalSignature>,
}

impl SignatureDb {
    pub fn from_signatures(mut entries: Vec<ThermalSignature>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::NotFound("signature database is empty".into()));
        }
        entries.sort_by(|a, b| {
            a.vehicle_id()
                .cmp(b.vehicle_id())
                .then(a.aspect_azimuth_deg().total_cmp(&b.aspect_azimuth_deg()))
        });
        Ok(Self { entries })
    }

    /// Load every view directory under `root`.
    pub fn load_dir(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::NotFound(format!(
                "signature database directory {} does not exist",
                root.display()
            )));
        }
        let mut entries = Vec::new();
        for entry in fs::read_dir(root)? {
            let dir = entry?.path();
            if !dir.is_dir() || !dir.join("meta.json").exists() {
                continue;
            }
            entries.push(load_signature_dir(&dir)?);
        }
        Self::from_signatures(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ThermalSignature> {
        self.entries.iter()
    }

    pub fn get(&self, index: usize) -> Option<&ThermalSignature> {
        self.entries.get(index)
    }

    /// Entries for one vehicle, sorted by azimuth.
    pub fn views_of(&self, vehicle_id: &str) -> Vec<&ThermalSignature> {
        self.entries
            .iter()
            .filter(|s| s.vehicle_id() == vehicle_id)
            .collect()
    }

    /// The view of `vehicle_id` closest to `azimuth_deg` in circular angular
    /// distance; ties go to the smaller stored azimuth.
    pub fn select_nearest(&self, vehicle_id: &str, azimuth_deg: f64) -> Result<&ThermalSignature> {
        let views = self.views_of(vehicle_id);
        if views.is_empty() {
            return Err(Error::NotFound(format!(
                "no signatures for vehicle '{vehicle_id}'"
            )));
        }
        let want = azimuth_deg.rem_euclid(360.0);
        let mut best: Option<(&ThermalSignature, f64)> = None;
        for sig in views {
            let d = circular_distance_deg(sig.aspect_azimuth_deg(), want);
            // strict less keeps the first (smallest-azimuth) entry on ties
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((sig, d));
            }
        }
        Ok(best.expect("views is non-empty").0)
    }
}

/// Circular angular distance in degrees, in [0, 180].
pub fn circular_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Read one signature view directory.
pub fn load_signature_dir(dir: &Path) -> Result<ThermalSignature> {
    let meta: SignatureMeta = serde_json::from_reader(fs::File::open(dir.join("meta.json"))?)?;
    let ambient = io::load_image_png16(&dir.join("ta.png"))?;
    let operating = io::load_image_png16(&dir.join("tf.png"))?;
    let regions = io::load_region_map_png(&dir.join("regions.png"))?;
    let silhouette = io::load_mask_png(&dir.join("silhouette.png"))?;
    ThermalSignature::new(
        meta.vehicle_id,
        meta.aspect_azimuth_deg,
        ambient,
        operating,
        regions,
        silhouette,
    )
}

/// Write one signature view directory.
pub fn save_signature_dir(sig: &ThermalSignature, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::save_image_png16(sig.ambient(), &dir.join("ta.png"))?;
    io::save_image_png16(sig.operating(), &dir.join("tf.png"))?;
    io::save_region_map_png(sig.regions(), &dir.join("regions.png"))?;
    io::save_mask_png(sig.silhouette(), &dir.join("silhouette.png"))?;
    let meta = SignatureMeta {
        vehicle_id: sig.vehicle_id().to_string(),
        aspect_azimuth_deg: sig.aspect_azimuth_deg(),
        gl_per_kelvin: None,
        note: Some("azimuth convention: 0 deg frontal, clockwise".to_string()),
    };
    serde_json::to_writer_pretty(fs::File::create(dir.join("meta.json"))?, &meta)?;
    Ok(())
}

/// Read an occluder directory (chip.png + silhouette.png + meta.json).
pub fn load_occluder_dir(dir: &Path) -> Result<Occluder> {
    let meta: OccluderMeta = serde_json::from_reader(fs::File::open(dir.join("meta.json"))?)?;
    let chip = io::load_image_png16(&dir.join("chip.png"))?;
    let silhouette = io::load_mask_png(&dir.join("silhouette.png"))?;
    Occluder::new(meta.name, chip, silhouette)
}

/// Write an occluder directory.
pub fn save_occluder_dir(occ: &Occluder, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::save_image_png16(occ.chip(), &dir.join("chip.png"))?;
    io::save_mask_png(occ.silhouette(), &dir.join("silhouette.png"))?;
    let meta = OccluderMeta {
        name: occ.name().to_string(),
        note: None,
    };
    serde_json::to_writer_pretty(fs::File::create(dir.join("meta.json"))?, &meta)?;
    Ok(())
}

/// Write expanded variants, one directory per variant.
pub fn save_variants(variants: &[SignatureVariant], root: &Path) -> Result<()> {
    fs::create_dir_all(root)?;
    for v in variants {
        let dir = root.join(format!(
            "{}_{:03.0}deg_{}_v{:03}",
            v.vehicle_id, v.aspect_azimuth_deg, v.configuration, v.variant_index
        ));
        fs::create_dir_all(&dir)?;
        io::save_image_png16(&v.chip, &dir.join("chip.png"))?;
        io::save_mask_png(&v.silhouette, &dir.join("silhouette.png"))?;
        let meta = VariantMeta {
            vehicle_id: v.vehicle_id.clone(),
            aspect_azimuth_deg: v.aspect_azimuth_deg,
            configuration: v.configuration.clone(),
            variant_index: v.variant_index,
            seed: v.seed,
            lambdas: v.lambdas.clone(),
        };
        serde_json::to_writer_pretty(fs::File::create(dir.join("meta.json"))?, &meta)?;
    }
    Ok(())
}
