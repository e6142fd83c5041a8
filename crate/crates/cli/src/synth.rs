//! `morphrom synth`: reproducible plate and airfoil families.

use anyhow::{Context, Result};
use morphrom::mesh::{
    airfoil_family, export_vtk, halton, plate_family_radii, save_mesh, synth_airfoil, synth_plate,
    synth_square_notch_plate, AirfoilParams, AirfoilRanges, Mesh2D,
};
use morphrom::regress::synthetic_scalar_oracle;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::load;
use crate::output::{ensure_dir, write_value};
use crate::{exit, Common};

fn default_n() -> usize {
    40
}

fn default_h() -> f64 {
    0.05
}

fn default_reference_radius() -> f64 {
    0.5
}

fn default_base() -> AirfoilParams {
    AirfoilParams::naca(0.02, 0.45, 0.12)
}

/// Ranges of the physical parameters `(v0, theta0)` attached to each
/// airfoil, sampled from the Halton sequence in bases 7 and 11.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSpec {
    pub v0: [f64; 2],
    pub theta0: [f64; 2],
}

impl Default for ScalarSpec {
    fn default() -> Self {
        ScalarSpec { v0: [0.5, 1.5], theta0: [-0.2, 0.2] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthConfig {
    /// Plates with notch radii `0.2 + 0.6 i / n`, `i = 1..n`.
    Plate {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_h")]
        h: f64,
        #[serde(default = "default_reference_radius")]
        reference_radius: f64,
        /// Explicit radii replacing the default spacing.
        #[serde(default)]
        radii: Option<Vec<f64>>,
    },
    /// NACA 4-digit airfoils from a Halton design.
    Airfoil {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        ranges: AirfoilRanges,
        /// Reference profile and mesh settings shared by the family.
        #[serde(default = "default_base")]
        base: AirfoilParams,
        /// Attach `(v0, theta0)` and the drag-like scalar to every sample.
        #[serde(default)]
        scalar: Option<ScalarSpec>,
    },
    /// One plate with square notches, outside the circular family.
    SquareNotch {
        a: f64,
        #[serde(default = "default_h")]
        h: f64,
        #[serde(default = "default_reference_radius")]
        reference_radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSample {
    pub id: String,
    /// Target polyline, relative to the manifest.
    pub target: String,
    pub params: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: SynthConfig,
    pub reference: String,
    pub samples: Vec<ManifestSample>,
}

struct Sample {
    id: String,
    mesh: Mesh2D,
    params: Value,
    mu: Vec<f64>,
    outputs: Vec<f64>,
}

fn build(cfg: &SynthConfig) -> Result<(Mesh2D, Vec<Sample>)> {
    let sample = |id: String, mesh: Mesh2D, params: Value| Sample { id, mesh, params, mu: Vec::new(), outputs: Vec::new() };
    match cfg {
        SynthConfig::Plate { n, h, reference_radius, radii } => {
            let reference = synth_plate(*reference_radius, *h)?;
            let radii = radii.clone().unwrap_or_else(|| plate_family_radii(*n));
            let samples = radii
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    let m = synth_plate(r, *h).with_context(|| format!("plate {i} (radius {r})"))?;
                    Ok(sample(format!("plate_{i:03}"), m, json!({ "radius": r, "h": h })))
                })
                .collect::<Result<_>>()?;
            Ok((reference, samples))
        }
        SynthConfig::Airfoil { n, seed, ranges, base, scalar } => {
            let reference = synth_airfoil(base)?;
            let mut samples = Vec::with_capacity(*n);
            for (i, p) in airfoil_family(*n, *seed, ranges, base).iter().enumerate() {
                let m = synth_airfoil(p).with_context(|| format!("airfoil {i} ({p:?})"))?;
                let mut s = sample(format!("airfoil_{i:03}"), m, serde_json::to_value(p)?);
                if let Some(spec) = scalar {
                    let k = *seed as usize + i + 1;
                    let v0 = spec.v0[0] + (spec.v0[1] - spec.v0[0]) * halton(k, 7);
                    let theta0 = spec.theta0[0] + (spec.theta0[1] - spec.theta0[0]) * halton(k, 11);
                    let poly = s.mesh.boundary_polyline(s.mesh.vertices());
                    s.outputs = vec![synthetic_scalar_oracle(&poly, v0, theta0)?];
                    s.mu = vec![v0, theta0];
                }
                samples.push(s);
            }
            Ok((reference, samples))
        }
        SynthConfig::SquareNotch { a, h, reference_radius } => {
            let reference = synth_plate(*reference_radius, *h)?;
            let m = synth_square_notch_plate(*a, *h)?;
            Ok((reference, vec![sample("square_notch".into(), m, json!({ "a": a, "h": h }))]))
        }
    }
}

pub fn run(c: &Common) -> Result<u8> {
    let loaded = load::<SynthConfig>(c.config.as_deref(), &c.sets)?;
    let cfg = loaded.config;
    let (reference, samples) = build(&cfg)?;
    let targets = c.out.join("targets");
    ensure_dir(&targets)?;
    save_mesh(&reference, c.out.join("reference.json"))?;
    export_vtk(&reference, None, &[], c.out.join("reference.vtk"))?;
    let mut manifest = Manifest { config: cfg, reference: "reference.json".into(), samples: Vec::new() };
    for s in samples {
        let rel = format!("targets/{}.json", s.id);
        s.mesh.boundary_polyline(s.mesh.vertices()).save(c.out.join(&rel))?;
        manifest.samples.push(ManifestSample { id: s.id, target: rel, params: s.params, mu: s.mu, outputs: s.outputs });
    }
    write_value(&c.out.join("manifest.json"), &manifest)?;
    log::info!("wrote {} samples to {}", manifest.samples.len(), c.out.display());
    Ok(exit::OK)
}
