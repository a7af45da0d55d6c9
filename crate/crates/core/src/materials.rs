//! Optical constants at the working wavelength.
//!
//! There is no dispersion model: every entry is a single complex index
//! valid near the registry wavelength (1550 nm by default). Lookups more
//! than [`WAVELENGTH_TOLERANCE_NM`] away from it are refused.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub const DEFAULT_WAVELENGTH_NM: f64 = 1550.0;
pub const WAVELENGTH_TOLERANCE_NM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalMaterial {
    pub name: String,
    pub n: f64,
    /// Extinction coefficient, the imaginary part of the index.
    pub kappa: f64,
    pub wavelength_nm: f64,
}

impl OpticalMaterial {
    pub fn new(name: impl Into<String>, n: f64, kappa: f64, wavelength_nm: f64) -> Result<Self> {
        let m = Self {
            name: name.into(),
            n,
            kappa,
            wavelength_nm,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.n > 0.0, "material {}: n must be > 0, got {}", self.name, self.n);
        ensure!(
            self.kappa >= 0.0,
            "material {}: kappa must be >= 0, got {}",
            self.name,
            self.kappa
        );
        ensure!(
            self.wavelength_nm > 0.0,
            "material {}: wavelength must be > 0",
            self.name
        );
        Ok(())
    }

    pub fn index(&self) -> Complex64 {
        Complex64::new(self.n, self.kappa)
    }

    /// Relative permittivity (n + i kappa)^2.
    pub fn permittivity(&self) -> Complex64 {
        let idx = self.index();
        idx * idx
    }
}

/// Entry in a configuration file's `[materials]` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialConstants {
    pub n: f64,
    #[serde(default)]
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialRegistry {
    pub wavelength_nm: f64,
    entries: BTreeMap<String, MaterialConstants>,
}

impl Default for MaterialRegistry {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        let mut put = |name: &str, n: f64, kappa: f64| {
            entries.insert(name.to_string(), MaterialConstants { n, kappa });
        };
        // Substrate indices of congruent LiNbO3 at 1550 nm.
        put("linbo3_no", 2.211, 0.0);
        put("linbo3_ne", 2.133, 0.0);
        put("si", 3.48, 0.0);
        put("sio2", 1.444, 0.0);
        // Placeholder for amorphous WSi; meant to be calibrated, see
        // `modesolver::absorption::calibrate_wire_kappa`.
        put("wsi", 4.2, 4.8);
        put("adhesive", 1.5, 0.0);
        put("air", 1.0, 0.0);
        Self {
            wavelength_nm: DEFAULT_WAVELENGTH_NM,
            entries,
        }
    }
}

impl MaterialRegistry {
    /// Registry defaults with `overrides` merged on top.
    pub fn with_overrides<'a>(
        overrides: impl IntoIterator<Item = (&'a String, &'a MaterialConstants)>,
    ) -> Result<Self> {
        let mut reg = Self::default();
        for (name, c) in overrides {
            reg.insert(name, *c)?;
        }
        Ok(reg)
    }

    pub fn insert(&mut self, name: &str, constants: MaterialConstants) -> Result<()> {
        OpticalMaterial::new(name, constants.n, constants.kappa, self.wavelength_nm)?;
        self.entries.insert(name.to_string(), constants);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn lookup(&self, name: &str, wavelength_nm: f64) -> Result<OpticalMaterial> {
        let c = self.entries.get(name).ok_or_else(|| Error::UnknownMaterial {
            name: name.to_string(),
            known: self.names(),
        })?;
        ensure!(
            (wavelength_nm - self.wavelength_nm).abs() <= WAVELENGTH_TOLERANCE_NM,
            "registry holds constants at {} nm only; requested {} nm",
            self.wavelength_nm,
            wavelength_nm
        );
        OpticalMaterial::new(name, c.n, c.kappa, wavelength_nm)
    }
}

/// Look up a material in the default registry.
pub fn material_lookup(name: &str, wavelength_nm: f64) -> Result<OpticalMaterial> {
    MaterialRegistry::default().lookup(name, wavelength_nm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substrate_indices() {
        assert_eq!(material_lookup("linbo3_no", 1550.0).unwrap().n, 2.211);
        assert_eq!(material_lookup("linbo3_ne", 1550.0).unwrap().n, 2.133);
        let air = material_lookup("air", 1550.0).unwrap();
        assert_eq!((air.n, air.kappa), (1.0, 0.0));
    }

    #[test]
    fn unknown_material_lists_known_names() {
        let err = material_lookup("unobtainium", 1550.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unobtainium"));
        assert!(msg.contains("linbo3_no") && msg.contains("wsi"));
    }

    #[test]
    fn far_wavelength_rejected() {
        assert!(material_lookup("si", 1310.0).is_err());
        assert!(material_lookup("si", 1556.3).is_ok());
    }

    #[test]
    fn overrides_are_validated() {
        let mut reg = MaterialRegistry::default();
        assert!(reg.insert("bad", MaterialConstants { n: -1.0, kappa: 0.0 }).is_err());
        assert!(reg.insert("bad", MaterialConstants { n: 2.0, kappa: -0.1 }).is_err());
        reg.insert("wsi", MaterialConstants { n: 4.0, kappa: 5.0 }).unwrap();
        assert_eq!(reg.lookup("wsi", 1550.0).unwrap().kappa, 5.0);
    }
}
