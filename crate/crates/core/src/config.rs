//! Device configuration files: JSON in reporting units (GHz, MHz, mT, nm, um),
//! converted to SI and angular units on load.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::params::{CouplingModel, CouplingRule, MagnonParams, ResonatorParams};
use crate::units::{angular_to_ghz, angular_to_mhz, ghz_to_angular, mhz_to_angular, mt_to_tesla, tesla_to_mt};

/// Full parameter set of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceConfig {
    pub device_id: Option<String>,
    pub resonator: ResonatorParams,
    pub magnon: MagnonParams,
    pub coupling: CouplingModel,
    pub temperature_k: Option<f64>,
    pub drive_power_dbm: Option<f64>,
}

const TOP_KEYS: [&str; 6] = ["device_id", "resonator", "magnon", "coupling", "temperature_k", "drive_power_dbm"];
const RESONATOR_KEYS: [&str; 10] = [
    "omega_r0_ghz",
    "gamma_r_mhz_per_t",
    "kappa_r0_mhz",
    "kappa_r_slope_mhz_per_t",
    "b_ref_t",
    "kappa_ext_mhz",
    "phi_rad",
    "attenuation_a",
    "zr_ohm",
    "wire_width_um",
];
const MAGNON_KEYS: [&str; 8] = [
    "gamma_ghz_per_t",
    "mu0_meff_mt",
    "lambda_ex_sq_m2",
    "thickness_nm",
    "kappa_m_mhz",
    "ms_mt",
    "volume_m3",
    "n_spins",
];
const COUPLING_KEYS: [&str; 3] = ["g_mhz", "n_max", "g_rule"];

struct Section<'a> {
    name: &'a str,
    map: &'a Map<String, Value>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Map<String, Value>, name: &'a str, allowed: &[&str]) -> Result<Self> {
        let map = root
            .get(name)
            .ok_or_else(|| Error::config(name, "missing section"))?
            .as_object()
            .ok_or_else(|| Error::config(name, "expected an object"))?;
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::config(format!("{name}.{k}"), "unknown key"));
        }
        Ok(Self { name, map })
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{}", self.name, k)
    }

    fn opt(&self, k: &str) -> Result<Option<f64>> {
        match self.map.get(k) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => {
                let x = v.as_f64().ok_or_else(|| Error::config(self.key(k), "expected a number"))?;
                if !x.is_finite() {
                    return Err(Error::config(self.key(k), "must be finite"));
                }
                Ok(Some(x))
            }
        }
    }

    fn req(&self, k: &str) -> Result<f64> {
        self.opt(k)?.ok_or_else(|| Error::config(self.key(k), "required key is missing"))
    }

    fn positive(&self, k: &str, v: f64) -> Result<f64> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::config(self.key(k), format!("must be positive, got {v}")))
        }
    }

    fn non_negative(&self, k: &str, v: f64) -> Result<f64> {
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::config(self.key(k), format!("must be non-negative, got {v}")))
        }
    }
}

impl DeviceConfig {
    /// Parses a configuration; `default_b_ref` anchors the damping model when
    /// `resonator.b_ref_t` is absent.
    pub fn from_json(value: &Value, default_b_ref: f64) -> Result<Self> {
        let root = value.as_object().ok_or_else(|| Error::config("<root>", "expected a JSON object"))?;
        if let Some(k) = root.keys().find(|k| !TOP_KEYS.contains(&k.as_str())) {
            return Err(Error::config(k.clone(), "unknown key"));
        }
        let device_id = match root.get("device_id") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(Error::config("device_id", "expected a string")),
        };
        let top_num = |k: &str| -> Result<Option<f64>> {
            match root.get(k) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => v.as_f64().map(Some).ok_or_else(|| Error::config(k, "expected a number")),
            }
        };

        let r = Section::new(root, "resonator", &RESONATOR_KEYS)?;
        let resonator = ResonatorParams {
            omega_r0: ghz_to_angular(r.positive("omega_r0_ghz", r.req("omega_r0_ghz")?)?),
            gamma_r: mhz_to_angular(r.opt("gamma_r_mhz_per_t")?.unwrap_or(0.0)),
            kappa_r0: mhz_to_angular(r.positive("kappa_r0_mhz", r.req("kappa_r0_mhz")?)?),
            kappa_r_slope: mhz_to_angular(r.opt("kappa_r_slope_mhz_per_t")?.unwrap_or(0.0)),
            b_ref: r.opt("b_ref_t")?.unwrap_or(default_b_ref),
            kappa_ext: mhz_to_angular(r.non_negative("kappa_ext_mhz", r.req("kappa_ext_mhz")?)?),
            phi: r.opt("phi_rad")?.unwrap_or(0.0),
            attenuation_a: r.positive("attenuation_a", r.opt("attenuation_a")?.unwrap_or(1.0))?,
            z_r: match r.opt("zr_ohm")? {
                Some(z) => r.positive("zr_ohm", z)?,
                None => f64::NAN,
            },
            wire_width: match r.opt("wire_width_um")? {
                Some(w) => r.positive("wire_width_um", w)? * 1e-6,
                None => f64::NAN,
            },
        };

        let m = Section::new(root, "magnon", &MAGNON_KEYS)?;
        let magnon = MagnonParams {
            gamma: ghz_to_angular(m.positive("gamma_ghz_per_t", m.req("gamma_ghz_per_t")?)?),
            mu0_meff: mt_to_tesla(m.req("mu0_meff_mt")?),
            lambda_ex_sq: m.non_negative("lambda_ex_sq_m2", m.opt("lambda_ex_sq_m2")?.unwrap_or(0.0))?,
            thickness: m.positive("thickness_nm", m.req("thickness_nm")?)? * 1e-9,
            kappa_m: mhz_to_angular(m.non_negative("kappa_m_mhz", m.req("kappa_m_mhz")?)?),
            ms_field: mt_to_tesla(m.non_negative("ms_mt", m.opt("ms_mt")?.unwrap_or(0.0))?),
            volume: m.non_negative("volume_m3", m.opt("volume_m3")?.unwrap_or(0.0))?,
            n_spins: m.non_negative("n_spins", m.opt("n_spins")?.unwrap_or(0.0))?,
        };

        let c = Section::new(root, "coupling", &COUPLING_KEYS)?;
        let g = mhz_to_angular(c.non_negative("g_mhz", c.req("g_mhz")?)?);
        let n_max = match c.map.get("n_max") {
            None | Some(Value::Null) => 0,
            Some(v) => v
                .as_u64()
                .ok_or_else(|| Error::config("coupling.n_max", "expected a non-negative integer"))? as usize,
        };
        let rule = match c.map.get("g_rule") {
            None | Some(Value::Null) => CouplingRule::InverseIndex,
            Some(Value::String(s)) if s == "g_over_n_plus_1" => CouplingRule::InverseIndex,
            Some(Value::String(s)) => {
                return Err(Error::config("coupling.g_rule", format!("unknown rule `{s}`; use \"g_over_n_plus_1\" or a list of MHz values")))
            }
            Some(Value::Array(list)) => {
                let mut out = Vec::with_capacity(list.len());
                for (i, v) in list.iter().enumerate() {
                    let x = v
                        .as_f64()
                        .filter(|x| *x >= 0.0)
                        .ok_or_else(|| Error::config(format!("coupling.g_rule[{i}]"), "expected a non-negative number"))?;
                    out.push(mhz_to_angular(x));
                }
                if out.len() != n_max {
                    return Err(Error::config(
                        "coupling.g_rule",
                        format!("list has {} entries but n_max = {n_max}", out.len()),
                    ));
                }
                CouplingRule::Explicit(out)
            }
            Some(_) => return Err(Error::config("coupling.g_rule", "expected a string or a list")),
        };
        let coupling = CouplingModel::new(g, n_max, rule).map_err(|e| Error::config("coupling", e.to_string()))?;

        Ok(Self {
            device_id,
            resonator,
            magnon,
            coupling,
            temperature_k: top_num("temperature_k")?,
            drive_power_dbm: top_num("drive_power_dbm")?,
        })
    }

    pub fn from_path(path: &Path, default_b_ref: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&value, default_b_ref)
    }

    /// Inverse of [`Self::from_json`].
    pub fn to_json(&self) -> Value {
        let r = &self.resonator;
        let m = &self.magnon;
        let mut res = json!({
            "omega_r0_ghz": angular_to_ghz(r.omega_r0),
            "gamma_r_mhz_per_t": angular_to_mhz(r.gamma_r),
            "kappa_r0_mhz": angular_to_mhz(r.kappa_r0),
            "kappa_r_slope_mhz_per_t": angular_to_mhz(r.kappa_r_slope),
            "b_ref_t": r.b_ref,
            "kappa_ext_mhz": angular_to_mhz(r.kappa_ext),
            "phi_rad": r.phi,
            "attenuation_a": r.attenuation_a,
        });
        if r.z_r.is_finite() {
            res["zr_ohm"] = json!(r.z_r);
        }
        if r.wire_width.is_finite() {
            res["wire_width_um"] = json!(r.wire_width * 1e6);
        }
        let rule = match &self.coupling.rule {
            CouplingRule::InverseIndex => json!("g_over_n_plus_1"),
            CouplingRule::Explicit(list) => json!(list.iter().map(|g| angular_to_mhz(*g)).collect::<Vec<_>>()),
        };
        let mut out = json!({
            "resonator": res,
            "magnon": {
                "gamma_ghz_per_t": angular_to_ghz(m.gamma),
                "mu0_meff_mt": tesla_to_mt(m.mu0_meff),
                "lambda_ex_sq_m2": m.lambda_ex_sq,
                "thickness_nm": m.thickness * 1e9,
                "kappa_m_mhz": angular_to_mhz(m.kappa_m),
                "ms_mt": tesla_to_mt(m.ms_field),
                "volume_m3": m.volume,
                "n_spins": m.n_spins,
            },
            "coupling": {
                "g_mhz": angular_to_mhz(self.coupling.g_uniform),
                "n_max": self.coupling.n_max,
                "g_rule": rule,
            },
        });
        if let Some(id) = &self.device_id {
            out["device_id"] = json!(id);
        }
        if let Some(t) = self.temperature_k {
            out["temperature_k"] = json!(t);
        }
        if let Some(p) = self.drive_power_dbm {
            out["drive_power_dbm"] = json!(p);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Value {
        json!({
            "device_id": "dev36",
            "resonator": {"omega_r0_ghz": 3.5737, "gamma_r_mhz_per_t": -50.0, "kappa_r0_mhz": 0.8377,
                          "kappa_r_slope_mhz_per_t": 2.854, "b_ref_t": 0.0809, "kappa_ext_mhz": 0.3186,
                          "zr_ohm": 17.0, "wire_width_um": 10.0},
            "magnon": {"gamma_ghz_per_t": 28.0, "mu0_meff_mt": 53.614, "thickness_nm": 300.0, "kappa_m_mhz": 30.62},
            "coupling": {"g_mhz": 90.31}
        })
    }

    #[test]
    fn parses_and_converts_units() {
        let d = DeviceConfig::from_json(&sample(), 0.0).unwrap();
        assert!((d.resonator.omega_r0 - ghz_to_angular(3.5737)).abs() < 1e-3);
        assert!((d.magnon.mu0_meff - 0.053614).abs() < 1e-15);
        assert!((d.resonator.wire_width - 10e-6).abs() < 1e-18);
        assert_eq!(d.coupling.n_max, 0);
    }

    #[test]
    fn json_round_trip() {
        let d = DeviceConfig::from_json(&sample(), 0.0).unwrap();
        let back = DeviceConfig::from_json(&d.to_json(), 0.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
        assert!(close(d.resonator.omega_r0, back.resonator.omega_r0));
        assert!(close(d.magnon.kappa_m, back.magnon.kappa_m));
        assert!(close(d.coupling.g_uniform, back.coupling.g_uniform));
    }

    #[test]
    fn errors_name_the_key() {
        let mut v = sample();
        v["magnon"].as_object_mut().unwrap().remove("kappa_m_mhz");
        let e = DeviceConfig::from_json(&v, 0.0).unwrap_err().to_string();
        assert!(e.contains("magnon.kappa_m_mhz"), "{e}");

        let mut v = sample();
        v["resonator"]["kappa_r0_mhz"] = json!("fast");
        let e = DeviceConfig::from_json(&v, 0.0).unwrap_err().to_string();
        assert!(e.contains("resonator.kappa_r0_mhz"), "{e}");

        let mut v = sample();
        v["coupling"]["gee"] = json!(1);
        let e = DeviceConfig::from_json(&v, 0.0).unwrap_err().to_string();
        assert!(e.contains("coupling.gee"), "{e}");
    }

    #[test]
    fn explicit_rule_length_checked() {
        let mut v = sample();
        v["coupling"]["n_max"] = json!(2);
        v["coupling"]["g_rule"] = json!([45.0]);
        let e = DeviceConfig::from_json(&v, 0.0).unwrap_err().to_string();
        assert!(e.contains("coupling.g_rule"), "{e}");
        v["coupling"]["g_rule"] = json!([45.0, 30.0]);
        let d = DeviceConfig::from_json(&v, 0.0).unwrap();
        assert!((d.coupling.g_n(2) - mhz_to_angular(30.0)).abs() < 1e-9);
    }
}
